//! Model files: a versioned TSV container with weights stored as hex bit
//! patterns, so save/load round-trips are bit-exact.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{ClusterMaps, CrfModel, FeatureConfig, FeatureIndex, LabelSet};
use crate::{Error, Result, Scalar};

const MAGIC: &str = "#crossner-model";
const VERSION: &str = "1";

fn hex<S: Scalar>(value: S) -> String {
    format!("{:016x}", value.to_f64().expect("scalar fits f64").to_bits())
}

fn unhex<S: Scalar>(field: &str, line: usize) -> Result<S> {
    let bits = u64::from_str_radix(field, 16).map_err(|_| Error::Parse {
        line,
        msg: format!("bad weight `{field}`"),
    })?;
    S::from_f64(f64::from_bits(bits)).ok_or_else(|| Error::Parse {
        line,
        msg: "weight out of range for the scalar type".into(),
    })
}

fn check_clean(kind: &str, value: &str) -> Result<()> {
    if value.is_empty() || value.contains(['\t', '\n']) || (kind == "cluster id" && value.contains(',')) {
        return Err(Error::data(format!("{kind} `{value}` cannot be serialized")));
    }
    Ok(())
}

/// Serializes a model. Everything the tagger needs at decode time is
/// included, cluster lookup tables too.
pub fn write_model<S: Scalar, W: Write>(model: &CrfModel<S>, writer: &mut W) -> Result<()> {
    writeln!(writer, "{MAGIC}\t{VERSION}")?;
    writeln!(writer, "mask\t{}", u8::from(model.transition_mask()))?;
    writeln!(writer, "sigma\t{}", hex(model.l2_sigma()))?;

    let labels: Vec<&str> = model.labels().iter().collect();
    writeln!(writer, "labels\t{}", labels.join("\t"))?;

    let config = model.config();
    writeln!(writer, "config\tcontext_window\t{}", config.context_window)?;
    writeln!(writer, "config\tuse_shape\t{}", u8::from(config.use_shape))?;
    writeln!(
        writer,
        "config\tuse_prefix_suffix\t{}",
        u8::from(config.use_prefix_suffix)
    )?;
    writeln!(writer, "config\tuse_pos\t{}", u8::from(config.use_pos))?;
    writeln!(writer, "config\tuse_lemma\t{}", u8::from(config.use_lemma))?;
    writeln!(writer, "config\tuse_bigrams\t{}", u8::from(config.use_bigrams))?;
    writeln!(writer, "config\tcluster_window\t{}", config.cluster_window)?;
    for source in &config.cluster_sources {
        check_clean("cluster id", source)?;
    }
    writeln!(
        writer,
        "config\tcluster_sources\t{}",
        config.cluster_sources.join(",")
    )?;

    let index = model.feature_index();
    let weights = model.weights();
    let n_labels = model.labels().len();
    let trans: Vec<String> = (0..n_labels * n_labels)
        .map(|slot| hex(weights[slot]))
        .collect();
    writeln!(writer, "trans\t{}", trans.join("\t"))?;

    writeln!(writer, "nattrs\t{}", index.num_attributes())?;
    for (attr_id, attr) in index.attrs().enumerate() {
        check_clean("feature string", attr)?;
        let block: Vec<String> = (0..n_labels)
            .map(|y| hex(weights[index.emission_slot(attr_id as u32, y as u32)]))
            .collect();
        writeln!(writer, "attr\t{attr}\t{}", block.join("\t"))?;
    }

    writeln!(writer, "clusters\t{}", model.cluster_maps().len())?;
    for (source, map) in model.cluster_maps() {
        check_clean("cluster id", source)?;
        writeln!(writer, "cluster\t{source}\t{}", map.len())?;
        let mut rows: Vec<(&String, &u32)> = map.iter().collect();
        rows.sort_by(|a, b| a.0.cmp(b.0));
        for (word, cid) in rows {
            check_clean("word", word)?;
            writeln!(writer, "cw\t{word}\t{cid}")?;
        }
    }
    writeln!(writer, "end")?;
    Ok(())
}

struct LineReader<R> {
    lines: std::iter::Enumerate<std::io::Lines<R>>,
}

impl<R: BufRead> LineReader<R> {
    fn next(&mut self) -> Result<(usize, String)> {
        match self.lines.next() {
            Some((i, line)) => Ok((i + 1, line?)),
            None => Err(Error::data("model file ended early")),
        }
    }

    fn expect<'a>(&mut self, tag: &str, line: &'a str, lineno: usize) -> Result<Vec<&'a str>> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.first() != Some(&tag) {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected `{tag}` record, found `{line}`"),
            });
        }
        Ok(fields)
    }
}

/// Loads a model written by [`write_model`].
pub fn read_model<S: Scalar, R: BufRead>(reader: R) -> Result<CrfModel<S>> {
    let mut reader = LineReader {
        lines: reader.lines().enumerate(),
    };

    let (lineno, line) = reader.next()?;
    let header: Vec<&str> = line.split('\t').collect();
    if header.first() != Some(&MAGIC) || header.get(1) != Some(&VERSION) {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("not a version-{VERSION} model file"),
        });
    }

    let (lineno, line) = reader.next()?;
    let fields = reader.expect("mask", &line, lineno)?;
    let mask = fields.get(1) == Some(&"1");

    let (lineno, line) = reader.next()?;
    let fields = reader.expect("sigma", &line, lineno)?;
    let sigma: S = unhex(fields.get(1).unwrap_or(&""), lineno)?;

    let (lineno, line) = reader.next()?;
    let fields = reader.expect("labels", &line, lineno)?;
    let labels = LabelSet::from_labels(fields[1..].iter().map(|s| s.to_string()).collect())?;
    let n_labels = labels.len();

    let mut config = FeatureConfig::default();
    for _ in 0..8 {
        let (lineno, line) = reader.next()?;
        let fields = reader.expect("config", &line, lineno)?;
        let bad = || Error::Parse {
            line: lineno,
            msg: format!("bad config record `{line}`"),
        };
        let key = *fields.get(1).ok_or_else(bad)?;
        let value = *fields.get(2).unwrap_or(&"");
        match key {
            "context_window" => config.context_window = value.parse().map_err(|_| bad())?,
            "use_shape" => config.use_shape = value == "1",
            "use_prefix_suffix" => config.use_prefix_suffix = value == "1",
            "use_pos" => config.use_pos = value == "1",
            "use_lemma" => config.use_lemma = value == "1",
            "use_bigrams" => config.use_bigrams = value == "1",
            "cluster_window" => config.cluster_window = value.parse().map_err(|_| bad())?,
            "cluster_sources" => {
                config.cluster_sources = if value.is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(str::to_string).collect()
                }
            }
            _ => return Err(bad()),
        }
    }

    let (lineno, line) = reader.next()?;
    let fields = reader.expect("trans", &line, lineno)?;
    if fields.len() != 1 + n_labels * n_labels {
        return Err(Error::Parse {
            line: lineno,
            msg: "transition block has the wrong width".into(),
        });
    }
    let mut trans_weights = Vec::with_capacity(n_labels * n_labels);
    for field in &fields[1..] {
        trans_weights.push(unhex::<S>(field, lineno)?);
    }

    let (lineno, line) = reader.next()?;
    let fields = reader.expect("nattrs", &line, lineno)?;
    let n_attrs: usize = fields
        .get(1)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse {
            line: lineno,
            msg: "bad attribute count".into(),
        })?;

    let mut index = FeatureIndex::new(n_labels as u32);
    let mut weights = vec![S::zero(); n_labels * n_labels + n_attrs * n_labels];
    weights[..n_labels * n_labels].copy_from_slice(&trans_weights);
    for _ in 0..n_attrs {
        let (lineno, line) = reader.next()?;
        let fields = reader.expect("attr", &line, lineno)?;
        if fields.len() != 2 + n_labels {
            return Err(Error::Parse {
                line: lineno,
                msg: "attribute record has the wrong width".into(),
            });
        }
        let attr_id = index.intern(fields[1]);
        for (y, field) in fields[2..].iter().enumerate() {
            weights[index.emission_slot(attr_id, y as u32)] = unhex(field, lineno)?;
        }
    }
    if index.num_attributes() != n_attrs {
        return Err(Error::data("duplicate feature string in model file"));
    }

    let (lineno, line) = reader.next()?;
    let fields = reader.expect("clusters", &line, lineno)?;
    let n_sources: usize = fields
        .get(1)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse {
            line: lineno,
            msg: "bad cluster-source count".into(),
        })?;
    let mut cluster_maps = ClusterMaps::new();
    for _ in 0..n_sources {
        let (lineno, line) = reader.next()?;
        let fields = reader.expect("cluster", &line, lineno)?;
        let source = fields
            .get(1)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Parse {
                line: lineno,
                msg: "missing cluster id".into(),
            })?
            .to_string();
        let n_words: usize = fields
            .get(2)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse {
                line: lineno,
                msg: "bad cluster word count".into(),
            })?;
        let mut map = HashMap::with_capacity(n_words);
        for _ in 0..n_words {
            let (lineno, line) = reader.next()?;
            let fields = reader.expect("cw", &line, lineno)?;
            let word = fields.get(1).ok_or_else(|| Error::Parse {
                line: lineno,
                msg: "missing word".into(),
            })?;
            let cid: u32 = fields
                .get(2)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: lineno,
                    msg: "bad cluster id".into(),
                })?;
            map.insert(word.to_string(), cid);
        }
        cluster_maps.insert(source, map);
    }

    let (lineno, line) = reader.next()?;
    if line != "end" {
        return Err(Error::Parse {
            line: lineno,
            msg: "missing end marker".into(),
        });
    }

    CrfModel::new(labels, index, weights, config, sigma, mask, cluster_maps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ColumnSpec, LabeledCorpus, Sentence, Token};
    use crate::crf::{train_crf, TrainConfig};
    use std::collections::HashMap;
    use std::io::Cursor;

    fn small_model() -> CrfModel<f64> {
        let sentences = vec![Sentence {
            tokens: vec![
                Token::new("Obama", "B-PER"),
                Token::new("in", "O"),
                Token::new("Berlin", "B-LOC"),
            ],
        }];
        let corpus = LabeledCorpus::new(sentences, ColumnSpec::conll2002()).unwrap();
        let mut clusterings = ClusterMaps::new();
        let mut map = HashMap::new();
        map.insert("Obama".to_string(), 7u32);
        map.insert("Berlin".to_string(), 12u32);
        clusterings.insert("de".to_string(), map);
        let mut config = super::super::FeatureConfig::default();
        config.cluster_sources = vec!["de".to_string()];
        train_crf(
            &corpus,
            &config,
            &TrainConfig { max_iterations: 15, ..TrainConfig::default() },
            &clusterings,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let model = small_model();
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let loaded: CrfModel<f64> = read_model(Cursor::new(&buf)).unwrap();
        assert_eq!(loaded.labels().len(), model.labels().len());
        assert_eq!(
            loaded.feature_index().num_attributes(),
            model.feature_index().num_attributes()
        );
        for (a, b) in model.weights().iter().zip(loaded.weights()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(loaded.cluster_maps(), model.cluster_maps());
        // and the serialized form is stable
        let mut again = Vec::new();
        write_model(&loaded, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn decodes_identically_after_reload() {
        let model = small_model();
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let loaded: CrfModel<f64> = read_model(Cursor::new(&buf)).unwrap();
        let sentence = Sentence {
            tokens: vec![
                Token::new("Merkel", "O"),
                Token::new("in", "O"),
                Token::new("Berlin", "O"),
            ],
        };
        assert_eq!(
            model.viterbi_decode(&sentence).unwrap(),
            loaded.viterbi_decode(&sentence).unwrap()
        );
    }

    #[test]
    fn truncated_file_is_an_error() {
        let model = small_model();
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let truncated = &buf[..buf.len() / 2];
        assert!(read_model::<f64, _>(Cursor::new(truncated)).is_err());
    }
}
