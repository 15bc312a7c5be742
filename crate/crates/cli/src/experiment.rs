//! Declarative experiment driver: a flat key=value run file describes the
//! corpora, the clusterings, and optional merges; the driver trains a
//! baseline plus one model per clustering configuration and emits the F1
//! grid, the per-category delta table, and the OOV coverage list.
//!
//! Run file keys (repeated keys build lists):
//!
//! ```text
//! train = train.conll
//! test = test.conll
//! scheme = bio2            # or iob1
//! separator = space        # or tab
//! word_col = 0
//! ne_col = 3
//! pos_col = 1              # optional; lemma_col/chunk_col likewise
//! cluster = de=clusters_de.tsv
//! cluster = fr=clusters_fr.tsv
//! merge = multi=en+de+fr   # new id = target id + source ids, in order
//! config = max_iterations=100
//! mcnemar = token          # or entity
//! top_oov = 20
//! save_models = 0
//! output_dir = out/
//! ```
//!
//! Relative paths resolve against the run file's directory. Every artifact
//! is a pure function of the run file contents and the referenced files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crossner::clustering::{write_clusters, Clustering};
use crossner::corpus::{ColumnSpec, LabeledCorpus, Separator, TagScheme};
use crossner::crf::{train_crf, write_model, FeatureConfig, TrainConfig};
use crossner::eval::report::{
    render_delta_table, render_grid, render_oov_table, significance_stars, GridRow,
};
use crossner::eval::{delta_report, mcnemar, oov_report, score, EvalReport, McNemarUnit};
use crossner::merge::merge_clusterings;
use crossner::Float;

use crate::args::ExperimentArgs;
use crate::commands::{
    apply_override, cluster_maps, load_clustering, read_labeled, validate_id,
};
use crate::CliError;

/// One merge directive: `id = target + source1 + source2 ...`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeDirective {
    pub id: String,
    pub target: String,
    pub sources: Vec<String>,
}

/// Parsed run file.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub train: PathBuf,
    pub test: PathBuf,
    pub columns: ColumnSpec,
    pub scheme: TagScheme,
    pub clusters: Vec<(String, PathBuf)>,
    pub merges: Vec<MergeDirective>,
    pub overrides: Vec<String>,
    pub mcnemar_unit: McNemarUnit,
    pub top_oov: usize,
    pub save_models: bool,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut train = None;
        let mut test = None;
        let mut columns = ColumnSpec {
            word_col: 0,
            ne_col: 3,
            pos_col: None,
            lemma_col: None,
            chunk_col: None,
            separator: Separator::Space,
        };
        let mut scheme = TagScheme::Bio2;
        let mut clusters: Vec<(String, PathBuf)> = Vec::new();
        let mut merges: Vec<MergeDirective> = Vec::new();
        let mut overrides = Vec::new();
        let mut mcnemar_unit = McNemarUnit::Token;
        let mut top_oov = 20usize;
        let mut save_models = false;
        let mut output_dir = None;

        let resolve = |p: &str| -> PathBuf {
            let path = PathBuf::from(p);
            if path.is_absolute() {
                path
            } else {
                base_dir.join(path)
            }
        };

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!("run file line {}: expected key=value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| {
                CliError::usage(format!("run file line {}: {what}", lineno + 1))
            };
            match key {
                "train" => train = Some(resolve(value)),
                "test" => test = Some(resolve(value)),
                "scheme" => {
                    scheme = value
                        .parse()
                        .map_err(|e: crossner::Error| bad(&e.to_string()))?
                }
                "separator" => {
                    columns.separator = value
                        .parse()
                        .map_err(|e: crossner::Error| bad(&e.to_string()))?
                }
                "word_col" => columns.word_col = value.parse().map_err(|_| bad("bad column"))?,
                "ne_col" => columns.ne_col = value.parse().map_err(|_| bad("bad column"))?,
                "pos_col" => columns.pos_col = Some(value.parse().map_err(|_| bad("bad column"))?),
                "lemma_col" => {
                    columns.lemma_col = Some(value.parse().map_err(|_| bad("bad column"))?)
                }
                "chunk_col" => {
                    columns.chunk_col = Some(value.parse().map_err(|_| bad("bad column"))?)
                }
                "cluster" => {
                    let (id, path) = value
                        .split_once('=')
                        .ok_or_else(|| bad("expected cluster = id=path"))?;
                    validate_id(id.trim())?;
                    clusters.push((id.trim().to_string(), resolve(path.trim())));
                }
                "merge" => {
                    let (id, chain) = value
                        .split_once('=')
                        .ok_or_else(|| bad("expected merge = id=target+source+..."))?;
                    validate_id(id.trim())?;
                    let parts: Vec<&str> = chain.split('+').map(str::trim).collect();
                    if parts.len() < 2 {
                        return Err(bad("merge needs a target and at least one source"));
                    }
                    merges.push(MergeDirective {
                        id: id.trim().to_string(),
                        target: parts[0].to_string(),
                        sources: parts[1..].iter().map(|s| s.to_string()).collect(),
                    });
                }
                "config" => overrides.push(value.to_string()),
                "mcnemar" => {
                    mcnemar_unit = value
                        .parse()
                        .map_err(|e: crossner::Error| bad(&e.to_string()))?
                }
                "top_oov" => top_oov = value.parse().map_err(|_| bad("bad top_oov"))?,
                "save_models" => save_models = value == "1" || value == "true",
                "output_dir" => output_dir = Some(resolve(value)),
                _ => return Err(bad(&format!("unknown key `{key}`"))),
            }
        }

        let train = train.ok_or_else(|| CliError::usage("run file is missing `train`"))?;
        let test = test.ok_or_else(|| CliError::usage("run file is missing `test`"))?;
        let spec = ExperimentSpec {
            train,
            test,
            columns,
            scheme,
            clusters,
            merges,
            overrides,
            mcnemar_unit,
            top_oov,
            save_models,
            output_dir,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.columns
            .validate()
            .map_err(|e| CliError::usage(e.to_string()))?;
        if self.train == self.test {
            return Err(CliError::usage("train and test must be distinct files"));
        }
        let mut ids: Vec<&str> = Vec::new();
        for (id, _) in &self.clusters {
            if ids.contains(&id.as_str()) {
                return Err(CliError::usage(format!("duplicate clustering id `{id}`")));
            }
            ids.push(id);
        }
        for merge in &self.merges {
            if ids.contains(&merge.id.as_str()) {
                return Err(CliError::usage(format!("duplicate clustering id `{}`", merge.id)));
            }
            for referenced in std::iter::once(&merge.target).chain(&merge.sources) {
                if !ids.contains(&referenced.as_str()) {
                    return Err(CliError::usage(format!(
                        "merge `{}` references unknown clustering `{referenced}`",
                        merge.id
                    )));
                }
            }
            ids.push(&merge.id);
        }
        Ok(())
    }
}

/// Everything the run produced, before it is written out.
pub struct ExperimentOutcome {
    pub grid: String,
    pub delta: String,
    pub oov: String,
    /// System id -> predicted labels on the test set; baseline first.
    pub predictions: Vec<(String, Vec<Vec<String>>)>,
    pub reports: Vec<(String, EvalReport<Float>)>,
    pub models: Vec<(String, crossner::crf::CrfModel<Float>)>,
    /// Clusterings produced by merge directives, in directive order.
    pub merged_clusterings: Vec<Clustering>,
}

/// Trains the grid and renders the report strings. Pure up to the input
/// files; writes nothing.
pub fn run_experiment_in_memory(spec: &ExperimentSpec) -> Result<ExperimentOutcome, CliError> {
    let train_corpus = read_labeled(&spec.train, &spec.columns, spec.scheme)?;
    let test_corpus = read_labeled(&spec.test, &spec.columns, spec.scheme)?;

    // clusterings, then merges layered on top in file order
    let mut registry: BTreeMap<String, Clustering> = BTreeMap::new();
    let mut system_ids: Vec<String> = Vec::new();
    let mut merged_clusterings = Vec::new();
    for (id, path) in &spec.clusters {
        let mut clustering = load_clustering(path)?;
        clustering.language = id.clone();
        registry.insert(id.clone(), clustering);
        system_ids.push(id.clone());
    }
    for directive in &spec.merges {
        let target = &registry[&directive.target];
        let sources: Vec<&Clustering> = directive
            .sources
            .iter()
            .map(|id| &registry[id])
            .collect();
        let (mut merged, _) = merge_clusterings(target, &sources)?;
        merged.language = directive.id.clone();
        merged_clusterings.push(merged.clone());
        registry.insert(directive.id.clone(), merged);
        system_ids.push(directive.id.clone());
    }
    let maps = cluster_maps(&registry);

    let mut base_feature = FeatureConfig::default();
    let mut train_config = TrainConfig::<Float>::default();
    for raw in &spec.overrides {
        apply_override(&mut base_feature, &mut train_config, raw)?;
    }

    let mut predictions: Vec<(String, Vec<Vec<String>>)> = Vec::new();
    let mut reports: Vec<(String, EvalReport<Float>)> = Vec::new();
    let mut models = Vec::new();
    for system in std::iter::once("baseline".to_string()).chain(system_ids.iter().cloned()) {
        let feature = FeatureConfig {
            cluster_sources: if system == "baseline" {
                Vec::new()
            } else {
                vec![system.clone()]
            },
            ..base_feature.clone()
        };
        let model = train_crf::<Float>(&train_corpus, &feature, &train_config, &maps)
            .map_err(|e| CliError::Data(format!("training `{system}`: {e}")))?;
        let mut decoded = Vec::with_capacity(test_corpus.sentences.len());
        for sentence in &test_corpus.sentences {
            decoded.push(model.viterbi_decode(sentence)?);
        }
        let report = score::<Float, _>(&test_corpus, &decoded)?;
        predictions.push((system.clone(), decoded));
        reports.push((system.clone(), report));
        models.push((system, model));
    }

    let baseline_pred = &predictions[0].1;
    let baseline_report = &reports[0].1;

    let mut rows = vec![GridRow {
        label: "Baseline (None)".to_string(),
        f1: baseline_report.overall.f1,
        stars: String::new(),
    }];
    for i in 1..reports.len() {
        let result = mcnemar::<Float, _>(
            &test_corpus,
            &predictions[i].1,
            baseline_pred,
            spec.mcnemar_unit,
        )?;
        rows.push(GridRow {
            label: reports[i].0.clone(),
            f1: reports[i].1.overall.f1,
            stars: significance_stars(&result).to_string(),
        });
    }
    if reports.len() > 1 {
        let mean = reports[1..]
            .iter()
            .map(|(_, r)| r.overall.f1)
            .sum::<Float>()
            / (reports.len() - 1) as Float;
        rows.push(GridRow {
            label: "Average".to_string(),
            f1: mean,
            stars: String::new(),
        });
    }
    let grid = render_grid(&rows);

    let deltas: Vec<(String, BTreeMap<_, Float>)> = reports[1..]
        .iter()
        .map(|(id, report)| (id.clone(), delta_report(baseline_report, report)))
        .collect();
    let delta = render_delta_table(&deltas);

    // OOV coverage over the primary cluster files (merges are derived views)
    let oov_maps = {
        let primary: BTreeMap<String, Clustering> = registry
            .iter()
            .filter(|(id, _)| spec.clusters.iter().any(|(cid, _)| cid == *id))
            .map(|(id, c)| (id.clone(), c.clone()))
            .collect();
        cluster_maps(&primary)
    };
    let oov_entries = oov_report(&train_corpus, &test_corpus, &oov_maps);
    let oov = render_oov_table(&oov_entries, spec.top_oov);

    Ok(ExperimentOutcome {
        grid,
        delta,
        oov,
        predictions,
        reports,
        models,
        merged_clusterings,
    })
}

/// Runs the experiment and writes `grid.tsv`, `delta.tsv`, `oov.tsv`, and
/// per-system predictions into the output directory. Returns the directory.
pub fn run_experiment(
    spec: &ExperimentSpec,
    output_override: Option<&Path>,
) -> Result<PathBuf, CliError> {
    let out_dir = output_override
        .map(Path::to_path_buf)
        .or_else(|| spec.output_dir.clone())
        .ok_or_else(|| CliError::usage("no output directory (use --output or `output_dir`)"))?;
    fs::create_dir_all(&out_dir)?;

    let outcome = run_experiment_in_memory(spec)?;
    fs::write(out_dir.join("grid.tsv"), &outcome.grid)?;
    fs::write(out_dir.join("delta.tsv"), &outcome.delta)?;
    fs::write(out_dir.join("oov.tsv"), &outcome.oov)?;

    let test_corpus = read_labeled(&spec.test, &spec.columns, spec.scheme)?;
    for (system, decoded) in &outcome.predictions {
        let path = out_dir.join(format!("pred_{system}.conll"));
        let mut buf = Vec::new();
        crossner::corpus::write_conll_with(&test_corpus, &mut buf, |si, ti| {
            Some(decoded[si][ti].clone())
        })?;
        fs::write(path, buf)?;
    }

    for merged in &outcome.merged_clusterings {
        let mut buf = Vec::new();
        write_clusters(merged, &mut buf)?;
        fs::write(
            out_dir.join(format!("clusters_{}.tsv", merged.language)),
            buf,
        )?;
    }

    if spec.save_models {
        for (system, model) in &outcome.models {
            let mut buf = Vec::new();
            write_model(model, &mut buf)?;
            fs::write(out_dir.join(format!("model_{system}.tsv")), buf)?;
        }
    }

    Ok(out_dir)
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.spec)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.spec.display())))?;
    let base_dir = args
        .spec
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let spec = ExperimentSpec::parse(&text, &base_dir)?;
    let out_dir = run_experiment(&spec, args.output.as_deref())?;
    let grid = fs::read_to_string(out_dir.join("grid.tsv"))?;
    print!("{grid}");
    eprintln!("experiment artifacts in {}", out_dir.display());
    Ok(())
}
