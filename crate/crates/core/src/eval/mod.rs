//! Phrase-level CoNLL scoring, per-category F1 deltas, McNemar significance
//! tests, and OOV-coverage analysis.

mod mcnemar;
pub mod report;

pub use mcnemar::{mcnemar, McNemarResult, McNemarUnit};

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{EntityType, LabeledCorpus, NeLabel};
use crate::crf::ClusterMaps;
use crate::{Error, Result, Scalar};

/// One labeled entity: type plus an inclusive token range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EntitySpan {
    pub entity_type: EntityType,
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
}

/// Reads entity spans off a BIO2 label sequence. A span opens at `B-X`, or
/// at an ill-formed `I-X` that does not continue an `X` span (the conlleval
/// repair rule), and extends through consecutive `I-X`.
pub fn extract_entities<T: AsRef<str>>(labels: &[T], sentence: usize) -> Result<Vec<EntitySpan>> {
    let mut spans = Vec::new();
    let mut open: Option<(EntityType, usize)> = None;
    for (i, raw) in labels.iter().enumerate() {
        let label = NeLabel::parse(raw.as_ref())?;
        let continues = matches!(
            (label, open),
            (NeLabel::Inside(ty), Some((prev, _))) if ty == prev
        );
        if !continues {
            if let Some((ty, start)) = open.take() {
                spans.push(EntitySpan {
                    entity_type: ty,
                    sentence,
                    start,
                    end: i - 1,
                });
            }
            match label {
                NeLabel::Begin(ty) | NeLabel::Inside(ty) => open = Some((ty, i)),
                NeLabel::Outside => {}
            }
        }
    }
    if let Some((ty, start)) = open {
        spans.push(EntitySpan {
            entity_type: ty,
            sentence,
            start,
            end: labels.len() - 1,
        });
    }
    Ok(spans)
}

/// Entity spans of a whole corpus.
pub fn corpus_entities(corpus: &LabeledCorpus) -> Result<BTreeSet<EntitySpan>> {
    let mut spans = BTreeSet::new();
    for (si, sentence) in corpus.sentences.iter().enumerate() {
        spans.extend(extract_entities(&sentence.labels(), si)?);
    }
    Ok(spans)
}

fn prediction_entities<T: AsRef<str>>(pred: &[Vec<T>]) -> Result<BTreeSet<EntitySpan>> {
    let mut spans = BTreeSet::new();
    for (si, labels) in pred.iter().enumerate() {
        spans.extend(extract_entities(labels, si)?);
    }
    Ok(spans)
}

/// Exact-match counts and derived scores for one category.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryScore<S> {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub precision: S,
    pub recall: S,
    pub f1: S,
}

impl<S: Scalar> CategoryScore<S> {
    fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let ratio = |num: u64, denom: u64| {
            if denom == 0 {
                S::zero()
            } else {
                S::from_count(num) / S::from_count(denom)
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > S::zero() {
            (S::one() + S::one()) * precision * recall / (precision + recall)
        } else {
            S::zero()
        };
        CategoryScore {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// Per-category and micro-averaged overall scores.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<S> {
    pub per_category: BTreeMap<EntityType, CategoryScore<S>>,
    pub overall: CategoryScore<S>,
}

fn check_shape<T>(gold: &LabeledCorpus, pred: &[Vec<T>]) -> Result<()> {
    if pred.len() != gold.sentences.len() {
        return Err(Error::data(format!(
            "prediction has {} sentences, gold has {}",
            pred.len(),
            gold.sentences.len()
        )));
    }
    for (si, (sentence, labels)) in gold.sentences.iter().zip(pred).enumerate() {
        if labels.len() != sentence.len() {
            return Err(Error::data(format!(
                "sentence {si}: prediction has {} labels, gold has {} tokens",
                labels.len(),
                sentence.len()
            )));
        }
    }
    Ok(())
}

/// Phrase-level scoring: a predicted span counts only on an exact
/// (type, span) match. All four categories are always reported; the overall
/// row is the micro-average.
pub fn score<S: Scalar, T: AsRef<str>>(
    gold: &LabeledCorpus,
    pred: &[Vec<T>],
) -> Result<EvalReport<S>> {
    check_shape(gold, pred)?;
    let gold_spans = corpus_entities(gold)?;
    let pred_spans = prediction_entities(pred)?;

    let mut per_category = BTreeMap::new();
    let mut totals = (0u64, 0u64, 0u64);
    for ty in EntityType::ALL {
        let gold_ty: BTreeSet<&EntitySpan> =
            gold_spans.iter().filter(|s| s.entity_type == ty).collect();
        let pred_ty: BTreeSet<&EntitySpan> =
            pred_spans.iter().filter(|s| s.entity_type == ty).collect();
        let tp = gold_ty.intersection(&pred_ty).count() as u64;
        let fp = pred_ty.len() as u64 - tp;
        let fn_ = gold_ty.len() as u64 - tp;
        totals.0 += tp;
        totals.1 += fp;
        totals.2 += fn_;
        per_category.insert(ty, CategoryScore::from_counts(tp, fp, fn_));
    }
    Ok(EvalReport {
        per_category,
        overall: CategoryScore::from_counts(totals.0, totals.1, totals.2),
    })
}

/// Per-category F1 differences `system − baseline`, in points (x100).
pub fn delta_report<S: Scalar>(
    baseline: &EvalReport<S>,
    system: &EvalReport<S>,
) -> BTreeMap<EntityType, S> {
    let hundred = S::from_f64(100.0).unwrap();
    EntityType::ALL
        .iter()
        .map(|&ty| {
            let b = baseline.per_category[&ty].f1;
            let s = system.per_category[&ty].f1;
            (ty, (s - b) * hundred)
        })
        .collect()
}

/// A test-set word missing from the training vocabulary but covered by at
/// least one clustering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OovEntry {
    pub word: String,
    pub test_count: u64,
    /// Clustering identifiers containing the word, in identifier order.
    pub covered_by: Vec<String>,
}

/// Ranks test-set OOV words that appear in the given clusterings by test
/// frequency (descending), ties by word.
pub fn oov_report(
    train: &LabeledCorpus,
    test: &LabeledCorpus,
    clusterings: &ClusterMaps,
) -> Vec<OovEntry> {
    let train_vocab = train.surface_set();
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for sentence in &test.sentences {
        for token in &sentence.tokens {
            if !train_vocab.contains(token.surface.as_str()) {
                *counts.entry(token.surface.as_str()).or_insert(0) += 1;
            }
        }
    }
    let mut entries: Vec<OovEntry> = counts
        .into_iter()
        .filter_map(|(word, test_count)| {
            let covered_by: Vec<String> = clusterings
                .iter()
                .filter(|(_, map)| map.contains_key(word))
                .map(|(id, _)| id.clone())
                .collect();
            if covered_by.is_empty() {
                None
            } else {
                Some(OovEntry {
                    word: word.to_string(),
                    test_count,
                    covered_by,
                })
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        b.test_count
            .cmp(&a.test_count)
            .then_with(|| a.word.cmp(&b.word))
    });
    entries
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ColumnSpec, Sentence, Token};
    use approx::assert_abs_diff_eq;
    use std::collections::HashMap;

    fn corpus_of(labeled: &[&[(&str, &str)]]) -> LabeledCorpus {
        let sentences = labeled
            .iter()
            .map(|sent| Sentence {
                tokens: sent.iter().map(|&(w, l)| Token::new(w, l)).collect(),
            })
            .collect();
        LabeledCorpus::new(sentences, ColumnSpec::conll2002()).unwrap()
    }

    fn span(ty: EntityType, sentence: usize, start: usize, end: usize) -> EntitySpan {
        EntitySpan {
            entity_type: ty,
            sentence,
            start,
            end,
        }
    }

    #[test]
    fn extracts_basic_span() {
        let spans = extract_entities(&["B-PER", "I-PER", "O"], 0).unwrap();
        assert_eq!(spans, vec![span(EntityType::Per, 0, 0, 1)]);
    }

    #[test]
    fn repairs_ill_formed_inside_label() {
        let spans = extract_entities(&["O", "I-LOC"], 0).unwrap();
        assert_eq!(spans, vec![span(EntityType::Loc, 0, 1, 1)]);
    }

    #[test]
    fn adjacent_begins_are_two_spans() {
        let spans = extract_entities(&["B-PER", "B-PER"], 0).unwrap();
        assert_eq!(
            spans,
            vec![span(EntityType::Per, 0, 0, 0), span(EntityType::Per, 0, 1, 1)]
        );
    }

    #[test]
    fn type_switch_inside_run_starts_new_span() {
        let spans = extract_entities(&["B-PER", "I-LOC", "I-LOC"], 0).unwrap();
        assert_eq!(
            spans,
            vec![span(EntityType::Per, 0, 0, 0), span(EntityType::Loc, 0, 1, 2)]
        );
    }

    #[test]
    fn unknown_label_is_an_error() {
        assert!(extract_entities(&["B-DATE"], 0).is_err());
        assert!(extract_entities(&["PER"], 0).is_err());
    }

    #[test]
    fn perfect_predictions_score_one() {
        let gold = corpus_of(&[
            &[("Obama", "B-PER"), ("in", "O"), ("Berlin", "B-LOC")],
            &[("EU", "B-ORG")],
        ]);
        let pred: Vec<Vec<String>> = gold
            .sentences
            .iter()
            .map(|s| s.labels().iter().map(|l| l.to_string()).collect())
            .collect();
        let report: EvalReport<f64> = score(&gold, &pred).unwrap();
        for ty in [EntityType::Per, EntityType::Loc, EntityType::Org] {
            assert_abs_diff_eq!(report.per_category[&ty].f1, 1.0);
        }
        assert_abs_diff_eq!(report.overall.precision, 1.0);
        assert_abs_diff_eq!(report.overall.recall, 1.0);
        assert_abs_diff_eq!(report.overall.f1, 1.0);
    }

    #[test]
    fn boundary_shift_scores_zero() {
        let gold = corpus_of(&[&[
            ("the", "O"),
            ("New", "B-LOC"),
            ("York", "I-LOC"),
            ("office", "O"),
        ]]);
        let pred = vec![vec!["O", "O", "B-LOC", "I-LOC"]];
        let report: EvalReport<f64> = score(&gold, &pred).unwrap();
        let loc = &report.per_category[&EntityType::Loc];
        assert_eq!((loc.tp, loc.fp, loc.fn_), (0, 1, 1));
        assert_abs_diff_eq!(loc.f1, 0.0);
    }

    #[test]
    fn mixed_outcome_micro_average() {
        // gold: one PER, one LOC; predicted: PER correct, LOC missed,
        // ORG spurious -> tp=1 fp=1 fn=1.
        let gold = corpus_of(&[&[
            ("Obama", "B-PER"),
            ("visited", "O"),
            ("Berlin", "B-LOC"),
        ]]);
        let pred = vec![vec!["B-PER", "B-ORG", "O"]];
        let report: EvalReport<f64> = score(&gold, &pred).unwrap();
        assert_abs_diff_eq!(report.overall.precision, 0.5);
        assert_abs_diff_eq!(report.overall.recall, 0.5);
        assert_abs_diff_eq!(report.overall.f1, 0.5);
    }

    #[test]
    fn overall_cells_are_category_sums() {
        let gold = corpus_of(&[&[
            ("Obama", "B-PER"),
            ("visited", "O"),
            ("Berlin", "B-LOC"),
            ("EU", "B-ORG"),
        ]]);
        let pred = vec![vec!["B-PER", "B-MISC", "O", "B-ORG"]];
        let report: EvalReport<f64> = score(&gold, &pred).unwrap();
        let sums = report.per_category.values().fold((0, 0, 0), |acc, c| {
            (acc.0 + c.tp, acc.1 + c.fp, acc.2 + c.fn_)
        });
        assert_eq!(
            (report.overall.tp, report.overall.fp, report.overall.fn_),
            sums
        );
        // micro precision recomputed from the cells
        let p = sums.0 as f64 / (sums.0 + sums.1) as f64;
        assert_abs_diff_eq!(report.overall.precision, p);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let gold = corpus_of(&[&[("Obama", "B-PER")]]);
        let pred = vec![vec!["B-PER", "O"]];
        assert!(score::<f64, _>(&gold, &pred).is_err());
        let pred: Vec<Vec<String>> = vec![];
        assert!(score::<f64, _>(&gold, &pred).is_err());
    }

    #[test]
    fn deltas_are_in_points() {
        let gold = corpus_of(&[&[("Obama", "B-PER"), ("Berlin", "B-LOC")]]);
        let half = vec![vec!["B-PER", "O"]];
        let full = vec![vec!["B-PER", "B-LOC"]];
        let base: EvalReport<f64> = score(&gold, &half).unwrap();
        let sys: EvalReport<f64> = score(&gold, &full).unwrap();
        let deltas = delta_report(&base, &sys);
        assert_abs_diff_eq!(deltas[&EntityType::Loc], 100.0);
        assert_abs_diff_eq!(deltas[&EntityType::Per], 0.0);
        let same = delta_report(&base, &base);
        assert!(same.values().all(|d| *d == 0.0));
    }

    #[test]
    fn half_point_delta_arithmetic() {
        // F1 0.5 -> 0.75 is a 25.0-point improvement.
        let base = CategoryScore::<f64>::from_counts(1, 1, 1);
        assert_abs_diff_eq!(base.f1, 0.5);
        let better = CategoryScore::<f64>::from_counts(3, 1, 1);
        assert_abs_diff_eq!(better.f1, 0.75);
        assert_abs_diff_eq!((better.f1 - base.f1) * 100.0, 25.0);
    }

    fn cluster_maps(entries: &[(&str, &[&str])]) -> ClusterMaps {
        entries
            .iter()
            .map(|(id, words)| {
                let map: HashMap<String, u32> =
                    words.iter().map(|w| (w.to_string(), 0u32)).collect();
                (id.to_string(), map)
            })
            .collect()
    }

    #[test]
    fn oov_report_is_empty_when_test_is_covered() {
        let train = corpus_of(&[&[("a", "O"), ("b", "O")]]);
        let test = corpus_of(&[&[("a", "O"), ("a", "O")]]);
        let maps = cluster_maps(&[("de", &["a", "b"])]);
        assert!(oov_report(&train, &test, &maps).is_empty());
    }

    #[test]
    fn oov_report_ranks_by_frequency_then_word() {
        let train = corpus_of(&[&[("spoke", "O")]]);
        let test = corpus_of(&[
            &[("Schalke", "B-ORG"), ("Schalke", "I-ORG"), ("Lattek", "B-PER")],
            &[("Schalke", "B-ORG"), ("Lattek", "B-PER")],
        ]);
        // Lattek appears twice but only counts where OOV; both are OOV here:
        // Schalke 3, Lattek 2.
        let maps = cluster_maps(&[("de", &["Schalke", "Lattek"]), ("fr", &["Lattek"])]);
        let entries = oov_report(&train, &test, &maps);
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].word, "Schalke");
        assert_eq!(entries[0].test_count, 3);
        assert_eq!(entries[0].covered_by, vec!["de"]);
        assert_eq!(entries[1].word, "Lattek");
        assert_eq!(entries[1].covered_by, vec!["de", "fr"]);
    }

    #[test]
    fn oov_words_without_cluster_coverage_are_dropped() {
        let train = corpus_of(&[&[("spoke", "O")]]);
        let test = corpus_of(&[&[("Schalke", "B-ORG"), ("Uncovered", "B-PER")]]);
        let maps = cluster_maps(&[("de", &["Schalke"])]);
        let entries = oov_report(&train, &test, &maps);
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].word, "Schalke");
    }
}
