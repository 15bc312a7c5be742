//! Deterministic TSV rendering of evaluation artifacts. Scores print as
//! percentages with two decimals, deltas with one, matching the usual
//! shared-task table style.

use std::collections::BTreeMap;

use super::{EvalReport, McNemarResult, OovEntry};
use crate::corpus::EntityType;
use crate::Scalar;

fn pct<S: Scalar>(value: S) -> String {
    format!("{:.2}", value.to_f64().unwrap_or(f64::NAN) * 100.0)
}

/// `**` below 0.01, `*` below 0.05, empty otherwise.
pub fn significance_stars<S: Scalar>(result: &McNemarResult<S>) -> &'static str {
    if result.significant_01 {
        "**"
    } else if result.significant_05 {
        "*"
    } else {
        ""
    }
}

/// Category rows plus an overall row: `P`, `R`, `F1`, and `dF1` against a
/// baseline when one is supplied.
pub fn render_eval_report<S: Scalar>(
    report: &EvalReport<S>,
    baseline: Option<&EvalReport<S>>,
) -> String {
    let mut out = String::new();
    out.push_str("category\tP\tR\tF1");
    if baseline.is_some() {
        out.push_str("\tdF1");
    }
    out.push('\n');
    let hundred = 100.0;
    for ty in EntityType::ALL {
        let cell = &report.per_category[&ty];
        out.push_str(&format!(
            "{ty}\t{}\t{}\t{}",
            pct(cell.precision),
            pct(cell.recall),
            pct(cell.f1)
        ));
        if let Some(base) = baseline {
            let delta = (cell.f1 - base.per_category[&ty].f1).to_f64().unwrap() * hundred;
            out.push_str(&format!("\t{delta:.1}"));
        }
        out.push('\n');
    }
    out.push_str(&format!(
        "Overall\t{}\t{}\t{}",
        pct(report.overall.precision),
        pct(report.overall.recall),
        pct(report.overall.f1)
    ));
    if let Some(base) = baseline {
        let delta = (report.overall.f1 - base.overall.f1).to_f64().unwrap() * hundred;
        out.push_str(&format!("\t{delta:.1}"));
    }
    out.push('\n');
    out
}

/// One-line McNemar summary, suitable as a trailing comment row.
pub fn render_mcnemar<S: Scalar>(result: &McNemarResult<S>, unit: &str) -> String {
    format!(
        "# mcnemar unit={unit} b={} c={} p={:.6e} sig01={} sig05={}\n",
        result.b,
        result.c,
        result.p_value.to_f64().unwrap_or(f64::NAN),
        if result.significant_01 { "yes" } else { "no" },
        if result.significant_05 { "yes" } else { "no" },
    )
}

/// One grid row: a cluster-source label and its F1 cell.
#[derive(Debug, Clone)]
pub struct GridRow<S> {
    pub label: String,
    pub f1: S,
    /// Significance stars against the baseline; empty for the baseline row
    /// and the average row.
    pub stars: String,
}

/// F1 grid over cluster sources, one row per system plus `Baseline (None)`
/// first and `Average` last. Stars follow the `**`/`*` convention.
pub fn render_grid<S: Scalar>(rows: &[GridRow<S>]) -> String {
    let mut out = String::from("Word Clusters\tF1\n");
    for row in rows {
        out.push_str(&format!("{}\t{}{}\n", row.label, pct(row.f1), row.stars));
    }
    out
}

/// Category-wise delta table: one column per system, one row per category.
pub fn render_delta_table<S: Scalar>(systems: &[(String, BTreeMap<EntityType, S>)]) -> String {
    let mut out = String::from("NEs");
    for (name, _) in systems {
        out.push('\t');
        out.push_str(name);
    }
    out.push('\n');
    for ty in EntityType::ALL {
        out.push_str(ty.as_str());
        for (_, deltas) in systems {
            let delta = deltas[&ty].to_f64().unwrap_or(f64::NAN);
            out.push_str(&format!("\t{delta:.1}"));
        }
        out.push('\n');
    }
    out
}

/// OOV coverage table, already ranked; `top` limits the row count.
pub fn render_oov_table(entries: &[OovEntry], top: usize) -> String {
    let mut out = String::from("word\ttest_count\tclusters\n");
    for entry in entries.iter().take(top) {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            entry.word,
            entry.test_count,
            entry.covered_by.join(",")
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::mcnemar::exact_binomial_p;

    #[test]
    fn stars_follow_thresholds() {
        let mk = |b, c| {
            let p: f64 = exact_binomial_p(b, c);
            McNemarResult {
                b,
                c,
                p_value: p,
                significant_01: p < 0.01,
                significant_05: p < 0.05,
            }
        };
        assert_eq!(significance_stars(&mk(30, 2)), "**");
        assert_eq!(significance_stars(&mk(10, 2)), "*");
        assert_eq!(significance_stars(&mk(3, 2)), "");
    }

    #[test]
    fn grid_rows_render_paper_style() {
        let rows = vec![
            GridRow {
                label: "Baseline (None)".to_string(),
                f1: 0.6827f64,
                stars: String::new(),
            },
            GridRow {
                label: "de".to_string(),
                f1: 0.7716,
                stars: "**".to_string(),
            },
        ];
        let grid = render_grid(&rows);
        assert_eq!(
            grid,
            "Word Clusters\tF1\nBaseline (None)\t68.27\nde\t77.16**\n"
        );
    }

    #[test]
    fn delta_table_prints_one_decimal() {
        let mut deltas = BTreeMap::new();
        deltas.insert(EntityType::Loc, 2.1f64);
        deltas.insert(EntityType::Misc, 1.2);
        deltas.insert(EntityType::Org, 1.0);
        deltas.insert(EntityType::Per, 4.6);
        let table = render_delta_table(&[("de".to_string(), deltas)]);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], "NEs\tde");
        assert_eq!(lines[1], "LOC\t2.1");
        assert_eq!(lines[2], "MISC\t1.2");
        assert_eq!(lines[3], "ORG\t1.0");
        assert_eq!(lines[4], "PER\t4.6");
    }

    #[test]
    fn oov_table_truncates_to_top() {
        let entries: Vec<OovEntry> = (0..5)
            .map(|i| OovEntry {
                word: format!("w{i}"),
                test_count: 10 - i as u64,
                covered_by: vec!["de".to_string()],
            })
            .collect();
        let table = render_oov_table(&entries, 3);
        assert_eq!(table.lines().count(), 4);
        assert!(table.contains("w0\t10\tde"));
        assert!(!table.contains("w3"));
    }
}
