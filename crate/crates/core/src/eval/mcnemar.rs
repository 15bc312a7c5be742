//! Exact two-sided McNemar test on discordant-pair counts.

use std::str::FromStr;

use super::{corpus_entities, prediction_entities};
use crate::corpus::LabeledCorpus;
use crate::{Error, Result, Scalar};

/// What counts as one paired item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum McNemarUnit {
    /// Per-token label correctness.
    #[default]
    Token,
    /// Per-gold-entity exact recovery.
    Entity,
}

impl McNemarUnit {
    pub fn as_str(&self) -> &'static str {
        match self {
            McNemarUnit::Token => "token",
            McNemarUnit::Entity => "entity",
        }
    }
}

impl FromStr for McNemarUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "token" => Ok(McNemarUnit::Token),
            "entity" => Ok(McNemarUnit::Entity),
            other => Err(Error::data(format!(
                "unknown McNemar unit `{other}` (expected `token` or `entity`)"
            ))),
        }
    }
}

/// Discordant-pair counts and the exact binomial p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McNemarResult<S> {
    /// Items system A got right and system B got wrong.
    pub b: u64,
    /// Items system A got wrong and system B got right.
    pub c: u64,
    pub p_value: S,
    pub significant_01: bool,
    pub significant_05: bool,
}

/// `p = min(1, 2 * Σ_{k<=min(b,c)} C(b+c, k) * 2^-(b+c))`; `p = 1` when
/// `b + c = 0`.
pub fn exact_binomial_p<S: Scalar>(b: u64, c: u64) -> S {
    let n = b + c;
    if n == 0 {
        return S::one();
    }
    let k_max = b.min(c);
    let tail = if n <= 64 {
        // Exact integer path: C(64, 32) fits comfortably in u128.
        let mut coeff: u128 = 1;
        let mut sum: u128 = 0;
        for k in 0..=k_max {
            if k > 0 {
                coeff = coeff * (n - k + 1) as u128 / k as u128;
            }
            sum += coeff;
        }
        S::from_u128(sum).unwrap() / S::from_f64((n as f64).exp2()).unwrap()
    } else {
        // Log-space tail sum for large n.
        let ln2 = S::from_f64(std::f64::consts::LN_2).unwrap();
        let n_s = S::from_count(n);
        let mut ln_coeff = S::zero();
        let mut terms = Vec::with_capacity(k_max as usize + 1);
        for k in 0..=k_max {
            if k > 0 {
                ln_coeff = ln_coeff + S::from_count(n - k + 1).ln() - S::from_count(k).ln();
            }
            terms.push(ln_coeff - n_s * ln2);
        }
        let max = terms.iter().cloned().fold(S::neg_infinity(), S::max);
        let sum: S = terms.into_iter().map(|t| (t - max).exp()).sum();
        (max + sum.ln()).exp()
    };
    let two = S::one() + S::one();
    (two * tail).min(S::one())
}

fn result_from_counts<S: Scalar>(b: u64, c: u64) -> McNemarResult<S> {
    let p_value = exact_binomial_p::<S>(b, c);
    McNemarResult {
        b,
        c,
        p_value,
        significant_01: p_value < S::from_f64(0.01).unwrap(),
        significant_05: p_value < S::from_f64(0.05).unwrap(),
    }
}

/// Compares two systems' predictions over the same gold corpus.
pub fn mcnemar<S: Scalar, T: AsRef<str>>(
    gold: &LabeledCorpus,
    pred_a: &[Vec<T>],
    pred_b: &[Vec<T>],
    unit: McNemarUnit,
) -> Result<McNemarResult<S>> {
    super::check_shape(gold, pred_a)?;
    super::check_shape(gold, pred_b)?;
    let (mut b, mut c) = (0u64, 0u64);
    match unit {
        McNemarUnit::Token => {
            for (si, sentence) in gold.sentences.iter().enumerate() {
                for (ti, token) in sentence.tokens.iter().enumerate() {
                    let gold_label = token.ne_label.as_deref().unwrap_or("O");
                    let a_ok = pred_a[si][ti].as_ref() == gold_label;
                    let b_ok = pred_b[si][ti].as_ref() == gold_label;
                    match (a_ok, b_ok) {
                        (true, false) => b += 1,
                        (false, true) => c += 1,
                        _ => {}
                    }
                }
            }
        }
        McNemarUnit::Entity => {
            let gold_spans = corpus_entities(gold)?;
            let a_spans = prediction_entities(pred_a)?;
            let b_spans = prediction_entities(pred_b)?;
            for span in &gold_spans {
                let a_ok = a_spans.contains(span);
                let b_ok = b_spans.contains(span);
                match (a_ok, b_ok) {
                    (true, false) => b += 1,
                    (false, true) => c += 1,
                    _ => {}
                }
            }
        }
    }
    Ok(result_from_counts(b, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ColumnSpec, Sentence, Token};
    use approx::assert_abs_diff_eq;

    #[test]
    fn worked_example_ten_two() {
        // 2 * (C(12,0) + C(12,1) + C(12,2)) / 2^12 = 158/4096
        let p: f64 = exact_binomial_p(10, 2);
        assert_abs_diff_eq!(p, 158.0 / 4096.0, epsilon = 1e-12);
        let result = result_from_counts::<f64>(10, 2);
        assert!(result.significant_05);
        assert!(!result.significant_01);
    }

    #[test]
    fn symmetric_counts_cap_at_one() {
        for b in [0u64, 1, 5, 40] {
            let p: f64 = exact_binomial_p(b, b);
            assert_abs_diff_eq!(p, 1.0);
        }
    }

    #[test]
    fn zero_discordance_is_one() {
        let p: f64 = exact_binomial_p(0, 0);
        assert_abs_diff_eq!(p, 1.0);
    }

    #[test]
    fn log_space_path_matches_exact_path_near_the_switch() {
        // Same (b, c) computed far below and above the 64-item cutoff must
        // agree through the binomial recurrences.
        let exact: f64 = exact_binomial_p(40, 24); // n = 64, integer path
        let scaled: f64 = exact_binomial_p(40, 25); // n = 65, log path
        assert!(exact > 0.0 && scaled > 0.0);
        // direct check of the log path against a small integer case:
        // p(50, 15): n = 65.
        let log_path: f64 = exact_binomial_p(50, 15);
        let mut coeff = 1.0f64;
        let mut sum = 0.0f64;
        for k in 0..=15u64 {
            if k > 0 {
                coeff = coeff * (65 - k + 1) as f64 / k as f64;
            }
            sum += coeff * (-(65f64) * std::f64::consts::LN_2).exp();
        }
        assert_abs_diff_eq!(log_path, (2.0 * sum).min(1.0), epsilon = 1e-10);
    }

    fn gold() -> LabeledCorpus {
        let sentences = vec![Sentence {
            tokens: vec![
                Token::new("Obama", "B-PER"),
                Token::new("visited", "O"),
                Token::new("Berlin", "B-LOC"),
            ],
        }];
        LabeledCorpus::new(sentences, ColumnSpec::conll2002()).unwrap()
    }

    #[test]
    fn identical_predictions_have_no_discordance() {
        let gold = gold();
        let pred = vec![vec!["B-PER", "O", "O"]];
        let r: McNemarResult<f64> = mcnemar(&gold, &pred, &pred, McNemarUnit::Token).unwrap();
        assert_eq!((r.b, r.c), (0, 0));
        assert_abs_diff_eq!(r.p_value, 1.0);
        assert!(!r.significant_05);
    }

    #[test]
    fn token_unit_counts_label_correctness() {
        let gold = gold();
        let a = vec![vec!["B-PER", "O", "B-LOC"]]; // all correct
        let b = vec![vec!["B-PER", "B-ORG", "O"]]; // two wrong
        let r: McNemarResult<f64> = mcnemar(&gold, &a, &b, McNemarUnit::Token).unwrap();
        assert_eq!((r.b, r.c), (2, 0));
    }

    #[test]
    fn entity_unit_counts_gold_span_recovery() {
        let gold = gold();
        let a = vec![vec!["B-PER", "O", "B-LOC"]]; // recovers both
        let b = vec![vec!["B-PER", "O", "O"]]; // recovers PER only
        let r: McNemarResult<f64> = mcnemar(&gold, &a, &b, McNemarUnit::Entity).unwrap();
        assert_eq!((r.b, r.c), (1, 0));
    }
}
