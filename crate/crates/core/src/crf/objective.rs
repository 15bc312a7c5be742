//! Regularized conditional log-likelihood and its exact gradient.

use super::inference::{backward, forward, log_sum_exp};
use super::{extract_features, mask_penalty, ClusterMaps, CrfModel, FeatureConfig, FeatureIndex, LabelSet};
use crate::corpus::LabeledCorpus;
use crate::{Error, Result, Scalar};

/// A sentence reduced to attribute ids per position plus gold label ids.
#[derive(Debug, Clone)]
pub(crate) struct EncodedSentence {
    pub attrs: Vec<Vec<u32>>,
    pub gold: Vec<u32>,
}

fn encode<F>(
    corpus: &LabeledCorpus,
    config: &FeatureConfig,
    cluster_maps: &ClusterMaps,
    labels: &LabelSet,
    mut attr_id: F,
) -> Result<Vec<EncodedSentence>>
where
    F: FnMut(&str) -> Option<u32>,
{
    let mut out = Vec::with_capacity(corpus.sentences.len());
    for (si, sentence) in corpus.sentences.iter().enumerate() {
        let mut attrs = Vec::with_capacity(sentence.len());
        let mut gold = Vec::with_capacity(sentence.len());
        for ti in 0..sentence.len() {
            let raw = sentence.tokens[ti].ne_label.as_deref().unwrap_or("O");
            let label = labels.index_of(raw).ok_or_else(|| Error::Label {
                sentence: si,
                position: ti,
                msg: format!("label `{raw}` outside the model label set"),
            })?;
            gold.push(label);
            let feats = extract_features(sentence, ti, config, cluster_maps)?;
            attrs.push(feats.iter().filter_map(|f| attr_id(f)).collect());
        }
        out.push(EncodedSentence { attrs, gold });
    }
    Ok(out)
}

/// Encoding pass that grows the feature index (training).
pub(crate) fn encode_interning(
    corpus: &LabeledCorpus,
    config: &FeatureConfig,
    cluster_maps: &ClusterMaps,
    labels: &LabelSet,
    index: &mut FeatureIndex,
) -> Result<Vec<EncodedSentence>> {
    encode(corpus, config, cluster_maps, labels, |f| Some(index.intern(f)))
}

/// Encoding pass against a frozen index; unseen feature strings drop out.
pub(crate) fn encode_frozen(
    corpus: &LabeledCorpus,
    config: &FeatureConfig,
    cluster_maps: &ClusterMaps,
    labels: &LabelSet,
    index: &FeatureIndex,
) -> Result<Vec<EncodedSentence>> {
    encode(corpus, config, cluster_maps, labels, |f| index.lookup(f))
}

/// Objective `Σ [score(gold) − log Z] − ‖w‖²/(2σ²)` and its gradient
/// (empirical minus expected feature counts, minus `w/σ²`). Expected counts
/// come from exact forward-backward marginals. `sigma = None` drops the
/// regularizer.
pub(crate) fn regularized_objective<S: Scalar>(
    sentences: &[EncodedSentence],
    weights: &[S],
    labels: &LabelSet,
    index: &FeatureIndex,
    transition_mask: bool,
    sigma: Option<S>,
) -> Result<(S, Vec<S>)> {
    let n_labels = labels.len();
    let mut trans = vec![S::zero(); n_labels * n_labels];
    for from in 0..n_labels as u32 {
        for to in 0..n_labels as u32 {
            let mut score = weights[index.transition_slot(from, to)];
            if transition_mask && labels.masked(from, to) {
                score = score + mask_penalty::<S>();
            }
            trans[(from as usize) * n_labels + to as usize] = score;
        }
    }

    let mut objective = S::zero();
    let mut grad = vec![S::zero(); weights.len()];
    let mut unary = vec![S::zero(); n_labels];

    for sentence in sentences {
        let t_len = sentence.gold.len();
        let mut emit = vec![vec![S::zero(); n_labels]; t_len];
        for (t, row) in emit.iter_mut().enumerate() {
            for &attr in &sentence.attrs[t] {
                let base = index.emission_slot(attr, 0);
                for (y, score) in row.iter_mut().enumerate() {
                    *score = *score + weights[base + y];
                }
            }
        }

        let alpha = forward(&emit, &trans, n_labels);
        let beta = backward(&emit, &trans, n_labels);
        let log_z = log_sum_exp(alpha.last().unwrap());

        let mut gold_score = emit[0][sentence.gold[0] as usize];
        for t in 1..t_len {
            let from = sentence.gold[t - 1];
            let to = sentence.gold[t];
            if transition_mask && labels.masked(from, to) {
                return Err(Error::data(format!(
                    "gold transition {} -> {} violates the transition mask; \
                     normalize the corpus to BIO2 first",
                    labels.get(from),
                    labels.get(to)
                )));
            }
            gold_score = gold_score
                + trans[from as usize * n_labels + to as usize]
                + emit[t][sentence.gold[t] as usize];
        }
        objective = objective + gold_score - log_z;

        // empirical counts
        for t in 0..t_len {
            let gold = sentence.gold[t];
            for &attr in &sentence.attrs[t] {
                let slot = index.emission_slot(attr, gold);
                grad[slot] = grad[slot] + S::one();
            }
            if t > 0 {
                let slot = index.transition_slot(sentence.gold[t - 1], gold);
                grad[slot] = grad[slot] + S::one();
            }
        }

        // expected emission counts from unary marginals
        for t in 0..t_len {
            for (y, m) in unary.iter_mut().enumerate() {
                *m = (alpha[t][y] + beta[t][y] - log_z).exp();
            }
            for &attr in &sentence.attrs[t] {
                let base = index.emission_slot(attr, 0);
                for (y, m) in unary.iter().enumerate() {
                    grad[base + y] = grad[base + y] - *m;
                }
            }
        }

        // expected transition counts from pairwise marginals
        for t in 0..t_len.saturating_sub(1) {
            for y1 in 0..n_labels {
                for y2 in 0..n_labels {
                    let p = (alpha[t][y1]
                        + trans[y1 * n_labels + y2]
                        + emit[t + 1][y2]
                        + beta[t + 1][y2]
                        - log_z)
                        .exp();
                    let slot = index.transition_slot(y1 as u32, y2 as u32);
                    grad[slot] = grad[slot] - p;
                }
            }
        }
    }

    if let Some(sigma) = sigma {
        let sigma_sq = sigma * sigma;
        let mut norm_sq = S::zero();
        for (g, &w) in grad.iter_mut().zip(weights) {
            norm_sq = norm_sq + w * w;
            *g = *g - w / sigma_sq;
        }
        objective = objective - norm_sq / (S::one() + S::one()) / sigma_sq;
    }

    if !objective.is_finite() {
        return Err(Error::Numerical("objective is not finite".into()));
    }
    Ok((objective, grad))
}

/// Spec-level surface: objective and gradient of `model` on `corpus`.
pub fn objective_and_gradient<S: Scalar>(
    model: &CrfModel<S>,
    corpus: &LabeledCorpus,
    l2_sigma: S,
) -> Result<(S, Vec<S>)> {
    if corpus.sentences.is_empty() {
        return Err(Error::data("empty corpus"));
    }
    if l2_sigma <= S::zero() {
        return Err(Error::data("l2_sigma must be positive"));
    }
    let encoded = encode_frozen(
        corpus,
        model.config(),
        model.cluster_maps(),
        model.labels(),
        model.feature_index(),
    )?;
    regularized_objective(
        &encoded,
        model.weights(),
        model.labels(),
        model.feature_index(),
        model.transition_mask(),
        Some(l2_sigma),
    )
}
