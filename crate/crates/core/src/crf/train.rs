//! Maximum-likelihood training.

use super::objective::{encode_interning, regularized_objective};
use super::{ClusterMaps, CrfModel, FeatureConfig, FeatureIndex, LabelSet, TrainConfig};
use super::{minimize, LbfgsConfig};
use crate::corpus::{LabeledCorpus, NeLabel, TagScheme};
use crate::{Error, Result, Scalar};

/// Trained model plus the optimizer trajectory.
#[derive(Debug)]
pub struct TrainOutcome<S> {
    pub model: CrfModel<S>,
    /// Objective value at the start and after every accepted iterate;
    /// non-decreasing by the line-search contract.
    pub objective_trace: Vec<S>,
    pub iterations: u32,
    pub converged: bool,
}

/// Trains a CRF on a BIO2-normalized corpus. The feature index is built from
/// the training data only; weights start at zero and follow L-BFGS until the
/// relative objective change drops below the configured tolerance.
pub fn train_crf<S: Scalar>(
    corpus: &LabeledCorpus,
    feature_config: &FeatureConfig,
    train_config: &TrainConfig<S>,
    clusterings: &ClusterMaps,
) -> Result<CrfModel<S>> {
    train_crf_detailed(corpus, feature_config, train_config, clusterings).map(|out| out.model)
}

/// As [`train_crf`], also returning the objective trace.
pub fn train_crf_detailed<S: Scalar>(
    corpus: &LabeledCorpus,
    feature_config: &FeatureConfig,
    train_config: &TrainConfig<S>,
    clusterings: &ClusterMaps,
) -> Result<TrainOutcome<S>> {
    if corpus.sentences.is_empty() {
        return Err(Error::data("empty corpus"));
    }
    if train_config.l2_sigma <= S::zero() {
        return Err(Error::data("l2_sigma must be positive"));
    }
    feature_config.validate()?;
    check_bio2(corpus)?;

    let mut cluster_maps = ClusterMaps::new();
    for source in &feature_config.cluster_sources {
        let map = clusterings.get(source).ok_or_else(|| {
            Error::data(format!("unknown clustering `{source}`"))
        })?;
        cluster_maps.insert(source.clone(), map.clone());
    }

    let labels = LabelSet::from_types(&corpus.label_set);
    let mut index = FeatureIndex::new(labels.len() as u32);
    let encoded = encode_interning(corpus, feature_config, &cluster_maps, &labels, &mut index)?;

    let lbfgs = LbfgsConfig {
        history: train_config.history,
        tolerance: train_config.tolerance,
        max_iterations: train_config.max_iterations,
        ..LbfgsConfig::default()
    };
    let mask = train_config.transition_mask;
    let sigma = train_config.l2_sigma;
    let outcome = minimize(
        |w: &[S]| {
            let (value, grad) = regularized_objective(&encoded, w, &labels, &index, mask, Some(sigma))?;
            Ok((-value, grad.into_iter().map(|g| -g).collect()))
        },
        vec![S::zero(); index.n_weights()],
        &lbfgs,
    )?;

    let model = CrfModel::new(
        labels,
        index,
        outcome.x,
        feature_config.clone(),
        sigma,
        mask,
        cluster_maps,
    )?;
    Ok(TrainOutcome {
        model,
        objective_trace: outcome.values.into_iter().map(|v| -v).collect(),
        iterations: outcome.iterations,
        converged: outcome.converged,
    })
}

fn check_bio2(corpus: &LabeledCorpus) -> Result<()> {
    for (si, sentence) in corpus.sentences.iter().enumerate() {
        let mut prev: Option<NeLabel> = None;
        for (ti, token) in sentence.tokens.iter().enumerate() {
            let raw = token.ne_label.as_deref().unwrap_or("O");
            let label = NeLabel::parse(raw).map_err(|e| Error::Label {
                sentence: si,
                position: ti,
                msg: e.to_string(),
            })?;
            if let NeLabel::Inside(ty) = label {
                let continues = matches!(
                    prev,
                    Some(NeLabel::Begin(p) | NeLabel::Inside(p)) if p == ty
                );
                if !continues {
                    return Err(Error::Label {
                        sentence: si,
                        position: ti,
                        msg: format!(
                            "`I-{ty}` does not continue a `{ty}` span; \
                             run tag-scheme normalization (source scheme {:?}) first",
                            TagScheme::Iob1
                        ),
                    });
                }
            }
            prev = Some(label);
        }
    }
    Ok(())
}
