//! Linear-chain CRF tagger: feature extraction, exact inference, regularized
//! maximum-likelihood training, and Viterbi decoding.
//!
//! Parameters are laid out as one dense vector: the `L*L` transition block
//! first, then one block of `L` emission weights per indexed feature string.
//! Decoding applies an optional hard transition mask that forbids `I-X`
//! after anything but `B-X`/`I-X`; the mask is part of the model and is
//! serialized with it.

mod features;
mod index;
mod inference;
mod io;
mod lbfgs;
mod objective;
mod train;

pub use features::{extract_features, word_shape};
pub use index::FeatureIndex;
pub use io::{read_model, write_model};
pub use lbfgs::{minimize, LbfgsConfig, LbfgsOutcome};
pub use objective::objective_and_gradient;
pub use train::{train_crf, train_crf_detailed, TrainOutcome};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::corpus::{EntityType, NeLabel, Sentence};
use crate::{Error, Result, Scalar};

/// Cluster lookup tables keyed by clustering identifier.
pub type ClusterMaps = BTreeMap<String, HashMap<String, u32>>;

/// Additive score for masked transitions. Large enough that masked paths
/// carry exactly zero probability mass in either precision, finite so the
/// arithmetic never produces NaN.
pub(crate) fn mask_penalty<S: Scalar>() -> S {
    S::from_f64(-1e30).unwrap()
}

/// Which feature families to emit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureConfig {
    /// Window radius for word/POS/lemma identity features.
    pub context_window: u32,
    pub use_shape: bool,
    /// Prefixes and suffixes of lengths 1..=3 of the current word.
    pub use_prefix_suffix: bool,
    pub use_pos: bool,
    pub use_lemma: bool,
    /// Adjacent-word bigrams around the current position.
    pub use_bigrams: bool,
    /// Window radius for cluster-id features.
    pub cluster_window: u32,
    /// Clustering identifiers, one feature namespace each.
    pub cluster_sources: Vec<String>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            context_window: 1,
            use_shape: true,
            use_prefix_suffix: true,
            use_pos: true,
            use_lemma: true,
            use_bigrams: true,
            cluster_window: 1,
            cluster_sources: Vec::new(),
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for source in &self.cluster_sources {
            if !seen.insert(source) {
                return Err(Error::data(format!("duplicate cluster source `{source}`")));
            }
        }
        Ok(())
    }
}

/// Optimizer settings for [`train_crf`].
#[derive(Debug, Clone)]
pub struct TrainConfig<S> {
    pub l2_sigma: S,
    /// L-BFGS history length.
    pub history: usize,
    /// Convergence threshold on the relative objective change.
    pub tolerance: S,
    pub max_iterations: u32,
    /// Reserved; training starts from zero weights and is deterministic.
    pub seed: u64,
    /// Hard transition mask on the trained model.
    pub transition_mask: bool,
}

impl<S: Scalar> Default for TrainConfig<S> {
    fn default() -> Self {
        TrainConfig {
            l2_sigma: S::one(),
            history: 10,
            tolerance: S::from_f64(1e-5).unwrap(),
            max_iterations: 200,
            seed: 1,
            transition_mask: true,
        }
    }
}

/// Ordered label list: `O` first, then `B-X`/`I-X` per entity type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<String>,
    parsed: Vec<NeLabel>,
}

impl LabelSet {
    pub fn from_types<'a, I: IntoIterator<Item = &'a EntityType>>(types: I) -> Self {
        let mut labels = vec!["O".to_string()];
        for ty in types {
            labels.push(format!("B-{ty}"));
            labels.push(format!("I-{ty}"));
        }
        Self::from_labels(labels).expect("constructed labels are valid")
    }

    pub fn from_labels(labels: Vec<String>) -> Result<Self> {
        if labels.first().map(String::as_str) != Some("O") {
            return Err(Error::data("label list must begin with O"));
        }
        let parsed = labels
            .iter()
            .map(|l| NeLabel::parse(l))
            .collect::<Result<Vec<_>>>()?;
        Ok(LabelSet { labels, parsed })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, index: u32) -> &str {
        &self.labels[index as usize]
    }

    pub fn index_of(&self, label: &str) -> Option<u32> {
        self.labels.iter().position(|l| l == label).map(|i| i as u32)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(String::as_str)
    }

    /// True when `from -> to` violates BIO2 well-formedness.
    pub fn masked(&self, from: u32, to: u32) -> bool {
        match self.parsed[to as usize] {
            NeLabel::Inside(ty) => self.parsed[from as usize].entity_type() != Some(ty),
            _ => false,
        }
    }
}

/// A trained tagger: labels, features, weights, and the cluster tables its
/// features need at decode time.
#[derive(Debug, Clone)]
pub struct CrfModel<S> {
    labels: LabelSet,
    feature_index: FeatureIndex,
    weights: Vec<S>,
    config: FeatureConfig,
    l2_sigma: S,
    transition_mask: bool,
    cluster_maps: ClusterMaps,
}

impl<S: Scalar> CrfModel<S> {
    pub fn new(
        labels: LabelSet,
        feature_index: FeatureIndex,
        weights: Vec<S>,
        config: FeatureConfig,
        l2_sigma: S,
        transition_mask: bool,
        cluster_maps: ClusterMaps,
    ) -> Result<Self> {
        if weights.len() != feature_index.n_weights() {
            return Err(Error::data(format!(
                "weight vector has {} entries but the feature index spans {}",
                weights.len(),
                feature_index.n_weights()
            )));
        }
        if feature_index.n_labels() as usize != labels.len() {
            return Err(Error::data("feature index built for a different label set"));
        }
        config.validate()?;
        for source in &config.cluster_sources {
            if !cluster_maps.contains_key(source) {
                return Err(Error::data(format!(
                    "model configuration names clustering `{source}` but no table is attached"
                )));
            }
        }
        Ok(CrfModel {
            labels,
            feature_index,
            weights,
            config,
            l2_sigma,
            transition_mask,
            cluster_maps,
        })
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn feature_index(&self) -> &FeatureIndex {
        &self.feature_index
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: Vec<S>) -> Result<()> {
        if weights.len() != self.weights.len() {
            return Err(Error::data("weight vector length mismatch"));
        }
        self.weights = weights;
        Ok(())
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn l2_sigma(&self) -> S {
        self.l2_sigma
    }

    pub fn transition_mask(&self) -> bool {
        self.transition_mask
    }

    pub fn cluster_maps(&self) -> &ClusterMaps {
        &self.cluster_maps
    }

    /// Emission score matrix (`T x L`). Feature strings absent from the
    /// index score zero.
    pub fn emission_scores(&self, sentence: &Sentence) -> Result<Vec<Vec<S>>> {
        let n_labels = self.labels.len();
        let mut emit = vec![vec![S::zero(); n_labels]; sentence.len()];
        for (t, row) in emit.iter_mut().enumerate() {
            let feats = extract_features(sentence, t, &self.config, &self.cluster_maps)?;
            for feat in &feats {
                if let Some(attr) = self.feature_index.lookup(feat) {
                    for (y, score) in row.iter_mut().enumerate() {
                        *score =
                            *score + self.weights[self.feature_index.emission_slot(attr, y as u32)];
                    }
                }
            }
        }
        Ok(emit)
    }

    /// Transition score matrix (`L x L`, row = from) with the mask folded in.
    pub fn transition_scores(&self) -> Vec<S> {
        let n_labels = self.labels.len() as u32;
        let mut trans = vec![S::zero(); (n_labels * n_labels) as usize];
        for from in 0..n_labels {
            for to in 0..n_labels {
                let mut score = self.weights[self.feature_index.transition_slot(from, to)];
                if self.transition_mask && self.labels.masked(from, to) {
                    score = score + mask_penalty::<S>();
                }
                trans[(from * n_labels + to) as usize] = score;
            }
        }
        trans
    }

    /// Log of the summed exponentiated scores over all label sequences.
    pub fn log_partition(&self, sentence: &Sentence) -> Result<S> {
        let emit = self.emission_scores(sentence)?;
        let trans = self.transition_scores();
        inference::log_partition(&emit, &trans, self.labels.len())
    }

    /// Per-position label marginals from forward-backward (`T x L`).
    pub fn marginals(&self, sentence: &Sentence) -> Result<Vec<Vec<S>>> {
        let emit = self.emission_scores(sentence)?;
        let trans = self.transition_scores();
        inference::marginals(&emit, &trans, self.labels.len())
    }

    /// Highest-scoring label sequence; ties resolve to the lowest label
    /// index at the earliest position.
    pub fn viterbi_decode(&self, sentence: &Sentence) -> Result<Vec<String>> {
        let emit = self.emission_scores(sentence)?;
        let trans = self.transition_scores();
        let path = inference::viterbi(&emit, &trans, self.labels.len())?;
        Ok(path.into_iter().map(|y| self.labels.get(y).to_string()).collect())
    }
}
