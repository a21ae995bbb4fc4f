//! Feature-based linear-chain CRF tagger.
//!
//! Sparse hand-written features (see [`features`]) feed emission scores;
//! BIO transitions are learned, with orphan `I-` transitions forbidden
//! outright. Training maximizes L2-regularized conditional log-likelihood.

pub mod crf;
pub mod features;
mod io;
mod train;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::annotation::{from_bio, AnnotationSet, BioLabel, Provenance};
use crate::scalar::Scalar;
use crate::text::Utterance;

pub use crf::{Chain, Emissions, ForwardBackward};
pub use features::{featurize, featurize_sentence, FeatureVector, FEATURE_VERSION};
pub use io::ModelError;
pub use train::{log_likelihood_gradient, EpochStats, Instance, Params, TrainError, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    /// One gradient step per sentence, in seeded shuffled order.
    #[default]
    Sgd,
    /// One averaged gradient step per epoch.
    FullBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    pub shuffle: bool,
    #[serde(default)]
    pub optimizer: Optimizer,
    /// Train on clause-expanded sentences instead of the raw text.
    #[serde(default)]
    pub expand_training: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 25,
            learning_rate: 0.1,
            l2: 1e-4,
            seed: 42,
            shuffle: true,
            optimizer: Optimizer::Sgd,
            expand_training: false,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning rate must be positive".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(TrainError::Config("L2 strength must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub config: TrainingConfig,
    pub corpus_fingerprint: String,
    pub sentences: usize,
    #[serde(default)]
    pub epochs: Vec<EpochStats>,
}

/// A trained tagger. Immutable once built; decoding takes `&self`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel<T> {
    features: Vec<String>,
    index: HashMap<String, u32>,
    params: Params<T>,
    chain_mask: (Vec<bool>, Vec<bool>),
    pub metadata: ModelMetadata,
}

/// BIO constraint mask over [`BioLabel::ALPHABET`].
pub fn bio_mask() -> (Vec<bool>, Vec<bool>) {
    let labels = BioLabel::ALPHABET;
    let start = labels.iter().map(|l| l.can_start()).collect();
    let pairs = labels
        .iter()
        .flat_map(|p| labels.iter().map(move |n| p.allows(*n)))
        .collect();
    (start, pairs)
}

impl<T: Scalar> TaggerModel<T> {
    pub(crate) fn from_parts(features: Vec<String>, params: Params<T>, metadata: ModelMetadata) -> Self {
        let index = features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i as u32))
            .collect();
        TaggerModel { features, index, params, chain_mask: bio_mask(), metadata }
    }

    pub fn labels(&self) -> &'static [BioLabel] {
        &BioLabel::ALPHABET
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    /// Emission weight of `feature` for `label`; zero for unknown features.
    pub fn emission_weight(&self, feature: &str, label: BioLabel) -> T {
        self.index
            .get(feature)
            .map(|&f| self.params.emission[f as usize * self.params.labels + label.index()])
            .unwrap_or_else(T::zero)
    }

    pub fn transition_weight(&self, prev: BioLabel, next: BioLabel) -> T {
        self.params.pairs[prev.index() * self.params.labels + next.index()]
    }

    pub(crate) fn chain(&self) -> Chain<T> {
        Chain {
            labels: self.params.labels,
            start: self.params.start.clone(),
            pairs: self.params.pairs.clone(),
            start_allowed: self.chain_mask.0.clone(),
            allowed: self.chain_mask.1.clone(),
        }
    }

    /// Feature ids per position; unknown features are dropped.
    pub fn encode(&self, utterance: &Utterance) -> Vec<Vec<u32>> {
        featurize_sentence(utterance.tokens())
            .into_iter()
            .map(|fv| fv.keys().iter().filter_map(|k| self.index.get(k).copied()).collect())
            .collect()
    }

    pub fn emissions(&self, feats: &[Vec<u32>]) -> Emissions<T> {
        self.params.emissions(feats)
    }

    /// Best label sequence and its score.
    pub fn decode(&self, utterance: &Utterance) -> (Vec<BioLabel>, T) {
        if utterance.is_empty() {
            return (Vec::new(), T::zero());
        }
        let em = self.emissions(&self.encode(utterance));
        let (path, score) = crf::viterbi(&em, &self.chain());
        let labels = path
            .into_iter()
            .map(|i| BioLabel::from_index(i).expect("index within alphabet"))
            .collect();
        (labels, score)
    }

    /// Decodes and converts the labels to spans with provenance MODEL.
    pub fn annotate(&self, utterance: &Utterance) -> AnnotationSet {
        let (labels, _) = self.decode(utterance);
        from_bio(&labels, utterance.clone(), Provenance::Model).expect("decoded labels match token count")
    }

    /// Path score of `labels` under this model.
    pub fn score(&self, utterance: &Utterance, labels: &[BioLabel]) -> T {
        let em = self.emissions(&self.encode(utterance));
        let path: Vec<usize> = labels.iter().map(|l| l.index()).collect();
        crf::path_score(&em, &self.chain(), &path)
    }
}

pub use train::train;
pub use train::train_with_validation;
