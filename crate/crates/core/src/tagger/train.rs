use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::crf::{self, Chain, Emissions, ForwardBackward};
use super::features::featurize_sentence;
use super::{bio_mask, ModelMetadata, Optimizer, TaggerModel, TrainingConfig};
use crate::annotation::{AnnotationSet, SpanAnnotation};
use crate::eval;
use crate::restructure;
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite loss in epoch {epoch} (sentence {sentence:?})")]
    NonFinite { epoch: usize, sentence: Option<usize> },
}

/// Model parameters, flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub n_features: usize,
    pub labels: usize,
    /// `emission[feature * labels + label]`
    pub emission: Vec<T>,
    pub start: Vec<T>,
    /// `pairs[prev * labels + next]`
    pub pairs: Vec<T>,
}

impl<T: Scalar> Params<T> {
    pub fn zeros(n_features: usize, labels: usize) -> Self {
        Params {
            n_features,
            labels,
            emission: vec![T::zero(); n_features * labels],
            start: vec![T::zero(); labels],
            pairs: vec![T::zero(); labels * labels],
        }
    }

    pub fn emissions(&self, feats: &[Vec<u32>]) -> Emissions<T> {
        let l = self.labels;
        let mut em = Emissions::zeros(feats.len(), l);
        for (t, fs) in feats.iter().enumerate() {
            for &f in fs {
                let row = &self.emission[f as usize * l..(f as usize + 1) * l];
                for (y, &w) in row.iter().enumerate() {
                    em.add(t, y, w);
                }
            }
        }
        em
    }

    pub fn chain(&self, mask: &(Vec<bool>, Vec<bool>)) -> Chain<T> {
        Chain {
            labels: self.labels,
            start: self.start.clone(),
            pairs: self.pairs.clone(),
            start_allowed: mask.0.clone(),
            allowed: mask.1.clone(),
        }
    }

    /// All parameters in a fixed order: emission, start, pairs.
    pub fn flat(&self) -> Vec<T> {
        let mut v = self.emission.clone();
        v.extend_from_slice(&self.start);
        v.extend_from_slice(&self.pairs);
        v
    }

    pub fn set_flat(&mut self, flat: &[T]) {
        let (e, rest) = flat.split_at(self.emission.len());
        let (s, p) = rest.split_at(self.start.len());
        self.emission.copy_from_slice(e);
        self.start.copy_from_slice(s);
        self.pairs.copy_from_slice(p);
    }

    fn squared_norm(&self) -> T {
        self.emission
            .iter()
            .chain(&self.start)
            .chain(&self.pairs)
            .fold(T::zero(), |acc, &w| acc + w * w)
    }

    fn scale(&mut self, factor: T) {
        for w in self.emission.iter_mut().chain(&mut self.start).chain(&mut self.pairs) {
            *w = *w * factor;
        }
    }
}

/// One encoded training sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub feats: Vec<Vec<u32>>,
    pub gold: Vec<usize>,
}

struct SentenceGrad<T> {
    log_likelihood: T,
    emission: Vec<(usize, T)>,
    start: Vec<T>,
    pairs: Vec<T>,
}

fn sentence_gradient<T: Scalar>(params: &Params<T>, chain: &Chain<T>, inst: &Instance) -> SentenceGrad<T> {
    let l = params.labels;
    let n = inst.gold.len();
    let em = params.emissions(&inst.feats);
    let fb = ForwardBackward::compute(&em, chain);
    let gold_score = crf::path_score(&em, chain, &inst.gold);
    let log_likelihood = gold_score - fb.log_z;

    let mut marg = vec![T::zero(); n * l];
    for t in 0..n {
        for y in 0..l {
            marg[t * l + y] = fb.node_marginal(t, y);
        }
    }
    let mut emission = Vec::with_capacity(inst.feats.iter().map(Vec::len).sum::<usize>() * l);
    for (t, fs) in inst.feats.iter().enumerate() {
        for &f in fs {
            for y in 0..l {
                let observed = if inst.gold[t] == y { T::one() } else { T::zero() };
                emission.push((f as usize * l + y, observed - marg[t * l + y]));
            }
        }
    }
    let mut start = vec![T::zero(); l];
    let mut pairs = vec![T::zero(); l * l];
    if n > 0 {
        for y in 0..l {
            start[y] = -marg[y];
        }
        start[inst.gold[0]] = start[inst.gold[0]] + T::one();
        for t in 1..n {
            for p in 0..l {
                for y in 0..l {
                    pairs[p * l + y] = pairs[p * l + y] - fb.edge_marginal(&em, chain, t, p, y);
                }
            }
            let k = inst.gold[t - 1] * l + inst.gold[t];
            pairs[k] = pairs[k] + T::one();
        }
    }
    SentenceGrad { log_likelihood, emission, start, pairs }
}

/// Log-likelihood of one instance and its gradient with respect to every
/// parameter.
pub fn log_likelihood_gradient<T: Scalar>(
    params: &Params<T>,
    mask: &(Vec<bool>, Vec<bool>),
    inst: &Instance,
) -> (T, Params<T>) {
    let chain = params.chain(mask);
    let g = sentence_gradient(params, &chain, inst);
    let mut out = Params::zeros(params.n_features, params.labels);
    for (k, d) in g.emission {
        out.emission[k] = out.emission[k] + d;
    }
    out.start = g.start;
    out.pairs = g.pairs;
    (g.log_likelihood, out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean negative log-likelihood per sentence plus the L2 penalty.
    pub loss: f64,
    pub validation_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

fn fingerprint(examples: &[AnnotationSet]) -> String {
    let mut h = Sha256::new();
    for ex in examples {
        for (tok, label) in ex.utterance().tokens().iter().zip(ex.to_bio()) {
            h.update(tok.surface.as_bytes());
            h.update([0x1f]);
            h.update(label.to_string().as_bytes());
            h.update([0x1e]);
        }
        h.update([0x1d]);
    }
    hex::encode(h.finalize())
}

/// Gold spans moved into clause-expanded coordinates.
fn expanded_example(ex: &AnnotationSet) -> AnnotationSet {
    let trace = restructure::expand(ex.utterance());
    if trace.is_identity() {
        return ex.clone();
    }
    let spans: Vec<SpanAnnotation> = ex.spans().iter().map(|s| trace.lift_span(s)).collect();
    AnnotationSet::new(trace.expanded, spans, ex.provenance()).unwrap_or_else(|_| ex.clone())
}

fn objective<T: Scalar>(params: &Params<T>, chain: &Chain<T>, data: &[Instance], l2: f64) -> f64 {
    let nll: f64 = data
        .iter()
        .map(|inst| {
            let em = params.emissions(&inst.feats);
            let fb = ForwardBackward::compute(&em, chain);
            (fb.log_z - crf::path_score(&em, chain, &inst.gold)).to_f64().unwrap_or(f64::NAN)
        })
        .sum();
    nll / data.len() as f64 + 0.5 * l2 * params.squared_norm().to_f64().unwrap_or(f64::NAN)
}

pub fn train<T: Scalar>(
    examples: &[AnnotationSet],
    config: &TrainingConfig,
) -> Result<(TaggerModel<T>, TrainReport), TrainError> {
    train_with_validation(examples, None, config)
}

/// Trains a model; when `validation` is given, span-level macro F1 on it is
/// recorded after every epoch.
pub fn train_with_validation<T: Scalar>(
    examples: &[AnnotationSet],
    validation: Option<&[AnnotationSet]>,
    config: &TrainingConfig,
) -> Result<(TaggerModel<T>, TrainReport), TrainError> {
    config.validate()?;
    if examples.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let prepared: Vec<AnnotationSet> = if config.expand_training {
        examples.iter().map(expanded_example).collect()
    } else {
        examples.to_vec()
    };

    let mut index: HashMap<String, u32> = HashMap::new();
    let mut features: Vec<String> = Vec::new();
    let data: Vec<Instance> = prepared
        .iter()
        .map(|ex| {
            let feats = featurize_sentence(ex.utterance().tokens())
                .into_iter()
                .map(|fv| {
                    fv.keys()
                        .iter()
                        .map(|k| {
                            *index.entry(k.clone()).or_insert_with(|| {
                                features.push(k.clone());
                                (features.len() - 1) as u32
                            })
                        })
                        .collect()
                })
                .collect();
            let gold = ex.to_bio().into_iter().map(|l| l.index()).collect();
            Instance { feats, gold }
        })
        .collect();

    let labels = crate::annotation::BioLabel::ALPHABET.len();
    let mask = bio_mask();
    let mut params: Params<T> = Params::zeros(features.len(), labels);
    let lr = T::lit(config.learning_rate);
    let l2 = T::lit(config.l2);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport::default();
    let metadata = ModelMetadata {
        config: config.clone(),
        corpus_fingerprint: fingerprint(examples),
        sentences: examples.len(),
        epochs: Vec::new(),
    };

    for epoch in 1..=config.epochs {
        match config.optimizer {
            Optimizer::Sgd => {
                if config.shuffle {
                    order.shuffle(&mut rng);
                }
                for &i in &order {
                    let chain = params.chain(&mask);
                    let g = sentence_gradient(&params, &chain, &data[i]);
                    if !g.log_likelihood.is_finite() {
                        return Err(TrainError::NonFinite { epoch, sentence: Some(i) });
                    }
                    for (k, d) in g.emission {
                        params.emission[k] = params.emission[k] + lr * d;
                    }
                    for (w, d) in params.start.iter_mut().zip(&g.start) {
                        *w = *w + lr * *d;
                    }
                    for (w, d) in params.pairs.iter_mut().zip(&g.pairs) {
                        *w = *w + lr * *d;
                    }
                }
                params.scale(T::one() - lr * l2);
            }
            Optimizer::FullBatch => {
                let chain = params.chain(&mask);
                let mut total: Params<T> = Params::zeros(params.n_features, labels);
                for (i, inst) in data.iter().enumerate() {
                    let g = sentence_gradient(&params, &chain, inst);
                    if !g.log_likelihood.is_finite() {
                        return Err(TrainError::NonFinite { epoch, sentence: Some(i) });
                    }
                    for (k, d) in g.emission {
                        total.emission[k] = total.emission[k] + d;
                    }
                    for (w, d) in total.start.iter_mut().zip(&g.start) {
                        *w = *w + *d;
                    }
                    for (w, d) in total.pairs.iter_mut().zip(&g.pairs) {
                        *w = *w + *d;
                    }
                }
                let inv_n = T::one() / T::lit(data.len() as f64);
                let mut flat = params.flat();
                for (w, g) in flat.iter_mut().zip(total.flat()) {
                    *w = *w + lr * (g * inv_n - l2 * *w);
                }
                params.set_flat(&flat);
            }
        }

        let chain = params.chain(&mask);
        let loss = objective(&params, &chain, &data, config.l2);
        if !loss.is_finite() {
            return Err(TrainError::NonFinite { epoch, sentence: None });
        }
        let validation_f1 = validation.map(|val| {
            let model = TaggerModel::from_parts(features.clone(), params.clone(), metadata.clone());
            let preds: Vec<AnnotationSet> = val.iter().map(|ex| model.annotate(ex.utterance())).collect();
            eval::evaluate(&preds, val).map(|r| r.average).unwrap_or(0.0)
        });
        log::info!(
            "epoch {}/{}: loss {:.6}{}",
            epoch,
            config.epochs,
            loss,
            validation_f1.map(|f| format!(", validation F1 {:.4}", f)).unwrap_or_default()
        );
        report.epochs.push(EpochStats { epoch, loss, validation_f1 });
    }

    let mut metadata = metadata;
    metadata.epochs = report.epochs.clone();
    Ok((TaggerModel::from_parts(features, params, metadata), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{Provenance, TagType};
    use crate::text::Utterance;

    fn example(text: &str, spans: &[(TagType, usize, usize)]) -> AnnotationSet {
        let spans = spans.iter().map(|&(t, s, e)| SpanAnnotation::new(t, s, e)).collect();
        AnnotationSet::new(Utterance::new(text), spans, Provenance::Gold).unwrap()
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(
            train::<f64>(&[], &TrainingConfig::default()),
            Err(TrainError::EmptyCorpus)
        ));
    }

    #[test]
    fn memorizes_single_sentence() {
        let ex = example("if it rains stay home", &[(TagType::Cnd, 1, 3), (TagType::Csq, 3, 5)]);
        let corpus = vec![ex.clone(); 3];
        let (model, _) = train::<f64>(&corpus, &TrainingConfig::default()).unwrap();
        assert_eq!(model.decode(ex.utterance()).0, ex.to_bio());
    }

    #[test]
    fn full_batch_also_learns() {
        let ex = example("if it rains stay home", &[(TagType::Cnd, 1, 3), (TagType::Csq, 3, 5)]);
        let cfg = TrainingConfig { optimizer: Optimizer::FullBatch, learning_rate: 1.0, epochs: 60, ..Default::default() };
        let (model, report) = train::<f64>(std::slice::from_ref(&ex), &cfg).unwrap();
        assert_eq!(model.decode(ex.utterance()).0, ex.to_bio());
        assert!(report.epochs.last().unwrap().loss < report.epochs[0].loss);
    }

    #[test]
    fn deterministic_given_seed() {
        let corpus = vec![
            example("if it rains stay home", &[(TagType::Cnd, 1, 3), (TagType::Csq, 3, 5)]),
            example("pay rent and call mom", &[(TagType::Fa, 0, 2), (TagType::Sa, 3, 5)]),
        ];
        let cfg = TrainingConfig { epochs: 3, ..Default::default() };
        let (a, _) = train::<f64>(&corpus, &cfg).unwrap();
        let (b, _) = train::<f64>(&corpus, &cfg).unwrap();
        assert_eq!(a.params().flat(), b.params().flat());
    }

    #[test]
    fn expanded_training_lifts_gold() {
        let ex = example("Transfer $400 to John and Sam", &[(TagType::Fa, 0, 4), (TagType::Sa, 5, 6)]);
        let lifted = expanded_example(&ex);
        assert_eq!(lifted.utterance().text(), "Transfer $400 to John and Transfer $400 to Sam");
        assert_eq!(lifted.text_of(TagType::Sa), Some("Transfer $400 to Sam"));
        let cfg = TrainingConfig { expand_training: true, epochs: 2, ..Default::default() };
        assert!(train::<f32>(&[ex], &cfg).is_ok());
    }
}
