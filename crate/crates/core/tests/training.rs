mod common;

use clause_forge::eval::evaluate;
use clause_forge::tagger::{train, train_with_validation, Optimizer, TaggerModel, TrainingConfig};
use clause_forge::{AnnotationSet, Utterance};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn toy_loss_strictly_decreases_over_first_five_epochs() {
    let toy = common::corpus(10, 1);
    let (_, report) = train::<f64>(&toy, &TrainingConfig::default()).unwrap();
    assert_eq!(report.epochs.len(), 25);
    let losses: Vec<f64> = report.epochs.iter().map(|e| e.loss).collect();
    for w in losses[..5].windows(2) {
        assert!(w[1] < w[0], "loss went up: {:?}", &losses[..5]);
    }
}

#[test]
fn full_batch_loss_also_decreases() {
    let toy = common::corpus(10, 2);
    let cfg = TrainingConfig { optimizer: Optimizer::FullBatch, ..Default::default() };
    let (_, report) = train::<f64>(&toy, &cfg).unwrap();
    for w in report.epochs[..5].windows(2) {
        assert!(w[1].loss < w[0].loss);
    }
}

fn predictions<T: clause_forge::Scalar>(model: &TaggerModel<T>, gold: &[AnnotationSet]) -> Vec<AnnotationSet> {
    gold.iter().map(|g| model.annotate(g.utterance())).collect()
}

#[test]
fn learns_synthetic_patterns() {
    let train_set = common::corpus(300, 10);
    let test_set = common::corpus(100, 11);
    let cfg = TrainingConfig { epochs: 8, ..Default::default() };
    let (model, report) = train_with_validation::<f64>(&train_set, Some(&test_set), &cfg).unwrap();
    let r = evaluate(&predictions(&model, &test_set), &test_set).unwrap();
    assert!(r.average > 0.9, "macro F1 {} on synthetic data", r.average);
    let last = report.epochs.last().unwrap().validation_f1.unwrap();
    assert!((last - r.average).abs() < 1e-12);
}

#[test]
fn single_precision_model_works() {
    let train_set = common::corpus(120, 20);
    let cfg = TrainingConfig { epochs: 6, ..Default::default() };
    let (m32, _) = train::<f32>(&train_set, &cfg).unwrap();
    let r = evaluate(&predictions(&m32, &train_set), &train_set).unwrap();
    assert!(r.average > 0.9, "f32 macro F1 {}", r.average);
}

fn random_sentence(rng: &mut ChaCha8Rng) -> Utterance {
    const POOL: &[&str] = &[
        "if", "then", "else", "and", "or", "otherwise", "unless", "transfer", "$400", "to", "Donald", "my", "account",
        "balance", ",", ".", "please", "check", "first", "after", "that", "book", "a", "table", "it", "rains",
    ];
    let n = rng.gen_range(1..20);
    let words: Vec<&str> = (0..n).map(|_| *POOL.choose(rng).unwrap()).collect();
    Utterance::from_words(&words).unwrap()
}

#[test]
fn saved_model_decodes_identically() {
    let train_set = common::corpus(80, 30);
    let (model, _) = train::<f64>(&train_set, &TrainingConfig { epochs: 5, ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    model.save(&path).unwrap();
    let loaded = TaggerModel::<f64>::load(&path).unwrap();
    assert_eq!(loaded, model);

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let u = random_sentence(&mut rng);
        let (a, sa) = model.decode(&u);
        let (b, sb) = loaded.decode(&u);
        assert_eq!(a, b);
        assert_eq!(sa.to_bits(), sb.to_bits());
    }
}

#[test]
fn training_is_deterministic() {
    let data = common::corpus(40, 40);
    let cfg = TrainingConfig { epochs: 3, ..Default::default() };
    let (a, _) = train::<f64>(&data, &cfg).unwrap();
    let (b, _) = train::<f64>(&data, &cfg).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    let (c, _) = train::<f64>(&data, &TrainingConfig { seed: 7, ..cfg }).unwrap();
    assert_ne!(a.to_bytes(), c.to_bytes());
}
