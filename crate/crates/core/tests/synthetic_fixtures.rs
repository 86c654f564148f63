//! Regression fixtures measured on the synthetic generator.

use hassvm::data::transform_sample;
use hassvm::experiments::{
    accuracy, generate_synthetic, make_splits, partition_domains, predict_labels, SplitProtocol, SyntheticConfig,
};
use hassvm::trainers::{train_assvm, train_ssvm};
use hassvm::{DomainDataset, LabeledSample, TrainOptions};

fn with_bias(d: &DomainDataset) -> DomainDataset {
    let samples = d
        .samples
        .iter()
        .map(|s| transform_sample(s.clone(), None, true))
        .collect();
    DomainDataset::new(d.domain_id.clone(), samples, d.n + 1, d.k).unwrap()
}

#[test]
fn adaptation_beats_the_unadapted_source_on_seed_0() {
    let data = generate_synthetic(&SyntheticConfig::with_seed(0)).unwrap();
    let targets = data.target_refs();
    let split = &make_splits(&data.source, &targets, &SplitProtocol::new(20, 3, 1, 0)).unwrap()[0];
    let opts = TrainOptions::default();
    let src = train_ssvm(&[&with_bias(&split.source.train)], 1.0, &opts).unwrap();
    let src_model = src.source_model(None).unwrap();
    let src_w = src.single_weights().unwrap();

    let mut unadapted = Vec::new();
    let mut adapted = Vec::new();
    for t in &split.targets {
        let (train, test) = (with_bias(&t.train), with_bias(&t.test));
        let m = train_assvm(&src_model, &train, 1.0, &opts).unwrap();
        unadapted.push(accuracy(src_w, &test.samples).unwrap());
        adapted.push(accuracy(m.single_weights().unwrap(), &test.samples).unwrap());
    }
    let mean = |v: &[f64]| 100.0 * v.iter().sum::<f64>() / v.len() as f64;
    let (before, after) = (mean(&unadapted), mean(&adapted));
    assert!(after > before);
    assert!((before - SEED0_UNADAPTED).abs() < 1e-4, "{before}");
    assert!((after - SEED0_ADAPTED).abs() < 1e-4, "{after}");
}

// Mean leaf accuracy in percent, 370 test samples per leaf.
const SEED0_UNADAPTED: f64 = 80.2703;
const SEED0_ADAPTED: f64 = 92.9730;

#[test]
fn pseudo_labels_recover_zero_shift_targets() {
    let cfg = SyntheticConfig {
        shifts: vec![0.0, 0.0],
        class_mean_scale: 2.0,
        ..SyntheticConfig::with_seed(0)
    };
    let data = generate_synthetic(&cfg).unwrap();
    let src = train_ssvm(&[&with_bias(&data.source)], 1.0, &TrainOptions::default()).unwrap();
    let mut src_model = src.source_model(None).unwrap();
    src_model.bias_appended = true;
    let pool: Vec<LabeledSample> = data.targets.iter().flat_map(|t| t.samples.iter().cloned()).collect();
    let labeled = predict_labels(&src_model, &pool).unwrap();
    assert_eq!(labeled.len(), pool.len());
    assert!(labeled.iter().all(|s| (1..=cfg.k).contains(&s.label)));
    let agree = labeled.iter().zip(&pool).filter(|(a, b)| a.label == b.label).count() as f64 / pool.len() as f64;
    assert!(agree > 0.95, "{agree}");
}

#[test]
fn partitioner_recovers_separated_leaves() {
    // Leaf offsets dwarf the class structure, so each leaf is one blob.
    let cfg = SyntheticConfig {
        shifts: vec![0.0, 6.0],
        class_mean_scale: 0.5,
        ..SyntheticConfig::with_seed(0)
    };
    let data = generate_synthetic(&cfg).unwrap();
    let pool: Vec<LabeledSample> = data.targets.iter().flat_map(|t| t.samples.iter().cloned()).collect();
    let a = partition_domains(&pool, 3, 0).unwrap();
    assert_eq!(a, partition_domains(&pool, 3, 0).unwrap());
    let per = data.targets[0].len();
    let agree: usize = (0..3)
        .map(|leaf| {
            let part = &a[leaf * per..(leaf + 1) * per];
            (1..=3).map(|c| part.iter().filter(|x| **x == c).count()).max().unwrap()
        })
        .sum();
    let frac = agree as f64 / pool.len() as f64;
    assert!(frac > 0.95, "{frac}");
}
