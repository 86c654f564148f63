//! Shared fixtures for the benchmarks.

use hassvm::data::transform_sample;
use hassvm::experiments::{generate_synthetic, SyntheticConfig};
use hassvm::trainers::train_ssvm;
use hassvm::{AdaptationTree, DomainDataset, SourceModel, TrainOptions};

pub struct Fixture {
    pub source: DomainDataset,
    pub targets: Vec<DomainDataset>,
    pub tree: AdaptationTree,
    pub source_model: SourceModel,
}

/// Default synthetic benchmark with bias, `per_leaf` samples per leaf.
pub fn fixture(seed: u64, per_leaf: usize) -> Fixture {
    let data = generate_synthetic(&SyntheticConfig::with_seed(seed)).expect("generator config");
    let source = with_bias(&data.source, usize::MAX);
    let targets: Vec<DomainDataset> = data.targets.iter().map(|t| with_bias(t, per_leaf)).collect();
    let tree = AdaptationTree::new(&data.tree).expect("generator tree");
    let source_model = train_ssvm(&[&source], 1.0, &TrainOptions::default())
        .and_then(|m| m.source_model(None))
        .expect("source model");
    Fixture {
        source,
        targets,
        tree,
        source_model,
    }
}

fn with_bias(d: &DomainDataset, take: usize) -> DomainDataset {
    let samples = d
        .samples
        .iter()
        .step_by((d.len() / take.min(d.len())).max(1))
        .take(take)
        .map(|s| transform_sample(s.clone(), None, true))
        .collect();
    DomainDataset::new(d.domain_id.clone(), samples, d.n + 1, d.k).expect("consistent dataset")
}
