//! Per-category random splits for the repeated train/test protocol.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DomainDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitProtocol {
    pub source_per_category: usize,
    pub target_per_category: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_repetitions() -> usize {
    20
}

impl SplitProtocol {
    pub fn new(source_per_category: usize, target_per_category: usize, repetitions: usize, seed: u64) -> Self {
        Self {
            source_per_category,
            target_per_category,
            repetitions,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.source_per_category == 0 || self.target_per_category == 0 || self.repetitions == 0 {
            return Err(Error::Protocol(
                "per-category counts and repetitions must all be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Seed of one repetition.
    pub fn repetition_seed(&self, repetition: usize) -> u64 {
        self.seed.wrapping_add(repetition as u64)
    }
}

/// Train/test partition of one domain. Index vectors refer to positions in
/// the original dataset and are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSplit {
    pub train: DomainDataset,
    pub test: DomainDataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub repetition: usize,
    pub seed: u64,
    pub source: DomainSplit,
    /// One entry per target domain, in input order.
    pub targets: Vec<DomainSplit>,
    /// Cells that had fewer samples than requested (lenient splits only).
    pub deficiencies: Vec<String>,
}

/// All repetitions of the protocol.
pub fn make_splits(source: &DomainDataset, targets: &[&DomainDataset], protocol: &SplitProtocol) -> Result<Vec<Split>> {
    protocol.validate()?;
    (0..protocol.repetitions)
        .map(|r| split_repetition(source, targets, protocol, r, false))
        .collect()
}

/// One repetition. Draws the source first, then each target in order, from
/// a generator seeded with the repetition seed. With `lenient`, target cells
/// short of samples give up what they have rather than failing.
pub fn split_repetition(
    source: &DomainDataset,
    targets: &[&DomainDataset],
    protocol: &SplitProtocol,
    repetition: usize,
    lenient: bool,
) -> Result<Split> {
    let seed = protocol.repetition_seed(repetition);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deficiencies = Vec::new();
    let source_split = split_domain(source, protocol.source_per_category, &mut rng, false, &mut deficiencies)?;
    let targets = targets
        .iter()
        .map(|t| split_domain(t, protocol.target_per_category, &mut rng, lenient, &mut deficiencies))
        .collect::<Result<_>>()?;
    Ok(Split {
        repetition,
        seed,
        source: source_split,
        targets,
        deficiencies,
    })
}

fn split_domain(
    data: &DomainDataset,
    per_category: usize,
    rng: &mut ChaCha8Rng,
    lenient: bool,
    deficiencies: &mut Vec<String>,
) -> Result<DomainSplit> {
    let mut train_indices = Vec::with_capacity(per_category * data.k);
    for category in 1..=data.k {
        let mut cell: Vec<usize> = (0..data.len()).filter(|&i| data.samples[i].label == category).collect();
        let take = if cell.len() < per_category {
            if !lenient {
                return Err(Error::Protocol(format!(
                    "domain `{}` category {category} has {} samples, {per_category} required",
                    data.domain_id,
                    cell.len()
                )));
            }
            deficiencies.push(format!(
                "domain `{}` category {category}: {} of {per_category} training samples",
                data.domain_id,
                cell.len()
            ));
            cell.len()
        } else {
            per_category
        };
        let (chosen, _) = cell.partial_shuffle(rng, take);
        train_indices.extend_from_slice(chosen);
    }
    train_indices.sort_unstable();
    let mut in_train = vec![false; data.len()];
    for &i in &train_indices {
        in_train[i] = true;
    }
    let test_indices: Vec<usize> = (0..data.len()).filter(|&i| !in_train[i]).collect();
    let pick = |idx: &[usize]| {
        DomainDataset::new(
            data.domain_id.clone(),
            idx.iter().map(|&i| data.samples[i].clone()).collect(),
            data.n,
            data.k,
        )
    };
    Ok(DomainSplit {
        train: pick(&train_indices)?,
        test: pick(&test_indices)?,
        train_indices,
        test_indices,
    })
}
