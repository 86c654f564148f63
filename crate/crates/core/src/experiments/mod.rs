//! Evaluation protocol: repeated per-category splits, every method trained
//! on the same samples, accuracy aggregated per target domain.

pub mod config;
pub mod latent;
pub mod report;
mod run;
pub mod splits;
pub mod synthetic;

use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::feature;

pub use config::{DataSource, ExperimentConfig, LatentConfig, TreeSource};
pub use latent::{ingest_assignments, partition_domains, predict_labels};
pub use report::{CellStats, ExperimentReport, LatentSummary, AVERAGE_COLUMN};
pub use run::{run_experiment, run_with_inputs, ExperimentInputs};
pub use splits::{make_splits, DomainSplit, Split, SplitProtocol};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticData};

/// Number of samples whose predicted category equals the label.
pub fn count_correct(w: &[f64], test: &[LabeledSample]) -> Result<usize> {
    let mut correct = 0;
    for s in test {
        if feature::predict(w, &s.features)? == s.label {
            correct += 1;
        }
    }
    Ok(correct)
}

/// Fraction of `test` classified correctly. Fails on an empty test set.
pub fn accuracy(w: &[f64], test: &[LabeledSample]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Degenerate("accuracy of an empty test set".into()));
    }
    Ok(count_correct(w, test)? as f64 / test.len() as f64)
}
