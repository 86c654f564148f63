//! Aggregated experiment results: a TSV table and a JSON document.

use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiments::config::ExperimentConfig;

/// Column holding the per-repetition mean over target domains.
pub const AVERAGE_COLUMN: &str = "avg";

/// Accuracy of one method on one domain over the repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single repetition.
    pub std: f64,
    pub accuracies: Vec<f64>,
}

impl CellStats {
    pub fn from_values(accuracies: Vec<f64>) -> Self {
        let m = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / m;
        let std = if accuracies.len() < 2 {
            0.0
        } else {
            (accuracies.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (m - 1.0)).sqrt()
        };
        Self { mean, std, accuracies }
    }
}

/// How pooled target samples were split into discovered domains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentSummary {
    pub domains: usize,
    /// `partition` or the assignment file.
    pub assignments: String,
    /// Discovered domain → original domain → sample count.
    pub composition: IndexMap<String, IndexMap<String, usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Columns of the table, without the average.
    pub domains: Vec<String>,
    /// Row label → domain (or [`AVERAGE_COLUMN`]) → statistics.
    pub results: IndexMap<String, IndexMap<String, CellStats>>,
    /// SRC on the source samples not used for training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_holdout: Option<CellStats>,
    pub repetitions: usize,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deficiencies: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<LatentSummary>,
    pub config: ExperimentConfig,
}

impl ExperimentReport {
    pub fn cell(&self, row: &str, domain: &str) -> Option<&CellStats> {
        self.results.get(row)?.get(domain)
    }

    /// Mean over repetitions of the domain-averaged accuracy.
    pub fn average(&self, row: &str) -> Option<f64> {
        self.cell(row, AVERAGE_COLUMN).map(|c| c.mean)
    }

    /// Method × domain table, cells `mean±std` in percent.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("method");
        for d in self.domains.iter().map(String::as_str).chain([AVERAGE_COLUMN]) {
            out.push('\t');
            out.push_str(d);
        }
        out.push('\n');
        for (row, cells) in &self.results {
            out.push_str(row);
            for d in self.domains.iter().map(String::as_str).chain([AVERAGE_COLUMN]) {
                match cells.get(d) {
                    Some(c) => {
                        let _ = write!(out, "\t{:.1}±{:.1}", 100.0 * c.mean, 100.0 * c.std);
                    }
                    None => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let c = CellStats::from_values(vec![0.5]);
        assert_eq!((c.mean, c.std), (0.5, 0.0));
        let c = CellStats::from_values(vec![0.2, 0.4, 0.6]);
        assert!((c.mean - 0.4).abs() < 1e-15);
        assert!((c.std - 0.2).abs() < 1e-15);
    }
}
