//! Source models and the versioned JSON model file.
//!
//! A model file holds the category count `K`, the feature dimension `n`
//! (after the optional bias feature), the preprocessing applied to raw
//! features, an optional adaptation tree, and one weight vector per tree node
//! (or a single vector under the key `"w"` for non-hierarchical models).
//! Floats are written in shortest round-trip form, so a save/load cycle
//! preserves every weight bit for bit.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::data::{transform_sample, LabeledSample, Normalization};
use crate::error::{Error, Result};
use crate::feature;
use crate::solver::SolveStatus;
use crate::trainers::{Method, ModelWeights, TrainedModel};
use crate::tree::{validate_tree, TreeSpec, WeightStack};

pub const MODEL_FORMAT_VERSION: u64 = 1;

/// Key holding the weight vector of a non-hierarchical model.
pub const SINGLE_WEIGHTS_KEY: &str = "w";

/// A fixed prior classifier together with the preprocessing its inputs need.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    pub weights: Vec<f64>,
    pub n: usize,
    pub k: usize,
    pub bias_appended: bool,
    pub normalization: Option<Normalization>,
}

impl SourceModel {
    pub fn new(
        weights: Vec<f64>,
        n: usize,
        k: usize,
        bias_appended: bool,
        normalization: Option<Normalization>,
    ) -> Result<Self> {
        if weights.len() != k * n {
            return Err(Error::dim("source weights", k * n, weights.len()));
        }
        if let Some(norm) = &normalization {
            norm.validate(raw_width(n, bias_appended)?)?;
        }
        Ok(Self {
            weights,
            n,
            k,
            bias_appended,
            normalization,
        })
    }

    /// Zero weights, the anchor under which adaptive SSVM reduces to plain SSVM.
    pub fn zero(n: usize, k: usize) -> Self {
        Self {
            weights: vec![0.0; k * n],
            n,
            k,
            bias_appended: false,
            normalization: None,
        }
    }

    /// Applies this model's normalization and bias rule to a raw sample.
    pub fn prepare(&self, raw: LabeledSample) -> LabeledSample {
        transform_sample(raw, self.normalization.as_ref(), self.bias_appended)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n {
            return Err(Error::dim("sample features", self.n, x.len()));
        }
        feature::predict(&self.weights, x)
    }
}

fn raw_width(n: usize, bias_appended: bool) -> Result<usize> {
    if bias_appended && n == 0 {
        return Err(Error::CorruptModel("bias flag set on a zero-width model".into()));
    }
    Ok(n - usize::from(bias_appended))
}

/// On-disk model representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u64,
    pub kind: Method,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub n: usize,
    pub bias_appended: bool,
    pub normalization: Option<Normalization>,
    pub tree: Option<TreeSpec>,
    pub weights: IndexMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<SolveStatus>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub provenance: IndexMap<String, serde_json::Value>,
}

impl From<&TrainedModel> for ModelFile {
    fn from(m: &TrainedModel) -> Self {
        let (tree, weights) = match &m.weights {
            ModelWeights::Single(w) => (None, IndexMap::from([(SINGLE_WEIGHTS_KEY.to_string(), w.clone())])),
            ModelWeights::Hierarchical { tree, stack } => (
                Some(tree.to_spec()),
                stack.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect(),
            ),
        };
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            kind: m.kind,
            c: m.c,
            k: m.k,
            n: m.n,
            bias_appended: m.bias_appended,
            normalization: m.normalization.clone(),
            tree,
            weights,
            objective: Some(m.objective),
            iterations: Some(m.iterations),
            status: m.status,
            provenance: m.provenance.clone(),
        }
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<TrainedModel> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(Error::Version {
                found: self.version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let len = self.k * self.n;
        if len == 0 {
            return Err(Error::CorruptModel("K and n must be positive".into()));
        }
        if let Some(norm) = &self.normalization {
            norm.validate(raw_width(self.n, self.bias_appended)?)
                .map_err(|e| Error::CorruptModel(e.to_string()))?;
        }
        if self.weights.values().flatten().any(|v| !v.is_finite()) {
            return Err(Error::CorruptModel("non-finite weight".into()));
        }
        let weights = match (self.kind, self.tree) {
            (Method::Hassvm, Some(spec)) => {
                let tree = validate_tree(&spec)?;
                let stack = WeightStack::from_named(&tree, self.weights, len)
                    .map_err(|e| Error::CorruptModel(e.to_string()))?;
                ModelWeights::Hierarchical { tree, stack }
            }
            (Method::Hassvm, None) => return Err(Error::CorruptModel("HA-SSVM model without a tree".into())),
            (_, Some(_)) => return Err(Error::CorruptModel(format!("{} model carries a tree", self.kind))),
            (_, None) => {
                let mut weights = self.weights;
                if weights.len() != 1 {
                    return Err(Error::CorruptModel(format!(
                        "expected exactly one weight vector, found {}",
                        weights.len()
                    )));
                }
                let w = weights
                    .swap_remove(SINGLE_WEIGHTS_KEY)
                    .ok_or_else(|| Error::CorruptModel(format!("missing `{SINGLE_WEIGHTS_KEY}` weights")))?;
                if w.len() != len {
                    return Err(Error::CorruptModel(format!(
                        "weight vector has {} entries, expected K*n = {len}",
                        w.len()
                    )));
                }
                ModelWeights::Single(w)
            }
        };
        Ok(TrainedModel {
            kind: self.kind,
            weights,
            c: self.c,
            k: self.k,
            n: self.n,
            bias_appended: self.bias_appended,
            normalization: self.normalization,
            objective: self.objective.unwrap_or(f64::NAN),
            iterations: self.iterations.unwrap_or(0),
            status: self.status,
            provenance: self.provenance,
        })
    }
}

pub fn model_to_json(model: &TrainedModel) -> Result<String> {
    let mut text = serde_json::to_string_pretty(&ModelFile::from(model))?;
    text.push('\n');
    Ok(text)
}

pub fn model_from_json(text: &str) -> Result<TrainedModel> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::CorruptModel(e.to_string()))?;
    match value.get("version").and_then(serde_json::Value::as_u64) {
        Some(MODEL_FORMAT_VERSION) => {}
        Some(found) => {
            return Err(Error::Version {
                found,
                expected: MODEL_FORMAT_VERSION,
            })
        }
        None => return Err(Error::CorruptModel("missing integer `version` field".into())),
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::CorruptModel(e.to_string()))?;
    file.into_model()
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_json(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
