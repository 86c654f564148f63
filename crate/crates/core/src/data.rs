//! Labeled samples, per-domain datasets and the plain-text dataset format.
//!
//! One sample per line, comma separated: `domain_id,label,f1,...,fn`. Lines
//! starting with `#` and blank lines are skipped. Labels are 1-based.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    /// Category in `1..=k`.
    pub label: usize,
    pub domain: String,
}

impl LabeledSample {
    pub fn new(domain: impl Into<String>, label: usize, features: Vec<f64>) -> Self {
        Self {
            features,
            label,
            domain: domain.into(),
        }
    }
}

/// Samples that share one domain, feature dimension `n` and category count `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    pub domain_id: String,
    pub samples: Vec<LabeledSample>,
    pub n: usize,
    pub k: usize,
}

impl DomainDataset {
    /// Validates that every sample has `n` finite features and a label in `1..=k`.
    pub fn new(domain_id: impl Into<String>, samples: Vec<LabeledSample>, n: usize, k: usize) -> Result<Self> {
        for s in &samples {
            if s.features.len() != n {
                return Err(Error::dim("sample features", n, s.features.len()));
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!(
                    "sample in domain `{}` has a non-finite feature",
                    s.domain
                )));
            }
            crate::feature::check_category(s.label, k)?;
        }
        Ok(Self {
            domain_id: domain_id.into(),
            samples,
            n,
            k,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Concatenates datasets that agree on `n` and `k` under a new id.
    pub fn concat(domain_id: impl Into<String>, parts: &[&DomainDataset]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Degenerate("nothing to concatenate".into()))?;
        let mut samples = Vec::with_capacity(parts.iter().map(|d| d.len()).sum());
        for d in parts {
            if d.n != first.n {
                return Err(Error::dim("dataset feature dimension", first.n, d.n));
            }
            if d.k != first.k {
                return Err(Error::dim("dataset category count", first.k, d.k));
            }
            samples.extend(d.samples.iter().cloned());
        }
        Ok(Self {
            domain_id: domain_id.into(),
            samples,
            n: first.n,
            k: first.k,
        })
    }
}

/// Per-feature mean and scale used for z-scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStat {
    pub mean: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Normalization(pub Vec<FeatureStat>);

impl Normalization {
    /// Mean and population standard deviation of every feature. Constant
    /// features get scale 1.
    pub fn fit<'a>(samples: impl IntoIterator<Item = &'a LabeledSample>) -> Result<Self> {
        let mut count = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sum_sq: Vec<f64> = Vec::new();
        for s in samples {
            if count == 0 {
                sum = vec![0.0; s.features.len()];
                sum_sq = vec![0.0; s.features.len()];
            } else if s.features.len() != sum.len() {
                return Err(Error::dim("sample features", sum.len(), s.features.len()));
            }
            for (i, v) in s.features.iter().enumerate() {
                sum[i] += v;
                sum_sq[i] += v * v;
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::Degenerate("cannot fit normalization on no samples".into()));
        }
        let m = count as f64;
        let stats = sum
            .iter()
            .zip(&sum_sq)
            .map(|(s, sq)| {
                let mean = s / m;
                let var = (sq / m - mean * mean).max(0.0);
                let sd = var.sqrt();
                FeatureStat {
                    mean,
                    scale: if sd > 1e-12 { sd } else { 1.0 },
                }
            })
            .collect();
        Ok(Self(stats))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::dim("normalization", n, self.0.len()));
        }
        if let Some(i) = self.0.iter().position(|s| !(s.scale > 0.0) || !s.mean.is_finite()) {
            return Err(Error::Config(format!(
                "normalization entry {i} needs a finite mean and a positive scale"
            )));
        }
        Ok(())
    }

    pub fn apply(&self, features: &mut [f64]) {
        for (v, s) in features.iter_mut().zip(&self.0) {
            *v = (*v - s.mean) / s.scale;
        }
    }
}

/// Transforms applied to raw features as they are loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetOptions {
    /// Append a constant `1.0` feature to every sample.
    pub append_bias: bool,
    /// Fit z-scoring statistics on the loaded data (ignored when
    /// `normalization` is given).
    pub normalize: bool,
    /// Previously fitted statistics to apply instead of fitting new ones.
    pub normalization: Option<Normalization>,
    /// Category count; inferred as the largest label when absent.
    pub k: Option<usize>,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            append_bias: true,
            normalize: false,
            normalization: None,
            k: None,
        }
    }
}

impl DatasetOptions {
    pub fn raw() -> Self {
        Self {
            append_bias: false,
            ..Self::default()
        }
    }
}

/// Result of loading a dataset file: one dataset per domain, in order of
/// first appearance, plus the normalization that was applied (if any).
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    pub datasets: Vec<DomainDataset>,
    pub normalization: Option<Normalization>,
    /// Feature dimension after transforms.
    pub n: usize,
    pub k: usize,
}

impl LoadedData {
    pub fn get(&self, domain: &str) -> Option<&DomainDataset> {
        self.datasets.iter().find(|d| d.domain_id == domain)
    }

    pub fn domains(&self) -> Vec<&str> {
        self.datasets.iter().map(|d| d.domain_id.as_str()).collect()
    }
}

pub fn load_dataset(path: impl AsRef<Path>, opts: &DatasetOptions) -> Result<LoadedData> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, &path.display().to_string(), opts)
}

/// Parses dataset text. `origin` names the source in error messages.
pub fn parse_dataset(text: &str, origin: &str, opts: &DatasetOptions) -> Result<LoadedData> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };

    let mut samples: Vec<LabeledSample> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let domain = fields.next().unwrap_or_default();
        if domain.is_empty() {
            return Err(parse_err(lineno, "empty domain id".into()));
        }
        let label_field = fields.next().ok_or_else(|| parse_err(lineno, "missing label".into()))?;
        let label: i64 = label_field
            .parse()
            .map_err(|_| parse_err(lineno, format!("label `{label_field}` is not an integer")))?;
        if label < 1 {
            return Err(parse_err(lineno, format!("label {label} is below 1")));
        }
        let label = label as usize;
        if let Some(k) = opts.k {
            if label > k {
                return Err(parse_err(lineno, format!("label {label} exceeds category count {k}")));
            }
        }
        let features = fields
            .enumerate()
            .map(|(j, f)| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(lineno, format!("feature {} (`{f}`) is not a finite number", j + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if features.is_empty() {
            return Err(parse_err(lineno, "sample has no features".into()));
        }
        match width {
            None => width = Some(features.len()),
            Some(w) if w != features.len() => {
                return Err(parse_err(
                    lineno,
                    format!("expected {w} features, found {}", features.len()),
                ))
            }
            _ => {}
        }
        samples.push(LabeledSample::new(domain, label, features));
    }
    if samples.is_empty() {
        return Err(parse_err(0, "no samples".into()));
    }

    let k = opts
        .k
        .unwrap_or_else(|| samples.iter().map(|s| s.label).max().unwrap_or(1));
    let raw_n = width.unwrap_or(0);
    let normalization = match (&opts.normalization, opts.normalize) {
        (Some(given), _) => {
            given.validate(raw_n)?;
            Some(given.clone())
        }
        (None, true) => Some(Normalization::fit(&samples)?),
        (None, false) => None,
    };
    let datasets = group_by_domain(
        samples
            .into_iter()
            .map(|s| transform_sample(s, normalization.as_ref(), opts.append_bias))
            .collect(),
        k,
    )?;
    let n = raw_n + usize::from(opts.append_bias);
    Ok(LoadedData {
        datasets,
        normalization,
        n,
        k,
    })
}

/// Applies normalization then the optional bias feature.
pub fn transform_sample(
    mut s: LabeledSample,
    normalization: Option<&Normalization>,
    append_bias: bool,
) -> LabeledSample {
    if let Some(norm) = normalization {
        norm.apply(&mut s.features);
    }
    if append_bias {
        s.features.push(1.0);
    }
    s
}

/// Groups samples by their `domain` field, keeping first-appearance order.
pub fn group_by_domain(samples: Vec<LabeledSample>, k: usize) -> Result<Vec<DomainDataset>> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<LabeledSample>> = HashMap::new();
    for s in samples {
        if !groups.contains_key(&s.domain) {
            order.push(s.domain.clone());
        }
        groups.entry(s.domain.clone()).or_default().push(s);
    }
    order
        .into_iter()
        .map(|domain| {
            let samples = groups.remove(&domain).unwrap_or_default();
            let n = samples.first().map_or(0, |s| s.features.len());
            DomainDataset::new(domain, samples, n, k)
        })
        .collect()
}

/// Renders samples in the dataset text format. Floats use the shortest
/// representation that parses back to the same value.
pub fn format_samples<'a>(samples: impl IntoIterator<Item = &'a LabeledSample>) -> String {
    let mut out = String::new();
    for s in samples {
        let _ = write!(out, "{},{}", s.domain, s.label);
        for v in &s.features {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn save_dataset<'a>(path: impl AsRef<Path>, datasets: impl IntoIterator<Item = &'a DomainDataset>) -> Result<()> {
    let path = path.as_ref();
    let text = format_samples(datasets.into_iter().flat_map(|d| d.samples.iter()));
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
