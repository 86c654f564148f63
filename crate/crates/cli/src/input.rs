use std::path::PathBuf;

use hassvm::data::{load_dataset, transform_sample};
use hassvm::{DatasetOptions, DomainDataset, Error, LabeledSample, Normalization, Result, SourceModel};

/// Raw samples from several files, grouped by domain in order of first
/// appearance. A domain split across files is merged.
pub fn raw_domains(paths: &[PathBuf], only: &[String], k: Option<usize>) -> Result<Vec<DomainDataset>> {
    let mut all: Vec<DomainDataset> = Vec::new();
    let mut max_k = 0;
    for path in paths {
        let loaded = load_dataset(
            path,
            &DatasetOptions {
                k,
                ..DatasetOptions::raw()
            },
        )?;
        max_k = max_k.max(loaded.k);
        for d in loaded.datasets {
            match all.iter_mut().find(|a| a.domain_id == d.domain_id) {
                Some(existing) => existing.samples.extend(d.samples),
                None => all.push(d),
            }
        }
    }
    let k = k.unwrap_or(max_k);
    let n = all.first().map_or(0, |d| d.n);
    if !only.is_empty() {
        for id in only {
            if !all.iter().any(|d| &d.domain_id == id) {
                let known: Vec<&str> = all.iter().map(|d| d.domain_id.as_str()).collect();
                return Err(Error::Config(format!(
                    "no domain `{id}` in the data (found {})",
                    known.join(", ")
                )));
            }
        }
        all.retain(|d| only.contains(&d.domain_id));
    }
    all.into_iter()
        .map(|d| DomainDataset::new(d.domain_id, d.samples, n, k))
        .collect()
}

/// Applies normalization and bias to every sample.
pub fn prepare(raw: Vec<DomainDataset>, norm: Option<&Normalization>, bias: bool) -> Result<Vec<DomainDataset>> {
    raw.into_iter()
        .map(|d| {
            let n = d.n + usize::from(bias);
            let samples = d.samples.into_iter().map(|s| transform_sample(s, norm, bias)).collect();
            DomainDataset::new(d.domain_id, samples, n, d.k)
        })
        .collect()
}

/// Data prepared the way `model` expects its inputs.
pub fn for_model(paths: &[PathBuf], only: &[String], model: &SourceModel) -> Result<Vec<DomainDataset>> {
    let raw = raw_domains(paths, only, Some(model.k))?;
    let raw_n = model.n - usize::from(model.bias_appended);
    if let Some(d) = raw.first() {
        if d.n != raw_n {
            return Err(Error::Config(format!(
                "data has {} features, the model expects {raw_n}",
                d.n
            )));
        }
    }
    prepare(raw, model.normalization.as_ref(), model.bias_appended)
}

pub fn pool(raw: &[DomainDataset]) -> Vec<LabeledSample> {
    raw.iter().flat_map(|d| d.samples.iter().cloned()).collect()
}
