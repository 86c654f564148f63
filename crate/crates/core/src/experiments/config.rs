//! Experiment config files (JSON).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::splits::SplitProtocol;
use crate::experiments::synthetic::{SyntheticConfig, SOURCE_DOMAIN};
use crate::trainers::{Method, Optimizer};
use crate::tree::{validate_tree, AdaptationTree, TreeFile, TreeSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    /// Dataset files; every domain may appear in only one of them.
    Files(Vec<PathBuf>),
    Synthetic(SyntheticConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeSource {
    Brackets(String),
    /// A tree file, `{"root": ...}`.
    File(PathBuf),
    Spec(TreeSpec),
}

impl TreeSource {
    pub fn resolve(&self) -> Result<AdaptationTree> {
        Ok(match self {
            TreeSource::Brackets(text) => validate_tree(&TreeSpec::parse_brackets(text)?)?,
            TreeSource::File(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str::<TreeFile>(&text)?.validate()?
            }
            TreeSource::Spec(spec) => validate_tree(spec)?,
        })
    }
}

/// Target domains pooled, split into discovered domains, and adapted to as
/// if those were the targets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentConfig {
    pub domains: usize,
    /// Precomputed assignments, one per pooled target sample. The built-in
    /// partitioner runs when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignments: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default = "default_source")]
    pub source_domain: String,
    /// Defaults to every domain other than the source, in file order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_domains: Option<Vec<String>>,
    /// Defaults to the generator's tree for synthetic data, otherwise to a
    /// root `N0` over all targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeSource>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub protocol: SplitProtocol,
    #[serde(rename = "C", default = "default_c")]
    pub c: f64,
    #[serde(default = "default_true")]
    pub append_bias: bool,
    /// Z-score with statistics of each repetition's source training split.
    #[serde(default)]
    pub normalize: bool,
    #[serde(default)]
    pub optimizer: Optimizer,
    /// Extra HA-SSVM rows evaluating these node slices on every target.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub report_nodes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<LatentConfig>,
}

fn default_source() -> String {
    SOURCE_DOMAIN.to_string()
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_c() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    /// All methods on synthetic data with default settings.
    pub fn synthetic(data: SyntheticConfig, protocol: SplitProtocol) -> Self {
        Self {
            data: DataSource::Synthetic(data),
            source_domain: default_source(),
            target_domains: None,
            tree: None,
            methods: default_methods(),
            protocol,
            c: default_c(),
            append_bias: true,
            normalize: false,
            optimizer: Optimizer::default(),
            report_nodes: Vec::new(),
            latent: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataSource::Files(files) = &mut cfg.data {
            files.iter_mut().for_each(fix);
        }
        if let Some(TreeSource::File(p)) = &mut cfg.tree {
            fix(p);
        }
        if let Some(p) = cfg.latent.as_mut().and_then(|l| l.assignments.as_mut()) {
            fix(p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::Config(format!("method {m} is listed twice")));
            }
        }
        if !self.report_nodes.is_empty() && !self.methods.contains(&Method::Hassvm) {
            return Err(Error::Config("report_nodes needs HA-SSVM among the methods".into()));
        }
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(Error::Config(format!(
                "C must be finite and non-negative, got {}",
                self.c
            )));
        }
        self.protocol.validate()?;
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
        }
        if let Some(l) = &self.latent {
            if l.domains == 0 {
                return Err(Error::Config("latent domain count must be at least 1".into()));
            }
        }
        Ok(())
    }
}
