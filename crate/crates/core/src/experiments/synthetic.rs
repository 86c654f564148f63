//! Synthetic hierarchical domain shift.
//!
//! Class means are drawn once. Every node of a complete tree adds its own
//! Gaussian offset, shared by all categories beneath it, so leaves under a
//! common parent share that parent's shift. The source domain sits at zero
//! offset.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{DomainDataset, LabeledSample};
use crate::error::{Error, Result};
use crate::tree::TreeSpec;

pub const SOURCE_DOMAIN: &str = "S";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    #[serde(rename = "K")]
    pub k: usize,
    /// Raw feature dimension (before any bias feature).
    pub n: usize,
    /// Levels including the root; the leaves sit at level `depth - 1`.
    pub depth: usize,
    pub branching: usize,
    pub source_per_category: usize,
    pub target_per_category: usize,
    /// Per-coordinate standard deviation of the class means.
    pub class_mean_scale: f64,
    /// Per-coordinate standard deviation of node offsets, one per level.
    pub shifts: Vec<f64>,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            k: 10,
            n: 20,
            depth: 2,
            branching: 3,
            source_per_category: 60,
            target_per_category: 40,
            class_mean_scale: 1.0,
            shifts: vec![1.0, 0.5],
            noise: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synthetic config: {m}")));
        if self.k < 2 {
            return bad(format!("K must be at least 2, got {}", self.k));
        }
        if self.n == 0 || self.depth == 0 || self.branching == 0 {
            return bad("n, depth and branching must be positive".into());
        }
        if self.source_per_category == 0 || self.target_per_category == 0 {
            return bad("per-category sample counts must be positive".into());
        }
        if self.shifts.len() != self.depth {
            return bad(format!(
                "{} shift magnitudes given for a tree with {} levels",
                self.shifts.len(),
                self.depth
            ));
        }
        if self
            .shifts
            .iter()
            .chain([&self.class_mean_scale])
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return bad("magnitudes must be finite and non-negative".into());
        }
        if !(self.noise > 0.0) || !self.noise.is_finite() {
            return bad(format!("noise must be positive, got {}", self.noise));
        }
        let leaves = self.branching.checked_pow(self.depth as u32 - 1);
        if leaves.is_none_or(|l| l > 10_000) {
            return bad("tree has too many leaves".into());
        }
        Ok(())
    }

    pub fn leaf_count(&self) -> usize {
        self.branching.pow(self.depth as u32 - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub source: DomainDataset,
    /// One dataset per leaf, in leaf order (`T1`, `T2`, ...).
    pub targets: Vec<DomainDataset>,
    /// Ground-truth tree: internal nodes `N0`, `N1`, ... in pre-order,
    /// leaves named after their domains.
    pub tree: TreeSpec,
}

impl SyntheticData {
    pub fn target_refs(&self) -> Vec<&DomainDataset> {
        self.targets.iter().collect()
    }
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mean_dist = Normal::new(0.0, cfg.class_mean_scale).map_err(|e| Error::Config(e.to_string()))?;
    let noise = Normal::new(0.0, cfg.noise).map_err(|e| Error::Config(e.to_string()))?;

    let means: Vec<Vec<f64>> = (0..cfg.k)
        .map(|_| (0..cfg.n).map(|_| mean_dist.sample(&mut rng)).collect())
        .collect();

    let mut builder = Builder {
        cfg,
        rng,
        next_internal: 0,
        next_leaf: 1,
        leaves: Vec::new(),
    };
    let tree = builder.node(0, &vec![0.0; cfg.n]);
    let Builder { mut rng, leaves, .. } = builder;

    let mut draw = |domain: &str, offset: &[f64], per: usize| -> Result<DomainDataset> {
        let mut samples = Vec::with_capacity(per * cfg.k);
        for (c, mean) in means.iter().enumerate() {
            for _ in 0..per {
                let f = mean
                    .iter()
                    .zip(offset)
                    .map(|(m, o)| m + o + noise.sample(&mut rng))
                    .collect();
                samples.push(LabeledSample::new(domain, c + 1, f));
            }
        }
        DomainDataset::new(domain, samples, cfg.n, cfg.k)
    };
    let source = draw(SOURCE_DOMAIN, &vec![0.0; cfg.n], cfg.source_per_category)?;
    let targets = leaves
        .iter()
        .map(|(name, offset)| draw(name, offset, cfg.target_per_category))
        .collect::<Result<_>>()?;
    Ok(SyntheticData { source, targets, tree })
}

struct Builder<'a> {
    cfg: &'a SyntheticConfig,
    rng: ChaCha8Rng,
    next_internal: usize,
    next_leaf: usize,
    /// Leaf name and accumulated offset.
    leaves: Vec<(String, Vec<f64>)>,
}

impl Builder<'_> {
    fn node(&mut self, level: usize, inherited: &[f64]) -> TreeSpec {
        let scale = self.cfg.shifts[level];
        let offset: Vec<f64> = inherited.iter().map(|v| v + scale * gaussian(&mut self.rng)).collect();
        if level + 1 == self.cfg.depth {
            let name = format!("T{}", self.next_leaf);
            self.next_leaf += 1;
            self.leaves.push((name.clone(), offset));
            return TreeSpec::leaf(name.clone(), name);
        }
        let name = format!("N{}", self.next_internal);
        self.next_internal += 1;
        let children = (0..self.cfg.branching).map(|_| self.node(level + 1, &offset)).collect();
        TreeSpec::node(name, children)
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::validate_tree;

    fn mean_of(d: &DomainDataset, category: usize) -> Vec<f64> {
        let rows: Vec<&LabeledSample> = d.samples.iter().filter(|s| s.label == category).collect();
        let mut m = vec![0.0; d.n];
        for r in &rows {
            for (a, b) in m.iter_mut().zip(&r.features) {
                *a += b / rows.len() as f64;
            }
        }
        m
    }

    #[test]
    fn default_shape() {
        let data = generate_synthetic(&SyntheticConfig::default()).unwrap();
        assert_eq!(data.source.len(), 600);
        assert_eq!(data.targets.len(), 3);
        assert!(data.targets.iter().all(|t| t.len() == 400 && t.n == 20 && t.k == 10));
        let tree = validate_tree(&data.tree).unwrap();
        assert_eq!(tree.to_string(), "N0[T1,T2,T3]");
        assert_eq!(tree.domains(), ["T1", "T2", "T3"]);
    }

    #[test]
    fn deeper_trees_name_nodes_in_pre_order() {
        let cfg = SyntheticConfig {
            depth: 3,
            branching: 2,
            shifts: vec![1.0, 0.5, 0.25],
            source_per_category: 2,
            target_per_category: 2,
            ..SyntheticConfig::default()
        };
        let data = generate_synthetic(&cfg).unwrap();
        let tree = validate_tree(&data.tree).unwrap();
        assert_eq!(tree.to_string(), "N0[N1[T1,T2],N2[T3,T4]]");
        assert_eq!(data.targets.len(), 4);
    }

    #[test]
    fn same_seed_same_data() {
        let a = generate_synthetic(&SyntheticConfig::with_seed(5)).unwrap();
        let b = generate_synthetic(&SyntheticConfig::with_seed(5)).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SyntheticConfig::with_seed(6)).unwrap();
        assert_ne!(a.source, c.source);
    }

    #[test]
    fn zero_shift_leaves_match_the_source() {
        let cfg = SyntheticConfig {
            shifts: vec![0.0, 0.0],
            source_per_category: 400,
            target_per_category: 400,
            ..SyntheticConfig::default()
        };
        let data = generate_synthetic(&cfg).unwrap();
        // Difference of two means of m samples each has sd sigma*sqrt(2/m).
        let bound = 4.0 * cfg.noise * (2.0 / 400.0f64).sqrt();
        for t in &data.targets {
            for c in 1..=cfg.k {
                let (a, b) = (mean_of(&data.source, c), mean_of(t, c));
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() <= bound, "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn leaves_share_the_root_offset() {
        let cfg = SyntheticConfig {
            shifts: vec![3.0, 0.0],
            noise: 0.01,
            ..SyntheticConfig::default()
        };
        let data = generate_synthetic(&cfg).unwrap();
        let m1 = mean_of(&data.targets[0], 1);
        let m2 = mean_of(&data.targets[1], 1);
        let ms = mean_of(&data.source, 1);
        let shift: f64 = m1.iter().zip(&ms).map(|(a, b)| (a - b).abs()).sum();
        let spread: f64 = m1.iter().zip(&m2).map(|(a, b)| (a - b).abs()).sum();
        assert!(shift > 10.0 && spread < 0.1, "{shift} {spread}");
    }

    #[test]
    fn config_validation() {
        let bad = [
            SyntheticConfig {
                k: 1,
                ..SyntheticConfig::default()
            },
            SyntheticConfig {
                shifts: vec![1.0],
                ..SyntheticConfig::default()
            },
            SyntheticConfig {
                noise: 0.0,
                ..SyntheticConfig::default()
            },
            SyntheticConfig {
                shifts: vec![-1.0, 0.5],
                ..SyntheticConfig::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))), "{cfg:?}");
        }
    }
}
