//! Training entry points for every compared method.
//!
//! SRC, TAR and MIX are the same plain SSVM trained on different data; the
//! caller picks the data. A-SSVM adapts a source model to one target
//! dataset, A-SSVM-ALL to the union of several, and HA-SSVM jointly adapts a
//! whole tree of node models. Adaptive trainers start from the source
//! weights (every node, for HA-SSVM); plain SSVM starts from zero.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::{DomainDataset, Normalization};
use crate::dual::{self, DualOptions};
use crate::error::{Error, Result};
use crate::model::SourceModel;
use crate::objective::{AdaptiveObjective, HierarchicalObjective};
use crate::solver::{minimize, SolveOptions, SolveResult, SolveStatus};
use crate::tree::{AdaptationTree, WeightStack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SRC")]
    Src,
    #[serde(rename = "TAR")]
    Tar,
    #[serde(rename = "MIX")]
    Mix,
    #[serde(rename = "A-SSVM")]
    Assvm,
    #[serde(rename = "A-SSVM-ALL")]
    AssvmAll,
    #[serde(rename = "HA-SSVM")]
    Hassvm,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Src,
        Method::Tar,
        Method::Mix,
        Method::Assvm,
        Method::AssvmAll,
        Method::Hassvm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Src => "SRC",
            Method::Tar => "TAR",
            Method::Mix => "MIX",
            Method::Assvm => "A-SSVM",
            Method::AssvmAll => "A-SSVM-ALL",
            Method::Hassvm => "HA-SSVM",
        }
    }

    /// Methods that start from a source model.
    pub fn is_adaptive(self) -> bool {
        matches!(self, Method::Assvm | Method::AssvmAll | Method::Hassvm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method `{s}` (expected one of {})",
                    Method::ALL.map(Method::name).join(", ")
                ))
            })
    }
}

/// Which minimizer the trainers run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    /// Dual coordinate ascent; stops on a certified duality gap.
    #[default]
    Dual,
    /// LBFGS on the primal subgradients.
    Lbfgs,
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dual" => Ok(Optimizer::Dual),
            "lbfgs" => Ok(Optimizer::Lbfgs),
            _ => Err(Error::Config(format!(
                "unknown optimizer `{s}` (expected dual or lbfgs)"
            ))),
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Dual => "dual",
            Optimizer::Lbfgs => "lbfgs",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainOptions {
    pub optimizer: Optimizer,
    pub lbfgs: SolveOptions,
    pub dual: DualOptions,
}

impl TrainOptions {
    pub fn lbfgs(opts: SolveOptions) -> Self {
        Self {
            optimizer: Optimizer::Lbfgs,
            lbfgs: opts,
            ..Self::default()
        }
    }
}

/// Solver output plus the certificate, when the optimizer provides one.
struct Solved {
    result: SolveResult,
    duality_gap: Option<f64>,
}

impl Solved {
    fn record(&self, opts: &TrainOptions, provenance: &mut IndexMap<String, Value>) {
        provenance.insert("optimizer".into(), json!(opts.optimizer.to_string()));
        if let Some(gap) = self.duality_gap {
            provenance.insert("duality_gap".into(), json!(gap));
        }
    }
}

fn solve_adaptive(objective: &AdaptiveObjective<'_>, start: Vec<f64>, opts: &TrainOptions) -> Result<Solved> {
    match opts.optimizer {
        // The dual starting point maps to every weight at the anchor, which
        // is the prescribed start for both plain and adaptive training.
        Optimizer::Dual => dual::solve_adaptive(objective, &opts.dual).map(|d| Solved {
            result: d.result,
            duality_gap: Some(d.duality_gap),
        }),
        Optimizer::Lbfgs => minimize(|w, g| objective.evaluate(w, g), start, &opts.lbfgs).map(|result| Solved {
            result,
            duality_gap: None,
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum ModelWeights {
    Single(Vec<f64>),
    Hierarchical { tree: AdaptationTree, stack: WeightStack },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kind: Method,
    pub weights: ModelWeights,
    pub c: f64,
    pub k: usize,
    /// Feature dimension including the bias feature when appended.
    pub n: usize,
    pub bias_appended: bool,
    pub normalization: Option<Normalization>,
    /// Objective value at the returned weights.
    pub objective: f64,
    pub iterations: usize,
    pub status: Option<SolveStatus>,
    /// Free-form config echo: dataset ids, seeds, the adaptation delta.
    pub provenance: IndexMap<String, Value>,
}

impl TrainedModel {
    /// Weights used on `domain`: the single vector, or the leaf slice
    /// assigned to that domain.
    pub fn weights_for_domain(&self, domain: &str) -> Option<&[f64]> {
        match &self.weights {
            ModelWeights::Single(w) => Some(w),
            ModelWeights::Hierarchical { tree, stack } => tree.leaf_for_domain(domain).map(|i| stack.by_index(i)),
        }
    }

    /// Slice of a named tree node. Single-vector models have no nodes.
    pub fn node_weights(&self, node: &str) -> Option<&[f64]> {
        match &self.weights {
            ModelWeights::Single(_) => None,
            ModelWeights::Hierarchical { stack, .. } => stack.get(node),
        }
    }

    pub fn node_names(&self) -> Vec<String> {
        match &self.weights {
            ModelWeights::Single(_) => Vec::new(),
            ModelWeights::Hierarchical { tree, .. } => tree.node_names().map(String::from).collect(),
        }
    }

    pub fn tree(&self) -> Option<&AdaptationTree> {
        match &self.weights {
            ModelWeights::Single(_) => None,
            ModelWeights::Hierarchical { tree, .. } => Some(tree),
        }
    }

    pub fn single_weights(&self) -> Option<&[f64]> {
        match &self.weights {
            ModelWeights::Single(w) => Some(w),
            ModelWeights::Hierarchical { .. } => None,
        }
    }

    /// Uses this model (or one node of it) as the prior of a further adaptation.
    pub fn source_model(&self, node: Option<&str>) -> Result<SourceModel> {
        let w = match (node, &self.weights) {
            (None, ModelWeights::Single(w)) => w.clone(),
            (Some(name), ModelWeights::Hierarchical { stack, .. }) => stack
                .get(name)
                .ok_or_else(|| Error::Config(format!("model has no node `{name}`")))?
                .to_vec(),
            (None, ModelWeights::Hierarchical { tree, stack }) => stack.get(tree.name(0)).unwrap_or_default().to_vec(),
            (Some(_), ModelWeights::Single(_)) => {
                return Err(Error::Config("single-vector model has no named nodes".into()))
            }
        };
        SourceModel::new(w, self.n, self.k, self.bias_appended, self.normalization.clone())
    }

    /// Sets the preprocessing recorded with the model.
    pub fn with_preprocessing(mut self, bias_appended: bool, normalization: Option<Normalization>) -> Self {
        self.bias_appended = bias_appended;
        self.normalization = normalization;
        self
    }

    /// Relabels a plain SSVM as SRC, TAR or MIX.
    pub fn as_baseline(mut self, kind: Method) -> Result<Self> {
        if self.kind.is_adaptive() || kind.is_adaptive() {
            return Err(Error::Config(format!("cannot relabel {} as {kind}", self.kind)));
        }
        self.kind = kind;
        Ok(self)
    }
}

fn shape_of(data: &[&DomainDataset]) -> Result<(usize, usize)> {
    let first = data
        .first()
        .ok_or_else(|| Error::Degenerate("no training data".into()))?;
    if data.iter().all(|d| d.is_empty()) {
        return Err(Error::Degenerate("training data has no samples".into()));
    }
    for d in data {
        if d.n != first.n {
            return Err(Error::dim("dataset feature dimension", first.n, d.n));
        }
        if d.k != first.k {
            return Err(Error::dim("dataset category count", first.k, d.k));
        }
    }
    if first.k < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 categories, got {}",
            first.k
        )));
    }
    Ok((first.k, first.n))
}

fn dataset_ids(data: &[&DomainDataset]) -> Value {
    Value::from(data.iter().map(|d| d.domain_id.clone()).collect::<Vec<_>>())
}

fn check_c(c: f64) -> Result<()> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::Config(format!("C must be finite and non-negative, got {c}")));
    }
    Ok(())
}

fn single(
    kind: Method,
    c: f64,
    k: usize,
    n: usize,
    solved: Solved,
    opts: &TrainOptions,
    mut provenance: IndexMap<String, Value>,
) -> TrainedModel {
    solved.record(opts, &mut provenance);
    let result = solved.result;
    TrainedModel {
        kind,
        weights: ModelWeights::Single(result.point),
        c,
        k,
        n,
        bias_appended: false,
        normalization: None,
        objective: result.value,
        iterations: result.iterations,
        status: Some(result.status),
        provenance,
    }
}

/// Plain SSVM on the pooled data, from zero. The result is labeled SRC; use
/// [`TrainedModel::as_baseline`] for TAR or MIX.
pub fn train_ssvm(data: &[&DomainDataset], c: f64, opts: &TrainOptions) -> Result<TrainedModel> {
    check_c(c)?;
    let (k, n) = shape_of(data)?;
    let zero = vec![0.0; k * n];
    let objective = AdaptiveObjective::new(&zero, c, data)?;
    let solved = solve_adaptive(&objective, zero.clone(), opts)?;
    let provenance = IndexMap::from([("datasets".to_string(), dataset_ids(data))]);
    Ok(single(Method::Src, c, k, n, solved, opts, provenance))
}

/// Adapts `src` to the target data (one-to-one adaptation).
pub fn train_assvm(src: &SourceModel, target: &DomainDataset, c: f64, opts: &TrainOptions) -> Result<TrainedModel> {
    adapt(Method::Assvm, src, &[target], c, opts)
}

/// Adapts `src` to the union of all target datasets.
pub fn train_assvm_all(
    src: &SourceModel,
    targets: &[&DomainDataset],
    c: f64,
    opts: &TrainOptions,
) -> Result<TrainedModel> {
    adapt(Method::AssvmAll, src, targets, c, opts)
}

fn adapt(
    kind: Method,
    src: &SourceModel,
    data: &[&DomainDataset],
    c: f64,
    opts: &TrainOptions,
) -> Result<TrainedModel> {
    check_c(c)?;
    let (k, n) = shape_of(data)?;
    if (k, n) != (src.k, src.n) {
        return Err(Error::dim("source model K*n", src.k * src.n, k * n));
    }
    let objective = AdaptiveObjective::new(&src.weights, c, data)?;
    let solved = solve_adaptive(&objective, src.weights.clone(), opts)?;
    let delta: Vec<f64> = solved
        .result
        .point
        .iter()
        .zip(&src.weights)
        .map(|(a, b)| a - b)
        .collect();
    let delta_norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
    let provenance = IndexMap::from([
        ("datasets".to_string(), dataset_ids(data)),
        ("delta_w_norm".to_string(), json!(delta_norm)),
        ("delta_w".to_string(), json!(delta)),
    ]);
    Ok(
        single(kind, c, k, n, solved, opts, provenance)
            .with_preprocessing(src.bias_appended, src.normalization.clone()),
    )
}

/// Jointly adapts every node of `tree`, all nodes starting at the source
/// weights. Each leaf domain needs a dataset.
pub fn train_hassvm(
    src: &SourceModel,
    tree: &AdaptationTree,
    datasets: &[DomainDataset],
    c: f64,
    opts: &TrainOptions,
) -> Result<TrainedModel> {
    train_hassvm_weighted(src, tree, datasets, c, None, opts)
}

/// [`train_hassvm`] with an optional per-node loss multiplier (pre-order).
pub fn train_hassvm_weighted(
    src: &SourceModel,
    tree: &AdaptationTree,
    datasets: &[DomainDataset],
    c: f64,
    node_multipliers: Option<Vec<f64>>,
    opts: &TrainOptions,
) -> Result<TrainedModel> {
    check_c(c)?;
    let leaf_data: Vec<&DomainDataset> = tree
        .domains()
        .iter()
        .map(|d| {
            datasets
                .iter()
                .find(|ds| &ds.domain_id == d)
                .ok_or_else(|| Error::Config(format!("no dataset for leaf domain `{d}`")))
        })
        .collect::<Result<_>>()?;
    let (k, n) = shape_of(&leaf_data)?;
    if (k, n) != (src.k, src.n) {
        return Err(Error::dim("source model K*n", src.k * src.n, k * n));
    }
    let mut objective = HierarchicalObjective::new(tree, &src.weights, c, datasets)?;
    if let Some(m) = node_multipliers.clone() {
        objective = objective.with_node_multipliers(m)?;
    }
    let solved = match opts.optimizer {
        Optimizer::Dual => {
            let d = dual::solve_hierarchical(&objective, &opts.dual)?;
            Solved {
                result: d.result,
                duality_gap: Some(d.duality_gap),
            }
        }
        Optimizer::Lbfgs => {
            let start = WeightStack::uniform(tree, &src.weights).flatten();
            Solved {
                result: minimize(|w, g| objective.evaluate(w, g), start, &opts.lbfgs)?,
                duality_gap: None,
            }
        }
    };
    let result = &solved.result;
    let stack = WeightStack::unflatten(&result.point, tree, k, n)?;
    let mut provenance = IndexMap::from([
        ("datasets".to_string(), dataset_ids(&leaf_data)),
        ("tree".to_string(), json!(tree.to_string())),
    ]);
    if let Some(m) = node_multipliers {
        provenance.insert("node_multipliers".into(), json!(m));
    }
    solved.record(opts, &mut provenance);
    let result = solved.result;
    Ok(TrainedModel {
        kind: Method::Hassvm,
        weights: ModelWeights::Hierarchical {
            tree: tree.clone(),
            stack,
        },
        c,
        k,
        n,
        bias_appended: src.bias_appended,
        normalization: src.normalization.clone(),
        objective: result.value,
        iterations: result.iterations,
        status: Some(result.status),
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabeledSample;
    use crate::experiments::accuracy;
    use crate::objective::assvm_objective;
    use crate::tree::{tests::two_level, validate_tree, TreeSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Gaussian blobs around per-class means, bias appended.
    fn blobs(rng: &mut impl Rng, domain: &str, means: &[Vec<f64>], per_class: usize, sigma: f64) -> DomainDataset {
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut samples = Vec::new();
        for (c, mean) in means.iter().enumerate() {
            for _ in 0..per_class {
                let mut f: Vec<f64> = mean.iter().map(|m| m + noise.sample(rng)).collect();
                f.push(1.0);
                samples.push(LabeledSample::new(domain, c + 1, f));
            }
        }
        let n = means[0].len() + 1;
        DomainDataset::new(domain, samples, n, means.len()).unwrap()
    }

    fn means(rng: &mut impl Rng, k: usize, n: usize, scale: f64) -> Vec<Vec<f64>> {
        let d = Normal::new(0.0, scale).unwrap();
        (0..k).map(|_| (0..n).map(|_| d.sample(rng)).collect()).collect()
    }

    fn shifted(means: &[Vec<f64>], by: &[f64]) -> Vec<Vec<f64>> {
        means
            .iter()
            .map(|m| m.iter().zip(by).map(|(a, b)| a + b).collect())
            .collect()
    }

    fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!(matches!("SVM".parse::<Method>(), Err(Error::Config(_))));
    }

    #[test]
    fn ssvm_with_zero_c_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ms = means(&mut rng, 3, 2, 2.0);
        let d = blobs(&mut rng, "s", &ms, 5, 0.5);
        let m = train_ssvm(&[&d], 0.0, &TrainOptions::default()).unwrap();
        assert!(m.single_weights().unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn ssvm_fits_separable_data() {
        let ms = vec![vec![-3.0, 0.0], vec![3.0, 0.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = blobs(&mut rng, "s", &ms, 20, 0.5);
        let m = train_ssvm(&[&d], 100.0, &TrainOptions::default()).unwrap();
        assert_eq!(accuracy(m.single_weights().unwrap(), &d.samples).unwrap(), 1.0);
    }

    #[test]
    fn ssvm_rejects_empty_and_single_class_data() {
        let empty = DomainDataset::new("e", vec![], 2, 2).unwrap();
        assert!(matches!(
            train_ssvm(&[&empty], 1.0, &TrainOptions::default()),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            train_ssvm(&[], 1.0, &TrainOptions::default()),
            Err(Error::Degenerate(_))
        ));
        let one = DomainDataset::new("o", vec![LabeledSample::new("o", 1, vec![1.0])], 1, 1).unwrap();
        assert!(matches!(
            train_ssvm(&[&one], 1.0, &TrainOptions::default()),
            Err(Error::Degenerate(_))
        ));
    }

    /// Long-run projected subgradient descent on the SSVM objective, kept
    /// independent of the solver.
    fn subgradient_oracle(d: &DomainDataset, c: f64, steps: usize) -> f64 {
        let len = d.k * d.n;
        let mut w = vec![0.0; len];
        let mut best = f64::INFINITY;
        for t in 0..steps {
            let mut g = w.clone();
            let mut v = 0.5 * w.iter().map(|x| x * x).sum::<f64>();
            for s in &d.samples {
                let sc: Vec<f64> = (0..d.k)
                    .map(|y| (0..d.n).map(|i| w[y * d.n + i] * s.features[i]).sum::<f64>())
                    .collect();
                let truth = s.label - 1;
                let (mut yb, mut vb) = (0, f64::NEG_INFINITY);
                for (y, &score) in sc.iter().enumerate() {
                    let a = score + if y == truth { 0.0 } else { 1.0 };
                    if a > vb {
                        vb = a;
                        yb = y;
                    }
                }
                v += c * (vb - sc[truth]);
                if yb != truth {
                    for i in 0..d.n {
                        g[yb * d.n + i] += c * s.features[i];
                        g[truth * d.n + i] -= c * s.features[i];
                    }
                }
            }
            best = best.min(v);
            let eta = 1.0 / (t as f64 + 2.0);
            for i in 0..len {
                // Projection onto the ball that must contain the optimum.
                w[i] -= eta * g[i];
            }
            let radius = (2.0 * c * d.len() as f64).sqrt();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > radius {
                w.iter_mut().for_each(|x| *x *= radius / norm);
            }
        }
        best
    }

    #[test]
    fn ssvm_reaches_subgradient_oracle_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ms = means(&mut rng, 3, 2, 1.0);
        let d = blobs(&mut rng, "s", &ms, 4, 1.0);
        let m = train_ssvm(&[&d], 1.0, &TrainOptions::default()).unwrap();
        let oracle = subgradient_oracle(&d, 1.0, 1_000_000);
        assert!(
            m.objective <= oracle * (1.0 + 1e-3),
            "solver {} vs oracle {oracle} {:?} {}",
            m.objective,
            m.status,
            m.iterations
        );
    }

    #[test]
    fn reported_objective_matches_re_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ms = means(&mut rng, 4, 3, 1.0);
        let s = blobs(&mut rng, "s", &ms, 10, 1.0);
        let t = blobs(&mut rng, "t", &shifted(&ms, &[1.0, -1.0, 0.5]), 3, 1.0);
        let src_model = train_ssvm(&[&s], 1.0, &TrainOptions::default()).unwrap();
        let w = src_model.single_weights().unwrap();
        let (v, _) = assvm_objective(w, &vec![0.0; w.len()], 1.0, &[&s]).unwrap();
        assert!((v - src_model.objective).abs() <= 1e-12 * v.abs());

        let src = src_model.source_model(None).unwrap();
        let adapted = train_assvm(&src, &t, 2.0, &TrainOptions::default()).unwrap();
        let (v, _) = assvm_objective(adapted.single_weights().unwrap(), &src.weights, 2.0, &[&t]).unwrap();
        assert!((v - adapted.objective).abs() <= 1e-12 * v.abs());
    }

    #[test]
    fn adaptive_trainers_with_zero_c_keep_the_source() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ms = means(&mut rng, 3, 2, 1.0);
        let data: Vec<_> = ["d1", "d2", "d3"]
            .iter()
            .map(|d| blobs(&mut rng, d, &ms, 3, 1.0))
            .collect();
        let ws: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let src = SourceModel::new(ws.clone(), 3, 3, true, None).unwrap();
        let opts = TrainOptions::default();
        let a = train_assvm(&src, &data[0], 0.0, &opts).unwrap();
        assert!(inf_dist(a.single_weights().unwrap(), &ws) <= 1e-8);
        let all = train_assvm_all(&src, &data.iter().collect::<Vec<_>>(), 0.0, &opts).unwrap();
        assert!(inf_dist(all.single_weights().unwrap(), &ws) <= 1e-8);
        let tree = validate_tree(&two_level()).unwrap();
        let h = train_hassvm(&src, &tree, &data, 0.0, &opts).unwrap();
        for node in h.node_names() {
            assert!(inf_dist(h.node_weights(&node).unwrap(), &ws) <= 1e-8);
        }
    }

    #[test]
    fn assvm_from_zero_source_is_ssvm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ms = means(&mut rng, 3, 2, 1.0);
        let d = blobs(&mut rng, "t", &ms, 6, 1.0);
        let opts = TrainOptions::default();
        let plain = train_ssvm(&[&d], 1.5, &opts).unwrap();
        let adapted = train_assvm(&SourceModel::zero(d.n, d.k), &d, 1.5, &opts).unwrap();
        assert!(inf_dist(plain.single_weights().unwrap(), adapted.single_weights().unwrap()) <= 1e-6);
    }

    #[test]
    fn pooled_adaptation_definitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ms = means(&mut rng, 3, 2, 1.0);
        let s = blobs(&mut rng, "s", &ms, 8, 1.0);
        let t = blobs(&mut rng, "t", &shifted(&ms, &[1.0, 1.0]), 3, 1.0);
        let src = train_ssvm(&[&s], 1.0, &TrainOptions::default())
            .unwrap()
            .source_model(None)
            .unwrap();
        let opts = TrainOptions::default();
        let one = train_assvm(&src, &t, 1.0, &opts).unwrap();
        let all = train_assvm_all(&src, &[&t], 1.0, &opts).unwrap();
        assert_eq!(one.single_weights(), all.single_weights());
        assert_eq!(all.kind, Method::AssvmAll);

        // Passing a dataset twice doubles its weight in the objective.
        let w = one.single_weights().unwrap();
        let (twice, _) = assvm_objective(w, &src.weights, 1.0, &[&t, &t]).unwrap();
        let (doubled, _) = assvm_objective(w, &src.weights, 2.0, &[&t]).unwrap();
        assert!((twice - doubled).abs() <= 1e-12 * twice.abs());
        let dup = train_assvm_all(&src, &[&t, &t], 1.0, &opts).unwrap();
        let dbl = train_assvm(&src, &t, 2.0, &opts).unwrap();
        assert!((dup.objective - dbl.objective).abs() <= 1e-6 * dbl.objective.abs());

        let u = blobs(&mut rng, "u", &shifted(&ms, &[-1.0, 0.0]), 3, 1.0);
        let v = blobs(&mut rng, "v", &shifted(&ms, &[0.0, -1.0]), 3, 1.0);
        let pooled = train_assvm_all(&src, &[&t, &u, &v], 1.0, &opts).unwrap();
        assert_eq!(pooled.single_weights().unwrap().len(), 9);
    }

    #[test]
    fn single_node_tree_matches_assvm() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ms = means(&mut rng, 3, 2, 1.0);
        let s = blobs(&mut rng, "s", &ms, 8, 1.0);
        let t = blobs(&mut rng, "t", &shifted(&ms, &[1.0, -0.5]), 4, 1.0);
        let opts = TrainOptions::default();
        let src = train_ssvm(&[&s], 1.0, &opts).unwrap().source_model(None).unwrap();
        let tree = validate_tree(&TreeSpec::leaf("T", "t")).unwrap();
        let h = train_hassvm(&src, &tree, std::slice::from_ref(&t), 1.0, &opts).unwrap();
        let a = train_assvm(&src, &t, 1.0, &opts).unwrap();
        assert!(inf_dist(h.node_weights("T").unwrap(), a.single_weights().unwrap()) <= 1e-6);
        assert_eq!(h.weights_for_domain("t"), a.single_weights());
    }

    #[test]
    fn hassvm_requires_every_leaf_dataset() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ms = means(&mut rng, 2, 2, 1.0);
        let d1 = blobs(&mut rng, "d1", &ms, 3, 1.0);
        let tree = validate_tree(&two_level()).unwrap();
        let src = SourceModel::zero(3, 2);
        assert!(matches!(
            train_hassvm(&src, &tree, &[d1], 1.0, &TrainOptions::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn warm_and_cold_starts_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ms = means(&mut rng, 3, 2, 1.0);
        let s = blobs(&mut rng, "s", &ms, 8, 1.0);
        let t = blobs(&mut rng, "t", &shifted(&ms, &[1.0, -0.5]), 5, 1.0);
        let opts = TrainOptions::default();
        let src = train_ssvm(&[&s], 1.0, &opts).unwrap().source_model(None).unwrap();
        let warm = train_assvm(&src, &t, 1.0, &opts).unwrap();
        // A dual start far from the anchor.
        let elsewhere = TrainOptions {
            dual: DualOptions {
                start: dual::DualStart::Uniform,
                seed: 7,
                ..DualOptions::default()
            },
            ..TrainOptions::default()
        };
        let other = train_assvm(&src, &t, 1.0, &elsewhere).unwrap();
        assert!((warm.objective - other.objective).abs() <= 1e-6 * warm.objective.abs());
        // Primal LBFGS from zero never goes below the certified optimum.
        let objective = AdaptiveObjective::new(&src.weights, 1.0, &[&t]).unwrap();
        let cold = minimize(
            |w, g| objective.evaluate(w, g),
            vec![0.0; src.weights.len()],
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(
            cold.value >= warm.objective * (1.0 - 1e-9),
            "{} vs {}",
            cold.value,
            warm.objective
        );
    }

    #[test]
    fn both_optimizers_train() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ms = means(&mut rng, 3, 2, 2.0);
        let s = blobs(&mut rng, "s", &ms, 8, 1.0);
        let d = train_ssvm(&[&s], 1.0, &TrainOptions::default()).unwrap();
        let l = train_ssvm(&[&s], 1.0, &TrainOptions::lbfgs(SolveOptions::default())).unwrap();
        assert_eq!(d.provenance["optimizer"], json!("dual"));
        assert_eq!(l.provenance["optimizer"], json!("lbfgs"));
        assert!(d.provenance["duality_gap"].as_f64().unwrap() <= 1e-9 * d.objective.max(1.0));
        assert!(l.objective >= d.objective * (1.0 - 1e-9));
        assert!(l.objective <= d.objective * 1.05);
    }

    #[test]
    fn large_c_fits_separable_leaves() {
        let ms = vec![vec![-3.0, 0.0], vec![3.0, 0.0], vec![0.0, 3.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let data: Vec<_> = ["d1", "d2", "d3"]
            .iter()
            .enumerate()
            .map(|(i, d)| blobs(&mut rng, d, &shifted(&ms, &[i as f64, -(i as f64)]), 5, 0.3))
            .collect();
        let src = SourceModel::zero(3, 3);
        let tree = validate_tree(&two_level()).unwrap();
        let h = train_hassvm(&src, &tree, &data, 1000.0, &TrainOptions::default()).unwrap();
        for d in &data {
            let w = h.weights_for_domain(&d.domain_id).unwrap();
            assert_eq!(accuracy(w, &d.samples).unwrap(), 1.0);
        }
    }
}
