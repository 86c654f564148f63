//! Structured hinge loss and the adaptive / hierarchical adaptive objectives.
//!
//! With the 0-1 output loss the structured hinge of one sample is
//! `max_y [w.phi(x, y) + [y != y_i]] - w.phi(x, y_i)`, and its subgradient
//! at the maximizing `y_hat` is `phi(x, y_hat) - phi(x, y_i)`. Loss terms are
//! sums over samples, not means.
//!
//! The hierarchical objective over an adaptation tree is
//!
//! ```text
//! J(w) = sum over nodes v of  1/2 |w_v - anchor(v)|^2 + C * sum_{l under v} L(w_v; D_l)
//! ```
//!
//! where `anchor(root)` is the source weight vector and `anchor(v)` is the
//! parent's weights otherwise.

use indexmap::IndexMap;

use crate::data::{DomainDataset, LabeledSample};
use crate::dual::DualProblem;
use crate::error::{Error, Result};
use crate::feature::{check_category, slot_score};
use crate::tree::{AdaptationTree, WeightStack};

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub value: f64,
    pub subgradient: Vec<f64>,
    /// Samples whose hinge term is strictly positive.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveReport {
    pub value: f64,
    /// Flat gradient in the stack's pre-order layout.
    pub gradient: Vec<f64>,
    /// Hinge loss at each node, including its per-node multiplier but not `C`.
    pub per_node_loss: IndexMap<String, f64>,
    pub per_node_reg: IndexMap<String, f64>,
}

/// Most violating category under the 0-1 augmented score, with that score.
/// Ties resolve to the lowest category.
pub fn loss_augmented_argmax(w: &[f64], sample: &LabeledSample, k: usize) -> Result<(usize, f64)> {
    check_sample(w, sample, k)?;
    let (slot, value) = augmented_argmax(w, &sample.features, sample.label - 1, k);
    Ok((slot + 1, value))
}

/// Structured hinge summed over every sample of every dataset.
pub fn structured_hinge(w: &[f64], data: &[&DomainDataset]) -> Result<LossReport> {
    let Some(first) = data.first() else {
        return Ok(LossReport {
            value: 0.0,
            subgradient: vec![0.0; w.len()],
            violations: 0,
        });
    };
    let k = first.k;
    let samples = collect_samples(w, k, data)?;
    let mut subgradient = vec![0.0; w.len()];
    let (value, violations) = hinge_into(w, &samples, k, &mut subgradient);
    Ok(LossReport {
        value,
        subgradient,
        violations,
    })
}

/// `1/2 |w - w_src|^2 + C * hinge(w)` and its subgradient. With `w_src = 0`
/// this is the plain SSVM objective.
pub fn assvm_objective(w: &[f64], w_src: &[f64], c: f64, data: &[&DomainDataset]) -> Result<(f64, Vec<f64>)> {
    if w.len() != w_src.len() {
        return Err(Error::dim("source weights", w.len(), w_src.len()));
    }
    let k = data.first().map_or(1, |d| d.k);
    let samples = collect_samples(w, k, data)?;
    let objective = AdaptiveObjective {
        source: w_src,
        c,
        k,
        samples,
    };
    let mut grad = vec![0.0; w.len()];
    let value = objective.evaluate(w, &mut grad);
    Ok((value, grad))
}

/// Evaluates the hierarchical objective at `stack`.
pub fn hassvm_objective(
    stack: &WeightStack,
    tree: &AdaptationTree,
    w_src: &[f64],
    c: f64,
    datasets: &[DomainDataset],
) -> Result<ObjectiveReport> {
    let objective = HierarchicalObjective::new(tree, w_src, c, datasets)?;
    if stack.node_count() != tree.node_count() || stack.node_order().ne(tree.node_names()) {
        return Err(Error::Config("weight stack does not match the tree's nodes".into()));
    }
    let flat = stack.flatten();
    if flat.len() != objective.dim() {
        return Err(Error::dim("weight stack", objective.dim(), flat.len()));
    }
    Ok(objective.report(&flat))
}

/// Single-vector adaptive objective bound to its data; the solver's view of
/// A-SSVM (and of plain SSVM with a zero anchor).
#[derive(Debug, Clone)]
pub struct AdaptiveObjective<'a> {
    source: &'a [f64],
    c: f64,
    k: usize,
    samples: Vec<&'a LabeledSample>,
}

impl<'a> AdaptiveObjective<'a> {
    pub fn new(source: &'a [f64], c: f64, data: &[&'a DomainDataset]) -> Result<Self> {
        let k = data
            .first()
            .map(|d| d.k)
            .ok_or_else(|| Error::Degenerate("no training data".into()))?;
        let samples = collect_samples(source, k, data)?;
        Ok(Self { source, c, k, samples })
    }

    pub fn dim(&self) -> usize {
        self.source.len()
    }

    /// Writes the subgradient into `grad` and returns the value.
    pub fn evaluate(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let reg = anchor_term(w, self.source, grad);
        let loss = add_scaled_hinge(w, &self.samples, self.k, self.c, grad);
        reg + self.c * loss
    }

    pub(crate) fn dual_problem(&self) -> DualProblem<'a> {
        DualProblem {
            parents: vec![None],
            source: self.source,
            k: self.k,
            node_samples: vec![self.samples.clone()],
            budgets: vec![self.c],
        }
    }
}

/// The hierarchical objective bound to a tree, source weights and data.
#[derive(Debug, Clone)]
pub struct HierarchicalObjective<'a> {
    tree: &'a AdaptationTree,
    source: &'a [f64],
    c: f64,
    k: usize,
    /// Samples of every leaf under each node, pre-order.
    node_samples: Vec<Vec<&'a LabeledSample>>,
    node_multiplier: Vec<f64>,
}

impl<'a> HierarchicalObjective<'a> {
    /// Every leaf domain needs a dataset, and every dataset needs a leaf.
    pub fn new(tree: &'a AdaptationTree, source: &'a [f64], c: f64, datasets: &'a [DomainDataset]) -> Result<Self> {
        for d in datasets {
            if tree.leaf_for_domain(&d.domain_id).is_none() {
                return Err(Error::Config(format!(
                    "dataset for domain `{}` has no leaf in the tree",
                    d.domain_id
                )));
            }
        }
        let by_domain = |domain: &str| -> Result<&'a DomainDataset> {
            datasets
                .iter()
                .find(|d| d.domain_id == domain)
                .ok_or_else(|| Error::Config(format!("no dataset for leaf domain `{domain}`")))
        };
        let mut k = None;
        let mut node_samples = Vec::with_capacity(tree.node_count());
        for node in 0..tree.node_count() {
            let parts = tree
                .leaf_domains(node)
                .iter()
                .map(|d| by_domain(d))
                .collect::<Result<Vec<_>>>()?;
            let kk = *k.get_or_insert(parts[0].k);
            node_samples.push(collect_samples(source, kk, &parts)?);
        }
        Ok(Self {
            tree,
            source,
            c,
            k: k.unwrap_or(1),
            node_samples,
            node_multiplier: vec![1.0; tree.node_count()],
        })
    }

    /// Scales each node's loss term by a multiplier (pre-order, default 1).
    pub fn with_node_multipliers(mut self, multipliers: Vec<f64>) -> Result<Self> {
        if multipliers.len() != self.tree.node_count() {
            return Err(Error::dim(
                "node multipliers",
                self.tree.node_count(),
                multipliers.len(),
            ));
        }
        if multipliers.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::Config("node multipliers must be finite and non-negative".into()));
        }
        self.node_multiplier = multipliers;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.tree.node_count() * self.source.len()
    }

    pub fn tree(&self) -> &AdaptationTree {
        self.tree
    }

    pub(crate) fn dual_problem(&self) -> DualProblem<'a> {
        DualProblem {
            parents: (0..self.tree.node_count()).map(|n| self.tree.parent(n)).collect(),
            source: self.source,
            k: self.k,
            node_samples: self.node_samples.clone(),
            budgets: self.node_multiplier.iter().map(|m| self.c * m).collect(),
        }
    }

    pub fn evaluate(&self, flat: &[f64], grad: &mut [f64]) -> f64 {
        self.run(flat, grad, None)
    }

    pub fn report(&self, flat: &[f64]) -> ObjectiveReport {
        let mut gradient = vec![0.0; flat.len()];
        let mut terms = Vec::with_capacity(self.tree.node_count());
        let value = self.run(flat, &mut gradient, Some(&mut terms));
        let mut per_node_loss = IndexMap::new();
        let mut per_node_reg = IndexMap::new();
        for (node, (reg, loss)) in terms.into_iter().enumerate() {
            let name = self.tree.name(node).to_string();
            per_node_reg.insert(name.clone(), reg);
            per_node_loss.insert(name, loss);
        }
        ObjectiveReport {
            value,
            gradient,
            per_node_loss,
            per_node_reg,
        }
    }

    fn run(&self, flat: &[f64], grad: &mut [f64], mut terms: Option<&mut Vec<(f64, f64)>>) -> f64 {
        let len = self.source.len();
        grad.fill(0.0);
        let mut reg_total = 0.0;
        let mut loss_total = 0.0;
        let mut diff = vec![0.0; len];
        for node in 0..self.tree.node_count() {
            let w = &flat[node * len..(node + 1) * len];
            let anchor = match self.tree.parent(node) {
                Some(p) => &flat[p * len..(p + 1) * len],
                None => self.source,
            };
            let reg = anchor_term(w, anchor, &mut diff);
            {
                let g = &mut grad[node * len..(node + 1) * len];
                for (gi, di) in g.iter_mut().zip(&diff) {
                    *gi += di;
                }
            }
            if let Some(p) = self.tree.parent(node) {
                let g = &mut grad[p * len..(p + 1) * len];
                for (gi, di) in g.iter_mut().zip(&diff) {
                    *gi -= di;
                }
            }
            let m = self.node_multiplier[node];
            let g = &mut grad[node * len..(node + 1) * len];
            let loss = m * add_scaled_hinge(w, &self.node_samples[node], self.k, self.c * m, g);
            reg_total += reg;
            loss_total += loss;
            if let Some(t) = terms.as_deref_mut() {
                t.push((reg, loss));
            }
        }
        reg_total + self.c * loss_total
    }
}

/// Writes `w - anchor` into `out` and returns half its squared norm.
fn anchor_term(w: &[f64], anchor: &[f64], out: &mut [f64]) -> f64 {
    let mut sq = 0.0;
    for ((o, a), b) in out.iter_mut().zip(w).zip(anchor) {
        let d = a - b;
        *o = d;
        sq += d * d;
    }
    0.5 * sq
}

/// Adds `scale * subgradient` of the hinge to `grad`; returns the hinge value.
fn add_scaled_hinge(w: &[f64], samples: &[&LabeledSample], k: usize, scale: f64, grad: &mut [f64]) -> f64 {
    let mut sub = vec![0.0; w.len()];
    let (value, _) = hinge_into(w, samples, k, &mut sub);
    for (g, s) in grad.iter_mut().zip(&sub) {
        *g += scale * s;
    }
    value
}

/// Accumulates the hinge subgradient into `sub` (which must start at zero).
fn hinge_into(w: &[f64], samples: &[&LabeledSample], k: usize, sub: &mut [f64]) -> (f64, usize) {
    let mut value = 0.0;
    let mut violations = 0;
    for s in samples {
        let x = &s.features;
        let n = x.len();
        let truth = s.label - 1;
        let (best, aug) = augmented_argmax(w, x, truth, k);
        let margin = aug - slot_score(w, x, truth);
        value += margin;
        if best != truth {
            violations += usize::from(margin > 0.0);
            for (g, xi) in sub[best * n..(best + 1) * n].iter_mut().zip(x) {
                *g += xi;
            }
            for (g, xi) in sub[truth * n..(truth + 1) * n].iter_mut().zip(x) {
                *g -= xi;
            }
        }
    }
    (value, violations)
}

#[inline]
fn augmented_argmax(w: &[f64], x: &[f64], truth: usize, k: usize) -> (usize, f64) {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for slot in 0..k {
        let v = slot_score(w, x, slot) + if slot == truth { 0.0 } else { 1.0 };
        if v > best_value {
            best = slot;
            best_value = v;
        }
    }
    (best, best_value)
}

fn check_sample(w: &[f64], s: &LabeledSample, k: usize) -> Result<()> {
    if k == 0 || w.len() != k * s.features.len() {
        return Err(Error::dim("weight vector", k * s.features.len(), w.len()));
    }
    check_category(s.label, k)
}

fn collect_samples<'a>(w: &[f64], k: usize, data: &[&'a DomainDataset]) -> Result<Vec<&'a LabeledSample>> {
    let mut out = Vec::with_capacity(data.iter().map(|d| d.len()).sum());
    for d in data {
        if d.k != k {
            return Err(Error::dim("dataset category count", k, d.k));
        }
        if w.len() != d.k * d.n {
            return Err(Error::dim("weight vector", d.k * d.n, w.len()));
        }
        for s in &d.samples {
            check_sample(w, s, k)?;
            out.push(s);
        }
    }
    Ok(out)
}
