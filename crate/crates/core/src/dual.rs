//! Dual coordinate ascent for the anchored hinge objectives.
//!
//! Both training objectives are a positive definite quadratic in the stacked
//! weights plus, for every (node, sample) pair, a scaled max over categories
//! of affine functions. Each such pair owns one block of dual variables on a
//! scaled simplex. Sweeping the blocks and solving each block subproblem
//! exactly raises the dual monotonically, and the primal/dual gap gives a
//! stopping test that certifies distance to the optimum.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::feature::slot_score;
use crate::objective::{AdaptiveObjective, HierarchicalObjective};
use crate::solver::{SolveResult, SolveStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct DualOptions {
    /// Full sweeps over all blocks.
    pub max_epochs: usize,
    /// Stop when `primal - dual <= gap_tolerance * max(1, |primal|)`.
    pub gap_tolerance: f64,
    pub start: DualStart,
    /// Seeds the per-epoch block order.
    pub seed: u64,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            max_epochs: 20_000,
            gap_tolerance: 1e-9,
            start: DualStart::Zero,
            seed: 0,
        }
    }
}

impl DualOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::Config("dual solver needs at least one epoch".into()));
        }
        if !(self.gap_tolerance >= 0.0) {
            return Err(Error::Config("duality gap tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

/// Initial dual point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DualStart {
    /// All dual mass on the true label: every node starts at the anchor.
    #[default]
    Zero,
    /// Mass spread evenly over the wrong labels.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolve {
    pub result: SolveResult,
    pub dual_value: f64,
    pub duality_gap: f64,
}

/// Node structure and data of one problem, in pre-order.
#[derive(Debug, Clone)]
pub(crate) struct DualProblem<'a> {
    pub parents: Vec<Option<usize>>,
    pub source: &'a [f64],
    pub k: usize,
    pub node_samples: Vec<Vec<&'a LabeledSample>>,
    /// Loss weight of each node (C times the node multiplier).
    pub budgets: Vec<f64>,
}

struct Block<'a> {
    node: usize,
    sample: &'a LabeledSample,
    budget: f64,
    sq_norm: f64,
}

pub fn solve_adaptive(objective: &AdaptiveObjective<'_>, opts: &DualOptions) -> Result<DualSolve> {
    let problem = objective.dual_problem();
    solve(&problem, |w, g| objective.evaluate(w, g), opts)
}

pub fn solve_hierarchical(objective: &HierarchicalObjective<'_>, opts: &DualOptions) -> Result<DualSolve> {
    let problem = objective.dual_problem();
    solve(&problem, |w, g| objective.evaluate(w, g), opts)
}

fn solve<F>(problem: &DualProblem<'_>, mut evaluate: F, opts: &DualOptions) -> Result<DualSolve>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    opts.validate()?;
    let nodes = problem.parents.len();
    let len = problem.source.len();
    let k = problem.k;
    let inverse = invert(&coupling(&problem.parents))
        .ok_or_else(|| Error::Degenerate("node coupling matrix is singular".into()))?;

    let blocks: Vec<Block> = problem
        .node_samples
        .iter()
        .enumerate()
        .flat_map(|(node, samples)| {
            samples.iter().map(move |s| Block {
                node,
                sample: s,
                budget: problem.budgets[node],
                sq_norm: s.features.iter().map(|v| v * v).sum(),
            })
        })
        .filter(|b| b.budget > 0.0)
        .collect();

    // alpha[b][y] for y != truth; the truth entry stays 0.
    let mut alpha = vec![vec![0.0; k]; blocks.len()];
    // v[node] = sum of alpha-weighted feature differences at that node.
    let mut v = vec![0.0; nodes * len];
    let mut w: Vec<f64> = (0..nodes).flat_map(|_| problem.source.iter().copied()).collect();
    if opts.start == DualStart::Uniform && k > 1 {
        for (b, a) in blocks.iter().zip(alpha.iter_mut()) {
            let share = b.budget / (k - 1) as f64;
            let delta: Vec<f64> = (0..k)
                .map(|y| if y + 1 == b.sample.label { 0.0 } else { share })
                .collect();
            apply(b, &delta, &inverse, nodes, len, &mut v, &mut w);
            a.copy_from_slice(&delta);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..blocks.len()).collect();
    let mut scores = vec![0.0; k];
    let mut delta = vec![0.0; k];
    let mut epochs = 0;
    let mut evaluations = 0;
    let (mut primal, mut dual) = values(problem, &blocks, &alpha, &v, &w);
    let status = loop {
        if primal - dual <= opts.gap_tolerance * primal.abs().max(1.0) {
            break SolveStatus::ConvergedGap;
        }
        if epochs >= opts.max_epochs {
            break SolveStatus::MaxIterations;
        }
        order.shuffle(&mut rng);
        for &i in &order {
            let b = &blocks[i];
            let truth = b.sample.label - 1;
            let wn = &w[b.node * len..(b.node + 1) * len];
            for (y, s) in scores.iter_mut().enumerate() {
                *s = slot_score(wn, &b.sample.features, y);
            }
            let lambda = inverse[b.node * nodes + b.node] * b.sq_norm;
            let updated = block_update(&alpha[i], &scores, truth, lambda, b.budget);
            let mut moved = false;
            for y in 0..k {
                delta[y] = updated[y] - alpha[i][y];
                moved |= delta[y] != 0.0;
            }
            if moved {
                apply(b, &delta, &inverse, nodes, len, &mut v, &mut w);
                alpha[i] = updated;
            }
        }
        epochs += 1;
        evaluations += 1;
        (primal, dual) = values(problem, &blocks, &alpha, &v, &w);
    };

    let mut gradient = vec![0.0; w.len()];
    let value = evaluate(&w, &mut gradient);
    let gradient_norm = gradient.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    Ok(DualSolve {
        duality_gap: (primal - dual).max(0.0),
        dual_value: dual,
        result: SolveResult {
            point: w,
            value,
            gradient_norm,
            iterations: epochs,
            evaluations: evaluations + 1,
            status,
        },
    })
}

/// Moves block `b` by `delta` and propagates the change to `v` and `w`.
fn apply(b: &Block<'_>, delta: &[f64], inverse: &[f64], nodes: usize, len: usize, v: &mut [f64], w: &mut [f64]) {
    let x = &b.sample.features;
    let n = x.len();
    let truth = b.sample.label - 1;
    let total: f64 = delta.iter().sum();
    let mut change = vec![0.0; len];
    for (y, d) in delta.iter().enumerate() {
        let d = if y == truth { -total } else { *d };
        if d != 0.0 {
            for (c, xi) in change[y * n..(y + 1) * n].iter_mut().zip(x) {
                *c += d * xi;
            }
        }
    }
    for (vi, c) in v[b.node * len..(b.node + 1) * len].iter_mut().zip(&change) {
        *vi += c;
    }
    for m in 0..nodes {
        let g = inverse[m * nodes + b.node];
        if g != 0.0 {
            for (wi, c) in w[m * len..(m + 1) * len].iter_mut().zip(&change) {
                *wi -= g * c;
            }
        }
    }
}

/// Primal and dual objective values at the current state.
fn values(problem: &DualProblem<'_>, blocks: &[Block<'_>], alpha: &[Vec<f64>], v: &[f64], w: &[f64]) -> (f64, f64) {
    let len = problem.source.len();
    let mut reg = 0.0;
    for (node, parent) in problem.parents.iter().enumerate() {
        let anchor = match parent {
            Some(p) => &w[p * len..(p + 1) * len],
            None => problem.source,
        };
        reg += 0.5
            * w[node * len..(node + 1) * len]
                .iter()
                .zip(anchor)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
    }
    let mut loss = 0.0;
    let mut linear = 0.0;
    for (b, a) in blocks.iter().zip(alpha) {
        let x = &b.sample.features;
        let truth = b.sample.label - 1;
        let wn = &w[b.node * len..(b.node + 1) * len];
        let own = slot_score(wn, x, truth);
        let mut worst = 0.0_f64;
        for y in (0..problem.k).filter(|&y| y != truth) {
            worst = worst.max(1.0 + slot_score(wn, x, y) - own);
            linear += a[y];
        }
        loss += b.budget * worst;
    }
    let coupling: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
    (reg + loss, reg + linear + coupling)
}

/// Exact maximizer of the dual restricted to one block.
///
/// With `u` the wrong-label entries, the block dual is
/// `g'(u - u0) - lambda/2 (|u - u0|^2 + (1'(u - u0))^2)` over `u >= 0`,
/// `1'u <= budget`, where `g_y = 1 + score_y - score_truth`.
fn block_update(current: &[f64], scores: &[f64], truth: usize, lambda: f64, budget: f64) -> Vec<f64> {
    let k = scores.len();
    let mut out = vec![0.0; k];
    let wrong = (0..k).filter(|&y| y != truth);
    if !(lambda > 0.0) {
        // Zero features: the block does not move the weights, and every wrong
        // label has the same unit margin.
        if let Some(y) = wrong.clone().next() {
            out[y] = budget;
        }
        return out;
    }
    let u0: f64 = wrong.clone().map(|y| current[y]).sum();
    let mut a: Vec<(f64, usize)> = wrong
        .map(|y| (1.0 + scores[y] - scores[truth] + lambda * current[y], y))
        .collect();
    a.sort_by(|p, q| q.0.total_cmp(&p.0));

    // Unconstrained by the budget: theta + lambda*u0 = sum_y max(0, a_y - theta).
    let mut theta = -lambda * u0;
    let mut sum = 0.0;
    for (j, &(ay, _)) in a.iter().enumerate() {
        if ay <= theta {
            break;
        }
        sum += ay;
        theta = (sum - lambda * u0) / (j + 2) as f64;
    }
    let mass: f64 = a.iter().map(|(ay, _)| (ay - theta).max(0.0)).sum::<f64>() / lambda;
    if mass > budget {
        // Budget binds: sum_y max(0, a_y - theta) = lambda * budget.
        let mut sum = 0.0;
        for j in 0..a.len() {
            sum += a[j].0;
            let t = (sum - lambda * budget) / (j + 1) as f64;
            if j + 1 == a.len() || a[j + 1].0 <= t {
                theta = t;
                break;
            }
        }
    }
    for (ay, y) in a {
        out[y] = ((ay - theta) / lambda).max(0.0);
    }
    out
}

/// Hessian of the regularizer over nodes (the per-coordinate block).
fn coupling(parents: &[Option<usize>]) -> Vec<f64> {
    let n = parents.len();
    let mut m = vec![0.0; n * n];
    for (node, parent) in parents.iter().enumerate() {
        m[node * n + node] += 1.0;
        if let Some(p) = *parent {
            m[p * n + p] += 1.0;
            m[node * n + p] -= 1.0;
            m[p * n + node] -= 1.0;
        }
    }
    m
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(matrix: &[f64]) -> Option<Vec<f64>> {
    let n = (matrix.len() as f64).sqrt() as usize;
    let mut a = matrix.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&p, &q| a[p * n + col].abs().total_cmp(&a[q * n + col].abs()))?;
        if a[pivot * n + col].abs() < 1e-12 {
            return None;
        }
        for j in 0..n {
            a.swap(col * n + j, pivot * n + j);
            inv.swap(col * n + j, pivot * n + j);
        }
        let d = a[col * n + col];
        for j in 0..n {
            a[col * n + j] /= d;
            inv[col * n + j] /= d;
        }
        for r in (0..n).filter(|&r| r != col) {
            let f = a[r * n + col];
            if f != 0.0 {
                for j in 0..n {
                    a[r * n + j] -= f * a[col * n + j];
                    inv[r * n + j] -= f * inv[col * n + j];
                }
            }
        }
    }
    Some(inv)
}
