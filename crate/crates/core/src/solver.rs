//! Limited-memory BFGS with a strong Wolfe line search.
//!
//! The objectives minimized here are convex but only piecewise smooth, so the
//! "gradient" handed to the solver is a subgradient. Two safeguards keep the
//! iteration going at kinks: when the line search runs out of trials it still
//! accepts the best step that met the sufficient-decrease condition, and when
//! no such step exists the curvature memory is dropped and the search retries
//! along the shortest combination of the subgradients seen nearby.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Number of curvature pairs kept.
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when `|g|_inf <= gradient_tolerance * max(1, |x|_inf)`.
    pub gradient_tolerance: f64,
    /// Stop when the relative decrease stays at or below this for
    /// [`SolveOptions::objective_patience`] consecutive iterations.
    pub objective_tolerance: f64,
    pub objective_patience: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub max_line_search_steps: usize,
    /// Consecutive failed searches tolerated while the bundle of nearby
    /// subgradients grows.
    pub bundle_retries: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 2000,
            gradient_tolerance: 1e-5,
            objective_tolerance: 1e-9,
            objective_patience: 5,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            max_line_search_steps: 40,
            bundle_retries: 20,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            return Err(Error::Config("solver memory must be at least 1".into()));
        }
        if self.max_iterations == 0 || self.max_line_search_steps == 0 {
            return Err(Error::Config("solver iteration limits must be positive".into()));
        }
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::Config(format!(
                "Wolfe constants must satisfy 0 < c1 < c2 < 1 (got c1={}, c2={})",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if !(self.gradient_tolerance >= 0.0) || !(self.objective_tolerance >= 0.0) {
            return Err(Error::Config("solver tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    ConvergedGradient,
    ConvergedObjective,
    MaxIterations,
    LineSearchFailure,
    /// Dual solver only: the duality gap fell below its tolerance.
    ConvergedGap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Best iterate found.
    pub point: Vec<f64>,
    /// Objective value at `point`.
    pub value: f64,
    /// Infinity norm of the (sub)gradient at `point`.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: SolveStatus,
}

/// A point probed by the line search.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub step: f64,
    pub point: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LineSearchOutcome {
    /// Both strong Wolfe conditions hold at the returned probe.
    Accepted { probe: Probe, evaluations: usize },
    /// The trial budget ran out. `best` is the lowest probe that met the
    /// sufficient-decrease condition, if any did; `trial_gradients` holds
    /// the gradient of every finite probe.
    Exhausted {
        best: Option<Probe>,
        trial_gradients: Vec<Vec<f64>>,
        evaluations: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("search direction is not a descent direction (slope {slope})")]
pub struct NotDescent {
    pub slope: f64,
}

/// Minimizes `f`, which writes the gradient into its second argument and
/// returns the value.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &SolveOptions) -> Result<SolveResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    opts.validate()?;
    let dim = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; dim];
    let mut fx = f(&x, &mut g);
    let mut evaluations = 1;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteStart);
    }

    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut failures = 0;
    // After a failed search at a kink, the retry direction combines the
    // subgradient with one taken just beside the start point.
    let mut bundle: Vec<Vec<f64>> = Vec::new();
    let mut stalled = 0;
    let mut recent: VecDeque<Vec<f64>> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;

    let status = loop {
        if gradient_converged(&x, &g, opts.gradient_tolerance) {
            break SolveStatus::ConvergedGradient;
        }
        if iterations >= opts.max_iterations {
            break SolveStatus::MaxIterations;
        }

        let (mut direction, mut initial) = if !bundle.is_empty() {
            let shortest = min_norm_element(&bundle);
            if gradient_converged(&x, &shortest, opts.gradient_tolerance) {
                break SolveStatus::ConvergedGradient;
            }
            steepest(&shortest)
        } else if memory.is_empty() {
            steepest(&g)
        } else {
            (two_loop(&g, &memory), 1.0)
        };
        if dot(&g, &direction) >= 0.0 {
            memory.clear();
            (direction, initial) = steepest(&g);
        }

        let outcome = match line_search(&mut f, &x, fx, &g, &direction, initial, opts) {
            Ok(o) => o,
            Err(_) => {
                // Only reachable with a zero gradient, which the convergence
                // test above already handles for finite tolerances.
                break SolveStatus::LineSearchFailure;
            }
        };
        let probe = match outcome {
            LineSearchOutcome::Accepted { probe, evaluations: e } => {
                evaluations += e;
                Some(probe)
            }
            LineSearchOutcome::Exhausted {
                best,
                trial_gradients,
                evaluations: e,
            } => {
                evaluations += e;
                if best.is_none() {
                    if bundle.is_empty() {
                        bundle.push(g.clone());
                    }
                    bundle.extend(trial_gradients);
                }
                best
            }
        };
        iterations += 1;

        let Some(probe) = probe else {
            failures += 1;
            if failures > opts.bundle_retries.max(1) {
                break SolveStatus::LineSearchFailure;
            }
            memory.clear();
            continue;
        };
        failures = 0;
        bundle.clear();

        let s: Vec<f64> = probe.point.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = probe.gradient.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm2(&s) * norm2(&y) && sy > 0.0 {
            if memory.len() == opts.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }

        let decrease = (fx - probe.value) / fx.abs().max(probe.value.abs()).max(1.0);
        if recent.len() == opts.memory {
            recent.pop_front();
        }
        recent.push_back(std::mem::replace(&mut g, probe.gradient));
        x = probe.point;
        fx = probe.value;

        if decrease <= opts.objective_tolerance {
            // Creeping along a kink: the next direction combines the
            // subgradients of the last few iterates.
            bundle = recent.iter().cloned().chain([g.clone()]).collect();
            stalled += 1;
            if stalled >= opts.objective_patience {
                break SolveStatus::ConvergedObjective;
            }
        } else {
            stalled = 0;
        }
    };

    Ok(SolveResult {
        gradient_norm: norm_inf(&g),
        point: x,
        value: fx,
        iterations,
        evaluations,
        status,
    })
}

/// Strong Wolfe line search (bracketing followed by cubic-interpolation zoom)
/// along `direction` from `x`.
pub fn line_search<F>(
    f: &mut F,
    x: &[f64],
    fx: f64,
    gx: &[f64],
    direction: &[f64],
    initial_step: f64,
    opts: &SolveOptions,
) -> Result<LineSearchOutcome, NotDescent>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let slope0 = dot(gx, direction);
    if !(slope0 < 0.0) {
        return Err(NotDescent { slope: slope0 });
    }
    let mut search = Search {
        f,
        x,
        fx,
        slope0,
        direction,
        c1: opts.wolfe_c1,
        c2: opts.wolfe_c2,
        budget: opts.max_line_search_steps,
        evaluations: 0,
        best: None,
        trial_gradients: Vec::new(),
    };
    let probe = search
        .run(initial_step.max(f64::MIN_POSITIVE))
        .map(|p| search.refine(p));
    let evaluations = search.evaluations;
    Ok(match probe {
        Some(probe) => LineSearchOutcome::Accepted { probe, evaluations },
        None => LineSearchOutcome::Exhausted {
            best: search.best,
            trial_gradients: search.trial_gradients,
            evaluations,
        },
    })
}

struct Search<'a, F> {
    f: &'a mut F,
    x: &'a [f64],
    fx: f64,
    slope0: f64,
    direction: &'a [f64],
    c1: f64,
    c2: f64,
    budget: usize,
    evaluations: usize,
    best: Option<Probe>,
    trial_gradients: Vec<Vec<f64>>,
}

/// Value and directional derivative at a trial step.
#[derive(Clone, Copy)]
struct Trial {
    step: f64,
    value: f64,
    slope: f64,
}

impl<F> Search<'_, F>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    fn probe(&mut self, step: f64) -> (Trial, Probe) {
        self.evaluations += 1;
        let point: Vec<f64> = self
            .x
            .iter()
            .zip(self.direction)
            .map(|(xi, di)| xi + step * di)
            .collect();
        let mut gradient = vec![0.0; point.len()];
        let mut value = (self.f)(&point, &mut gradient);
        let mut slope = dot(&gradient, self.direction);
        if !value.is_finite() || !slope.is_finite() {
            value = f64::INFINITY;
            slope = f64::NAN;
        }
        let trial = Trial { step, value, slope };
        let probe = Probe {
            step,
            point,
            value,
            gradient,
        };
        if self.sufficient(&trial) && self.best.as_ref().is_none_or(|b| value < b.value) {
            self.best = Some(probe.clone());
        }
        if value.is_finite() {
            self.trial_gradients.push(probe.gradient.clone());
        }
        (trial, probe)
    }

    fn sufficient(&self, t: &Trial) -> bool {
        t.value <= self.fx + self.c1 * t.step * self.slope0 && t.value < self.fx
    }

    fn curvature(&self, t: &Trial) -> bool {
        t.slope.abs() <= -self.c2 * self.slope0
    }

    fn run(&mut self, initial: f64) -> Option<Probe> {
        let mut prev = Trial {
            step: 0.0,
            value: self.fx,
            slope: self.slope0,
        };
        let mut step = initial;
        let mut first = true;
        while self.evaluations < self.budget {
            let (t, probe) = self.probe(step);
            if !self.sufficient(&t) || (!first && t.value >= prev.value) {
                return self.zoom(prev, t);
            }
            if self.curvature(&t) {
                return Some(probe);
            }
            if t.slope >= 0.0 {
                return self.zoom(t, prev);
            }
            first = false;
            prev = t;
            step *= 2.0;
        }
        None
    }

    /// One secant step on the directional derivative from an accepted probe.
    /// Exact on quadratics; kept only if it also meets both Wolfe conditions
    /// and lowers the value.
    fn refine(&mut self, accepted: Probe) -> Probe {
        let slope = dot(&accepted.gradient, self.direction);
        if slope.abs() <= 1e-3 * -self.slope0 || self.evaluations >= self.budget {
            return accepted;
        }
        let step = accepted.step * self.slope0 / (self.slope0 - slope);
        if !step.is_finite() || step <= 0.0 || (step - accepted.step).abs() <= 1e-12 * accepted.step {
            return accepted;
        }
        let (t, probe) = self.probe(step);
        if self.sufficient(&t) && self.curvature(&t) && t.value < accepted.value {
            probe
        } else {
            accepted
        }
    }

    /// `lo` satisfies sufficient decrease and has the lower value; the
    /// minimizer lies between `lo` and `hi`.
    fn zoom(&mut self, mut lo: Trial, mut hi: Trial) -> Option<Probe> {
        while self.evaluations < self.budget {
            let (a, b) = if lo.step < hi.step {
                (lo.step, hi.step)
            } else {
                (hi.step, lo.step)
            };
            let width = b - a;
            if width <= 1e-16 * b.max(1e-300) {
                return None;
            }
            let margin = 0.01 * width;
            let step = match cubic_minimizer(&lo, &hi) {
                Some(s) if s > a + margin && s < b - margin => s,
                Some(s) if s.is_finite() => s.clamp(a + margin, b - margin),
                _ => 0.5 * (a + b),
            };
            let (t, probe) = self.probe(step);
            if !self.sufficient(&t) || t.value >= lo.value {
                hi = t;
            } else {
                if self.curvature(&t) {
                    return Some(probe);
                }
                if t.slope * (hi.step - lo.step) >= 0.0 {
                    hi = lo;
                }
                lo = t;
            }
        }
        None
    }
}

/// Minimizer of the cubic matching value and slope at both trials.
fn cubic_minimizer(p: &Trial, q: &Trial) -> Option<f64> {
    if !(p.value.is_finite() && q.value.is_finite() && p.slope.is_finite() && q.slope.is_finite()) {
        return None;
    }
    let d1 = p.slope + q.slope - 3.0 * (p.value - q.value) / (p.step - q.step);
    let disc = d1 * d1 - p.slope * q.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (q.step - p.step).signum() * disc.sqrt();
    let denom = q.slope - p.slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let step = q.step - (q.step - p.step) * (q.slope + d2 - d1) / denom;
    step.is_finite().then_some(step)
}

/// Approximate minimum-norm point of the convex hull of `vectors`
/// (Frank-Wolfe with exact steps on the Gram matrix).
fn min_norm_element(vectors: &[Vec<f64>]) -> Vec<f64> {
    let m = vectors.len();
    let gram: Vec<f64> = (0..m * m).map(|ij| dot(&vectors[ij / m], &vectors[ij % m])).collect();
    let mut lambda = vec![1.0 / m as f64; m];
    for _ in 0..500 {
        // Gradient of lambda' G lambda is 2 G lambda.
        let gl: Vec<f64> = (0..m)
            .map(|i| (0..m).map(|j| gram[i * m + j] * lambda[j]).sum())
            .collect();
        let vertex = (0..m).min_by(|&a, &b| gl[a].total_cmp(&gl[b])).unwrap_or(0);
        let current: f64 = (0..m).map(|i| lambda[i] * gl[i]).sum();
        let gap = current - gl[vertex];
        if gap <= 1e-12 * current.max(f64::MIN_POSITIVE) {
            break;
        }
        // Exact minimizer of |(1-t) v + t e|^2 over t in [0, 1].
        let vv = gram[vertex * m + vertex];
        let curvature = current - 2.0 * gl[vertex] + vv;
        let t = if curvature > 0.0 {
            (gap / curvature).clamp(0.0, 1.0)
        } else {
            1.0
        };
        lambda.iter_mut().for_each(|l| *l *= 1.0 - t);
        lambda[vertex] += t;
    }
    let mut out = vec![0.0; vectors.first().map_or(0, Vec::len)];
    for (l, v) in lambda.iter().zip(vectors) {
        axpy(*l, v, &mut out);
    }
    out
}

fn steepest(g: &[f64]) -> (Vec<f64>, f64) {
    let norm = norm2(g);
    (
        g.iter().map(|v| -v).collect(),
        if norm > 0.0 { 1.0 / norm } else { 1.0 },
    )
}

/// `-H g` from the stored curvature pairs, with initial scaling `s'y / y'y`
/// taken from the newest pair.
fn two_loop(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        axpy(-a, y, &mut q);
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        axpy(a - b, s, &mut q);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn gradient_converged(x: &[f64], g: &[f64], tol: f64) -> bool {
    norm_inf(g) <= tol * norm_inf(x).max(1.0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shifted_quadratic(a: Vec<f64>) -> impl FnMut(&[f64], &mut [f64]) -> f64 {
        move |w, g| {
            let mut v = 0.0;
            for i in 0..w.len() {
                g[i] = w[i] - a[i];
                v += 0.5 * g[i] * g[i];
            }
            v
        }
    }

    pub(crate) fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
    }

    #[test]
    fn identity_quadratic_solves_in_few_iterations() {
        let a = vec![3.0, -1.0, 0.5, 2.0, -4.0];
        let r = minimize(shifted_quadratic(a.clone()), vec![0.0; 5], &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::ConvergedGradient);
        assert!(r.iterations <= a.len() + 5);
        for (p, q) in r.point.iter().zip(&a) {
            assert!((p - q).abs() <= 1e-10);
        }
    }

    #[test]
    fn rosenbrock_reaches_the_valley_floor() {
        let opts = SolveOptions {
            gradient_tolerance: 1e-10,
            ..SolveOptions::default()
        };
        let r = minimize(rosenbrock, vec![-1.2, 1.0], &opts).unwrap();
        assert!((r.point[0] - 1.0).abs() <= 1e-6, "{r:?}");
        assert!((r.point[1] - 1.0).abs() <= 1e-6, "{r:?}");
    }

    #[test]
    fn hinge_plus_quadratic_matches_hand_minimum() {
        // f(w) = |w|^2 / 2 + max(0, 1 - w1): minimized at w = (1, 0) with value 1/2.
        let f = |w: &[f64], g: &mut [f64]| {
            g.copy_from_slice(w);
            let mut v = 0.5 * (w[0] * w[0] + w[1] * w[1]);
            if 1.0 - w[0] > 0.0 {
                v += 1.0 - w[0];
                g[0] -= 1.0;
            }
            v
        };
        // Grid oracle over w1, with w2 = 0 optimal by symmetry.
        let grid_best = (0..=40_000)
            .map(|i| -1.0 + 3.0 * i as f64 / 40_000.0)
            .map(|w1| (0.5 * w1 * w1 + (1.0 - w1).max(0.0), w1))
            .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
        assert!((grid_best.1 - 1.0).abs() < 1e-3);
        let r = minimize(f, vec![0.0, 0.0], &SolveOptions::default()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-8, "{r:?}");
        assert!((r.point[0] - 1.0).abs() < 1e-6 && r.point[1].abs() < 1e-6, "{r:?}");
        assert!(r.value <= grid_best.0 + 1e-12);
    }

    #[test]
    fn non_finite_start_is_rejected() {
        let f = |_: &[f64], g: &mut [f64]| {
            g.fill(0.0);
            f64::NAN
        };
        assert!(matches!(
            minimize(f, vec![0.0], &SolveOptions::default()),
            Err(Error::NonFiniteStart)
        ));
    }

    #[test]
    fn bad_options_are_rejected() {
        let opts = SolveOptions {
            wolfe_c1: 0.9,
            wolfe_c2: 0.1,
            ..SolveOptions::default()
        };
        assert!(matches!(
            minimize(shifted_quadratic(vec![1.0]), vec![0.0], &opts),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn line_search_finds_exact_quadratic_step() {
        let mut f = shifted_quadratic(vec![4.0, 0.0]);
        let x = [0.0, 0.0];
        let mut g = [0.0; 2];
        let fx = f(&x, &mut g);
        let d = [4.0, 0.0];
        // Exact minimizer along d is step 1; start from a tiny step.
        let out = line_search(&mut f, &x, fx, &g, &d, 0.01, &SolveOptions::default()).unwrap();
        match out {
            LineSearchOutcome::Accepted { probe, evaluations } => {
                assert!(evaluations <= 10);
                assert!(probe.gradient[0].abs() <= 0.9 * 16.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn line_search_takes_unit_step_when_it_already_works() {
        let mut f = shifted_quadratic(vec![1.0, 1.0]);
        let x = [0.0, 0.0];
        let mut g = [0.0; 2];
        let fx = f(&x, &mut g);
        let d = [1.0, 1.0];
        match line_search(&mut f, &x, fx, &g, &d, 1.0, &SolveOptions::default()).unwrap() {
            LineSearchOutcome::Accepted { probe, evaluations } => {
                assert_eq!(evaluations, 1);
                assert_eq!(probe.step, 1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn line_search_is_bounded_on_flat_directions() {
        // Linear function: the slope never shrinks, so no curvature step exists.
        let mut f = |x: &[f64], g: &mut [f64]| {
            g[0] = -1.0;
            -x[0]
        };
        let opts = SolveOptions::default();
        match line_search(&mut f, &[0.0], 0.0, &[-1.0], &[1.0], 1.0, &opts).unwrap() {
            LineSearchOutcome::Exhausted { best, evaluations, .. } => {
                assert_eq!(evaluations, opts.max_line_search_steps);
                assert!(best.is_some());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn line_search_rejects_ascent_directions() {
        let mut f = shifted_quadratic(vec![1.0]);
        let r = line_search(&mut f, &[0.0], 0.5, &[-1.0], &[-1.0], 1.0, &SolveOptions::default());
        assert_eq!(r, Err(NotDescent { slope: 1.0 }));
    }

    #[test]
    fn repeated_failure_reports_line_search_failure() {
        // Gradient that lies about descent: every probe increases the value.
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 1.0;
            x[0].abs() + 1.0
        };
        let r = minimize(f, vec![0.0], &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::LineSearchFailure);
        assert_eq!(r.point, vec![0.0]);
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn deterministic() {
        let a = minimize(rosenbrock, vec![-1.2, 1.0], &SolveOptions::default()).unwrap();
        let b = minimize(rosenbrock, vec![-1.2, 1.0], &SolveOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    /// Random SPD matrix with eigenvalues in [1, 10] and a random minimizer.
    fn spd_quadratic(dim: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m: Vec<f64> = (0..dim * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        // A = I + M'M scaled into [1, 10].
        let mut a = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                a[i * dim + j] = (0..dim).map(|r| m[r * dim + i] * m[r * dim + j]).sum();
            }
        }
        let trace: f64 = (0..dim).map(|i| a[i * dim + i]).sum();
        let scale = 9.0 / trace.max(1e-12);
        for i in 0..dim {
            for j in 0..dim {
                a[i * dim + j] *= scale;
            }
            a[i * dim + i] += 1.0;
        }
        let b = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        (a, b)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn strongly_convex_quadratics_converge_within_2d(dim in 1usize..=50, seed in 0u64..1000) {
            let (a, b) = spd_quadratic(dim, seed);
            let f = |x: &[f64], g: &mut [f64]| {
                let mut v = 0.0;
                for i in 0..dim {
                    // Centered form keeps the optimal value at 0, where values
                    // still resolve decreases of order |g|^2.
                    let ad: f64 = (0..dim).map(|j| a[i * dim + j] * (x[j] - b[j])).sum();
                    g[i] = ad;
                    v += 0.5 * (x[i] - b[i]) * ad;
                }
                v
            };
            let opts = SolveOptions { gradient_tolerance: 1e-10, objective_tolerance: 0.0, ..SolveOptions::default() };
            let r = minimize(f, vec![0.0; dim], &opts).unwrap();
            prop_assert_eq!(r.status, SolveStatus::ConvergedGradient);
            prop_assert!(r.iterations <= 2 * dim, "{} iterations for dim {}", r.iterations, dim);
        }

        #[test]
        fn accepted_values_never_increase(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let centers: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut history = Vec::new();
            // Convex piecewise-smooth: quadratic plus an l1 term.
            let f = |x: &[f64], g: &mut [f64]| {
                let mut v = 0.0;
                for i in 0..x.len() {
                    let d = x[i] - centers[i];
                    v += 0.5 * d * d + 0.3 * x[i].abs();
                    g[i] = d + 0.3 * if x[i] >= 0.0 { 1.0 } else { -1.0 };
                }
                v
            };
            let mut x = vec![1.0; 6];
            let opts = SolveOptions { max_iterations: 1, ..SolveOptions::default() };
            for _ in 0..30 {
                let r = minimize(f, x, &opts).unwrap();
                history.push(r.value);
                x = r.point;
            }
            prop_assert!(history.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
