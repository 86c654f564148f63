//! The multiclass joint feature map and the linear decision rule built on it.
//!
//! A weight vector for `k` categories over `n` features is the concatenation
//! of `k` per-category slots of length `n`. `joint_feature(x, y)` places `x`
//! in slot `y` and zeros elsewhere, so `w . joint_feature(x, y)` is the score
//! of category `y`. Categories are 1-based throughout the public API.

use crate::error::{Error, Result};

/// Builds the length `k * x.len()` vector with `x` copied into slot `y`.
pub fn joint_feature(x: &[f64], y: usize, k: usize) -> Result<Vec<f64>> {
    check_category(y, k)?;
    let n = x.len();
    let mut out = vec![0.0; k * n];
    out[(y - 1) * n..y * n].copy_from_slice(x);
    Ok(out)
}

/// Score of category `y`: the dot product of slot `y` of `w` with `x`.
pub fn score(w: &[f64], x: &[f64], y: usize) -> Result<f64> {
    let k = category_count(w, x)?;
    check_category(y, k)?;
    Ok(slot_score(w, x, y - 1))
}

/// Highest-scoring category; ties resolve to the lowest index.
pub fn predict(w: &[f64], x: &[f64]) -> Result<usize> {
    let k = category_count(w, x)?;
    if k < 2 {
        return Err(Error::Degenerate(format!(
            "prediction needs at least 2 categories, weights hold {k}"
        )));
    }
    Ok(argmax_slot(w, x, k) + 1)
}

pub(crate) fn check_category(y: usize, k: usize) -> Result<()> {
    if y == 0 || y > k {
        return Err(Error::InvalidCategory { label: y, k });
    }
    Ok(())
}

/// Infers `k` from the weight length, failing when `w` is not a whole
/// number of slots.
fn category_count(w: &[f64], x: &[f64]) -> Result<usize> {
    let n = x.len();
    if n == 0 {
        return Err(Error::dim("feature vector", 1, 0));
    }
    if !w.len().is_multiple_of(n) || w.is_empty() {
        // Report the nearest whole number of slots as the expected length.
        let slots = (w.len() / n).max(1);
        return Err(Error::dim("weight vector", slots * n, w.len()));
    }
    Ok(w.len() / n)
}

/// Dot product of the 0-based slot `slot` with `x`. No bounds checks beyond
/// slicing.
#[inline]
pub(crate) fn slot_score(w: &[f64], x: &[f64], slot: usize) -> f64 {
    let n = x.len();
    dot(&w[slot * n..(slot + 1) * n], x)
}

#[inline]
pub(crate) fn argmax_slot(w: &[f64], x: &[f64], k: usize) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for slot in 0..k {
        let s = slot_score(w, x, slot);
        if s > best_score {
            best = slot;
            best_score = s;
        }
    }
    best
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
