//! Points on the probability simplex `{w : w ≥ 0, Σ w = 1}`.
//!
//! Both the kernel weights θ and the regularizer weights β live here.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on `|Σ w − 1|` accepted by [`SimplexWeights::new`].
pub const SUM_TOLERANCE: f64 = 1e-12;

/// A nonnegative weight vector summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Solver("simplex weights must be nonempty".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Solver(format!(
                "simplex weight {w} is negative or not finite"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Solver(format!(
                "simplex weights sum to {sum}, expected 1"
            )));
        }
        Ok(SimplexWeights(weights))
    }

    /// `1/len` in every coordinate.
    pub fn uniform(len: usize) -> Self {
        assert!(
            len > 0,
            "uniform simplex weights need at least one coordinate"
        );
        SimplexWeights(vec![1.0 / len as f64; len])
    }

    /// All mass on coordinate `index`.
    pub fn vertex(len: usize, index: usize) -> Self {
        assert!(index < len);
        let mut w = vec![0.0; len];
        w[index] = 1.0;
        SimplexWeights(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn squared_norm(&self) -> f64 {
        self.0.iter().map(|w| w * w).sum()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for SimplexWeights {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        SimplexWeights::new(value)
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(value: SimplexWeights) -> Self {
        value.0
    }
}

/// Euclidean projection of `v` onto the probability simplex.
///
/// Sort-based: find the largest `ρ` with `u_ρ − (Σ_{j≤ρ} u_j − 1)/ρ > 0` over the
/// descending sort `u`, then shift by that threshold and clamp at zero.
pub fn project_simplex(v: &[f64]) -> Result<SimplexWeights> {
    if v.is_empty() {
        return Err(Error::Solver("cannot project an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Solver("cannot project a non-finite vector".into()));
    }

    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));

    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            threshold = candidate;
        }
    }

    let mut w: Vec<f64> = v.iter().map(|x| (x - threshold).max(0.0)).collect();
    // Absorb the last few ulps of rounding so the invariant holds exactly enough.
    let sum: f64 = w.iter().sum();
    if sum > 0.0 && (sum - 1.0).abs() > f64::EPSILON {
        w.iter_mut().for_each(|x| *x /= sum);
    }
    SimplexWeights::new(w)
}
