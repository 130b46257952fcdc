//! View-weight subproblems with α held fixed.
//!
//! With `v_k = K_k α`, the objective restricted to θ is
//!
//! ```text
//! g(θ) = loss(Σ_k θ_k v_k) + γ_A Σ_k θ_k αᵀv_k + γ_I θᵀBθ + γ_θ‖θ‖²,   B_ab = v_aᵀ H v_b
//! ```
//!
//! which is convex on the simplex. Restricted to β it is
//! `Σ_j β_j h_j + γ_β‖β‖²` with `h_j = γ_I (Kα)ᵀ H_j (Kα)`, solved in closed form.

use nalgebra::{DMatrix, DVector};

use super::{Loss, ObjectiveConfig};
use crate::linalg;
use crate::simplex::{project_simplex, SimplexWeights};
use crate::{Error, Result};

const GOLDEN_TOLERANCE: f64 = 1e-13;
const MAX_POLISH_SWEEPS: usize = 100;

/// Precomputed pieces of `g(θ)`.
#[derive(Clone, Debug)]
pub struct ThetaProblem {
    /// Labeled rows of `[v_1 .. v_N]`.
    v_labeled: DMatrix<f64>,
    y: Vec<f64>,
    linear: DVector<f64>,
    quadratic: DMatrix<f64>,
    loss: Loss,
    gamma_a: f64,
    gamma_i: f64,
    gamma_theta: f64,
}

impl ThetaProblem {
    pub fn new(
        alpha: &DVector<f64>,
        kernels: &[&DMatrix<f64>],
        h: &DMatrix<f64>,
        y: &[f64],
        config: &ObjectiveConfig,
    ) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::Solver("no kernels to weight".into()));
        }
        let n = alpha.len();
        if kernels.iter().any(|k| k.shape() != (n, n)) || h.shape() != (n, n) {
            return Err(Error::Solver(
                "kernel, regularizer and alpha sizes disagree".into(),
            ));
        }
        if y.is_empty() || y.len() > n {
            return Err(Error::Solver(format!(
                "{} labels for {n} examples",
                y.len()
            )));
        }
        let nv = kernels.len();
        let v = DMatrix::from_columns(&kernels.iter().map(|k| *k * alpha).collect::<Vec<_>>());
        let linear = DVector::from_fn(nv, |k, _| alpha.dot(&v.column(k)));
        let quadratic = if config.gamma_i != 0.0 {
            let hv = h * &v;
            let mut b = v.tr_mul(&hv);
            linalg::symmetrize(&mut b);
            b
        } else {
            DMatrix::zeros(nv, nv)
        };
        Ok(ThetaProblem {
            v_labeled: v.rows(0, y.len()).into_owned(),
            y: y.to_vec(),
            linear,
            quadratic,
            loss: config.loss,
            gamma_a: config.gamma_a,
            gamma_i: config.gamma_i,
            gamma_theta: config.gamma_theta,
        })
    }

    pub fn n_views(&self) -> usize {
        self.linear.len()
    }

    fn l(&self) -> f64 {
        self.y.len() as f64
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        let f = &self.v_labeled * theta;
        let loss = match self.loss {
            Loss::Squared => self
                .y
                .iter()
                .zip(f.iter())
                .map(|(y, f)| (y - f) * (y - f))
                .sum::<f64>(),
            Loss::Hinge => self
                .y
                .iter()
                .zip(f.iter())
                .map(|(y, f)| (1.0 - y * f).max(0.0))
                .sum::<f64>(),
        } / self.l();
        loss + self.gamma_a * self.linear.dot(theta)
            + self.gamma_i * linalg::quadratic_form(&self.quadratic, theta)
            + self.gamma_theta * theta.norm_squared()
    }

    /// Gradient for the squared loss, a subgradient for the hinge.
    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let f = &self.v_labeled * theta;
        let weights = DVector::from_iterator(
            self.y.len(),
            self.y.iter().zip(f.iter()).map(|(&y, &f)| match self.loss {
                Loss::Squared => -2.0 * (y - f),
                Loss::Hinge => {
                    if 1.0 - y * f > 0.0 {
                        -y
                    } else {
                        0.0
                    }
                }
            }),
        );
        self.v_labeled.tr_mul(&weights) / self.l()
            + &self.linear * self.gamma_a
            + (&self.quadratic * theta) * (2.0 * self.gamma_i)
            + theta * (2.0 * self.gamma_theta)
    }

    /// Largest eigenvalue of the squared-loss Hessian.
    fn smoothness(&self) -> f64 {
        let mut hess = self.v_labeled.tr_mul(&self.v_labeled) * (2.0 / self.l())
            + &self.quadratic * (2.0 * self.gamma_i);
        for i in 0..hess.nrows() {
            hess[(i, i)] += 2.0 * self.gamma_theta;
        }
        linalg::symmetrize(&mut hess);
        linalg::eigen_extremes(&hess).1
    }
}

/// `g(θ)`.
pub fn theta_objective(problem: &ThetaProblem, theta: &SimplexWeights) -> f64 {
    problem.value(&DVector::from_column_slice(theta.as_slice()))
}

/// Minimize `g` over the simplex, starting from `start`.
///
/// Projected gradient (step `1/L`) for the squared loss, projected subgradient
/// with diminishing steps for the hinge, then exact line searches along
/// `e_a − e_b` for every pair until no pair improves. Returns `start` unless a
/// strictly better point was found.
pub fn solve_theta(
    problem: &ThetaProblem,
    start: &SimplexWeights,
    config: &ObjectiveConfig,
) -> Result<SimplexWeights> {
    let nv = problem.n_views();
    if start.len() != nv {
        return Err(Error::Solver(format!(
            "start has {} weights for {nv} views",
            start.len()
        )));
    }
    let start_vec = DVector::from_column_slice(start.as_slice());
    let start_value = problem.value(&start_vec);
    if nv == 1 {
        return Ok(start.clone());
    }

    let mut theta = start_vec.clone();
    let mut best = theta.clone();
    let mut best_value = start_value;
    let mut previous = start_value;
    let smoothness = problem.smoothness();

    for t in 0..config.max_inner_iters {
        let grad = problem.gradient(&theta);
        let step = match problem.loss {
            Loss::Squared if smoothness > 0.0 => grad / smoothness,
            Loss::Squared => break,
            Loss::Hinge => {
                let norm = grad.norm();
                if norm == 0.0 {
                    break;
                }
                grad * (0.5 / (norm * ((t + 1) as f64).sqrt()))
            }
        };
        let projected = project_simplex((&theta - step).as_slice())?;
        theta = DVector::from_column_slice(projected.as_slice());
        let value = problem.value(&theta);
        if !value.is_finite() {
            return Err(Error::Solver("theta objective became non-finite".into()));
        }
        if value < best_value {
            best_value = value;
            best.copy_from(&theta);
        }
        let change = (previous - value).abs() / value.abs().max(f64::MIN_POSITIVE);
        previous = value;
        if problem.loss == Loss::Squared && change < config.tol_inner {
            break;
        }
    }

    let (polished, polished_value) = pairwise_descent(problem, best, best_value);
    if polished_value < start_value {
        SimplexWeights::new(renormalize(polished))
    } else {
        Ok(start.clone())
    }
}

fn renormalize(theta: DVector<f64>) -> Vec<f64> {
    let clipped: Vec<f64> = theta.iter().map(|x| x.max(0.0)).collect();
    let sum: f64 = clipped.iter().sum();
    clipped.into_iter().map(|x| x / sum).collect()
}

/// Coordinate descent over pairs `(a, b)`: move mass between the two weights by
/// an exact line search, leaving the others untouched.
fn pairwise_descent(
    problem: &ThetaProblem,
    mut theta: DVector<f64>,
    mut value: f64,
) -> (DVector<f64>, f64) {
    let nv = theta.len();
    for _ in 0..MAX_POLISH_SWEEPS {
        let sweep_start = value;
        for a in 0..nv {
            for b in (a + 1)..nv {
                let (lo, hi) = (-theta[a], theta[b]);
                if hi - lo <= 0.0 {
                    continue;
                }
                let along = |s: f64| {
                    let mut trial = theta.clone();
                    trial[a] += s;
                    trial[b] -= s;
                    problem.value(&trial)
                };
                let s = golden_section(along, lo, hi);
                let mut trial = theta.clone();
                trial[a] += s;
                trial[b] -= s;
                trial[a] = trial[a].max(0.0);
                trial[b] = trial[b].max(0.0);
                let trial_value = problem.value(&trial);
                if trial_value < value {
                    theta = trial;
                    value = trial_value;
                }
            }
        }
        if sweep_start - value <= 1e-15 * value.abs().max(1.0) {
            break;
        }
    }
    (theta, value)
}

/// Minimizer of a convex function on `[lo, hi]`, endpoints included.
fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOLERANCE * (1.0 + lo.abs().max(hi.abs())) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [lo, hi, mid]
        .into_iter()
        .map(|s| (s, f(s)))
        .fold((mid, f64::INFINITY), |best, cand| {
            if cand.1 < best.1 {
                cand
            } else {
                best
            }
        })
        .0
}

/// Minimizer of `Σ β_j h_j + γ_β‖β‖²` over the simplex.
///
/// For `γ_β > 0` this is the projection of `−h / (2γ_β)`; for `γ_β = 0` all
/// mass goes to the smallest `h_j`, split evenly among ties.
pub fn beta_closed_form(h: &[f64], gamma_beta: f64) -> Result<SimplexWeights> {
    if h.is_empty() {
        return Err(Error::Solver("no regularizers to weight".into()));
    }
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::Solver("non-finite regularizer energy".into()));
    }
    if gamma_beta > 0.0 {
        let scaled: Vec<f64> = h.iter().map(|x| -x / (2.0 * gamma_beta)).collect();
        return project_simplex(&scaled);
    }
    let min = h.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * min.abs().max(1.0);
    let ties = h.iter().filter(|&&x| x - min <= tol).count() as f64;
    SimplexWeights::new(
        h.iter()
            .map(|&x| if x - min <= tol { 1.0 / ties } else { 0.0 })
            .collect(),
    )
}

/// `h_j = γ_I (Kα)ᵀ H_j (Kα)` followed by [`beta_closed_form`].
pub fn solve_beta(
    alpha: &DVector<f64>,
    k: &DMatrix<f64>,
    manifolds: &[&DMatrix<f64>],
    config: &ObjectiveConfig,
) -> Result<SimplexWeights> {
    let n = alpha.len();
    if k.shape() != (n, n) || manifolds.iter().any(|h| h.shape() != (n, n)) {
        return Err(Error::Solver(
            "kernel, regularizers and alpha sizes disagree".into(),
        ));
    }
    let h = beta_energies(alpha, k, manifolds, config.gamma_i);
    beta_closed_form(&h, config.gamma_beta)
}

pub(crate) fn beta_energies(
    alpha: &DVector<f64>,
    k: &DMatrix<f64>,
    manifolds: &[&DMatrix<f64>],
    gamma_i: f64,
) -> Vec<f64> {
    if gamma_i == 0.0 {
        return vec![0.0; manifolds.len()];
    }
    let f = k * alpha;
    manifolds
        .iter()
        .map(|h| gamma_i * linalg::quadratic_form(h, &f))
        .collect()
}
