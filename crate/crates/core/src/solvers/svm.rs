//! Hinge-loss SVM in the representer basis, solved by Nesterov's smoothing
//! and his three-sequence accelerated gradient scheme.
//!
//! Each hinge term `max(0, m_i)` with margin `m_i = 1 − y_i K_i α` is replaced by
//! `ψ_μ(m_i) = max_{0≤u≤1} u m_i − (μ/2) s_i u²`, with `s_i = ‖K_i‖_∞`. The
//! maximizer is `u_i = clamp(m_i / (μ s_i), 0, 1)` and
//! `0 ≤ max(0, m) − ψ_μ(m) ≤ μ s / 2`.

use nalgebra::{DMatrix, DVector};

use super::{check_problem, ObjectiveConfig};
use crate::linalg;
use crate::{Error, Result};

/// Dual variables of the smoothed hinge and the per-row scales they use.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedHingeState {
    /// In `[0, 1]`, one per labeled example.
    pub u: Vec<f64>,
    /// `‖K_i‖_∞` of each labeled row.
    pub scales: Vec<f64>,
}

/// `‖K_i‖_∞` for the first `l` rows of `k`.
pub fn row_scales(k: &DMatrix<f64>, l: usize) -> Result<Vec<f64>> {
    (0..l)
        .map(|i| {
            let s = k.row(i).amax();
            if s > 0.0 {
                Ok(s)
            } else {
                Err(Error::Solver(format!("kernel row {i} is all zero")))
            }
        })
        .collect()
}

/// `u_i = median{0, 1, m_i / (μ s_i)}`.
pub fn smoothed_hinge_u(margins: &[f64], scales: &[f64], mu: f64) -> Result<Vec<f64>> {
    if margins.len() != scales.len() {
        return Err(Error::Solver("margins and scales differ in length".into()));
    }
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::Solver(format!("mu must be positive, got {mu}")));
    }
    margins
        .iter()
        .zip(scales)
        .map(|(&m, &s)| {
            if s > 0.0 {
                Ok(dual(m, s, mu))
            } else {
                Err(Error::Solver("zero kernel row scale".into()))
            }
        })
        .collect()
}

fn dual(margin: f64, scale: f64, mu: f64) -> f64 {
    (margin / (mu * scale)).clamp(0.0, 1.0)
}

fn smoothed_hinge(margin: f64, scale: f64, mu: f64) -> f64 {
    let u = dual(margin, scale, mu);
    u * margin - 0.5 * mu * scale * u * u
}

/// `2(γ_A K + γ_I KHK)`, symmetrized.
fn regularizer_matrix(
    k: &DMatrix<f64>,
    h: &DMatrix<f64>,
    config: &ObjectiveConfig,
) -> DMatrix<f64> {
    let mut q = k * (2.0 * config.gamma_a);
    if config.gamma_i != 0.0 {
        q += (k * (h * k)) * (2.0 * config.gamma_i);
    }
    linalg::symmetrize(&mut q);
    q
}

/// The smoothed α-objective with everything that stays fixed across iterations
/// precomputed.
struct SmoothedSvm {
    q: DMatrix<f64>,
    k_labeled: DMatrix<f64>,
    y: Vec<f64>,
    scales: Vec<f64>,
    mu: f64,
}

impl SmoothedSvm {
    fn new(
        k: &DMatrix<f64>,
        h: &DMatrix<f64>,
        y: &[f64],
        config: &ObjectiveConfig,
    ) -> Result<Self> {
        Ok(SmoothedSvm {
            q: regularizer_matrix(k, h, config),
            k_labeled: k.rows(0, y.len()).into_owned(),
            y: y.to_vec(),
            scales: row_scales(k, y.len())?,
            mu: config.mu,
        })
    }

    fn l(&self) -> f64 {
        self.y.len() as f64
    }

    fn margins(&self, alpha: &DVector<f64>) -> Vec<f64> {
        let f = &self.k_labeled * alpha;
        self.y
            .iter()
            .zip(f.iter())
            .map(|(y, f)| 1.0 - y * f)
            .collect()
    }

    fn value(&self, alpha: &DVector<f64>) -> f64 {
        self.value_with(alpha, &(&self.q * alpha))
    }

    /// Objective given `q_alpha = Q α`.
    fn value_with(&self, alpha: &DVector<f64>, q_alpha: &DVector<f64>) -> f64 {
        let loss: f64 = self
            .margins(alpha)
            .iter()
            .zip(&self.scales)
            .map(|(&m, &s)| smoothed_hinge(m, s, self.mu))
            .sum();
        0.5 * alpha.dot(q_alpha) + loss / self.l()
    }

    fn gradient_with(&self, alpha: &DVector<f64>, q_alpha: &DVector<f64>) -> DVector<f64> {
        let weights: Vec<f64> = self
            .margins(alpha)
            .iter()
            .zip(&self.scales)
            .zip(&self.y)
            .map(|((&m, &s), &y)| y * dual(m, s, self.mu))
            .collect();
        let pull = self.k_labeled.tr_mul(&DVector::from_vec(weights));
        q_alpha - pull / self.l()
    }

    fn lipschitz(&self) -> f64 {
        let row_term = (0..self.k_labeled.nrows())
            .map(|i| self.k_labeled.row(i).norm_squared() / self.scales[i])
            .fold(0.0, f64::max);
        linalg::symmetric_spectral_norm(&self.q) + row_term / self.mu
    }
}

/// `γ_A αᵀKα + γ_I αᵀKHKα + (1/l) Σ ψ_μ(1 − y_i K_i α)`.
pub fn smoothed_objective(
    k: &DMatrix<f64>,
    h: &DMatrix<f64>,
    y: &[f64],
    alpha: &DVector<f64>,
    config: &ObjectiveConfig,
) -> Result<f64> {
    check_problem(k, h, y)?;
    Ok(SmoothedSvm::new(k, h, y, config)?.value(alpha))
}

/// The unsmoothed counterpart: `γ_A αᵀKα + γ_I αᵀKHKα + (1/l) Σ (1 − y_i K_i α)_+`.
pub fn hinge_objective(
    k: &DMatrix<f64>,
    h: &DMatrix<f64>,
    y: &[f64],
    alpha: &DVector<f64>,
    config: &ObjectiveConfig,
) -> f64 {
    let ka = k * alpha;
    let loss: f64 = y
        .iter()
        .zip(ka.iter())
        .map(|(y, f)| (1.0 - y * f).max(0.0))
        .sum::<f64>()
        / y.len() as f64;
    let manifold = if config.gamma_i != 0.0 {
        ka.dot(&(h * &ka))
    } else {
        0.0
    };
    loss + config.gamma_a * alpha.dot(&ka) + config.gamma_i * manifold
}

/// `∇F_μ = 2(γ_A K + γ_I KHK) α − (1/l) (Y K_l)ᵀ u` for a given dual vector `u`.
pub fn svm_gradient(
    alpha: &DVector<f64>,
    k: &DMatrix<f64>,
    h: &DMatrix<f64>,
    u: &[f64],
    y: &[f64],
    config: &ObjectiveConfig,
) -> Result<DVector<f64>> {
    check_problem(k, h, y)?;
    if u.len() != y.len() || alpha.len() != k.nrows() {
        return Err(Error::Solver(
            "gradient inputs have inconsistent lengths".into(),
        ));
    }
    let q = regularizer_matrix(k, h, config);
    let weights = DVector::from_iterator(y.len(), y.iter().zip(u).map(|(y, u)| y * u));
    let pull = k.rows(0, y.len()).tr_mul(&weights);
    Ok(&q * alpha - pull / y.len() as f64)
}

/// `‖2(γ_A K + γ_I KHK)‖₂ + (1/μ) max_{i<l} ‖K_i‖₂² / ‖K_i‖_∞`.
pub fn svm_lipschitz(
    k: &DMatrix<f64>,
    h: &DMatrix<f64>,
    n_labeled: usize,
    config: &ObjectiveConfig,
) -> Result<f64> {
    let y = vec![1.0; n_labeled];
    check_problem(k, h, &y)?;
    if config.mu.is_nan() || config.mu <= 0.0 {
        return Err(Error::Solver(format!(
            "mu must be positive, got {}",
            config.mu
        )));
    }
    Ok(SmoothedSvm::new(k, h, &y, config)?.lipschitz())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmFit {
    pub alpha: DVector<f64>,
    /// Smoothed objective at `alpha`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Accelerated gradient on the smoothed objective, started from `α = α̂ = 0`:
///
/// ```text
/// y_t     = α_t − ∇F_μ(α_t) / L
/// z_t     = α̂ − (1/L) Σ_{i≤t} (i+1)/2 · ∇F_μ(α_i)
/// α_{t+1} = 2/(t+3) · z_t + (t+1)/(t+3) · y_t
/// ```
///
/// Returns the best `y_t` seen, so the result never scores worse than `0`.
pub fn fit_svm_nesterov(
    k: &DMatrix<f64>,
    h: &DMatrix<f64>,
    y: &[f64],
    config: &ObjectiveConfig,
) -> Result<SvmFit> {
    fit_svm_nesterov_from(k, h, y, config, &DVector::zeros(k.nrows()))
}

/// [`fit_svm_nesterov`] with `α_0 = α̂ = start`; the result scores no worse
/// than `start`.
pub fn fit_svm_nesterov_from(
    k: &DMatrix<f64>,
    h: &DMatrix<f64>,
    y: &[f64],
    config: &ObjectiveConfig,
    start: &DVector<f64>,
) -> Result<SvmFit> {
    check_problem(k, h, y)?;
    config.validate()?;
    if start.len() != k.nrows() {
        return Err(Error::Solver(format!(
            "start has {} entries for {} examples",
            start.len(),
            k.nrows()
        )));
    }
    let problem = SmoothedSvm::new(k, h, y, config)?;
    let lipschitz = problem.lipschitz();
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(Error::Solver(format!(
            "invalid Lipschitz constant {lipschitz}"
        )));
    }

    // Q times each sequence is carried along linearly, so an iteration costs a
    // single product with Q.
    let n = k.nrows();
    let center = start.clone();
    let q_center = &problem.q * &center;
    let mut alpha = center.clone();
    let mut q_alpha = q_center.clone();
    let mut grad_sum = DVector::<f64>::zeros(n);
    let mut q_grad_sum = DVector::<f64>::zeros(n);
    let mut best_alpha = alpha.clone();
    let mut best = problem.value_with(&alpha, &q_alpha);
    let mut previous = best;
    let mut converged = false;
    let mut iterations = 0;

    for t in 0..config.max_inner_iters {
        iterations = t + 1;
        let grad = problem.gradient_with(&alpha, &q_alpha);
        let q_grad = &problem.q * &grad;
        let y_t = &alpha - &grad / lipschitz;
        let q_y = &q_alpha - &q_grad / lipschitz;
        let weight = 0.5 * (t as f64 + 1.0);
        grad_sum.axpy(weight, &grad, 1.0);
        q_grad_sum.axpy(weight, &q_grad, 1.0);

        let value = problem.value_with(&y_t, &q_y);
        if !value.is_finite() {
            return Err(Error::Solver(
                "smoothed objective became non-finite; check kernel and gamma scaling".into(),
            ));
        }
        if value < best {
            best = value;
            best_alpha.copy_from(&y_t);
        }
        let change = (previous - value).abs() / value.abs().max(f64::MIN_POSITIVE);
        previous = value;
        if t >= 10 && change < config.tol_inner {
            converged = true;
            break;
        }

        let tf = t as f64;
        let (a, b) = (2.0 / (tf + 3.0), (tf + 1.0) / (tf + 3.0));
        alpha = (&center - &grad_sum / lipschitz) * a + y_t * b;
        q_alpha = (&q_center - &q_grad_sum / lipschitz) * a + q_y * b;
    }

    Ok(SvmFit {
        objective: problem.value(&best_alpha),
        alpha: best_alpha,
        iterations,
        converged,
    })
}
