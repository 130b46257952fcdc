//! Classifier fitting under the multiview objective
//!
//! ```text
//! J(α, θ, β) = loss(Kα) + γ_A αᵀKα + γ_I αᵀKHKα + γ_θ‖θ‖² + γ_β‖β‖²
//! K = Σ_k θ_k K_k,   H = Σ_j β_j H_j
//! ```
//!
//! where `loss` averages the hinge or squared loss over the `l` labeled
//! examples, which always occupy indices `0..l`. With θ and β fixed the problem
//! in α is solved by [`fit_kls`] or [`fit_svm_nesterov`]; with α fixed the
//! weight subproblems are [`solve_theta`] and [`solve_beta`]; [`fit_alternating`]
//! cycles the three.

mod alternating;
mod kls;
mod model;
mod svm;
mod weights;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use alternating::{
    fit_prepared, full_objective, AlternatingFit, FitOptions, PreparedViews, StepKind, TraceStep,
    MONOTONE_SLACK,
};
pub use kls::{fit_kls, kls_gradient, kls_objective};
pub use model::{
    fit_alternating, predict, prepare_views, train, KernelSpecs, Preprocess, TrainSpec,
    TrainedModel, ViewData, ViewMode,
};
pub use svm::{
    fit_svm_nesterov, fit_svm_nesterov_from, hinge_objective, row_scales, smoothed_hinge_u,
    smoothed_objective, svm_gradient, svm_lipschitz, SmoothedHingeState, SvmFit,
};
pub use weights::{beta_closed_form, solve_beta, solve_theta, theta_objective, ThetaProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Hinge,
    Squared,
}

impl std::fmt::Display for Loss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Loss::Hinge => "hinge",
            Loss::Squared => "squared",
        })
    }
}

/// Trade-offs, loss and stopping rules for one fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub gamma_a: f64,
    pub gamma_i: f64,
    pub gamma_theta: f64,
    pub gamma_beta: f64,
    pub loss: Loss,
    /// Hinge smoothing parameter.
    pub mu: f64,
    pub max_inner_iters: usize,
    pub max_outer_rounds: usize,
    pub tol_inner: f64,
    pub tol_outer: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            gamma_a: 1e-3,
            gamma_i: 1e-2,
            gamma_theta: 1e-2,
            gamma_beta: 1e-2,
            loss: Loss::Squared,
            mu: 0.01,
            max_inner_iters: 1000,
            max_outer_rounds: 50,
            tol_inner: 1e-6,
            tol_outer: 1e-5,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        let gammas = [
            ("gamma_a", self.gamma_a),
            ("gamma_i", self.gamma_i),
            ("gamma_theta", self.gamma_theta),
            ("gamma_beta", self.gamma_beta),
        ];
        for (name, g) in gammas {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::Solver(format!(
                    "{name} must be a finite value >= 0, got {g}"
                )));
            }
        }
        for (name, t) in [("tol_inner", self.tol_inner), ("tol_outer", self.tol_outer)] {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::Solver(format!("{name} must be positive, got {t}")));
            }
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Solver(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if self.max_inner_iters == 0 || self.max_outer_rounds == 0 {
            return Err(Error::Solver("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

/// Shared shape checks for the α-subproblem inputs.
pub(crate) fn check_problem(
    k: &nalgebra::DMatrix<f64>,
    h: &nalgebra::DMatrix<f64>,
    y: &[f64],
) -> Result<()> {
    let n = k.nrows();
    if !k.is_square() || h.shape() != (n, n) {
        return Err(Error::Solver(format!(
            "kernel is {:?} but regularizer is {:?}",
            k.shape(),
            h.shape()
        )));
    }
    if y.is_empty() {
        return Err(Error::Solver("no labeled examples".into()));
    }
    if y.len() > n {
        return Err(Error::Solver(format!(
            "{} labels for {n} examples",
            y.len()
        )));
    }
    Ok(())
}
