//! Block-coordinate descent over α, θ and β.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kls::fit_kls;
use super::svm::fit_svm_nesterov_from;
use super::weights::{solve_beta, solve_theta, ThetaProblem};
use super::{Loss, ObjectiveConfig};
use crate::kernels::{self, GramKernel};
use crate::manifold::ManifoldMatrix;
use crate::simplex::SimplexWeights;
use crate::{Error, Result};

/// Largest allowed increase of the objective from one step to the next.
pub const MONOTONE_SLACK: f64 = 1e-9;

/// Per-view kernels and regularizers over the same examples, labeled first.
#[derive(Clone, Debug)]
pub struct PreparedViews {
    pub kernels: Vec<GramKernel>,
    pub manifolds: Vec<ManifoldMatrix>,
}

impl PreparedViews {
    pub fn new(kernels: Vec<GramKernel>, manifolds: Vec<ManifoldMatrix>) -> Result<Self> {
        if kernels.is_empty() || manifolds.is_empty() {
            return Err(Error::Solver(
                "need at least one kernel and one regularizer".into(),
            ));
        }
        let n = kernels[0].n();
        if kernels.iter().any(|k| k.n() != n) || manifolds.iter().any(|m| m.n() != n) {
            return Err(Error::Solver(
                "kernels and regularizers cover different example counts".into(),
            ));
        }
        Ok(PreparedViews { kernels, manifolds })
    }

    pub fn n(&self) -> usize {
        self.kernels[0].n()
    }

    /// The same views with examples reordered, `out[i] = self[order[i]]`.
    pub fn permuted(&self, order: &[usize]) -> PreparedViews {
        PreparedViews {
            kernels: self.kernels.iter().map(|k| k.permuted(order)).collect(),
            manifolds: self.manifolds.iter().map(|m| m.permuted(order)).collect(),
        }
    }

    fn kernel_refs(&self) -> Vec<&DMatrix<f64>> {
        self.kernels.iter().map(GramKernel::matrix).collect()
    }

    fn manifold_refs(&self) -> Vec<&DMatrix<f64>> {
        self.manifolds.iter().map(ManifoldMatrix::matrix).collect()
    }

    fn combined_kernel(&self, theta: &SimplexWeights) -> DMatrix<f64> {
        kernels::weighted_sum(&self.kernel_refs(), theta.as_slice())
    }

    fn combined_manifold(&self, beta: &SimplexWeights) -> DMatrix<f64> {
        kernels::weighted_sum(&self.manifold_refs(), beta.as_slice())
    }
}

/// Which weight blocks the loop updates. Fixed blocks stay uniform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitOptions {
    pub learn_theta: bool,
    pub learn_beta: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            learn_theta: true,
            learn_beta: true,
        }
    }
}

impl FitOptions {
    pub fn fixed_weights() -> Self {
        FitOptions {
            learn_theta: false,
            learn_beta: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Init,
    Alpha,
    Theta,
    Beta,
}

impl std::fmt::Display for StepKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StepKind::Init => "init",
            StepKind::Alpha => "alpha",
            StepKind::Theta => "theta",
            StepKind::Beta => "beta",
        })
    }
}

/// Objective value after one step of one round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub round: usize,
    pub step: StepKind,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlternatingFit {
    pub alpha: DVector<f64>,
    pub theta: SimplexWeights,
    pub beta: SimplexWeights,
    pub trace: Vec<TraceStep>,
    pub rounds: usize,
    pub converged: bool,
}

impl AlternatingFit {
    pub fn objective(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |s| s.objective)
    }
}

fn data_loss(f: &DVector<f64>, y: &[f64], loss: Loss) -> f64 {
    let total: f64 = match loss {
        Loss::Squared => y.iter().zip(f.iter()).map(|(y, f)| (y - f) * (y - f)).sum(),
        Loss::Hinge => y
            .iter()
            .zip(f.iter())
            .map(|(y, f)| (1.0 - y * f).max(0.0))
            .sum(),
    };
    total / y.len() as f64
}

fn objective_with(
    k: &DMatrix<f64>,
    h: &DMatrix<f64>,
    y: &[f64],
    alpha: &DVector<f64>,
    theta: &SimplexWeights,
    beta: &SimplexWeights,
    config: &ObjectiveConfig,
) -> f64 {
    let f = k * alpha;
    let manifold = if config.gamma_i != 0.0 {
        f.dot(&(h * &f))
    } else {
        0.0
    };
    data_loss(&f, y, config.loss)
        + config.gamma_a * alpha.dot(&f)
        + config.gamma_i * manifold
        + config.gamma_theta * theta.squared_norm()
        + config.gamma_beta * beta.squared_norm()
}

/// `loss(Kα) + γ_A αᵀKα + γ_I αᵀKHKα + γ_θ‖θ‖² + γ_β‖β‖²` with the true
/// (unsmoothed) loss.
pub fn full_objective(
    views: &PreparedViews,
    y: &[f64],
    alpha: &DVector<f64>,
    theta: &SimplexWeights,
    beta: &SimplexWeights,
    config: &ObjectiveConfig,
) -> Result<f64> {
    if theta.len() != views.kernels.len() || beta.len() != views.manifolds.len() {
        return Err(Error::Solver(
            "weight vectors do not match the number of views".into(),
        ));
    }
    if alpha.len() != views.n() || y.is_empty() || y.len() > views.n() {
        return Err(Error::Solver(
            "alpha or labels do not match the example count".into(),
        ));
    }
    let k = views.combined_kernel(theta);
    let h = views.combined_manifold(beta);
    Ok(objective_with(&k, &h, y, alpha, theta, beta, config))
}

struct Tracker {
    trace: Vec<TraceStep>,
}

impl Tracker {
    fn record(&mut self, round: usize, step: StepKind, objective: f64) -> Result<()> {
        if !objective.is_finite() {
            return Err(Error::Solver(format!(
                "objective is non-finite after {step} step of round {round}"
            )));
        }
        if let Some(last) = self.trace.last() {
            let rise = objective - last.objective;
            if rise > MONOTONE_SLACK {
                return Err(Error::Solver(format!(
                    "objective rose by {rise:e} after {step} step of round {round}"
                )));
            }
        }
        self.trace.push(TraceStep {
            round,
            step,
            objective,
        });
        Ok(())
    }

    fn last(&self) -> f64 {
        self.trace.last().map_or(f64::INFINITY, |s| s.objective)
    }
}

/// Alternate α, θ and β updates from `α = 0` and uniform weights until a round
/// lowers the objective by less than `tol_outer` (relative).
///
/// The hinge α step resumes the smoothed solver from the current α and is kept
/// only when it does not raise the true objective; the θ step likewise keeps its start unless
/// it improves. The squared-loss α step and the β step are exact.
pub fn fit_prepared(
    views: &PreparedViews,
    y: &[f64],
    config: &ObjectiveConfig,
    options: FitOptions,
) -> Result<AlternatingFit> {
    config.validate()?;
    let n = views.n();
    if y.is_empty() || y.len() > n {
        return Err(Error::Solver(format!(
            "{} labels for {n} examples",
            y.len()
        )));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::Solver("labels must be +1 or -1".into()));
    }
    let mut theta = SimplexWeights::uniform(views.kernels.len());
    let mut beta = SimplexWeights::uniform(views.manifolds.len());
    let mut alpha = DVector::zeros(n);
    let mut k = views.combined_kernel(&theta);
    let mut h = views.combined_manifold(&beta);

    let mut tracker = Tracker { trace: Vec::new() };
    tracker.record(
        0,
        StepKind::Init,
        objective_with(&k, &h, y, &alpha, &theta, &beta, config),
    )?;
    let kernel_refs = views.kernel_refs();
    let manifold_refs = views.manifold_refs();
    let mut converged = false;
    let mut rounds = 0;

    for round in 1..=config.max_outer_rounds {
        rounds = round;
        let round_start = tracker.last();

        let candidate = match config.loss {
            Loss::Squared => fit_kls(&k, &h, y, config)?,
            Loss::Hinge => fit_svm_nesterov_from(&k, &h, y, config, &alpha)?.alpha,
        };
        let value = objective_with(&k, &h, y, &candidate, &theta, &beta, config);
        if config.loss == Loss::Squared || value <= tracker.last() {
            alpha = candidate;
            tracker.record(round, StepKind::Alpha, value)?;
        } else {
            debug!(
                "round {round}: smoothed alpha step rejected ({value} > {})",
                tracker.last()
            );
            tracker.record(round, StepKind::Alpha, tracker.last())?;
        }

        if options.learn_theta && theta.len() > 1 {
            let problem = ThetaProblem::new(&alpha, &kernel_refs, &h, y, config)?;
            theta = solve_theta(&problem, &theta, config)?;
            k = views.combined_kernel(&theta);
        }
        tracker.record(
            round,
            StepKind::Theta,
            objective_with(&k, &h, y, &alpha, &theta, &beta, config),
        )?;

        if options.learn_beta && beta.len() > 1 {
            beta = solve_beta(&alpha, &k, &manifold_refs, config)?;
            h = views.combined_manifold(&beta);
        }
        tracker.record(
            round,
            StepKind::Beta,
            objective_with(&k, &h, y, &alpha, &theta, &beta, config),
        )?;

        let decrease = round_start - tracker.last();
        if decrease <= config.tol_outer * round_start.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("alternating optimization stopped after {rounds} rounds without converging");
    }
    Ok(AlternatingFit {
        alpha,
        theta,
        beta,
        trace: tracker.trace,
        rounds,
        converged,
    })
}
