//! Closed-form kernel least squares with a manifold penalty.
//!
//! Setting the α-gradient of `γ_A αᵀKα + γ_I αᵀKHKα + (1/l)‖Y − JKα‖²` to zero
//! and cancelling the common left factor `K` leaves the linear system
//! `(JK + γ_A l I + γ_I l HK) α = Y`, where `J` keeps the first `l` rows and `Y`
//! is the label vector padded with zeros.

use log::warn;
use nalgebra::{DMatrix, DVector};

use super::{check_problem, ObjectiveConfig};
use crate::{Error, Result};

fn padded_targets(n: usize, y: &[f64]) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    out.rows_mut(0, y.len()).copy_from_slice(y);
    out
}

/// The system matrix `JK + γ_A l I + γ_I l HK`.
fn system_matrix(
    k: &DMatrix<f64>,
    h: &DMatrix<f64>,
    l: usize,
    config: &ObjectiveConfig,
) -> DMatrix<f64> {
    let n = k.nrows();
    let lf = l as f64;
    let mut a = if config.gamma_i != 0.0 {
        (h * k) * (config.gamma_i * lf)
    } else {
        DMatrix::zeros(n, n)
    };
    a.rows_mut(0, l).zip_apply(&k.rows(0, l), |x, kv| *x += kv);
    for i in 0..n {
        a[(i, i)] += config.gamma_a * lf;
    }
    a
}

/// Expansion coefficients of the least-squares fit for fixed `K` and `H`.
/// `y` holds the targets of the first `y.len()` examples.
pub fn fit_kls(
    k: &DMatrix<f64>,
    h: &DMatrix<f64>,
    y: &[f64],
    config: &ObjectiveConfig,
) -> Result<DVector<f64>> {
    check_problem(k, h, y)?;
    config.validate()?;
    let n = k.nrows();
    let a = system_matrix(k, h, y.len(), config);
    let rhs = padded_targets(n, y);

    let lu = a.clone().lu();
    let mut alpha = lu.solve(&rhs).ok_or_else(|| singular(&a))?;
    if alpha.iter().any(|x| !x.is_finite()) {
        return Err(singular(&a));
    }

    let rhs_norm = rhs.norm();
    let mut residual = &rhs - &a * &alpha;
    if residual.norm() > 1e-8 * rhs_norm {
        // One round of iterative refinement recovers most of what pivoting loses.
        if let Some(correction) = lu.solve(&residual) {
            alpha += correction;
            residual = &rhs - &a * &alpha;
        }
        if residual.norm() > 1e-8 * rhs_norm {
            warn!(
                "kls: relative residual {:e} after refinement; consider a larger gamma_a",
                residual.norm() / rhs_norm
            );
        }
    }
    Ok(alpha)
}

fn singular(a: &DMatrix<f64>) -> Error {
    let s = a.clone().singular_values();
    let cond = s.max() / s.min();
    Error::Solver(format!(
        "least-squares system is singular (condition estimate {cond:e}); increase gamma_a"
    ))
}

/// `γ_A αᵀKα + γ_I αᵀKHKα + (1/l) Σ_{i<l} (y_i − (Kα)_i)²`.
pub fn kls_objective(
    k: &DMatrix<f64>,
    h: &DMatrix<f64>,
    y: &[f64],
    alpha: &DVector<f64>,
    config: &ObjectiveConfig,
) -> f64 {
    let ka = k * alpha;
    let l = y.len();
    let loss: f64 = y
        .iter()
        .zip(ka.iter())
        .map(|(yi, fi)| (yi - fi).powi(2))
        .sum::<f64>()
        / l as f64;
    let manifold = if config.gamma_i != 0.0 {
        ka.dot(&(h * &ka))
    } else {
        0.0
    };
    loss + config.gamma_a * alpha.dot(&ka) + config.gamma_i * manifold
}

/// Gradient of [`kls_objective`] with respect to α.
pub fn kls_gradient(
    k: &DMatrix<f64>,
    h: &DMatrix<f64>,
    y: &[f64],
    alpha: &DVector<f64>,
    config: &ObjectiveConfig,
) -> DVector<f64> {
    let ka = k * alpha;
    let l = y.len();
    let mut residual = DVector::zeros(k.nrows());
    for i in 0..l {
        residual[i] = y[i] - ka[i];
    }
    // K is symmetric, so the gradient factors as K (2γ_A α + 2γ_I HKα − (2/l) r).
    let mut direction = alpha * (2.0 * config.gamma_a);
    if config.gamma_i != 0.0 {
        direction += (h * &ka) * (2.0 * config.gamma_i);
    }
    direction -= residual * (2.0 / l as f64);
    k * direction
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(gamma_a: f64, gamma_i: f64) -> ObjectiveConfig {
        ObjectiveConfig {
            gamma_a,
            gamma_i,
            ..ObjectiveConfig::default()
        }
    }

    fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        &a * a.transpose()
    }

    #[test]
    fn scalar_case() {
        let k = DMatrix::from_element(1, 1, 1.0);
        let h = DMatrix::zeros(1, 1);
        let alpha = fit_kls(&k, &h, &[1.0], &config(1.0, 0.0)).unwrap();
        assert!((alpha[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn huge_regularization_shrinks_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = random_psd(6, &mut rng);
        let h = random_psd(6, &mut rng);
        let alpha = fit_kls(&k, &h, &[1.0, -1.0, 1.0], &config(1e12, 1e-2)).unwrap();
        assert!(alpha.norm() < 1e-10);
    }

    #[test]
    fn matches_gradient_descent_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 8;
        let k = random_psd(n, &mut rng) + DMatrix::identity(n, n) * 0.5;
        let h = random_psd(n, &mut rng);
        let y = [1.0, -1.0, 1.0, 1.0];
        let cfg = config(0.1, 0.05);
        let alpha = fit_kls(&k, &h, &y, &cfg).unwrap();

        // Independent oracle: plain gradient descent on the objective, written
        // out term by term.
        let khk = &k * &h * &k;
        let mut jk = DMatrix::zeros(n, n);
        jk.rows_mut(0, 4).copy_from(&k.rows(0, 4));
        let mut ytarget = DVector::zeros(n);
        ytarget.rows_mut(0, 4).copy_from_slice(&y);
        let hess =
            (&k * cfg.gamma_a + &khk * cfg.gamma_i + jk.transpose() * &jk * (1.0 / 4.0)) * 2.0;
        let step = 1.0 / crate::linalg::symmetric_spectral_norm(&hess);
        let mut x = DVector::zeros(n);
        for _ in 0..200_000 {
            let g = &k * &x * (2.0 * cfg.gamma_a) + &khk * &x * (2.0 * cfg.gamma_i)
                - jk.transpose() * (&ytarget - &jk * &x) * (2.0 / 4.0);
            x -= g * step;
        }
        // Compare the fitted functions: α itself is not unique when K is singular.
        let diff = (&k * &alpha - &k * &x).amax();
        assert!(diff < 1e-6, "{diff}");
        let obj_gap = kls_objective(&k, &h, &y, &x, &cfg) - kls_objective(&k, &h, &y, &alpha, &cfg);
        assert!(obj_gap > -1e-12);
    }

    #[test]
    fn residual_and_gradient_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10;
        let k = random_psd(n, &mut rng);
        let h = random_psd(n, &mut rng);
        let y = [1.0, -1.0, -1.0];
        let cfg = config(0.01, 0.1);
        let alpha = fit_kls(&k, &h, &y, &cfg).unwrap();
        let a = system_matrix(&k, &h, 3, &cfg);
        let rhs = padded_targets(n, &y);
        assert!((&a * &alpha - &rhs).norm() <= 1e-8 * rhs.norm());
        let g = kls_gradient(&k, &h, &y, &alpha, &cfg);
        assert!(g.norm() <= 1e-6 * (1.0 + rhs.norm()));
    }

    #[test]
    fn rejects_bad_shapes() {
        let k = DMatrix::identity(3, 3);
        let h = DMatrix::identity(2, 2);
        assert!(fit_kls(&k, &h, &[1.0], &config(1.0, 0.0)).is_err());
        assert!(fit_kls(&k, &DMatrix::zeros(3, 3), &[], &config(1.0, 0.0)).is_err());
    }
}
