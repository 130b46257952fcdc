//! Independent oracles and random instances shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
    &a * a.transpose()
}

pub fn random_simplex(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..len)
        .map(|_| -rng.random::<f64>().max(1e-300).ln())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

pub fn labels(l: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut y: Vec<f64> = (0..l)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    y[0] = 1.0;
    if l > 1 {
        y[1] = -1.0;
    }
    y
}

/// Smallest and largest eigenvalue by full symmetric eigendecomposition.
pub fn eigen_range(a: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(a.clone()).eigenvalues;
    (eig.min(), eig.max())
}

/// `min eig ≥ −tol · max(1, |max eig|)`.
pub fn is_psd(a: &DMatrix<f64>, tol: f64) -> bool {
    let (lo, hi) = eigen_range(a);
    lo >= -tol * hi.abs().max(1.0)
}

/// Smoothed hinge SVM objective written out term by term.
pub fn smoothed_svm_objective(
    k: &DMatrix<f64>,
    h: &DMatrix<f64>,
    y: &[f64],
    alpha: &DVector<f64>,
    gamma_a: f64,
    gamma_i: f64,
    mu: f64,
) -> f64 {
    let f = k * alpha;
    let mut loss = 0.0;
    for i in 0..y.len() {
        let scale = k.row(i).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let margin = 1.0 - y[i] * f[i];
        let u = (margin / (mu * scale)).clamp(0.0, 1.0);
        loss += u * margin - 0.5 * mu * scale * u * u;
    }
    gamma_a * alpha.dot(&f) + gamma_i * f.dot(&(h * &f)) + loss / y.len() as f64
}

/// Long run of plain first-order descent on the smoothed objective with step
/// `1/L`; the problem is unconstrained, so the projection is the identity.
/// Returns the best value seen.
#[allow(clippy::too_many_arguments)]
pub fn subgradient_oracle(
    k: &DMatrix<f64>,
    h: &DMatrix<f64>,
    y: &[f64],
    gamma_a: f64,
    gamma_i: f64,
    mu: f64,
    lipschitz: f64,
    iterations: usize,
) -> f64 {
    let n = k.nrows();
    let mut alpha = DVector::zeros(n);
    let mut best = smoothed_svm_objective(k, h, y, &alpha, gamma_a, gamma_i, mu);
    for _ in 0..iterations {
        let f = k * &alpha;
        let mut dual = DVector::zeros(n);
        for i in 0..y.len() {
            let scale = k.row(i).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let u = ((1.0 - y[i] * f[i]) / (mu * scale)).clamp(0.0, 1.0);
            dual[i] = y[i] * u;
        }
        let grad = (k * &alpha) * (2.0 * gamma_a) + k * (h * &f) * (2.0 * gamma_i)
            - (k * dual) / y.len() as f64;
        alpha -= grad / lipschitz;
        best = best.min(smoothed_svm_objective(
            k, h, y, &alpha, gamma_a, gamma_i, mu,
        ));
    }
    best
}

/// 11-point interpolated AP by sweeping every score threshold.
pub fn brute_force_ap(scores: &[f64], truth: &[bool]) -> f64 {
    let positives = truth.iter().filter(|&&t| t).count() as f64;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut points = Vec::new();
    for cut in 1..=scores.len() {
        let hits = order[..cut].iter().filter(|&&i| truth[i]).count() as f64;
        points.push((hits / positives, hits / cut as f64));
    }
    let mut total = 0.0;
    for step in 0..=10 {
        let t = step as f64 / 10.0;
        let mut best: f64 = 0.0;
        for &(r, p) in &points {
            if r >= t {
                best = best.max(p);
            }
        }
        total += best;
    }
    total / 11.0
}
