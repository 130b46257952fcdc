//! Desk-scale synthetic data with known structure.

use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Label, MultiviewDataset};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GeneratorKind {
    /// Two noisy nonlinear 2-D/3-D views of the same two-moons latent.
    TwoMoonsViews,
    /// Points on an `m`-dimensional affine subspace of `R^d`.
    LinearManifold { m: usize, d: usize },
    /// One linearly separable view plus one class-independent noise view.
    NoisyRedundant,
}

impl GeneratorKind {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorKind::TwoMoonsViews => "two_moons_views",
            GeneratorKind::LinearManifold { .. } => "linear_manifold",
            GeneratorKind::NoisyRedundant => "noisy_redundant",
        }
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    /// Parses the generator name; `linear_manifold` starts at `m = 2, d = 5`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_moons_views" => Ok(GeneratorKind::TwoMoonsViews),
            "linear_manifold" => Ok(GeneratorKind::LinearManifold { m: 2, d: 5 }),
            "noisy_redundant" => Ok(GeneratorKind::NoisyRedundant),
            other => Err(Error::Dataset(format!("unknown generator {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub noise: f64,
    pub seed: u64,
}

/// Generate a fully labeled dataset. Masking is a separate step
/// ([`split_labels`](super::split_labels)).
pub fn make_synthetic(spec: &GeneratorSpec) -> Result<MultiviewDataset> {
    if spec.n == 0 {
        return Err(Error::Dataset("generator needs n > 0".into()));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::Dataset(format!(
            "noise level {} is invalid",
            spec.noise
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.kind {
        GeneratorKind::TwoMoonsViews => two_moons(spec.n, spec.noise, &mut rng),
        GeneratorKind::LinearManifold { m, d } => {
            linear_manifold(spec.n, m, d, spec.noise, &mut rng)
        }
        GeneratorKind::NoisyRedundant => noisy_redundant(spec.n, spec.noise, &mut rng),
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn class_of(i: usize) -> Label {
    if i.is_multiple_of(2) {
        Label::Positive
    } else {
        Label::Negative
    }
}

fn columns(prefix: &str, d: usize) -> Vec<String> {
    (0..d).map(|j| format!("{prefix}{j}")).collect()
}

fn two_moons(n: usize, noise: f64, rng: &mut ChaCha8Rng) -> Result<MultiviewDataset> {
    let mut a = DMatrix::zeros(n, 2);
    let mut b = DMatrix::zeros(n, 3);
    let mut latent = DMatrix::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    let (sin, cos) = (0.6f64.sin(), 0.6f64.cos());
    for i in 0..n {
        let label = class_of(i);
        let t = PI * rng.random::<f64>();
        let (px, py) = match label {
            Label::Positive => (t.cos(), t.sin()),
            _ => (1.0 - t.cos(), 0.5 - t.sin()),
        };
        latent[(i, 0)] = px;
        latent[(i, 1)] = py;
        a[(i, 0)] = px + noise * gauss(rng);
        a[(i, 1)] = py + noise * gauss(rng);
        // Second view: rotated, rescaled and lifted onto a curved sheet.
        let (rx, ry) = (cos * px - sin * py, sin * px + cos * py);
        b[(i, 0)] = 1.5 * rx + noise * gauss(rng);
        b[(i, 1)] = 0.8 * ry + noise * gauss(rng);
        b[(i, 2)] = 0.5 * (px * px + py * py) + noise * gauss(rng);
        labels.push(label);
    }
    MultiviewDataset::from_parts(
        vec![a, b],
        vec!["moons_a".into(), "moons_b".into()],
        vec![columns("a", 2), columns("b", 3)],
        labels.clone(),
        labels,
        Some(latent),
    )
}

fn linear_manifold(
    n: usize,
    m: usize,
    d: usize,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> Result<MultiviewDataset> {
    if m == 0 || m > d {
        return Err(Error::Dataset(format!(
            "linear_manifold needs 1 <= m <= d, got m={m}, d={d}"
        )));
    }
    let basis = DMatrix::from_fn(d, m, |_, _| gauss(rng)).qr().q();
    let offset: Vec<f64> = (0..d).map(|_| gauss(rng)).collect();
    let latent = DMatrix::from_fn(n, m, |_, _| 2.0 * rng.random::<f64>() - 1.0);
    let mut x = &latent * basis.transpose();
    for i in 0..n {
        for j in 0..d {
            x[(i, j)] += offset[j] + noise * gauss(rng);
        }
    }
    let labels: Vec<Label> = (0..n)
        .map(|i| {
            if latent[(i, 0)] >= 0.0 {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect();
    MultiviewDataset::from_parts(
        vec![x],
        vec!["ambient".into()],
        vec![columns("x", d)],
        labels.clone(),
        labels,
        Some(latent),
    )
}

fn noisy_redundant(n: usize, noise: f64, rng: &mut ChaCha8Rng) -> Result<MultiviewDataset> {
    const NOISE_DIM: usize = 5;
    let mut informative = DMatrix::zeros(n, 2);
    let mut junk = DMatrix::zeros(n, NOISE_DIM);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = class_of(i);
        let y = label.sign().expect("generated labels are signed");
        // The first coordinate keeps a gap around zero, so the view stays
        // linearly separable whatever the noise level.
        informative[(i, 0)] = y * (0.25 + rng.random::<f64>() + noise * gauss(rng).abs());
        informative[(i, 1)] = gauss(rng);
        for j in 0..NOISE_DIM {
            junk[(i, j)] = (1.0 + noise) * gauss(rng);
        }
        labels.push(label);
    }
    MultiviewDataset::from_parts(
        vec![informative, junk],
        vec!["informative".into(), "noise".into()],
        vec![columns("s", 2), columns("r", NOISE_DIM)],
        labels.clone(),
        labels,
        None,
    )
}
