//! Manifold regularizers built from a k-nearest-neighbor graph: the heat-kernel
//! graph Laplacian and the local Hessian energy.
//!
//! The Hessian energy of example `i` comes from its neighbors only. The
//! neighbors are centered at `x_i`, their top-`m` left singular vectors give
//! tangent coordinates, and the design matrix `[1, U_1..U_m, U_a·U_b (a ≤ b)]`
//! is orthonormalized column by column. The last `m(m+1)/2` orthonormal columns
//! span the part of a neighborhood function that no affine function can
//! explain, and their projector is scatter-added into the global matrix. So
//! constants and functions linear in tangent coordinates carry zero energy.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernels::{self, PSD_TOLERANCE};
use crate::linalg::{self, squared_distance};
use crate::{Error, Result, SimplexWeights};

/// Neighborhood size used when none is configured: `min(100, n − 1)`.
pub fn default_k(n: usize) -> usize {
    100.min(n.saturating_sub(1))
}

/// Smallest neighborhood that can fit a full local quadratic in `m` dimensions.
pub fn min_neighbors_for(m: usize) -> usize {
    1 + m + m * (m + 1) / 2
}

/// Relative residual norm below which Gram-Schmidt declares a column dependent.
const RANK_TOLERANCE: f64 = 1e-10;

/// Examples per parallel batch of local computations. Fixed, so the
/// accumulation order never depends on the worker count.
const BATCH: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct NeighborGraph {
    pub k: usize,
    /// `neighbors[i]` holds the `k` nearest other examples, nearest first.
    pub neighbors: Vec<Vec<usize>>,
    /// Euclidean distances matching `neighbors`.
    pub distances: Vec<Vec<f64>>,
}

impl NeighborGraph {
    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    /// Median neighbor distance; the default Laplacian bandwidth.
    pub fn median_distance(&self) -> f64 {
        let mut d: Vec<f64> = self
            .distances
            .iter()
            .flatten()
            .copied()
            .filter(|x| *x > 0.0)
            .collect();
        if d.is_empty() {
            return 1.0;
        }
        d.sort_by(f64::total_cmp);
        d[d.len() / 2]
    }
}

/// Exact Euclidean k-NN by exhaustive search. Ties go to the lower index.
pub fn knn(view: &DMatrix<f64>, k: usize) -> Result<NeighborGraph> {
    let n = view.nrows();
    if k == 0 || k + 1 > n {
        return Err(Error::Manifold(format!(
            "k = {k} outside 1..={}",
            n.saturating_sub(1)
        )));
    }
    let rows = linalg::rows_of(view);
    let lists: Vec<(Vec<usize>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (squared_distance(&rows[i], &rows[j]), j))
                .collect();
            cand.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(k);
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.into_iter().map(|(d, j)| (j, d.sqrt())).unzip()
        })
        .collect();
    let (neighbors, distances) = lists.into_iter().unzip();
    Ok(NeighborGraph {
        k,
        neighbors,
        distances,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Laplacian,
    Hessian,
}

impl std::fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ManifoldKind::Laplacian => "laplacian",
            ManifoldKind::Hessian => "hessian",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ManifoldSource {
    View,
    Combined(SimplexWeights),
}

/// Symmetric PSD `n × n` regularizer `M`, penalizing `fᵀ M f`.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldMatrix {
    matrix: DMatrix<f64>,
    kind: ManifoldKind,
    source: ManifoldSource,
    intrinsic_dim: Option<usize>,
}

impl ManifoldMatrix {
    /// Wrap an externally built matrix after checking symmetry and PSD.
    pub fn new(matrix: DMatrix<f64>, kind: ManifoldKind) -> Result<Self> {
        let matrix = kernels::validate_psd(matrix, PSD_TOLERANCE)
            .map_err(|e| Error::Manifold(strip_stage(e)))?;
        Ok(ManifoldMatrix {
            matrix,
            kind,
            source: ManifoldSource::View,
            intrinsic_dim: None,
        })
    }

    /// All-zero regularizer of size `n`, used when no manifold term is wanted.
    pub fn zeros(n: usize, kind: ManifoldKind) -> Self {
        ManifoldMatrix {
            matrix: DMatrix::zeros(n, n),
            kind,
            source: ManifoldSource::View,
            intrinsic_dim: None,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn source(&self) -> &ManifoldSource {
        &self.source
    }

    pub fn intrinsic_dim(&self) -> Option<usize> {
        self.intrinsic_dim
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// `fᵀ M f`.
    pub fn energy(&self, f: &DVector<f64>) -> f64 {
        linalg::quadratic_form(&self.matrix, f)
    }

    pub fn permuted(&self, order: &[usize]) -> ManifoldMatrix {
        ManifoldMatrix {
            matrix: linalg::permute_symmetric(&self.matrix, order),
            kind: self.kind,
            source: self.source.clone(),
            intrinsic_dim: self.intrinsic_dim,
        }
    }
}

fn strip_stage(e: Error) -> String {
    match e {
        Error::Kernel(msg) => msg,
        other => other.to_string(),
    }
}

/// `L = D − W` with heat-kernel weights on the symmetrized k-NN graph: an edge
/// joins `i` and `j` when either is among the other's neighbors.
pub fn laplacian(
    view: &DMatrix<f64>,
    graph: &NeighborGraph,
    bandwidth: f64,
) -> Result<ManifoldMatrix> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::Manifold(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let n = view.nrows();
    if graph.n() != n {
        return Err(Error::Manifold("graph and view sizes differ".into()));
    }
    let rows = linalg::rows_of(view);
    let mut w = DMatrix::<f64>::zeros(n, n);
    for (i, list) in graph.neighbors.iter().enumerate() {
        for &j in list {
            let weight =
                (-squared_distance(&rows[i], &rows[j]) / (2.0 * bandwidth * bandwidth)).exp();
            w[(i, j)] = weight;
            w[(j, i)] = weight;
        }
    }
    let mut l = -w;
    for i in 0..n {
        let degree: f64 = (0..n).filter(|&j| j != i).map(|j| -l[(i, j)]).sum();
        l[(i, i)] = degree;
    }
    let matrix =
        kernels::validate_psd(l, PSD_TOLERANCE).map_err(|e| Error::Manifold(strip_stage(e)))?;
    Ok(ManifoldMatrix {
        matrix,
        kind: ManifoldKind::Laplacian,
        source: ManifoldSource::View,
        intrinsic_dim: None,
    })
}

/// Diagnostics from [`hessian_energy_with_report`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HessianReport {
    /// Examples whose local design matrix was rank deficient; they add nothing.
    pub dropped: Vec<usize>,
}

/// Hessian energy matrix of one view with intrinsic dimension `m`.
pub fn hessian_energy(
    view: &DMatrix<f64>,
    graph: &NeighborGraph,
    m: usize,
) -> Result<ManifoldMatrix> {
    hessian_energy_with_report(view, graph, m).map(|(h, _)| h)
}

pub fn hessian_energy_with_report(
    view: &DMatrix<f64>,
    graph: &NeighborGraph,
    m: usize,
) -> Result<(ManifoldMatrix, HessianReport)> {
    let n = view.nrows();
    if m == 0 {
        return Err(Error::Manifold(
            "intrinsic dimension must be at least 1".into(),
        ));
    }
    if m > view.ncols() {
        return Err(Error::Manifold(format!(
            "intrinsic dimension {m} exceeds feature dimension {}",
            view.ncols()
        )));
    }
    if graph.n() != n {
        return Err(Error::Manifold("graph and view sizes differ".into()));
    }
    let needed = min_neighbors_for(m);
    if graph.k < needed {
        return Err(Error::Manifold(format!(
            "k = {} is too small for m = {m}; need k >= {needed}",
            graph.k
        )));
    }

    let rows = linalg::rows_of(view);
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut report = HessianReport::default();
    let indices: Vec<usize> = (0..n).collect();
    for batch in indices.chunks(BATCH) {
        let blocks: Vec<Option<DMatrix<f64>>> = batch
            .par_iter()
            .map(|&i| {
                local_hessian_basis(&rows, i, &graph.neighbors[i], m).map(|b| &b * b.transpose())
            })
            .collect();
        for (&i, block) in batch.iter().zip(blocks) {
            let Some(block) = block else {
                report.dropped.push(i);
                continue;
            };
            let nbrs = &graph.neighbors[i];
            for (a, &ga) in nbrs.iter().enumerate() {
                for (b, &gb) in nbrs.iter().enumerate() {
                    h[(ga, gb)] += block[(a, b)];
                }
            }
        }
    }
    if !report.dropped.is_empty() {
        warn!(
            "hessian energy: {} of {n} neighborhoods are degenerate and were dropped",
            report.dropped.len()
        );
    }
    linalg::symmetrize(&mut h);
    let matrix =
        kernels::validate_psd(h, PSD_TOLERANCE).map_err(|e| Error::Manifold(strip_stage(e)))?;
    Ok((
        ManifoldMatrix {
            matrix,
            kind: ManifoldKind::Hessian,
            source: ManifoldSource::View,
            intrinsic_dim: Some(m),
        },
        report,
    ))
}

/// Neighbors of `i` centered at `x_i`, one row per neighbor.
fn centered_neighbors(rows: &[Vec<f64>], i: usize, neighbors: &[usize]) -> DMatrix<f64> {
    let d = rows[i].len();
    DMatrix::from_fn(neighbors.len(), d, |a, c| {
        rows[neighbors[a]][c] - rows[i][c]
    })
}

/// Top `m` left singular directions of `x`, taken from the eigenvectors of
/// `xᵀx` as `x v / ‖x v‖`. A direction with no energy comes back as zero.
fn tangent_coordinates(x: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(x.transpose() * x);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut u = DMatrix::<f64>::zeros(x.nrows(), m);
    for (c, &o) in order.iter().take(m).enumerate() {
        let col = x * eig.eigenvectors.column(o);
        let norm = col.norm();
        if norm > 0.0 {
            u.column_mut(c).copy_from(&(col / norm));
        }
    }
    u
}

/// `k × m(m+1)/2` orthonormal basis of the quadratic part of the local fit, or
/// `None` when the design matrix is rank deficient.
fn local_hessian_basis(
    rows: &[Vec<f64>],
    i: usize,
    neighbors: &[usize],
    m: usize,
) -> Option<DMatrix<f64>> {
    let k = neighbors.len();
    let u = tangent_coordinates(&centered_neighbors(rows, i, neighbors), m);
    let q = m * (m + 1) / 2;

    let mut design = DMatrix::<f64>::zeros(k, 1 + m + q);
    design.column_mut(0).fill(1.0);
    for a in 0..m {
        design.column_mut(1 + a).copy_from(&u.column(a));
    }
    let mut col = 1 + m;
    for a in 0..m {
        for b in a..m {
            let product = u.column(a).component_mul(&u.column(b));
            design.column_mut(col).copy_from(&product);
            col += 1;
        }
    }

    modified_gram_schmidt(&mut design)?;
    Some(design.columns(1 + m, q).into_owned())
}

/// In-place modified Gram-Schmidt with one re-orthogonalization pass. Fails
/// when a column loses all but `RANK_TOLERANCE` of its norm.
pub(crate) fn modified_gram_schmidt(a: &mut DMatrix<f64>) -> Option<()> {
    for c in 0..a.ncols() {
        let original = a.column(c).norm();
        if original == 0.0 {
            return None;
        }
        for _pass in 0..2 {
            for p in 0..c {
                let proj = a.column(p).dot(&a.column(c));
                let basis = a.column(p).into_owned();
                a.column_mut(c).axpy(-proj, &basis, 1.0);
            }
        }
        let norm = a.column(c).norm();
        if norm < RANK_TOLERANCE * original {
            return None;
        }
        a.column_mut(c).unscale_mut(norm);
    }
    Some(())
}

/// `Σ_j β_j M_j` over regularizers of the same kind.
pub fn combine_manifolds(mats: &[ManifoldMatrix], beta: &SimplexWeights) -> Result<ManifoldMatrix> {
    let sizes: Vec<usize> = mats.iter().map(ManifoldMatrix::n).collect();
    kernels::check_combination(&sizes, beta.len()).map_err(Error::Manifold)?;
    let kind = mats[0].kind;
    if mats.iter().any(|m| m.kind != kind) {
        return Err(Error::Manifold(
            "cannot combine Laplacian and Hessian matrices".into(),
        ));
    }
    let refs: Vec<&DMatrix<f64>> = mats.iter().map(ManifoldMatrix::matrix).collect();
    Ok(ManifoldMatrix {
        matrix: kernels::weighted_sum(&refs, beta.as_slice()),
        kind,
        source: ManifoldSource::Combined(beta.clone()),
        intrinsic_dim: None,
    })
}

/// Median over examples of the smallest `m` whose top-`m` local singular values
/// hold at least `threshold` of the squared spectral mass.
pub fn estimate_intrinsic_dim(
    view: &DMatrix<f64>,
    graph: &NeighborGraph,
    threshold: f64,
) -> Result<usize> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Manifold(format!(
            "threshold {threshold} not in (0, 1)"
        )));
    }
    let rows = linalg::rows_of(view);
    let mut dims: Vec<usize> = (0..view.nrows())
        .into_par_iter()
        .filter_map(|i| {
            let s = centered_neighbors(&rows, i, &graph.neighbors[i]).singular_values();
            let mut mass: Vec<f64> = s.iter().map(|x| x * x).collect();
            mass.sort_by(|a, b| b.total_cmp(a));
            let total: f64 = mass.iter().sum();
            if total <= 0.0 {
                return None;
            }
            let mut acc = 0.0;
            for (idx, v) in mass.iter().enumerate() {
                acc += v;
                if acc >= threshold * total {
                    return Some(idx + 1);
                }
            }
            Some(mass.len())
        })
        .collect();
    if dims.is_empty() {
        return Ok(1);
    }
    dims.sort_unstable();
    Ok(dims[(dims.len() - 1) / 2])
}

/// How to build one view's regularizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    /// Neighbor count; `None` means [`default_k`].
    pub k: Option<usize>,
    /// Intrinsic dimension for the Hessian; `None` estimates it per view.
    pub m: Option<usize>,
    /// Spectral mass threshold for the estimate.
    pub threshold: f64,
    /// Laplacian heat-kernel bandwidth; `None` uses the median neighbor distance.
    pub bandwidth: Option<f64>,
}

impl Default for ManifoldSpec {
    fn default() -> Self {
        ManifoldSpec {
            kind: ManifoldKind::Hessian,
            k: None,
            m: None,
            threshold: 0.95,
            bandwidth: None,
        }
    }
}

impl ManifoldSpec {
    pub fn with_kind(kind: ManifoldKind) -> Self {
        ManifoldSpec {
            kind,
            ..ManifoldSpec::default()
        }
    }
}

/// Build the regularizer for one view. An estimated `m` is capped so that the
/// neighborhood can still fit a local quadratic.
pub fn build_manifold(view: &DMatrix<f64>, spec: &ManifoldSpec) -> Result<ManifoldMatrix> {
    let n = view.nrows();
    if n < 2 {
        return Err(Error::Manifold("need at least 2 examples".into()));
    }
    let k = spec.k.unwrap_or_else(|| default_k(n));
    let graph = knn(view, k)?;
    match spec.kind {
        ManifoldKind::Laplacian => {
            let bandwidth = match spec.bandwidth {
                Some(b) => b,
                None => {
                    let median = graph.median_distance();
                    if median > 0.0 {
                        median
                    } else {
                        1.0
                    }
                }
            };
            laplacian(view, &graph, bandwidth)
        }
        ManifoldKind::Hessian => {
            let m = match spec.m {
                Some(m) => m,
                None => {
                    let estimate = estimate_intrinsic_dim(view, &graph, spec.threshold)?;
                    let mut m = estimate.clamp(1, view.ncols());
                    while m > 1 && min_neighbors_for(m) > k {
                        m -= 1;
                    }
                    if m != estimate {
                        warn!("intrinsic dimension estimate {estimate} capped to {m} for k = {k}");
                    }
                    m
                }
            };
            hessian_energy(view, &graph, m)
        }
    }
}
