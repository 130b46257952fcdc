//! Per-view Gram matrices and their convex combination `K = Σ_k θ_k K_k`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::MultiviewDataset;
use crate::linalg::{self, squared_distance};
use crate::{Error, Result, SimplexWeights};

/// Relative eigenvalue tolerance below which a matrix is not accepted as PSD.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Relative asymmetry accepted before a matrix is rejected as non-symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Negative eigenvalues smaller than this (relative) are eigensolver noise and
/// are left alone rather than repaired.
const ROUNDOFF_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    Linear,
    /// `exp(−‖x − y‖² / (2σ²))`. A missing bandwidth is filled in with the
    /// median pairwise distance of the training view.
    GaussianRbf {
        bandwidth: Option<f64>,
    },
    /// `(xᵀy + offset)^degree`.
    Polynomial {
        degree: u32,
        offset: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Rescale the Gram matrix to trace `n`.
    #[serde(default)]
    pub trace_normalize: bool,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            family: KernelFamily::GaussianRbf { bandwidth: None },
            trace_normalize: false,
        }
    }
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Self {
        KernelSpec {
            family: KernelFamily::GaussianRbf {
                bandwidth: Some(bandwidth),
            },
            trace_normalize: false,
        }
    }

    pub fn linear() -> Self {
        KernelSpec {
            family: KernelFamily::Linear,
            trace_normalize: false,
        }
    }

    pub fn polynomial(degree: u32, offset: f64) -> Self {
        KernelSpec {
            family: KernelFamily::Polynomial { degree, offset },
            trace_normalize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            KernelFamily::Linear => Ok(()),
            KernelFamily::GaussianRbf { bandwidth: None } => Ok(()),
            KernelFamily::GaussianRbf { bandwidth: Some(s) } if s > 0.0 && s.is_finite() => Ok(()),
            KernelFamily::GaussianRbf { bandwidth: Some(s) } => Err(Error::Kernel(format!(
                "gaussian bandwidth must be positive, got {s}"
            ))),
            KernelFamily::Polynomial { degree, offset } => {
                if degree >= 1 && offset >= 0.0 && offset.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Kernel(format!(
                        "polynomial kernel needs degree >= 1 and offset >= 0, got {degree}, {offset}"
                    )))
                }
            }
        }
    }

    /// Fill in data-dependent parameters from the training view.
    pub fn resolve(&self, view: &DMatrix<f64>) -> Result<KernelSpec> {
        self.validate()?;
        let mut out = self.clone();
        if let KernelFamily::GaussianRbf { bandwidth: None } = self.family {
            out.family = KernelFamily::GaussianRbf {
                bandwidth: Some(median_pairwise_distance(view)),
            };
        }
        Ok(out)
    }

    /// Kernel value between two feature rows of a resolved spec.
    pub fn evaluate(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KernelFamily::GaussianRbf { bandwidth } => {
                let s = bandwidth.expect("resolved gaussian kernel");
                (-squared_distance(a, b) / (2.0 * s * s)).exp()
            }
            KernelFamily::Polynomial { degree, offset } => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                (dot + offset).powi(degree as i32)
            }
        }
    }
}

/// Median Euclidean distance over all distinct pairs of rows. Falls back to 1
/// when there are no pairs or every pair coincides.
pub fn median_pairwise_distance(view: &DMatrix<f64>) -> f64 {
    let rows = linalg::rows_of(view);
    let mut d: Vec<f64> = (0..rows.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let rows = &rows;
            ((i + 1)..rows.len()).map(move |j| squared_distance(&rows[i], &rows[j]).sqrt())
        })
        .collect();
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let median = d[d.len() / 2];
    if median > 0.0 {
        median
    } else {
        let positive: Vec<f64> = d.into_iter().filter(|x| *x > 0.0).collect();
        if positive.is_empty() {
            1.0
        } else {
            positive[positive.len() / 2]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum KernelSource {
    /// Built from one feature matrix.
    View,
    /// Convex combination of view kernels.
    Combined(SimplexWeights),
}

/// A kernel spec with its data-dependent parameters fixed, plus the trace
/// scaling applied at training time. Enough to evaluate cross-kernels later.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedKernel {
    pub spec: KernelSpec,
    pub scale: f64,
}

impl FittedKernel {
    /// `out[(i, j)] = scale · k(left_i, right_j)`.
    pub fn cross(&self, left: &DMatrix<f64>, right: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if left.ncols() != right.ncols() {
            return Err(Error::Kernel(format!(
                "feature width mismatch: {} vs {}",
                left.ncols(),
                right.ncols()
            )));
        }
        check_finite(left)?;
        let l = linalg::rows_of(left);
        let r = linalg::rows_of(right);
        let values: Vec<Vec<f64>> = l
            .par_iter()
            .map(|a| {
                r.iter()
                    .map(|b| self.scale * self.spec.evaluate(a, b))
                    .collect()
            })
            .collect();
        Ok(DMatrix::from_fn(l.len(), r.len(), |i, j| values[i][j]))
    }
}

/// Symmetric PSD `n × n` kernel matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GramKernel {
    matrix: DMatrix<f64>,
    source: KernelSource,
    fitted: Option<FittedKernel>,
}

impl GramKernel {
    /// Validate symmetry and positive semi-definiteness, repairing eigenvalue
    /// noise in `(−tol, 0)`.
    pub fn new(matrix: DMatrix<f64>, source: KernelSource) -> Result<Self> {
        let matrix = validate_psd(matrix, PSD_TOLERANCE).map_err(|e| match e {
            Error::Kernel(msg) => Error::Kernel(msg),
            other => Error::Kernel(other.to_string()),
        })?;
        Ok(GramKernel {
            matrix,
            source,
            fitted: None,
        })
    }

    pub(crate) fn from_trusted(matrix: DMatrix<f64>, source: KernelSource) -> Self {
        GramKernel {
            matrix,
            source,
            fitted: None,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn source(&self) -> &KernelSource {
        &self.source
    }

    /// Resolved spec for kernels built by [`gram`]; `None` for combinations.
    pub fn fitted(&self) -> Option<&FittedKernel> {
        self.fitted.as_ref()
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Same kernel on reordered examples.
    pub fn permuted(&self, order: &[usize]) -> GramKernel {
        GramKernel {
            matrix: linalg::permute_symmetric(&self.matrix, order),
            source: self.source.clone(),
            fitted: self.fitted.clone(),
        }
    }
}

fn check_finite(view: &DMatrix<f64>) -> Result<()> {
    if view.iter().any(|x| !x.is_finite()) {
        Err(Error::Kernel("feature matrix has non-finite values".into()))
    } else {
        Ok(())
    }
}

/// Gram matrix of one view. Rows are computed in parallel; every entry is
/// evaluated independently so the result does not depend on the worker count.
pub fn gram(view: &DMatrix<f64>, spec: &KernelSpec) -> Result<GramKernel> {
    if view.nrows() == 0 {
        return Err(Error::Kernel("view has no rows".into()));
    }
    check_finite(view)?;
    let spec = spec.resolve(view)?;
    let rows = linalg::rows_of(view);
    let n = rows.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| spec.evaluate(&rows[i], &rows[j])).collect())
        .collect();
    let mut matrix = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (offset, &value) in row.iter().enumerate() {
            matrix[(i, i + offset)] = value;
            matrix[(i + offset, i)] = value;
        }
    }
    let scale = if spec.trace_normalize {
        let trace = matrix.trace();
        if trace <= 0.0 {
            return Err(Error::Kernel(
                "cannot trace-normalize a zero-trace kernel".into(),
            ));
        }
        n as f64 / trace
    } else {
        1.0
    };
    if scale != 1.0 {
        matrix *= scale;
    }
    let mut kernel = GramKernel::new(matrix, KernelSource::View)?;
    kernel.fitted = Some(FittedKernel { spec, scale });
    Ok(kernel)
}

/// Result of [`check_psd`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsdReport {
    pub is_psd: bool,
    pub min_eig: f64,
    pub max_eig: f64,
}

/// Extreme eigenvalues of a symmetric matrix and whether
/// `min_eig ≥ −tol · max(1, |max_eig|)`.
pub fn check_psd(matrix: &DMatrix<f64>, tol: f64) -> Result<PsdReport> {
    if !matrix.is_square() {
        return Err(Error::Kernel("matrix is not square".into()));
    }
    let asym = linalg::asymmetry(matrix);
    if asym > SYMMETRY_TOLERANCE * linalg::max_abs(matrix).max(1.0) {
        return Err(Error::Kernel(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let (min_eig, max_eig) = linalg::eigen_extremes(matrix);
    Ok(PsdReport {
        is_psd: min_eig >= -tol * max_eig.abs().max(1.0),
        min_eig,
        max_eig,
    })
}

/// Symmetrize, then accept, repair or reject by the smallest eigenvalue:
/// roundoff-level negatives are kept, negatives inside `(−tol, 0)` (relative)
/// are clipped to zero, anything lower is an error.
pub(crate) fn validate_psd(mut matrix: DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let report = check_psd(&matrix, tol)?;
    linalg::symmetrize(&mut matrix);
    let scale = report.max_eig.abs().max(1.0);
    if report.min_eig >= -ROUNDOFF_FLOOR * scale {
        Ok(matrix)
    } else if report.is_psd {
        Ok(linalg::clip_negative_eigenvalues(&matrix))
    } else {
        Err(Error::Kernel(format!(
            "matrix is not positive semi-definite (min eigenvalue {:e}, max {:e})",
            report.min_eig, report.max_eig
        )))
    }
}

/// `Σ_k w_k A_k` for equally sized square matrices.
pub(crate) fn weighted_sum(mats: &[&DMatrix<f64>], weights: &[f64]) -> DMatrix<f64> {
    let n = mats[0].nrows();
    let mut out = DMatrix::<f64>::zeros(n, n);
    for (m, &w) in mats.iter().zip(weights) {
        if w != 0.0 {
            out.zip_apply(*m, |acc, x| *acc += w * x);
        }
    }
    out
}

pub(crate) fn check_combination(
    sizes: &[usize],
    weights: usize,
) -> std::result::Result<(), String> {
    if sizes.is_empty() {
        return Err("nothing to combine".into());
    }
    if sizes.iter().any(|&n| n != sizes[0]) {
        return Err(format!("dimension mismatch: sizes {sizes:?}"));
    }
    if weights != sizes.len() {
        return Err(format!("{} weights for {} matrices", weights, sizes.len()));
    }
    Ok(())
}

/// `K = Σ_k θ_k K_k`. Nonnegative combinations of PSD matrices stay PSD.
pub fn combine_kernels(kernels: &[GramKernel], theta: &SimplexWeights) -> Result<GramKernel> {
    let sizes: Vec<usize> = kernels.iter().map(GramKernel::n).collect();
    check_combination(&sizes, theta.len()).map_err(Error::Kernel)?;
    let mats: Vec<&DMatrix<f64>> = kernels.iter().map(GramKernel::matrix).collect();
    Ok(GramKernel::from_trusted(
        weighted_sum(&mats, theta.as_slice()),
        KernelSource::Combined(theta.clone()),
    ))
}

/// Uniform-weight combination.
pub fn average_kernel(kernels: &[GramKernel]) -> Result<GramKernel> {
    if kernels.is_empty() {
        return Err(Error::Kernel("nothing to combine".into()));
    }
    combine_kernels(kernels, &SimplexWeights::uniform(kernels.len()))
}

/// A single-view dataset whose one view is every view laid side by side.
pub fn concat_views(dataset: &MultiviewDataset) -> Result<MultiviewDataset> {
    if dataset.n_views() == 1 {
        return Ok(dataset.clone());
    }
    let n = dataset.n();
    let width: usize = dataset.views().iter().map(|v| v.ncols()).sum();
    let mut out = DMatrix::zeros(n, width);
    let mut columns = Vec::with_capacity(width);
    let mut offset = 0;
    for (v, view) in dataset.views().iter().enumerate() {
        out.columns_mut(offset, view.ncols()).copy_from(view);
        let name = &dataset.view_names()[v];
        columns.extend(dataset.columns()[v].iter().map(|c| format!("{name}.{c}")));
        offset += view.ncols();
    }
    dataset.with_views(vec![out], vec!["concat".into()], vec![columns])
}
