//! Training pipeline from a dataset to a serializable model, and prediction.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::alternating::{fit_prepared, FitOptions, PreparedViews, TraceStep};
use super::ObjectiveConfig;
use crate::dataset::{hex, MultiviewDataset, ViewScaler};
use crate::kernels::{concat_views, gram, FittedKernel, KernelSpec};
use crate::manifold::{build_manifold, ManifoldKind, ManifoldMatrix, ManifoldSpec};
use crate::simplex::SimplexWeights;
use crate::{Error, Result};

const MODEL_FORMAT: u32 = 1;

/// How the input views are turned into the views the classifier sees.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", content = "view", rename_all = "snake_case")]
pub enum ViewMode {
    /// Every view, with θ and β learned.
    Multiview,
    /// Every view, with θ and β held uniform.
    Average,
    /// One named view.
    Single(String),
    /// All views concatenated into one.
    Concat,
}

/// Kernel per view, falling back to a default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelSpecs {
    pub default: KernelSpec,
    pub per_view: BTreeMap<String, KernelSpec>,
}

impl KernelSpecs {
    pub fn uniform(spec: KernelSpec) -> Self {
        KernelSpecs {
            default: spec,
            per_view: BTreeMap::new(),
        }
    }

    pub fn for_view(&self, name: &str) -> &KernelSpec {
        self.per_view.get(name).unwrap_or(&self.default)
    }
}

/// Everything [`train`] needs besides the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub mode: ViewMode,
    pub kernels: KernelSpecs,
    /// `None` drops the manifold term (γ_I is treated as 0).
    pub manifold: Option<ManifoldSpec>,
    pub standardize: bool,
    pub objective: ObjectiveConfig,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            mode: ViewMode::Multiview,
            kernels: KernelSpecs::default(),
            manifold: Some(ManifoldSpec::default()),
            standardize: false,
            objective: ObjectiveConfig::default(),
        }
    }
}

impl TrainSpec {
    /// The objective actually optimized: γ_I is zero without a manifold.
    pub fn effective_objective(&self) -> ObjectiveConfig {
        let mut config = self.objective.clone();
        if self.manifold.is_none() {
            config.gamma_i = 0.0;
        }
        config
    }

    pub fn fit_options(&self) -> FitOptions {
        match self.mode {
            ViewMode::Average => FitOptions::fixed_weights(),
            _ => FitOptions::default(),
        }
    }
}

/// Input view transform recorded at training time and replayed on new data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocess {
    pub input_names: Vec<String>,
    pub input_widths: Vec<usize>,
    pub mode: ViewMode,
    pub scalers: Option<Vec<ViewScaler>>,
}

impl Preprocess {
    /// Fit the transform on `dataset` and return the transformed dataset.
    pub fn fit(
        dataset: &MultiviewDataset,
        mode: &ViewMode,
        standardize: bool,
    ) -> Result<(Preprocess, MultiviewDataset)> {
        let shaped = match mode {
            ViewMode::Multiview | ViewMode::Average => dataset.clone(),
            ViewMode::Single(name) => {
                let index = dataset
                    .view_index(name)
                    .ok_or_else(|| Error::Dataset(format!("unknown view '{name}'")))?;
                dataset.select_views(&[index])?
            }
            ViewMode::Concat => concat_views(dataset)?,
        };
        let (scalers, shaped) = if standardize {
            let scalers: Vec<ViewScaler> = shaped.views().iter().map(ViewScaler::fit).collect();
            let views = shaped
                .views()
                .iter()
                .zip(&scalers)
                .map(|(v, s)| s.apply(v))
                .collect::<Result<Vec<_>>>()?;
            let scaled = shaped.with_views(
                views,
                shaped.view_names().to_vec(),
                shaped.columns().to_vec(),
            )?;
            (Some(scalers), scaled)
        } else {
            (None, shaped)
        };
        let pre = Preprocess {
            input_names: dataset.view_names().to_vec(),
            input_widths: dataset.views().iter().map(|v| v.ncols()).collect(),
            mode: mode.clone(),
            scalers,
        };
        Ok((pre, shaped))
    }

    /// Apply the recorded transform to views given in the training input order.
    pub fn apply(&self, views: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        if views.len() != self.input_names.len() {
            return Err(Error::Model(format!(
                "expected {} views, got {}",
                self.input_names.len(),
                views.len()
            )));
        }
        for ((name, &width), view) in self.input_names.iter().zip(&self.input_widths).zip(views) {
            if view.ncols() != width {
                return Err(Error::Model(format!(
                    "view '{name}' has {} columns, the model expects {width}",
                    view.ncols()
                )));
            }
        }
        let rows = views[0].nrows();
        if views.iter().any(|v| v.nrows() != rows) {
            return Err(Error::Model("views have different row counts".into()));
        }
        let shaped = match &self.mode {
            ViewMode::Multiview | ViewMode::Average => views.to_vec(),
            ViewMode::Single(name) => {
                let index = self
                    .input_names
                    .iter()
                    .position(|n| n == name)
                    .expect("validated at fit");
                vec![views[index].clone()]
            }
            ViewMode::Concat => {
                let width = self.input_widths.iter().sum();
                let mut out = DMatrix::zeros(rows, width);
                let mut offset = 0;
                for v in views {
                    out.columns_mut(offset, v.ncols()).copy_from(v);
                    offset += v.ncols();
                }
                vec![out]
            }
        };
        match &self.scalers {
            Some(scalers) => shaped
                .iter()
                .zip(scalers)
                .map(|(v, s)| s.apply(v))
                .collect(),
            None => Ok(shaped),
        }
    }
}

/// Kernels and regularizers for every view of `dataset`, plus the resolved
/// kernel parameters needed to evaluate cross-kernels later.
pub fn prepare_views(
    dataset: &MultiviewDataset,
    kernels: &KernelSpecs,
    manifold: Option<&ManifoldSpec>,
) -> Result<(PreparedViews, Vec<FittedKernel>)> {
    let names = dataset.view_names();
    let grams = dataset
        .views()
        .par_iter()
        .zip(names.par_iter())
        .map(|(view, name)| gram(view, kernels.for_view(name)))
        .collect::<Result<Vec<_>>>()?;
    let fitted = grams
        .iter()
        .map(|k| k.fitted().cloned().expect("gram records its fitted spec"))
        .collect();
    let manifolds = match manifold {
        Some(spec) => dataset
            .views()
            .par_iter()
            .map(|view| build_manifold(view, spec))
            .collect::<Result<Vec<_>>>()?,
        None => vec![ManifoldMatrix::zeros(dataset.n(), ManifoldKind::Hessian)],
    };
    Ok((PreparedViews::new(grams, manifolds)?, fitted))
}

/// Row-major copy of a feature matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewData {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ViewData {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            data.extend(m.row(i).iter());
        }
        ViewData {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// A fitted classifier `f(x) = Σ_i α_i Σ_k θ_k K_k(x_i, x)` with everything
/// needed to score new data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: u32,
    pub spec: TrainSpec,
    pub preprocess: Preprocess,
    pub view_names: Vec<String>,
    pub kernels: Vec<FittedKernel>,
    /// Transformed training views in α order (labeled first).
    pub train_views: Vec<ViewData>,
    /// Original dataset index of each training example.
    pub order: Vec<usize>,
    pub n_labeled: usize,
    pub alpha: Vec<f64>,
    pub theta: SimplexWeights,
    pub beta: SimplexWeights,
    pub trace: Vec<TraceStep>,
    pub rounds: usize,
    pub converged: bool,
    /// Content hash of the training dataset.
    pub dataset_hash: String,
    /// Hash of the fields above, checked on load.
    pub fingerprint: String,
}

impl TrainedModel {
    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn objective_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|s| s.objective).collect()
    }

    fn compute_fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(MODEL_FORMAT.to_le_bytes());
        hasher.update(self.dataset_hash.as_bytes());
        for (name, view) in self.view_names.iter().zip(&self.train_views) {
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
            hasher.update((view.rows as u64).to_le_bytes());
            hasher.update((view.cols as u64).to_le_bytes());
            for x in &view.data {
                hasher.update(x.to_le_bytes());
            }
        }
        for x in self
            .alpha
            .iter()
            .chain(self.theta.as_slice())
            .chain(self.beta.as_slice())
        {
            hasher.update(x.to_le_bytes());
        }
        hex(&hasher.finalize())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: TrainedModel = serde_json::from_str(text)
            .map_err(|e| Error::Model(format!("malformed model: {e}")))?;
        if model.format != MODEL_FORMAT {
            return Err(Error::Model(format!(
                "unsupported model format {}",
                model.format
            )));
        }
        let n = model.alpha.len();
        if model.train_views.len() != model.kernels.len()
            || model.view_names.len() != model.kernels.len()
            || model.theta.len() != model.kernels.len()
            || model
                .train_views
                .iter()
                .any(|v| v.rows != n || v.data.len() != v.rows * v.cols)
        {
            return Err(Error::Model("inconsistent model shapes".into()));
        }
        if model.compute_fingerprint() != model.fingerprint {
            return Err(Error::Model(
                "fingerprint mismatch: model file was altered".into(),
            ));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Fit a model on `dataset` (labels as masked, labeled examples first).
pub fn train(dataset: &MultiviewDataset, spec: &TrainSpec) -> Result<TrainedModel> {
    if dataset.n_labeled() == 0 {
        return Err(Error::Solver("no labeled examples".into()));
    }
    for kernel in std::iter::once(&spec.kernels.default).chain(spec.kernels.per_view.values()) {
        kernel.validate()?;
    }
    let (preprocess, shaped) = Preprocess::fit(dataset, &spec.mode, spec.standardize)?;
    let (views, kernels) = prepare_views(&shaped, &spec.kernels, spec.manifold.as_ref())?;
    let config = spec.effective_objective();
    let fit = fit_prepared(
        &views,
        &shaped.labeled_targets(),
        &config,
        spec.fit_options(),
    )?;
    let mut model = TrainedModel {
        format: MODEL_FORMAT,
        spec: spec.clone(),
        preprocess,
        view_names: shaped.view_names().to_vec(),
        kernels,
        train_views: shaped.views().iter().map(ViewData::from_matrix).collect(),
        order: shaped.order().to_vec(),
        n_labeled: shaped.n_labeled(),
        alpha: fit.alpha.iter().copied().collect(),
        theta: fit.theta,
        beta: fit.beta,
        trace: fit.trace,
        rounds: fit.rounds,
        converged: fit.converged,
        dataset_hash: dataset.content_hash(),
        fingerprint: String::new(),
    };
    model.fingerprint = model.compute_fingerprint();
    Ok(model)
}

/// Multiview fit with learned θ and β, one kernel spec per view in dataset
/// order.
pub fn fit_alternating(
    dataset: &MultiviewDataset,
    kernel_specs: &[KernelSpec],
    manifold: &ManifoldSpec,
    config: &ObjectiveConfig,
) -> Result<TrainedModel> {
    if kernel_specs.len() != dataset.n_views() {
        return Err(Error::Solver(format!(
            "{} kernel specs for {} views",
            kernel_specs.len(),
            dataset.n_views()
        )));
    }
    let per_view = dataset
        .view_names()
        .iter()
        .cloned()
        .zip(kernel_specs.iter().cloned())
        .collect();
    let spec = TrainSpec {
        mode: ViewMode::Multiview,
        kernels: KernelSpecs {
            default: KernelSpec::default(),
            per_view,
        },
        manifold: Some(manifold.clone()),
        standardize: false,
        objective: config.clone(),
    };
    train(dataset, &spec)
}

/// Scores `Σ_k θ_k K_k(test, train) α` for views given in the training input
/// order. Views with zero weight are never evaluated.
pub fn predict(model: &TrainedModel, views: &[DMatrix<f64>]) -> Result<DVector<f64>> {
    let shaped = model.preprocess.apply(views)?;
    let alpha = DVector::from_column_slice(&model.alpha);
    let rows = shaped[0].nrows();
    let mut scores = DVector::zeros(rows);
    for (k, view) in shaped.iter().enumerate() {
        let weight = model.theta[k];
        if weight == 0.0 {
            continue;
        }
        let cross = model.kernels[k].cross(view, &model.train_views[k].to_matrix())?;
        scores += (cross * &alpha) * weight;
    }
    Ok(scores)
}
