//! Multiview datasets: per-view feature matrices sharing one label vector.
//!
//! Examples are always stored labeled-first. Whatever order the caller or the
//! files use, construction stably moves every labeled example in front of the
//! unlabeled ones and records the permutation in [`MultiviewDataset::order`],
//! so the solvers can assume that examples `0..l` carry the labels.

mod io;
mod mask;
mod synthetic;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub use io::{load_dataset, save_dataset};
pub use mask::{split_labels, LabelMask};
pub use synthetic::{make_synthetic, GeneratorKind, GeneratorSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
    Unlabeled,
}

impl Label {
    /// File encoding: `+1`, `-1`, `0`.
    pub fn from_code(code: i64) -> Result<Self> {
        match code {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            0 => Ok(Label::Unlabeled),
            other => Err(Error::Dataset(format!(
                "label {other} is not one of +1, -1, 0"
            ))),
        }
    }

    pub fn code(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
            Label::Unlabeled => 0,
        }
    }

    pub fn sign(self) -> Option<f64> {
        match self {
            Label::Positive => Some(1.0),
            Label::Negative => Some(-1.0),
            Label::Unlabeled => None,
        }
    }

    pub fn is_labeled(self) -> bool {
        self != Label::Unlabeled
    }
}

/// Feature matrices for `n = l + u` examples seen through several views.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiviewDataset {
    views: Vec<DMatrix<f64>>,
    view_names: Vec<String>,
    columns: Vec<Vec<String>>,
    labels: Vec<Label>,
    truth: Vec<Label>,
    order: Vec<usize>,
    n_labeled: usize,
    latent: Option<DMatrix<f64>>,
}

impl MultiviewDataset {
    /// Build a dataset whose ground truth equals `labels`. Column names default
    /// to `f0, f1, ...`.
    pub fn new(
        views: Vec<DMatrix<f64>>,
        view_names: Vec<String>,
        labels: Vec<Label>,
    ) -> Result<Self> {
        let columns = views
            .iter()
            .map(|v| (0..v.ncols()).map(|j| format!("f{j}")).collect())
            .collect();
        Self::from_parts(views, view_names, columns, labels.clone(), labels, None)
    }

    pub(crate) fn from_parts(
        views: Vec<DMatrix<f64>>,
        view_names: Vec<String>,
        columns: Vec<Vec<String>>,
        labels: Vec<Label>,
        truth: Vec<Label>,
        latent: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = labels.len();
        if views.is_empty() {
            return Err(Error::Dataset("at least one view is required".into()));
        }
        if view_names.len() != views.len() || columns.len() != views.len() {
            return Err(Error::Dataset(format!(
                "{} views but {} view names",
                views.len(),
                view_names.len()
            )));
        }
        if truth.len() != n {
            return Err(Error::Dataset(
                "ground truth length differs from labels".into(),
            ));
        }
        for (name, (view, cols)) in view_names.iter().zip(views.iter().zip(&columns)) {
            if view.nrows() != n {
                return Err(Error::Dataset(format!(
                    "row count mismatch: {} labels but view {name} has {} rows",
                    n,
                    view.nrows()
                )));
            }
            if view.ncols() == 0 || view.nrows() == 0 {
                return Err(Error::Dataset(format!("view {name} is empty")));
            }
            if cols.len() != view.ncols() {
                return Err(Error::Dataset(format!(
                    "view {name} has {} columns but {} column names",
                    view.ncols(),
                    cols.len()
                )));
            }
            if view.iter().any(|x| !x.is_finite()) {
                return Err(Error::Dataset(format!("view {name} has non-finite values")));
            }
        }
        if let Some(z) = &latent {
            if z.nrows() != n {
                return Err(Error::Dataset(
                    "latent coordinates have the wrong row count".into(),
                ));
            }
        }
        let mut sorted = view_names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != view_names.len() {
            return Err(Error::Dataset("view names must be unique".into()));
        }

        let identity: Vec<usize> = (0..n).collect();
        let dataset = MultiviewDataset {
            views,
            view_names,
            columns,
            labels,
            truth,
            order: identity,
            n_labeled: 0,
            latent,
        };
        Ok(dataset.labeled_first())
    }

    /// Stable reorder putting labeled examples first.
    fn labeled_first(self) -> Self {
        let perm: Vec<usize> = (0..self.labels.len())
            .filter(|&i| self.labels[i].is_labeled())
            .chain((0..self.labels.len()).filter(|&i| !self.labels[i].is_labeled()))
            .collect();
        let n_labeled = self.labels.iter().filter(|l| l.is_labeled()).count();
        self.reordered(&perm, n_labeled)
    }

    fn reordered(self, perm: &[usize], n_labeled: usize) -> Self {
        let pick = |m: &DMatrix<f64>| crate::linalg::permute_rows(m, perm);
        MultiviewDataset {
            views: self.views.iter().map(pick).collect(),
            labels: perm.iter().map(|&i| self.labels[i]).collect(),
            truth: perm.iter().map(|&i| self.truth[i]).collect(),
            order: perm.iter().map(|&i| self.order[i]).collect(),
            latent: self.latent.as_ref().map(pick),
            n_labeled,
            view_names: self.view_names,
            columns: self.columns,
        }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn n_labeled(&self) -> usize {
        self.n_labeled
    }

    pub fn n_unlabeled(&self) -> usize {
        self.n() - self.n_labeled
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn views(&self) -> &[DMatrix<f64>] {
        &self.views
    }

    pub fn view(&self, index: usize) -> &DMatrix<f64> {
        &self.views[index]
    }

    pub fn view_names(&self) -> &[String] {
        &self.view_names
    }

    pub fn view_index(&self, name: &str) -> Option<usize> {
        self.view_names.iter().position(|v| v == name)
    }

    pub fn columns(&self) -> &[Vec<String>] {
        &self.columns
    }

    /// Training labels (unlabeled examples included), labeled-first.
    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Labels known for evaluation. Equal to [`labels`](Self::labels) unless a
    /// mask has hidden some of them.
    pub fn ground_truth(&self) -> &[Label] {
        &self.truth
    }

    /// `order()[i]` is the index example `i` had in the source it was built from.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Latent coordinates, only present on generated data.
    pub fn latent(&self) -> Option<&DMatrix<f64>> {
        self.latent.as_ref()
    }

    /// `±1` targets of the first `l` examples.
    pub fn labeled_targets(&self) -> Vec<f64> {
        self.labels[..self.n_labeled]
            .iter()
            .map(|l| l.sign().expect("labeled prefix"))
            .collect()
    }

    /// Hide every ground-truth label outside `mask` and reorder labeled-first.
    /// Mask indices refer to the current example positions.
    pub fn apply_mask(&self, mask: &LabelMask) -> Result<Self> {
        let n = self.n();
        let mut labels = vec![Label::Unlabeled; n];
        for &i in &mask.labeled_indices {
            if i >= n {
                return Err(Error::Dataset(format!(
                    "mask index {i} out of range for n = {n}"
                )));
            }
            if !self.truth[i].is_labeled() {
                return Err(Error::Dataset(format!(
                    "mask index {i} has no ground-truth label"
                )));
            }
            labels[i] = self.truth[i];
        }
        let masked = MultiviewDataset {
            labels,
            n_labeled: 0,
            ..self.clone()
        };
        Ok(masked.labeled_first())
    }

    /// The examples at `indices`, in that order, as a new dataset. The order
    /// record restarts at the subset positions.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n()) {
            return Err(Error::Dataset(format!("subset index {bad} out of range")));
        }
        let pick = |m: &DMatrix<f64>| crate::linalg::permute_rows(m, indices);
        Self::from_parts(
            self.views.iter().map(pick).collect(),
            self.view_names.clone(),
            self.columns.clone(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            indices.iter().map(|&i| self.truth[i]).collect(),
            self.latent.as_ref().map(pick),
        )
    }

    /// Same examples with only the views at `indices`.
    pub fn select_views(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() || indices.iter().any(|&v| v >= self.n_views()) {
            return Err(Error::Dataset("view selection out of range".into()));
        }
        Ok(MultiviewDataset {
            views: indices.iter().map(|&v| self.views[v].clone()).collect(),
            view_names: indices
                .iter()
                .map(|&v| self.view_names[v].clone())
                .collect(),
            columns: indices.iter().map(|&v| self.columns[v].clone()).collect(),
            ..self.clone()
        })
    }

    /// Replace the feature matrices, keeping labels and ordering. Used by view
    /// transforms such as concatenation and standardization.
    pub fn with_views(
        &self,
        views: Vec<DMatrix<f64>>,
        view_names: Vec<String>,
        columns: Vec<Vec<String>>,
    ) -> Result<Self> {
        let mut out = Self::from_parts(
            views,
            view_names,
            columns,
            self.labels.clone(),
            self.truth.clone(),
            self.latent.clone(),
        )?;
        // Already labeled-first, so `from_parts` left the order as identity.
        out.order = self.order.clone();
        Ok(out)
    }

    /// Human-readable warnings about the label set. Neither case is an error:
    /// unlabeled-only data is still valid input to manifold construction.
    pub fn diagnostics(&self) -> Vec<String> {
        let pos = self
            .labels
            .iter()
            .filter(|l| **l == Label::Positive)
            .count();
        let neg = self
            .labels
            .iter()
            .filter(|l| **l == Label::Negative)
            .count();
        let mut out = Vec::new();
        if pos + neg == 0 {
            out.push("all examples are unlabeled".to_string());
        } else if pos == 0 || neg == 0 {
            out.push("labeled examples contain a single class".to_string());
        }
        out
    }

    /// SHA-256 over shapes, view names, feature bits and labels.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n() as u64).to_le_bytes());
        for (name, view) in self.view_names.iter().zip(&self.views) {
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
            hasher.update((view.ncols() as u64).to_le_bytes());
            for i in 0..view.nrows() {
                for j in 0..view.ncols() {
                    hasher.update(view[(i, j)].to_le_bytes());
                }
            }
        }
        for label in &self.labels {
            hasher.update([label.code() as u8]);
        }
        hex(&hasher.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Per-view feature standardization fitted on training data and reapplied at
/// prediction time. Constant columns keep unit scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ViewScaler {
    pub fn fit(view: &DMatrix<f64>) -> Self {
        let n = view.nrows() as f64;
        let mut mean = Vec::with_capacity(view.ncols());
        let mut scale = Vec::with_capacity(view.ncols());
        for col in view.column_iter() {
            let mu = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
            mean.push(mu);
            scale.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        ViewScaler { mean, scale }
    }

    pub fn apply(&self, view: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if view.ncols() != self.mean.len() {
            return Err(Error::Dataset(format!(
                "scaler expects {} columns, got {}",
                self.mean.len(),
                view.ncols()
            )));
        }
        Ok(DMatrix::from_fn(view.nrows(), view.ncols(), |i, j| {
            (view[(i, j)] - self.mean[j]) / self.scale[j]
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(labels: &[i64]) -> MultiviewDataset {
        let n = labels.len();
        let a = DMatrix::from_fn(n, 2, |i, j| (i * 10 + j) as f64);
        let b = DMatrix::from_fn(n, 1, |i, _| i as f64);
        let labels = labels
            .iter()
            .map(|&c| Label::from_code(c).unwrap())
            .collect();
        MultiviewDataset::new(vec![a, b], vec!["a".into(), "b".into()], labels).unwrap()
    }

    #[test]
    fn labeled_examples_move_to_front() {
        let ds = toy(&[0, 1, -1, 0]);
        assert_eq!(ds.n_labeled(), 2);
        assert_eq!(ds.n_unlabeled(), 2);
        assert_eq!(ds.order(), &[1, 2, 0, 3]);
        assert_eq!(ds.view(0)[(0, 0)], 10.0);
        assert_eq!(ds.labeled_targets(), vec![1.0, -1.0]);
    }

    #[test]
    fn mask_hides_labels_and_composes_order() {
        let ds = toy(&[1, -1, 1, -1]);
        let mask = LabelMask {
            labeled_indices: vec![3],
            fraction: 0.25,
            seed: 0,
        };
        let masked = ds.apply_mask(&mask).unwrap();
        assert_eq!(masked.n_labeled(), 1);
        assert_eq!(masked.order()[0], 3);
        assert_eq!(masked.ground_truth()[0], Label::Negative);
        assert_eq!(masked.ground_truth().len(), 4);
        assert!(masked.labels()[1..].iter().all(|l| !l.is_labeled()));
    }

    #[test]
    fn rejects_mismatched_rows() {
        let a = DMatrix::zeros(3, 2);
        let err =
            MultiviewDataset::new(vec![a], vec!["a".into()], vec![Label::Positive; 4]).unwrap_err();
        assert!(err.to_string().contains("row count mismatch"));
    }

    #[test]
    fn diagnostics_flag_degenerate_label_sets() {
        assert_eq!(
            toy(&[0, 0]).diagnostics(),
            vec!["all examples are unlabeled"]
        );
        assert_eq!(toy(&[1, 0]).diagnostics().len(), 1);
        assert!(toy(&[1, -1]).diagnostics().is_empty());
    }

    #[test]
    fn scaler_standardizes_columns() {
        let v = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        let s = ViewScaler::fit(&v);
        let z = s.apply(&v).unwrap();
        assert!((z.column(0).sum()).abs() < 1e-12);
        assert!(z.column(1).iter().all(|x| *x == 0.0));
    }
}
