//! Label-fraction sweeps: repeated masking, training and held-out AP.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ap::{average_precision, mean_ap, RankedPredictions};
use super::method::MethodTag;
use crate::dataset::{split_labels, Label, MultiviewDataset};
use crate::kernels::{gram, GramKernel};
use crate::manifold::{build_manifold, ManifoldKind, ManifoldMatrix, ManifoldSpec};
use crate::solvers::{
    fit_prepared, FitOptions, KernelSpecs, ObjectiveConfig, PreparedViews, Preprocess, ViewMode,
};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub methods: Vec<MethodTag>,
    pub fractions: Vec<f64>,
    pub repeats: usize,
    pub base_seed: u64,
    pub kernels: KernelSpecs,
    /// Neighborhood settings; the kind comes from each method.
    pub manifold: ManifoldSpec,
    pub standardize: bool,
    /// Trade-offs and stopping rules; the loss comes from each method.
    pub objective: ObjectiveConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            methods: Vec::new(),
            fractions: vec![0.1, 0.2, 0.3, 0.5, 0.7, 0.9],
            repeats: 10,
            base_seed: 0,
            kernels: KernelSpecs::default(),
            manifold: ManifoldSpec::default(),
            standardize: false,
            objective: ObjectiveConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassAp {
    pub class: String,
    pub ap: f64,
}

/// Outcome of one (method, fraction, repeat) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub fraction: f64,
    pub repeat: usize,
    pub seed: u64,
    pub n_labeled: usize,
    pub classes: Vec<ClassAp>,
    pub map: f64,
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
    pub seconds: f64,
}

/// Split off `test_count` examples chosen by a seeded shuffle. Both parts keep
/// their ground-truth labels.
pub fn holdout_split(
    dataset: &MultiviewDataset,
    test_count: usize,
    seed: u64,
) -> Result<(MultiviewDataset, MultiviewDataset)> {
    let n = dataset.n();
    if test_count == 0 || test_count >= n {
        return Err(Error::Eval(format!(
            "cannot hold out {test_count} of {n} examples"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = indices[..test_count].to_vec();
    let mut train = indices[test_count..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((dataset.subset(&train)?, dataset.subset(&test)?))
}

/// Binary tasks are scored as two classes: `positive` ranked by `f`, and
/// `negative` ranked by `−f`. Examples without ground truth are skipped.
pub fn class_aps(scores: &[f64], truth: &[Label]) -> Result<(Vec<ClassAp>, f64)> {
    if scores.len() != truth.len() {
        return Err(Error::Eval("scores and labels differ in length".into()));
    }
    let known: Vec<usize> = (0..truth.len())
        .filter(|&i| truth[i].is_labeled())
        .collect();
    let mut classes = Vec::new();
    for (name, label, sign) in [
        ("positive", Label::Positive, 1.0),
        ("negative", Label::Negative, -1.0),
    ] {
        let preds = RankedPredictions::new(
            known.iter().map(|&i| sign * scores[i]).collect(),
            known.iter().map(|&i| truth[i] == label).collect(),
        )?;
        classes.push(ClassAp {
            class: name.to_string(),
            ap: average_precision(&preds)?,
        });
    }
    let map = mean_ap(&classes.iter().map(|c| c.ap).collect::<Vec<_>>())?;
    Ok((classes, map))
}

/// Per view-shape data that every cell reuses.
struct Shape {
    kernels: Vec<GramKernel>,
    /// Test × train cross-kernel per view.
    cross: Vec<DMatrix<f64>>,
    views: Vec<DMatrix<f64>>,
}

fn shape_key(mode: &ViewMode) -> String {
    match mode {
        ViewMode::Multiview | ViewMode::Average => "all".to_string(),
        ViewMode::Concat => "concat".to_string(),
        ViewMode::Single(v) => format!("view:{v}"),
    }
}

/// Kernels, cross-kernels and regularizers computed once for a train/test pair.
struct Evaluator<'a> {
    train: &'a MultiviewDataset,
    test_truth: Vec<Label>,
    position_of: BTreeMap<usize, usize>,
    shapes: BTreeMap<String, Shape>,
    manifolds: BTreeMap<(String, ManifoldKind), Vec<ManifoldMatrix>>,
    config: SweepConfig,
}

impl<'a> Evaluator<'a> {
    fn new(
        train: &'a MultiviewDataset,
        test: &MultiviewDataset,
        config: &SweepConfig,
    ) -> Result<Self> {
        if train.view_names() != test.view_names() {
            return Err(Error::Eval("train and test views differ".into()));
        }
        let mut shapes = BTreeMap::new();
        let mut manifolds = BTreeMap::new();
        for method in &config.methods {
            let key = shape_key(&method.mode);
            if !shapes.contains_key(&key) {
                let (pre, shaped) = Preprocess::fit(train, &method.mode, config.standardize)?;
                let test_views = pre.apply(test.views())?;
                let kernels = shaped
                    .views()
                    .iter()
                    .zip(shaped.view_names())
                    .map(|(v, name)| gram(v, config.kernels.for_view(name)))
                    .collect::<Result<Vec<_>>>()?;
                let cross = kernels
                    .iter()
                    .zip(&test_views)
                    .zip(shaped.views())
                    .map(|((k, t), v)| k.fitted().expect("view kernel").cross(t, v))
                    .collect::<Result<Vec<_>>>()?;
                shapes.insert(
                    key.clone(),
                    Shape {
                        kernels,
                        cross,
                        views: shaped.views().to_vec(),
                    },
                );
            }
            if let Some(kind) = method.regularizer {
                if let Entry::Vacant(slot) = manifolds.entry((key.clone(), kind)) {
                    let spec = ManifoldSpec {
                        kind,
                        ..config.manifold.clone()
                    };
                    let built = shapes[&key]
                        .views
                        .par_iter()
                        .map(|v| build_manifold(v, &spec))
                        .collect::<Result<Vec<_>>>()?;
                    slot.insert(built);
                }
            }
        }
        Ok(Evaluator {
            train,
            test_truth: test.ground_truth().to_vec(),
            position_of: train
                .order()
                .iter()
                .enumerate()
                .map(|(p, &o)| (o, p))
                .collect(),
            shapes,
            manifolds,
            config: config.clone(),
        })
    }

    fn run_cell(
        &self,
        method: &MethodTag,
        fraction: f64,
        repeat: usize,
        objective: &ObjectiveConfig,
    ) -> Result<EvalReport> {
        let start = Instant::now();
        let seed = self.config.base_seed + repeat as u64;
        let mask = split_labels(self.train, fraction, seed)?;
        let masked = self.train.apply_mask(&mask)?;
        let perm: Vec<usize> = masked.order().iter().map(|o| self.position_of[o]).collect();

        let key = shape_key(&method.mode);
        let shape = &self.shapes[&key];
        let n = self.train.n();
        let mut config = objective.clone();
        config.loss = method.solver.loss();
        let manifolds = match method.regularizer {
            Some(kind) => self.manifolds[&(key, kind)]
                .iter()
                .map(|m| m.permuted(&perm))
                .collect(),
            None => {
                config.gamma_i = 0.0;
                vec![ManifoldMatrix::zeros(n, ManifoldKind::Hessian)]
            }
        };
        let views = PreparedViews::new(
            shape.kernels.iter().map(|k| k.permuted(&perm)).collect(),
            manifolds,
        )?;
        let options = match method.mode {
            ViewMode::Average => FitOptions::fixed_weights(),
            _ => FitOptions::default(),
        };
        let fit = fit_prepared(&views, &masked.labeled_targets(), &config, options)?;

        let mut alpha = DVector::zeros(n);
        for (i, &p) in perm.iter().enumerate() {
            alpha[p] = fit.alpha[i];
        }
        let mut scores = DVector::zeros(self.test_truth.len());
        for (k, cross) in shape.cross.iter().enumerate() {
            if fit.theta[k] != 0.0 {
                scores += (cross * &alpha) * fit.theta[k];
            }
        }
        let (classes, map) = class_aps(scores.as_slice(), &self.test_truth)?;
        Ok(EvalReport {
            method: method.to_string(),
            fraction,
            repeat,
            seed,
            n_labeled: masked.n_labeled(),
            classes,
            map,
            theta: fit.theta.into_vec(),
            beta: fit.beta.into_vec(),
            seconds: start.elapsed().as_secs_f64(),
        })
    }

    fn cells(&self) -> Vec<(MethodTag, f64, usize)> {
        let mut cells = Vec::new();
        for method in &self.config.methods {
            for &fraction in &self.config.fractions {
                for repeat in 0..self.config.repeats {
                    cells.push((method.clone(), fraction, repeat));
                }
            }
        }
        cells
    }
}

fn sort_reports(reports: &mut [EvalReport]) {
    reports.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.fraction.total_cmp(&b.fraction))
            .then(a.repeat.cmp(&b.repeat))
    });
}

fn check_config(config: &SweepConfig) -> Result<()> {
    if config.methods.is_empty() || config.fractions.is_empty() || config.repeats == 0 {
        return Err(Error::Eval(
            "sweep needs at least one method, fraction and repeat".into(),
        ));
    }
    if let Some(f) = config.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::Eval(format!("label fraction {f} not in (0, 1]")));
    }
    config.objective.validate()
}

/// Train every (method, fraction, repeat) cell on `train` with labels masked
/// by seed `base_seed + repeat`, and score it on `test`. Reports are sorted by
/// method, fraction and repeat.
pub fn run_sweep(
    train: &MultiviewDataset,
    test: &MultiviewDataset,
    config: &SweepConfig,
) -> Result<Vec<EvalReport>> {
    check_config(config)?;
    let evaluator = Evaluator::new(train, test, config)?;
    let mut reports = evaluator
        .cells()
        .par_iter()
        .map(|(method, fraction, repeat)| {
            evaluator.run_cell(method, *fraction, *repeat, &config.objective)
        })
        .collect::<Result<Vec<_>>>()?;
    sort_reports(&mut reports);
    Ok(reports)
}

/// One row per (cell, class): `method,fraction,repeat,class,ap,map,seconds`.
pub fn write_reports_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| Error::Eval(format!("writing reports: {e}"));
    writer
        .write_record([
            "method", "fraction", "repeat", "class", "ap", "map", "seconds",
        ])
        .map_err(fail)?;
    for r in reports {
        for c in &r.classes {
            writer
                .write_record([
                    r.method.clone(),
                    r.fraction.to_string(),
                    r.repeat.to_string(),
                    c.class.clone(),
                    c.ap.to_string(),
                    r.map.to_string(),
                    format!("{:.6}", r.seconds),
                ])
                .map_err(fail)?;
        }
    }
    writer
        .flush()
        .map_err(|e| Error::Eval(format!("writing reports: {e}")))
}

/// mAP statistics over the repeats of one (method, fraction).
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub fraction: f64,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub std_dev: f64,
    pub std_err: f64,
}

pub fn summarize(reports: &[EvalReport]) -> Vec<SummaryRow> {
    let mut groups: Vec<(String, f64, Vec<f64>)> = Vec::new();
    let mut sorted = reports.to_vec();
    sort_reports(&mut sorted);
    for r in &sorted {
        match groups.last_mut() {
            Some((m, f, values)) if *m == r.method && *f == r.fraction => values.push(r.map),
            _ => groups.push((r.method.clone(), r.fraction, vec![r.map])),
        }
    }
    groups
        .into_iter()
        .map(|(method, fraction, values)| {
            let runs = values.len();
            let mean = values.iter().sum::<f64>() / runs as f64;
            let std_dev = if runs > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (runs - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                method,
                fraction,
                runs,
                mean,
                std_dev,
                std_err: std_dev / (runs as f64).sqrt(),
            }
        })
        .collect()
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.method.len())
        .max()
        .unwrap_or(6)
        .max(6);
    let mut out = format!(
        "{:<width$}  {:>8}  {:>4}  {:>8}  {:>8}  {:>8}\n",
        "method", "fraction", "runs", "mAP", "std", "stderr"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<width$}  {:>8.3}  {:>4}  {:>8.4}  {:>8.4}  {:>8.4}\n",
            r.method, r.fraction, r.runs, r.mean, r.std_dev, r.std_err
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneConfig {
    /// Methods, repeats, seed and fixed settings. `fractions` is ignored.
    pub sweep: SweepConfig,
    /// Candidate exponents `e` for `γ = 10^e`.
    pub exponents: Vec<i32>,
    /// Label fraction used while tuning.
    pub fraction: f64,
    /// Share of the training set held out for validation.
    pub validation_share: f64,
}

impl TuneConfig {
    pub fn new(sweep: SweepConfig) -> Self {
        TuneConfig {
            sweep,
            exponents: (-10..=10).collect(),
            fraction: 0.1,
            validation_share: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneCandidate {
    pub gamma_a: f64,
    pub gamma_i: f64,
    /// Mean validation mAP over repeats; NaN when a fit failed.
    pub mean_map: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneResult {
    pub method: String,
    pub candidates: Vec<TuneCandidate>,
    pub best: TuneCandidate,
}

/// Grid search over `γ_A, γ_I ∈ {10^e}` per method on a validation split of
/// `train`. The best mean validation mAP wins; ties keep the earlier grid
/// point (smaller `γ_A`, then smaller `γ_I`). Methods without a manifold term
/// only search `γ_A`.
pub fn tune(train: &MultiviewDataset, config: &TuneConfig) -> Result<Vec<TuneResult>> {
    if config.exponents.is_empty() {
        return Err(Error::Eval("empty tuning grid".into()));
    }
    if !(config.validation_share > 0.0 && config.validation_share < 1.0) {
        return Err(Error::Eval("validation share must be in (0, 1)".into()));
    }
    let mut sweep = config.sweep.clone();
    sweep.fractions = vec![config.fraction];
    check_config(&sweep)?;
    let held = ((train.n() as f64) * config.validation_share).round() as usize;
    let (fit_set, validation) = holdout_split(train, held, sweep.base_seed)?;
    let evaluator = Evaluator::new(&fit_set, &validation, &sweep)?;

    let mut results = Vec::new();
    for method in &sweep.methods {
        let gamma_i_exps: Vec<Option<i32>> = match method.regularizer {
            Some(_) => config.exponents.iter().map(|&e| Some(e)).collect(),
            None => vec![None],
        };
        let mut grid = Vec::new();
        for &ea in &config.exponents {
            for &ei in &gamma_i_exps {
                grid.push((ea, ei));
            }
        }
        let candidates: Vec<TuneCandidate> = grid
            .par_iter()
            .map(|&(ea, ei)| {
                let mut objective = sweep.objective.clone();
                objective.gamma_a = 10f64.powi(ea);
                objective.gamma_i = ei.map_or(0.0, |e| 10f64.powi(e));
                let maps: Result<Vec<f64>> = (0..sweep.repeats)
                    .map(|r| {
                        evaluator
                            .run_cell(method, config.fraction, r, &objective)
                            .map(|rep| rep.map)
                    })
                    .collect();
                let mean_map = match maps {
                    Ok(m) => m.iter().sum::<f64>() / m.len() as f64,
                    Err(e) => {
                        warn!(
                            "{method} with gamma_a={} gamma_i={}: {e}",
                            objective.gamma_a, objective.gamma_i
                        );
                        f64::NAN
                    }
                };
                TuneCandidate {
                    gamma_a: objective.gamma_a,
                    gamma_i: objective.gamma_i,
                    mean_map,
                }
            })
            .collect();
        let best = candidates
            .iter()
            .filter(|c| c.mean_map.is_finite())
            .fold(None::<&TuneCandidate>, |best, c| match best {
                Some(b) if b.mean_map >= c.mean_map => Some(b),
                _ => Some(c),
            })
            .cloned()
            .ok_or_else(|| Error::Eval(format!("every tuning candidate failed for {method}")))?;
        results.push(TuneResult {
            method: method.to_string(),
            candidates,
            best,
        });
    }
    Ok(results)
}
