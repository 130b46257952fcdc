//! PASCAL VOC 2007 11-point interpolated average precision.

use crate::{Error, Result};

/// Scores with binary ground truth. Rank ties are broken by ascending index.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedPredictions {
    scores: Vec<f64>,
    truth: Vec<bool>,
}

impl RankedPredictions {
    pub fn new(scores: Vec<f64>, truth: Vec<bool>) -> Result<Self> {
        if scores.len() != truth.len() {
            return Err(Error::Eval(format!(
                "{} scores for {} ground-truth labels",
                scores.len(),
                truth.len()
            )));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::Eval("score is NaN".into()));
        }
        Ok(RankedPredictions { scores, truth })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn truth(&self) -> &[bool] {
        &self.truth
    }

    /// Indices from highest to lowest score.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        order
    }
}

/// `AP = (1/11) Σ_{t ∈ {0, 0.1, .., 1}} max_{r : recall(r) ≥ t} precision(r)`.
pub fn average_precision(preds: &RankedPredictions) -> Result<f64> {
    let positives = preds.truth.iter().filter(|&&t| t).count();
    if positives == 0 {
        return Err(Error::Eval(
            "average precision needs at least one positive".into(),
        ));
    }
    let mut curve = Vec::with_capacity(preds.truth.len());
    let mut hits = 0usize;
    for (rank, &i) in preds.ranking().iter().enumerate() {
        if preds.truth[i] {
            hits += 1;
        }
        curve.push((
            hits as f64 / positives as f64,
            hits as f64 / (rank + 1) as f64,
        ));
    }
    let total: f64 = (0..=10)
        .map(|step| {
            let t = step as f64 / 10.0;
            curve
                .iter()
                .filter(|(recall, _)| *recall >= t)
                .map(|&(_, precision)| precision)
                .fold(0.0, f64::max)
        })
        .sum();
    Ok(total / 11.0)
}

pub fn mean_ap(aps: &[f64]) -> Result<f64> {
    if aps.is_empty() {
        return Err(Error::Eval("mean AP of no classes".into()));
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}
