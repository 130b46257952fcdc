use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Label, MultiviewDataset};
use crate::{Error, Result};

/// Which examples keep their labels in one semi-supervised run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelMask {
    /// Sorted, unique positions into the dataset the mask was drawn from.
    pub labeled_indices: Vec<usize>,
    pub fraction: f64,
    pub seed: u64,
}

/// Draw `round(fraction · N)` of the `N` ground-truth-labeled examples,
/// stratified by class so that both classes survive whenever both exist and at
/// least two labels are kept.
pub fn split_labels(dataset: &MultiviewDataset, fraction: f64, seed: u64) -> Result<LabelMask> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Dataset(format!(
            "label fraction {fraction} not in (0, 1]"
        )));
    }
    let truth = dataset.ground_truth();
    let mut positives: Vec<usize> = (0..truth.len())
        .filter(|&i| truth[i] == Label::Positive)
        .collect();
    let mut negatives: Vec<usize> = (0..truth.len())
        .filter(|&i| truth[i] == Label::Negative)
        .collect();
    let available = positives.len() + negatives.len();
    if available < 2 {
        return Err(Error::Dataset(format!(
            "need at least 2 ground-truth labels to mask, found {available}"
        )));
    }
    let total = (fraction * available as f64).round() as usize;
    if total == 0 {
        return Err(Error::Dataset(format!(
            "label fraction {fraction} of {available} examples keeps no labels"
        )));
    }

    let share = |count: usize| (total as f64 * count as f64 / available as f64).round() as usize;
    let (mut take_pos, mut take_neg);
    if positives.is_empty() || negatives.is_empty() || total < 2 {
        take_pos = share(positives.len()).min(positives.len());
        take_neg = total - take_pos;
        if take_neg > negatives.len() {
            take_neg = negatives.len();
            take_pos = total - take_neg;
        }
    } else {
        take_pos = share(positives.len()).clamp(1, positives.len());
        take_neg = (total - take_pos).clamp(1, negatives.len());
        take_pos = (total - take_neg).clamp(1, positives.len());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);
    let mut labeled_indices: Vec<usize> = positives[..take_pos]
        .iter()
        .chain(&negatives[..take_neg])
        .copied()
        .collect();
    labeled_indices.sort_unstable();
    Ok(LabelMask {
        labeled_indices,
        fraction,
        seed,
    })
}
