use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::rng::substream;

/// Disjoint validation folds covering every index once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    /// Validation indices of each fold, ascending.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn validation(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every index outside `fold`, ascending.
    pub fn training(&self, fold: usize) -> Vec<usize> {
        let mut t: Vec<usize> =
            self.folds.iter().enumerate().filter(|(i, _)| *i != fold).flat_map(|(_, f)| f.iter().copied()).collect();
        t.sort_unstable();
        t
    }

    pub fn num_samples(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }
}

/// Shuffles the indices (within each class when `stratified`), lays the
/// classes end to end and deals position `i` to fold `i mod k`. Each class
/// then spreads over the folds with counts differing by at most one.
pub fn make_folds(labels: &[usize], k: usize, seed: u64, stratified: bool) -> Result<FoldPlan, TrainError> {
    if k < 2 || labels.len() < k {
        return Err(TrainError::TooFewSamples { samples: labels.len(), k });
    }
    let mut rng = substream(seed, "folds");
    let mut order = Vec::with_capacity(labels.len());
    if stratified {
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        for class in 0..classes {
            let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            members.shuffle(&mut rng);
            order.extend(members);
        }
    } else {
        order.extend(0..labels.len());
        order.shuffle(&mut rng);
    }
    let mut folds = vec![Vec::new(); k];
    for (pos, idx) in order.into_iter().enumerate() {
        folds[pos % k].push(idx);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { k, seed, stratified, folds })
}
