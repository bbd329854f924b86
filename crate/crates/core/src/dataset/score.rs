use serde::{Deserialize, Serialize};

use super::DatasetError;

pub const NUM_CLASSES: usize = 10;

/// Critic weights must sum to one within this tolerance.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Raw per-critic and per-user ratings for one game, all on a 0-100 scale.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreInputs {
    pub critic_ratings: Vec<f64>,
    pub critic_weights: Vec<f64>,
    pub user_ratings: Vec<f64>,
}

/// A G-Score and its class bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GScore {
    pub value: f64,
    pub class_index: usize,
}

fn check_range(x: f64) -> Result<f64, DatasetError> {
    if x.is_finite() && (0.0..=100.0).contains(&x) {
        Ok(x)
    } else {
        Err(DatasetError::InvalidScore(x))
    }
}

/// Weighted critic average `Σ αᵢ·Rᵢ`. Weights are validated, never renormalised.
pub fn aggregate_critic_score(inputs: &ScoreInputs) -> Result<f64, DatasetError> {
    let ratings = &inputs.critic_ratings;
    let weights = &inputs.critic_weights;
    if ratings.is_empty() {
        return Err(DatasetError::MissingRatings);
    }
    if weights.len() != ratings.len() {
        return Err(DatasetError::InvalidWeights(format!("{} weights for {} critics", weights.len(), ratings.len())));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(DatasetError::InvalidWeights(format!("negative or non-finite weight {w}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(DatasetError::InvalidWeights(format!("weights sum to {total}")));
    }
    for &r in ratings {
        check_range(r)?;
    }
    let score: f64 = ratings.iter().zip(weights).map(|(r, w)| r * w).sum();
    // a convex combination can drift past the bounds by an ulp
    Ok(score.clamp(0.0, 100.0))
}

/// Mean of the user ratings.
pub fn aggregate_user_score(inputs: &ScoreInputs) -> Result<f64, DatasetError> {
    let ratings = &inputs.user_ratings;
    if ratings.is_empty() {
        return Err(DatasetError::MissingRatings);
    }
    for &r in ratings {
        check_range(r)?;
    }
    let mean = ratings.iter().sum::<f64>() / ratings.len() as f64;
    Ok(mean.clamp(0.0, 100.0))
}

/// `S = (R_u + R_c) / 2` together with its class bin.
pub fn compute_gscore(user_score: f64, critic_score: f64) -> Result<GScore, DatasetError> {
    let value = (check_range(user_score)? + check_range(critic_score)?) / 2.0;
    Ok(GScore { value, class_index: quantize_gscore(value)? })
}

/// Class `k` covers `(10k, 10(k+1)]`, with `S = 0` in class 0, so integer
/// scores land in the bins labelled "0-10", "11-20", ..., "91-100".
pub fn quantize_gscore(score: f64) -> Result<usize, DatasetError> {
    let s = check_range(score)?;
    let k = (s / 10.0).ceil() as i64 - 1;
    Ok(k.clamp(0, NUM_CLASSES as i64 - 1) as usize)
}
