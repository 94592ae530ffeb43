//! Feature importance from transformation matrices and top-p% selection.
//!
//! A feature's score is the Euclidean norm of its row in `W_k`; the l2,1
//! penalty drives rows of unhelpful features toward zero.

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};

/// Percentages of features kept in the experiment sweeps.
pub const P_GRID: [f64; 14] = [
    2.0, 4.0, 6.0, 8.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0,
];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRanking {
    pub scores: Vec<f64>,
    /// Feature indices by descending score, ties by ascending index.
    pub order: Vec<usize>,
}

impl FeatureRanking {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

pub fn score_features(w: &Matrix) -> FeatureRanking {
    let scores = numerics::row_norms(w);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable sort keeps ascending index among ties
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    FeatureRanking { scores, order }
}

/// Number of features kept at `p` percent of `d`: `ceil(p/100 * d)`.
pub fn selection_count(d: usize, p: f64) -> Result<usize> {
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::InvalidArgument(format!(
            "percentage must be in (0, 100], got {p}"
        )));
    }
    // absorb round-off so that e.g. 100/6 percent of 30 is 5, not 6
    let count = (p * d as f64 / 100.0 - 1e-9).ceil() as usize;
    Ok(count.clamp(1.min(d), d))
}

/// The top `p` percent of features in ranking order.
pub fn select_top(ranking: &FeatureRanking, p: f64) -> Result<Vec<usize>> {
    let count = selection_count(ranking.len(), p)?;
    Ok(ranking.order[..count].to_vec())
}
