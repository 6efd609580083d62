//! Per-landmark sample matrices and the mean-momentum statistic.

use crate::error::StatsError;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupTag {
    Control,
    Case,
}

impl fmt::Display for GroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupTag::Control => write!(f, "control"),
            GroupTag::Case => write!(f, "case"),
        }
    }
}

/// All observations of one landmark within one group: an `m × 2` matrix whose
/// rows are momentum coordinates (default) or raw positions (comparison
/// mode).
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSampleMatrix {
    pub group: GroupTag,
    /// 1-based landmark index.
    pub landmark: usize,
    pub rows: Vec<[f64; 2]>,
}

impl LandmarkSampleMatrix {
    pub fn new(group: GroupTag, landmark: usize, rows: Vec<[f64; 2]>) -> Result<Self, StatsError> {
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(StatsError::InvalidOption(format!(
                "non-finite observation in landmark {landmark} ({group})"
            )));
        }
        Ok(LandmarkSampleMatrix {
            group,
            landmark,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, axis: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[axis])
    }
}

/// Euclidean norm of the component-wise mean row, `‖(1/m) Σ rows‖₂`.
pub fn mean_momentum_norm(sample: &LandmarkSampleMatrix) -> f64 {
    if sample.rows.is_empty() {
        return 0.0;
    }
    let m = sample.rows.len() as f64;
    let mut mean = [0.0f64; 2];
    for row in &sample.rows {
        mean[0] += row[0] / m;
        mean[1] += row[1] / m;
    }
    (mean[0] * mean[0] + mean[1] * mean[1]).sqrt()
}

/// Landmarks (1-based) whose norm exceeds `factor` times the median norm —
/// the "unusually large" rule used to flag mean-momentum outliers.
pub fn flag_mean_momentum(norms: &[f64], factor: f64) -> Vec<usize> {
    if norms.is_empty() {
        return Vec::new();
    }
    let mut sorted = norms.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite norms"));
    let n = sorted.len();
    let median = if n.is_multiple_of(2) {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    } else {
        sorted[n / 2]
    };
    norms
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > factor * median)
        .map(|(i, _)| i + 1)
        .collect()
}
