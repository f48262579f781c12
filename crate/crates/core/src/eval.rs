//! Accuracy metrics: corruption-estimation error and gauge-aligned rotation error.
//!
//! Rotation errors are geodesic angles in degrees measured after the chordal
//! (Frobenius) alignment `G = argmin Σ_i ‖R̂_i G − R*_i‖²`.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rotation::{project_to_so3, Rotation, RotationError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {0} estimates vs {1} references")]
    LengthMismatch(usize, usize),
    #[error("nothing to evaluate")]
    Empty,
    #[error("alignment failed: {0}")]
    Alignment(#[from] RotationError),
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Median, averaging the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Mean and median of `|ŝ_ij − s*_ij|`.
pub fn corruption_error(estimate: &[f64], truth: &[f64]) -> Result<(f64, f64), EvalError> {
    if estimate.len() != truth.len() {
        return Err(EvalError::LengthMismatch(estimate.len(), truth.len()));
    }
    if estimate.is_empty() {
        return Err(EvalError::Empty);
    }
    let dev: Vec<f64> = estimate.iter().zip(truth).map(|(a, b)| (a - b).abs()).collect();
    Ok((mean(&dev), median(&dev)))
}

/// `project_to_so3(Σ_i R̂_iᵀ R*_i)`, the chordal-optimal right factor.
pub fn align_rotations(estimate: &[Rotation], truth: &[Rotation]) -> Result<Rotation, EvalError> {
    if estimate.len() != truth.len() {
        return Err(EvalError::LengthMismatch(estimate.len(), truth.len()));
    }
    if estimate.is_empty() {
        return Err(EvalError::Empty);
    }
    let sum = estimate
        .iter()
        .zip(truth)
        .fold(Matrix3::zeros(), |acc, (e, t)| acc + e.matrix().transpose() * t.matrix());
    Ok(project_to_so3(&sum)?)
}

/// Rotation-error summary for one set of estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationErrors {
    pub mean_deg: f64,
    pub median_deg: f64,
    pub per_node_deg: Vec<f64>,
    /// Row-major alignment rotation applied on the right of every estimate.
    pub alignment: [f64; 9],
}

pub fn rotation_error_stats(
    estimate: &[Rotation],
    truth: &[Rotation],
) -> Result<RotationErrors, EvalError> {
    let g = align_rotations(estimate, truth)?;
    let per_node_deg: Vec<f64> = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| 180.0 * (*e * g).angular_distance(t))
        .collect();
    Ok(RotationErrors {
        mean_deg: mean(&per_node_deg),
        median_deg: median(&per_node_deg),
        per_node_deg,
        alignment: g.to_row_major(),
    })
}

/// Full evaluation of a synchronization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_corruption_err: Option<f64>,
    pub median_corruption_err: Option<f64>,
    pub mean_rotation_err_deg: f64,
    pub median_rotation_err_deg: f64,
    pub per_node_err_deg: Vec<f64>,
    pub alignment: [f64; 9],
}

impl EvalReport {
    pub fn new(
        estimate: &[Rotation],
        truth: &[Rotation],
        corruption: Option<(&[f64], &[f64])>,
    ) -> Result<Self, EvalError> {
        let rot = rotation_error_stats(estimate, truth)?;
        let (mc, mdc) = match corruption {
            Some((est, tru)) => {
                let (a, b) = corruption_error(est, tru)?;
                (Some(a), Some(b))
            }
            None => (None, None),
        };
        Ok(Self {
            mean_corruption_err: mc,
            median_corruption_err: mdc,
            mean_rotation_err_deg: rot.mean_deg,
            median_rotation_err_deg: rot.median_deg,
            per_node_err_deg: rot.per_node_deg,
            alignment: rot.alignment,
        })
    }
}
