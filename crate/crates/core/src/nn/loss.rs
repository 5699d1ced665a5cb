//! Regression loss, Bhattacharyya distance and the joint objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Clamp on the Bhattacharyya coefficient; also the floor below which a bin
/// contributes no gradient.
pub const BD_EPS: f64 = 1e-12;

const DISTRIBUTION_TOL: f64 = 1e-9;

/// Mean squared error `(1/n) Σ (pred - target)²`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    mse_slices(pred.data(), target.data())
}

pub(crate) fn mse_slices(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::dim("mse_loss", "n", pred.len(), target.len()));
    }
    if pred.is_empty() {
        return Err(Error::dim("mse_loss", "n", 1, 0));
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / pred.len() as f64)
}

/// `d mse / d pred = 2 (pred - target) / n`.
pub fn mse_backward(pred: &[f64], target: &[f64]) -> Vec<f64> {
    let n = pred.len() as f64;
    pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect()
}

/// Bhattacharyya coefficient `Σ sqrt(p_i q_i)`.
pub fn bhattacharyya_coefficient(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum()
}

fn validate_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::dim("bhattacharyya_distance", "d", p.len(), q.len()));
    }
    for (name, dist) in [("p", p), ("q", q)] {
        if let Some(v) = dist.iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::Domain {
                op: "bhattacharyya_distance",
                msg: format!("{name} has entry {v}; distributions must be non-negative"),
            });
        }
        let sum: f64 = dist.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_TOL {
            return Err(Error::Domain {
                op: "bhattacharyya_distance",
                msg: format!("{name} sums to {sum}, expected 1"),
            });
        }
    }
    Ok(())
}

/// `-ln(max(eps, Σ sqrt(p_i q_i)))` for two discrete distributions.
pub fn bhattacharyya_distance(p: &Tensor, q: &Tensor) -> Result<f64> {
    validate_pair(p.data(), q.data())?;
    Ok(bd_unchecked(p.data(), q.data()))
}

pub(crate) fn bd_unchecked(p: &[f64], q: &[f64]) -> f64 {
    // rounding can push BC a hair above 1 for identical inputs
    (-bhattacharyya_coefficient(p, q).max(BD_EPS).ln()).max(0.0)
}

/// Gradients `(dD/dp, dD/dq)`.
///
/// `dD/dp_i = -(1 / BC) * 0.5 * sqrt(q_i / p_i)`; bins with `p_i < eps`
/// and the clamped region `BC < eps` get zero gradient.
pub fn bhattacharyya_backward(p: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let bc = bhattacharyya_coefficient(p, q);
    if bc < BD_EPS {
        return (vec![0.0; p.len()], vec![0.0; q.len()]);
    }
    let partial = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter()
            .zip(b)
            .map(|(&ai, &bi)| if ai < BD_EPS { 0.0 } else { -0.5 * (bi / ai).sqrt() / bc })
            .collect()
    };
    (partial(p, q), partial(q, p))
}

/// One evaluation of the joint objective `total = mse + alpha * bd`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub mse: f64,
    pub bd: f64,
    pub alpha: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(mse: f64, bd: f64, alpha: f64) -> Self {
        Self {
            mse,
            bd,
            alpha,
            total: mse + alpha * bd,
        }
    }

    /// Plain regression loss; no alignment term.
    pub fn mse_only(mse: f64) -> Self {
        Self::new(mse, 0.0, 0.0)
    }

    pub fn satisfies_identity(&self) -> bool {
        self.total - (self.mse + self.alpha * self.bd) == 0.0
    }
}
