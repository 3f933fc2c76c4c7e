use serde::{Deserialize, Serialize};

use crate::numerics::softplus;

/// Binary cross-entropy of one logit against a `{0,1}` label, written as
/// `y·softplus(−z) + (1−y)·softplus(z)` so it stays finite for huge `|z|`.
pub fn bce_loss(logit: f64, label: u8) -> f64 {
    if label == 1 {
        softplus(-logit)
    } else {
        softplus(logit)
    }
}

/// Linear warmup to `peak`, then linear decay to zero at `total`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub peak: f64,
    pub warmup: usize,
    pub total: usize,
}

impl Schedule {
    /// Learning rate for the 0-based optimizer step `step`.
    pub fn lr_at(&self, step: usize) -> f64 {
        if step >= self.total {
            0.0
        } else if step < self.warmup {
            self.peak * (step as f64 / self.warmup as f64)
        } else {
            self.peak * ((self.total - step) as f64 / (self.total - self.warmup) as f64)
        }
    }
}
