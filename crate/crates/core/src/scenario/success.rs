use serde::{Deserialize, Serialize};

/// Deadline-decay success model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessParams {
    /// Latency up to which success equals the representation's sufficiency.
    pub deadline_s: f64,
    /// Exponential decay rate beyond the deadline.
    pub decay_per_s: f64,
}

impl Default for SuccessParams {
    fn default() -> Self {
        Self {
            deadline_s: 2.0,
            decay_per_s: 1.0,
        }
    }
}

impl SuccessParams {
    pub fn is_valid(&self) -> bool {
        self.deadline_s.is_finite() && self.deadline_s > 0.0 && self.decay_per_s.is_finite() && self.decay_per_s >= 0.0
    }

    /// Timeliness factor: 1 up to the deadline, then `exp(-decay * overshoot)`.
    pub fn timeliness(&self, latency_s: f64) -> f64 {
        if latency_s <= self.deadline_s {
            1.0
        } else {
            (-self.decay_per_s * (latency_s - self.deadline_s)).exp()
        }
    }
}

/// Task success probability of a representation with the given sufficiency,
/// delivered after `latency_s`.
pub fn success_model(sufficiency: f64, latency_s: f64, params: &SuccessParams) -> f64 {
    sufficiency * params.timeliness(latency_s)
}
