//! Analytic network layer: link rate, transmission latency and energy, and
//! the state snapshots fed upward to the knowledge layer.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("bandwidth must be finite and positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("invalid channel parameter: {0}")]
    InvalidChannel(String),
}

fn default_efficiency() -> f64 {
    1.0
}
fn default_power() -> f64 {
    1.0
}
fn default_max_attempts() -> u32 {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub id: String,
    pub bandwidth_hz: f64,
    #[serde(default = "default_efficiency")]
    pub spectral_efficiency_bps_per_hz: f64,
    #[serde(default = "default_power")]
    pub tx_power_w: f64,
    #[serde(default)]
    pub propagation_delay_s: f64,
    #[serde(default)]
    pub loss_prob: f64,
    #[serde(default)]
    pub congestion_level: f64,
    /// Retransmission cap for lossy links; the frame is dropped after this many attempts.
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    /// Transmit energy accumulated since the channel was created.
    #[serde(default)]
    pub recent_energy_j: f64,
}

/// Cost of one transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxOutcome {
    pub latency_s: f64,
    pub energy_j: f64,
    pub delivered: bool,
    pub attempts: u32,
}

/// Upward feedback record for the knowledge layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub channel_id: String,
    pub timestamp: f64,
    pub bandwidth_hz: f64,
    pub achievable_rate_bps: f64,
    pub congestion_level: f64,
    pub link_reliability: f64,
    pub recent_energy_j: f64,
}

impl Channel {
    /// Channel with unit spectral efficiency, 1 W transmit power, no delay, no loss.
    pub fn new(id: &str, bandwidth_hz: f64) -> Self {
        Self {
            id: id.to_owned(),
            bandwidth_hz,
            spectral_efficiency_bps_per_hz: 1.0,
            tx_power_w: 1.0,
            propagation_delay_s: 0.0,
            loss_prob: 0.0,
            congestion_level: 0.0,
            max_attempts: default_max_attempts(),
            recent_energy_j: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |what: &str| Err(NetError::InvalidChannel(format!("{what} out of range")));
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(NetError::InvalidBandwidth(self.bandwidth_hz));
        }
        if !(self.spectral_efficiency_bps_per_hz.is_finite() && self.spectral_efficiency_bps_per_hz > 0.0) {
            return bad("spectral_efficiency_bps_per_hz");
        }
        if !(self.tx_power_w.is_finite() && self.tx_power_w > 0.0) {
            return bad("tx_power_w");
        }
        if !(self.propagation_delay_s.is_finite() && self.propagation_delay_s >= 0.0) {
            return bad("propagation_delay_s");
        }
        if !(0.0..1.0).contains(&self.loss_prob) {
            return bad("loss_prob");
        }
        if !(0.0..=1.0).contains(&self.congestion_level) {
            return bad("congestion_level");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts");
        }
        Ok(())
    }

    /// R = B * eta, in bit/s.
    pub fn link_rate(&self) -> f64 {
        self.bandwidth_hz * self.spectral_efficiency_bps_per_hz
    }

    /// Latency of a single attempt: airtime plus propagation delay.
    pub fn attempt_latency(&self, size_bits: f64) -> f64 {
        size_bits / self.link_rate() + self.propagation_delay_s
    }

    /// Energy of a single attempt: transmit power times airtime.
    pub fn attempt_energy(&self, size_bits: f64) -> f64 {
        self.tx_power_w * size_bits / self.link_rate()
    }

    /// Send `size_bits`. Lossless channels never touch `rng`.
    pub fn transmit<R: Rng + ?Sized>(&mut self, size_bits: f64, rng: &mut R) -> TxOutcome {
        let mut attempts = 1u32;
        let mut delivered = true;
        if self.loss_prob > 0.0 {
            while rng.gen::<f64>() < self.loss_prob {
                if attempts == self.max_attempts {
                    delivered = false;
                    break;
                }
                attempts += 1;
            }
        }
        let n = f64::from(attempts);
        let outcome = TxOutcome {
            latency_s: n * self.attempt_latency(size_bits),
            energy_j: n * self.attempt_energy(size_bits),
            delivered,
            attempts,
        };
        self.recent_energy_j += outcome.energy_j;
        outcome
    }

    pub fn set_bandwidth(&mut self, bandwidth_hz: f64, timestamp: f64) -> Result<NetworkState, NetError> {
        if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
            return Err(NetError::InvalidBandwidth(bandwidth_hz));
        }
        self.bandwidth_hz = bandwidth_hz;
        Ok(self.report_state(timestamp))
    }

    pub fn report_state(&self, timestamp: f64) -> NetworkState {
        NetworkState {
            channel_id: self.id.clone(),
            timestamp,
            bandwidth_hz: self.bandwidth_hz,
            achievable_rate_bps: self.link_rate(),
            congestion_level: self.congestion_level,
            link_reliability: 1.0 - self.loss_prob,
            recent_energy_j: self.recent_energy_j,
        }
    }
}
