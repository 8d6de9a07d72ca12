//! Seeded latency, jitter and drop injection that never reorders frames.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub base_latency_ms: f64,
    /// Half-width of the uniform jitter added to every frame.
    pub jitter_ms: f64,
    pub drop_rate: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig { base_latency_ms: 0.0, jitter_ms: 0.0, drop_rate: 0.0, seed: 0 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid channel config: {0}")]
pub struct ChannelConfigError(pub String);

impl ChannelConfig {
    pub fn with_latency(base_latency_ms: f64, jitter_ms: f64, seed: u64) -> Self {
        ChannelConfig { base_latency_ms, jitter_ms, seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), ChannelConfigError> {
        if !(self.base_latency_ms.is_finite() && self.base_latency_ms >= 0.0) {
            return Err(ChannelConfigError("base latency must be >= 0".into()));
        }
        if !(self.jitter_ms.is_finite() && self.jitter_ms >= 0.0) {
            return Err(ChannelConfigError("jitter must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return Err(ChannelConfigError("drop rate must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Assigns release times to frames in send order.
#[derive(Debug, Clone)]
pub struct LatencyInjector {
    cfg: ChannelConfig,
    rng: ChaCha8Rng,
    last_release_ms: f64,
}

impl LatencyInjector {
    pub fn new(cfg: ChannelConfig) -> Self {
        LatencyInjector { cfg, rng: ChaCha8Rng::seed_from_u64(cfg.seed), last_release_ms: f64::NEG_INFINITY }
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    /// Release time for a frame sent at `send_ms`, or `None` if it is dropped.
    /// Release times are nondecreasing across calls.
    pub fn schedule(&mut self, send_ms: f64) -> Option<f64> {
        if self.cfg.drop_rate > 0.0 && self.rng.random::<f64>() < self.cfg.drop_rate {
            return None;
        }
        let jitter = if self.cfg.jitter_ms > 0.0 {
            self.rng.random_range(-self.cfg.jitter_ms..=self.cfg.jitter_ms)
        } else {
            0.0
        };
        let delay = (self.cfg.base_latency_ms + jitter).max(0.0);
        let release = (send_ms + delay).max(self.last_release_ms);
        self.last_release_ms = release;
        Some(release)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery<T> {
    pub send_ms: f64,
    pub release_ms: f64,
    pub frame: T,
}

/// Delay a timestamped stream, preserving order. Dropped frames vanish.
pub fn inject_latency<T>(cfg: ChannelConfig, frames: impl IntoIterator<Item = (f64, T)>) -> Vec<Delivery<T>> {
    let mut inj = LatencyInjector::new(cfg);
    frames
        .into_iter()
        .filter_map(|(send_ms, frame)| {
            inj.schedule(send_ms).map(|release_ms| Delivery { send_ms, release_ms, frame })
        })
        .collect()
}
