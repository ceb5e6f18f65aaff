//! Seeded generator of synthetic charging sessions.
//!
//! The consumer gains `base_rate * efficiency(d)` mAh per minute at coil
//! distance `d`, with
//!
//! ```text
//! efficiency(d) = exp(-decay_beta * (d - 1.0))    clamped to (0, 1]
//! ```
//!
//! plus Gaussian reading noise. A chosen set of sessions receives a
//! persistent additive spike from a random minute onward.
//!
//! Randomness: ChaCha8 (`rand_chacha` 0.9) seeded with
//! `ChaCha8Rng::seed_from_u64(seed)`. Stream 0 picks the anomalous sessions;
//! session `i` (0-based, distance-major order) draws from stream `i + 1`.
//! Gaussian noise comes from `rand_distr` 0.5 `Normal` (ziggurat).

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{MonitoringRecord, Session};

/// Consumer capacity used for the percentage column, mAh.
pub const CONSUMER_CAPACITY_MAH: f64 = 2915.0;
/// Provider capacity used for the percentage column, mAh.
pub const PROVIDER_CAPACITY_MAH: f64 = 4080.0;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub distances_cm: Vec<f64>,
    pub sessions_per_distance: usize,
    pub duration_min: usize,
    pub mt_min: usize,
    pub base_rate_mah_per_min: f64,
    pub decay_beta: f64,
    pub noise_sigma_mah: f64,
    pub anomaly_session_count: usize,
    pub anomaly_spike_mah: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            distances_cm: vec![1.0, 1.5, 2.0],
            sessions_per_distance: 5,
            duration_min: 30,
            mt_min: 1,
            base_rate_mah_per_min: 10.0,
            decay_beta: 0.8,
            noise_sigma_mah: 2.0,
            anomaly_session_count: 6,
            anomaly_spike_mah: 400.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn total_sessions(&self) -> usize {
        self.distances_cm.len() * self.sessions_per_distance
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if self.distances_cm.is_empty() {
            return bad("at least one distance is required");
        }
        if self.distances_cm.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return bad("distances must be finite and positive");
        }
        if self.sessions_per_distance == 0 {
            return bad("sessions_per_distance must be at least 1");
        }
        if self.duration_min == 0 {
            return bad("duration_min must be at least 1");
        }
        if self.mt_min == 0 {
            return bad("mt_min must be at least 1");
        }
        for (name, v) in [
            ("base_rate_mah_per_min", self.base_rate_mah_per_min),
            ("decay_beta", self.decay_beta),
            ("noise_sigma_mah", self.noise_sigma_mah),
            ("anomaly_spike_mah", self.anomaly_spike_mah),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SynthError::InvalidConfig(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        if self.anomaly_session_count > self.total_sessions() {
            return bad("anomaly_session_count exceeds the number of sessions");
        }
        Ok(())
    }
}

/// Fraction of the provider's output reaching the consumer at `distance_cm`.
pub fn efficiency(distance_cm: f64, decay_beta: f64) -> Result<f64, SynthError> {
    if !(distance_cm > 0.0) {
        return Err(SynthError::NonPositiveDistance(distance_cm));
    }
    let e = (-decay_beta * (distance_cm - 1.0)).exp();
    Ok(e.clamp(f64::MIN_POSITIVE, 1.0))
}

/// Indices (into distance-major session order) of the anomalous sessions.
///
/// Anomalies are dealt round-robin over distances, then drawn without
/// replacement within each distance, so no distance receives more than
/// `ceil(count / distances)` of them.
pub fn anomalous_sessions(config: &GeneratorConfig) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(0);
    let n_dist = config.distances_cm.len();
    let per = config.sessions_per_distance;
    let mut chosen = Vec::with_capacity(config.anomaly_session_count);
    for (d, _) in config.distances_cm.iter().enumerate() {
        let quota = config.anomaly_session_count / n_dist
            + usize::from(d < config.anomaly_session_count % n_dist);
        let quota = quota.min(per);
        chosen.extend(index::sample(&mut rng, per, quota).into_iter().map(|i| d * per + i));
    }
    // Quotas beyond a full distance spill into the remaining sessions.
    let missing = config.anomaly_session_count - chosen.len();
    if missing > 0 {
        let rest: Vec<usize> = (0..config.total_sessions())
            .filter(|i| !chosen.contains(i))
            .collect();
        chosen.extend(index::sample(&mut rng, rest.len(), missing).into_iter().map(|i| rest[i]));
    }
    chosen.sort_unstable();
    chosen
}

fn session_id(index: usize) -> String {
    format!("S{index:03}")
}

/// Generates `|distances| * sessions_per_distance` sessions of
/// `duration_min / mt_min + 1` readings each (baseline included).
pub fn generate(config: &GeneratorConfig) -> Result<Vec<Session>, SynthError> {
    config.validate()?;
    let anomalies = anomalous_sessions(config);
    let noise = Normal::new(0.0, config.noise_sigma_mah)
        .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let steps = config.duration_min / config.mt_min;

    let mut sessions = Vec::with_capacity(config.total_sessions());
    for (d_idx, &distance) in config.distances_cm.iter().enumerate() {
        let eff = efficiency(distance, config.decay_beta)?;
        let gain_per_min = config.base_rate_mah_per_min * eff;
        for rep in 0..config.sessions_per_distance {
            let idx = d_idx * config.sessions_per_distance + rep;
            let id = session_id(idx);
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(idx as u64 + 1);

            let consumer0 = f64::from(rng.random_range(800u32..1200));
            let provider0 = f64::from(rng.random_range(2800u32..3400));
            let spike_from = if anomalies.binary_search(&idx).is_ok() {
                Some(rng.random_range(1..=steps))
            } else {
                None
            };

            let mut records = Vec::with_capacity(steps + 1);
            for step in 0..=steps {
                let minutes = (step * config.mt_min) as f64;
                let (consumer, provider) = if step == 0 {
                    (consumer0, provider0)
                } else {
                    let spike = match spike_from {
                        Some(s) if step >= s => config.anomaly_spike_mah,
                        _ => 0.0,
                    };
                    let c = consumer0 + gain_per_min * minutes + noise.sample(&mut rng) + spike;
                    let p = provider0 - config.base_rate_mah_per_min * minutes
                        + noise.sample(&mut rng);
                    (c.max(0.0), p.max(0.0))
                };
                records.push(MonitoringRecord {
                    session_id: id.clone(),
                    timestamp_s: (step * config.mt_min * 60) as u64,
                    consumer_level_mah: consumer,
                    consumer_level_pct: (consumer / CONSUMER_CAPACITY_MAH * 100.0).min(100.0),
                    provider_level_mah: provider,
                    provider_level_pct: (provider / PROVIDER_CAPACITY_MAH * 100.0).min(100.0),
                });
            }
            sessions.push(Session {
                session_id: id,
                coil_distance_cm: distance,
                mt_min: config.mt_min as f64,
                baseline_consumer_mah: consumer0,
                records,
            });
        }
    }
    Ok(sessions)
}
