//! Reward functions of both decision levels and the scalarized objective.

use serde::{Deserialize, Serialize};

/// Non-negative reward weights `(w1, w2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w1: f64,
    pub w2: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { w1: 1.0, w2: 1.0 }
    }
}

/// Clustering reward over the users that count this step: the stable fraction
/// weighted by `w1`, minus the fraction in SINR outage weighted by `w2`.
/// No counted users gives 0.
pub fn high_reward(stable: &[bool], in_outage: &[bool], w: Weights) -> f64 {
    debug_assert_eq!(stable.len(), in_outage.len());
    let n = stable.len();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let stable = stable.iter().filter(|&&s| s).count() as f64;
    let outages = in_outage.iter().filter(|&&o| o).count() as f64;
    w.w1 * stable / n - w.w2 * outages / n
}

/// Power-allocation reward of one AP over its assigned users. An idle AP
/// (no users) gets 1.
pub fn low_reward(powers: &[f64], violations: &[bool], p_max: f64, w: Weights) -> f64 {
    debug_assert_eq!(powers.len(), violations.len());
    let n = powers.len();
    if n == 0 {
        return 1.0;
    }
    let n = n as f64;
    let used: f64 = powers.iter().sum();
    let violating = violations.iter().filter(|&&v| v).count() as f64;
    (1.0 - w.w1 * used / (n * p_max)) - w.w2 * violating / n
}

/// Per-step ingredients of the scalarized objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    /// Fraction of counted users whose cluster did not change.
    pub stable_fraction: f64,
    /// Sum of information bits over active users.
    pub bits_total: f64,
    pub blocklength: f64,
    pub total_power: f64,
}

impl ObjectiveTerms {
    pub fn value(&self, eps_max: f64) -> f64 {
        let mut v = self.stable_fraction;
        if self.total_power > 0.0 {
            v += self.bits_total * (1.0 - eps_max) / (self.blocklength * self.total_power);
        }
        v
    }
}

/// Mean per-step objective over an episode.
pub fn objective_value(trace: &[ObjectiveTerms], eps_max: f64) -> f64 {
    if trace.is_empty() {
        return 0.0;
    }
    trace.iter().map(|t| t.value(eps_max)).sum::<f64>() / trace.len() as f64
}
