//! Aggregates over environment steps.

use serde::{Deserialize, Serialize};

use crate::env::StepOutcome;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub steps: usize,
    pub high_reward_mean: f64,
    pub low_reward_mean: f64,
    /// Per-step high reward plus mean low reward, averaged.
    pub combined_reward_mean: f64,
    pub dep_violation_rate: f64,
    pub mean_power_fraction: f64,
    pub reconfig_rate: f64,
    pub mean_cluster_size: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MetricAccumulator {
    eps_max: f64,
    steps: usize,
    high: f64,
    low: f64,
    power_fraction: f64,
    violations: usize,
    active: usize,
    counted: usize,
    changed: usize,
    cluster_sizes: usize,
}

impl MetricAccumulator {
    pub fn new(eps_max: f64) -> Self {
        Self {
            eps_max,
            ..Self::default()
        }
    }

    pub fn push(&mut self, o: &StepOutcome) {
        self.steps += 1;
        self.high += o.high_reward;
        self.low += o.mean_low_reward();
        self.power_fraction += o.power_fraction;
        for u in o.users.iter().filter(|u| u.active) {
            self.active += 1;
            self.cluster_sizes += u.cluster_size;
            if u.dep > self.eps_max {
                self.violations += 1;
            }
            if u.counted {
                self.counted += 1;
                if u.cluster_changed {
                    self.changed += 1;
                }
            }
        }
    }

    pub fn summary(&self) -> MetricSummary {
        let ratio = |a: f64, b: usize| if b == 0 { 0.0 } else { a / b as f64 };
        MetricSummary {
            steps: self.steps,
            high_reward_mean: ratio(self.high, self.steps),
            low_reward_mean: ratio(self.low, self.steps),
            combined_reward_mean: ratio(self.high + self.low, self.steps),
            dep_violation_rate: ratio(self.violations as f64, self.active),
            mean_power_fraction: ratio(self.power_fraction, self.steps),
            reconfig_rate: ratio(self.changed as f64, self.counted),
            mean_cluster_size: ratio(self.cluster_sizes as f64, self.active),
        }
    }
}
