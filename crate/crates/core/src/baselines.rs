//! Non-learning comparison policies.

use serde::{Deserialize, Serialize};

use crate::env::{ClusteringStrategy, NetworkEnv, PowerAllocation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpportunisticParams {
    /// APs within this many dB of a user's best gain join its cluster.
    pub gain_margin_db: f64,
}

impl Default for OpportunisticParams {
    fn default() -> Self {
        Self {
            gain_margin_db: 20.0,
        }
    }
}

impl OpportunisticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain_margin_db >= 0.0) {
            return Err(Error::config("baseline.gain_margin_db", "must be >= 0"));
        }
        Ok(())
    }
}

fn full_power(strategy: &ClusteringStrategy, p_max: f64) -> PowerAllocation {
    let mut p = PowerAllocation::zeros(strategy.users(), strategy.aps());
    for i in 0..strategy.users() {
        for k in strategy.cluster(i) {
            p.set(i, k, p_max);
        }
    }
    p
}

/// Every active user is served by its nearest AP at full power.
pub fn closest_policy(env: &NetworkEnv) -> (ClusteringStrategy, PowerAllocation) {
    let mut s = ClusteringStrategy::empty(env.num_users(), env.num_aps());
    for (i, u) in env.users().iter().enumerate() {
        if u.active {
            s.set(i, env.closest_ap(i), true);
        }
    }
    let p = full_power(&s, env.config().radio.p_max);
    (s, p)
}

/// Every AP whose expected gain is within the margin of the user's best joins,
/// and transmits at full power.
pub fn opportunistic_policy(
    env: &NetworkEnv,
    params: &OpportunisticParams,
) -> Result<(ClusteringStrategy, PowerAllocation)> {
    params.validate()?;
    let mut s = ClusteringStrategy::empty(env.num_users(), env.num_aps());
    for (i, u) in env.users().iter().enumerate() {
        if !u.active {
            continue;
        }
        let gains = env.expected_gains_db(i)?;
        let best = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (k, &g) in gains.iter().enumerate() {
            if g >= best - params.gain_margin_db {
                s.set(i, k, true);
            }
        }
    }
    let p = full_power(&s, env.config().radio.p_max);
    Ok((s, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Baseline {
    Closest,
    Opportunistic(OpportunisticParams),
}

impl Baseline {
    pub fn decide(&self, env: &NetworkEnv) -> Result<(ClusteringStrategy, PowerAllocation)> {
        match self {
            Baseline::Closest => Ok(closest_policy(env)),
            Baseline::Opportunistic(p) => opportunistic_policy(env, p),
        }
    }

    /// Run one full step of the environment under this baseline.
    pub fn step(&self, env: &mut NetworkEnv) -> Result<crate::env::StepOutcome> {
        let (s, p) = self.decide(env)?;
        env.apply_clustering(s)?;
        env.apply_power_allocation(&p)?;
        env.finish_step()
    }
}
