//! Single-agent rollout collection and update, used for sanity environments.
//! The multi-agent loops live in [`crate::hierarchy`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::agent::{Agent, TrainerConfig, UpdateStats};
use super::buffer::{RolloutBuffer, Step};

pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64>;
    /// Returns `(next_obs, reward, done)`.
    fn step<R: Rng + ?Sized>(&mut self, action: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64, bool)>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub transitions: usize,
    pub mean_reward: f64,
    pub update: UpdateStats,
}

/// Parallel environment instances and their current observations, carried
/// across iterations.
pub struct EnvPool<E> {
    envs: Vec<E>,
    obs: Vec<Vec<f64>>,
}

impl<E: Environment> EnvPool<E> {
    pub fn new<R: Rng + ?Sized>(mut envs: Vec<E>, rng: &mut R) -> Self {
        let obs = envs.iter_mut().map(|e| e.reset(rng)).collect();
        Self { envs, obs }
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }
}

/// Collect exactly `cfg.batch_size` transitions round-robin over the pool,
/// then run the PPO update.
pub fn collect_and_update<E: Environment, R: Rng + ?Sized>(
    agent: &mut Agent,
    pool: &mut EnvPool<E>,
    cfg: &TrainerConfig,
    rng: &mut R,
) -> Result<IterationStats> {
    let mut buffers: Vec<RolloutBuffer> = (0..pool.len()).map(|_| RolloutBuffer::new()).collect();
    let act_dim = agent.act_dim();
    let mask = vec![true; act_dim];
    let mut reward_sum = 0.0;
    for t in 0..cfg.batch_size {
        let e = t % pool.len();
        let obs = std::mem::take(&mut pool.obs[e]);
        let d = agent.act(&obs, &mask, false, rng)?;
        let (next, reward, done) = pool.envs[e].step(&d.sample.action, rng)?;
        reward_sum += reward;
        buffers[e].push(Step {
            obs,
            raw: d.sample.raw,
            mask: mask.clone(),
            log_prob: d.sample.log_prob,
            value: d.value,
            reward,
            done,
        });
        pool.obs[e] = if done { pool.envs[e].reset(rng) } else { next };
    }
    for (e, b) in buffers.iter_mut().enumerate() {
        let bootstrap = agent.value_of(&pool.obs[e])?;
        b.finish(bootstrap, cfg.gamma, cfg.gae_lambda);
    }
    let refs: Vec<&RolloutBuffer> = buffers.iter().filter(|b| !b.is_empty()).collect();
    let update = agent.update(&refs, cfg, rng)?;
    Ok(IterationStats {
        transitions: cfg.batch_size,
        mean_reward: reward_sum / cfg.batch_size as f64,
        update,
    })
}

/// One-step bandit with reward `-(a - target)^2` on a single action in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct QuadraticBandit {
    pub target: f64,
}

impl Environment for QuadraticBandit {
    fn obs_dim(&self) -> usize {
        1
    }

    fn act_dim(&self) -> usize {
        1
    }

    fn reset<R: Rng + ?Sized>(&mut self, _rng: &mut R) -> Vec<f64> {
        vec![1.0]
    }

    fn step<R: Rng + ?Sized>(&mut self, action: &[f64], _rng: &mut R) -> Result<(Vec<f64>, f64, bool)> {
        let d = action[0] - self.target;
        Ok((vec![1.0], -d * d, true))
    }
}
