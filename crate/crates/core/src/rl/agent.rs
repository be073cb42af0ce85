use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::adam::Adam;
use super::buffer::{RolloutBuffer, Step};
use super::heads::{self, HeadKind, Sample};
use super::mlp::{Mlp, MlpCache};
use super::ppo::{clipped_surrogate, normalize_advantages, PpoDiagnostics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    /// Environment steps collected per iteration.
    pub batch_size: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub entropy_coef: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub iterations: usize,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Per-network gradient norm cap; `0` disables it.
    pub max_grad_norm: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            batch_size: 4000,
            gamma: 0.99,
            gae_lambda: 1.0,
            clip: 0.3,
            entropy_coef: 0.01,
            epochs: 10,
            minibatch_size: 500,
            iterations: 500,
            hidden: vec![64, 64],
            init_log_std: 0.0,
            max_grad_norm: 0.5,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("trainer.gamma", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::config("trainer.gae_lambda", "must lie in [0, 1]"));
        }
        if !(self.clip > 0.0) {
            return Err(Error::config("trainer.clip", "must be > 0"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("trainer.learning_rate", "must be finite and >= 0"));
        }
        if self.batch_size == 0 || self.minibatch_size == 0 {
            return Err(Error::config("trainer.batch_size", "batch and minibatch sizes must be >= 1"));
        }
        if !(self.entropy_coef >= 0.0) {
            return Err(Error::config("trainer.entropy_coef", "must be >= 0"));
        }
        if !(self.max_grad_norm >= 0.0) {
            return Err(Error::config("trainer.max_grad_norm", "must be >= 0"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("trainer.hidden", "layer sizes must be >= 1"));
        }
        Ok(())
    }
}

/// Stochastic policy: network outputs plus a state-independent log-std for
/// each continuous dim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub net: Mlp,
    pub log_std: Vec<f64>,
    pub head: HeadKind,
}

impl Policy {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        head: HeadKind,
        init_log_std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(act_dim);
        let net = Mlp::new(&sizes, 0.01, rng)?;
        Ok(Self {
            net,
            log_std: vec![init_log_std; head.gaussian_dims(act_dim)],
            head,
        })
    }

    pub fn act_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn num_params(&self) -> usize {
        self.net.num_params() + self.log_std.len()
    }

    pub fn act<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        mask: &[bool],
        deterministic: bool,
        rng: &mut R,
    ) -> Result<Sample> {
        let out = self.net.predict(obs)?;
        heads::sample(self.head, &out, &self.log_std, mask, deterministic, rng)
    }

    pub fn log_prob(&self, obs: &[f64], raw: &[f64], mask: &[bool]) -> Result<f64> {
        let out = self.net.predict(obs)?;
        heads::log_prob_raw(self.head, &out, &self.log_std, raw, mask)
    }
}

/// Output of [`Agent::act`].
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub sample: Sample,
    pub value: f64,
}

/// Separate policy and value networks with their optimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub policy: Policy,
    pub value: Mlp,
    /// The value network predicts returns divided by this factor.
    pub value_scale: f64,
    opt_policy: Adam,
    opt_value: Adam,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub loss: f64,
    pub diagnostics: PpoDiagnostics,
    pub samples: usize,
    pub minibatches: usize,
}

/// Loss and gradients of one minibatch.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub diagnostics: PpoDiagnostics,
    pub grad_policy: Vec<f64>,
    pub grad_value: Vec<f64>,
}

/// A minibatch sample: transition plus its (already normalized) advantage and
/// value target.
#[derive(Debug, Clone, Copy)]
pub struct Sampled<'a> {
    pub step: &'a Step,
    pub advantage: f64,
    pub target: f64,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        head: HeadKind,
        cfg: &TrainerConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let policy = Policy::new(obs_dim, act_dim, &cfg.hidden, head, cfg.init_log_std, rng)?;
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(1);
        let value = Mlp::new(&sizes, 1.0, rng)?;
        Ok(Self::from_parts(policy, value, 1.0 / (1.0 - cfg.gamma).max(1e-3)))
    }

    pub fn from_parts(policy: Policy, value: Mlp, value_scale: f64) -> Self {
        let opt_policy = Adam::new(policy.num_params());
        let opt_value = Adam::new(value.num_params());
        Self {
            policy,
            value,
            value_scale,
            opt_policy,
            opt_value,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.net.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.policy.act_dim()
    }

    pub fn value_of(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.value_scale * self.value.predict(obs)?[0])
    }

    pub fn act<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        mask: &[bool],
        deterministic: bool,
        rng: &mut R,
    ) -> Result<Decision> {
        let sample = self.policy.act(obs, mask, deterministic, rng)?;
        let value = self.value_of(obs)?;
        Ok(Decision { sample, value })
    }

    /// Full PPO loss of a minibatch and its exact gradient w.r.t. both networks.
    pub fn loss_and_grad(&self, batch: &[Sampled<'_>], cfg: &TrainerConfig) -> Result<LossGrad> {
        let m = batch.len().max(1) as f64;
        let pol = &self.policy;
        let n_net = pol.net.num_params();
        let mut grad_policy = vec![0.0; pol.num_params()];
        let mut grad_value = vec![0.0; self.value.num_params()];
        let mut cache = MlpCache::default();
        let (mut surrogate, mut value_se, mut ent, mut clipped, mut kl) = (0.0, 0.0, 0.0, 0usize, 0.0);
        let act_dim = pol.act_dim();
        let mut g_out = vec![0.0; act_dim];
        for s in batch {
            let out = pol.net.forward_into(&s.step.obs, &mut cache)?;
            let lp = heads::log_prob_raw(pol.head, &out, &pol.log_std, &s.step.raw, &s.step.mask)?;
            let ratio = (lp - s.step.log_prob).exp();
            let (sur, d_ratio) = clipped_surrogate(ratio, s.advantage, cfg.clip);
            surrogate += sur;
            if (ratio - 1.0).abs() > cfg.clip {
                clipped += 1;
            }
            kl += ratio - 1.0 - (lp - s.step.log_prob);
            ent += heads::entropy(pol.head, &out, &pol.log_std, &s.step.mask);

            g_out.iter_mut().for_each(|g| *g = 0.0);
            let (g_net, g_ls) = grad_policy.split_at_mut(n_net);
            // d(-sur/m)/dlp = -(d sur/d ratio) * ratio / m
            let coef = -d_ratio * ratio / m;
            if coef != 0.0 {
                heads::grad_log_prob(
                    pol.head,
                    &out,
                    &pol.log_std,
                    &s.step.raw,
                    &s.step.mask,
                    coef,
                    &mut g_out,
                    g_ls,
                );
            }
            if cfg.entropy_coef != 0.0 {
                heads::grad_entropy(pol.head, &out, &s.step.mask, -cfg.entropy_coef / m, &mut g_out, g_ls);
            }
            pol.net.backward(&cache, &g_out, g_net);

            let v_raw = self.value.forward_into(&s.step.obs, &mut cache)?[0];
            let v = self.value_scale * v_raw;
            let err = v - s.target;
            value_se += err * err;
            self.value.backward(&cache, &[err * self.value_scale / m], &mut grad_value);
        }
        let policy_loss = -surrogate / m;
        let value_loss = value_se / m;
        let entropy = ent / m;
        let loss = policy_loss + 0.5 * value_loss - cfg.entropy_coef * entropy;
        Ok(LossGrad {
            loss,
            diagnostics: PpoDiagnostics {
                policy_loss,
                value_loss,
                entropy,
                clip_fraction: clipped as f64 / m,
                approx_kl: kl / m,
            },
            grad_policy,
            grad_value,
        })
    }

    /// Run `cfg.epochs` passes of shuffled minibatch PPO over the finished
    /// buffers. Advantages are normalized per minibatch.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        buffers: &[&RolloutBuffer],
        cfg: &TrainerConfig,
        rng: &mut R,
    ) -> Result<UpdateStats> {
        let mut all: Vec<(&Step, f64, f64)> = Vec::new();
        for b in buffers {
            let adv = b.advantages()?;
            let ret = b.returns()?;
            for (j, s) in b.steps().iter().enumerate() {
                all.push((s, adv[j], ret[j]));
            }
        }
        if all.is_empty() {
            return Ok(UpdateStats::default());
        }
        let mut idx: Vec<usize> = (0..all.len()).collect();
        let mut stats = UpdateStats {
            samples: all.len(),
            ..UpdateStats::default()
        };
        for _ in 0..cfg.epochs {
            idx.shuffle(rng);
            for chunk in idx.chunks(cfg.minibatch_size) {
                let mut adv: Vec<f64> = chunk.iter().map(|&i| all[i].1).collect();
                normalize_advantages(&mut adv);
                let batch: Vec<Sampled<'_>> = chunk
                    .iter()
                    .zip(&adv)
                    .map(|(&i, &a)| Sampled {
                        step: all[i].0,
                        advantage: a,
                        target: all[i].2,
                    })
                    .collect();
                let mut lg = self.loss_and_grad(&batch, cfg)?;
                clip_norm(&mut lg.grad_policy, cfg.max_grad_norm);
                clip_norm(&mut lg.grad_value, cfg.max_grad_norm);
                let lr = cfg.learning_rate;
                if lr > 0.0 {
                    let Policy { net, log_std, .. } = &mut self.policy;
                    self.opt_policy.update_segments(
                        &mut [net.params_mut(), log_std.as_mut_slice()],
                        &lg.grad_policy,
                        lr,
                    )?;
                    self.opt_value.update(self.value.params_mut(), &lg.grad_value, lr)?;
                }
                let d = &mut stats.diagnostics;
                d.policy_loss += lg.diagnostics.policy_loss;
                d.value_loss += lg.diagnostics.value_loss;
                d.entropy += lg.diagnostics.entropy;
                d.clip_fraction += lg.diagnostics.clip_fraction;
                d.approx_kl += lg.diagnostics.approx_kl;
                stats.loss += lg.loss;
                stats.minibatches += 1;
            }
        }
        let k = stats.minibatches.max(1) as f64;
        let d = &mut stats.diagnostics;
        d.policy_loss /= k;
        d.value_loss /= k;
        d.entropy /= k;
        d.clip_fraction /= k;
        d.approx_kl /= k;
        stats.loss /= k;
        Ok(stats)
    }
}

fn clip_norm(g: &mut [f64], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        g.iter_mut().for_each(|x| *x *= s);
    }
}
