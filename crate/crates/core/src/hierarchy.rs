//! H-MAPPO: a clustering agent whose action is embedded in the observations
//! of per-AP power agents, plus the flat multi-agent baseline where every AP
//! picks both its cluster memberships and its powers.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ClusteringStrategy, EnvConfig, NetworkEnv, StepOutcome};
use crate::error::{Error, Result};
use crate::metrics::{MetricAccumulator, MetricSummary};
use crate::rl::{Agent, Checkpoint, Decision, HeadKind, RolloutBuffer, Step, TrainerConfig, UpdateStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Hmappo,
    FlatMappo,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hmappo" => Some(Mode::Hmappo),
            "mappo" | "flat" | "flat_mappo" => Some(Mode::FlatMappo),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Hmappo => "hmappo",
            Mode::FlatMappo => "mappo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub mode: Mode,
    /// The clustering agent acts every this many steps and the last
    /// clustering is kept in between.
    pub high_action_period: usize,
    /// One parameter set for all low-level agents.
    pub shared_low: bool,
    /// During the first training episode low-level agents only see the
    /// clustering, with their local features zeroed.
    pub first_episode_bootstrap: bool,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Hmappo,
            high_action_period: 1,
            shared_low: true,
            first_episode_bootstrap: true,
        }
    }
}

impl HierarchyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.high_action_period == 0 {
            return Err(Error::config("hierarchy.high_action_period", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSet {
    pub mode: Mode,
    /// Absent in flat mode.
    pub high: Option<Agent>,
    /// One shared agent, or one per AP.
    pub low: Vec<Agent>,
    num_users: usize,
    num_aps: usize,
}

impl AgentSet {
    pub fn new<R: Rng + ?Sized>(
        env: &EnvConfig,
        h: &HierarchyConfig,
        trainer: &TrainerConfig,
        rng: &mut R,
    ) -> Result<Self> {
        h.validate()?;
        trainer.validate()?;
        let (n, k) = (env.num_users, env.num_aps);
        let copies = if h.shared_low { 1 } else { k };
        let (high, low) = match h.mode {
            Mode::Hmappo => {
                let high = Agent::new(env.high_obs_dim(), n * k, HeadKind::Bernoulli, trainer, rng)?;
                let low = (0..copies)
                    .map(|_| Agent::new(env.low_obs_dim(), n, HeadKind::Gaussian, trainer, rng))
                    .collect::<Result<Vec<_>>>()?;
                (Some(high), low)
            }
            Mode::FlatMappo => {
                let low = (0..copies)
                    .map(|_| Agent::new(env.flat_obs_dim(), 2 * n, HeadKind::Mixed { bits: n }, trainer, rng))
                    .collect::<Result<Vec<_>>>()?;
                (None, low)
            }
        };
        Ok(Self {
            mode: h.mode,
            high,
            low,
            num_users: n,
            num_aps: k,
        })
    }

    pub fn low_agent(&self, ap: usize) -> &Agent {
        if self.low.len() == 1 {
            &self.low[0]
        } else {
            &self.low[ap]
        }
    }

    pub fn shared_low(&self) -> bool {
        self.low.len() == 1
    }

    fn check_env(&self, env: &NetworkEnv) -> Result<()> {
        if env.num_users() != self.num_users || env.num_aps() != self.num_aps {
            return Err(Error::Shape {
                expected: self.num_users * self.num_aps,
                got: env.num_users() * env.num_aps(),
            });
        }
        Ok(())
    }

    pub fn to_checkpoint(&self, trainer: &TrainerConfig) -> Checkpoint {
        let mut agents = Vec::new();
        if let Some(h) = &self.high {
            agents.push(("high".to_string(), h.clone()));
        }
        for (k, a) in self.low.iter().enumerate() {
            agents.push((format!("low.{k}"), a.clone()));
        }
        Checkpoint::new(trainer.clone(), agents)
    }

    pub fn from_checkpoint(c: &Checkpoint, env: &EnvConfig) -> Result<Self> {
        let high = c.agent("high").cloned();
        let low: Vec<Agent> = c
            .agents
            .iter()
            .filter(|(n, _)| n.starts_with("low."))
            .map(|(_, a)| a.clone())
            .collect();
        let (n, k) = (env.num_users, env.num_aps);
        if low.is_empty() || (low.len() != 1 && low.len() != k) {
            return Err(Error::Checkpoint(format!(
                "expected 1 or {k} low-level agents, found {}",
                low.len()
            )));
        }
        let mode = if high.is_some() { Mode::Hmappo } else { Mode::FlatMappo };
        let (obs, act) = match mode {
            Mode::Hmappo => (env.low_obs_dim(), n),
            Mode::FlatMappo => (env.flat_obs_dim(), 2 * n),
        };
        if low.iter().any(|a| a.obs_dim() != obs || a.act_dim() != act) {
            return Err(Error::Checkpoint("low-level agent shape does not match the scenario".into()));
        }
        if let Some(h) = &high {
            if h.obs_dim() != env.high_obs_dim() || h.act_dim() != n * k {
                return Err(Error::Checkpoint("high-level agent shape does not match the scenario".into()));
            }
        }
        Ok(Self {
            mode,
            high,
            low,
            num_users: n,
            num_aps: k,
        })
    }
}

/// Per-stream rollout buffers: the clustering agent and one stream per AP.
#[derive(Debug, Clone, Default)]
pub struct Streams {
    pub high: RolloutBuffer,
    pub low: Vec<RolloutBuffer>,
}

impl Streams {
    pub fn new(num_aps: usize) -> Self {
        Self {
            high: RolloutBuffer::new(),
            low: (0..num_aps).map(|_| RolloutBuffer::new()).collect(),
        }
    }

    fn truncate(&mut self, v: &BootstrapValues, gamma: f64) {
        self.high.truncate(v.high, gamma);
        for (b, &lv) in self.low.iter_mut().zip(&v.low) {
            b.truncate(lv, gamma);
        }
    }

    fn finish(&mut self, v: &BootstrapValues, gamma: f64, lambda: f64) {
        self.high.finish(v.high, gamma, lambda);
        for (b, &lv) in self.low.iter_mut().zip(&v.low) {
            b.finish(lv, gamma, lambda);
        }
    }
}

/// How a single step is played.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    /// Modes instead of samples.
    pub deterministic: bool,
    /// Low-level agents see their local features (false during the bootstrap episode).
    pub local_low_obs: bool,
    /// The clustering agent acts this step.
    pub decide_high: bool,
}

impl StepContext {
    pub fn evaluation() -> Self {
        Self {
            deterministic: true,
            local_low_obs: true,
            decide_high: true,
        }
    }
}

fn active_row_mask(env: &NetworkEnv) -> Vec<bool> {
    let k = env.num_aps();
    env.users()
        .iter()
        .flat_map(|u| std::iter::repeat_n(u.active, k))
        .collect()
}

fn column_mask(s: &ClusteringStrategy, ap: usize) -> Vec<bool> {
    (0..s.users()).map(|i| s.get(i, ap)).collect()
}

/// Play one environment step with the given agents, optionally recording
/// transitions.
pub fn policy_step<R: Rng + ?Sized>(
    agents: &AgentSet,
    env: &mut NetworkEnv,
    rng: &mut R,
    ctx: &StepContext,
    record: Option<&mut Streams>,
) -> Result<StepOutcome> {
    agents.check_env(env)?;
    match agents.mode {
        Mode::Hmappo => hmappo_step(agents, env, rng, ctx, record),
        Mode::FlatMappo => flat_step(agents, env, rng, ctx, record),
    }
}

/// Critic values are only needed when transitions are recorded.
fn decide<R: Rng + ?Sized>(
    agent: &Agent,
    obs: &[f64],
    mask: &[bool],
    deterministic: bool,
    rng: &mut R,
    with_value: bool,
) -> Result<Decision> {
    if with_value {
        return agent.act(obs, mask, deterministic, rng);
    }
    Ok(Decision {
        sample: agent.policy.act(obs, mask, deterministic, rng)?,
        value: 0.0,
    })
}

fn hmappo_step<R: Rng + ?Sized>(
    agents: &AgentSet,
    env: &mut NetworkEnv,
    rng: &mut R,
    ctx: &StepContext,
    record: Option<&mut Streams>,
) -> Result<StepOutcome> {
    let high = agents
        .high
        .as_ref()
        .ok_or(Error::Ordering("hierarchical step without a clustering agent"))?;
    let k = env.num_aps();
    let recording = record.is_some();
    let mut high_step = None;
    let bits: Vec<bool> = if ctx.decide_high {
        let obs = env.high_obs();
        let mask = active_row_mask(env);
        let d = decide(high, &obs, &mask, ctx.deterministic, rng, recording)?;
        let bits = d.sample.raw.iter().map(|&b| b == 1.0).collect();
        high_step = Some(Step {
            obs,
            raw: d.sample.raw,
            mask,
            log_prob: d.sample.log_prob,
            value: d.value,
            reward: 0.0,
            done: false,
        });
        bits
    } else {
        env.previous_clustering().as_bits().to_vec()
    };
    let strategy = env.apply_high_action(&bits)?;

    let mut low_steps = Vec::with_capacity(k);
    for ap in 0..k {
        let obs = if ctx.local_low_obs {
            env.low_obs(ap)?
        } else {
            env.low_obs_cluster_only(ap)?
        };
        let mask = column_mask(&strategy, ap);
        let d = decide(agents.low_agent(ap), &obs, &mask, ctx.deterministic, rng, recording)?;
        env.apply_low_action(ap, &d.sample.action)?;
        low_steps.push(Step {
            obs,
            raw: d.sample.raw,
            mask,
            log_prob: d.sample.log_prob,
            value: d.value,
            reward: 0.0,
            done: false,
        });
    }
    let outcome = env.finish_step()?;

    if let Some(rec) = record {
        match high_step {
            Some(mut s) => {
                s.reward = outcome.high_reward;
                rec.high.push(s);
            }
            None => {
                if let Some(last) = rec.high.last_mut() {
                    last.reward += outcome.high_reward;
                }
            }
        }
        for (ap, mut s) in low_steps.into_iter().enumerate() {
            s.reward = outcome.low_rewards[ap];
            rec.low[ap].push(s);
        }
    }
    Ok(outcome)
}

fn flat_step<R: Rng + ?Sized>(
    agents: &AgentSet,
    env: &mut NetworkEnv,
    rng: &mut R,
    ctx: &StepContext,
    record: Option<&mut Streams>,
) -> Result<StepOutcome> {
    let (n, k) = (env.num_users(), env.num_aps());
    let recording = record.is_some();
    let active: Vec<bool> = env.users().iter().map(|u| u.active).collect();
    let pre_mask: Vec<bool> = active.iter().chain(active.iter()).copied().collect();
    let mut decisions = Vec::with_capacity(k);
    let mut bits = vec![false; n * k];
    for ap in 0..k {
        let obs = env.flat_obs(ap)?;
        let d = decide(agents.low_agent(ap), &obs, &pre_mask, ctx.deterministic, rng, recording)?;
        for i in 0..n {
            bits[i * k + ap] = d.sample.raw[i] == 1.0;
        }
        decisions.push((obs, d));
    }
    let strategy = env.apply_high_action(&bits)?;
    let mut steps = Vec::with_capacity(k);
    for (ap, (obs, d)) in decisions.into_iter().enumerate() {
        env.apply_low_action(ap, &d.sample.action[n..])?;
        if record.is_some() {
            // Power dims only count for links that ended up in the clustering.
            let mut mask = active.clone();
            mask.extend(column_mask(&strategy, ap));
            let log_prob = agents.low_agent(ap).policy.log_prob(&obs, &d.sample.raw, &mask)?;
            steps.push(Step {
                obs,
                raw: d.sample.raw,
                mask,
                log_prob,
                value: d.value,
                reward: 0.0,
                done: false,
            });
        }
    }
    let outcome = env.finish_step()?;
    if let Some(rec) = record {
        for (ap, mut s) in steps.into_iter().enumerate() {
            s.reward = outcome.low_rewards[ap] + outcome.high_reward;
            rec.low[ap].push(s);
        }
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
struct BootstrapValues {
    high: f64,
    low: Vec<f64>,
}

/// Values of the state the environment is in now, for cutting rollouts.
fn bootstrap_values(agents: &AgentSet, env: &mut NetworkEnv, local: bool) -> Result<BootstrapValues> {
    let k = env.num_aps();
    match agents.mode {
        Mode::Hmappo => {
            let high = agents.high.as_ref().expect("hierarchical agent set");
            let obs = env.high_obs();
            let v_high = high.value_of(&obs)?;
            let mask = active_row_mask(env);
            let mut unused = ChaCha8Rng::seed_from_u64(0);
            let d = high.act(&obs, &mask, true, &mut unused)?;
            let bits: Vec<bool> = d.sample.raw.iter().map(|&b| b == 1.0).collect();
            let s = ClusteringStrategy::from_bits(env.num_users(), k, &bits)?;
            let (s, _) = env.repair(s);
            let low = (0..k)
                .map(|ap| {
                    let o = env.low_obs_with(ap, &s, local);
                    agents.low_agent(ap).value_of(&o)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(BootstrapValues { high: v_high, low })
        }
        Mode::FlatMappo => {
            let low = (0..k)
                .map(|ap| {
                    let o = env.flat_obs(ap)?;
                    agents.low_agent(ap).value_of(&o)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(BootstrapValues { high: 0.0, low })
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub streams: Option<Streams>,
    pub outcomes: Vec<StepOutcome>,
    pub summary: MetricSummary,
}

/// Play one episode from the environment's current (freshly reset) state.
/// With `train`, actions are sampled and transitions recorded; otherwise the
/// policies act on their modes.
pub fn hmappo_episode<R: Rng + ?Sized>(
    agents: &AgentSet,
    env: &mut NetworkEnv,
    rng: &mut R,
    train: bool,
    period: usize,
) -> Result<EpisodeResult> {
    if env.step_index() != 0 {
        return Err(Error::Ordering("episode must start from a reset environment"));
    }
    let mut streams = train.then(|| Streams::new(env.num_aps()));
    let mut acc = MetricAccumulator::new(env.config().targets.eps_max);
    let mut outcomes = Vec::with_capacity(env.config().episode_len);
    loop {
        let ctx = StepContext {
            deterministic: !train,
            local_low_obs: true,
            decide_high: env.step_index() % period.max(1) == 0,
        };
        let o = policy_step(agents, env, rng, &ctx, streams.as_mut())?;
        acc.push(&o);
        let done = o.done;
        outcomes.push(o);
        if done {
            break;
        }
    }
    Ok(EpisodeResult {
        streams,
        outcomes,
        summary: acc.summary(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hierarchy: HierarchyConfig,
    pub trainer: TrainerConfig,
    /// Seeds policy initialisation and action sampling.
    pub seed: u64,
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub env_steps: usize,
    pub high_reward_mean: f64,
    pub low_reward_mean: f64,
    pub dep_violation_rate: f64,
    pub mean_power_fraction: f64,
    pub reconfig_rate: f64,
    pub mean_cluster_size: f64,
    pub wall_time_s: f64,
    pub high_update: UpdateStats,
    pub low_update: UpdateStats,
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub agents: AgentSet,
    pub log: Vec<IterationLog>,
}

/// Train both levels (or the flat agents) for `trainer.iterations`
/// iterations of `trainer.batch_size` environment steps each.
pub fn train(
    env_cfg: &EnvConfig,
    cfg: &TrainConfig,
    mut on_iteration: impl FnMut(&IterationLog),
) -> Result<TrainingRun> {
    let tc = &cfg.trainer;
    tc.validate()?;
    cfg.hierarchy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut agents = AgentSet::new(env_cfg, &cfg.hierarchy, tc, &mut rng)?;
    let mut env = NetworkEnv::new(env_cfg.clone())?;
    let period = cfg.hierarchy.high_action_period;
    let mut episode = 0usize;
    let mut env_steps = 0usize;
    let mut log = Vec::with_capacity(tc.iterations);
    let start = Instant::now();

    for iteration in 0..tc.iterations {
        let mut streams = Streams::new(env.num_aps());
        let mut acc = MetricAccumulator::new(env_cfg.targets.eps_max);
        let mut last_done = false;
        for _ in 0..tc.batch_size {
            let local = !(cfg.hierarchy.first_episode_bootstrap && episode == 0);
            let ctx = StepContext {
                deterministic: false,
                local_low_obs: local,
                decide_high: env.step_index() % period == 0,
            };
            let o = policy_step(&agents, &mut env, &mut rng, &ctx, Some(&mut streams))?;
            acc.push(&o);
            env_steps += 1;
            last_done = o.done;
            if o.done {
                let v = bootstrap_values(&agents, &mut env, local)?;
                streams.truncate(&v, tc.gamma);
                env.reset()?;
                episode += 1;
            }
        }
        let v = if last_done {
            BootstrapValues {
                high: 0.0,
                low: vec![0.0; env.num_aps()],
            }
        } else {
            let local = !(cfg.hierarchy.first_episode_bootstrap && episode == 0);
            bootstrap_values(&agents, &mut env, local)?
        };
        streams.finish(&v, tc.gamma, tc.gae_lambda);

        let high_update = match agents.high.as_mut() {
            Some(h) if !streams.high.is_empty() => h.update(&[&streams.high], tc, &mut rng)?,
            _ => UpdateStats::default(),
        };
        let low_update = if agents.shared_low() {
            let refs: Vec<&RolloutBuffer> = streams.low.iter().collect();
            agents.low[0].update(&refs, tc, &mut rng)?
        } else {
            let mut merged = UpdateStats::default();
            for (a, b) in agents.low.iter_mut().zip(&streams.low) {
                let s = a.update(&[b], tc, &mut rng)?;
                merged.samples += s.samples;
                merged.minibatches += s.minibatches;
                merged.loss += s.loss / streams.low.len() as f64;
            }
            merged
        };

        let s = acc.summary();
        let row = IterationLog {
            iteration,
            env_steps,
            high_reward_mean: s.high_reward_mean,
            low_reward_mean: s.low_reward_mean,
            dep_violation_rate: s.dep_violation_rate,
            mean_power_fraction: s.mean_power_fraction,
            reconfig_rate: s.reconfig_rate,
            mean_cluster_size: s.mean_cluster_size,
            wall_time_s: start.elapsed().as_secs_f64(),
            high_update,
            low_update,
        };
        on_iteration(&row);
        log.push(row);
    }
    Ok(TrainingRun { agents, log })
}
