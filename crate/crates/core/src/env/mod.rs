//! The clustering and power allocation MDP.
//!
//! One step runs as a fixed pipeline:
//!
//! 1. [`NetworkEnv::apply_high_action`] sets the serving clusters (with repair of
//!    empty rows);
//! 2. [`NetworkEnv::low_obs`] exposes each AP's local view, which embeds the
//!    clustering just applied;
//! 3. [`NetworkEnv::apply_low_action`] sets each AP's power row;
//! 4. [`NetworkEnv::finish_step`] draws fading, evaluates SINR, decoding error
//!    and outage, computes both rewards, then moves users and applies arrivals
//!    and departures.
//!
//! Calling these out of order is an error.

mod reward;
mod types;

pub use reward::{high_reward, low_reward, objective_value, ObjectiveTerms, Weights};
pub use types::{ClusteringStrategy, PowerAllocation};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{
    self, sample_fading, AntennaConfig, Attenuation, InterferenceMode, LinkMatrix, LinkState,
    PathLossModel, RadioParams,
};
use crate::error::{Error, Result};
use crate::geometry::{
    angles_to, step_mobility, user_lifecycle, MobilityParams, ServiceArea, TrafficParams,
    UserState, Vec3,
};
use crate::reliability::{self, ClusterSignalModel, ReliabilityTargets};

/// Channel gains in the high-level observation are min-max scaled over this dB range.
pub const GAIN_DB_RANGE: (f64, f64) = (-160.0, -60.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub num_aps: usize,
    pub num_users: usize,
    pub area: ServiceArea,
    pub ap_height: f64,
    pub radio: RadioParams,
    pub antenna: AntennaConfig,
    pub path_loss: PathLossModel,
    pub mobility: MobilityParams,
    pub traffic: TrafficParams,
    pub targets: ReliabilityTargets,
    pub weights_high: Weights,
    pub weights_low: Weights,
    pub episode_len: usize,
    pub arrival_prob: f64,
    pub departure_prob: f64,
    pub interference: InterferenceMode,
    /// LOS states are re-drawn every `los_coherence_s` seconds.
    pub los_coherence_s: f64,
    /// Std-dev (m) of the Gaussian error on positions shown to agents.
    pub position_noise_std: f64,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            num_aps: 19,
            num_users: 6,
            area: ServiceArea::default(),
            ap_height: 25.0,
            radio: RadioParams::default(),
            antenna: AntennaConfig::default(),
            path_loss: PathLossModel::default(),
            mobility: MobilityParams::default(),
            traffic: TrafficParams::default(),
            targets: ReliabilityTargets::default(),
            weights_high: Weights::default(),
            weights_low: Weights::default(),
            episode_len: 200,
            arrival_prob: 0.005,
            departure_prob: 0.005,
            interference: InterferenceMode::Steered,
            los_coherence_s: 1.0,
            position_noise_std: 0.0,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_aps == 0 {
            return Err(Error::config("env.num_aps", "need at least one AP"));
        }
        if self.num_users == 0 {
            return Err(Error::config("env.num_users", "need at least one user slot"));
        }
        if self.episode_len == 0 {
            return Err(Error::config("env.episode_len", "must be >= 1"));
        }
        self.area.validate()?;
        self.radio.validate()?;
        self.antenna.validate()?;
        self.mobility.validate()?;
        self.targets.validate()?;
        if self.traffic.bits_b == 0 {
            return Err(Error::config("traffic.bits_b", "must be >= 1"));
        }
        if self.traffic.blocklength_n == 0 {
            return Err(Error::config("traffic.blocklength_n", "must be >= 1"));
        }
        for (name, p) in [
            ("env.arrival_prob", self.arrival_prob),
            ("env.departure_prob", self.departure_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(name, "must lie in [0, 1]"));
            }
        }
        for (name, w) in [
            ("weights.high", self.weights_high),
            ("weights.low", self.weights_low),
        ] {
            if !(w.w1 >= 0.0 && w.w2 >= 0.0) {
                return Err(Error::config(name, "weights must be non-negative"));
            }
        }
        if !(self.los_coherence_s > 0.0) {
            return Err(Error::config("env.los_coherence_s", "must be > 0"));
        }
        if !(self.position_noise_std >= 0.0) {
            return Err(Error::config("env.position_noise_std", "must be >= 0"));
        }
        let h = self.area.z_min;
        if !(h > self.path_loss.h_min && self.area.z_max <= self.path_loss.h_max) {
            return Err(Error::config(
                "area.z_min",
                format!(
                    "UAV altitude band must lie in ({}, {}] m",
                    self.path_loss.h_min, self.path_loss.h_max
                ),
            ));
        }
        if !(self.ap_height >= 0.0 && self.ap_height < self.area.z_min) {
            return Err(Error::config("env.ap_height", "must be >= 0 and below area.z_min"));
        }
        Ok(())
    }

    pub fn high_obs_dim(&self) -> usize {
        let (n, k) = (self.num_users, self.num_aps);
        3 * n + k + 2 * n * k + n
    }

    pub fn low_obs_dim(&self) -> usize {
        self.num_users * (5 + self.num_aps)
    }

    pub fn flat_obs_dim(&self) -> usize {
        6 * self.num_users
    }
}

/// Per-user results of one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserOutcome {
    pub active: bool,
    /// Active and present on the previous step, so part of the clustering reward.
    pub counted: bool,
    pub sinr: f64,
    pub dep: f64,
    pub outage_prob: f64,
    pub cluster_changed: bool,
    pub cluster_size: usize,
    pub repaired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step: usize,
    pub high_reward: f64,
    pub low_rewards: Vec<f64>,
    pub users: Vec<UserOutcome>,
    pub ap_power: Vec<f64>,
    /// Total power over `active users x APs x P_max`.
    pub power_fraction: f64,
    pub objective: ObjectiveTerms,
    pub done: bool,
}

impl StepOutcome {
    pub fn mean_low_reward(&self) -> f64 {
        self.low_rewards.iter().sum::<f64>() / self.low_rewards.len().max(1) as f64
    }

    /// High-level reward plus the mean low-level reward.
    pub fn combined_reward(&self) -> f64 {
        self.high_reward + self.mean_low_reward()
    }

    pub fn dep_violations(&self, eps_max: f64) -> (usize, usize) {
        let active: Vec<_> = self.users.iter().filter(|u| u.active).collect();
        (active.iter().filter(|u| u.dep > eps_max).count(), active.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    AwaitHigh,
    AwaitLow,
    Done,
}

#[derive(Debug, Clone)]
pub struct NetworkEnv {
    cfg: EnvConfig,
    rng: ChaCha8Rng,
    obs_rng: ChaCha8Rng,
    ap_positions: Vec<Vec3>,
    users: Vec<UserState>,
    /// Users that arrived on the last lifecycle step and have no previous cluster.
    fresh: Vec<bool>,
    links: LinkMatrix,
    /// Clustering of the previous step, M(t-1).
    prev_clustering: ClusteringStrategy,
    clustering: ClusteringStrategy,
    repaired: Vec<bool>,
    powers: PowerAllocation,
    gamma_th: Vec<f64>,
    phase: Phase,
    t: usize,
    los_timer: f64,
    next_id: u64,
}

impl NetworkEnv {
    /// Build the topology (AP positions are drawn from the config seed) and reset.
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let mut topo_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        topo_rng.set_stream(1);
        let ap_positions = (0..cfg.num_aps)
            .map(|_| {
                Vec3::new(
                    topo_rng.random::<f64>() * cfg.area.x_extent,
                    topo_rng.random::<f64>() * cfg.area.y_extent,
                    cfg.ap_height,
                )
            })
            .collect();
        Self::with_ap_positions(cfg, ap_positions)
    }

    pub fn with_ap_positions(cfg: EnvConfig, ap_positions: Vec<Vec3>) -> Result<Self> {
        cfg.validate()?;
        if ap_positions.len() != cfg.num_aps {
            return Err(Error::Shape {
                expected: cfg.num_aps,
                got: ap_positions.len(),
            });
        }
        let (n, k) = (cfg.num_users, cfg.num_aps);
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut obs_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        obs_rng.set_stream(2);
        let placeholder = LinkState {
            path_loss_db: 0.0,
            los: false,
            fading_power: 1.0,
            theta: 0.0,
            phi: 0.0,
            d3d: 1.0,
            d2d: 0.0,
        };
        let mut env = Self {
            rng,
            obs_rng,
            ap_positions,
            users: Vec::new(),
            fresh: vec![false; n],
            links: LinkMatrix::new(n, k, vec![placeholder; n * k])?,
            prev_clustering: ClusteringStrategy::empty(n, k),
            clustering: ClusteringStrategy::empty(n, k),
            repaired: vec![false; n],
            powers: PowerAllocation::zeros(n, k),
            gamma_th: vec![0.0; n],
            phase: Phase::AwaitHigh,
            t: 0,
            los_timer: 0.0,
            next_id: 0,
            cfg,
        };
        env.reset()?;
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn ap_positions(&self) -> &[Vec3] {
        &self.ap_positions
    }

    pub fn users(&self) -> &[UserState] {
        &self.users
    }

    pub fn links(&self) -> &LinkMatrix {
        &self.links
    }

    pub fn powers(&self) -> &PowerAllocation {
        &self.powers
    }

    /// Clustering in force: the one applied this step, or the previous one
    /// between steps.
    pub fn clustering(&self) -> &ClusteringStrategy {
        &self.clustering
    }

    pub fn previous_clustering(&self) -> &ClusteringStrategy {
        &self.prev_clustering
    }

    pub fn step_index(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    pub fn num_users(&self) -> usize {
        self.cfg.num_users
    }

    pub fn num_aps(&self) -> usize {
        self.cfg.num_aps
    }

    /// Reseed the episode stream and reset. Topology is unchanged.
    pub fn reset_with_seed(&mut self, seed: u64) -> Result<Vec<f64>> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.obs_rng = ChaCha8Rng::seed_from_u64(seed);
        self.obs_rng.set_stream(2);
        self.reset()
    }

    /// Start a new episode: users uniform in the area at the mean velocity,
    /// closest-AP clustering, every serving link at `P_max / 2`.
    pub fn reset(&mut self) -> Result<Vec<f64>> {
        let (n, k) = (self.cfg.num_users, self.cfg.num_aps);
        self.users = (0..n)
            .map(|i| UserState {
                id: i as u64,
                position: self.cfg.area.sample_point(&mut self.rng),
                velocity: self.cfg.mobility.mean_velocity,
                active: true,
                bits_b: self.cfg.traffic.bits_b,
                blocklength_n: self.cfg.traffic.blocklength_n,
            })
            .collect();
        self.next_id = n as u64;
        self.fresh = vec![false; n];
        for i in 0..n {
            self.refresh_user_links(i, true)?;
            self.gamma_th[i] = self.user_gamma_th(i)?;
        }
        self.clustering = ClusteringStrategy::empty(n, k);
        for i in 0..n {
            let k_best = self.closest_ap(i);
            self.clustering.set(i, k_best, true);
        }
        self.prev_clustering = self.clustering.clone();
        self.powers = PowerAllocation::zeros(n, k);
        for i in 0..n {
            for kk in 0..k {
                if self.clustering.get(i, kk) {
                    self.powers.set(i, kk, self.cfg.radio.p_max / 2.0);
                }
            }
        }
        self.repaired = vec![false; n];
        self.phase = Phase::AwaitHigh;
        self.t = 0;
        self.los_timer = 0.0;
        Ok(self.high_obs())
    }

    fn user_gamma_th(&self, i: usize) -> Result<f64> {
        let u = &self.users[i];
        if i > 0 {
            let p = &self.users[i - 1];
            if p.bits_b == u.bits_b && p.blocklength_n == u.blocklength_n {
                return Ok(self.gamma_th[i - 1]);
            }
        }
        self.cfg.targets.gamma_th(u.blocklength_n, u.bits_b)
    }

    /// Move an active user and recompute its links with fresh LOS draws.
    pub fn place_user(&mut self, user: usize, position: Vec3) -> Result<()> {
        if !self.cfg.area.contains(position) {
            return Err(Error::config("position", "outside the service area"));
        }
        self.users[user].position = position;
        self.refresh_user_links(user, true)
    }

    /// Lowest-index AP at minimum 3D distance.
    pub fn closest_ap(&self, user: usize) -> usize {
        let mut best = 0;
        for k in 1..self.cfg.num_aps {
            if self.links.get(user, k).d3d < self.links.get(user, best).d3d {
                best = k;
            }
        }
        best
    }

    /// Lowest-index AP with the largest large-scale gain (smallest path loss).
    pub fn best_gain_ap(&self, user: usize) -> usize {
        let mut best = 0;
        for k in 1..self.cfg.num_aps {
            if self.links.get(user, k).path_loss_db < self.links.get(user, best).path_loss_db {
                best = k;
            }
        }
        best
    }

    /// Large-scale gain `-PL` of every link of `user`, in dB.
    pub fn gains_db(&self, user: usize) -> Vec<f64> {
        (0..self.cfg.num_aps)
            .map(|k| -self.links.get(user, k).path_loss_db)
            .collect()
    }

    /// LOS-probability-averaged path gain of every link of `user`, in dB.
    pub fn expected_gains_db(&self, user: usize) -> Result<Vec<f64>> {
        let h = self.users[user].position.z;
        (0..self.cfg.num_aps)
            .map(|k| {
                let l = self.links.get(user, k);
                self.cfg
                    .path_loss
                    .expected_gain_db(l.d2d, l.d3d, h, self.cfg.antenna.carrier_freq)
            })
            .collect()
    }

    /// Recompute geometry and path loss of `user`'s links, redrawing LOS if asked.
    fn refresh_user_links(&mut self, user: usize, resample_los: bool) -> Result<()> {
        let pos = self.users[user].position;
        for k in 0..self.cfg.num_aps {
            let geo = angles_to(self.ap_positions[k], pos)?;
            let pl = &self.cfg.path_loss;
            let fc = self.cfg.antenna.carrier_freq;
            let (path_loss_db, los) = if resample_los {
                pl.link_loss(geo.d2d, geo.d3d, pos.z, fc, &mut self.rng)?
            } else {
                let los = self.links.get(user, k).los;
                (pl.path_loss_db(los, geo.d3d, pos.z, fc), los)
            };
            let fading = self.links.get(user, k).fading_power;
            *self.links.get_mut(user, k) = LinkState::new(geo, path_loss_db, los, fading);
        }
        Ok(())
    }

    fn observed_position(&mut self, user: usize) -> Vec3 {
        let p = self.users[user].position;
        let s = self.cfg.position_noise_std;
        if s == 0.0 {
            return p;
        }
        let mut n = || s * self.obs_rng.sample::<f64, _>(StandardNormal);
        Vec3::new(p.x + n(), p.y + n(), p.z + n())
    }

    fn normalized_gain(db: f64) -> f64 {
        let (lo, hi) = GAIN_DB_RANGE;
        ((db - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    /// Global observation: positions (3N), AP loads (K), normalized gains (NK),
    /// previous clustering (NK), activity bits (N).
    pub fn high_obs(&mut self) -> Vec<f64> {
        let (n, k) = (self.cfg.num_users, self.cfg.num_aps);
        let area = self.cfg.area;
        let mut obs = Vec::with_capacity(self.cfg.high_obs_dim());
        for i in 0..n {
            if self.users[i].active {
                let p = self.observed_position(i);
                obs.push((p.x / area.x_extent).clamp(-1.0, 1.0));
                obs.push((p.y / area.y_extent).clamp(-1.0, 1.0));
                obs.push((p.z / area.z_max).clamp(-1.0, 1.0));
            } else {
                obs.extend_from_slice(&[0.0; 3]);
            }
        }
        let prev = &self.prev_clustering;
        for kk in 0..k {
            obs.push(prev.served_by(kk).len() as f64 / n as f64);
        }
        for i in 0..n {
            for kk in 0..k {
                obs.push(if self.users[i].active {
                    Self::normalized_gain(-self.links.get(i, kk).path_loss_db)
                } else {
                    0.0
                });
            }
        }
        obs.extend(prev.as_bits().iter().map(|&b| if b { 1.0 } else { 0.0 }));
        obs.extend(self.users.iter().map(|u| if u.active { 1.0 } else { 0.0 }));
        obs
    }

    /// Apply a clustering. Inactive rows are cleared; an active user with an
    /// empty row gets its best-gain AP.
    pub fn apply_clustering(&mut self, strategy: ClusteringStrategy) -> Result<ClusteringStrategy> {
        if self.phase != Phase::AwaitHigh {
            return Err(Error::Ordering("clustering applied twice or after the episode ended"));
        }
        let (n, k) = (self.cfg.num_users, self.cfg.num_aps);
        if strategy.users() != n || strategy.aps() != k {
            return Err(Error::Shape {
                expected: n * k,
                got: strategy.users() * strategy.aps(),
            });
        }
        let (strategy, repaired) = self.repair(strategy);
        self.repaired = repaired;
        self.clustering = strategy.clone();
        self.powers = PowerAllocation::zeros(n, k);
        self.phase = Phase::AwaitLow;
        Ok(strategy)
    }

    /// The repair [`Self::apply_clustering`] would perform, without applying it.
    pub fn repair(&self, mut strategy: ClusteringStrategy) -> (ClusteringStrategy, Vec<bool>) {
        let mut repaired = vec![false; self.cfg.num_users];
        for i in 0..self.cfg.num_users {
            if !self.users[i].active {
                strategy.clear_row(i);
            } else if strategy.cluster_size(i) == 0 {
                let best = self.best_gain_ap(i);
                strategy.set(i, best, true);
                repaired[i] = true;
            }
        }
        (strategy, repaired)
    }

    /// High-level action as an `N x K` row-major bit vector.
    pub fn apply_high_action(&mut self, bits: &[bool]) -> Result<ClusteringStrategy> {
        let s = ClusteringStrategy::from_bits(self.cfg.num_users, self.cfg.num_aps, bits)?;
        self.apply_clustering(s)
    }

    /// Whether the last applied clustering needed repair, per user.
    pub fn repaired(&self) -> &[bool] {
        &self.repaired
    }

    /// Local view of AP `k`: per user slot the assigned bit, position relative to
    /// the AP, LOS bit and the user's cluster row. Unassigned slots are zero.
    pub fn low_obs(&mut self, ap: usize) -> Result<Vec<f64>> {
        self.low_obs_inner(ap, true)
    }

    /// [`Self::low_obs`] with the position and LOS entries zeroed.
    pub fn low_obs_cluster_only(&mut self, ap: usize) -> Result<Vec<f64>> {
        self.low_obs_inner(ap, false)
    }

    fn low_obs_inner(&mut self, ap: usize, local: bool) -> Result<Vec<f64>> {
        if self.phase != Phase::AwaitLow {
            return Err(Error::Ordering("low-level observation requested before the clustering action"));
        }
        let clustering = std::mem::replace(&mut self.clustering, ClusteringStrategy::empty(0, 0));
        let obs = self.low_obs_with(ap, &clustering, local);
        self.clustering = clustering;
        Ok(obs)
    }

    /// Low-level observation AP `ap` would get under `clustering`, in any phase.
    /// Used to bootstrap values at the end of a rollout.
    pub fn low_obs_with(&mut self, ap: usize, clustering: &ClusteringStrategy, local: bool) -> Vec<f64> {
        let (n, k) = (self.cfg.num_users, self.cfg.num_aps);
        let area = self.cfg.area;
        let apos = self.ap_positions[ap];
        let mut obs = vec![0.0; self.cfg.low_obs_dim()];
        for i in 0..n {
            if !clustering.get(i, ap) {
                continue;
            }
            let p = if local { Some(self.observed_position(i)) } else { None };
            let slot = &mut obs[i * (5 + k)..(i + 1) * (5 + k)];
            slot[0] = 1.0;
            if let Some(p) = p {
                slot[1] = ((p.x - apos.x) / area.x_extent).clamp(-1.0, 1.0);
                slot[2] = ((p.y - apos.y) / area.y_extent).clamp(-1.0, 1.0);
                slot[3] = (p.z / area.z_max).clamp(-1.0, 1.0);
                slot[4] = if self.links.get(i, ap).los { 1.0 } else { 0.0 };
            }
            for (dst, &b) in slot[5..].iter_mut().zip(clustering.row(i)) {
                *dst = if b { 1.0 } else { 0.0 };
            }
        }
        obs
    }

    /// Observation for a flat (non-hierarchical) AP agent, read before the
    /// clustering is applied (or after the episode ended): per slot the activity bit, relative position,
    /// LOS bit and whether this AP served the user on the previous step.
    pub fn flat_obs(&mut self, ap: usize) -> Result<Vec<f64>> {
        if self.phase == Phase::AwaitLow {
            return Err(Error::Ordering("flat observation requested mid-step"));
        }
        let n = self.cfg.num_users;
        let area = self.cfg.area;
        let apos = self.ap_positions[ap];
        let mut obs = vec![0.0; self.cfg.flat_obs_dim()];
        for i in 0..n {
            if !self.users[i].active {
                continue;
            }
            let p = self.observed_position(i);
            let slot = &mut obs[i * 6..(i + 1) * 6];
            slot[0] = 1.0;
            slot[1] = ((p.x - apos.x) / area.x_extent).clamp(-1.0, 1.0);
            slot[2] = ((p.y - apos.y) / area.y_extent).clamp(-1.0, 1.0);
            slot[3] = (p.z / area.z_max).clamp(-1.0, 1.0);
            slot[4] = if self.links.get(i, ap).los { 1.0 } else { 0.0 };
            slot[5] = if self.prev_clustering.get(i, ap) { 1.0 } else { 0.0 };
        }
        Ok(obs)
    }

    /// Set AP `k`'s power row from per-user fractions of `P_max`. Users not in
    /// the AP's served set get zero regardless of the action.
    pub fn apply_low_action(&mut self, ap: usize, raw: &[f64]) -> Result<Vec<f64>> {
        if self.phase != Phase::AwaitLow {
            return Err(Error::Ordering("power action before the clustering action"));
        }
        let n = self.cfg.num_users;
        if raw.len() != n {
            return Err(Error::Shape {
                expected: n,
                got: raw.len(),
            });
        }
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("low-level action"));
        }
        let p_max = self.cfg.radio.p_max;
        let row: Vec<f64> = (0..n)
            .map(|i| {
                if self.clustering.get(i, ap) {
                    raw[i].clamp(0.0, 1.0) * p_max
                } else {
                    0.0
                }
            })
            .collect();
        for (i, &p) in row.iter().enumerate() {
            self.powers.set(i, ap, p);
        }
        Ok(row)
    }

    /// Set every power at once (baselines). Entries are masked by the
    /// clustering and clamped to `[0, P_max]`.
    pub fn apply_power_allocation(&mut self, powers: &PowerAllocation) -> Result<()> {
        if self.phase != Phase::AwaitLow {
            return Err(Error::Ordering("power allocation before the clustering action"));
        }
        let (n, k) = (self.cfg.num_users, self.cfg.num_aps);
        if powers.users() != n || powers.aps() != k {
            return Err(Error::Shape {
                expected: n * k,
                got: powers.users() * powers.aps(),
            });
        }
        let p_max = self.cfg.radio.p_max;
        for i in 0..n {
            for kk in 0..k {
                let p = if self.clustering.get(i, kk) {
                    let v = powers.get(i, kk);
                    if !v.is_finite() {
                        return Err(Error::NonFinite("power allocation"));
                    }
                    v.clamp(0.0, p_max)
                } else {
                    0.0
                };
                self.powers.set(i, kk, p);
            }
        }
        Ok(())
    }

    /// Outage model of `user` under the current powers: mean received power per
    /// serving AP and the noise plus expected interference.
    pub fn cluster_signal_model(&self, user: usize) -> Result<Option<ClusterSignalModel>> {
        let cluster = self.clustering.cluster(user);
        let means: Vec<f64> = channel::cluster_components(
            user,
            &cluster,
            &self.powers,
            &self.links,
            &self.cfg.antenna,
            Attenuation::Mean,
        )
        .into_iter()
        .filter(|&m| m > 0.0)
        .collect();
        if means.is_empty() {
            return Ok(None);
        }
        let beta = self.cfg.radio.noise_power()
            + channel::interference_power(
                user,
                &self.powers,
                &self.links,
                &self.cfg.antenna,
                self.cfg.interference,
                Attenuation::Mean,
            );
        ClusterSignalModel::new(means, beta).map(Some)
    }

    /// Evaluate the step, compute rewards and advance users.
    pub fn finish_step(&mut self) -> Result<StepOutcome> {
        if self.phase != Phase::AwaitLow {
            return Err(Error::Ordering("step finished before actions were applied"));
        }
        let (n, k) = (self.cfg.num_users, self.cfg.num_aps);
        let p_max = self.cfg.radio.p_max;
        let noise = self.cfg.radio.noise_power();

        for i in 0..n {
            for kk in 0..k {
                self.links.get_mut(i, kk).fading_power = sample_fading(&mut self.rng);
            }
        }

        let mut users = Vec::with_capacity(n);
        for i in 0..n {
            let u = &self.users[i];
            if !u.active {
                users.push(UserOutcome {
                    active: false,
                    counted: false,
                    sinr: 0.0,
                    dep: 0.0,
                    outage_prob: 0.0,
                    cluster_changed: false,
                    cluster_size: 0,
                    repaired: false,
                });
                continue;
            }
            let cluster = self.clustering.cluster(i);
            let sinr = channel::sinr(
                i,
                &cluster,
                &self.powers,
                &self.links,
                &self.cfg.antenna,
                noise,
                self.cfg.interference,
            )?;
            let dep = reliability::dep(u.blocklength_n, u.bits_b, sinr);
            let outage_prob = match self.cluster_signal_model(i)? {
                Some(m) => reliability::outage_probability(&m, self.gamma_th[i])?,
                None => 1.0,
            };
            let counted = !self.fresh[i];
            users.push(UserOutcome {
                active: true,
                counted,
                sinr,
                dep,
                outage_prob,
                cluster_changed: counted && self.clustering.row(i) != self.prev_clustering.row(i),
                cluster_size: cluster.len(),
                repaired: self.repaired[i],
            });
        }

        let counted: Vec<&UserOutcome> = users.iter().filter(|u| u.counted).collect();
        let stable: Vec<bool> = counted.iter().map(|u| !u.cluster_changed).collect();
        let in_outage: Vec<bool> = counted
            .iter()
            .map(|u| u.outage_prob > self.cfg.targets.outage_max)
            .collect();
        let high = high_reward(&stable, &in_outage, self.cfg.weights_high);

        let eps_max = self.cfg.targets.eps_max;
        let mut low_rewards = Vec::with_capacity(k);
        let mut ap_power = Vec::with_capacity(k);
        for kk in 0..k {
            let served = self.clustering.served_by(kk);
            let powers: Vec<f64> = served.iter().map(|&i| self.powers.get(i, kk)).collect();
            let violations: Vec<bool> = served.iter().map(|&i| users[i].dep > eps_max).collect();
            low_rewards.push(low_reward(&powers, &violations, p_max, self.cfg.weights_low));
            ap_power.push(self.powers.column_sum(kk));
        }

        let active = self.users.iter().filter(|u| u.active).count();
        let total_power = self.powers.total();
        let power_fraction = if active > 0 {
            total_power / (active as f64 * k as f64 * p_max)
        } else {
            0.0
        };
        let stable_fraction = if stable.is_empty() {
            0.0
        } else {
            stable.iter().filter(|&&s| s).count() as f64 / stable.len() as f64
        };
        let objective = ObjectiveTerms {
            stable_fraction,
            bits_total: self
                .users
                .iter()
                .filter(|u| u.active)
                .map(|u| f64::from(u.bits_b))
                .sum(),
            blocklength: f64::from(self.cfg.traffic.blocklength_n),
            total_power,
        };

        self.prev_clustering = self.clustering.clone();
        self.advance_users()?;
        self.t += 1;
        let done = self.t >= self.cfg.episode_len;
        self.phase = if done { Phase::Done } else { Phase::AwaitHigh };

        Ok(StepOutcome {
            step: self.t - 1,
            high_reward: high,
            low_rewards,
            users,
            ap_power,
            power_fraction,
            objective,
            done,
        })
    }

    fn advance_users(&mut self) -> Result<()> {
        let n = self.cfg.num_users;
        let dt = self.cfg.mobility.dt;
        self.fresh.fill(false);
        for i in 0..n {
            if self.users[i].active {
                self.users[i] =
                    step_mobility(&self.users[i], &self.cfg.mobility, &self.cfg.area, &mut self.rng);
            }
        }
        self.los_timer += dt;
        let resample = self.los_timer + 1e-9 >= self.cfg.los_coherence_s;
        if resample {
            self.los_timer = 0.0;
        }
        for i in 0..n {
            if self.users[i].active {
                self.refresh_user_links(i, resample)?;
            }
        }
        let events = user_lifecycle(
            &mut self.users,
            self.cfg.arrival_prob,
            self.cfg.departure_prob,
            &self.cfg.area,
            &self.cfg.mobility,
            &self.cfg.traffic,
            &mut self.next_id,
            &mut self.rng,
        );
        for &i in &events.departed {
            self.prev_clustering.clear_row(i);
        }
        if let Some(i) = events.arrived {
            self.prev_clustering.clear_row(i);
            self.fresh[i] = true;
            self.refresh_user_links(i, true)?;
            self.gamma_th[i] = self.cfg.targets.gamma_th(
                self.users[i].blocklength_n,
                self.users[i].bits_b,
            )?;
        }
        Ok(())
    }

    /// Whole pipeline in one call. Returns the outcome, the next high-level
    /// observation and the low-level observations seen during this step.
    pub fn step(&mut self, high_bits: &[bool], low_actions: &[Vec<f64>]) -> Result<Transition> {
        if low_actions.len() != self.cfg.num_aps {
            return Err(Error::Shape {
                expected: self.cfg.num_aps,
                got: low_actions.len(),
            });
        }
        self.apply_high_action(high_bits)?;
        let low_obs = (0..self.cfg.num_aps)
            .map(|k| self.low_obs(k))
            .collect::<Result<Vec<_>>>()?;
        for (k, a) in low_actions.iter().enumerate() {
            self.apply_low_action(k, a)?;
        }
        let outcome = self.finish_step()?;
        let high_obs = self.high_obs();
        Ok(Transition {
            outcome,
            high_obs,
            low_obs,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub outcome: StepOutcome,
    pub high_obs: Vec<f64>,
    pub low_obs: Vec<Vec<f64>>,
}
