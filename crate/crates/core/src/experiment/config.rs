//! Flat `key = value` experiment configuration.
//!
//! Every key names a field; unknown keys, malformed values and failed
//! validation all report the key. Environment variables prefixed with
//! `AEROLINK_` override file values, with `__` standing for the dot
//! (`AEROLINK_ENV__NUM_APS=7` sets `env.num_aps`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::OpportunisticParams;
use crate::channel::InterferenceMode;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::hierarchy::{HierarchyConfig, Mode, TrainConfig};
use crate::rl::TrainerConfig;

pub const ENV_PREFIX: &str = "AEROLINK_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algo {
    Hmappo,
    Mappo,
    Opportunistic,
    Closest,
    /// Uniform random memberships and powers.
    Random,
}

impl Algo {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hmappo" => Some(Algo::Hmappo),
            "mappo" | "flat_mappo" => Some(Algo::Mappo),
            "opportunistic" => Some(Algo::Opportunistic),
            "closest" => Some(Algo::Closest),
            "random" => Some(Algo::Random),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Algo::Hmappo => "hmappo",
            Algo::Mappo => "mappo",
            Algo::Opportunistic => "opportunistic",
            Algo::Closest => "closest",
            Algo::Random => "random",
        }
    }

    pub fn mode(&self) -> Option<Mode> {
        match self {
            Algo::Hmappo => Some(Mode::Hmappo),
            Algo::Mappo => Some(Mode::FlatMappo),
            _ => None,
        }
    }

    pub fn is_learned(&self) -> bool {
        self.mode().is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub trainer: TrainerConfig,
    /// `mode` is ignored here; it follows `algo`.
    pub hierarchy: HierarchyConfig,
    pub opportunistic: OpportunisticParams,
    pub algo: Algo,
    /// Seeds training and the evaluation episodes. The AP layout follows `env.seed`.
    pub seed: u64,
    pub eval_episodes: usize,
    /// DEP thresholds at which evaluation violation rates are reported.
    pub dep_sweep: Vec<f64>,
    pub timing_ks: Vec<usize>,
    pub timing_users: usize,
    pub timing_steps: usize,
    /// Keep measured wall time in the reward curve; off keeps outputs reproducible.
    pub record_wall_time: bool,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            trainer: TrainerConfig::default(),
            hierarchy: HierarchyConfig::default(),
            opportunistic: OpportunisticParams::default(),
            algo: Algo::Hmappo,
            seed: 0,
            eval_episodes: 20,
            dep_sweep: vec![1e-3, 1e-5, 1e-7],
            timing_ks: vec![4, 8, 16, 32],
            timing_users: 6,
            timing_steps: 200,
            record_wall_time: false,
            out_dir: PathBuf::from("out"),
        }
    }
}

trait ConfigValue: Sized {
    fn parse_value(s: &str) -> std::result::Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! from_str_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> std::result::Result<Self, String> {
                s.parse().map_err(|e| format!("cannot parse {s:?}: {e}"))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

from_str_value!(f64, usize, u32, u64, bool);

impl ConfigValue for PathBuf {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        if s.is_empty() {
            return Err("path must not be empty".into());
        }
        Ok(PathBuf::from(s))
    }
    fn render(&self) -> String {
        self.display().to_string()
    }
}

impl<T: ConfigValue> ConfigValue for Vec<T> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        s.split(',').map(|p| T::parse_value(p.trim())).collect()
    }
    fn render(&self) -> String {
        self.iter().map(T::render).collect::<Vec<_>>().join(",")
    }
}

impl ConfigValue for InterferenceMode {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        InterferenceMode::parse(s).ok_or_else(|| format!("expected steered or paper, got {s:?}"))
    }
    fn render(&self) -> String {
        self.as_str().into()
    }
}

impl ConfigValue for Algo {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        Algo::parse(s).ok_or_else(|| {
            format!("expected hmappo, mappo, opportunistic, closest or random, got {s:?}")
        })
    }
    fn render(&self) -> String {
        self.as_str().into()
    }
}

macro_rules! config_keys {
    ($($key:literal => $($field:ident).+;)*) => {
        /// Every accepted key, in rendering order.
        pub const KEYS: &[&str] = &[$($key),*];

        impl ExperimentConfig {
            /// Set one key from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $($key => {
                        self.$($field).+ =
                            ConfigValue::parse_value(value).map_err(|r| Error::config($key, r))?
                    })*
                    _ => return Err(Error::config(key, "unknown key")),
                }
                Ok(())
            }

            /// All keys with their current values.
            pub fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$(($key, ConfigValue::render(&self.$($field).+))),*]
            }
        }
    };
}

config_keys! {
    "env.num_aps" => env.num_aps;
    "env.num_users" => env.num_users;
    "env.ap_height" => env.ap_height;
    "env.episode_len" => env.episode_len;
    "env.arrival_prob" => env.arrival_prob;
    "env.departure_prob" => env.departure_prob;
    "env.interference" => env.interference;
    "env.los_coherence_s" => env.los_coherence_s;
    "env.position_noise_std" => env.position_noise_std;
    "env.seed" => env.seed;
    "area.x_extent" => env.area.x_extent;
    "area.y_extent" => env.area.y_extent;
    "area.z_min" => env.area.z_min;
    "area.z_max" => env.area.z_max;
    "radio.bandwidth" => env.radio.bandwidth;
    "radio.noise_density" => env.radio.noise_density;
    "radio.p_max" => env.radio.p_max;
    "antenna.m_z" => env.antenna.m_z;
    "antenna.n_y" => env.antenna.n_y;
    "antenna.d_z" => env.antenna.d_z;
    "antenna.d_y" => env.antenna.d_y;
    "antenna.g0" => env.antenna.g0;
    "antenna.carrier_freq" => env.antenna.carrier_freq;
    "path_loss.los_a" => env.path_loss.los_a;
    "path_loss.los_b" => env.path_loss.los_b;
    "path_loss.los_c" => env.path_loss.los_c;
    "path_loss.nlos_a" => env.path_loss.nlos_a;
    "path_loss.nlos_b" => env.path_loss.nlos_b;
    "path_loss.nlos_h" => env.path_loss.nlos_h;
    "path_loss.nlos_c" => env.path_loss.nlos_c;
    "path_loss.d1_a" => env.path_loss.d1_a;
    "path_loss.d1_b" => env.path_loss.d1_b;
    "path_loss.d1_min" => env.path_loss.d1_min;
    "path_loss.p1_a" => env.path_loss.p1_a;
    "path_loss.p1_b" => env.path_loss.p1_b;
    "path_loss.h_min" => env.path_loss.h_min;
    "path_loss.h_max" => env.path_loss.h_max;
    "mobility.mean_vx" => env.mobility.mean_velocity.x;
    "mobility.mean_vy" => env.mobility.mean_velocity.y;
    "mobility.mean_vz" => env.mobility.mean_velocity.z;
    "mobility.memory_a" => env.mobility.memory_a;
    "mobility.sigma" => env.mobility.sigma;
    "mobility.dt" => env.mobility.dt;
    "traffic.bits_b" => env.traffic.bits_b;
    "traffic.blocklength_n" => env.traffic.blocklength_n;
    "targets.eps_max" => env.targets.eps_max;
    "targets.outage_max" => env.targets.outage_max;
    "weights.high_w1" => env.weights_high.w1;
    "weights.high_w2" => env.weights_high.w2;
    "weights.low_w1" => env.weights_low.w1;
    "weights.low_w2" => env.weights_low.w2;
    "trainer.learning_rate" => trainer.learning_rate;
    "trainer.batch_size" => trainer.batch_size;
    "trainer.gamma" => trainer.gamma;
    "trainer.gae_lambda" => trainer.gae_lambda;
    "trainer.clip" => trainer.clip;
    "trainer.entropy_coef" => trainer.entropy_coef;
    "trainer.epochs" => trainer.epochs;
    "trainer.minibatch_size" => trainer.minibatch_size;
    "trainer.iterations" => trainer.iterations;
    "trainer.hidden" => trainer.hidden;
    "trainer.init_log_std" => trainer.init_log_std;
    "trainer.max_grad_norm" => trainer.max_grad_norm;
    "hierarchy.high_action_period" => hierarchy.high_action_period;
    "hierarchy.shared_low" => hierarchy.shared_low;
    "hierarchy.first_episode_bootstrap" => hierarchy.first_episode_bootstrap;
    "baseline.gain_margin_db" => opportunistic.gain_margin_db;
    "experiment.algo" => algo;
    "experiment.seed" => seed;
    "experiment.eval_episodes" => eval_episodes;
    "experiment.dep_sweep" => dep_sweep;
    "experiment.timing_ks" => timing_ks;
    "experiment.timing_users" => timing_users;
    "experiment.timing_steps" => timing_steps;
    "experiment.record_wall_time" => record_wall_time;
    "experiment.out_dir" => out_dir;
}

/// Split config text into `(line number, key, value)` triples.
fn parse_lines(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::config(
                format!("line {}", i + 1),
                format!("expected `key = value`, got {line:?}"),
            ));
        };
        let k = k.trim().to_string();
        if out.iter().any(|(_, seen, _)| *seen == k) {
            return Err(Error::config(k, "duplicate key"));
        }
        out.push((i + 1, k, v.trim().to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Defaults overridden by the given text. Does not validate.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_str(text)?;
        Ok(cfg)
    }

    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (_, k, v) in parse_lines(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Apply `AEROLINK_*` overrides from the given variables.
    pub fn apply_env_vars<I, K, V>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut pairs: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| {
                let rest = k.as_ref().strip_prefix(ENV_PREFIX)?;
                Some((rest.to_ascii_lowercase().replace("__", "."), v.as_ref().to_string()))
            })
            .collect();
        pairs.sort();
        for (k, v) in pairs {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Read a config file and apply process environment overrides.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config("config", format!("cannot read {}: {e}", path.display()))
        })?;
        let mut cfg = Self::parse_str(&text)?;
        cfg.apply_env_vars(std::env::vars())?;
        Ok(cfg)
    }

    /// The resolved configuration, one `key = value` line per key.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.trainer.validate()?;
        self.hierarchy.validate()?;
        self.opportunistic.validate()?;
        if self.eval_episodes == 0 {
            return Err(Error::config("experiment.eval_episodes", "must be >= 1"));
        }
        if self.dep_sweep.is_empty() {
            return Err(Error::config("experiment.dep_sweep", "must list at least one threshold"));
        }
        if let Some(e) = self.dep_sweep.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(Error::config("experiment.dep_sweep", format!("{e} is not in (0, 1)")));
        }
        if self.timing_ks.is_empty() || self.timing_ks.contains(&0) {
            return Err(Error::config("experiment.timing_ks", "must list AP counts >= 1"));
        }
        if self.timing_users == 0 {
            return Err(Error::config("experiment.timing_users", "must be >= 1"));
        }
        if self.timing_steps == 0 {
            return Err(Error::config("experiment.timing_steps", "must be >= 1"));
        }
        Ok(())
    }

    pub fn train_config(&self) -> Option<TrainConfig> {
        let mode = self.algo.mode()?;
        Some(TrainConfig {
            hierarchy: HierarchyConfig { mode, ..self.hierarchy },
            trainer: self.trainer.clone(),
            seed: self.seed,
        })
    }
}
