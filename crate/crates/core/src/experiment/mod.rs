//! Experiment orchestration: train (for learning algorithms), evaluate on a
//! fixed set of episode seeds, and write the metric CSVs plus a manifest.

pub mod config;
pub mod table;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::baselines::Baseline;
use crate::env::{EnvConfig, NetworkEnv, StepOutcome};
use crate::error::{Error, Result};
use crate::hierarchy::{self, AgentSet, HierarchyConfig, IterationLog, Mode, StepContext};
use crate::metrics::{MetricAccumulator, MetricSummary};
use crate::rl::{Checkpoint, TrainerConfig};

pub use config::{Algo, ExperimentConfig};
pub use table::{empirical_cdf, integer_pdf, linear_grid, MetricTable, SCHEMA_VERSION};

const EVAL_STREAM: u64 = 3;
const POLICY_STREAM: u64 = 4;

/// Files every run writes, in manifest order.
pub const RUN_FILES: &[&str] = &[
    "per_step.csv",
    "per_episode.csv",
    "dep_violations.csv",
    "outage_cdf.csv",
    "power_dep.csv",
    "power_cdf.csv",
    "cluster_size_pdf.csv",
    "reward_curve.csv",
];

/// Who picks clusterings and powers during evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    Learned(&'a AgentSet),
    Baseline(Baseline),
    Random,
}

#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub outcomes: Vec<StepOutcome>,
}

#[derive(Debug, Clone, Default)]
pub struct Evaluation {
    pub episodes: Vec<EpisodeRecord>,
}

impl Evaluation {
    pub fn outcomes(&self) -> impl Iterator<Item = &StepOutcome> {
        self.episodes.iter().flat_map(|e| e.outcomes.iter())
    }

    pub fn summary(&self, eps_max: f64) -> MetricSummary {
        let mut acc = MetricAccumulator::new(eps_max);
        self.outcomes().for_each(|o| acc.push(o));
        acc.summary()
    }

    /// Fraction of active user-steps whose DEP exceeds `eps`.
    pub fn violation_rate(&self, eps: f64) -> (f64, usize) {
        let (mut v, mut n) = (0, 0);
        for o in self.outcomes() {
            let (a, b) = o.dep_violations(eps);
            v += a;
            n += b;
        }
        (if n == 0 { 0.0 } else { v as f64 / n as f64 }, n)
    }
}

/// Episode seeds derived from the run seed only, so every algorithm run with
/// the same seed is evaluated on the same episodes.
pub fn eval_seeds(seed: u64, episodes: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(EVAL_STREAM);
    (0..episodes).map(|_| rng.next_u64()).collect()
}

fn random_step<R: Rng + ?Sized>(env: &mut NetworkEnv, rng: &mut R) -> Result<StepOutcome> {
    let (n, k) = (env.num_users(), env.num_aps());
    let bits: Vec<bool> = (0..n * k).map(|_| rng.random::<bool>()).collect();
    let lows: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
    Ok(env.step(&bits, &lows)?.outcome)
}

/// Play `episodes` evaluation episodes on the topology of `env_cfg`.
/// Learned policies act on their modes.
pub fn evaluate(
    env_cfg: &EnvConfig,
    controller: Controller<'_>,
    seed: u64,
    episodes: usize,
    high_action_period: usize,
) -> Result<Evaluation> {
    let mut env = NetworkEnv::new(env_cfg.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(POLICY_STREAM);
    let mut out = Evaluation::default();
    for s in eval_seeds(seed, episodes) {
        env.reset_with_seed(s)?;
        let outcomes = match controller {
            Controller::Learned(agents) => {
                hierarchy::hmappo_episode(agents, &mut env, &mut rng, false, high_action_period)?.outcomes
            }
            Controller::Baseline(b) => {
                let mut v = Vec::with_capacity(env_cfg.episode_len);
                while !env.is_done() {
                    v.push(b.step(&mut env)?);
                }
                v
            }
            Controller::Random => {
                let mut v = Vec::with_capacity(env_cfg.episode_len);
                while !env.is_done() {
                    v.push(random_step(&mut env, &mut rng)?);
                }
                v
            }
        };
        out.episodes.push(EpisodeRecord { seed: s, outcomes });
    }
    Ok(out)
}

/// Hex SHA-256 over `blob <len>\0<content>`, the way git hashes objects.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub algo: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    pub eval_seeds: Vec<u64>,
    pub outputs: BTreeMap<String, String>,
    pub summary: MetricSummary,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: MetricSummary,
    pub evaluation: Evaluation,
    pub log: Vec<IterationLog>,
    pub agents: Option<AgentSet>,
    pub out_dir: PathBuf,
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| {
        Error::config("experiment.out_dir", format!("cannot create {}: {e}", dir.display()))
    })?;
    let probe = dir.join(".write_test");
    std::fs::write(&probe, b"").map_err(|e| {
        Error::config("experiment.out_dir", format!("{} is not writable: {e}", dir.display()))
    })?;
    let _ = std::fs::remove_file(probe);
    Ok(())
}

fn per_step_table(ev: &Evaluation, eps_max: f64) -> Result<MetricTable> {
    let mut t = MetricTable::new(&[
        "episode",
        "step",
        "high_reward",
        "low_reward",
        "combined_reward",
        "power_fraction",
        "active_users",
        "dep_violations",
        "reconfigurations",
        "mean_cluster_size",
        "objective",
    ]);
    for (e, ep) in ev.episodes.iter().enumerate() {
        for o in &ep.outcomes {
            let (viol, active) = o.dep_violations(eps_max);
            let reconf = o.users.iter().filter(|u| u.counted && u.cluster_changed).count();
            let sizes: usize = o.users.iter().filter(|u| u.active).map(|u| u.cluster_size).sum();
            let mean_size = if active == 0 { 0.0 } else { sizes as f64 / active as f64 };
            t.push(vec![
                e as f64,
                o.step as f64,
                o.high_reward,
                o.mean_low_reward(),
                o.combined_reward(),
                o.power_fraction,
                active as f64,
                viol as f64,
                reconf as f64,
                mean_size,
                o.objective.value(eps_max),
            ])?;
        }
    }
    Ok(t)
}

fn per_episode_table(ev: &Evaluation, eps_max: f64) -> Result<MetricTable> {
    let mut t = MetricTable::new(&[
        "episode",
        "steps",
        "high_reward_mean",
        "low_reward_mean",
        "combined_reward_mean",
        "dep_violation_rate",
        "mean_power_fraction",
        "reconfig_rate",
        "mean_cluster_size",
    ]);
    for (e, ep) in ev.episodes.iter().enumerate() {
        let mut acc = MetricAccumulator::new(eps_max);
        ep.outcomes.iter().for_each(|o| acc.push(o));
        let s = acc.summary();
        t.push(vec![
            e as f64,
            s.steps as f64,
            s.high_reward_mean,
            s.low_reward_mean,
            s.combined_reward_mean,
            s.dep_violation_rate,
            s.mean_power_fraction,
            s.reconfig_rate,
            s.mean_cluster_size,
        ])?;
    }
    Ok(t)
}

pub fn dep_violation_table(ev: &Evaluation, thresholds: &[f64]) -> Result<MetricTable> {
    let mut t = MetricTable::new(&["eps_max", "violation_rate", "samples"]);
    for &eps in thresholds {
        let (rate, n) = ev.violation_rate(eps);
        t.push(vec![eps, rate, n as f64])?;
    }
    Ok(t)
}

/// CDF of log10 outage probability over active user-steps.
pub fn outage_cdf_table(ev: &Evaluation) -> Result<MetricTable> {
    let v: Vec<f64> = ev
        .outcomes()
        .flat_map(|o| o.users.iter().filter(|u| u.active).map(|u| u.outage_prob.log10()))
        .collect();
    let mut t = empirical_cdf(&v, &linear_grid(-20.0, 0.0, 201))?;
    t.columns_mut()[0] = "log10_outage".into();
    Ok(t)
}

pub fn power_cdf_table(ev: &Evaluation) -> Result<MetricTable> {
    let v: Vec<f64> = ev.outcomes().map(|o| o.power_fraction).collect();
    let mut t = empirical_cdf(&v, &linear_grid(0.0, 1.0, 101))?;
    t.columns_mut()[0] = "power_fraction".into();
    Ok(t)
}

pub fn cluster_size_pdf_table(ev: &Evaluation, num_aps: usize) -> Result<MetricTable> {
    let v: Vec<usize> = ev
        .outcomes()
        .flat_map(|o| o.users.iter().filter(|u| u.active).map(|u| u.cluster_size))
        .collect();
    let mut t = integer_pdf(&v, num_aps)?;
    t.columns_mut()[0] = "cluster_size".into();
    Ok(t)
}

pub fn reward_curve_table(log: &[IterationLog], keep_wall_time: bool) -> Result<MetricTable> {
    let mut t = MetricTable::new(&[
        "iteration",
        "env_steps",
        "high_reward_mean",
        "low_reward_mean",
        "dep_violation_rate",
        "mean_power_fraction",
        "reconfig_rate",
        "mean_cluster_size",
        "wall_time_s",
    ]);
    for l in log {
        t.push(vec![
            l.iteration as f64,
            l.env_steps as f64,
            l.high_reward_mean,
            l.low_reward_mean,
            l.dep_violation_rate,
            l.mean_power_fraction,
            l.reconfig_rate,
            l.mean_cluster_size,
            if keep_wall_time { l.wall_time_s } else { 0.0 },
        ])?;
    }
    Ok(t)
}

fn write_outputs(
    cfg: &ExperimentConfig,
    ev: &Evaluation,
    log: &[IterationLog],
) -> Result<MetricSummary> {
    let eps = cfg.env.targets.eps_max;
    let summary = ev.summary(eps);
    let mut pd = MetricTable::new(&["eps_max", "mean_power_fraction", "violation_rate"]);
    pd.push(vec![eps, summary.mean_power_fraction, summary.dep_violation_rate])?;
    let tables = [
        per_step_table(ev, eps)?,
        per_episode_table(ev, eps)?,
        dep_violation_table(ev, &cfg.dep_sweep)?,
        outage_cdf_table(ev)?,
        pd,
        power_cdf_table(ev)?,
        cluster_size_pdf_table(ev, cfg.env.num_aps)?,
        reward_curve_table(log, cfg.record_wall_time)?,
    ];
    let dir = &cfg.out_dir;
    let mut outputs = BTreeMap::new();
    for (name, t) in RUN_FILES.iter().zip(&tables) {
        let csv = t.to_csv();
        std::fs::write(dir.join(name), &csv)?;
        outputs.insert(name.to_string(), content_hash(csv.as_bytes()));
    }
    let rendered = cfg.render();
    std::fs::write(dir.join("config.resolved"), &rendered)?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        algo: cfg.algo.as_str().into(),
        seed: cfg.seed,
        config: cfg.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        config_hash: content_hash(rendered.as_bytes()),
        eval_seeds: ev.episodes.iter().map(|e| e.seed).collect(),
        outputs,
        summary,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
    std::fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(summary)
}

fn controller_for<'a>(cfg: &ExperimentConfig, agents: Option<&'a AgentSet>) -> Result<Controller<'a>> {
    Ok(match cfg.algo {
        Algo::Hmappo | Algo::Mappo => Controller::Learned(
            agents.ok_or(Error::Ordering("learning algorithm evaluated without agents"))?,
        ),
        Algo::Closest => Controller::Baseline(Baseline::Closest),
        Algo::Opportunistic => Controller::Baseline(Baseline::Opportunistic(cfg.opportunistic)),
        Algo::Random => Controller::Random,
    })
}

/// Evaluate the given (or baseline) controller and write every output file.
pub fn evaluate_and_write(
    cfg: &ExperimentConfig,
    agents: Option<AgentSet>,
    log: Vec<IterationLog>,
) -> Result<RunReport> {
    cfg.validate()?;
    prepare_out_dir(&cfg.out_dir)?;
    let controller = controller_for(cfg, agents.as_ref())?;
    let ev = evaluate(
        &cfg.env,
        controller,
        cfg.seed,
        cfg.eval_episodes,
        cfg.hierarchy.high_action_period,
    )?;
    let summary = write_outputs(cfg, &ev, &log)?;
    Ok(RunReport {
        summary,
        evaluation: ev,
        log,
        agents,
        out_dir: cfg.out_dir.clone(),
    })
}

/// Train if the algorithm learns, then evaluate and write outputs. Learned
/// agents are also saved to `checkpoint.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_experiment_with(cfg, |_| {})
}

pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    on_iteration: impl FnMut(&IterationLog),
) -> Result<RunReport> {
    cfg.validate()?;
    prepare_out_dir(&cfg.out_dir)?;
    let (agents, log) = match cfg.train_config() {
        Some(tc) => {
            let run = hierarchy::train(&cfg.env, &tc, on_iteration)?;
            run.agents.to_checkpoint(&cfg.trainer).save(&cfg.out_dir.join("checkpoint.json"))?;
            (Some(run.agents), run.log)
        }
        None => (None, Vec::new()),
    };
    evaluate_and_write(cfg, agents, log)
}

/// Evaluate saved agents without training.
pub fn run_from_checkpoint(cfg: &ExperimentConfig, path: &Path) -> Result<RunReport> {
    let ck = Checkpoint::load(path)?;
    let agents = AgentSet::from_checkpoint(&ck, &cfg.env)?;
    let expect = cfg.algo.mode();
    if expect != Some(agents.mode) {
        return Err(Error::config(
            "experiment.algo",
            format!("checkpoint holds {} agents", agents.mode.as_str()),
        ));
    }
    evaluate_and_write(cfg, Some(agents), Vec::new())
}

/// One full run per threshold in `dep_sweep`, each trained and evaluated with
/// that `eps_max`, in `out_dir/eps_<i>`. The top-level `dep_violations.csv` and
/// `power_dep.csv` collect one row per threshold.
pub fn sweep_dep(cfg: &ExperimentConfig) -> Result<Vec<RunReport>> {
    cfg.validate()?;
    prepare_out_dir(&cfg.out_dir)?;
    let mut viol = MetricTable::new(&["eps_max", "violation_rate", "samples"]);
    let mut power = MetricTable::new(&["eps_max", "mean_power_fraction", "violation_rate"]);
    let mut reports = Vec::new();
    for (i, &eps) in cfg.dep_sweep.iter().enumerate() {
        let mut c = cfg.clone();
        c.env.targets.eps_max = eps;
        c.out_dir = cfg.out_dir.join(format!("eps_{i}"));
        let r = run_experiment(&c)?;
        let (rate, n) = r.evaluation.violation_rate(eps);
        viol.push(vec![eps, rate, n as f64])?;
        power.push(vec![eps, r.summary.mean_power_fraction, rate])?;
        reports.push(r);
    }
    viol.write_csv(&cfg.out_dir.join("dep_violations.csv"))?;
    power.write_csv(&cfg.out_dir.join("power_dep.csv"))?;
    Ok(reports)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Seconds per decision+environment step for untrained, sampling policies.
pub fn time_policy_steps(
    env_cfg: &EnvConfig,
    mode: Mode,
    trainer: &TrainerConfig,
    steps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = HierarchyConfig { mode, ..HierarchyConfig::default() };
    let agents = AgentSet::new(env_cfg, &h, trainer, &mut rng)?;
    let mut env = NetworkEnv::new(env_cfg.clone())?;
    env.reset()?;
    let ctx = StepContext {
        deterministic: false,
        local_low_obs: true,
        decide_high: true,
    };
    let warmup = (steps / 10).max(2);
    let mut times = Vec::with_capacity(steps);
    for i in 0..warmup + steps {
        if env.is_done() {
            env.reset()?;
        }
        let t0 = Instant::now();
        hierarchy::policy_step(&agents, &mut env, &mut rng, &ctx, None)?;
        if i >= warmup {
            times.push(t0.elapsed().as_secs_f64());
        }
    }
    Ok(times)
}

/// Per-step wall time for H-MAPPO and flat MAPPO at each AP count, with
/// every mean and deviation also divided by the largest measured mean.
pub fn timing_benchmark(cfg: &ExperimentConfig) -> Result<MetricTable> {
    let mut raw = Vec::new();
    for &k in &cfg.timing_ks {
        let env = EnvConfig {
            num_aps: k,
            num_users: cfg.timing_users,
            ..cfg.env.clone()
        };
        env.validate()?;
        let h = mean_std(&time_policy_steps(&env, Mode::Hmappo, &cfg.trainer, cfg.timing_steps, cfg.seed)?);
        let f = mean_std(&time_policy_steps(&env, Mode::FlatMappo, &cfg.trainer, cfg.timing_steps, cfg.seed)?);
        raw.push((k, h, f));
    }
    let top = raw
        .iter()
        .map(|(_, h, f)| h.0.max(f.0))
        .fold(f64::MIN_POSITIVE, f64::max);
    let mut t = MetricTable::new(&[
        "k",
        "hmappo_mean_s",
        "hmappo_std_s",
        "mappo_mean_s",
        "mappo_std_s",
        "hmappo_normalized",
        "hmappo_normalized_std",
        "mappo_normalized",
        "mappo_normalized_std",
    ]);
    for (k, h, f) in raw {
        t.push(vec![
            k as f64,
            h.0,
            h.1,
            f.0,
            f.1,
            h.0 / top,
            h.1 / top,
            f.0 / top,
            f.1 / top,
        ])?;
    }
    Ok(t)
}

/// Run the timing benchmark and write `timing.csv` into `out_dir`.
pub fn run_timing(cfg: &ExperimentConfig) -> Result<MetricTable> {
    cfg.validate()?;
    prepare_out_dir(&cfg.out_dir)?;
    let t = timing_benchmark(cfg)?;
    t.write_csv(&cfg.out_dir.join("timing.csv"))?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ServiceArea;

    fn small(algo: Algo, dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.env.num_aps = 4;
        c.env.num_users = 2;
        c.env.episode_len = 10;
        c.env.area = ServiceArea {
            x_extent: 600.0,
            y_extent: 600.0,
            ..ServiceArea::default()
        };
        c.trainer.batch_size = 40;
        c.trainer.minibatch_size = 20;
        c.trainer.iterations = 2;
        c.trainer.epochs = 2;
        c.trainer.hidden = vec![8];
        c.eval_episodes = 3;
        c.algo = algo;
        c.seed = 5;
        c.out_dir = dir.to_path_buf();
        c
    }

    #[test]
    fn closest_skips_training_and_writes_everything() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_experiment(&small(Algo::Closest, dir.path())).unwrap();
        assert!(r.log.is_empty() && r.agents.is_none());
        assert!(!dir.path().join("checkpoint.json").exists());
        for f in RUN_FILES.iter().chain(&["manifest.json", "config.resolved"]) {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let curve = std::fs::read_to_string(dir.path().join("reward_curve.csv")).unwrap();
        assert_eq!(curve.lines().count(), 1);
        let dep = std::fs::read_to_string(dir.path().join("dep_violations.csv")).unwrap();
        assert_eq!(dep.lines().count(), 4);
        assert_eq!(r.evaluation.episodes.len(), 3);
        assert!(r.evaluation.episodes.iter().all(|e| e.outcomes.len() == 10));
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&small(Algo::Hmappo, a.path())).unwrap();
        let mut cb = small(Algo::Hmappo, b.path());
        cb.out_dir = b.path().to_path_buf();
        run_experiment(&cb).unwrap();
        for f in RUN_FILES {
            let x = std::fs::read(a.path().join(f)).unwrap();
            let y = std::fs::read(b.path().join(f)).unwrap();
            assert_eq!(x, y, "{f}");
        }
    }

    #[test]
    fn checkpoint_evaluation_matches_run() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let r = run_experiment(&small(Algo::Mappo, a.path())).unwrap();
        let cb = small(Algo::Mappo, b.path());
        let again = run_from_checkpoint(&cb, &a.path().join("checkpoint.json")).unwrap();
        assert_eq!(r.summary, again.summary);
        let wrong = small(Algo::Hmappo, b.path());
        assert!(run_from_checkpoint(&wrong, &a.path().join("checkpoint.json")).is_err());
    }

    #[test]
    fn eval_seeds_ignore_the_algorithm() {
        let s = eval_seeds(9, 4);
        assert_eq!(s, eval_seeds(9, 4));
        assert_ne!(s, eval_seeds(10, 4));
        let c = small(Algo::Random, Path::new("unused"));
        let r = evaluate(&c.env, Controller::Random, 9, 4, 1).unwrap();
        let o = evaluate(&c.env, Controller::Baseline(Baseline::Closest), 9, 4, 1).unwrap();
        let seeds = |e: &Evaluation| e.episodes.iter().map(|x| x.seed).collect::<Vec<_>>();
        assert_eq!(seeds(&r), s);
        assert_eq!(seeds(&o), s);
    }

    #[test]
    fn unwritable_out_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain_file");
        std::fs::write(&file, b"x").unwrap();
        let c = small(Algo::Closest, &file.join("sub"));
        match run_experiment(&c) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "experiment.out_dir"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn manifest_hashes_match_files() {
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&small(Algo::Opportunistic, dir.path())).unwrap();
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        for f in RUN_FILES {
            let bytes = std::fs::read(dir.path().join(f)).unwrap();
            assert_eq!(m["outputs"][f].as_str().unwrap(), content_hash(&bytes));
        }
        let text = std::fs::read_to_string(dir.path().join("config.resolved")).unwrap();
        let back = ExperimentConfig::parse_str(&text).unwrap();
        assert_eq!(back, small(Algo::Opportunistic, dir.path()));
    }

    #[test]
    fn git_style_hash_of_empty_blob() {
        // `git hash-object --object-format=sha256 /dev/null`
        assert_eq!(
            content_hash(b""),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }

    #[test]
    fn timing_is_normalized() {
        let mut c = small(Algo::Hmappo, Path::new("unused"));
        c.timing_ks = vec![2, 4];
        c.timing_users = 2;
        c.timing_steps = 20;
        let t = timing_benchmark(&c).unwrap();
        assert_eq!(t.len(), 2);
        let mut all = t.column("hmappo_normalized").unwrap();
        all.extend(t.column("mappo_normalized").unwrap());
        assert!(all.iter().all(|v| *v > 0.0 && *v <= 1.0));
        assert!(all.iter().any(|v| *v == 1.0));
    }

    #[test]
    fn sweep_emits_one_row_per_threshold() {
        let dir = tempfile::tempdir().unwrap();
        let c = small(Algo::Closest, dir.path());
        let r = sweep_dep(&c).unwrap();
        assert_eq!(r.len(), 3);
        let t = std::fs::read_to_string(dir.path().join("power_dep.csv")).unwrap();
        assert_eq!(t.lines().count(), 4);
    }
}
