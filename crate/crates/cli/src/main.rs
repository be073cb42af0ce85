use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aerolink_core::experiment::{self, Algo, ExperimentConfig, RunReport};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aerolink", version, about = "Train and evaluate UAV multi-connectivity controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train (learning algorithms only) and evaluate, writing metric CSVs.
    Train(RunArgs),
    /// Evaluate a baseline, or learned agents from a checkpoint.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint written by `train` (defaults to OUT/checkpoint.json).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Per-step decision and environment wall time across AP counts.
    Bench(RunArgs),
    /// One train and evaluate run per DEP threshold.
    SweepDep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` config file; omitted keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// hmappo, mappo, opportunistic, closest or random.
    #[arg(long)]
    algo: Option<String>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                ExperimentConfig::parse_str(&text)?
            }
            None => ExperimentConfig::default(),
        };
        cfg.apply_env_vars(std::env::vars())?;
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("--set expects KEY=VALUE, got {kv:?}");
            };
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(a) = &self.algo {
            cfg.set("experiment.algo", a)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn report(r: &RunReport, algo: Algo) {
    let s = &r.summary;
    println!(
        "{}: reward {:.4} (high {:.4}, low {:.4}), dep violations {:.4}, power {:.4}, reconfig {:.4}, cluster {:.2}",
        algo.as_str(),
        s.combined_reward_mean,
        s.high_reward_mean,
        s.low_reward_mean,
        s.dep_violation_rate,
        s.mean_power_fraction,
        s.reconfig_rate,
        s.mean_cluster_size,
    );
    println!("outputs in {}", r.out_dir.display());
}

fn progress(l: &aerolink_core::hierarchy::IterationLog) {
    eprintln!(
        "iter {:>5} steps {:>9} high {:+.4} low {:+.4} viol {:.4} power {:.4}",
        l.iteration, l.env_steps, l.high_reward_mean, l.low_reward_mean, l.dep_violation_rate, l.mean_power_fraction,
    );
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let r = experiment::run_experiment_with(&cfg, progress)?;
            report(&r, cfg.algo);
        }
        Command::Eval { run, checkpoint } => {
            let cfg = run.resolve()?;
            let r = if cfg.algo.is_learned() {
                let path = checkpoint.unwrap_or_else(|| cfg.out_dir.join("checkpoint.json"));
                experiment::run_from_checkpoint(&cfg, Path::new(&path))
                    .with_context(|| format!("evaluating {}", path.display()))?
            } else {
                experiment::evaluate_and_write(&cfg, None, Vec::new())?
            };
            report(&r, cfg.algo);
        }
        Command::Bench(args) => {
            let cfg = args.resolve()?;
            let t = experiment::run_timing(&cfg)?;
            println!("k,hmappo_s_per_step,mappo_s_per_step");
            for row in t.rows() {
                println!("{},{:.3e},{:.3e}", row[0], row[1], row[3]);
            }
            println!("timing.csv in {}", cfg.out_dir.display());
        }
        Command::SweepDep(args) => {
            let cfg = args.resolve()?;
            for (eps, r) in cfg.dep_sweep.iter().zip(experiment::sweep_dep(&cfg)?) {
                println!(
                    "eps_max {eps:e}: violations {:.4}, power {:.4}",
                    r.evaluation.violation_rate(*eps).0,
                    r.summary.mean_power_fraction
                );
            }
            println!("dep_violations.csv and power_dep.csv in {}", cfg.out_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
