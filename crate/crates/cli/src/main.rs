use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use peat_orch::harness::config::{Algorithm, ExperimentConfig};
use peat_orch::harness::plot::plot_logs;
use peat_orch::harness::report::summarize;
use peat_orch::harness::run::{
    evaluate_checkpoint, execute_run, write_trace, Checkpoint, CHECKPOINT_FILE, LOG_FILE, SUMMARY_FILE,
};
use peat_orch::harness::selftest::run_selftest;
use peat_orch::harness::sweep::{sweep, with_thread_cap, SweepSpec};

/// Simulate and train emulator-placement policies for edge fine-tuning.
#[derive(Parser)]
#[command(name = "peat-orch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file, or `default` for the built-in configuration.
    #[arg(long, default_value = "default")]
    config: String,
    /// Override one value, e.g. `--set sys.num_ues=8` (repeatable).
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set hyper.total_steps=N`.
    #[arg(long)]
    steps: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        for o in &self.overrides {
            cfg.set(o)?;
        }
        if let Some(steps) = self.steps {
            cfg.hyper.total_steps = steps;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one algorithm; one run directory per seed.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Train this seed only (overrides `run.seeds`).
        #[arg(long)]
        seed: Option<u64>,
        /// Run directory (overrides `run.out_dir`). Several seeds go to `<out>/s<seed>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-evaluate a trained run on fixed episodes.
    Eval {
        /// Run directory containing a checkpoint.
        run: PathBuf,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        /// First evaluation seed (defaults to the run's own eval seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the per-step trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Train every (algorithm, UE count, seed) combination and summarise.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [6, 7, 8, 9])]
        ues: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = Algorithm::ALL)]
        algos: Vec<Algorithm>,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3])]
        seeds: Vec<u64>,
        #[arg(long, default_value = "runs/sweep")]
        out: PathBuf,
    },
    /// Aggregate completed runs into summary.csv and summary.txt.
    Summarize {
        /// Run directories, or parents whose subdirectories are runs.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Directory for the summary files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Draw one metric from several training logs as an SVG line chart.
    Plot {
        /// log.csv files or run directories.
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        #[arg(long, default_value = "eval_reward_mean")]
        metric: String,
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
    },
    /// Run the oracle, gradient and invariant checks.
    Selftest,
}

fn print_config(cfg: &ExperimentConfig) -> Result<()> {
    println!("# resolved configuration");
    print!("{}", cfg.to_toml()?);
    println!();
    Ok(())
}

fn train(cfg: ConfigArgs, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = cfg.resolve()?;
    if let Some(s) = seed {
        cfg.run.seeds = vec![s];
    }
    if let Some(o) = out {
        cfg.run.out_dir = o;
    }
    cfg.validate()?;
    print_config(&cfg)?;
    let single = cfg.run.seeds.len() == 1;
    for &s in &cfg.run.seeds {
        let dir = if single { cfg.run.out_dir.clone() } else { cfg.run.out_dir.join(format!("s{s}")) };
        let summary = with_thread_cap(|| execute_run(&cfg, s, &dir))??;
        let m = summary.final_eval;
        println!(
            "{} seed {s}: reward {:.3} ± {:.3}, delay {:.2} min, perplexity {:.3}, switches {:.1} [{}] -> {}",
            summary.algorithm,
            m.reward_mean,
            m.reward_std,
            m.total_delay_min,
            m.mean_perplexity,
            m.emulator_switches,
            summary.status,
            dir.display()
        );
        if !summary.completed() {
            bail!("run {} did not complete: {}", dir.display(), summary.status);
        }
    }
    Ok(())
}

fn eval(run: &Path, episodes: usize, seed: Option<u64>, trace: Option<PathBuf>) -> Result<()> {
    let path = run.join(CHECKPOINT_FILE);
    let ckpt = Checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let seed = seed.unwrap_or(ckpt.hyper.eval_seed);
    let res = with_thread_cap(|| evaluate_checkpoint(&ckpt, episodes, seed, trace.is_some()))??;
    println!(
        "{} n={} over {episodes} episodes: reward {:.3} ± {:.3}, delay {:.2} min, perplexity {:.3}, switches {:.1}",
        ckpt.algorithm,
        ckpt.sys.num_ues,
        res.reward_mean,
        res.reward_std,
        res.total_delay_min,
        res.mean_perplexity,
        res.switches
    );
    if let Some(t) = trace {
        write_trace(&t, &res.trace)?;
        println!("trace -> {}", t.display());
    }
    Ok(())
}

/// Expands parents into their run subdirectories (anything holding a summary).
fn expand_runs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.join(SUMMARY_FILE).exists() || !p.is_dir() {
            out.push(p.clone());
            continue;
        }
        let mut children: Vec<PathBuf> = std::fs::read_dir(p)
            .with_context(|| format!("reading {}", p.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|c| c.is_dir())
            .collect();
        children.sort();
        if children.is_empty() {
            out.push(p.clone());
        }
        out.extend(children);
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train { cfg, seed, out } => train(cfg, seed, out)?,
        Command::Eval { run, episodes, seed, trace } => eval(&run, episodes, seed, trace)?,
        Command::Sweep { cfg, ues, algos, seeds, out } => {
            let cfg = cfg.resolve()?;
            cfg.validate()?;
            print_config(&cfg)?;
            let spec = SweepSpec { num_ues: ues, algorithms: algos, seeds };
            let outcome = sweep(&cfg, &spec, &out)?;
            print!("{}", outcome.table.to_text());
            let failed = outcome.runs.iter().filter(|(_, r)| r.is_err()).count();
            if failed > 0 {
                bail!("{failed} of {} runs failed", outcome.runs.len());
            }
        }
        Command::Summarize { runs, out } => {
            let table = summarize(&expand_runs(&runs)?);
            std::fs::create_dir_all(&out)?;
            table.write(&out.join("summary.csv"), &out.join("summary.txt"))?;
            print!("{}", table.to_text());
            for (dir, why) in &table.skipped {
                eprintln!("skipped {}: {why}", dir.display());
            }
        }
        Command::Plot { logs, metric, out } => {
            let logs: Vec<PathBuf> = logs.into_iter().map(|p| if p.is_dir() { p.join(LOG_FILE) } else { p }).collect();
            plot_logs(&logs, &metric, &out)?;
            println!("{metric} -> {}", out.display());
        }
        Command::Selftest => {
            let checks = with_thread_cap(run_selftest)?;
            for c in &checks {
                println!("{c}");
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
