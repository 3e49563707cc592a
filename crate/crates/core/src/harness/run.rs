use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig};
use crate::baselines::{ippo_train, random_train, MetricStats};
use crate::env::{TraceRow, TRACE_HEADER};
use crate::error::{Error, Result};
use crate::hmppo::{
    evaluate, train, Agents, EvalPolicy, EvalSummary, HyperParams, LogRow, TrainOutput, TrainStatus, LOG_HEADER,
};
use crate::sysmodel::{user_delay, SystemConfig};

pub const CONFIG_FILE: &str = "config.resolved";
pub const LOG_FILE: &str = "log.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint";
pub const SUMMARY_FILE: &str = "summary.json";

pub const CHECKPOINT_FORMAT: &str = "peat-orch-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Position of a ChaCha8 generator. `word_pos` is a decimal string because
/// it is a 128-bit counter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed_hex: String,
    pub stream: u64,
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed_hex: rng.get_seed().iter().map(|b| format!("{b:02x}")).collect(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        let bad = |what: &str| Error::Format { path: CHECKPOINT_FILE.into(), reason: format!("bad rng {what}") };
        if self.seed_hex.len() != 64 || !self.seed_hex.is_ascii() {
            return Err(bad("seed"));
        }
        let mut seed = [0u8; 32];
        for (i, byte) in seed.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&self.seed_hex[2 * i..2 * i + 2], 16).map_err(|_| bad("seed"))?;
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos.parse::<u128>().map_err(|_| bad("word position"))?);
        Ok(rng)
    }
}

/// Versioned JSON dump of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub env_steps: usize,
    pub sys: SystemConfig,
    pub hyper: HyperParams,
    /// Absent for the random policy.
    pub agents: Option<Agents>,
    pub rng: RngState,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Format { path: path.to_path_buf(), reason: e.to_string() })?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("unsupported checkpoint {} v{}", ckpt.format, ckpt.version),
            });
        }
        Ok(ckpt)
    }
}

/// The Table-I style numbers of one evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub reward_mean: f64,
    pub reward_std: f64,
    pub total_delay_min: f64,
    pub mean_perplexity: f64,
    pub emulator_switches: f64,
}

impl FinalMetrics {
    pub fn from_row(row: &LogRow) -> Self {
        Self {
            reward_mean: row.eval_reward_mean,
            reward_std: row.eval_reward_std,
            total_delay_min: row.total_delay_min,
            mean_perplexity: row.mean_perplexity,
            emulator_switches: row.emulator_switches,
        }
    }

    /// Largest relative deviation over the five metrics.
    pub fn max_relative_diff(&self, other: &Self) -> f64 {
        let pairs = [
            (self.reward_mean, other.reward_mean),
            (self.reward_std, other.reward_std),
            (self.total_delay_min, other.total_delay_min),
            (self.mean_perplexity, other.mean_perplexity),
            (self.emulator_switches, other.emulator_switches),
        ];
        pairs.iter().map(|&(a, b)| if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) }).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub num_ues: usize,
    pub seed: u64,
    pub env_steps: usize,
    pub log_rows: usize,
    /// `"completed"` or `"aborted: <reason>"`.
    pub status: String,
    pub final_eval: FinalMetrics,
}

impl RunSummary {
    pub fn completed(&self) -> bool {
        self.status == "completed"
    }
}

pub fn train_algorithm(cfg: &ExperimentConfig, seed: u64) -> Result<TrainOutput> {
    match cfg.run.algorithm {
        Algorithm::Hmppo => train(&cfg.sys, &cfg.hyper, seed),
        Algorithm::Ippo => ippo_train(&cfg.sys, &cfg.hyper, seed),
        Algorithm::Random => random_train(&cfg.sys, &cfg.hyper, seed),
    }
}

/// Trains one seed and writes the full run directory.
pub fn execute_run(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let mut resolved = cfg.clone();
    resolved.run.seeds = vec![seed];
    resolved.run.out_dir = dir.to_path_buf();
    fs::write(dir.join(CONFIG_FILE), resolved.to_toml()?)?;

    let out = train_algorithm(cfg, seed)?;
    write_log(&dir.join(LOG_FILE), &out.log)?;
    write_trace(&dir.join(TRACE_FILE), &out.final_eval.trace)?;
    Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        algorithm: cfg.run.algorithm,
        seed,
        env_steps: out.env_steps,
        sys: cfg.sys.clone(),
        hyper: cfg.hyper.clone(),
        agents: out.agents.clone(),
        rng: RngState::capture(&out.rng),
    }
    .save(&dir.join(CHECKPOINT_FILE))?;

    let summary = RunSummary {
        algorithm: cfg.run.algorithm,
        num_ues: cfg.sys.num_ues,
        seed,
        env_steps: out.env_steps,
        log_rows: out.log.len(),
        status: match &out.status {
            TrainStatus::Completed => "completed".into(),
            TrainStatus::Aborted(why) => format!("aborted: {why}"),
        },
        final_eval: out.log.last().map(FinalMetrics::from_row).unwrap_or_default(),
    };
    fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

pub fn write_log(path: &Path, rows: &[LogRow]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{LOG_HEADER}")?;
    for row in rows {
        writeln!(f, "{}", row.to_csv())?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_log(path: &Path) -> Result<Vec<LogRow>> {
    let text = fs::read_to_string(path)?;
    let fmt_err = |reason: String| Error::Format { path: path.to_path_buf(), reason };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(LOG_HEADER) {
        return Err(fmt_err("missing or unexpected header".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| LogRow::parse(l).ok_or_else(|| fmt_err(format!("malformed row {}", i + 2))))
        .collect()
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{TRACE_HEADER}")?;
    for row in rows {
        writeln!(f, "{}", row.to_csv())?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let text = fs::read_to_string(path)?;
    let fmt_err = |reason: String| Error::Format { path: path.to_path_buf(), reason };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(TRACE_HEADER) {
        return Err(fmt_err("missing or unexpected header".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| TraceRow::parse(l).ok_or_else(|| fmt_err(format!("malformed row {}", i + 2))))
        .collect()
}

/// Rebuilds the evaluation metrics from per-UE trace rows: system delay is
/// the per-step maximum, the step reward is counted once per step.
pub fn metrics_from_trace(rows: &[TraceRow]) -> Result<FinalMetrics> {
    #[derive(Default)]
    struct Episode {
        steps: BTreeMap<usize, (f64, f64)>,
        perplexity_sum: f64,
        tasks: usize,
        switches: usize,
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("empty trace".into()));
    }
    let mut episodes: BTreeMap<usize, Episode> = BTreeMap::new();
    for r in rows {
        let ep = episodes.entry(r.episode).or_default();
        let d = user_delay(r.d_up_s, r.d_down_s, r.z, r.indicator);
        let step = ep.steps.entry(r.t).or_insert((0.0, r.reward_step));
        step.0 = step.0.max(d);
        ep.perplexity_sum += r.kappa;
        ep.tasks += 1;
        ep.switches += usize::from(r.indicator);
    }
    let per_episode: Vec<(f64, f64, f64, f64)> = episodes
        .values()
        .map(|ep| {
            let delay_min = ep.steps.values().map(|s| s.0).sum::<f64>() / 60.0;
            let reward = ep.steps.values().map(|s| s.1).sum::<f64>();
            (reward, delay_min, ep.perplexity_sum / ep.tasks as f64, ep.switches as f64)
        })
        .collect();
    let reward = MetricStats::of(per_episode.iter().map(|e| e.0));
    let mean = |f: fn(&(f64, f64, f64, f64)) -> f64| MetricStats::of(per_episode.iter().map(f)).mean;
    Ok(FinalMetrics {
        reward_mean: reward.mean,
        reward_std: reward.std,
        total_delay_min: mean(|e| e.1),
        mean_perplexity: mean(|e| e.2),
        emulator_switches: mean(|e| e.3),
    })
}

/// Re-evaluates a checkpoint on `episodes` fixed episodes starting at `seed`.
/// Learned policies act deterministically; the random policy draws its
/// actions from a stream keyed by `seed`.
pub fn evaluate_checkpoint(ckpt: &Checkpoint, episodes: usize, seed: u64, with_trace: bool) -> Result<EvalSummary> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("need at least one evaluation episode".into()));
    }
    let policy = match (&ckpt.algorithm, &ckpt.agents) {
        (Algorithm::Random, _) => EvalPolicy::Random { seed },
        (_, Some(agents)) => EvalPolicy::Deterministic(agents),
        (algo, None) => {
            return Err(Error::Format {
                path: CHECKPOINT_FILE.into(),
                reason: format!("{algo} checkpoint carries no parameters"),
            })
        }
    };
    evaluate(&ckpt.sys, policy, seed, episodes, with_trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn rng_state_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        rng.set_stream(5);
        for _ in 0..37 {
            rng.next_u32();
        }
        let state = RngState::capture(&rng);
        let mut back = state.restore().unwrap();
        assert_eq!(back.next_u64(), rng.next_u64());
        let broken = RngState { seed_hex: "zz".into(), ..state };
        assert!(broken.restore().is_err());
    }

    #[test]
    fn trace_metrics_take_step_maximum() {
        let row = |episode, t, n, z, ind, up, down, kappa, reward| TraceRow {
            episode,
            t,
            n,
            z,
            e_proposed: 0.5,
            e_cached: 0.5,
            indicator: ind,
            d_up_s: up,
            d_down_s: down,
            kappa,
            reward_step: reward,
        };
        let rows = vec![
            row(0, 0, 0, 1, 0, 120.0, 0.0, 20.0, -3.0),
            row(0, 0, 1, 0, 1, 0.0, 60.0, 30.0, -3.0),
            row(0, 1, 0, 0, 0, 0.0, 0.0, 20.0, -2.0),
            row(0, 1, 1, 0, 0, 0.0, 0.0, 30.0, -2.0),
            row(1, 0, 0, 0, 1, 0.0, 600.0, 10.0, -7.0),
            row(1, 0, 1, 0, 1, 0.0, 300.0, 10.0, -7.0),
        ];
        let m = metrics_from_trace(&rows).unwrap();
        assert_eq!(m.reward_mean, -6.0);
        assert!((m.reward_std - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(m.total_delay_min, (2.0 + 10.0) / 2.0);
        assert_eq!(m.mean_perplexity, 17.5);
        assert_eq!(m.emulator_switches, 1.5);
        assert!(metrics_from_trace(&[]).is_err());
    }
}
