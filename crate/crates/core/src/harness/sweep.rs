use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{Algorithm, ExperimentConfig};
use super::report::{summarize, SummaryTable};
use super::run::{execute_run, RunSummary};
use crate::error::{Error, Result};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "PEAT_ORCH_THREADS";

/// Thread count from `PEAT_ORCH_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
    }
}

/// Runs `f` on a pool honouring `PEAT_ORCH_THREADS` (or rayon's default).
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub num_ues: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
}

impl SweepSpec {
    /// Every `(algorithm, N, seed)` combination with its run directory name.
    pub fn cells(&self) -> Vec<(Algorithm, usize, u64, String)> {
        let mut out = Vec::new();
        for &a in &self.algorithms {
            for &n in &self.num_ues {
                for &s in &self.seeds {
                    out.push((a, n, s, format!("{a}_n{n}_s{s}")));
                }
            }
        }
        out
    }
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub runs: Vec<(PathBuf, Result<RunSummary>)>,
    pub table: SummaryTable,
}

/// Runs every cell in its own directory under `root` (in parallel, each run
/// fully isolated), then writes `summary.csv` and `summary.txt` there.
pub fn sweep(base: &ExperimentConfig, spec: &SweepSpec, root: &Path) -> Result<SweepOutcome> {
    if spec.num_ues.is_empty() || spec.algorithms.is_empty() || spec.seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one UE count, algorithm and seed".into()));
    }
    let cells = spec.cells();
    for &(a, n, _, _) in &cells {
        let mut cfg = base.clone();
        cfg.sys.num_ues = n;
        cfg.run.algorithm = a;
        cfg.validate()?;
    }
    std::fs::create_dir_all(root)?;
    let runs: Vec<(PathBuf, Result<RunSummary>)> = with_thread_cap(|| {
        cells
            .par_iter()
            .map(|(a, n, s, name)| {
                let mut cfg = base.clone();
                cfg.sys.num_ues = *n;
                cfg.run.algorithm = *a;
                cfg.run.seeds = vec![*s];
                let dir = root.join(name);
                let res = execute_run(&cfg, *s, &dir);
                if let Err(e) = &res {
                    log::warn!("run {name} failed: {e}");
                }
                (dir, res)
            })
            .collect()
    })?;
    let dirs: Vec<PathBuf> = runs.iter().map(|(d, _)| d.clone()).collect();
    let table = summarize(&dirs);
    table.write(&root.join("summary.csv"), &root.join("summary.txt"))?;
    Ok(SweepOutcome { runs, table })
}
