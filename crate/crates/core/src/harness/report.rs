use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::Algorithm;
use super::run::{read_log, FinalMetrics, RunSummary, LOG_FILE, SUMMARY_FILE};
use crate::baselines::MetricStats;
use crate::error::{Error, Result};

pub const SUMMARY_HEADER: &str = "algorithm,num_ues,runs,reward_mean,reward_std,total_delay_min_mean,\
total_delay_min_std,perplexity_mean,perplexity_std,switches_mean,switches_std";

/// Aggregate over seeds of one `(algorithm, UE count)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub num_ues: usize,
    pub runs: usize,
    pub reward: MetricStats,
    pub total_delay_min: MetricStats,
    pub perplexity: MetricStats,
    pub switches: MetricStats,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SummaryTable {
    /// Sorted by algorithm, then UE count.
    pub rows: Vec<SummaryRow>,
    /// Runs that could not be read, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

/// Reads a run directory: metadata from `summary.json`, metrics from the
/// final row of `log.csv`.
pub fn load_run(dir: &Path) -> Result<(RunSummary, FinalMetrics)> {
    let summary_path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&summary_path)?;
    let summary: RunSummary = serde_json::from_str(&text)
        .map_err(|e| Error::Format { path: summary_path.to_path_buf(), reason: e.to_string() })?;
    let log = read_log(&dir.join(LOG_FILE))?;
    let last =
        log.last().ok_or_else(|| Error::Format { path: dir.join(LOG_FILE), reason: "log has no rows".into() })?;
    Ok((summary, FinalMetrics::from_row(last)))
}

pub fn summarize(run_dirs: &[PathBuf]) -> SummaryTable {
    let mut cells: BTreeMap<(Algorithm, usize), Vec<FinalMetrics>> = BTreeMap::new();
    let mut skipped = Vec::new();
    for dir in run_dirs {
        match load_run(dir) {
            Ok((s, m)) if s.completed() => cells.entry((s.algorithm, s.num_ues)).or_default().push(m),
            Ok((s, _)) => skipped.push((dir.clone(), s.status)),
            Err(e) => skipped.push((dir.clone(), e.to_string())),
        }
    }
    for (dir, why) in &skipped {
        log::warn!("skipping run {}: {why}", dir.display());
    }
    let rows = cells
        .into_iter()
        .map(|((algorithm, num_ues), ms)| SummaryRow {
            algorithm,
            num_ues,
            runs: ms.len(),
            reward: MetricStats::of(ms.iter().map(|m| m.reward_mean)),
            total_delay_min: MetricStats::of(ms.iter().map(|m| m.total_delay_min)),
            perplexity: MetricStats::of(ms.iter().map(|m| m.mean_perplexity)),
            switches: MetricStats::of(ms.iter().map(|m| m.emulator_switches)),
        })
        .collect();
    SummaryTable { rows, skipped }
}

impl SummaryTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(SUMMARY_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{},{},{}", r.algorithm, r.num_ues, r.runs);
            for m in [r.reward, r.total_delay_min, r.perplexity, r.switches] {
                let _ = write!(s, ",{},{}", crate::env::fmt_sig9(m.mean), crate::env::fmt_sig9(m.std));
            }
            s.push('\n');
        }
        s
    }

    /// Fixed-width `mean ± std` table: reward, delay in minutes, perplexity
    /// and switches per (algorithm, N).
    pub fn to_text(&self) -> String {
        let header = ["Algorithm", "UEs", "Runs", "Reward", "Total delay (min)", "Task perplexity", "Switches"];
        let pm = |m: MetricStats, prec: usize| format!("{:.p$} ± {:.p$}", m.mean, m.std, p = prec);
        let body: Vec<[String; 7]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.algorithm.to_string(),
                    r.num_ues.to_string(),
                    r.runs.to_string(),
                    pm(r.reward, 2),
                    pm(r.total_delay_min, 2),
                    pm(r.perplexity, 2),
                    pm(r.switches, 1),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: Vec<&str>| -> String {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, &w))| {
                    let pad = w - c.chars().count();
                    if i < 3 {
                        format!("{c}{}", " ".repeat(pad))
                    } else {
                        format!("{}{c}", " ".repeat(pad))
                    }
                })
                .collect();
            padded.join("  ").trim_end().to_string()
        };
        let mut out = line(header.to_vec());
        out.push('\n');
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        out.push('\n');
        for row in &body {
            out.push_str(&line(row.iter().map(String::as_str).collect()));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, csv_path: &Path, text_path: &Path) -> Result<()> {
        fs::write(csv_path, self.to_csv())?;
        fs::write(text_path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::write_log;
    use crate::hmppo::LogRow;

    fn fake_run(root: &Path, name: &str, algo: Algorithm, n: usize, seed: u64, reward: f64) -> PathBuf {
        let dir = root.join(name);
        fs::create_dir_all(&dir).unwrap();
        let row = LogRow {
            env_steps: 500,
            eval_reward_mean: reward,
            eval_reward_std: 1.0,
            total_delay_min: -reward,
            mean_perplexity: 40.0,
            emulator_switches: 3.0,
            actor1_loss: 0.0,
            actor2_loss: 0.0,
            critic_loss: 0.0,
            entropy1: 0.0,
            entropy2: 0.0,
        };
        write_log(&dir.join(LOG_FILE), &[row]).unwrap();
        let summary = RunSummary {
            algorithm: algo,
            num_ues: n,
            seed,
            env_steps: 500,
            log_rows: 1,
            status: "completed".into(),
            final_eval: FinalMetrics::from_row(&row),
        };
        fs::write(dir.join(SUMMARY_FILE), serde_json::to_string(&summary).unwrap()).unwrap();
        dir
    }

    #[test]
    fn seeds_collapse_into_one_sorted_row() {
        let tmp = tempfile::tempdir().unwrap();
        let mut dirs = vec![
            fake_run(tmp.path(), "r8", Algorithm::Random, 8, 1, -600.0),
            fake_run(tmp.path(), "h8a", Algorithm::Hmppo, 8, 1, -300.0),
            fake_run(tmp.path(), "h8b", Algorithm::Hmppo, 8, 2, -310.0),
            fake_run(tmp.path(), "h8c", Algorithm::Hmppo, 8, 3, -320.0),
            fake_run(tmp.path(), "h6", Algorithm::Hmppo, 6, 1, -290.0),
        ];
        let broken = tmp.path().join("broken");
        fs::create_dir_all(&broken).unwrap();
        fs::write(broken.join(LOG_FILE), "garbage").unwrap();
        dirs.push(broken.clone());

        let table = summarize(&dirs);
        let keys: Vec<(Algorithm, usize)> = table.rows.iter().map(|r| (r.algorithm, r.num_ues)).collect();
        assert_eq!(keys, vec![(Algorithm::Hmppo, 6), (Algorithm::Hmppo, 8), (Algorithm::Random, 8)]);
        let h8 = &table.rows[1];
        assert_eq!(h8.runs, 3);
        assert_eq!(h8.reward.mean, -310.0);
        assert_eq!(h8.reward.std, 10.0);
        assert_eq!(table.skipped.len(), 1);
        assert_eq!(table.skipped[0].0, broken);

        let csv = table.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with(SUMMARY_HEADER));
        let text = table.to_text();
        assert!(text.contains("-310.00 ± 10.00"));
        let widths: Vec<usize> = text.lines().skip(2).map(|l| l.chars().count()).collect();
        assert!(widths.windows(2).all(|w| w[0] == w[1]), "{text}");
    }
}
