//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Criteria 8-11 train 15 agents at 5e4 steps (a few minutes on one
//! core).

use std::process::ExitCode;
use std::time::Instant;

use peat_orch::baselines::{random_policy_rollout, MetricStats, PolicySummary};
use peat_orch::harness::config::{Algorithm, ExperimentConfig};
use peat_orch::harness::report::SummaryRow;
use peat_orch::harness::selftest::{run_selftest, Check};
use peat_orch::harness::sweep::{sweep, SweepSpec};
use peat_orch::sysmodel::SystemConfig;

const STEPS: usize = 50_000;
const SEEDS: [u64; 3] = [1, 2, 3];
const UES: [usize; 4] = [6, 7, 8, 9];
const RANDOM_EPISODES: usize = 100;
const RANDOM_SEED: u64 = 0;
/// HMPPO must be at least this many times less negative than random.
const RANDOM_MARGIN: f64 = 1.5;
const SWITCH_RATIO: f64 = 0.25;
/// Rewards closer than this (relative to IPPO) count as a tie, settled by delay.
const TIE_RTOL: f64 = 0.01;

fn row(rows: &[SummaryRow], algo: Algorithm, n: usize) -> Option<&SummaryRow> {
    rows.iter().find(|r| r.algorithm == algo && r.num_ues == n && r.runs == SEEDS.len())
}

fn pooled_std(a: MetricStats, b: MetricStats) -> f64 {
    ((a.std * a.std + b.std * b.std) / 2.0).sqrt()
}

fn learning_checks() -> Result<Vec<Check>, Box<dyn std::error::Error>> {
    let mut base = ExperimentConfig::default();
    base.hyper.total_steps = STEPS;
    let root = tempfile::tempdir()?;

    let hmppo = sweep(
        &base,
        &SweepSpec { num_ues: UES.to_vec(), algorithms: vec![Algorithm::Hmppo], seeds: SEEDS.to_vec() },
        &root.path().join("hmppo"),
    )?;
    let ippo = sweep(
        &base,
        &SweepSpec { num_ues: vec![8], algorithms: vec![Algorithm::Ippo], seeds: SEEDS.to_vec() },
        &root.path().join("ippo"),
    )?;
    print!("{}", hmppo.table.to_text());
    print!("{}", ippo.table.to_text());

    let random: Vec<(usize, PolicySummary)> = UES
        .iter()
        .map(|&n| Ok((n, random_policy_rollout(&SystemConfig::with_ues(n), RANDOM_EPISODES, RANDOM_SEED)?)))
        .collect::<peat_orch::Result<_>>()?;
    for (n, r) in &random {
        println!(
            "random n={n} ({RANDOM_EPISODES} episodes): reward {:.2} ± {:.2}, switches {:.1}",
            r.reward.mean, r.reward.std, r.switches.mean
        );
    }
    let random_at = |n: usize| random.iter().find(|(m, _)| *m == n).map(|(_, r)| *r).expect("swept UE count");

    let h = &hmppo.table.rows;
    let missing = |what: &str| Check { id: 0, name: "", passed: false, detail: format!("missing {what} runs") };

    let c8 = match row(h, Algorithm::Hmppo, 8) {
        Some(r) => {
            let bound = random_at(8).reward.mean / RANDOM_MARGIN;
            Check {
                id: 8,
                name: "HMPPO beats random",
                passed: r.reward.mean >= bound,
                detail: format!(
                    "HMPPO {:.2} vs random {:.2}; needs >= {bound:.2}",
                    r.reward.mean,
                    random_at(8).reward.mean
                ),
            }
        }
        None => Check { id: 8, name: "HMPPO beats random", ..missing("HMPPO n=8") },
    };

    let c9 = match (row(h, Algorithm::Hmppo, 8), row(&ippo.table.rows, Algorithm::Ippo, 8)) {
        (Some(a), Some(b)) => {
            let tie = (a.reward.mean - b.reward.mean).abs() <= TIE_RTOL * b.reward.mean.abs();
            let passed =
                if tie { a.total_delay_min.mean <= b.total_delay_min.mean } else { a.reward.mean >= b.reward.mean };
            Check {
                id: 9,
                name: "HMPPO >= IPPO",
                passed,
                detail: format!(
                    "reward {:.2} vs {:.2}, delay {:.1} vs {:.1} min{}",
                    a.reward.mean,
                    b.reward.mean,
                    a.total_delay_min.mean,
                    b.total_delay_min.mean,
                    if tie { " (tie on reward, settled by delay)" } else { "" }
                ),
            }
        }
        _ => Check { id: 9, name: "HMPPO >= IPPO", ..missing("n=8") },
    };

    let mut switch_detail = Vec::new();
    let mut switch_ok = true;
    for n in UES {
        match row(h, Algorithm::Hmppo, n) {
            Some(r) => {
                let limit = SWITCH_RATIO * random_at(n).switches.mean;
                switch_ok &= r.switches.mean < limit;
                switch_detail.push(format!("n={n} {:.1} < {limit:.1}", r.switches.mean));
            }
            None => {
                switch_ok = false;
                switch_detail.push(format!("n={n} missing"));
            }
        }
    }
    let c10 = Check { id: 10, name: "emulator switches", passed: switch_ok, detail: switch_detail.join(", ") };

    let by_n: Vec<Option<&SummaryRow>> = UES.iter().map(|&n| row(h, Algorithm::Hmppo, n)).collect();
    let c11 = if by_n.iter().all(Option::is_some) {
        let rows: Vec<&SummaryRow> = by_n.into_iter().flatten().collect();
        let mut violations = 0;
        let mut within = true;
        for w in rows.windows(2) {
            if w[1].reward.mean > w[0].reward.mean {
                violations += 1;
                within &= w[1].reward.mean - w[0].reward.mean <= pooled_std(w[0].reward, w[1].reward);
            }
        }
        let means: Vec<String> = rows.iter().map(|r| format!("{:.2}", r.reward.mean)).collect();
        Check {
            id: 11,
            name: "reward non-increasing in N",
            passed: violations == 0 || (violations == 1 && within),
            detail: format!("means over N=6..9: {}; {violations} rising pair(s)", means.join(", ")),
        }
    } else {
        Check { id: 11, name: "reward non-increasing in N", ..missing("HMPPO") }
    };

    Ok(vec![c8, c9, c10, c11])
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut checks = run_selftest();
    println!("oracle suite: {:.1} s", start.elapsed().as_secs_f64());

    let start = Instant::now();
    match learning_checks() {
        Ok(c) => checks.extend(c),
        Err(e) => {
            for (id, name) in [
                (8, "HMPPO beats random"),
                (9, "HMPPO >= IPPO"),
                (10, "emulator switches"),
                (11, "reward non-increasing in N"),
            ] {
                checks.push(Check { id, name, passed: false, detail: format!("error: {e}") });
            }
        }
    }
    println!("learning suite: {:.1} s", start.elapsed().as_secs_f64());
    checks.sort_by_key(|c| c.id);

    println!();
    for c in &checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {:>2} ({}): {}", c.id, c.name, c.detail);
    }
    if checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
