use std::fs;
use std::path::Path;

use peat_orch::harness::config::{Algorithm, ExperimentConfig};
use peat_orch::harness::plot::{plot_logs, render_svg};
use peat_orch::harness::report::summarize;
use peat_orch::harness::run::{
    evaluate_checkpoint, execute_run, metrics_from_trace, read_log, read_trace, write_trace, Checkpoint, FinalMetrics,
    CHECKPOINT_FILE, CONFIG_FILE, LOG_FILE, SUMMARY_FILE, TRACE_FILE,
};
use peat_orch::harness::sweep::{sweep, SweepSpec};

fn small(algorithm: Algorithm) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.sys.num_ues = 3;
    cfg.sys.tasks_per_ue = 12;
    cfg.hyper.total_steps = 960;
    cfg.hyper.eval_interval = 240;
    cfg.hyper.eval_episodes = 3;
    cfg.hyper.workers = 2;
    cfg.hyper.minibatch_size = 32;
    cfg.run.algorithm = algorithm;
    cfg
}

fn log_bytes(dir: &Path) -> Vec<u8> {
    fs::read(dir.join(LOG_FILE)).unwrap()
}

#[test]
fn run_directory_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let s = execute_run(&small(Algorithm::Hmppo), 4, tmp.path()).unwrap();
    for f in [CONFIG_FILE, LOG_FILE, TRACE_FILE, CHECKPOINT_FILE, SUMMARY_FILE] {
        assert!(tmp.path().join(f).is_file(), "{f}");
    }
    assert!(s.completed());
    assert_eq!(s.log_rows, 4);
    assert_eq!(s.env_steps, 960);
}

#[test]
fn same_seed_same_log_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    for workers in [1, 3] {
        let mut cfg = small(Algorithm::Hmppo);
        cfg.hyper.workers = workers;
        let a = tmp.path().join(format!("a{workers}"));
        let b = tmp.path().join(format!("b{workers}"));
        execute_run(&cfg, 9, &a).unwrap();
        execute_run(&cfg, 9, &b).unwrap();
        assert_eq!(log_bytes(&a), log_bytes(&b), "workers = {workers}");
    }
    let c = tmp.path().join("c");
    execute_run(&small(Algorithm::Hmppo), 10, &c).unwrap();
    let a = tmp.path().join("x");
    execute_run(&small(Algorithm::Hmppo), 9, &a).unwrap();
    assert_ne!(log_bytes(&a), log_bytes(&c));
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    for algo in [Algorithm::Ippo, Algorithm::Random] {
        let first = tmp.path().join(format!("{algo}-first"));
        execute_run(&small(algo), 5, &first).unwrap();
        let echoed = ExperimentConfig::load(first.join(CONFIG_FILE).to_str().unwrap()).unwrap();
        assert_eq!(echoed.run.seeds, vec![5]);
        let second = tmp.path().join(format!("{algo}-second"));
        execute_run(&echoed, echoed.run.seeds[0], &second).unwrap();
        assert_eq!(log_bytes(&first), log_bytes(&second), "{algo}");
    }
}

#[test]
fn trace_reproduces_logged_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    for algo in Algorithm::ALL {
        let dir = tmp.path().join(algo.name());
        execute_run(&small(algo), 2, &dir).unwrap();
        let from_trace = metrics_from_trace(&read_trace(&dir.join(TRACE_FILE)).unwrap()).unwrap();
        let from_log = FinalMetrics::from_row(read_log(&dir.join(LOG_FILE)).unwrap().last().unwrap());
        let d = from_trace.max_relative_diff(&from_log);
        assert!(d <= 1e-6, "{algo}: {d:e}\n{from_trace:?}\n{from_log:?}");

        // rewriting the parsed trace is lossless at the printed precision
        let rows = read_trace(&dir.join(TRACE_FILE)).unwrap();
        let again = dir.join("again.csv");
        write_trace(&again, &rows).unwrap();
        assert_eq!(fs::read(&again).unwrap(), fs::read(dir.join(TRACE_FILE)).unwrap());
    }
}

#[test]
fn checkpoint_reevaluates_to_the_final_log_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(Algorithm::Hmppo);
    execute_run(&cfg, 6, tmp.path()).unwrap();
    let ckpt = Checkpoint::load(&tmp.path().join(CHECKPOINT_FILE)).unwrap();
    assert_eq!(ckpt.sys, cfg.sys);
    assert_eq!(ckpt.hyper, cfg.hyper);
    assert!(ckpt.agents.is_some());

    let eval = evaluate_checkpoint(&ckpt, cfg.hyper.eval_episodes, cfg.hyper.eval_seed, false).unwrap();
    let last = FinalMetrics::from_row(read_log(&tmp.path().join(LOG_FILE)).unwrap().last().unwrap());
    let got = FinalMetrics {
        reward_mean: eval.reward_mean,
        reward_std: eval.reward_std,
        total_delay_min: eval.total_delay_min,
        mean_perplexity: eval.mean_perplexity,
        emulator_switches: eval.switches,
    };
    assert!(got.max_relative_diff(&last) <= 1e-6, "{got:?} vs {last:?}");

    let text = fs::read_to_string(tmp.path().join(CHECKPOINT_FILE)).unwrap();
    let bad = tmp.path().join("bad");
    fs::write(&bad, text.replace("peat-orch-checkpoint", "something-else")).unwrap();
    assert!(Checkpoint::load(&bad).is_err());
}

#[test]
fn sweep_cells_are_isolated() {
    let tmp = tempfile::tempdir().unwrap();
    let base = small(Algorithm::Hmppo);
    let spec =
        SweepSpec { num_ues: vec![2, 3], algorithms: vec![Algorithm::Hmppo, Algorithm::Random], seeds: vec![1, 2] };
    let out = sweep(&base, &spec, &tmp.path().join("all")).unwrap();
    assert_eq!(out.runs.len(), 8);
    assert!(out.runs.iter().all(|(_, r)| r.is_ok()));
    assert_eq!(out.table.rows.len(), 4);
    assert!(tmp.path().join("all/summary.csv").is_file());

    let subset = SweepSpec { num_ues: vec![3], algorithms: vec![Algorithm::Hmppo], seeds: vec![2] };
    sweep(&base, &subset, &tmp.path().join("one")).unwrap();
    assert_eq!(log_bytes(&tmp.path().join("all/hmppo_n3_s2")), log_bytes(&tmp.path().join("one/hmppo_n3_s2")));

    let dirs: Vec<_> = out.runs.iter().map(|(d, _)| d.clone()).collect();
    let table = summarize(&dirs);
    assert_eq!(table, out.table);
}

#[test]
fn training_curves_render_as_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let mut logs = Vec::new();
    for seed in 1..=3 {
        let dir = tmp.path().join(format!("hmppo_s{seed}"));
        execute_run(&small(Algorithm::Hmppo), seed, &dir).unwrap();
        logs.push(dir.join(LOG_FILE));
    }
    let out = tmp.path().join("switches.svg");
    plot_logs(&logs, "emulator_switches", &out).unwrap();
    let text = fs::read_to_string(&out).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 3);
    let labels: Vec<&str> = doc.descendants().filter_map(|n| n.text()).collect();
    assert!(labels.contains(&"hmppo_s2"));
    assert!(labels.contains(&"Environment steps"));

    let delay = render_svg(&[("x".into(), read_log(&logs[0]).unwrap())], "total_delay_min").unwrap();
    roxmltree::Document::parse(&delay).unwrap();
    assert!(delay.contains("(min)"));
}

#[test]
fn failed_plot_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join(LOG_FILE);
    fs::write(&empty, format!("{}\n", peat_orch::hmppo::LOG_HEADER)).unwrap();
    let out = tmp.path().join("out.svg");
    assert!(plot_logs(std::slice::from_ref(&empty), "eval_reward_mean", &out).is_err());
    assert!(!out.exists());
    let err = plot_logs(&[empty], "bogus", &out).unwrap_err().to_string();
    assert!(err.contains("total_delay_min"), "{err}");
    assert!(!out.exists());
}
