//! End-to-end runs of the `riskdp` binary.

use std::path::Path;
use std::process::{Command, Output};

fn riskdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskdp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn pipeline_gen_explore_solve_train_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let run = |args: &[&str]| {
        let o = riskdp(args);
        assert!(
            o.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    };
    run(&[
        "gen",
        "--states",
        "2",
        "--actions",
        "2",
        "--seed",
        "3",
        "--out",
        arg(&d("model.json")),
    ]);
    run(&[
        "explore",
        "--model",
        arg(&d("model.json")),
        "--t-max",
        "800",
        "--seed",
        "3",
        "--out",
        arg(&d("data.csv")),
    ]);
    run(&[
        "solve",
        "--model",
        arg(&d("model.json")),
        "--normalize",
        "--grid-step",
        "0.1",
        "--out",
        arg(&d("oracle.json")),
    ]);
    run(&[
        "train",
        "--data",
        arg(&d("data.csv")),
        "--model",
        arg(&d("model.json")),
        "--normalize",
        "--m-grid",
        "30",
        "--seed",
        "3",
        "--out",
        arg(&d("learned.json")),
    ]);
    let eval = |out: &str| {
        run(&[
            "eval",
            "--model",
            arg(&d("model.json")),
            "--normalize",
            "--learned",
            arg(&d("learned.json")),
            "--oracle",
            arg(&d("oracle.json")),
            "--out",
            arg(&d(out)),
        ]);
        std::fs::read(d(out)).unwrap()
    };
    assert_eq!(eval("eval1.json"), eval("eval2.json"));

    assert_eq!(json(&d("model.json"))["n_states"], 2);
    assert_eq!(
        std::fs::read_to_string(d("data.csv"))
            .unwrap()
            .lines()
            .count(),
        800
    );
    let oracle = json(&d("oracle.json"));
    assert_eq!(oracle["v_star"].as_array().unwrap().len(), 2);
    let meta = json(&d("oracle.json.meta.json"));
    assert_eq!(meta["command"], "solve");
    assert_eq!(meta["inputs"].as_array().unwrap().len(), 1);
    let learned = json(&d("learned.json"));
    let bound = 1.0 / (1.0 - 0.3);
    for v in learned["v_hat"].as_array().unwrap() {
        assert!((0.0..=bound + 1e-12).contains(&v.as_f64().unwrap()));
    }
}

#[test]
fn gen_is_deterministic_per_seed() {
    let a = riskdp(&["gen", "--seed", "9"]);
    let b = riskdp(&["gen", "--seed", "9"]);
    let c = riskdp(&["gen", "--seed", "10"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn bound_prints_both_numbers() {
    let o = riskdp(&[
        "bound",
        "--n-states",
        "4",
        "--n-actions",
        "4",
        "--epsilon-e",
        "0.2",
        "--ell",
        "4",
        "--t-max",
        "10000",
        "--epsilon",
        "0.1",
        "--b",
        "0.05",
        "--epsilon-theta",
        "0.01",
        "--epsilon-v",
        "0.01",
        "--gamma",
        "0.3",
        "--c-max",
        "1",
        "--n",
        "20",
        "--v0-gap",
        "1.4285714285714286",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap()
            .trim()
            .parse()
            .unwrap()
    };
    assert_eq!(value("prob_lower_bound"), 0.0);
    assert!((value("error_upper_bound") - 4.381632653111035).abs() <= 1e-12 * 4.4);
}

#[test]
fn bad_input_exits_one() {
    assert_eq!(riskdp(&["bound", "--gamma", "0.3"]).status.code(), Some(1));
    assert_eq!(
        riskdp(&["solve", "--model", "/nonexistent.json"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(riskdp(&["gen", "--gamma", "1.5"]).status.code(), Some(1));
    assert_eq!(riskdp(&["no-such-command"]).status.code(), Some(1));
}

#[test]
fn unnormalized_benchmark_is_rejected_without_flag() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    assert!(riskdp(&[
        "gen",
        "--states",
        "2",
        "--actions",
        "2",
        "--out",
        arg(&model)
    ])
    .status
    .success());
    let o = riskdp(&["solve", "--model", arg(&model)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("1.2"));
}

#[test]
fn experiment_reads_config_and_reports_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let base = serde_json::json!({
        "n_states": 2, "n_actions": 2, "normalize": true, "t_max": 400, "m_grid": 20, "replicas": 2,
        "oracle_search": { "grid_step": 0.1, "n_random": 0, "refine_rounds": 0 },
        "learner": { "search": { "grid_step": 0.1, "n_random": 0, "refine_rounds": 0 } }
    });
    std::fs::write(&cfg, base.to_string()).unwrap();
    let out = dir.path().join("run");
    let o = riskdp(&[
        "experiment",
        "--config",
        arg(&cfg),
        "--seed",
        "4",
        "--out",
        arg(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8(o.stdout)
        .unwrap()
        .contains("replicas ok 2 failed 0"));
    assert_eq!(json(&out.join("summary.json"))["master_seed"], 4);
    assert_eq!(
        std::fs::read_to_string(out.join("errors.csv"))
            .unwrap()
            .lines()
            .count(),
        5
    );

    let mut failing = base;
    failing["oracle_max_iter"] = 1.into();
    std::fs::write(&cfg, failing.to_string()).unwrap();
    let o = riskdp(&["experiment", "--config", arg(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
}
