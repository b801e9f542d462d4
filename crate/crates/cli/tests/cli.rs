//! End-to-end tests of the `spherecc` binary: every subcommand, the exit
//! code contract, config precedence, and byte-level re-run stability.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spherecc"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary spawns")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap()
}

fn read_toml(path: &Path) -> toml::Value {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    toml::from_str(&text).unwrap()
}

/// Generates the small three-cluster dataset most tests share: 120 points in
/// 6 dimensions, an 80/20 split, and 600 balanced constraints.
fn gen_small(cwd: &Path, out: &str, seed: &str) {
    let o = run(
        &[
            "gen", "--k", "3", "--dim", "6", "--n", "120", "--constraints", "600", "--seed", seed,
            "--out-dir", out,
        ],
        cwd,
    );
    assert_exit(&o, 0);
}

/// Trains the shared small dataset to a well-converged embedding (~0.1 s).
fn train_small(cwd: &Path, data_dir: &str, out: &str) {
    let data = format!("{data_dir}/data.csv");
    let split = format!("{data_dir}/split.json");
    let constraints = format!("{data_dir}/constraints.csv");
    let o = run(
        &[
            "train", "--data", &data, "--split", &split, "--constraints", &constraints,
            "--embed-dim", "6", "--hidden", "32,32", "--lr", "0.01", "--epochs-max", "400",
            "--seed", "11", "--out-dir", out,
        ],
        cwd,
    );
    assert_exit(&o, 0);
}

#[test]
fn gen_writes_expected_files() {
    let tmp = TempDir::new().unwrap();
    gen_small(tmp.path(), "d", "5");
    for f in [
        "data.csv",
        "labels.csv",
        "split.json",
        "constraints.csv",
        "effective-config.toml",
        "manifest.json",
    ] {
        assert!(tmp.path().join("d").join(f).exists(), "missing {f}");
    }
    let manifest = read_json(&tmp.path().join("d/manifest.json"));
    assert_eq!(manifest["command"], "gen");
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn usage_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    // Missing required flags (clap's own validation).
    assert_exit(&run(&["gen", "--k", "3"], tmp.path()), 2);
    // Parameter validation after parsing.
    gen_small(tmp.path(), "d", "5");
    let bad_embed = run(
        &[
            "train", "--data", "d/data.csv", "--split", "d/split.json", "--constraints",
            "d/constraints.csv", "--embed-dim", "0", "--out-dir", "t",
        ],
        tmp.path(),
    );
    assert_exit(&bad_embed, 2);
    assert!(stderr(&bad_embed).contains("embed_dim"));
    // A constraint referencing a row outside the training view.
    std::fs::write(tmp.path().join("bad.csv"), "a,b,y\n0,999,1\n").unwrap();
    let bad_index = run(
        &[
            "train", "--data", "d/data.csv", "--split", "d/split.json", "--constraints",
            "bad.csv", "--out-dir", "t",
        ],
        tmp.path(),
    );
    assert_exit(&bad_index, 2);
    // The pca method cannot run without constraints.
    assert_exit(
        &run(
            &["infer-k", "--checkpoint", "x.json", "--data", "d/data.csv"],
            tmp.path(),
        ),
        2,
    );
}

#[test]
fn verify_theory_passes_and_reports_each_check() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["verify-theory", "--seed", "3"], tmp.path());
    assert_exit(&o, 0);
    let text = stdout(&o);
    let passes = text.lines().filter(|l| l.ends_with(": PASS")).count();
    assert_eq!(passes, 7, "output:\n{text}");
    assert!(!text.contains("FAIL"));

    let o = run(&["verify-theory", "--seed", "3", "--json"], tmp.path());
    assert_exit(&o, 0);
    let checks: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let arr = checks.as_array().unwrap();
    assert_eq!(arr.len(), 7);
    assert!(arr.iter().all(|c| c["passed"] == true));
}

#[test]
fn verify_theory_fault_injection_fails_loudly() {
    let tmp = TempDir::new().unwrap();
    let o = run(
        &["verify-theory", "--inject-fault", "minimal_admissible_omega"],
        tmp.path(),
    );
    assert_exit(&o, 1);
    assert!(stdout(&o).contains("minimal_admissible_omega: FAIL"));

    // An unknown check name is a usage error, not a test failure.
    assert_exit(&run(&["verify-theory", "--inject-fault", "nonsense"], tmp.path()), 2);
}

#[test]
fn pipeline_recovers_planted_clusters() {
    let tmp = TempDir::new().unwrap();
    gen_small(tmp.path(), "d", "11");
    train_small(tmp.path(), "d", "t");
    assert!(tmp.path().join("t/checkpoint.json").exists());
    assert!(tmp.path().join("t/loss.csv").exists());
    let report = read_json(&tmp.path().join("t/train-report.json"));
    assert_eq!(report["stop_reason"], "early_stop");

    let o = run(
        &[
            "cluster", "--checkpoint", "t/checkpoint.json", "--data", "d/data.csv", "--split",
            "d/split.json", "--k", "3", "--seed", "11", "--out-dir", "c",
        ],
        tmp.path(),
    );
    assert_exit(&o, 0);
    let train_metrics = read_json(&tmp.path().join("c/train-metrics.json"));
    let test_metrics = read_json(&tmp.path().join("c/test-metrics.json"));
    assert!(train_metrics["acc"].as_f64().unwrap() >= 0.95);
    assert!(test_metrics["acc"].as_f64().unwrap() >= 0.90);
    // 96 train rows and 24 held-out rows, plus one header line each.
    let assigns = std::fs::read_to_string(tmp.path().join("c/assignments.csv")).unwrap();
    assert_eq!(assigns.lines().count(), 97);
    let preds = std::fs::read_to_string(tmp.path().join("c/predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 25);

    // The inferred cluster count is stable across a 10x change in the
    // plateau tolerance, and across the two label-free methods.
    for rho in ["0.01", "0.1"] {
        let o = run(
            &[
                "infer-k", "--checkpoint", "t/checkpoint.json", "--data", "d/data.csv",
                "--split", "d/split.json", "--constraints", "d/constraints.csv", "--rho", rho,
                "--out-dir", "ik",
            ],
            tmp.path(),
        );
        assert_exit(&o, 0);
        assert!(stdout(&o).contains("inferred k = 3"));
    }
    let estimate = read_json(&tmp.path().join("ik/k-estimate.json"));
    assert_eq!(estimate["k_hat"], 3);
    assert_eq!(estimate["d_star"], 2);
    assert!(tmp.path().join("ik/curve.csv").exists());
    for method in ["silhouette", "lifetime"] {
        let o = run(
            &[
                "infer-k", "--checkpoint", "t/checkpoint.json", "--data", "d/data.csv",
                "--split", "d/split.json", "--method", method, "--k-range", "2:6", "--out-dir",
                method,
            ],
            tmp.path(),
        );
        assert_exit(&o, 0);
        assert!(stdout(&o).contains("inferred k = 3"), "method {method}");
        assert!(tmp.path().join(method).join("scores.csv").exists());
    }
}

#[test]
fn ward_matches_kmeans_on_separated_data() {
    let tmp = TempDir::new().unwrap();
    gen_small(tmp.path(), "d", "11");
    train_small(tmp.path(), "d", "t");
    let o = run(
        &[
            "cluster", "--checkpoint", "t/checkpoint.json", "--data", "d/data.csv", "--split",
            "d/split.json", "--k", "3", "--method", "ward", "--out-dir", "w",
        ],
        tmp.path(),
    );
    assert_exit(&o, 0);
    let metrics = read_json(&tmp.path().join("w/train-metrics.json"));
    assert!(metrics["acc"].as_f64().unwrap() >= 0.95);
}

#[test]
fn eval_agrees_with_cluster_metrics() {
    let tmp = TempDir::new().unwrap();
    gen_small(tmp.path(), "d", "11");
    train_small(tmp.path(), "d", "t");
    let o = run(
        &[
            "cluster", "--checkpoint", "t/checkpoint.json", "--data", "d/data.csv", "--split",
            "d/split.json", "--k", "3", "--seed", "11", "--out-dir", "c",
        ],
        tmp.path(),
    );
    assert_exit(&o, 0);

    // Slice the full labeling down to the training rows so it aligns with
    // assignments.csv, then check eval reproduces cluster's own report.
    let split = read_json(&tmp.path().join("d/split.json"));
    let train_idx: Vec<usize> = split["train_idx"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize)
        .collect();
    let labels_text = std::fs::read_to_string(tmp.path().join("d/labels.csv")).unwrap();
    let all_labels: Vec<&str> = labels_text
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1)
        .collect();
    let mut truth = String::from("index,cluster\n");
    for (row, &i) in train_idx.iter().enumerate() {
        truth.push_str(&format!("{row},{}\n", all_labels[i]));
    }
    std::fs::write(tmp.path().join("truth.csv"), truth).unwrap();

    let o = run(
        &[
            "eval", "--pred", "c/assignments.csv", "--truth", "truth.csv", "--out", "eval.json",
        ],
        tmp.path(),
    );
    assert_exit(&o, 0);
    let from_eval = read_json(&tmp.path().join("eval.json"));
    let from_cluster = read_json(&tmp.path().join("c/train-metrics.json"));
    for key in ["acc", "nmi", "ari", "n"] {
        assert_eq!(from_eval[key], from_cluster[key], "metric {key}");
    }
}

#[test]
fn reruns_are_byte_identical_except_manifest() {
    let tmp = TempDir::new().unwrap();
    gen_small(tmp.path(), "a", "5");
    std::thread::sleep(std::time::Duration::from_millis(1100));
    gen_small(tmp.path(), "b", "5");
    for f in ["data.csv", "labels.csv", "split.json", "constraints.csv", "effective-config.toml"] {
        let x = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let y = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between identical runs");
    }
    train_small(tmp.path(), "a", "ta");
    train_small(tmp.path(), "a", "tb");
    for f in ["checkpoint.json", "loss.csv", "effective-config.toml"] {
        let x = std::fs::read(tmp.path().join("ta").join(f)).unwrap();
        let y = std::fs::read(tmp.path().join("tb").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between identical runs");
    }
}

#[test]
fn imbalanced_constraint_groups_nest() {
    let tmp = TempDir::new().unwrap();
    let o = run(
        &[
            "gen", "--k", "3", "--dim", "6", "--n", "120", "--imb", "60,120,240",
            "--imb-cluster", "0", "--seed", "9", "--out-dir", "d",
        ],
        tmp.path(),
    );
    assert_exit(&o, 0);
    assert!(tmp.path().join("d/imb-manifest.json").exists());
    let load = |name: &str| -> Vec<String> {
        std::fs::read_to_string(tmp.path().join("d").join(name))
            .unwrap()
            .lines()
            .skip(1)
            .map(str::to_owned)
            .collect()
    };
    let g0 = load("imb0.csv");
    let g1 = load("imb1.csv");
    let g2 = load("imb2.csv");
    assert_eq!((g0.len(), g1.len(), g2.len()), (60, 120, 240));
    let s1: std::collections::HashSet<&String> = g1.iter().collect();
    let s2: std::collections::HashSet<&String> = g2.iter().collect();
    assert!(g0.iter().all(|c| s1.contains(c)), "group 0 not inside group 1");
    assert!(g1.iter().all(|c| s2.contains(c)), "group 1 not inside group 2");
}

#[test]
fn config_file_fills_defaults_and_flags_override() {
    let tmp = TempDir::new().unwrap();
    gen_small(tmp.path(), "d", "5");
    std::fs::write(tmp.path().join("cfg.toml"), "lr = 0.02\nembed_dim = 4\nhidden = [16]\n")
        .unwrap();
    let o = run(
        &[
            "train", "--data", "d/data.csv", "--split", "d/split.json", "--constraints",
            "d/constraints.csv", "--config", "cfg.toml", "--lr", "0.03", "--epochs-max", "5",
            "--out-dir", "t",
        ],
        tmp.path(),
    );
    assert_exit(&o, 0);
    let eff = read_toml(&tmp.path().join("t/effective-config.toml"));
    assert_eq!(eff["lr"].as_float(), Some(0.03), "flag beats file");
    assert_eq!(eff["embed_dim"].as_integer(), Some(4), "file beats default");
    assert_eq!(eff["epochs_max"].as_integer(), Some(5));

    // Unknown keys fail loudly instead of silently falling back to defaults.
    std::fs::write(tmp.path().join("typo.toml"), "learning_rate = 0.02\n").unwrap();
    let o = run(
        &[
            "train", "--data", "d/data.csv", "--split", "d/split.json", "--constraints",
            "d/constraints.csv", "--config", "typo.toml", "--out-dir", "t2",
        ],
        tmp.path(),
    );
    assert_exit(&o, 2);
}

#[test]
fn omega_exact_resolves_to_tightest_admissible() {
    let tmp = TempDir::new().unwrap();
    gen_small(tmp.path(), "d", "5");
    let o = run(
        &[
            "train", "--data", "d/data.csv", "--split", "d/split.json", "--constraints",
            "d/constraints.csv", "--omega", "exact", "--k", "3", "--epochs-max", "5",
            "--out-dir", "t",
        ],
        tmp.path(),
    );
    assert_exit(&o, 0);
    let eff = read_toml(&tmp.path().join("t/effective-config.toml"));
    let omega = eff["omega"].as_float().unwrap();
    assert!((omega - 1.5).abs() < 1e-9, "omega for k=3 should be 1.5, got {omega}");

    // exact without k has nothing to derive from.
    let o = run(
        &[
            "train", "--data", "d/data.csv", "--split", "d/split.json", "--constraints",
            "d/constraints.csv", "--omega", "exact", "--out-dir", "t2",
        ],
        tmp.path(),
    );
    assert_exit(&o, 2);
}

#[test]
fn divergence_exits_3_and_leaves_stub_report() {
    let tmp = TempDir::new().unwrap();
    // Magnitudes around 1e200 overflow the squared reconstruction error,
    // and skipping standardization keeps them that large.
    std::fs::write(
        tmp.path().join("huge.csv"),
        "1e200,2.0,0\n-1e200,1.0,1\n2e200,1.0,0\n3e200,0.5,1\n",
    )
    .unwrap();
    std::fs::write(tmp.path().join("c.csv"), "a,b,y\n0,1,0\n2,3,0\n0,2,1\n").unwrap();
    let o = run(
        &[
            "train", "--data", "huge.csv", "--constraints", "c.csv", "--no-standardize",
            "--embed-dim", "2", "--hidden", "16", "--epochs-max", "5", "--seed", "0",
            "--out-dir", "t",
        ],
        tmp.path(),
    );
    assert_exit(&o, 3);
    assert!(stderr(&o).contains("diverged"));
    let report = read_json(&tmp.path().join("t/train-report.json"));
    assert_eq!(report["stop_reason"], "diverged");
    assert!(!tmp.path().join("t/checkpoint.json").exists());
}
