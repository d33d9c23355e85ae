use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rtvlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtvlab"))
        .args(args)
        .env_remove("RTVLAB_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_rows(dir: &Path) -> usize {
    ["train", "val", "test"]
        .iter()
        .map(|s| fs::read_to_string(dir.join(format!("{s}.csv"))).unwrap().lines().count() - 1)
        .sum()
}

fn small_dataset(dir: &Path) {
    let o = rtvlab(&[
        "gen", "--paper-d5", "--n-train", "3000", "--n-val", "1000", "--n-test", "1000", "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn help_lists_flags_and_exit_codes() {
    let subcommands = ["gen", "tree", "train", "sweep", "frontier", "barrier", "rtv", "slice"];
    let top = rtvlab(&["--help"]);
    assert_eq!(top.status.code(), Some(0));
    for s in subcommands {
        assert!(stdout(&top).contains(s), "{s} missing from top-level help");
        let o = rtvlab(&[s, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{s}");
        let text = stdout(&o);
        for flag in ["--config", "--out", "--seed", "--jobs", "--verbose", "Exit codes", "RTVLAB_SEED"] {
            assert!(text.contains(flag), "{s} --help lacks {flag}");
        }
    }
    let sweep = stdout(&rtvlab(&["sweep", "--help"]));
    for flag in ["--widths", "--seeds", "--epochs", "--learning-rate", "--threshold-grid", "--data"] {
        assert!(sweep.contains(flag), "{flag}");
    }
}

#[test]
fn gen_paper_dataset_into_missing_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs/d5");
    let o = rtvlab(&["gen", "--paper-d5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(data_rows(&out), 140_000);
    assert!(stdout(&o).contains("positive rate"));
    assert!(out.join("metadata.json").exists());
    assert!(out.join("gen_config.json").exists());
}

#[test]
fn gen_rejects_zero_dimension() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rtvlab(&["gen", "--d", "0", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`d`"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_an_io_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rtvlab(&["gen", "--paper-d5", "--config", "/nonexistent/rtvlab.json", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unknown_config_key_is_a_schema_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"paper_d5": true, "n_trian": 10}"#).unwrap();
    let o = rtvlab(&["gen", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("d").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n_trian"));
}

#[test]
fn seed_precedence_flag_config_env() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &str, extra: &[&str], env: Option<&str>| {
        let out = tmp.path().join(dir);
        let mut c = Command::new(env!("CARGO_BIN_EXE_rtvlab"));
        c.args(["gen", "--d", "2", "--n-train", "50", "--n-val", "10", "--n-test", "10", "--out"])
            .arg(&out)
            .args(extra)
            .env_remove("RTVLAB_SEED");
        if let Some(s) = env {
            c.env("RTVLAB_SEED", s);
        }
        assert!(c.output().unwrap().status.success());
        fs::read_to_string(out.join("train.csv")).unwrap()
    };
    let cfg = tmp.path().join("seed.json");
    fs::write(&cfg, r#"{"seed": 7}"#).unwrap();
    let flag = run("flag", &["--seed", "7"], None);
    assert_eq!(run("env", &[], Some("7")), flag);
    assert_eq!(run("cfg", &["--config", cfg.to_str().unwrap()], Some("9")), flag);
    assert_eq!(run("both", &["--config", cfg.to_str().unwrap(), "--seed", "9"], None), run("nine", &["--seed", "9"], None));
    assert_ne!(run("zero", &[], None), flag);
}

#[test]
fn sweep_is_reproducible_and_feeds_frontier() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d5");
    small_dataset(&data);
    let cfg = tmp.path().join("sweep.json");
    fs::write(&cfg, r#"{"widths": [8, 16, 32], "seeds": [0], "train": {"epochs": 3, "mse_targets": [0.3, 0.5]}}"#)
        .unwrap();
    let sweep = |dir: &str| {
        let out = tmp.path().join(dir);
        let o = rtvlab(&[
            "sweep", "--config", cfg.to_str().unwrap(), "--data", data.to_str().unwrap(), "--widths", "8,16", "--jobs",
            "1", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("spearman"));
        out
    };
    let a = sweep("run_a");
    let b = sweep("run_b");
    let report = fs::read_to_string(a.join("report.csv")).unwrap();
    let widths: Vec<&str> = report.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(widths, ["8", "16"]);
    assert_eq!(fs::read(a.join("report.csv")).unwrap(), fs::read(b.join("report.csv")).unwrap());
    let echoed: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("sweep_config.json")).unwrap()).unwrap();
    assert_eq!(echoed["widths"], serde_json::json!([8, 16]));
    assert_eq!(echoed["train"]["epochs"], 3);

    let fr = tmp.path().join("frontier");
    let o = rtvlab(&["frontier", "--run", a.to_str().unwrap(), "--out", fr.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(fr.join("frontier.csv")).unwrap();
    assert!(csv.starts_with("width,target_mse"), "{csv}");
}

#[test]
fn training_divergence_names_the_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d5");
    small_dataset(&data);
    let o = rtvlab(&[
        "sweep", "--data", data.to_str().unwrap(), "--widths", "8", "--seeds", "4", "--epochs", "2", "--learning-rate",
        "1e30", "--out", tmp.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("width 8, seed 4"), "{}", stderr(&o));
}

#[test]
fn train_tree_and_slice() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d5");
    small_dataset(&data);
    let m = tmp.path().join("model");
    let o = rtvlab(&["train", "--data", data.to_str().unwrap(), "--width", "8", "--epochs", "2", "--out", m.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["model.json", "trace.csv", "summary.json", "train_config.json"] {
        assert!(m.join(f).exists(), "{f}");
    }
    let t = tmp.path().join("tree");
    let o = rtvlab(&["tree", "--data", data.to_str().unwrap(), "--out", t.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(t.join("boxes.json").exists());

    for (src, path) in [("--model", m.join("model.json")), ("--tree", t.join("tree.json"))] {
        let s = tmp.path().join(format!("slice{src}"));
        let o = rtvlab(&["slice", src, path.to_str().unwrap(), "--side", "20", "--out", s.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(fs::read_to_string(s.join("slice.csv")).unwrap().lines().count(), 401);
    }
}

#[test]
fn barrier_ladder_writes_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rtvlab(&["barrier", "--lambda-count", "5", "--samples", "20000", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("calibration slope"));
    assert_eq!(fs::read_to_string(tmp.path().join("barrier.csv")).unwrap().lines().count(), 6);
}

#[test]
fn rtv_studies() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();

    let o = rtvlab(&["rtv", "--study", "step_divergence", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let header: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("step_divergence.json")).unwrap()).unwrap();
    let slope = header["slope"].as_f64().unwrap();
    assert!((slope + 1.0).abs() < 0.05, "{slope}");

    let o = rtvlab(&["rtv", "--study", "sigmoid_shells", "--splits", "1", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("finite case"), "{}", stderr(&o));

    let o = rtvlab(&["rtv", "--study", "sigmoid_shells", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("masses nondecreasing: true"));

    let o = rtvlab(&["rtv", "--study", "gaussian_bound_check", "--d", "1", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("numeric ≤ bound: true"), "{}", stdout(&o));

    let o = rtvlab(&["rtv", "--study", "barrier_rtv_1d", "--lambdas", "2,4,8", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("barrier_rtv_1d.csv").exists());
}

#[test]
fn unresolvable_curvature_exits_with_numerics_code() {
    // Jumps 1000 apart leave the finest grid far coarser than the mollifier.
    let tmp = tempfile::tempdir().unwrap();
    let o = rtvlab(&[
        "rtv", "--study", "step_divergence", "--jumps", "0,1000", "--scales", "1e-3,5e-4,2.5e-4,1.25e-4", "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}
