use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_radioslam"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    if !out.status.success() {
        eprintln!(
            "stdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
    }
    out
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed with {:?}", out.status);
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two-robot dataset plus a trained model, shared by the tests.
struct Fixture {
    _dir: tempfile::TempDir,
    data: PathBuf,
    model: PathBuf,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        let model = dir.path().join("model.json");
        ok(&["simulate", "--seed", "5", "--route-length", "500", "--out", s(&data)]);
        ok(&["train-model", "--data", s(&data), "--out", s(&model)]);
        Fixture { _dir: dir, data, model }
    })
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for (dir, seed) in [(&a, "9"), (&b, "9"), (&c, "10")] {
        ok(&["simulate", "--seed", seed, "--route-length", "200", "--out", s(dir)]);
    }
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
    assert_ne!(dir_bytes(&a), dir_bytes(&c));
}

#[test]
fn simulate_single_robot() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(&[
        "simulate",
        "--n-robots",
        "1",
        "--route-length",
        "200",
        "--out",
        s(tmp.path()),
    ]);
    assert!(out.contains("wrote 1 robots"), "{out}");
    assert!(tmp.path().join("robot_0_gt.csv").exists());
    assert!(!tmp.path().join("robot_1_gt.csv").exists());
}

#[test]
fn ingest_writes_fingerprints() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fp.jsonl");
    ok(&["ingest", "--scans", s(&f.data.join("scans.jsonl")), "--out", s(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert!(first.get("entries").is_some(), "{first}");
}

#[test]
fn train_model_reports_samples_and_bins() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(&[
        "train-model",
        "--data",
        s(&f.data),
        "--out",
        s(&tmp.path().join("m.json")),
    ]);
    assert!(out.starts_with("W = "), "{out}");
    let model = read_json(&f.model);
    let bins = model["bins"].as_array().unwrap();
    assert!(!bins.is_empty());
    let total: u64 = bins.iter().map(|b| b["n"].as_u64().unwrap()).sum();
    assert!(out.contains(&format!("W = {total} ")), "{out}");
}

#[test]
fn train_model_rejects_zero_path_limit() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "train-model",
        "--data",
        s(&f.data),
        "--out",
        s(&tmp.path().join("m.json")),
        "--max-path-m",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_path_m"));
}

#[test]
fn slam_without_closures_keeps_odometry() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    ok(&[
        "slam",
        "--data",
        s(&f.data),
        "--model",
        s(&f.model),
        "--out",
        s(tmp.path()),
        "--nu-s",
        "0",
        "--nu-p",
        "0",
    ]);
    let rep = read_json(&tmp.path().join("report.json"));
    assert_eq!(rep["constraints"]["intra_robot"], 0);
    assert_eq!(rep["constraints"]["inter_robot"], 0);
    // odometry edges match the dead-reckoned initial guess up to rounding
    assert!(rep["chi2_initial"].as_f64().unwrap() < 1e-12, "{rep}");
    assert!(rep["chi2_final"].as_f64().unwrap() < 1e-12, "{rep}");
}

#[test]
fn slam_uses_all_constraint_families() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    ok(&[
        "slam",
        "--data",
        s(&f.data),
        "--model",
        s(&f.model),
        "--out",
        s(tmp.path()),
        "--nu-s",
        "6",
        "--nu-p",
        "6",
    ]);
    let rep = read_json(&tmp.path().join("report.json"));
    let c = &rep["constraints"];
    for k in ["odometry", "intra_robot", "inter_robot"] {
        assert!(c[k].as_u64().unwrap() > 0, "{k}: {c}");
    }
    assert_eq!(c["prior"], 2);
    assert!(rep["chi2_final"].as_f64().unwrap() <= rep["chi2_initial"].as_f64().unwrap());
    let est = std::fs::read_to_string(tmp.path().join("estimate.csv")).unwrap();
    assert_eq!(est.lines().next(), Some("robot,node,x,y,theta"));
    assert_eq!(est.lines().count() - 1, rep["nodes"].as_u64().unwrap() as usize);

    // evaluate agrees with the report written by slam
    let eval = tmp.path().join("eval.json");
    ok(&[
        "evaluate",
        "--data",
        s(&f.data),
        "--estimate",
        s(&tmp.path().join("estimate.csv")),
        "--out",
        s(&eval),
    ]);
    assert_eq!(read_json(&eval)["accuracy"]["mean_err"], rep["accuracy"]["mean_err"]);
}

#[test]
fn slam_single_robot_has_no_inter_edges() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    ok(&[
        "slam",
        "--data",
        s(&f.data),
        "--model",
        s(&f.model),
        "--out",
        s(tmp.path()),
        "--robots",
        "0",
        "--nu-p",
        "50",
    ]);
    let rep = read_json(&tmp.path().join("report.json"));
    assert_eq!(rep["robots"], serde_json::json!([0]));
    assert_eq!(rep["constraints"]["inter_robot"], 0);
    assert_eq!(rep["constraints"]["prior"], 1);
}

#[test]
fn sweep_writes_grid() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    ok(&[
        "sweep",
        "--data",
        s(&f.data),
        "--out",
        s(tmp.path()),
        "--nu-s",
        "0",
        "--nu-p",
        "0",
    ]);
    let csv = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    // without closures every measure yields the odometry error
    let errs: Vec<&str> = rows.iter().map(|r| r.split(',').nth(3).unwrap()).collect();
    assert!(errs.iter().all(|e| *e == errs[0]), "{csv}");
    for m in ["proposed", "gaussian", "cosine"] {
        assert!(tmp.path().join(format!("heatmap_{m}.svg")).exists());
    }
}

#[test]
fn export_plot_renders_svg() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    let svg = tmp.path().join("plot.svg");
    ok(&["export-plot", "--data", s(&f.data), "--out", s(&svg)]);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
}

#[test]
fn exit_codes() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    // invalid configuration
    let out = run(&["--threads", "0", "simulate", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["simulate", "--n-robots", "0", "--out", s(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    // missing data
    let out = run(&[
        "train-model",
        "--data",
        s(&tmp.path().join("missing")),
        "--out",
        s(&tmp.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&[
        "slam",
        "--data",
        s(&f.data),
        "--model",
        s(&tmp.path().join("none.json")),
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn config_file_with_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let toml_cfg = tmp.path().join("cfg.toml");
    std::fs::write(&toml_cfg, "seed = 3\n[sim]\nn_robots = 1\nroute_length_m = 150.0\n").unwrap();
    let a = tmp.path().join("a");
    ok(&["--config", s(&toml_cfg), "simulate", "--out", s(&a)]);
    let cfg = read_json(&a.join("config.json"));
    assert_eq!(cfg["seed"], 3);
    assert_eq!(cfg["sim"]["n_robots"], 1);

    let b = tmp.path().join("b");
    ok(&[
        "--config",
        s(&toml_cfg),
        "--seed",
        "4",
        "simulate",
        "--n-robots",
        "2",
        "--out",
        s(&b),
    ]);
    let cfg = read_json(&b.join("config.json"));
    assert_eq!(cfg["seed"], 4);
    assert_eq!(cfg["sim"]["n_robots"], 2);
    assert_eq!(cfg["sim"]["route_length_m"].as_f64(), Some(150.0));

    // the written JSON config reproduces the run
    let c = tmp.path().join("c");
    ok(&["--config", s(&b.join("config.json")), "simulate", "--out", s(&c)]);
    let strip = |d: &Path| {
        dir_bytes(d)
            .into_iter()
            .filter(|f| f.0 != "config.json")
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&b), strip(&c));

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[sim]\nn_robots = \"many\"\n").unwrap();
    assert_eq!(
        run(&["--config", s(&bad), "simulate", "--out", s(&tmp.path().join("d"))])
            .status
            .code(),
        Some(2)
    );
}
