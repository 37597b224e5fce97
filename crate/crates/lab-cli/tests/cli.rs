use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nls_lab::ExperimentConfig;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nls-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_GRID: [&str; 4] = [
    "-s",
    "grid.points=[64, 64]",
    "-s",
    "grid.half_lengths=[8.0, 8.0]",
];

#[test]
fn ground_writes_snapshot_certificate_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["ground", "--out", out];
    args.extend(SMALL_GRID);
    let o = lab(&args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in [
        "config.toml",
        "ground.fld",
        "ground.fld.json",
        "ground.json",
    ] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let report = json(&dir.path().join("ground.json"));
    assert_eq!(report["result"]["converged"], true);
    assert!(report["result"]["certificate"]["level"].as_f64().unwrap() > 0.0);
    assert_eq!(
        report["config"]["grid"]["points"],
        serde_json::json!([64, 64])
    );
    // the echoed config reproduces the run
    let echoed = fs::read_to_string(dir.path().join("config.toml")).unwrap();
    let cfg = ExperimentConfig::from_toml_str(&echoed).unwrap();
    assert_eq!(cfg.grid.points, vec![64, 64]);
    assert_eq!(serde_json::to_value(&cfg).unwrap(), report["config"]);
}

#[test]
fn evolve_from_a_written_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let gdir = dir.path().join("g");
    let mut args = vec!["ground", "--out", gdir.to_str().unwrap()];
    args.extend(SMALL_GRID);
    assert_eq!(lab(&args).status.code(), Some(0));

    let edir = dir.path().join("e");
    let snap = format!(
        "initial.path={:?}",
        gdir.join("ground.fld").to_str().unwrap()
    );
    let mut args = vec![
        "evolve",
        "--out",
        edir.to_str().unwrap(),
        "-s",
        "initial.kind=snapshot",
        "-s",
        &snap,
        "-s",
        "evolve.t_end=0.05",
    ];
    args.extend(SMALL_GRID);
    let o = lab(&args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(edir.join("trajectory.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.ends_with(",status,f_second_diff,sixteen_p"));
    assert_eq!(csv.lines().count(), 1 + 6);
    let report = json(&edir.join("evolve.json"));
    assert_eq!(report["result"]["status"], "completed");
    assert!(report["result"]["mass_drift"].as_f64().unwrap() < 1e-12);
    assert!(edir.join("final.fld").is_file());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cases: [&[&str]; 5] = [
        &["instability", "--out", out, "-s", "model.p=3"],
        &["ground", "--out", out, "-s", "model.omgea=1"],
        &["ground", "--out", out, "-s", "grid.points=[64]"],
        &[
            "evolve",
            "--out",
            out,
            "-s",
            "initial.kind=snapshot",
            "-s",
            "initial.path=/nonexistent.fld",
        ],
        &["run", "--config", "/nonexistent/config.toml"],
    ];
    for args in cases {
        let o = lab(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: config error"));
    }
    assert!(!dir.path().join("config.toml").exists());
}

#[test]
fn failed_certificate_exits_with_one() {
    // far below the blow-up time: the run completes and no blow-up is certified
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "instability",
        "--out",
        dir.path().to_str().unwrap(),
        "-s",
        "evolve.t_end=0.01",
        "-s",
        "evolve.sample_every=1e-3",
    ];
    args.extend(SMALL_GRID);
    let o = lab(&args);
    assert_eq!(
        o.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let cert = json(&dir.path().join("certificate.json"));
    assert_eq!(cert["result"]["in_blowup_set"], true);
    assert_eq!(cert["result"]["certificate"]["verdict"], "invalid");
    assert_eq!(cert["result"]["certificate"]["status"], "completed");
}

#[test]
fn omega_sweep_runs_every_point() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep",
        "--out",
        dir.path().to_str().unwrap(),
        "-s",
        "sweep.command=ground",
        "-s",
        "sweep.parameter=omega",
        "-s",
        "sweep.values=[0.5, 1.0, 2.0]",
    ];
    args.extend(SMALL_GRID);
    let o = lab(&args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let summary = json(&dir.path().join("sweep.json"));
    let entries = summary["result"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    let mut levels = Vec::new();
    for (e, w) in entries.iter().zip([0.5, 1.0, 2.0]) {
        assert_eq!(e["value"].as_f64(), Some(w));
        assert_eq!(e["passed"], true);
        let sub = dir.path().join(format!("omega_{w}"));
        let r = json(&sub.join("ground.json"));
        assert_eq!(r["config"]["model"]["omega"].as_f64(), Some(w));
        levels.push(r["result"]["certificate"]["level"].as_f64().unwrap());
    }
    // d(ω) increases with ω
    assert!(levels.windows(2).all(|w| w[1] > w[0]), "{levels:?}");
}

#[test]
fn cli_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "command = \"ground\"\nseed = 3\n[model]\nomega = 1.0\n[grid]\npoints = [64, 64]\nhalf_lengths = [8.0, 8.0]\n").unwrap();
    let out = dir.path().join("o");
    let o = lab(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--omega",
        "2",
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = json(&out.join("ground.json"));
    assert_eq!(r["config"]["model"]["omega"].as_f64(), Some(2.0));
    assert_eq!(r["config"]["seed"].as_u64(), Some(9));
    assert_eq!(r["result"]["certificate"]["omega"].as_f64(), Some(2.0));
}
