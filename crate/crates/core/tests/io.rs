use std::fs;
use std::path::Path;
use std::process::Command;

use frontier_core::evolution::{self, Trajectory};
use frontier_core::io::{self, Extras, RunConfig};
use frontier_core::sweep::{self, RunOptions};

const SHORT: &str = "
seed = 3

[kernel1]
family = \"POWERLAW\"
gamma = 1.5

[kernel2]
family = \"COMPACT\"
R = 2.0

[run]
t_end = 4.0
output_times = [0.0, 1.0, 2.5, 4.0, 9.0]
";

fn frontier(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_frontier"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = io::parse_config(write_config(dir.path(), SHORT)).unwrap();
    assert_eq!(cfg.seed, 3);
    assert_eq!(cfg.kernel2.radius, Some(2.0));
    let again = RunConfig::from_toml_str(&cfg.echo()).unwrap();
    assert_eq!(again.echo(), cfg.echo());
    assert!(io::parse_config(dir.path().join("missing.toml")).is_err());
}

#[test]
fn empty_trajectory_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let traj = Trajectory {
        h_series: vec![],
        snapshots: vec![],
        dt: 0.05,
        steps: 0,
        termination: "completed".into(),
    };
    let m = io::write_outputs(&traj, &RunConfig::default(), dir.path(), 0.0, Extras::default()).unwrap();
    assert_eq!(fs::read_to_string(dir.path().join(io::H_SERIES)).unwrap(), "t,h\n");
    assert!(io::read_h_series(dir.path().join(io::H_SERIES)).unwrap().is_empty());
    assert_eq!(io::read_manifest(dir.path()).unwrap(), m);
}

#[test]
fn series_and_snapshots_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_toml_str(SHORT).unwrap();
    let traj = evolution::run(&cfg.to_params().unwrap(), cfg.run.t_end, &cfg.output_times(), None).unwrap();
    io::write_outputs(&traj, &cfg, dir.path(), 0.0, Extras::default()).unwrap();
    assert_eq!(io::read_h_series(dir.path().join(io::H_SERIES)).unwrap(), traj.h_series);
    let snaps = io::read_snapshots(dir.path().join(io::SNAPSHOTS)).unwrap();
    assert_eq!(snaps, traj.snapshots);
    // 9.0 lies past the horizon
    let lines = fs::read_to_string(dir.path().join(io::SNAPSHOTS))
        .unwrap()
        .lines()
        .count();
    assert_eq!(lines, 4);
}

#[test]
fn manifest_lists_only_existing_nonempty_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_toml_str(SHORT).unwrap();
    let m = sweep::execute_run(
        &cfg,
        dir.path(),
        RunOptions {
            fit: false,
            steady: true,
        },
    )
    .unwrap();
    assert!(m.files.contains(&io::STEADY_PROFILE.to_string()));
    for f in &m.files {
        assert!(fs::metadata(dir.path().join(f)).unwrap().len() > 0, "{f}");
    }
    assert_eq!(m.config, cfg.echo());
    assert!(m.finished >= m.started);
    assert!(!dir.path().join(".manifest.json.tmp").exists());
}

#[test]
fn identical_configs_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_toml_str(SHORT).unwrap();
    sweep::execute_run(&cfg, a.path(), RunOptions::default()).unwrap();
    sweep::execute_run(&cfg, b.path(), RunOptions::default()).unwrap();
    for f in [io::H_SERIES, io::SNAPSHOTS] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn cli_run_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[run]\nt_end = 60.0\n[grid]\ndx = 0.5\n");
    let out = dir.path().join("run");
    let o = frontier(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join(io::FIT_REPORT).exists());
    let o = frontier(&["fit", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join(io::FIT_REPORT)).unwrap()).unwrap();
    assert!(report["candidates"].as_array().unwrap().len() >= 2);
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();
    let bad = write_config(dir.path(), "[kernel1]\nfamily = \"ALGLOG\"\ngamma = 2.5\n");
    let o = frontier(&["run", "--config", &bad, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(
        stderr.contains("kernel1.gamma") && stderr.contains("(1, 2)"),
        "{stderr}"
    );

    let slow = write_config(dir.path(), "[run]\nt_end = 1e7\nmax_seconds = 0.2\n");
    assert_eq!(
        frontier(&["run", "--config", &slow, "--out", out]).status.code(),
        Some(3)
    );

    let missing = dir.path().join("nope.toml");
    assert_eq!(
        frontier(&["run", "--config", missing.to_str().unwrap(), "--out", out])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn cli_sweep_writes_one_directory_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[run]\nt_end = 2.0\n");
    let out = dir.path().join("sweep");
    let o = Command::new(env!("CARGO_BIN_EXE_frontier"))
        .env(sweep::THREADS_ENV, "2")
        .args(["sweep", "--config", &cfg, "--out", out.to_str().unwrap()])
        .args(["--set", "model.mu1=0.5,1.0", "--set", "kernel1.family=COMPACT,POWERLAW"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for k in 0..4 {
        assert!(out.join(format!("run_{k:04}")).join(io::MANIFEST).exists());
    }
    assert!(out.join("sweep.json").exists());
}
