use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SINGLE_SITE: &str = r#"{
  "model": {"delta": 0.0, "u": 10.0, "g2": 4.0, "j_hop": 0.0, "gamma1": 1.0, "gamma2": 1.0, "cutoff": 8},
  "lattice": {"kind": "chain1d", "extent": 1},
  "integration": {"dt": 0.002, "t_final": 2.0, "sample_interval": 0.1},
  "ensemble": {"n_traj": 40, "master_seed": 7, "keep_traces": 2}
}"#;

const SMALL_LATTICE: &str = r#"{
  "model": {"delta": 1.0, "u": 10.0, "g2": 4.0, "j_hop": 1.0, "gamma1": 1.0, "gamma2": 1.0, "cutoff": 6},
  "lattice": {"kind": "square2d", "extent": 3},
  "integration": {"dt": 0.002, "t_final": 1.0, "sample_interval": 0.1},
  "ensemble": {"n_traj": 12, "master_seed": 3},
  "sweep": {"axis": "j_hop", "values": [0.3, 1.0]}
}"#;

fn dg(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dg"));
    cmd.args(args).env_remove("DG_WORKERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("dg runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn run_writes_outputs_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SINGLE_SITE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));

    let out = dg(&["run", s(&cfg), "--out", s(&a), "--workers", "1"], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = dg(&["run", s(&cfg), "--out", s(&b)], &[("DG_WORKERS", "3")]);
    assert!(out.status.success(), "{}", stderr(&out));

    for f in ["timeseries.csv", "corrmap.csv", "summary.json", "config.json", "accumulator.json", "traces.csv"] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    for f in ["timeseries.csv", "corrmap.csv", "traces.csv", "config.json", "accumulator.json"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f} differs");
    }

    let summary: Value = serde_json::from_str(&read(&a.join("summary.json"))).unwrap();
    assert_eq!(summary["n_traj"], 40);
    assert_eq!(summary["master_seed"], 7);
    assert_eq!(summary["workers"], 1);
    let density = summary["steady_state"]["density"].as_f64().unwrap();
    assert!(density > 0.1 && density < 0.5, "{density}");
    let hash = summary["config_sha256"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);

    let ts = read(&a.join("timeseries.csv"));
    let lines: Vec<&str> = ts.lines().collect();
    assert_eq!(lines[0], "# dg timeseries");
    assert_eq!(lines[1], format!("# config_sha256: {hash}"));
    assert_eq!(lines[2], "# master_seed: 7");
    assert!(lines[3].starts_with("t,density,density_stderr,"));
    assert_eq!(lines.len(), 4 + 21);
    assert!(!ts.contains('\r'));
}

#[test]
fn emitted_config_reloads_to_itself() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SINGLE_SITE);
    let first = tmp.path().join("first");
    assert!(dg(&["run", s(&cfg), "--out", s(&first)], &[]).status.success());
    let second = tmp.path().join("second");
    let out = dg(&["run", s(&first.join("config.json")), "--out", s(&second)], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(read(&first.join("config.json")), read(&second.join("config.json")));
    assert_eq!(read(&first.join("timeseries.csv")), read(&second.join("timeseries.csv")));
}

#[test]
fn config_errors_exit_2_with_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = SINGLE_SITE.replace("\"gamma2\": 1.0", "\"gamma2\": -1.0").replace("\"n_traj\": 40", "\"n_traj\": 0");
    let cfg = write_config(tmp.path(), "bad.json", &bad);
    let out = dg(&["run", s(&cfg), "--out", s(&tmp.path().join("o"))], &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("bad.json:2: model: gamma2"), "{err}");
    assert!(err.contains("bad.json:5: ensemble: n_traj"), "{err}");

    let cfg = write_config(tmp.path(), "syntax.json", &SINGLE_SITE.replace("\"cutoff\": 8}", "\"cutoff\": 8,}"));
    let out = dg(&["run", s(&cfg)], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("syntax.json:2:"), "{}", stderr(&out));

    let cfg = write_config(tmp.path(), "ok.json", SINGLE_SITE);
    let out = dg(&["run", s(&cfg)], &[("DG_WORKERS", "zero")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3_with_replay_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SINGLE_SITE.replace("\"u\": 10.0", "\"u\": 1e308").replace("\"g2\": 4.0", "\"g2\": 1e308");
    let cfg = write_config(tmp.path(), "c.json", &text);
    let out = dg(&["run", s(&cfg), "--out", s(&tmp.path().join("o"))], &[]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("replay seed: "), "{}", stderr(&out));
}

#[test]
fn sweep_points_equal_individual_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_LATTICE);
    let dir = tmp.path().join("sweep");
    let out = dg(&["sweep", s(&cfg), "--out", s(&dir)], &[]);
    assert!(out.status.success(), "{}", stderr(&out));

    let table = read(&dir.join("sweep.csv"));
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[0].starts_with("point,j_hop,j_hop,delta,master_seed,density_ss"));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().skip(1).all(|r| r.ends_with(",ok")));

    let p1 = dir.join("point_001");
    let point_cfg: Value = serde_json::from_str(&read(&p1.join("config.json"))).unwrap();
    assert_eq!(point_cfg["model"]["j_hop"], 1.0);
    assert_eq!(point_cfg["model"]["delta"], 1.0);
    assert!(point_cfg.get("sweep").is_none());

    let alone = tmp.path().join("alone");
    let out = dg(&["run", s(&p1.join("config.json")), "--out", s(&alone)], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["timeseries.csv", "corrmap.csv"] {
        assert_eq!(read(&p1.join(f)), read(&alone.join(f)), "{f}");
    }
}

#[test]
fn single_value_sweep_matches_run_and_failures_continue() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_LATTICE);
    let dir = tmp.path().join("sweep");
    let out = dg(&["sweep", s(&cfg), "--axis", "gamma1", "--values", "-1,1", "--out", s(&dir)], &[]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let table = read(&dir.join("sweep.csv"));
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[1].contains("failed"), "{table}");
    assert!(rows[2].ends_with(",ok"), "{table}");

    let out = dg(&["sweep", s(&cfg), "--axis", "j_hop", "--values", "0.5", "--independent-delta", "--out", s(&dir)], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("warning"));
    let point: Value = serde_json::from_str(&read(&dir.join("point_000/config.json"))).unwrap();
    assert_eq!(point["model"]["delta"], 1.0);
    assert_eq!(point["model"]["j_hop"], 0.5);

    let out = dg(&["sweep", s(&cfg), "--axis", "cutoff", "--values", "5"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_reproduces_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &SMALL_LATTICE.replace("\"n_traj\": 12", "\"n_traj\": 24"));
    let dir = tmp.path().join("run");
    assert!(dg(&["run", s(&cfg), "--out", s(&dir)], &[]).status.success());
    let before: Value = serde_json::from_str(&read(&dir.join("summary.json"))).unwrap();
    let ts = read(&dir.join("timeseries.csv"));

    let out = dg(&["analyze", s(&dir)], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let after: Value = serde_json::from_str(&read(&dir.join("summary.json"))).unwrap();
    assert_eq!(before, after);
    assert_eq!(ts, read(&dir.join("timeseries.csv")));

    let out = dg(&["analyze", s(&dir), "--noise-floor", "1e9"], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed["correlation"]["noise_floor"], 1e9);
    assert!(printed["correlation"]["exponential"]["error"].as_str().unwrap().contains("insufficient"));
    assert_ne!(printed["config_sha256"], before["config_sha256"]);
}

#[test]
fn oracle_command() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SINGLE_SITE);
    let dir = tmp.path().join("oracle");
    let out = dg(&["oracle", s(&cfg), "--out", s(&dir), "--dt-rk", "0.001"], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary: Value = serde_json::from_str(&read(&dir.join("oracle_summary.json"))).unwrap();
    assert!(summary["max_trace_error"].as_f64().unwrap() < 1e-8);
    let rows = read(&dir.join("oracle.csv"));
    assert!(rows.lines().nth(3).unwrap().starts_with("t,density,n_0,a_re_0,a_im_0"));

    let cfg = write_config(tmp.path(), "big.json", SMALL_LATTICE);
    let out = dg(&["oracle", s(&cfg), "--out", s(&dir)], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_reports_one_line_per_invariant() {
    let out = dg(&["check", "--fast"], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    for l in &lines {
        let cols: Vec<&str> = l.split('\t').collect();
        assert_eq!(cols.len(), 3, "{l}");
        assert_eq!(cols[1], "PASS", "{l}");
    }

    let out = dg(&["check", "--fast", "--dt", "0.25"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.lines().any(|l| l.starts_with("dt_convergence\tFAIL")), "{text}");
    assert!(stderr(&out).contains("dt_convergence"));
}
