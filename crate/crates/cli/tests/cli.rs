use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use tase_core::Table1;

fn tase() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tase"))
}

fn run(args: &[&str]) -> Output {
    tase().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn field<'a>(line: &'a str, key: &str) -> &'a str {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {line:?}"))
}

#[test]
fn locate_ep_reference() {
    let o = run(&["locate-ep"]);
    assert!(o.status.success());
    let line = stdout(&o);
    assert!(line.starts_with("omega_ep=1.0 eps0_ep=0.2 residual="), "{line}");
    let residual: f64 = field(line.trim(), "residual").parse().unwrap();
    assert!(residual < 1e-12);
}

#[test]
fn locate_ep_without_finite_ep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"system": {"d12_re": 0.0, "d12_im": 1.0}}"#);
    let o = run(&["--config", cfg.to_str().unwrap(), "locate-ep"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("NoFiniteEP"));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    for (json, key) in [
        (r#"{"loop": {"radius": 0.1}}"#, "radius"),
        (r#"{"system": {"gamma1": "x"}}"#, "system.gamma1"),
        (r#"{"system": {"gamma2": -0.3}}"#, "gamma2"),
        (r#"{"loop": {"semi_axis_eps": 0.3}}"#, "semi_axis_eps"),
        (r#"{"integrator": {"max_step": 0}}"#, "max_step"),
        (r#"{"loop": {"direction": "up"}}"#, "loop.direction"),
    ] {
        let cfg = write_config(dir.path(), "c.json", json);
        let o = run(&["--config", cfg.to_str().unwrap(), "locate-ep"]);
        assert_eq!(o.status.code(), Some(1), "{json}");
        assert!(stderr(&o).contains(key), "{json}: {}", stderr(&o));
    }
    let cfg = write_config(dir.path(), "c.json", "{\"system\": ");
    assert_eq!(
        run(&["--config", cfg.to_str().unwrap(), "winding"]).status.code(),
        Some(1)
    );
}

#[test]
fn simulate_writes_trajectory_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = run(&["simulate", "--direction", "cw", "--output", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,re_c1,im_c1,re_c2,im_c2,norm_sq,log_scale,W1,W2");
    assert!(lines.len() > 512);
    let summary = stdout(&o);
    assert_eq!(field(&summary, "direction"), "cw");
    assert!(["state1", "state2"].contains(&field(&summary, "dominant")));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"loop": {"duration_T": 60}}"#);
    for format in ["csv", "json"] {
        let a = dir.path().join(format!("a.{format}"));
        let b = dir.path().join(format!("b.{format}"));
        for p in [&a, &b] {
            let o = run(&[
                "--config",
                cfg.to_str().unwrap(),
                "--format",
                format,
                "--output",
                p.to_str().unwrap(),
                "simulate",
                "--method",
                "adiabatic",
            ]);
            assert!(o.status.success(), "{}", stderr(&o));
        }
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}

#[test]
fn adiabatic_on_ep_touching_contour() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"loop": {"center_omega": 0.95, "center_eps0": 0.2, "start_phase": 0.0, "duration_T": 10}}"#,
    );
    let o = run(&["--config", cfg.to_str().unwrap(), "simulate", "--method", "adiabatic"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("EPOnContour"));
}

#[test]
fn table1_pattern_and_json_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let o = run(&["--format", "json", "--output", out.to_str().unwrap(), "table1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t: Table1 = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(t.render(), stdout(&o));
    let exact: Vec<_> = t.rows.iter().map(|r| (r.direction, r.exact_final)).collect();
    assert_eq!(exact[0].1, exact[1].1);
    assert_eq!(exact[2].1, exact[3].1);
    assert_ne!(exact[0].1, exact[2].1);
    assert_eq!(t.disagreements(), 2);
}

#[test]
fn table1_requires_encircling_loop() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"loop": {"center_eps0": 0.5, "duration_T": 10}}"#,
    );
    let o = run(&["--config", cfg.to_str().unwrap(), "table1"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn one_cell_sweep_matches_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"loop": {"duration_T": 300}, "initial": {"c1_re": 0.6, "c2_im": 0.8}}"#,
    );
    let c = cfg.to_str().unwrap();
    let sim = run(&[
        "--config",
        c,
        "--output",
        dir.path().join("t.csv").to_str().unwrap(),
        "simulate",
    ]);
    assert!(sim.status.success());
    let summary = stdout(&sim);
    let sw = run(&[
        "--config",
        c,
        "sweep",
        "--durations",
        "300",
        "--amp-scales",
        "1",
        "--initial",
        "config",
    ]);
    assert!(sw.status.success(), "{}", stderr(&sw));
    let text = stdout(&sw);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[5], field(&summary, "ratio"));
    assert_eq!(row[6], field(&summary, "dominant"));
    assert_eq!(row[7], field(&summary, "survival"));
}

#[test]
fn sweep_with_every_cell_failing() {
    let o = run(&["sweep", "--durations", "10,20", "--amp-scales", "8,9"]);
    assert_eq!(o.status.code(), Some(5));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().skip(1).all(|l| l.contains("error:InvalidParameter")));
}

#[test]
fn sweep_json_and_winding() {
    let o = run(&[
        "--format",
        "json",
        "--jobs",
        "2",
        "sweep",
        "--durations",
        "20,40",
        "--amp-scales",
        "0.5,1.5",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cells"].as_array().unwrap().len(), 4);

    let o = run(&["winding"]);
    assert_eq!(field(&stdout(&o), "winding"), "-1");
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"loop": {"center_eps0": 0.5, "direction": "cw"}}"#,
    );
    let o = run(&["--config", cfg.to_str().unwrap(), "winding"]);
    assert_eq!(field(&stdout(&o), "winding"), "0");
    let cfg = write_config(
        dir.path(),
        "d.json",
        r#"{"loop": {"center_omega": 0.95, "start_phase": 0.0}}"#,
    );
    assert_eq!(
        run(&["--config", cfg.to_str().unwrap(), "winding"]).status.code(),
        Some(3)
    );
}

#[test]
fn interrupted_sweep_leaves_valid_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let mut child = tase()
        .args([
            "--output",
            out.to_str().unwrap(),
            "--jobs",
            "1",
            "sweep",
            "--durations",
            "5,10,15,20,25,30,35,40,2000,2000,2000,2000",
        ])
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let start = Instant::now();
    loop {
        let lines = std::fs::read_to_string(&out).map(|t| t.lines().count()).unwrap_or(0);
        if lines >= 9 || start.elapsed() > Duration::from_secs(120) {
            break;
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    child.kill().ok();
    let mut err = String::new();
    child.stderr.take().unwrap().read_to_string(&mut err).unwrap();
    child.wait().unwrap();
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.ends_with('\n'));
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.len() >= 9, "{err}");
    assert_eq!(lines.len() % 8, 1, "whole rows only");
    assert!(lines.iter().all(|l| l.split(',').count() == 10));
    assert!(err.contains("row 1/12"));
}
