use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use semidi_core::boundary::ConvexRegion2D;

fn semidi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semidi"))
        .args(args)
        .current_dir(dir)
        .env_remove("SEMIDI_TOL")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

const USD_09: &str = r#"{"p": [[0.1, 0.0, 0.9], [0.0, 0.1, 0.9]], "delta": 0.9}"#;
const UNIFORM: &str = r#"{"p": [[0.3333333333333333, 0.3333333333333333, 0.3333333333333334],
      [0.3333333333333333, 0.3333333333333333, 0.3333333333333334]], "delta": 0.5}"#;

#[test]
fn certify_usd_writes_report_and_witness() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "usd.json", USD_09);
    let out = semidi(tmp.path(), &["certify", "--behavior", "usd.json", "--out", "res"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert!(report["eta"].as_f64().unwrap() > 1.0);
    assert_eq!(report["certification"]["verdict"], "GENUINE_3_OUTCOME");
    assert!(tmp.path().join("res/certification.json").is_file());

    let check = semidi(tmp.path(), &["witness", "--behavior", "usd.json", "--check", "res/witness.json"]);
    assert_eq!(code(&check), 0);
    assert_eq!(stdout_json(&check)["verdict"], "VIOLATED");
}

#[test]
fn uniform_behavior_is_not_certified() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "u.json", UNIFORM);
    let out = semidi(tmp.path(), &["certify", "--behavior", "u.json"]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["certification"]["verdict"], "IN_P2");
}

#[test]
fn malformed_inputs_exit_64_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "short.json", r#"{"p": [[0.5, 0.28, 0.2], [0.3, 0.3, 0.4]], "delta": 0.5}"#);
    let out = semidi(tmp.path(), &["certify", "--behavior", "short.json"]);
    assert_eq!(code(&out), 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 0"));

    write(tmp.path(), "extra.json", "{\"p\": [[1, 0, 0], [0, 1, 0]],\n \"delta\": 0.5, \"x\": 1}");
    let out = semidi(tmp.path(), &["certify", "--behavior", "extra.json"]);
    assert_eq!(code(&out), 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = semidi(tmp.path(), &["certify", "--behavior", "missing.json"]);
    assert_eq!(code(&out), 64);
}

#[test]
fn tampered_witness_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "usd.json", USD_09);
    assert_eq!(code(&semidi(tmp.path(), &["witness", "--behavior", "usd.json", "--out", "."])), 0);
    let mut w: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("witness.json")).unwrap()).unwrap();
    w["v"][0] = serde_json::json!(w["v"][0].as_f64().unwrap() + 5.0);
    write(tmp.path(), "bad_witness.json", &w.to_string());
    let out = semidi(tmp.path(), &["witness", "--behavior", "usd.json", "--check", "bad_witness.json"]);
    assert_eq!(code(&out), 64);
}

#[test]
fn boundary_files_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&semidi(tmp.path(), &["boundary", "--delta", "0.7", "--out", "b"])), 0);
    for kind in ["p2", "p3"] {
        let f = fs::File::open(tmp.path().join(format!("b/{kind}_region_delta_0.7.csv"))).unwrap();
        let region = ConvexRegion2D::read_csv(f).unwrap();
        assert!(region.is_convex() && region.vertices().len() > 100);
    }

    assert_eq!(code(&semidi(tmp.path(), &["boundary", "--delta", "0", "--out", "b"])), 0);
    let tri = fs::read_to_string(tmp.path().join("b/p2_region_delta_0.csv")).unwrap();
    assert_eq!(tri.lines().count(), 4, "{tri}");

    assert_eq!(code(&semidi(tmp.path(), &["boundary", "--delta", "1", "--out", "b"])), 0);
    let seg = ConvexRegion2D::read_csv(fs::File::open(tmp.path().join("b/p2_region_delta_1.csv")).unwrap()).unwrap();
    let pts: Vec<(f64, f64)> = seg.vertices().iter().map(|p| (p.x, p.y)).collect();
    assert_eq!(pts, vec![(0.0, 0.0), (0.5, 0.5)]);
}

#[test]
fn unwritable_output_exits_73() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "blocker", "");
    let out = semidi(tmp.path(), &["boundary", "--delta", "0.5", "--out", "blocker/sub"]);
    assert_eq!(code(&out), 73);
}

#[test]
fn unknown_figure_exits_64() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&semidi(tmp.path(), &["reproduce", "fig9"])), 64);
}

#[test]
fn reproduce_fig6_and_fig2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&semidi(tmp.path(), &["reproduce", "fig6", "--out", "o"])), 0);
    let text = fs::read_to_string(tmp.path().join("o/fig6.csv")).unwrap();
    let mut rows = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(rows.next().unwrap(), "parameter,metric,delta,tol,p_succ2");
    for row in rows {
        let v: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        let d = v[0];
        assert!((v[1] - (1.0 - d)).abs() < 1e-12);
        let two = if d == 0.0 { 1.0 } else { (1.0 - d * d) / 2.0 };
        assert!((v[4] - two).abs() < 1e-12);
    }

    assert_eq!(code(&semidi(tmp.path(), &["reproduce", "fig2", "--out", "o"])), 0);
    for d in ["0", "0.7", "0.9", "1"] {
        for kind in ["p2", "p3"] {
            assert!(tmp.path().join(format!("o/{kind}_region_delta_{d}.csv")).is_file());
        }
    }
}

#[test]
fn reproduce_fig5a_respects_floor() {
    let tmp = tempfile::tempdir().unwrap();
    let out = semidi(tmp.path(), &["reproduce", "fig5a", "--grid", "0.2:0.95:0.25", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("o/fig5a.csv")).unwrap();
    assert!(text.contains("# grid") || text.contains("# phi_step"));
    let metrics: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(metrics.len(), 4);
    assert!(metrics.iter().all(|&m| m >= 0.9));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for dir in ["a", "b"] {
        assert_eq!(code(&semidi(tmp.path(), &["sweep", "usd-noise", "--grid", "0.3:0.6:0.1", "--out", dir])), 0);
        assert_eq!(code(&semidi(tmp.path(), &["boundary", "--delta", "0.9", "--out", dir])), 0);
    }
    for name in ["usd_noise.csv", "p2_region_delta_0.9.csv", "p3_region_delta_0.9.csv"] {
        let a = fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "run.toml", "delta = 0.3\ntol = 1e-8\n");
    let out = semidi(tmp.path(), &["usd", "--config", "run.toml"]);
    assert_eq!(code(&out), 0);
    assert!((stdout_json(&out)["bound3"].as_f64().unwrap() - 0.7).abs() < 1e-12);

    let out = semidi(tmp.path(), &["usd", "--config", "run.toml", "--delta", "0.6"]);
    assert!((stdout_json(&out)["bound3"].as_f64().unwrap() - 0.4).abs() < 1e-12);

    write(tmp.path(), "typo.toml", "delta = 0.3\ntolerance = 1e-8\n");
    let out = semidi(tmp.path(), &["usd", "--config", "typo.toml"]);
    assert_eq!(code(&out), 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("tolerance"));
}

#[test]
fn tolerance_environment_variable() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "usd.json", USD_09);
    let run = |env: &str, extra: &[&str]| {
        let mut args = vec!["certify", "--behavior", "usd.json"];
        args.extend_from_slice(extra);
        Command::new(env!("CARGO_BIN_EXE_semidi")).args(&args).current_dir(tmp.path()).env("SEMIDI_TOL", env).output().unwrap()
    };
    assert_eq!(code(&run("not-a-number", &[])), 64);
    // A flag takes precedence over the environment.
    assert_eq!(code(&run("not-a-number", &["--tol", "1e-8"])), 0);
    assert_eq!(code(&run("1e-7", &[])), 0);
}

#[test]
fn simulate_then_certify() {
    let tmp = tempfile::tempdir().unwrap();
    let out = semidi(tmp.path(), &["simulate", "--delta", "0.7", "--phi", "-1.22", "--out", "."]);
    assert_eq!(code(&out), 0);
    let out = semidi(tmp.path(), &["certify", "--behavior", "behavior.json"]);
    assert_eq!(code(&out), 0);
    let w = stdout_json(&out)["certification"]["omega_star"].as_f64().unwrap();
    assert!(w > 0.9 && w < 0.93, "{w}");

    let out = semidi(tmp.path(), &["simulate", "--delta", "0.7", "--format", "csv", "--usd"]);
    assert_eq!(code(&out), 64);
}

#[test]
fn selftest_and_randomness() {
    let tmp = tempfile::tempdir().unwrap();
    let out = semidi(tmp.path(), &["selftest", "--delta", "0.4", "--rotation", "-0.8"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["verdict"], "PASS");

    write(tmp.path(), "usd.json", USD_09);
    let out = semidi(tmp.path(), &["randomness", "--behavior", "usd.json"]);
    assert_eq!(code(&out), 0);
    let h = stdout_json(&out)["h_min"].as_f64().unwrap();
    assert!((h - 0.152).abs() < 1e-3);

    let out = semidi(tmp.path(), &["randomness", "--delta", "0.7", "--family", "rob", "--grid", "0:0.4:0.2", "--out", "r"]);
    assert_eq!(code(&out), 0);
    assert!(tmp.path().join("r/hmin_rob_delta_0.7.csv").is_file());
}
