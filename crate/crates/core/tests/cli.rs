use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn calogero(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calogero"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn verify_defaults_pass() {
    let tmp = TempDir::new().unwrap();
    let out = calogero(&["verify", "--out", &path(tmp.path(), "v")]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS"));
    assert!(tmp.path().join("v/verify_report.json").exists());
}

#[test]
fn tampered_verify_exits_one() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "t.toml", "tamper_quartic = 0.5\n");
    let out = calogero(&["verify", "--config", &cfg, "--out", &path(tmp.path(), "o")]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn config_errors_exit_three() {
    let tmp = TempDir::new().unwrap();
    for (name, text) in [
        ("typo.toml", "n_partcles = 3\n"),
        ("value.toml", "rtol = 0.0\n"),
        ("syntax.toml", "g = [\n"),
    ] {
        let cfg = write(tmp.path(), name, text);
        let out = calogero(&["init", "--config", &cfg, "--out", &path(tmp.path(), "o")]);
        assert_eq!(code(&out), 3, "{name}");
    }
    let missing = path(tmp.path(), "missing.toml");
    assert_eq!(code(&calogero(&["verify", "--config", &missing])), 3);
    assert_eq!(code(&calogero(&["preset", "fig9"])), 3);
    assert_eq!(code(&calogero(&["frobnicate"])), 3);
}

#[test]
fn missing_well_exits_two_and_names_condition() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "flat.toml", "c1 = 0.0\nc2 = 0.0\n");
    let out = calogero(&["init", "--config", &cfg, "--out", &path(tmp.path(), "o")]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("c1^2 > 4 c0 c2"));
}

#[test]
fn static_background_and_byte_identical_reruns() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "rest.toml",
        "solitons = []\nn_particles = 9\nc2 = 0.0\nt_end = 0.5\noutput_every = 0.1\n",
    );
    for run in ["a", "b"] {
        let out = calogero(&["evolve", "--config", &cfg, "--out", &path(tmp.path(), run)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(tmp.path().join("a/trajectory.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/trajectory.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        fs::read(tmp.path().join("a/summary.json")).unwrap(),
        fs::read(tmp.path().join("b/summary.json")).unwrap()
    );

    let text = String::from_utf8(a).unwrap();
    assert!(text.ends_with('\n'));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 10);
    assert_eq!(header[0], "t");
    assert_eq!(header[9], "x_9");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    for row in &rows {
        for (v, v0) in row[1..].iter().zip(&rows[0][1..]) {
            assert!((v - v0).abs() < 1e-10);
        }
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a/summary.json")).unwrap()).unwrap();
    assert!(summary["energy_drift"].as_f64().unwrap() < 1e-8);
    assert!(summary["zdot_initial"].as_array().unwrap().is_empty());
}

#[test]
fn init_and_hydro_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "s.toml",
        "n_particles = 40\nc2 = 0.0\nsolitons = [[0.0, 1.0]]\ngrid_size = 256\ninit_scheme = \"linearly-implicit\"\n",
    );
    let out = calogero(&["init", "--config", &cfg, "--out", &path(tmp.path(), "i")]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("i/init_report.json")).unwrap()).unwrap();
    assert_eq!(report["x"].as_array().unwrap().len(), 40);
    // a soliton above the origin slows every particle: p = -g b / ((x-a)^2 + b^2)
    assert!(report["p"].as_array().unwrap().iter().all(|p| p.as_f64().unwrap() < 0.0));

    let out = calogero(&["hydro", "--config", &cfg, "--out", &path(tmp.path(), "h")]);
    assert_eq!(code(&out), 0);
    let fields = fs::read_to_string(tmp.path().join("h/fields.csv")).unwrap();
    let mut lines = fields.lines();
    assert_eq!(lines.next().unwrap(), "x,rho,v,rho_h,re_u_plus,im_u_plus");
    assert_eq!(lines.count(), 256);
}

#[test]
fn jobs_fan_out_matches_single_runs() {
    let tmp = TempDir::new().unwrap();
    let a = write(tmp.path(), "a.toml", "solitons = []\nn_particles = 5\nt_end = 0.1\n");
    let b = write(tmp.path(), "b.toml", "n_particles = 6\nsolitons = [[0.2, 0.5]]\nt_end = 0.05\n");
    let out = calogero(&[
        "evolve", "--config", &a, "--config", &b, "--jobs", "2", "--out", &path(tmp.path(), "many"),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let single = calogero(&["evolve", "--config", &b, "--out", &path(tmp.path(), "one")]);
    assert_eq!(code(&single), 0);
    assert_eq!(
        fs::read(tmp.path().join("many/02_b/trajectory.csv")).unwrap(),
        fs::read(tmp.path().join("one/trajectory.csv")).unwrap()
    );
    assert!(tmp.path().join("many/01_a/trajectory.csv").exists());
}

#[test]
fn one_soliton_preset_reports_reference_velocity() {
    let tmp = TempDir::new().unwrap();
    let out = calogero(&["preset", "fig1-one-soliton", "--out", &path(tmp.path(), "p")]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("p/summary.json")).unwrap()).unwrap();
    let zd = &summary["zdot_initial"][0];
    assert!((zd[0].as_f64().unwrap() + 43.0768).abs() < 0.01 * 43.0768);
    assert!((zd[1].as_f64().unwrap() + 0.00103378).abs() < 0.01 * 0.00103378);
    assert_eq!(summary["check"]["passed"], true);
    for file in ["init_report.json", "trajectory.csv", "fields.csv"] {
        assert!(tmp.path().join("p").join(file).exists(), "{file}");
    }
}
