//! End-to-end runs of the `maglev` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maglev_core::fieldmodel::{calibration_positions, synthetic_samples, write_samples_csv, CoilSource, FieldModel};
use maglev_core::Vec3;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

fn maglev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maglev")).args(args).output().expect("binary runs")
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// The shipped hover scenario with edits applied, written to `dir`.
fn edited_scenario(dir: &Path, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v = read_json(&shipped("hover.json"));
    edit(&mut v);
    let path = dir.join("scenario.json");
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_hover_writes_log_summary_and_script() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let res = maglev(&["simulate", "--scenario", p(&shipped("hover.json")), "--out", p(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["outcome"]["status"], "completed");
    assert!(summary["rms_position_error"][2].as_f64().unwrap() < 5e-4);
    assert_eq!(summary["ticks"], 10_000);
    let csv = fs::read_to_string(out.join("log.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10_001);
    assert!(csv.starts_with("t,px,py,pz,"));
    assert!(out.join("plot_log.py").exists());
    assert!(stdout(&res).contains("seed 0: completed"));
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let scenario = edited_scenario(dir.path(), |v| v["sim"]["duration"] = 0.5.into());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&maglev(&["simulate", "--quiet", "--scenario", p(&scenario), "--out", p(&a)])), 0);
    assert_eq!(code(&maglev(&["simulate", "--quiet", "--scenario", p(&scenario), "--out", p(&b)])), 0);
    assert_eq!(fs::read(a.join("log.csv")).unwrap(), fs::read(b.join("log.csv")).unwrap());
    assert_eq!(fs::read(a.join("summary.json")).unwrap(), fs::read(b.join("summary.json")).unwrap());
}

#[test]
fn simulate_fans_out_seeds() {
    let dir = TempDir::new().unwrap();
    let scenario = edited_scenario(dir.path(), |v| {
        v["sim"]["duration"] = 0.3.into();
        v["sim"]["seed"] = 7.into();
    });
    let out = dir.path().join("mc");
    let res = maglev(&["simulate", "--quiet", "--scenario", p(&scenario), "--out", p(&out), "--seeds", "3"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert!(stdout(&res).is_empty());
    let summary = read_json(&out.join("summary.json"));
    let seeds: Vec<u64> = summary.as_array().unwrap().iter().map(|s| s["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, vec![7, 8, 9]);
    for s in seeds {
        assert!(out.join(format!("log_seed{s}.csv")).exists());
    }
    assert_ne!(fs::read(out.join("log_seed7.csv")).unwrap(), fs::read(out.join("log_seed8.csv")).unwrap());
}

#[test]
fn simulate_without_translation_feedback_diverges() {
    let dir = TempDir::new().unwrap();
    let scenario = edited_scenario(dir.path(), |v| {
        let zero = serde_json::json!([[0.0, 0.0], [0.0, 0.0]]);
        for axis in ["x", "y", "z"] {
            v["gains"]["translation"]["q"][axis] = zero.clone();
        }
        v["gains"]["translation"]["ki"] = serde_json::json!([0.0, 0.0, 0.0]);
        v["initial"] = serde_json::json!({"velocity": [0.005, 0.005, 0.0]});
    });
    let out = dir.path().join("run");
    let res = maglev(&["simulate", "--scenario", p(&scenario), "--out", p(&out)]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));
    assert!(stderr(&res).contains("diverged"));
    assert_eq!(read_json(&out.join("summary.json"))["outcome"]["status"], "diverged");
}

#[test]
fn malformed_scenarios_exit_1_naming_the_problem() {
    let dir = TempDir::new().unwrap();
    let scenario = edited_scenario(dir.path(), |v| v["sim"]["corner_freq"] = 26.4.into());
    let res = maglev(&["simulate", "--scenario", p(&scenario), "--out", p(&dir.path().join("x"))]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("corner_freq"), "{}", stderr(&res));

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\n  \"sim\": {,\n}").unwrap();
    let res = maglev(&["simulate", "--scenario", p(&broken), "--out", p(&dir.path().join("y"))]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("line 2"), "{}", stderr(&res));

    let res = maglev(&["simulate", "--scenario", p(&dir.path().join("missing.json"))]);
    assert_eq!(code(&res), 1);
    let res = maglev(&["simulate"]);
    assert_eq!(code(&res), 1);
}

fn calibration_data(dir: &Path, noise: f64) -> (PathBuf, PathBuf) {
    let truth = FieldModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let placements = [
        Vec3::zeros(),
        Vec3::new(0.02, 0.0, 0.01),
        Vec3::new(-0.02, 0.0, 0.01),
        Vec3::new(0.0, 0.02, -0.01),
        Vec3::new(0.0, -0.02, -0.01),
    ];
    let samples = synthetic_samples(&truth, &calibration_positions(0.01, &placements), 2.0, noise, &mut rng).unwrap();
    let data = dir.join("data.csv");
    write_samples_csv(fs::File::create(&data).unwrap(), &samples).unwrap();
    let mut init = truth.clone();
    for (k, c) in init.coils.iter_mut().enumerate() {
        let s = 1.0 + 0.03 * if k % 2 == 0 { 1.0 } else { -1.0 };
        *c = CoilSource::new(c.center * s, c.axis + Vec3::new(0.02, -0.02, 0.01), c.strength / s).unwrap();
    }
    let init_path = dir.join("init.json");
    fs::write(&init_path, init.to_json()).unwrap();
    (data, init_path)
}

#[test]
fn calibrate_noiseless_data() {
    let dir = TempDir::new().unwrap();
    let (data, init) = calibration_data(dir.path(), 0.0);
    let out = dir.path().join("model.json");
    let res = maglev(&["calibrate", "--data", p(&data), "--init", p(&init), "--out", p(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let report = read_json(&dir.path().join("model.report.json"));
    assert!(report["rms_residual"].as_f64().unwrap() < 1e-9);
    assert_eq!(report["converged"], true);
    let fitted = FieldModel::from_json(&fs::read_to_string(&out).unwrap()).unwrap();
    for (a, b) in fitted.coils.iter().zip(FieldModel::default().coils.iter()) {
        assert!((a.center - b.center).norm() < 1e-9);
        assert!((a.strength - b.strength).abs() < 1e-9 * b.strength);
    }
}

#[test]
fn calibrate_noisy_data_reports_held_out_error() {
    let dir = TempDir::new().unwrap();
    let (data, init) = calibration_data(dir.path(), 0.01);
    let out = dir.path().join("model.json");
    let res = maglev(&["calibrate", "--data", p(&data), "--init", p(&init), "--out", p(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let report = read_json(&dir.path().join("model.report.json"));
    assert_eq!(report["held_out_samples"], 512);
    assert!(report["held_out_error"].as_f64().unwrap() < 0.02);
    assert!(stdout(&res).contains("held-out error"));
}

#[test]
fn calibrate_flags_non_convergence_and_bad_input() {
    let dir = TempDir::new().unwrap();
    let (data, init) = calibration_data(dir.path(), 0.0);
    let out = dir.path().join("model.json");
    let res = maglev(&["calibrate", "--data", p(&data), "--init", p(&init), "--out", p(&out), "--max-iterations", "1"]);
    assert_eq!(code(&res), 3, "{}", stderr(&res));
    assert!(out.exists(), "model is still written");

    let text = fs::read_to_string(&data).unwrap();
    let without_bz: String = text.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n").collect();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, without_bz).unwrap();
    let res = maglev(&["calibrate", "--data", p(&bad), "--out", p(&dir.path().join("m2.json"))]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("bz"), "{}", stderr(&res));
}

#[test]
fn design_lqr_reports_three_stable_axes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("lqr.json");
    let res = maglev(&["design-lqr", "--scenario", p(&shipped("hover.json")), "--out", p(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(stdout(&res).matches("(stable)").count(), 3);
    let report = read_json(&out);
    for axis in report["axes"].as_array().unwrap() {
        assert!(axis["spectral_radius"].as_f64().unwrap() < 1.0);
        assert!(axis["dare_residual"].as_f64().unwrap() < 1e-10);
        assert!(axis["k"][0].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn design_lqr_with_zero_cost_gives_zero_gain() {
    let dir = TempDir::new().unwrap();
    let scenario = edited_scenario(dir.path(), |v| {
        for axis in ["x", "y", "z"] {
            v["gains"]["translation"]["q"][axis] = serde_json::json!([[0.0, 0.0], [0.0, 0.0]]);
        }
    });
    let out = dir.path().join("lqr.json");
    let res = maglev(&["design-lqr", "--quiet", "--scenario", p(&scenario), "--out", p(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    for axis in read_json(&out)["axes"].as_array().unwrap() {
        assert_eq!(axis["k"], serde_json::json!([0.0, 0.0]));
    }
}

#[test]
fn analyze_stiffness_at_the_center() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("k.json");
    let res = maglev(&["analyze-stiffness", "--scenario", p(&shipped("hover.json")), "--pose", "0,0,0", "--out", p(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let report = read_json(&out);
    assert!(report["trace"].as_f64().unwrap().abs() < 1e-9);
    assert!(report["k_max"].as_f64().unwrap() > 0.0);
    assert!(report["time_constant"].as_f64().unwrap() > 0.0);
    assert_eq!(report["hover_feasible"], true);
    assert!(stdout(&res).contains("divergence time constant"));

    let res = maglev(&["analyze-stiffness", "--scenario", p(&shipped("hover.json")), "--pose", "-0.005,0.002,0.01,20,-10,0"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
}

#[test]
fn analyze_stiffness_errors() {
    let res = maglev(&["analyze-stiffness", "--scenario", p(&shipped("hover.json")), "--pose", "0,0"]);
    assert_eq!(code(&res), 1);
    let coil = FieldModel::default().coils[0].center;
    let pose = format!("{},{},{}", coil.x, coil.y, coil.z);
    let res = maglev(&["analyze-stiffness", "--scenario", p(&shipped("hover.json")), "--pose", &pose]);
    assert_eq!(code(&res), 3, "{}", stderr(&res));
}
