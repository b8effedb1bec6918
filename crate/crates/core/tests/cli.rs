use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mtgibbs::covariates::{GridGeometry, RasterField};
use mtgibbs::simulate::{ProtocolTruth, StudyConfig};
use mtgibbs::Rect;
use serde_json::{json, Value};

fn mtgibbs(sub: &str, config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtgibbs"))
        .arg(sub)
        .arg("--config")
        .arg(config)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, value: &Value) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Covariate and baseline rasters plus the model block that uses them.
fn model_block(dir: &Path) -> Value {
    let grid = GridGeometry::covering(&Rect::unit_square(), 20, 20).unwrap();
    RasterField::from_fn(grid, |u| u.x - 0.5 * u.y).write(dir.join("z.grid")).unwrap();
    RasterField::constant(grid, 250.0).write(dir.join("phi.grid")).unwrap();
    json!({
        "covariates": [{"name": "z", "path": "z.grid"}],
        "interaction": {"family": "strauss", "R": [[0.03, 0.04], [0.04, 0.03]]},
        "baseline": "phi.grid"
    })
}

#[test]
fn simulate_fit_profile_and_baseline_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let model = model_block(dir);

    let sim = write_config(
        dir,
        "simulate.json",
        &json!({
            "command": "simulate",
            "num_types": 2,
            "model": model,
            "simulate": {
                "window": {"x_min": 0.0, "x_max": 1.0, "y_min": 0.0, "y_max": 1.0},
                "gamma": {"z[1]": 0.5, "intercept[1]": 0.2, "int[1,1]": 0.7f64.ln(), "int[2,2]": 0.8f64.ln()},
                "chain": {"seed": 4}
            },
            "out": "sim"
        }),
    );
    assert_ok(&mtgibbs("simulate", &sim));
    let summary = read_json(dir.join("sim/simulation.json"));
    assert!(summary["n_points"].as_u64().unwrap() > 200);
    assert!(dir.join("sim/pattern.window.json").exists());
    assert!(dir.join("sim/manifest.json").exists());

    let fit = write_config(
        dir,
        "fit.json",
        &json!({"command": "fit", "pattern": "sim/pattern.csv", "num_types": 2, "model": model, "out": "fit"}),
    );
    let out = mtgibbs("fit", &fit);
    assert_ok(&out);
    let report = read_json(dir.join("fit/fit.json"));
    assert_eq!(report["converged"], json!(true));
    let names: Vec<&str> = report["gamma_names"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(names.contains(&"int[1,1]") && names.contains(&"z[2]"), "{names:?}");
    let table = fs::read_to_string(dir.join("fit/coefficients.csv")).unwrap();
    assert!(table.starts_with("parameter,estimate,std_error,ci_low,ci_high,level,valid"));

    let profile = write_config(
        dir,
        "profile.json",
        &json!({
            "command": "profile",
            "pattern": "sim/pattern.csv",
            "num_types": 2,
            "model": model,
            "profile": {"r_within": [0.02, 0.03], "r_between": [0.04]},
            "out": "profile"
        }),
    );
    assert_ok(&mtgibbs("profile", &profile));
    let rows = fs::read_to_string(dir.join("profile/profile.csv")).unwrap();
    assert_eq!(rows.lines().count(), 3, "{rows}");

    // log reference on the estimate grid
    let est_grid = GridGeometry::covering(&Rect::unit_square(), 10, 10).unwrap();
    RasterField::from_fn(est_grid, |u| u.x - 0.5 * u.y).write(dir.join("ref.grid")).unwrap();
    let baseline = write_config(
        dir,
        "baseline.json",
        &json!({
            "command": "baseline",
            "pattern": "sim/pattern.csv",
            "num_types": 2,
            "model": model,
            "baseline": {
                "kernel": {"bandwidth": 0.15, "grid": {"origin": [0.0, 0.0], "dx": 0.1, "dy": 0.1, "n_x": 10, "n_y": 10}},
                "fit_result": "fit/fit.json",
                "reference": "ref.grid"
            },
            "out": "baseline"
        }),
    );
    assert_ok(&mtgibbs("baseline", &baseline));
    let est = RasterField::read(dir.join("baseline/phi0.grid")).unwrap();
    assert_eq!(est.values().len(), 100);
    assert!(est.min() > 0.0);
    assert!(read_json(dir.join("baseline/baseline.json"))["log_correlation"].is_number());
}

#[test]
fn tiny_study_writes_summaries() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let study = StudyConfig::protocol(ProtocolTruth::Poisson, vec![0.5], 2, 3, 10);
    let cfg = write_config(
        dir,
        "study.json",
        &json!({"command": "study", "study": serde_json::to_value(&study).unwrap(), "out": "study"}),
    );
    let out = mtgibbs("study", &cfg);
    assert!(matches!(out.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(dir.join("study/study.json"));
    assert!(report.is_object());
    assert!(fs::read_dir(dir.join("study"))
        .unwrap()
        .any(|e| e.unwrap().path().extension().is_some_and(|x| x == "csv")));
}

#[test]
fn unknown_key_exits_with_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let model = model_block(dir);
    let cfg = write_config(
        dir,
        "fit.json",
        &json!({"command": "fit", "pattern": "p.csv", "num_types": 2, "model": model, "bandwith": 1}),
    );
    let out = mtgibbs("fit", &cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bandwith"));
}

#[test]
fn command_mismatch_exits_with_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let model = model_block(dir);
    let cfg = write_config(
        dir,
        "fit.json",
        &json!({"command": "fit", "pattern": "p.csv", "num_types": 2, "model": model}),
    );
    let out = mtgibbs("simulate", &cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not `simulate`"));
}

#[test]
fn missing_pattern_file_exits_with_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let model = model_block(dir);
    let cfg = write_config(
        dir,
        "fit.json",
        &json!({"command": "fit", "pattern": "absent.csv", "num_types": 2, "model": model, "out": "o"}),
    );
    assert_eq!(mtgibbs("fit", &cfg).status.code(), Some(1));
}
