use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;

use gpe_core::cli::{parse_scenario, run_scenario, OUT_DIR_ENV};
use serde_json::{json, Value};

fn gpe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gpe"))
}

fn heat_lambda(n: usize) -> f64 {
    let dx = 1.0 / (n + 1) as f64;
    2.0 / (dx * dx) * (1.0 - (PI * dx).cos())
}

fn write(dir: &Path, name: &str, doc: &Value) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(doc).unwrap()).unwrap();
    p
}

/// Every `{value, trust_radius}` object below `v`, with its path.
fn estimates(v: &Value, path: String, out: &mut Vec<(String, f64)>) {
    match v {
        Value::Object(m) => {
            if let (Some(Value::Number(x)), true) = (m.get("value"), m.contains_key("trust_radius")) {
                out.push((path.clone(), x.as_f64().unwrap()));
            }
            for (k, c) in m {
                estimates(c, format!("{path}.{k}"), out);
            }
        }
        Value::Array(a) => a.iter().enumerate().for_each(|(i, c)| estimates(c, format!("{path}[{i}]"), out)),
        _ => {}
    }
}

fn frozen_heat() -> Value {
    json!({
        "name": "frozen-heat",
        "domain": {"x_lo": 0, "x_hi": 1},
        "coefficients": {"kind": "constant", "a": 1, "b": 0, "c": 0},
        "discretization": {"n_interior": 49, "dt": 1e-3, "richardson": true},
        "horizons": {"burn_in": 2, "t_max_plus": 20, "t_max_minus": 20, "record_stride": 10},
        "seed": 3
    })
}

#[test]
fn frozen_heat_report_matches_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "heat.json", &frozen_heat());
    let out = dir.path().join("out");
    let status = gpe().arg("run").arg(&scenario).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    let mut found = Vec::new();
    estimates(&report["experiments"][0]["result"], String::new(), &mut found);
    let entries: Vec<_> = found.iter().filter(|(p, _)| !p.contains("finite")).collect();
    assert_eq!(entries.len(), 14, "{entries:?}");
    for (p, v) in entries {
        assert!((v - heat_lambda(49)).abs() < 1e-3, "{p}: {v}");
    }
    let rows = report["invariants"].as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["passed"] == true && r["tolerance"].is_number()));
    assert!(out.join("invariants.csv").is_file());
    assert!(out.join("eigen").join("trace_R.csv").is_file());
}

#[test]
fn out_dir_defaults_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = frozen_heat();
    doc["discretization"] = json!({"n_interior": 19, "dt": 1e-2});
    doc["horizons"] = json!({"burn_in": 1, "t_max_plus": 6, "t_max_minus": 6, "record_stride": 1});
    let scenario = write(dir.path(), "small.json", &doc);
    let root = dir.path().join("env-out");
    let status = gpe().arg("run").arg(&scenario).env(OUT_DIR_ENV, &root).status().unwrap();
    assert!(status.success());
    assert!(root.join("frozen-heat").join("report.json").is_file());
}

#[test]
fn rerun_is_byte_identical_modulo_timing() {
    let doc = json!({
        "name": "noisy",
        "domain": {"x_lo": 0, "x_hi": 1},
        "coefficients": {"kind": "random_stationary", "a": 1, "c0": 0,
                         "sigma": {"family": "piecewise_linear_iid", "lo": 0, "hi": 1}},
        "discretization": {"n_interior": 19, "dt": 2e-3},
        "horizons": {"burn_in": 1, "t_max_plus": 30, "t_max_minus": 30, "record_stride": 5},
        "seed": 11
    });
    let cfg = parse_scenario(&doc.to_string()).unwrap();
    let a = run_scenario(&cfg, None).unwrap().deterministic_json().unwrap();
    let b = run_scenario(&cfg, None).unwrap().deterministic_json().unwrap();
    assert_eq!(a, b);
    assert!(!a.contains("\"timing\""));
    let mut other = cfg.clone();
    other.seed = 12;
    let c = run_scenario(&other, None).unwrap().deterministic_json().unwrap();
    assert_ne!(a, c);
}

#[test]
fn log_oscillatory_synthetic_scenario_separates_four_values() {
    let doc = json!({
        "name": "log-osc",
        "domain": {"x_lo": 0, "x_hi": 1},
        "coefficients": {"kind": "log_oscillatory", "a": 1, "c0": 0,
                         "sigma": {"family": "log_oscillatory", "amplitude": 1}},
        "discretization": {"n_interior": 99},
        "horizons": {"burn_in": 1, "t_max_plus": 1e6, "t_max_minus": 1e6},
        "growthrate": {"T_list": [10, 30, 100, 300, 1000, 3000, 10000]},
        "experiments": [{"name": "syn", "kind": "synthetic_growth", "parameters": {"dt_record": 1}}]
    });
    let cfg = parse_scenario(&doc.to_string()).unwrap();
    let rep = run_scenario(&cfg, None).unwrap();
    assert!(!rep.hard_failure(), "{:?}", rep.invariants.iter().filter(|r| !r.passed).collect::<Vec<_>>());
    let res = &rep.experiments[0].result;
    let lam = heat_lambda(99);
    let plus = &res["report"]["plus"];
    let got: Vec<f64> = ["mu_bp", "mu_p", "lambda_b", "lambda_bp"]
        .iter()
        .map(|k| plus[k]["value"].as_f64().unwrap())
        .collect();
    let r2 = 0.5f64.sqrt();
    for (g, w) in got.iter().zip([lam + 1.0, lam + r2, lam - r2, lam - 1.0]) {
        assert!((g - w).abs() < 1e-2, "{got:?}");
    }
    assert!(got.windows(2).all(|w| w[0] - w[1] > 0.2), "{got:?}");
}

#[test]
fn malformed_scenario_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = frozen_heat();
    doc["discretization"]["bogus"] = json!(1);
    let scenario = write(dir.path(), "bad.json", &doc);
    let out = gpe().arg("run").arg(&scenario).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn failing_experiment_gives_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = frozen_heat();
    doc["discretization"] = json!({"n_interior": 19, "dt": 1e-2});
    doc["horizons"] = json!({"burn_in": 1, "t_max_plus": 6, "t_max_minus": 6, "record_stride": 1});
    doc["experiments"] = json!([{"name": "bad", "kind": "oracle_crosscheck"}]);
    let scenario = write(dir.path(), "x.json", &doc);
    let status = gpe().arg("run").arg(&scenario).arg("--out").arg(dir.path().join("o")).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn verify_only_filters_rows() {
    let out = gpe().args(["verify", "--only", "eigensolve", "--json"]).output().unwrap();
    assert!(out.status.success());
    let rows: Value = serde_json::from_slice(&out.stdout).unwrap();
    let ids: Vec<u64> = rows.as_array().unwrap().iter().map(|r| r["criterion"].as_u64().unwrap()).collect();
    assert_eq!(ids, vec![1, 12]);
    let bad = gpe().args(["verify", "--only", "nope"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn eigen_at_a_frozen_time() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json!({
        "name": "shifted",
        "domain": {"x_lo": 0, "x_hi": 1},
        "coefficients": {"kind": "separable_sigma", "a": 1, "c0": 0,
                         "sigma": {"family": "cosine", "m": 1, "amplitude": 1, "tau": 1}},
        "discretization": {"n_interior": 49}
    });
    let scenario = write(dir.path(), "s.json", &doc);
    let out = gpe().arg("eigen").arg(&scenario).args(["--frozen-at", "0.25"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    // c(0.25) = 1 + cos(π/2) = 1
    assert!((v["value"].as_f64().unwrap() - (heat_lambda(49) - 1.0)).abs() < 1e-9, "{v}");
}

#[test]
fn synthetic_growth_command_reports_json() {
    let out = gpe()
        .args(["synthetic-growth", r#"{"family": "constant", "value": 0.5}"#, "--tmax", "100", "--lambda", "2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let mut found = Vec::new();
    estimates(&v["report"], String::new(), &mut found);
    for (p, x) in found.iter().filter(|(p, _)| !p.contains("finite")) {
        assert!((x - 1.5).abs() < 1e-9, "{p}: {x}");
    }
}

#[test]
fn periodic_crosscheck_uses_the_report_dt_levels() {
    let doc = json!({
        "name": "periodic",
        "domain": {"x_lo": 0, "x_hi": 1},
        "coefficients": {"kind": "periodic", "period": 1, "a": 1, "c0": 0,
                         "sigma": {"family": "cosine", "m": 1, "amplitude": 1, "tau": 1}},
        "discretization": {"n_interior": 39, "dt": 1e-3, "richardson": true},
        "horizons": {"burn_in": 1, "t_max_plus": 40, "t_max_minus": 40, "record_stride": 10},
        "experiments": [{"name": "check", "kind": "oracle_crosscheck", "parameters": {"period": 1}}]
    });
    let rep = run_scenario(&parse_scenario(&doc.to_string()).unwrap(), None).unwrap();
    assert!(!rep.hard_failure(), "{:?}", rep.invariants.iter().filter(|r| !r.passed).collect::<Vec<_>>());
    let oracle = rep.experiments[0].result["oracles"]["periodic_eigen"].as_f64().unwrap();
    assert!((oracle - (heat_lambda(39) - 1.0)).abs() < 2e-3, "{oracle}");
}
