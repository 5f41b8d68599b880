use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn lenslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lenslab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lenslab-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn scatter_diameter() {
    let v = json(&lenslab(&["scatter", "--spec", "flat-d2s1", "--entry", "1,0,0", "--dir", "-1,0,0"]));
    assert_eq!(v["status"], "exited");
    assert!((v["travel_time"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    let p: Vec<f64> = serde_json::from_value(v["exit"]["point"].clone()).unwrap();
    assert!((p[0] + 1.0).abs() < 1e-9 && p[1].abs() < 1e-9 && p[2].abs() < 1e-9);
}

#[test]
fn bump_family_scan_on_ode_path() {
    let v = json(&lenslab(&["compare", "--family", "bump", "--shifts", "-0.5,0,0.5", "--angles", "30"]));
    assert_eq!(v["path"], "ode");
    assert_eq!(v["rows"].as_array().unwrap().len(), 90);
    assert!(v["max_deviation"]["overall"].as_f64().unwrap() < 1e-4);
}

#[test]
fn clairaut_family_reports_witness() {
    let v = json(&lenslab(&["clairaut-family", "--shifts", "0,0.5", "--angles", "10"]));
    assert!(v["max_deviation"]["overall"].as_f64().unwrap() < 1e-9);
    assert!(v["non_isometry"][0]["curvature_gap"].as_f64().unwrap() > 0.1);
}

#[test]
fn volume_near_analytic() {
    let v = json(&lenslab(&["volume", "--spec", "flat-d2s1", "--samples", "200000", "--seed", "5"]));
    let est = v["estimate"]["volume"].as_f64().unwrap();
    let se = v["estimate"]["std_error"].as_f64().unwrap();
    let exact = 2.0 * std::f64::consts::PI.powi(2);
    assert!((est - exact).abs() < 0.01 * exact);
    assert!((est - exact).abs() < 4.0 * se);
}

#[test]
fn runs_are_byte_identical_across_workers() {
    let run = |w: &str| lenslab(&["lens", "--spec", "bump", "--samples", "5000", "--seed", "3", "--workers", w]).stdout;
    let a = run("1");
    assert!(!a.is_empty());
    assert_eq!(a, run("3"));
    let trapped = |w: &str| {
        lenslab(&["trapped", "--spec", "flat-d2s1", "--samples", "5000", "--budgets", "10,100", "--workers", w, "--format", "csv"]).stdout
    };
    assert_eq!(trapped("1"), trapped("2"));
}

#[test]
fn lens_tables_round_trip_through_compare() {
    let a = scratch("ode.csv");
    let b = scratch("oracle.csv");
    for (path, out) in [("ode", &a), ("flat-oracle", &b)] {
        let o = lenslab(&["lens", "--spec", "flat-d3s1", "--grid", "4,2,1,3,2,2", "--path", path, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let v = json(&lenslab(&["compare", "--tables", a.to_str().unwrap(), b.to_str().unwrap()]));
    assert_eq!(v["records"], 96);
    assert!(v["max_deviation"].as_f64().unwrap() < 1e-8);
    assert_eq!(v["status_disagreements"], 0);
}

#[test]
fn config_file_drives_a_run() {
    let cfg = scratch("run.cfg");
    fs::write(
        &cfg,
        "seed = 11\nsamples = 2000\nbudget = 100\n\n[cyl]\nkind = revolution\nbump.amplitude = 0\nbump.epsilon = 0.2\nbump.shift = 0\n",
    )
    .unwrap();
    let v = json(&lenslab(&["trapped", "--config", cfg.to_str().unwrap()]));
    let rung = &v["rungs"][0];
    assert_eq!(rung["estimate"]["budget"], 100.0);
    assert_eq!(rung["estimate"]["seed"], 11);
    let exact = rung["exact_tail"].as_f64().unwrap();
    assert!((exact - (1.0 - 2.0 * (0.02f64).acos() / std::f64::consts::PI)).abs() < 1e-12);
}

#[test]
fn config_errors_name_the_line() {
    let cfg = scratch("bad.cfg");
    fs::write(&cfg, "kind = revolution\n# ok\nbump.epsilon = 0.3\n").unwrap();
    let o = lenslab(&["volume", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("1/4"), "{err}");
}

#[test]
fn bad_input_exits_one() {
    assert_eq!(lenslab(&["scatter", "--spec", "flat-d2s1", "--entry", "0.5,0,0", "--dir", "-1,0,0"]).status.code(), Some(1));
    assert_eq!(lenslab(&["volume", "--spec", "nowhere"]).status.code(), Some(1));
    assert_eq!(lenslab(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn busemann_probes() {
    let v = json(&lenslab(&[
        "busemann", "--spec", "flat-d2s1", "--base", "0,0,0", "--dir", "1,0,0", "--point", "3,0,0", "--point", "-2,1,0.5",
    ]));
    let probes = v["probes"].as_array().unwrap();
    assert!((probes[0]["value"].as_f64().unwrap() + 3.0).abs() < 1e-8);
    for p in probes {
        assert!((p["gradient_norm"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    }
}

#[test]
fn selftest_exit_codes() {
    let ok = lenslab(&["selftest", "--quick", "--criteria", "2,3"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let report: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert!(String::from_utf8_lossy(&ok.stderr).contains("[PASS] 2."));

    // The literal bump-vs-flat-cylinder volume check fails by construction.
    let bad = lenslab(&["selftest", "--quick", "--criteria", "6"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("[FAIL] 6."));
}
