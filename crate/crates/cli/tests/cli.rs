use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_guderley"));
    c.env_remove("GUDERLEY_TOL");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|x| x.unwrap().iter().map(String::from).collect())
        .collect();
    (headers, rows)
}

#[test]
fn lambda_gamma_1_4_spherical() {
    let v = json(&run(&["lambda", "--gamma", "1.4", "--m", "2"]));
    let lam = v["lambda"].as_f64().unwrap();
    assert!((lam - 1.394).abs() < 1e-3, "{lam}");
    assert_eq!(v["triple_point"], "P6");
    assert_eq!(v["schema_version"], 1);
    for key in ["gamma", "m", "z", "miss_residual"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn lambda_out_of_range_gamma_is_domain_error() {
    let out = run(&["lambda", "--gamma", "0.9", "--m", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain"));
    assert_eq!(
        run(&["lambda", "--gamma", "1.4", "--m", "3"]).status.code(),
        Some(2)
    );
}

#[test]
fn lambda_gamma_three_lands_in_p8_interval() {
    let v = json(&run(&[
        "lambda", "--gamma", "3", "--m", "1", "--tol", "1e-13",
    ]));
    assert_eq!(v["triple_point"], "P8");
    let z = v["z"].as_f64().unwrap();
    let lo = v["z_interval"][0].as_f64().unwrap();
    let hi = v["z_interval"][1].as_f64().unwrap();
    let s33 = 33f64.sqrt();
    assert!((lo - (s33 - 3.0) / (6.0 + 2.0 * s33 + 12.0)).abs() < 1e-12);
    assert!(lo < z && z < hi);
}

#[test]
fn env_tolerance_is_used_and_validated() {
    let out = bin()
        .args(["lambda", "--gamma", "1.4", "--m", "1"])
        .env("GUDERLEY_TOL", "abc")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .args(["lambda", "--gamma", "1.4", "--m", "1"])
        .env("GUDERLEY_TOL", "1e-9")
        .output()
        .unwrap();
    let v = json(&out);
    assert!((v["lambda"].as_f64().unwrap() - 1.19714).abs() < 1e-4);
}

#[test]
fn solve_summary_csv_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("s.json");
    let csv = dir.path().join("s.csv");
    let args = [
        "solve",
        "--gamma",
        "1.5",
        "--m",
        "1",
        "--out",
        sol.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ];
    let first = run(&args);
    let v = json(&first);
    let z = v["z"].as_f64().unwrap();
    assert!((z - 0.14).abs() < 0.005, "z = {z}");
    let xh = v["x_H"].as_f64().unwrap();
    assert!(xh > 0.0 && xh.is_finite());
    assert_eq!(v["intersection_count"], 1);
    assert_eq!(v["entropy_ok"], true);
    for key in ["V_H", "C_H", "V_s", "C_s", "x_s", "terminal"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let (h, rows) = read_csv(&csv);
    assert_eq!(h, ["branch_id", "x", "V", "C", "R"]);
    for id in ["collapse", "origin", "extension", "downstream"] {
        assert!(rows.iter().any(|r| r[0] == id), "{id}");
    }
    assert!(rows.iter().all(|r| r[4].parse::<f64>().unwrap() > 0.0));

    let sol_bytes = std::fs::read(&sol).unwrap();
    let csv_bytes = std::fs::read(&csv).unwrap();
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(sol_bytes, std::fs::read(&sol).unwrap());
    assert_eq!(csv_bytes, std::fs::read(&csv).unwrap());
}

#[test]
fn phase_curves_are_tagged_and_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let out = run(&[
        "phase",
        "--gamma",
        "2",
        "--m",
        "2",
        "--csv",
        path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (h, rows) = read_csv(&path);
    assert_eq!(h, ["curve_id", "V", "C"]);
    let num = |r: &Vec<String>, i: usize| r[i].parse::<f64>().unwrap();
    for r in &rows {
        match r[0].as_str() {
            "sonic_upper" => assert_eq!(num(r, 2), 1.0 + num(r, 1)),
            "sonic_lower" => assert_eq!(num(r, 2), -(1.0 + num(r, 1))),
            _ => {}
        }
    }
    for id in [
        "critical:P6",
        "critical:P9",
        "f_zero_plus",
        "g_zero",
        "trajectory",
        "extension",
        "jump_locus",
        "v_infinity",
    ] {
        assert!(rows.iter().any(|r| r[0] == id), "{id}");
    }
    // F = 0 branch stays in [-sqrt((1+mγz)/(1+mz)), C9).
    let z = rows
        .iter()
        .find(|r| r[0] == "critical:P9")
        .map(|r| num(r, 2))
        .unwrap();
    let lam = json(&run(&["lambda", "--gamma", "2", "--m", "2"]));
    let zz = lam["z"].as_f64().unwrap();
    let c_lo = -((1.0 + 4.0 * zz) / (1.0 + 2.0 * zz)).sqrt();
    for r in rows.iter().filter(|r| r[0] == "f_zero_plus") {
        let c = num(r, 2);
        assert!(c >= c_lo - 1e-12 && c < z, "{c}");
    }
}

#[test]
fn phase_with_given_lambda_omits_trajectories() {
    let out = run(&["phase", "--gamma", "1.4", "--m", "1", "--lambda", "1.2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("critical:P6") && !text.contains("trajectory"));
}

#[test]
fn fields_terminal_power_law_and_shock_jump() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("s.json");
    let v = json(&run(&[
        "solve",
        "--gamma",
        "1.4",
        "--m",
        "2",
        "--out",
        sol.to_str().unwrap(),
    ]));
    let lam = v["lambda"].as_f64().unwrap();
    let xh = v["x_H"].as_f64().unwrap();

    let f = dir.path().join("f.csv");
    let t1 = 0.7;
    let rs = (t1 / xh).powf(1.0 / lam);
    let rlist = format!("0.25,0.5,1,2,{rs}");
    let out = run(&[
        "fields",
        "--solution",
        sol.to_str().unwrap(),
        "--t",
        "0,0.7",
        "--r",
        &rlist,
        "--csv",
        f.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (h, rows) = read_csv(&f);
    assert_eq!(h, ["t", "r", "x", "branch", "side", "rho", "u", "c", "p"]);
    let num = |r: &Vec<String>, i: usize| r[i].parse::<f64>().unwrap();

    // c r^{λ-1} is constant along t = 0.
    let k: Vec<f64> = rows
        .iter()
        .filter(|r| num(r, 0) == 0.0)
        .map(|r| num(r, 7) * num(r, 1).powf(lam - 1.0))
        .collect();
    assert_eq!(k.len(), 5);
    for w in k.windows(2) {
        assert!((w[0] - w[1]).abs() < 1e-12 * w[0].abs());
    }

    // Density ratio across the reflected shock from the jump map.
    let ahead = rows
        .iter()
        .find(|r| r[4] == "ahead" && num(r, 0) == t1)
        .unwrap();
    let behind = rows
        .iter()
        .find(|r| r[4] == "behind" && num(r, 0) == t1)
        .unwrap();
    let p_h = guderley::PhasePoint::new(v["V_H"].as_f64().unwrap(), v["C_H"].as_f64().unwrap());
    let pre = guderley::jump_map::jump_inverse(1.4, p_h).unwrap();
    let ratio = (1.0 + pre.v) / (1.0 + p_h.v);
    assert!((num(behind, 5) / num(ahead, 5) - ratio).abs() < 1e-8 * ratio);
}

#[test]
fn fields_rejects_malformed_solution_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"schema_version\": 1,\n  \"summary\": 3\n}\n").unwrap();
    let out = run(&[
        "fields",
        "--solution",
        bad.to_str().unwrap(),
        "--t",
        "1",
        "--r",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn fields_rejects_nonpositive_radius() {
    let out = run(&[
        "fields", "--gamma", "1.4", "--m", "1", "--t", "1", "--r", "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn certify_passes_and_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cert.json");
    let out = run(&["certify", "--out", path.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    let items = v["items"].as_array().unwrap();
    assert!(items.len() > 800);
    assert_eq!(v["failed"], 0);
    for it in items {
        for key in ["id", "interval", "method", "status"] {
            assert!(it.get(key).is_some());
        }
        assert_eq!(it["status"], "pass");
    }
    assert!(items
        .iter()
        .any(|i| i["id"] == "ineq.xv bracket" && i["method"] == "sturm"));
}
