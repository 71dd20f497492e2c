use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use egc::io::{panel_csv, read_panel, PanelOptions};
use egc_core::dgp::{simulate_dgp, DgpSpec, DgpTag};
use egc_core::mvine::{FitSettings, MVineModel};
use egc_core::RandomStream;
use tempfile::TempDir;

fn egc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egc"))
        .args(args)
        .env_remove("EG_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = egc(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str], code: i32) -> String {
    let out = egc(args);
    assert_eq!(out.status.code(), Some(code), "{args:?}");
    String::from_utf8(out.stderr).unwrap()
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn simulate_is_reproducible_and_has_a_header() {
    let a = ok(&["simulate", "--dgp", "P2", "--T", "50", "--seed", "4"]);
    let b = ok(&["simulate", "--dgp", "p2", "--length", "50", "--seed", "4"]);
    assert_eq!(a, b);
    assert!(a.starts_with("# manifest: "));
    let rows = data_lines(&a);
    assert_eq!(rows[0], "x,y,z");
    assert_eq!(rows.len(), 51);
    assert_ne!(a, ok(&["simulate", "--dgp", "P2", "--T", "50", "--seed", "5"]));
}

#[test]
fn csv_round_trip_is_lossless() {
    let dir = TempDir::new().unwrap();
    let panel = simulate_dgp(&DgpSpec::new(DgpTag::P4), 200, &RandomStream::new(1)).unwrap();
    let path = p(&dir, "p.csv");
    fs::write(&path, panel_csv(&panel, &["note".into()]).unwrap()).unwrap();
    let back = read_panel(&path, &PanelOptions::default()).unwrap();
    assert_eq!(back, panel);
}

#[test]
fn fitted_model_reloads_and_simulates_like_in_process() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "d.csv");
    let model = p(&dir, "m.json");
    ok(&["simulate", "--dgp", "P1", "--T", "150", "--seed", "2", "-o", s(&data)]);
    ok(&["fit", "-i", s(&data), "-o", s(&model)]);

    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(json["schema"], "eg-result/1");
    let edges = json["payload"]["in_time_edges"].as_array().unwrap();
    assert_eq!(edges.len(), 3);
    assert!(edges.iter().all(|e| e["copula"]["family"].is_string()));
    assert!(!json["payload"]["cross_edges"].as_array().unwrap().is_empty());

    let from_file = ok(&["simulate", "--model", s(&model), "--T", "40", "--seed", "9"]);
    let panel = read_panel(&data, &PanelOptions::default()).unwrap();
    let fitted = MVineModel::fit(&panel, &FitSettings::default()).unwrap();
    let path = fitted.simulate_path(40, &RandomStream::new(9)).unwrap();
    assert_eq!(data_lines(&from_file), data_lines(&panel_csv(&path, &[]).unwrap()));
}

#[test]
fn malformed_model_reports_the_json_path() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "d.csv");
    let model = p(&dir, "m.json");
    ok(&["simulate", "--dgp", "S1", "--T", "80", "-o", s(&data)]);
    ok(&["fit", "-i", s(&data), "-o", s(&model)]);
    let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    json["payload"]["in_time_edges"][0]["copula"]["rotation"] = "sideways".into();
    fs::write(&model, json.to_string()).unwrap();
    let err = fails(&["simulate", "--model", s(&model), "--T", "30"], 2);
    assert!(err.contains("payload.in_time_edges[0].copula.rotation"), "{err}");
}

#[test]
fn input_errors_name_the_problem() {
    let dir = TempDir::new().unwrap();
    let path = p(&dir, "bad.csv");
    let mut text = String::from("date,a,b\n");
    for i in 0..30 {
        text.push_str(&format!("2020-01-{i:02},{}.5,{}\n", i, (i * 7) % 11));
    }
    fs::write(&path, &text).unwrap();

    let err = fails(&["fit", "-i", s(&path), "--date-column", "date", "--effect", "c"], 2);
    assert!(err.contains("column 'c' not found") && err.contains("a, b"), "{err}");

    let err = fails(&["fit", "-i", s(&path)], 2);
    assert!(err.contains("non-numeric value '2020-01-00'"), "{err}");
    assert!(err.contains("column 'date'"), "{err}");

    let short = p(&dir, "short.csv");
    fs::write(&short, "a,b\n1,2\n3,4\n5,1\n").unwrap();
    let err = fails(&["fit", "-i", s(&short)], 2);
    assert!(err.contains("series too short"), "{err}");

    let err = fails(&["simulate", "--dgp", "P1", "--model", "m.json", "--T", "30"], 2);
    assert!(!err.is_empty());
    fails(&["simulate", "--dgp", "P7", "--T", "30"], 2);
    fails(&["fit", "-i", s(&p(&dir, "missing.csv"))], 2);
}

#[test]
fn seed_falls_back_to_the_environment() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_egc"));
        c.args(["simulate", "--dgp", "S1", "--T", "25"]);
        match env {
            Some(v) => c.env("EG_SEED", v),
            None => c.env_remove("EG_SEED"),
        };
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        String::from_utf8(c.output().unwrap().stdout).unwrap()
    };
    assert_eq!(run(Some("7"), None), run(None, Some("7")));
    assert_eq!(run(Some("7"), Some("3")), run(None, Some("3")));
    assert_ne!(run(Some("7"), None), run(None, None));
}

#[test]
fn test_results_do_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "d.csv");
    ok(&["simulate", "--dgp", "P2", "--T", "120", "--seed", "3", "-o", s(&data)]);
    let run = |threads: &str, out: &Path| {
        ok(&[
            "--threads", threads, "test", "-i", s(&data), "--taus", "0.1,0.9", "-n", "30", "-b", "8",
            "--pairwise", "-o", s(out),
        ])
    };
    let o1 = p(&dir, "r.json");
    let t1 = run("1", &o1);
    let first = fs::read(&o1).unwrap();
    let t2 = run("2", &o1);
    assert_eq!(t1, t2);
    assert_eq!(first, fs::read(&o1).unwrap());
    assert!(t1.contains("pairwise:y") && t1.contains("joint"));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(&o1).unwrap()).unwrap();
    assert_eq!(json["payload"]["rows"].as_array().unwrap().len(), 6);
}

#[test]
fn mc_output_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let run = |threads: &str, out: &Path| {
        ok(&[
            "--threads", threads, "mc", "--dgps", "S1,P3", "--taus", "0.5", "--lengths", "60",
            "-s", "3", "-b", "5", "-n", "20", "--tests", "joint,ftest", "--burn-in", "50", "--seed",
            "11", "-o", s(out),
        ])
    };
    let a = p(&dir, "mc.csv");
    run("1", &a);
    let bytes = fs::read_to_string(&a).unwrap();
    run("2", &a);
    assert_eq!(bytes, fs::read_to_string(&a).unwrap());
    let rows = data_lines(&bytes);
    assert_eq!(rows[0], "dgp,t,test,tau,replications,rejections,failures,rate,valid");
    assert_eq!(rows.len(), 1 + 2 * 2);
}
