use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use viscomem::presets;
use viscomem::solver::{CoefficientField, InitialData, ProblemConfig};

fn viscomem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viscomem"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A short, cheap version of the first example.
fn small_config() -> ProblemConfig {
    let mut c = presets::preset(1, Some(1.0)).unwrap().config;
    c.n_cells = 40;
    c.dt = 0.9 / 40.0;
    c.t_end = 20.0;
    c.record_stride = 2;
    c
}

fn write_config(dir: &TempDir, name: &str, config: &ProblemConfig) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, config.to_json()).unwrap();
    path
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_a_complete_output_directory() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "c.json", &small_config());
    let out = dir.path().join("out");
    let res = viscomem(&[
        "run",
        "--config",
        path_str(&config),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    for file in [
        "manifest.json",
        "config.json",
        "trace.csv",
        "gate.json",
        "kernel_analysis.json",
        "diagnostics.json",
    ] {
        assert!(out.join(file).is_file(), "missing {file}");
    }
    let manifest = read_json(out.join("manifest.json"));
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["deterministic"], true);
    let resolved = fs::read_to_string(out.join("config.json")).unwrap();
    assert_eq!(ProblemConfig::from_json(&resolved).unwrap(), small_config());
    assert_eq!(read_json(out.join("gate.json"))["verdict"], true);
    assert!(
        read_json(out.join("kernel_analysis.json"))["ell"]
            .as_f64()
            .unwrap()
            > 0.0
    );
    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n.to_string_lossy().contains("partial"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn identical_runs_give_identical_traces() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "c.json", &small_config());
    let outs = [dir.path().join("a"), dir.path().join("b")];
    for out in &outs {
        let res = viscomem(&["run", "--config", path_str(&config), "--out", path_str(out)]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
    }
    let a = fs::read(outs[0].join("trace.csv")).unwrap();
    let b = fs::read(outs[1].join("trace.csv")).unwrap();
    assert_eq!(a, b);
    // the resolved config reproduces the run as well
    let again = dir.path().join("c");
    let res = viscomem(&[
        "run",
        "--config",
        path_str(&outs[0].join("config.json")),
        "--out",
        path_str(&again),
    ]);
    assert_eq!(code(&res), 0);
    assert_eq!(fs::read(again.join("trace.csv")).unwrap(), a);
}

#[test]
fn existing_output_directory_is_refused() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "c.json", &small_config());
    let out = dir.path().join("out");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("keep.txt"), "x").unwrap();
    let res = viscomem(&[
        "run",
        "--config",
        path_str(&config),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("not empty"));
    assert_eq!(fs::read_to_string(out.join("keep.txt")).unwrap(), "x");
}

#[test]
fn missing_config_names_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nowhere.json");
    let out = dir.path().join("out");
    let res = viscomem(&[
        "run",
        "--config",
        path_str(&missing),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("nowhere.json"), "{}", stderr(&res));
    assert!(!out.exists());
}

#[test]
fn malformed_config_reports_the_line() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\n  \"length\": 1,\n  \"n_cells\": true\n}\n").unwrap();
    let res = viscomem(&[
        "run",
        "--config",
        path_str(&path),
        "--out",
        path_str(&dir.path().join("o")),
    ]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("line 3"), "{}", stderr(&res));
}

#[test]
fn dt_above_the_cfl_bound_is_rejected() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "c.json", &small_config());
    let res = viscomem(&[
        "run",
        "--config",
        path_str(&config),
        "--out",
        path_str(&dir.path().join("o")),
        "--dt",
        "0.05",
    ]);
    assert_eq!(code(&res), 1);
    let err = stderr(&res);
    assert!(err.contains("CFL") && err.contains("0.0225"), "{err}");
}

#[test]
fn assumption_violations_need_force() {
    let dir = TempDir::new().unwrap();
    let mut c = small_config();
    c.memory_coef = CoefficientField::constant(0.0);
    c.damping_coef = CoefficientField::constant(0.0);
    let config = write_config(&dir, "c.json", &c);
    let args = |out: &str| {
        vec![
            "run".to_string(),
            "--config".into(),
            path_str(&config).into(),
            "--out".into(),
            path_str(&dir.path().join(out)).into(),
        ]
    };
    let res = viscomem(&args("a").iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("assumption violated"));
    let mut forced = args("b");
    forced.push("--force".into());
    let res = viscomem(&forced.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&res), 0, "{}", stderr(&res));
}

#[test]
fn blow_up_exits_with_two_and_keeps_the_trace() {
    let dir = TempDir::new().unwrap();
    let mut c = small_config();
    c.kernel = None;
    c.memory_coef = CoefficientField::constant(0.0);
    c.damping_coef = CoefficientField::constant(0.0);
    c.source_coef = CoefficientField::constant(1.0);
    c.p = 4.0;
    c.initial_u = InitialData::Sine {
        amplitude: 20.0,
        mode: 1,
    };
    let config = write_config(&dir, "c.json", &c);
    let out = dir.path().join("out");
    let res = viscomem(&[
        "run",
        "--config",
        path_str(&config),
        "--out",
        path_str(&out),
        "--force",
    ]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));
    assert!(String::from_utf8_lossy(&res.stdout).contains("BLOW-UP"));
    assert!(out.join("trace.csv").is_file());
}

fn kernel_file(dir: &TempDir, json: &str) -> PathBuf {
    let path = dir.path().join("kernel.json");
    fs::write(&path, json).unwrap();
    path
}

#[test]
fn analyze_kernel_reports_convexity_verdicts() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (
            r#"{"family": "shifted-exponential", "alpha": 0.1, "beta": 1}"#,
            "linear",
        ),
        (
            r#"{"family": "power-law", "alpha": 0.05, "beta": 2}"#,
            "power",
        ),
    ];
    for (i, (json, map)) in cases.iter().enumerate() {
        let path = kernel_file(&dir, json);
        let out = dir.path().join(format!("k{i}"));
        let res = viscomem(&[
            "analyze-kernel",
            "--config",
            path_str(&path),
            "--out",
            path_str(&out),
        ]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        let report = read_json(out.join("kernel_analysis.json"));
        assert_eq!(report["convexity_inequality"]["pass"], true);
        assert_eq!(report["convexity"]["g"]["kind"], *map);
        assert_eq!(report["m_table"].as_array().unwrap().len(), 4);
    }
    let report = read_json(dir.path().join("k1/kernel_analysis.json"));
    assert_eq!(report["convexity"]["g"]["exponent"], 1.5);
    assert!((report["ell"].as_f64().unwrap() - 0.95).abs() < 1e-12);
}

#[test]
fn analyze_kernel_rejects_non_integrable_tail() {
    let dir = TempDir::new().unwrap();
    let path = kernel_file(
        &dir,
        r#"{"family": "power-law", "alpha": 0.05, "beta": 0.5}"#,
    );
    let out = dir.path().join("k");
    let res = viscomem(&[
        "analyze-kernel",
        "--config",
        path_str(&path),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&res), 1);
    assert!(!out.exists());
}

fn write_trace(dir: &TempDir, energy: impl Fn(f64) -> f64) -> PathBuf {
    let mut text = String::from(
        "t,E,bbE,Lambda,f_circ_grad,mu,dissipation_residual,F3,source_term,l2_u,l2_ut\n",
    );
    for i in 0..400 {
        let t = 0.5 * i as f64;
        let e = energy(t);
        text.push_str(&format!("{t},{e},{e},0,0,0,0,0,0,0,0\n"));
    }
    let path = dir.path().join("trace.csv");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn fit_recovers_a_synthetic_polynomial_rate() {
    let dir = TempDir::new().unwrap();
    let trace = write_trace(&dir, |t| 2.0 * (1.0 + t).powf(-0.8));
    let out = dir.path().join("fit");
    let res = viscomem(&["fit", path_str(&trace), "--out", path_str(&out), "--q", "2"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let report = read_json(out.join("decay_report.json"));
    assert_eq!(report["selected_model"], "polynomial");
    assert!((report["poly_fit"]["alpha"].as_f64().unwrap() - 0.8).abs() < 1e-6);
}

#[test]
fn fit_rejects_empty_and_malformed_traces() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let res = viscomem(&[
        "fit",
        path_str(&empty),
        "--out",
        path_str(&dir.path().join("a")),
    ]);
    assert_eq!(code(&res), 1);

    let bad = dir.path().join("bad.csv");
    fs::write(
        &bad,
        "t,E,bbE,Lambda,f_circ_grad,mu,dissipation_residual,F3,source_term,l2_u,l2_ut\n0,1,1,0,0,0,0,0,0,0,0\n1,oops,1,0,0,0,0,0,0,0,0\n",
    )
    .unwrap();
    let res = viscomem(&[
        "fit",
        path_str(&bad),
        "--out",
        path_str(&dir.path().join("b")),
    ]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("row 3"), "{}", stderr(&res));
}

#[test]
fn reproduce_then_fit_selects_exponential_decay() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("ex1");
    let res = viscomem(&[
        "reproduce",
        "1",
        "--out",
        path_str(&out),
        "--cells",
        "100",
        "--t-end",
        "40",
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("all envelope checks pass"), "{stdout}");
    let report = read_json(out.join("decay_report.json"));
    assert_eq!(report["selected_model"], "exponential");
    assert!(report["envelope_verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .all(|v| v["pass"] == true));
    assert_eq!(read_json(out.join("manifest.json"))["preset"], "example-1");

    let refit = dir.path().join("refit");
    let res = viscomem(&[
        "fit",
        path_str(&out.join("trace.csv")),
        "--out",
        path_str(&refit),
        "--config",
        path_str(&out.join("config.json")),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(
        read_json(refit.join("decay_report.json"))["selected_model"],
        "exponential"
    );
}

#[test]
fn sweep_writes_one_directory_per_example() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep");
    let res = viscomem(&[
        "reproduce",
        "--sweep",
        "1",
        "2",
        "--out",
        path_str(&out),
        "--cells",
        "32",
        "--t-end",
        "20",
    ]);
    assert!(matches!(code(&res), 0 | 3), "{}", stderr(&res));
    for id in [1, 2] {
        assert!(out
            .join(format!("example-{id}/decay_report.json"))
            .is_file());
    }
    assert!(!out.join("example-3").exists());
}

#[test]
fn reproduce_needs_sweep_for_several_ids() {
    let dir = TempDir::new().unwrap();
    let res = viscomem(&[
        "reproduce",
        "1",
        "2",
        "--out",
        path_str(&dir.path().join("o")),
    ]);
    assert_eq!(code(&res), 1);
    let res = viscomem(&["reproduce", "4", "--out", path_str(&dir.path().join("o"))]);
    assert_ne!(code(&res), 0);
}
