use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use carma_hawkes::diagnostics::summarize;
use carma_hawkes::thinning::{simulate_seeded, EventLog, RunMetadata, SimulationOptions};
use carma_hawkes::CarmaHawkes;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_carma-hawkes"));
    cmd.env_remove("CARMA_HAWKES_THREADS");
    cmd
}

fn model_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models").join(format!("{name}.json"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn simulate(name: &str, horizon: &str, seed: &str, reps: &str, dir: &Path, extra: &[&str]) -> Output {
    run(bin()
        .args(["simulate", "--model"])
        .arg(model_path(name))
        .args(["--horizon", horizon, "--seed", seed, "--reps", reps, "--out"])
        .arg(dir)
        .args(extra))
}

fn write_model(dir: &Path, json: &str) -> PathBuf {
    let path = dir.join("model.json");
    fs::write(&path, json).unwrap();
    path
}

#[test]
fn model_files_match_builtin_sets() {
    for (name, spec) in carma_hawkes::presets::all() {
        let text = fs::read_to_string(model_path(name)).unwrap();
        let parsed = carma_hawkes::ModelSpec::from_json(&text).unwrap();
        assert_eq!(parsed.hash(), spec.hash(), "{name}");
    }
}

#[test]
fn simulate_hawkes_writes_events_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate("hawkes", "10000", "42", "1", dir.path(), &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("events_0.csv")).unwrap();
    assert!(csv.starts_with("time,mark\n"));
    let rows = csv.lines().count() - 1;
    assert!((rows as f64 / 4500.0 - 1.0).abs() < 0.1, "{rows} rows");
    let meta = RunMetadata::from_json(&fs::read_to_string(dir.path().join("events_0.json")).unwrap()).unwrap();
    assert_eq!(meta.seed, Some(42));
    assert_eq!(meta.horizon, 10000.0);
    assert_eq!(meta.accepted as usize, rows);
    assert!(meta.acceptance_ratio > 0.0 && meta.acceptance_ratio <= 1.0);
}

#[test]
fn simulate_is_reproducible_and_thread_independent() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate("bivariate_cross_21", "500", "9", "4", a.path(), &[])), 0);
    let out = run(bin()
        .env("CARMA_HAWKES_THREADS", "1")
        .args(["simulate", "--model"])
        .arg(model_path("bivariate_cross_21"))
        .args(["--horizon", "500", "--seed", "9", "--reps", "4", "--out"])
        .arg(b.path()));
    assert_eq!(code(&out), 0);
    for k in 0..4 {
        let name = format!("events_{k}.csv");
        let x = fs::read(a.path().join(&name)).unwrap();
        assert_eq!(x, fs::read(b.path().join(&name)).unwrap(), "{name}");
    }
    let meta = RunMetadata::from_json(&fs::read_to_string(a.path().join("events_3.json")).unwrap()).unwrap();
    assert_eq!(meta.seed, Some(12));
}

#[test]
fn simulate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate("hawkes", "-1", "1", "1", dir.path(), &[])), 2);
    assert_eq!(code(&simulate("hawkes", "10", "1", "0", dir.path(), &[])), 2);
    let missing = run(bin().args(["simulate", "--model", "/nonexistent.json", "--horizon", "1"]));
    assert_eq!(code(&missing), 2);

    let explosive = write_model(dir.path(), r#"{"type":"univariate","mu":0.3,"a":[2.0],"b":[3.0]}"#);
    let cmd = |extra: &[&str]| {
        run(bin()
            .args(["simulate", "--model"])
            .arg(&explosive)
            .args(["--horizon", "5", "--out"])
            .arg(dir.path())
            .args(extra))
    };
    assert_eq!(code(&cmd(&[])), 3);
    assert_eq!(code(&cmd(&["--force"])), 0);

    let negative = simulate("bivariate_cross_12", "50", "1", "1", dir.path(), &[]);
    assert_eq!(code(&negative), 3);
    assert!(String::from_utf8_lossy(&negative.stderr).contains("KernelNegative"));
    assert_eq!(code(&simulate("bivariate_cross_12", "50", "1", "1", dir.path(), &["--force"])), 0);

    let malformed = write_model(dir.path(), r#"{"type":"univariate","mu":0.3}"#);
    let out = run(bin().args(["simulate", "--model"]).arg(&malformed).args(["--horizon", "5"]));
    assert_eq!(code(&out), 2);
    let out = run(bin()
        .env("CARMA_HAWKES_THREADS", "many")
        .args(["simulate", "--model"])
        .arg(model_path("hawkes"))
        .args(["--horizon", "5", "--out"])
        .arg(dir.path()));
    assert_eq!(code(&out), 2);
}

#[test]
fn trace_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate("carma21", "20", "3", "1", dir.path(), &["--trace-intensity", "0.5"]);
    assert_eq!(code(&out), 0);
    let trace = fs::read_to_string(dir.path().join("trace_0.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("time,lambda_1,bound"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 41);
    for r in &rows {
        assert!(r[1] <= r[2] + 1e-9);
    }
    assert_eq!(code(&simulate("carma21", "20", "3", "1", dir.path(), &["--trace-intensity", "0"])), 2);
}

#[test]
fn validate_reports_and_exit_codes() {
    let out = run(bin().args(["validate", "--model"]).arg(model_path("carma21")));
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["branching"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((v["bound_constants"][0].as_f64().unwrap() - 1.140175).abs() < 1e-6);

    let out = run(bin().args(["validate", "--model"]).arg(model_path("hawkes")));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["decay"].as_f64(), Some(-3.0));

    let dir = tempfile::tempdir().unwrap();
    let degenerate = write_model(dir.path(), r#"{"type":"univariate","mu":0.3,"a":[2.0,1.0],"b":[1.0]}"#);
    let out = run(bin().args(["validate", "--model"]).arg(&degenerate));
    assert_eq!(code(&out), 3);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["issues"][0]["kind"], "DegenerateEigenvalues");

    let garbage = write_model(dir.path(), "{not json");
    assert_eq!(code(&run(bin().args(["validate", "--model"]).arg(&garbage))), 2);
}

#[test]
fn diagnose_round_trip_matches_in_process_report() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate("bivariate_cross_21", "3000", "5", "1", dir.path(), &[])), 0);
    let report_dir = dir.path().join("diag");
    let out = run(bin()
        .args(["diagnose", "--model"])
        .arg(model_path("bivariate_cross_21"))
        .arg("--events")
        .arg(dir.path().join("events_0.csv"))
        .arg("--out")
        .arg(&report_dir));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let written = fs::read_to_string(report_dir.join("report.json")).unwrap();

    // the same computation on the files as written
    let model = CarmaHawkes::new(carma_hawkes::presets::bivariate_cross_21()).unwrap();
    let mut log = EventLog::read_csv(fs::File::open(dir.path().join("events_0.csv")).unwrap(), 3000.0).unwrap();
    log.meta = RunMetadata::from_json(&fs::read_to_string(dir.path().join("events_0.json")).unwrap()).unwrap();
    let (report, residuals) = summarize(&model, &log).unwrap();
    assert_eq!(written.trim_end(), report.to_json());

    // and on the unrounded in-process log
    let raw = simulate_seeded(&model, 3000.0, 5, SimulationOptions::default()).unwrap();
    let (direct, _) = summarize(&model, &raw).unwrap();
    for (a, b) in report.components.iter().zip(&direct.components) {
        assert_eq!(a.n_events, b.n_events);
        assert!((a.ks_statistic.unwrap() - b.ks_statistic.unwrap()).abs() < 1e-9);
        assert!(a.ks_p_value.unwrap() > 0.0);
    }

    let taus = fs::read_to_string(report_dir.join("residuals_2.csv")).unwrap();
    assert!(taus.starts_with("tau\n"));
    assert_eq!(taus.lines().count() - 1, residuals[1].len());
}

#[test]
fn diagnose_empty_and_mismatched_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("empty.csv");
    fs::write(&events, "time,mark\n").unwrap();
    let out = run(bin()
        .args(["diagnose", "--model"])
        .arg(model_path("hawkes"))
        .arg("--events")
        .arg(&events)
        .args(["--horizon", "100", "--out"])
        .arg(dir.path()));
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["n_events"], 0);
    assert!(v[0]["ks_p_value"].is_null());

    // no sidecar and no horizon
    let out = run(bin().args(["diagnose", "--model"]).arg(model_path("hawkes")).arg("--events").arg(&events));
    assert_eq!(code(&out), 2);

    assert_eq!(code(&simulate("hawkes", "100", "1", "1", dir.path(), &[])), 0);
    let out = run(bin()
        .args(["diagnose", "--model"])
        .arg(model_path("carma21"))
        .arg("--events")
        .arg(dir.path().join("events_0.csv"))
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("spec"));
}

#[test]
fn bench_reports_acceptance_ratios() {
    let out = run(bin()
        .args(["bench", "--model"])
        .arg(model_path("hawkes"))
        .arg("--model")
        .arg(model_path("carma21"))
        .args(["--horizon", "2000", "--reps", "2"]));
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let ratios: Vec<f64> = stdout
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().last().unwrap().parse().unwrap())
        .collect();
    assert_eq!(ratios.len(), 2);
    assert!(ratios.iter().all(|&r| r > 0.0 && r <= 1.0));
    assert!(ratios[0] > ratios[1], "{stdout}");

    let out = run(bin().args(["bench", "--horizon", "100", "--reps", "0"]));
    assert_eq!(code(&out), 2);
    let out = run(bin().args(["bench", "--horizon", "200", "--reps", "1"]));
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 7);
}
