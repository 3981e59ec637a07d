use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use carma_hawkes::diagnostics::{intensity_trace, summarize, write_trace_csv};
use carma_hawkes::model::validate as validate_spec;
use carma_hawkes::presets;
use carma_hawkes::thinning::{
    simulate_replications, EventLog, RunMetadata, SimulationError, SimulationOptions,
};
use carma_hawkes::{CarmaHawkes, ModelSpec};

pub const THREADS_ENV: &str = "CARMA_HAWKES_THREADS";

#[derive(Debug)]
pub enum Failure {
    /// Bad flags, unreadable or malformed files.
    Config(String),
    /// The model failed validation.
    Validation(String),
    /// An internal consistency check fired during simulation.
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Validation(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Validation(m) | Failure::Runtime(m) => m,
        }
    }
}

fn config<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> Failure + '_ {
    move |e| Failure::Config(format!("{context}: {e}"))
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: PathBuf,
    pub horizon: f64,
    pub seed: u64,
    pub replications: usize,
    pub output_dir: PathBuf,
    pub override_validation: bool,
    pub trace_step: Option<f64>,
}

fn read_spec(path: &Path) -> Result<ModelSpec, Failure> {
    let text = fs::read_to_string(path).map_err(config(&path.display().to_string()))?;
    ModelSpec::from_json(&text).map_err(config(&path.display().to_string()))
}

fn build_model(spec: ModelSpec) -> Result<CarmaHawkes, Failure> {
    CarmaHawkes::new(spec).map_err(|e| Failure::Validation(e.to_string()))
}

fn check_horizon(horizon: f64) -> Result<(), Failure> {
    if horizon.is_finite() && horizon > 0.0 {
        Ok(())
    } else {
        Err(Failure::Config(format!("horizon must be finite and positive, got {horizon}")))
    }
}

fn thread_count() -> Result<usize, Failure> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|e| Failure::Config(format!("{THREADS_ENV}={v}: {e}"))),
        Err(_) => Ok(0),
    }
}

fn issues_json(model: &CarmaHawkes) -> String {
    serde_json::to_string(&model.report().issues).expect("issues serialize")
}

fn simulation_failure(e: SimulationError) -> Failure {
    match e {
        SimulationError::HorizonNonPositive(_) => Failure::Config(e.to_string()),
        SimulationError::NonStationarySpec(_) | SimulationError::NonDecayingBound(_) => {
            Failure::Validation(e.to_string())
        }
        SimulationError::BoundViolation { .. } | SimulationError::Model(_) => {
            Failure::Runtime(e.to_string())
        }
    }
}

fn write_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> std::io::Result<()>) -> Result<(), Failure> {
    let file = File::create(path).map_err(config(&path.display().to_string()))?;
    f(BufWriter::new(file)).map_err(config(&path.display().to_string()))
}

pub fn simulate(cfg: &RunConfig) -> Result<(), Failure> {
    check_horizon(cfg.horizon)?;
    if cfg.replications == 0 {
        return Err(Failure::Config("--reps must be at least 1".into()));
    }
    if let Some(dt) = cfg.trace_step {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Failure::Config(format!("--trace-intensity must be positive, got {dt}")));
        }
    }
    let threads = thread_count()?;
    let model = build_model(read_spec(&cfg.model)?)?;
    if !model.is_admissible() && !cfg.override_validation {
        return Err(Failure::Validation(format!(
            "model failed validation (use --force to simulate anyway): {}",
            issues_json(&model)
        )));
    }
    fs::create_dir_all(&cfg.output_dir).map_err(config(&cfg.output_dir.display().to_string()))?;

    let opts = SimulationOptions {
        override_validation: cfg.override_validation,
    };
    let logs = simulate_replications(&model, cfg.horizon, cfg.seed, cfg.replications, threads, opts);
    for (k, log) in logs.into_iter().enumerate() {
        let log = log.map_err(simulation_failure)?;
        let csv = cfg.output_dir.join(format!("events_{k}.csv"));
        write_file(&csv, |w| {
            log.write_csv(w).map_err(|e| std::io::Error::other(e.to_string()))
        })?;
        let meta = cfg.output_dir.join(format!("events_{k}.json"));
        fs::write(&meta, log.meta.to_json() + "\n").map_err(config(&meta.display().to_string()))?;
        if let Some(dt) = cfg.trace_step {
            let trace = intensity_trace(&model, &log, dt).map_err(|e| Failure::Runtime(e.to_string()))?;
            let path = cfg.output_dir.join(format!("trace_{k}.csv"));
            write_file(&path, |w| write_trace_csv(&trace, w))?;
        }
        println!(
            "replication {k}: seed {} events {} proposed {} acceptance {:.4} -> {}",
            log.meta.seed.unwrap_or_default(),
            log.len(),
            log.meta.proposed,
            log.meta.acceptance_ratio,
            csv.display()
        );
    }
    Ok(())
}

pub fn validate(path: &Path) -> Result<(), Failure> {
    let spec = read_spec(path)?;
    let report = validate_spec(&spec);
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    if report.is_admissible() {
        Ok(())
    } else {
        Err(Failure::Validation("model is not admissible".into()))
    }
}

/// Reads an event CSV and its metadata sidecar (`<stem>.json`), if present.
pub fn read_events(events: &Path, horizon: Option<f64>) -> Result<EventLog, Failure> {
    let sidecar = events.with_extension("json");
    let meta = if sidecar.exists() {
        let text = fs::read_to_string(&sidecar).map_err(config(&sidecar.display().to_string()))?;
        Some(RunMetadata::from_json(&text).map_err(config(&sidecar.display().to_string()))?)
    } else {
        None
    };
    let horizon = match (horizon, &meta) {
        (Some(h), _) => h,
        (None, Some(m)) => m.horizon,
        (None, None) => {
            return Err(Failure::Config(format!(
                "no metadata file {}; pass --horizon",
                sidecar.display()
            )))
        }
    };
    check_horizon(horizon)?;
    let file = File::open(events).map_err(config(&events.display().to_string()))?;
    let mut log = EventLog::read_csv(file, horizon).map_err(config(&events.display().to_string()))?;
    if let Some(mut m) = meta {
        m.horizon = horizon;
        log.meta = m;
    }
    Ok(log)
}

pub fn diagnose(model: &Path, events: &Path, horizon: Option<f64>, out: &Path) -> Result<(), Failure> {
    let model = build_model(read_spec(model)?)?;
    let log = read_events(events, horizon)?;
    let (report, residuals) = summarize(&model, &log).map_err(|e| Failure::Config(e.to_string()))?;
    fs::create_dir_all(out).map_err(config(&out.display().to_string()))?;
    let json = report.to_json();
    let report_path = out.join("report.json");
    fs::write(&report_path, json.clone() + "\n").map_err(config(&report_path.display().to_string()))?;
    for series in &residuals {
        let path = out.join(format!("residuals_{}.csv", series.component));
        write_file(&path, |w| series.write_csv(w))?;
    }
    println!("{json}");
    Ok(())
}

pub fn bench(models: &[PathBuf], horizon: f64, reps: usize, seed: u64, force: bool) -> Result<(), Failure> {
    check_horizon(horizon)?;
    if reps == 0 {
        return Err(Failure::Config("--reps must be at least 1".into()));
    }
    let threads = thread_count()?;
    // built-in sets are known; the ones with negative kernels run with override
    let targets: Vec<(String, ModelSpec, bool)> = if models.is_empty() {
        presets::all()
            .into_iter()
            .map(|(name, spec)| (name.to_string(), spec, true))
            .collect()
    } else {
        models
            .iter()
            .map(|p| Ok((p.display().to_string(), read_spec(p)?, force)))
            .collect::<Result<_, Failure>>()?
    };
    println!(
        "{:<24} {:>10} {:>14} {:>16} {:>11}",
        "model", "events", "events/sec", "proposals/sec", "acceptance"
    );
    for (name, spec, allow) in targets {
        let model = build_model(spec)?;
        if !model.is_admissible() && !allow {
            return Err(Failure::Validation(format!(
                "{name} failed validation (use --force): {}",
                issues_json(&model)
            )));
        }
        let opts = SimulationOptions {
            override_validation: allow,
        };
        let logs = simulate_replications(&model, horizon, seed, reps, threads, opts)
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
            .map_err(simulation_failure)?;
        let busy: f64 = logs.iter().map(|l| l.meta.wall_time_seconds).sum::<f64>().max(1e-12);
        let events: u64 = logs.iter().map(|l| l.meta.accepted).sum();
        let proposals: u64 = logs.iter().map(|l| l.meta.proposed).sum();
        let ratio = if proposals == 0 { 1.0 } else { events as f64 / proposals as f64 };
        println!(
            "{:<24} {:>10} {:>14.0} {:>16.0} {:>11.4}",
            name,
            events,
            events as f64 / busy,
            proposals as f64 / busy,
            ratio
        );
    }
    Ok(())
}
