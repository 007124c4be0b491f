//! Batch entry points behind the `aeromanip` binary: run scenarios to CSV and
//! metrics files, compare controller modes on one scenario, and report the
//! actuation properties of a rotor layout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, Vector6};

use crate::allocation::{actuation_rank, body_wrench_limits, coupling_matrix};
use crate::config::{load_model, load_scenario};
use crate::control::ControlMode;
use crate::dynamics::SystemModel;
use crate::error::{Error, Result};
use crate::sim::metrics::AXIS_NAMES;
use crate::sim::{compute_metrics, run_scenario, Metrics, ScenarioConfig, SimLog};

/// Everything `run` needs. Paths are checked when the manifest is built.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub model: PathBuf,
    pub scenarios: Vec<PathBuf>,
    pub out_dir: PathBuf,
    /// Replaces every scenario's seed.
    pub seed: Option<u64>,
    /// Replaces every scenario's controller mode.
    pub mode: Option<ControlMode>,
    /// Scenarios run concurrently; at least 1.
    pub jobs: usize,
}

impl RunManifest {
    pub fn new(model: PathBuf, scenarios: Vec<PathBuf>, out_dir: PathBuf) -> Result<Self> {
        for p in std::iter::once(&model).chain(&scenarios) {
            if !p.is_file() {
                return Err(Error::Io { path: p.clone(), source: std::io::ErrorKind::NotFound.into() });
            }
        }
        if scenarios.is_empty() {
            return Err(Error::InvalidScenario("no scenario files given".into()));
        }
        Ok(Self { model, scenarios, out_dir, seed: None, mode: None, jobs: 1 })
    }
}

/// Result of one scenario of a batch.
#[derive(Debug)]
pub struct RunOutcome {
    pub scenario: PathBuf,
    /// Output stem, the scenario file stem.
    pub stem: String,
    pub result: Result<Metrics>,
}

/// Outcomes of a batch, in manifest order.
#[derive(Debug)]
pub struct RunReport {
    pub outcomes: Vec<RunOutcome>,
}

impl RunReport {
    /// True when every scenario completed.
    pub fn success(&self) -> bool {
        self.outcomes.iter().all(|o| o.result.is_ok())
    }

    /// Process exit status: 0 iff every scenario completed.
    pub fn exit_code(&self) -> u8 {
        if self.success() {
            0
        } else {
            1
        }
    }
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
}

/// Writes `bytes` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

/// Scenario with the manifest overrides applied.
fn prepared(path: &Path, seed: Option<u64>, mode: Option<ControlMode>) -> Result<ScenarioConfig> {
    let mut cfg = load_scenario(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(mode) = mode {
        cfg.mode = mode;
    }
    Ok(cfg)
}

/// Metrics summary with the run identity prepended.
pub fn metrics_text(cfg: &ScenarioConfig, metrics: &Metrics) -> String {
    format!("scenario = {}\nmode = {}\nseed = {}\n{}", cfg.name, cfg.mode.as_str(), cfg.seed, metrics.to_key_values())
}

fn run_one(model: &SystemModel, path: &Path, m: &RunManifest) -> Result<Metrics> {
    let cfg = prepared(path, m.seed, m.mode)?;
    let log = run_scenario(&cfg, model)?;
    let metrics = compute_metrics(&log, &cfg);
    let stem = stem_of(path);
    write_atomic(&m.out_dir.join(format!("{stem}.csv")), log.to_csv_string().as_bytes())?;
    write_atomic(&m.out_dir.join(format!("{stem}.metrics")), metrics_text(&cfg, &metrics).as_bytes())?;
    Ok(metrics)
}

/// Runs every scenario of the manifest, writing `<stem>.csv` and
/// `<stem>.metrics` into the output directory. A failing scenario does not
/// stop the others. Model and directory errors abort the whole batch.
pub fn cmd_run(m: &RunManifest) -> Result<RunReport> {
    let model = load_model(&m.model)?;
    std::fs::create_dir_all(&m.out_dir).map_err(|source| Error::Io { path: m.out_dir.clone(), source })?;
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<Metrics>>> = (0..m.scenarios.len()).map(|_| None).collect();
    let workers = m.jobs.clamp(1, m.scenarios.len());
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(path) = m.scenarios.get(i) else { break };
                        done.push((i, run_one(&model, path, m)));
                    }
                    done
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("scenario worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    let outcomes = m
        .scenarios
        .iter()
        .zip(slots)
        .map(|(p, r)| RunOutcome { scenario: p.clone(), stem: stem_of(p), result: r.expect("every index is claimed once") })
        .collect();
    Ok(RunReport { outcomes })
}

/// Paired same-seed runs of one scenario under several controller modes.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub scenario: String,
    pub modes: Vec<ControlMode>,
    pub metrics: Vec<Metrics>,
    pub logs: Vec<SimLog>,
}

impl Comparison {
    /// Table with one row per (metric, mode) and one column per axis.
    pub fn table(&self) -> String {
        let mut s = format!("{:<14} {:<10}", "metric", "mode");
        for a in AXIS_NAMES {
            let _ = write!(s, " {a:>12}");
        }
        s.push('\n');
        type Pick = fn(&crate::sim::AxisMetrics) -> Option<f64>;
        let rows: [(&str, Pick); 4] = [
            ("rms_final", |a| Some(a.rms_final)),
            ("steady_error", |a| Some(a.steady_error)),
            ("overshoot_pct", |a| a.overshoot_pct),
            ("settling_s", |a| a.settling_time),
        ];
        for (name, pick) in rows {
            for (mode, m) in self.modes.iter().zip(&self.metrics) {
                let _ = write!(s, "{name:<14} {:<10}", mode.as_str());
                for axis in &m.axes {
                    match pick(axis) {
                        Some(v) => {
                            let _ = write!(s, " {v:>12.6}");
                        }
                        None => {
                            let _ = write!(s, " {:>12}", "none");
                        }
                    }
                }
                s.push('\n');
            }
        }
        s
    }
}

/// Runs `scenario` once per mode with identical seed and parameters. With an
/// output directory, each log is written as `<stem>.<mode>.csv`.
pub fn cmd_compare(
    model_path: &Path,
    scenario: &Path,
    modes: &[ControlMode],
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<Comparison> {
    let model = load_model(model_path)?;
    let base = prepared(scenario, seed, None)?;
    let mut metrics = Vec::new();
    let mut logs = Vec::new();
    for &mode in modes {
        let cfg = ScenarioConfig { mode, ..base.clone() };
        let log = run_scenario(&cfg, &model)?;
        metrics.push(compute_metrics(&log, &cfg));
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
            let path = dir.join(format!("{}.{}.csv", stem_of(scenario), mode.as_str()));
            write_atomic(&path, log.to_csv_string().as_bytes())?;
        }
        logs.push(log);
    }
    Ok(Comparison { scenario: base.name, modes: modes.to_vec(), metrics, logs })
}

/// Actuation properties of a rotor layout.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub coupling: DMatrix<f64>,
    pub rank: usize,
    pub condition: f64,
    /// Body-frame per-axis wrench envelope at the hover attitude.
    pub lower: Vector6<f64>,
    pub upper: Vector6<f64>,
}

impl std::fmt::Display for RankReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "coupling matrix (rows fx fy fz mx my mz, per unit squared speed):")?;
        for r in 0..self.coupling.nrows() {
            let row: Vec<String> = self.coupling.row(r).iter().map(|v| format!("{v:>13.5e}")).collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        writeln!(f, "rank = {}", self.rank)?;
        writeln!(f, "condition = {:e}", self.condition)?;
        writeln!(f, "fully_actuated = {}", self.rank == 6)?;
        for (k, name) in ["fx", "fy", "fz", "mx", "my", "mz"].iter().enumerate() {
            writeln!(f, "{name}: [{:.4}, {:.4}]", self.lower[k], self.upper[k])?;
        }
        Ok(())
    }
}

pub fn rank_report(model: &SystemModel) -> Result<RankReport> {
    model.rotors.validate()?;
    let (rank, condition) = actuation_rank(&model.rotors);
    let (lower, upper) = body_wrench_limits(&model.rotors);
    Ok(RankReport { coupling: coupling_matrix(&model.rotors), rank, condition, lower, upper })
}

pub fn cmd_rank(model_path: &Path) -> Result<RankReport> {
    rank_report(&load_model(model_path)?)
}
