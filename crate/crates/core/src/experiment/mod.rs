//! Batch experiments: runs, resumes, parameter sweeps and verification
//! suites, each writing plain-text artifacts into an output directory.

mod config;

pub use config::{ConfigError, ExperimentConfig, InitialData, Preset, CONFIG_KEYS};

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::field::GridSpec;
use crate::flow::{
    checkpoint_load, checkpoint_save, CheckpointError, FlowConfig, FlowEngine, FlowError,
    FlowOutcome, FlowState, MonitorRecord, MonitorSink, MONITOR_HEADER,
};
use crate::stats::least_squares_slope;
use crate::verify::{run_suite, ResidualReport, Suite, VerifyError};

pub const MONITORS_FILE: &str = "monitors.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.lmcf";
pub const CONFIG_FILE: &str = "config.txt";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const REPORTS_FILE: &str = "reports.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Converged,
    Error,
    TimedOut,
    Blowup,
    VerifyFailed,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Converged => 0,
            ExitStatus::Error => 1,
            ExitStatus::TimedOut => 2,
            ExitStatus::Blowup => 3,
            ExitStatus::VerifyFailed => 4,
        }
    }

    fn severity(self) -> u8 {
        match self {
            ExitStatus::Converged => 0,
            ExitStatus::TimedOut => 1,
            ExitStatus::Blowup => 2,
            ExitStatus::VerifyFailed => 3,
            ExitStatus::Error => 4,
        }
    }

    /// The more severe of two statuses; configuration and I/O errors rank
    /// above every run outcome.
    pub fn worst(self, other: ExitStatus) -> ExitStatus {
        if other.severity() > self.severity() {
            other
        } else {
            self
        }
    }

    pub fn of(outcome: &FlowOutcome) -> ExitStatus {
        match outcome {
            FlowOutcome::Converged(_) => ExitStatus::Converged,
            FlowOutcome::TimedOut(_) => ExitStatus::TimedOut,
            FlowOutcome::Blowup(_) => ExitStatus::Blowup,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Checkpoint {
        path: PathBuf,
        source: CheckpointError,
    },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a config file, or a built-in experiment when `source` names one
/// and no such file exists.
pub fn load_config(source: &str) -> Result<ExperimentConfig, ExperimentError> {
    let path = Path::new(source);
    if !path.exists() {
        if let Some(cfg) = ExperimentConfig::builtin(source) {
            return Ok(cfg);
        }
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(ExperimentConfig::parse(&text)?)
}

/// What a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: ExitStatus,
    pub outcome: String,
    pub records: Vec<MonitorRecord>,
    pub exploratory: bool,
    pub detail: String,
}

impl RunSummary {
    pub fn final_record(&self) -> Option<&MonitorRecord> {
        self.records.last()
    }

    /// Exponential rate of `sup|u|` over the whole run: the least-squares
    /// slope of its logarithm. A run that is converged at its first record
    /// is stationary and has rate 0; NaN when the series is not positive.
    pub fn fitted_rate(&self) -> f64 {
        if self.records.len() == 1 && self.status == ExitStatus::Converged {
            return 0.0;
        }
        if self.records.len() < 2 || self.records.iter().any(|r| !(r.max_u > 0.0)) {
            return f64::NAN;
        }
        let ts: Vec<f64> = self.records.iter().map(|r| r.t).collect();
        let logs: Vec<f64> = self.records.iter().map(|r| r.max_u.ln()).collect();
        least_squares_slope(&ts, &logs)
    }
}

/// Streams records to `monitors.csv` and the matching state to the
/// checkpoint, so an interrupted or failed run keeps its last sample.
struct FileSink {
    monitors: BufWriter<File>,
    monitors_path: PathBuf,
    checkpoint_path: PathBuf,
    kappa: f64,
    records: Vec<MonitorRecord>,
    error: Option<ExperimentError>,
}

impl MonitorSink for FileSink {
    fn observe(&mut self, state: &FlowState, record: &MonitorRecord) {
        self.records.push(*record);
        if self.error.is_some() {
            return;
        }
        if let Err(e) = writeln!(self.monitors, "{}", record.csv_row()) {
            self.error = Some(io_err(&self.monitors_path)(e));
            return;
        }
        if let Err(e) = checkpoint_save(&self.checkpoint_path, state.u(), state.t(), self.kappa) {
            self.error = Some(ExperimentError::Checkpoint {
                path: self.checkpoint_path.clone(),
                source: e,
            });
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), ExperimentError> {
    fs::write(path, text).map_err(io_err(path))
}

fn drive(
    cfg: &ExperimentConfig,
    engine: &FlowEngine,
    state: FlowState,
    out: &Path,
    exploratory: bool,
) -> Result<RunSummary, ExperimentError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    write_file(&out.join(CONFIG_FILE), &cfg.to_text())?;
    let monitors_path = out.join(MONITORS_FILE);
    let file = File::create(&monitors_path).map_err(io_err(&monitors_path))?;
    let mut monitors = BufWriter::new(file);
    writeln!(monitors, "{MONITOR_HEADER}").map_err(io_err(&monitors_path))?;
    let mut sink = FileSink {
        monitors,
        monitors_path: monitors_path.clone(),
        checkpoint_path: out.join(CHECKPOINT_FILE),
        kappa: engine.config().kappa,
        records: Vec::new(),
        error: None,
    };
    let outcome = engine.integrate_from(state, &mut sink);
    if let Some(e) = sink.error.take() {
        return Err(e);
    }
    sink.monitors.flush().map_err(io_err(&monitors_path))?;
    let status = ExitStatus::of(&outcome);
    let detail = match &outcome {
        FlowOutcome::Blowup(b) => b.to_string(),
        other => format!("t = {:e}", other.state().map_or(f64::NAN, FlowState::t)),
    };
    let summary = RunSummary {
        status,
        outcome: outcome.label().to_string(),
        records: sink.records,
        exploratory,
        detail,
    };
    write_file(&out.join(SUMMARY_FILE), &summary_text(&summary))?;
    Ok(summary)
}

fn summary_text(s: &RunSummary) -> String {
    let mut lines = vec![
        format!("outcome = {}", s.outcome),
        format!("exit_code = {}", s.status.code()),
        format!("exploratory = {}", s.exploratory),
        format!("records = {}", s.records.len()),
        format!("detail = {}", s.detail),
    ];
    if let (Some(first), Some(last)) = (s.records.first(), s.records.last()) {
        lines.push(format!("t_start = {:e}", first.t));
        lines.push(format!("t_end = {:e}", last.t));
        lines.push(format!("psi_max_initial = {:e}", first.psi_max));
        lines.push(format!("psi_max_final = {:e}", last.psi_max));
        lines.push(format!("max_du_final = {:e}", last.max_du));
        lines.push(format!("max_d2u_final = {:e}", last.max_d2u));
        lines.push(format!("volume_final = {:e}", last.volume));
    }
    lines.push(format!("sup_u_rate = {:e}", s.fitted_rate()));
    lines.join("\n") + "\n"
}

/// Integrates `cfg` from its initial data, writing `config.txt`,
/// `monitors.csv`, `checkpoint.lmcf` and `summary.txt` into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary, ExperimentError> {
    let engine = FlowEngine::new(cfg.flow.clone())?;
    let u0 = cfg.initial.sample(&cfg.flow)?;
    let exploratory = cfg.is_exploratory(&u0);
    if exploratory {
        log::warn!("initial data is outside the small-data regime; results are exploratory");
    }
    let state = engine.initial_state(u0)?;
    drive(cfg, &engine, state, out, exploratory)
}

/// Continues from a checkpoint. Flow parameters come from `config` when
/// given, else from a `config.txt` beside the checkpoint, else from the
/// defaults; the grid and κ always come from the checkpoint.
pub fn resume_experiment(
    checkpoint: &Path,
    out: &Path,
    config: Option<ExperimentConfig>,
    t_max: Option<f64>,
) -> Result<RunSummary, ExperimentError> {
    let cp = checkpoint_load(checkpoint).map_err(|source| ExperimentError::Checkpoint {
        path: checkpoint.to_path_buf(),
        source,
    })?;
    let sibling = checkpoint.parent().map(|p| p.join(CONFIG_FILE));
    let mut cfg = match (config, sibling) {
        (Some(c), _) => c,
        (None, Some(p)) if p.exists() => {
            let text = fs::read_to_string(&p).map_err(io_err(&p))?;
            ExperimentConfig::parse(&text)?
        }
        _ => ExperimentConfig {
            flow: FlowConfig::new(cp.u.spec().clone()),
            initial: InitialData {
                preset: Preset::Constant,
                amplitude: 0.0,
                seed: 0,
                modes: 1,
            },
        },
    };
    if cfg.flow.grid != *cp.u.spec() {
        return Err(ConfigError::Invalid(format!(
            "checkpoint grid {:?} does not match config grid {:?}",
            cp.u.spec().sizes(),
            cfg.flow.grid.sizes()
        ))
        .into());
    }
    if cfg.flow.kappa != cp.kappa {
        log::warn!(
            "using kappa = {} from the checkpoint (config has {})",
            cp.kappa,
            cfg.flow.kappa
        );
        cfg.flow.kappa = cp.kappa;
    }
    if let Some(t) = t_max {
        cfg.flow.t_max = t;
    }
    let engine = FlowEngine::new(cfg.flow.clone())?;
    let exploratory = cfg.is_exploratory(&cp.u);
    let state = engine.state_at(cp.u, cp.t)?;
    drive(&cfg, &engine, state, out, exploratory)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// `u0_amplitude`.
    Epsilon,
    Kappa,
    /// Grid points on every axis.
    N,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Epsilon => "epsilon",
            SweepParam::Kappa => "kappa",
            SweepParam::N => "N",
        })
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "epsilon" => Ok(SweepParam::Epsilon),
            "kappa" => Ok(SweepParam::Kappa),
            "N" | "n" => Ok(SweepParam::N),
            other => Err(format!(
                "unknown sweep parameter `{other}` (expected epsilon, kappa or N)"
            )),
        }
    }
}

impl SweepParam {
    pub fn apply(
        self,
        base: &ExperimentConfig,
        value: f64,
    ) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = base.clone();
        match self {
            SweepParam::Epsilon => cfg.initial.amplitude = value,
            SweepParam::Kappa => cfg.flow.kappa = value,
            SweepParam::N => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(ConfigError::Invalid(format!(
                        "N = {value} is not a grid size"
                    )));
                }
                let grid = &cfg.flow.grid;
                cfg.flow.grid =
                    GridSpec::new(vec![value as usize; grid.dim()], grid.periods().to_vec())
                        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            }
        }
        cfg.flow
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }
}

/// One line of `sweep.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: String,
    pub final_psi_max: f64,
    pub fitted_rate: f64,
    pub status: ExitStatus,
}

pub const SWEEP_HEADER: &str = "value,outcome,final_psi_max,fitted_rate";

/// One run per value in `out/<param>_<index>`, then `sweep.csv` with a row
/// per value. The returned status is the worst over all runs.
pub fn sweep_experiment(
    base: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    out: &Path,
) -> Result<(ExitStatus, Vec<SweepRow>), ExperimentError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut rows = Vec::with_capacity(values.len());
    let mut worst = ExitStatus::Converged;
    for (i, &value) in values.iter().enumerate() {
        let dir = out.join(format!("{param}_{i}"));
        let row = match param
            .apply(base, value)
            .map_err(ExperimentError::from)
            .and_then(|cfg| run_experiment(&cfg, &dir))
        {
            Ok(s) => SweepRow {
                value,
                outcome: s.outcome.clone(),
                final_psi_max: s.final_record().map_or(f64::NAN, |r| r.psi_max),
                fitted_rate: s.fitted_rate(),
                status: s.status,
            },
            Err(e) => {
                log::error!("{param} = {value}: {e}");
                SweepRow {
                    value,
                    outcome: "error".into(),
                    final_psi_max: f64::NAN,
                    fitted_rate: f64::NAN,
                    status: ExitStatus::Error,
                }
            }
        };
        worst = worst.worst(row.status);
        rows.push(row);
    }
    let mut text = format!("{SWEEP_HEADER}\n");
    for r in &rows {
        text.push_str(&format!(
            "{:e},{},{:e},{:e}\n",
            r.value, r.outcome, r.final_psi_max, r.fitted_rate
        ));
    }
    write_file(&out.join(SWEEP_FILE), &text)?;
    Ok((worst, rows))
}

/// Runs `suite` and writes every report into `out/reports.csv`.
pub fn verify_experiment(
    suite: Suite,
    out: &Path,
) -> Result<(ExitStatus, Vec<ResidualReport>), ExperimentError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let reports = run_suite(suite)?;
    let text: String = reports.iter().map(ResidualReport::to_lines).collect();
    write_file(&out.join(REPORTS_FILE), &text)?;
    let status = if reports.iter().all(|r| r.pass) {
        ExitStatus::Converged
    } else {
        ExitStatus::VerifyFailed
    };
    Ok((status, reports))
}
