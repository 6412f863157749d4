//! Config ingestion, scenario execution and artifact emission.
//!
//! A run writes three files into its output directory:
//!
//! - `trace.csv`: one row per recorded sample, header row, LF line endings,
//!   every number in 17-significant-digit scientific notation
//! - `summary.json`: the fully resolved config plus error metrics and the
//!   excitation bounds, enough to re-run the scenario
//! - `pe.json`: the windowed Gram eigenvalue report

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parametrization::Layout;
use crate::pe::{pe_bounds, PeReport};
use crate::sim::{
    builtin_scenario, error_metrics, path_witness, run_scenario, ErrorSummary, MetricsOptions,
    PathWitness, ScenarioConfig, SimulationTrace, BUILTIN_SCENARIOS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DIVERGENCE: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const DEFAULT_PE_WINDOW: f64 = 10.0;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::Divergence { .. } | Error::NonFinite(_) | Error::SingularMatrix { .. } => {
            EXIT_DIVERGENCE
        }
        Error::Config { .. } | Error::InvalidInput(_) | Error::DimensionMismatch { .. } => {
            EXIT_CONFIG
        }
    }
}

/// Deserializes a config without validating it or filling defaults.
fn parse_raw(text: &str) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })
}

fn finalize(mut cfg: ScenarioConfig) -> Result<ScenarioConfig> {
    cfg.validate()?;
    cfg.resolve_defaults()?;
    Ok(cfg)
}

/// Parses and validates a JSON config, applying defaults for omitted fields.
pub fn parse_config_str(text: &str) -> Result<ScenarioConfig> {
    finalize(parse_raw(text)?)
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    parse_config_str(&fs::read_to_string(path)?)
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trace_header(trace: &SimulationTrace, full: bool) -> Vec<String> {
    let (m, k) = (trace.m, trace.k());
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=m).map(|i| format!("y_{i}")));
    cols.extend(["F_true", "F_meas", "z"].map(String::from));
    if full {
        cols.extend((1..=k).map(|i| format!("phi_{i}")));
    }
    cols.extend((1..=k).map(|i| format!("thetahat_{i}")));
    for i in 1..=m {
        for j in i..=m {
            cols.push(format!("Hhat_{i}{j}"));
        }
    }
    cols.extend((1..=m).map(|i| format!("xhat_{i}")));
    cols.extend(["err_x", "err_H", "residual"].map(String::from));
    cols
}

pub fn write_trace_csv(trace: &SimulationTrace, path: &Path, full: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(std::io::Error::from)?;
    w.write_record(trace_header(trace, full))
        .map_err(std::io::Error::from)?;
    let mut row: Vec<String> = Vec::new();
    for i in 0..trace.len() {
        row.clear();
        row.push(fmt_num(trace.t[i]));
        row.extend(trace.y_at(i).iter().map(|&v| fmt_num(v)));
        row.extend([trace.f_true[i], trace.f_meas[i], trace.z[i]].map(fmt_num));
        if full {
            row.extend(trace.phi_at(i).iter().map(|&v| fmt_num(v)));
        }
        row.extend(trace.theta_hat_at(i).iter().map(|&v| fmt_num(v)));
        row.extend(trace.h_hat_at(i).iter().map(|&v| fmt_num(v)));
        row.extend(trace.x_hat_at(i).iter().map(|&v| fmt_num(v)));
        row.extend([trace.err_x[i], trace.err_h[i], trace.residual[i]].map(fmt_num));
        w.write_record(&row).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeSummary {
    pub window: f64,
    pub stride: f64,
    pub windows: usize,
    pub alpha1: f64,
    pub alpha2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ScenarioConfig,
    pub metrics_options: MetricsOptions,
    pub metrics: ErrorSummary,
    pub pe: PeSummary,
    pub path_bounds: PathWitness,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub trace: PathBuf,
    pub summary: PathBuf,
    pub pe: PathBuf,
    pub exit_status: i32,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub full_trace: bool,
    pub pe_window: f64,
    pub metrics: MetricsOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            full_trace: false,
            pe_window: DEFAULT_PE_WINDOW,
            metrics: MetricsOptions::default(),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(std::io::Error::from)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Runs one resolved scenario and writes its artifacts into `out_dir`.
pub fn execute(cfg: &ScenarioConfig, out_dir: &Path, opts: &RunOptions) -> Result<(RunArtifacts, RunSummary)> {
    if !(opts.pe_window > 0.0) || opts.pe_window > cfg.t_end() {
        return Err(Error::config(
            "pe_window",
            format!("must be positive and at most t_end = {}", cfg.t_end()),
        ));
    }
    let trace = run_scenario(cfg)?;
    let metrics = error_metrics(&trace, &opts.metrics)?;
    let pe: PeReport = pe_bounds(&trace.phi_series()?, opts.pe_window, opts.pe_window / 2.0)?;

    fs::create_dir_all(out_dir)?;
    let artifacts = RunArtifacts {
        trace: out_dir.join("trace.csv"),
        summary: out_dir.join("summary.json"),
        pe: out_dir.join("pe.json"),
        exit_status: EXIT_OK,
    };
    write_trace_csv(&trace, &artifacts.trace, opts.full_trace)?;
    let summary = RunSummary {
        config: cfg.clone(),
        metrics_options: opts.metrics,
        metrics,
        pe: PeSummary {
            window: pe.window,
            stride: pe.stride,
            windows: pe.windows.len(),
            alpha1: pe.alpha1,
            alpha2: pe.alpha2,
        },
        path_bounds: path_witness(cfg),
        samples: trace.len(),
    };
    write_json(&artifacts.summary, &summary)?;
    write_json(&artifacts.pe, &pe)?;
    Ok((artifacts, summary))
}

#[derive(Debug, Parser)]
#[command(
    name = "hessloc",
    about = "Adaptive Hessian estimation and extremum localization simulator"
)]
pub struct Cli {
    /// Scenario config (JSON).
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    pub config: Option<PathBuf>,
    /// Built-in scenario name, or `all`.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    /// Include the regressor columns in trace.csv.
    #[arg(long = "full-trace")]
    pub full_trace: bool,
    /// Excitation window length.
    #[arg(long = "pe-window", default_value_t = DEFAULT_PE_WINDOW)]
    pub pe_window: f64,
    /// Parameter layout: full | reduced.
    #[arg(long)]
    pub layout: Option<Layout>,
    /// Record every n-th integration step.
    #[arg(long = "record-every")]
    pub record_every: Option<usize>,
}

impl Cli {
    fn apply_overrides(&self, cfg: &mut ScenarioConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(t_end) = self.t_end {
            cfg.t_end = Some(t_end);
        }
        if let Some(layout) = self.layout {
            cfg.layout = layout;
        }
        if let Some(every) = self.record_every {
            cfg.record_every = every;
        }
    }

    /// `(label, config, output dir)` for each requested run.
    fn jobs(&self) -> Result<Vec<(String, ScenarioConfig, PathBuf)>> {
        let raw: Vec<(String, ScenarioConfig, PathBuf)> = match (&self.config, &self.scenario) {
            (Some(path), _) => {
                let cfg = parse_raw(&fs::read_to_string(path)?)?;
                let label = cfg
                    .name
                    .clone()
                    .unwrap_or_else(|| path.display().to_string());
                vec![(label, cfg, self.out.clone())]
            }
            (None, Some(name)) if name == "all" => BUILTIN_SCENARIOS
                .iter()
                .map(|n| Ok((n.to_string(), builtin_scenario(n)?, self.out.join(n))))
                .collect::<Result<_>>()?,
            (None, Some(name)) => vec![(name.clone(), builtin_scenario(name)?, self.out.clone())],
            (None, None) => return Err(Error::config("args", "one of --config or --scenario is required")),
        };
        raw.into_iter()
            .map(|(label, mut cfg, dir)| {
                self.apply_overrides(&mut cfg);
                // overrides change the defaults, so resolve only afterwards
                if self.layout.is_some() && self.config.is_none() {
                    cfg.theta0 = None;
                }
                Ok((label, finalize(cfg)?, dir))
            })
            .collect()
    }
}

fn one_line(label: &str, s: &RunSummary) -> String {
    format!(
        "{label}: err_x={:.3e} err_H={:.3e} rate={:.4}{} alpha1={:.4e}",
        s.metrics.final_err_x,
        s.metrics.final_err_h,
        s.metrics.decay.rate,
        if s.metrics.decay.fit_failed { " (fit failed)" } else { "" },
        s.pe.alpha1
    )
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let jobs = match cli.jobs() {
        Ok(jobs) => jobs,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let opts = RunOptions {
        full_trace: cli.full_trace,
        pe_window: cli.pe_window,
        metrics: MetricsOptions::default(),
    };

    let results: Vec<(String, Result<(RunArtifacts, RunSummary)>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(label, cfg, dir)| {
                let opts = &opts;
                scope.spawn(move || (label.clone(), execute(cfg, dir, opts)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario worker panicked"))
            .collect()
    });

    let mut status = EXIT_OK;
    for (label, res) in results {
        match res {
            Ok((_, summary)) => println!("{}", one_line(&label, &summary)),
            Err(e) => {
                eprintln!("{label}: error: {e}");
                if status == EXIT_OK {
                    status = exit_code(&e);
                }
            }
        }
    }
    status
}
