//! Library side of the `qrouter` command: scenario loading, the pipelines
//! behind each subcommand and their file outputs.

pub mod plot;
pub mod scenario;

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use qrouter_core::analytic::{linspace, window_scan, WindowScan, WindowSummary};
use qrouter_core::herald::{herald, HeraldReport};
use qrouter_core::metrics::{analyze, Analysis, AnalysisOptions, EntanglementReport};
use qrouter_core::propagate::EvolveDiagnostics;
use qrouter_core::{evolve, EvolveOptions, FluxQubitConfig, FluxState, PulseSpec, SystemParams, TimeSeries};

pub use scenario::{preset, Format, Scenario, PRESETS};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_PHYSICALITY: u8 = 3;
pub const EXIT_CONVERGENCE: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(qrouter_core::Error),
    Io(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use qrouter_core::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Run(E::InvalidParameter { .. }) => EXIT_CONFIG,
            CliError::Run(
                E::PhysicalityViolation { .. }
                | E::NegativeFlux { .. }
                | E::NegativeSpectrum { .. }
                | E::NonHermitianInput { .. },
            ) => EXIT_PHYSICALITY,
            CliError::Run(E::NonConvergence { .. }) => EXIT_CONVERGENCE,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Run(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<qrouter_core::Error> for CliError {
    fn from(e: qrouter_core::Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

// steady

pub struct SteadyOutcome {
    pub scan: WindowScan,
    pub summaries: Vec<WindowSummary>,
}

pub fn run_steady(s: &Scenario) -> Result<SteadyOutcome> {
    let (p, _) = s.resolved()?;
    let grid = linspace(s.steady.delta2_min, s.steady.delta2_max, s.steady.points);
    let scan = window_scan(&p, &grid, &[FluxState::G, FluxState::E])?;
    let summaries = scan.curves.iter().map(|c| c.summary.clone()).collect();
    Ok(SteadyOutcome { scan, summaries })
}

pub fn write_steady(out: &SteadyOutcome, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for f in formats {
        match f {
            Format::Csv => {
                let path = dir.join("windows.csv");
                out.scan.write_csv(BufWriter::new(File::create(&path)?))?;
                let script = dir.join("windows.gp");
                fs::write(&script, qrouter_core::analytic::gnuplot_window_script("windows.csv"))?;
                written.extend([path, script]);
            }
            Format::Json => {
                let path = dir.join("windows.json");
                serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &out.scan)?;
                written.push(path);
            }
        }
    }
    let path = dir.join("windows_summary.json");
    serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &out.summaries)?;
    written.push(path);
    Ok(written)
}

// dynamics

pub struct DynamicsOutcome {
    pub params: SystemParams,
    pub pulse: PulseSpec,
    pub flux: FluxQubitConfig,
    pub series: TimeSeries,
    pub analysis: Analysis,
    pub herald: Option<HeraldReport>,
}

/// The JSON report written next to the time series.
#[derive(Serialize)]
pub struct DynamicsReport<'a> {
    pub scenario: &'a str,
    pub params: &'a SystemParams,
    pub pulse: &'a PulseSpec,
    pub flux: &'a FluxQubitConfig,
    pub report: &'a EntanglementReport,
    pub herald: Option<&'a HeraldReport>,
    pub integrator: &'a EvolveDiagnostics,
}

pub fn run_dynamics(s: &Scenario, opts: &EvolveOptions) -> Result<DynamicsOutcome> {
    let (params, pulse) = s.resolved()?;
    let flux = s.flux.clone();
    run_pipeline(params, pulse, flux, opts)
}

fn run_pipeline(params: SystemParams, pulse: PulseSpec, flux: FluxQubitConfig, opts: &EvolveOptions) -> Result<DynamicsOutcome> {
    let series = evolve(&params, &pulse, &flux, opts)?;
    let analysis = analyze(&series, &params, &flux, &AnalysisOptions::default())?;
    // a basis-state flux qubit leaves nothing to herald
    let herald = herald(&analysis.integrated, &flux).ok();
    Ok(DynamicsOutcome { params, pulse, flux, series, analysis, herald })
}

impl DynamicsOutcome {
    pub fn report<'a>(&'a self, name: &'a str) -> DynamicsReport<'a> {
        DynamicsReport {
            scenario: name,
            params: &self.params,
            pulse: &self.pulse,
            flux: &self.flux,
            report: &self.analysis.report,
            herald: self.herald.as_ref(),
            integrator: &self.series.diagnostics,
        }
    }

    pub fn summary(&self) -> String {
        let r = &self.analysis.report;
        let pi = std::f64::consts::PI;
        let mut s = format!(
            "e_R = {:.4}  e_L = {:.4}  contrast = {}\nF(phi*) = {:.4} at phi* = {:.4} pi  coherence = {:.4}  C = {:.4}",
            r.e_r,
            r.e_l,
            r.contrast.map_or("n/a".into(), |c| format!("{c:.4}")),
            r.fidelity_max,
            r.phi_star / pi,
            r.coherence_total,
            r.concurrence,
        );
        if let Some(h) = &self.herald {
            s.push_str(&format!(
                "\nherald: psi+ p = {:.4} F = {:.4}, psi- p = {:.4} F = {:.4}",
                h.psi_plus.normalized_probability,
                h.psi_plus.transfer_fidelity,
                h.psi_minus.normalized_probability,
                h.psi_minus.transfer_fidelity
            ));
        }
        s
    }
}

#[derive(Serialize)]
struct SeriesJson<'a> {
    times: &'a [f64],
    channels: serde_json::Map<String, serde_json::Value>,
}

#[derive(Serialize)]
struct AnalysisJson<'a> {
    flux: &'a qrouter_core::metrics::FluxDensities,
    coherence: &'a qrouter_core::metrics::CoherenceSeries,
    concurrence_density: &'a [f64],
}

pub fn write_dynamics(out: &DynamicsOutcome, name: &str, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for f in formats {
        match f {
            Format::Csv => {
                let ts = dir.join("timeseries.csv");
                out.series.write_csv(BufWriter::new(File::create(&ts)?))?;
                let an = dir.join("analysis.csv");
                out.analysis.write_csv(BufWriter::new(File::create(&an)?))?;
                let script = dir.join("dynamics.gp");
                fs::write(&script, plot::dynamics_script("analysis.csv"))?;
                written.extend([ts, an, script]);
            }
            Format::Json => {
                let channels = out
                    .series
                    .channels
                    .iter()
                    .map(|(n, v)| (n.clone(), serde_json::to_value(v).expect("finite samples")))
                    .collect();
                let ts = dir.join("timeseries.json");
                serde_json::to_writer(BufWriter::new(File::create(&ts)?), &SeriesJson { times: &out.series.times, channels })?;
                let an = dir.join("analysis.json");
                let body = AnalysisJson {
                    flux: &out.analysis.flux,
                    coherence: &out.analysis.coherence,
                    concurrence_density: &out.analysis.concurrence_density,
                };
                serde_json::to_writer(BufWriter::new(File::create(&an)?), &body)?;
                written.extend([ts, an]);
            }
        }
    }
    let path = dir.join("report.json");
    serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &out.report(name))?;
    written.push(path);
    Ok(written)
}

pub fn write_herald(out: &DynamicsOutcome, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("herald.json");
    serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &out.herald)?;
    Ok(path)
}

// sweep

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepMetrics {
    pub e_r: f64,
    pub e_l: f64,
    pub fidelity: f64,
    pub phi_star: f64,
    pub concurrence: f64,
    pub coherence: f64,
    pub ledger_error: f64,
}

#[derive(Debug)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    pub result: Result<SweepMetrics>,
}

pub struct SweepOutcome {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
}

/// One full pipeline run per sweep value on the current rayon pool. Rows come
/// back in sweep order whatever the completion order.
pub fn run_sweep(s: &Scenario, opts: &EvolveOptions) -> Result<SweepOutcome> {
    let sweep = s.sweep.as_ref().ok_or_else(|| CliError::Config("scenario has no [sweep] section".into()))?;
    let rows = sweep
        .values
        .par_iter()
        .enumerate()
        .map(|(index, &value)| {
            let result = s.with_value(&sweep.parameter, value).and_then(|sc| run_dynamics(&sc, opts)).map(|o| {
                let r = &o.analysis.report;
                SweepMetrics {
                    e_r: r.e_r,
                    e_l: r.e_l,
                    fidelity: r.fidelity_max,
                    phi_star: r.phi_star,
                    concurrence: r.concurrence,
                    coherence: r.coherence_total,
                    ledger_error: r.diagnostics.ledger_error,
                }
            });
            SweepRow { index, value, result }
        })
        .collect();
    Ok(SweepOutcome { parameter: sweep.parameter.clone(), rows })
}

impl SweepOutcome {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.result.is_err()).count()
    }

    fn column(&self) -> &str {
        self.parameter.rsplit('.').next().unwrap_or(&self.parameter)
    }
}

#[derive(Serialize)]
struct SweepJsonRow<'a> {
    index: usize,
    value: f64,
    #[serde(flatten)]
    metrics: Option<&'a SweepMetrics>,
    error: Option<String>,
}

pub fn write_sweep(out: &SweepOutcome, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for f in formats {
        match f {
            Format::Csv => {
                let path = dir.join("sweep.csv");
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["index", out.column(), "e_R", "e_L", "F", "phi_star", "C", "coherence", "ledger_error", "error"])?;
                for row in &out.rows {
                    let mut rec = vec![row.index.to_string(), row.value.to_string()];
                    match &row.result {
                        Ok(m) => {
                            rec.extend(
                                [m.e_r, m.e_l, m.fidelity, m.phi_star, m.concurrence, m.coherence, m.ledger_error]
                                    .iter()
                                    .map(f64::to_string),
                            );
                            rec.push(String::new());
                        }
                        Err(e) => {
                            rec.extend(std::iter::repeat_n(String::new(), 7));
                            rec.push(e.to_string());
                        }
                    }
                    w.write_record(&rec)?;
                }
                w.flush()?;
                let script = dir.join("sweep.gp");
                fs::write(&script, plot::sweep_script("sweep.csv", out.column()))?;
                written.extend([path, script]);
            }
            Format::Json => {
                let path = dir.join("sweep.json");
                let rows: Vec<SweepJsonRow> = out
                    .rows
                    .iter()
                    .map(|r| SweepJsonRow {
                        index: r.index,
                        value: r.value,
                        metrics: r.result.as_ref().ok(),
                        error: r.result.as_ref().err().map(ToString::to_string),
                    })
                    .collect();
                let body = serde_json::json!({ "parameter": out.parameter, "rows": rows });
                serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &body)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
