//! The `gsquid` command line.
//!
//! Every numeric argument takes an SI-suffixed quantity (`5mV`, `1nH`,
//! `2.5e-3`). Flux arguments are in units of the flux quantum; flux columns
//! in output files are in the config's own units.
//!
//! Exit codes: 0 on success, 1 for bad input, 2 when the solver fails.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{self, AnalysisError};
use crate::circuit::{beta_l, DeviceConfig};
use crate::fit::{fit_parameters, FitCurve, FitError, FitOptions, FitParam, ParamBound};
use crate::io::config::{load_config, ConfigError};
use crate::io::{report, svg};
use crate::oracle::{self, OracleError, TwoJunctionLoop};
use crate::pattern::{envelope_stats, linspace, region_map, sweep_pattern, PatternError};
use crate::solver::{GatedSquid, SolverError};
use crate::units::parse_quantity;

#[derive(Debug, Parser)]
#[command(name = "gsquid", version, about = "Critical-current patterns of gated multi-terminal SQUIDs")]
pub struct RunSpec {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a device file and print a summary.
    Validate {
        config: PathBuf,
    },
    /// Critical current against applied flux.
    Sweep(SweepArgs),
    /// Superconducting / normal / gate-limited map over flux and bias.
    Map(MapArgs),
    /// Exact two-junction loop against the linearized model.
    Oracle(OracleArgs),
    /// Fit device parameters to measured critical currents.
    Fit(FitArgs),
    /// Predicted and measured phase and amplitude shifts with gate voltage.
    Shift(ShiftArgs),
    /// Coupling at which the envelope develops a zero-inductance segment.
    Alpha {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct FluxAxis {
    /// First flux point, in flux quanta.
    #[arg(long, default_value = "0", value_parser = quantity, allow_negative_numbers = true)]
    pub phi_start: f64,
    #[arg(long, default_value = "2", value_parser = quantity, allow_negative_numbers = true)]
    pub phi_stop: f64,
    #[arg(long, default_value_t = 401)]
    pub phi_count: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub config: PathBuf,
    #[command(flatten)]
    pub flux: FluxAxis,
    /// Gate voltages, one per gate; missing gates sit at 0 V.
    #[arg(long, value_delimiter = ',', value_parser = quantity, allow_negative_numbers = true)]
    pub vg: Vec<f64>,
    /// CSV output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Envelope corners as CSV.
    #[arg(long)]
    pub vertices: Option<PathBuf>,
    /// Full pattern, segments included, as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    pub config: PathBuf,
    #[command(flatten)]
    pub flux: FluxAxis,
    #[arg(long, value_parser = quantity, allow_negative_numbers = true)]
    pub i_start: f64,
    #[arg(long, value_parser = quantity, allow_negative_numbers = true)]
    pub i_stop: f64,
    #[arg(long, default_value_t = 101)]
    pub i_count: usize,
    #[arg(long, value_delimiter = ',', value_parser = quantity, allow_negative_numbers = true)]
    pub vg: Vec<f64>,
    /// Normal-state resistance; adds a resistance column.
    #[arg(long, value_parser = quantity)]
    pub rn: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Two-branch ungated device; overrides `--beta`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Screening parameter of each junction in a symmetric loop.
    #[arg(long, default_value = "2", value_parser = quantity)]
    pub beta: f64,
    #[command(flatten)]
    pub flux: FluxAxis,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Overlay with stability lobes and a residual panel.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Template device; parameters not freed keep their values.
    pub config: PathBuf,
    /// CSV with columns `phi_ext,i_c` and optionally `v_g` (0 V when absent).
    #[arg(long)]
    pub data: PathBuf,
    /// `NAME:LOWER:UPPER`, e.g. `L2:50pH:200pH`. Repeatable.
    #[arg(long = "free", required = true)]
    pub free: Vec<String>,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fitted device written back as a config file.
    #[arg(long)]
    pub save_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ShiftArgs {
    pub config: PathBuf,
    /// Gate voltages; the first is the reference.
    #[arg(long, value_delimiter = ',', value_parser = quantity, allow_negative_numbers = true, required = true)]
    pub vg: Vec<f64>,
    #[arg(long, default_value_t = 2001)]
    pub phi_count: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn quantity(s: &str) -> Result<f64, String> {
    parse_quantity(s).map_err(|e| e.to_string())
}

/// Failure of a run, split by exit code.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Invalid(_)
            | SolverError::GateVoltages { .. }
            | SolverError::FluxonCount { .. }
            | SolverError::NonFiniteDrive
            | SolverError::NotGatedSquid(_)
            | SolverError::MultiLoop(_) => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<PatternError> for CliError {
    fn from(e: PatternError) -> Self {
        match e {
            PatternError::Solver(s) => s.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Solver(s) => s.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Invalid(_) => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Unidentifiable => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_err(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Input(format!("stdout: {e}"))),
    }
}

fn gate_voltages(config: &DeviceConfig, vg: &[f64]) -> Result<Vec<f64>, CliError> {
    if vg.len() > config.gates.len() {
        return Err(CliError::Input(format!(
            "{} gate voltages given for a device with {} gates",
            vg.len(),
            config.gates.len()
        )));
    }
    let mut v = vg.to_vec();
    v.resize(config.gates.len(), 0.0);
    Ok(v)
}

fn flux_range(config: &DeviceConfig, f: &FluxAxis) -> Result<(f64, f64), CliError> {
    if f.phi_count < 2 {
        return Err(CliError::Input(format!("--phi-count must be at least 2, got {}", f.phi_count)));
    }
    if !(f.phi_stop > f.phi_start) {
        return Err(CliError::Input("--phi-stop must exceed --phi-start".into()));
    }
    Ok((f.phi_start * config.phi0, f.phi_stop * config.phi0))
}

/// Parse arguments and run; returns the process exit code. Diagnostics go
/// to stderr.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let spec = match RunSpec::try_parse_from(args) {
        Ok(s) => s,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&spec) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn run(spec: &RunSpec) -> Result<(), CliError> {
    match &spec.command {
        Command::Validate { config } => validate(config),
        Command::Sweep(a) => sweep(a),
        Command::Map(a) => map(a),
        Command::Oracle(a) => run_oracle(a),
        Command::Fit(a) => fit(a),
        Command::Shift(a) => shift(a),
        Command::Alpha { config, out } => alpha(config, out.as_deref()),
    }
}

fn validate(path: &Path) -> Result<(), CliError> {
    let c = load_config(path)?;
    let betas: Vec<String> = c.branches.iter().map(|b| format!("{:.4}", beta_l(b, c.phi0))).collect();
    println!(
        "{}: ok, {} branches, {} gates, beta_L = [{}]",
        path.display(),
        c.branches.len(),
        c.gates.len(),
        betas.join(", ")
    );
    Ok(())
}

fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    let c = load_config(&a.config)?;
    let v = gate_voltages(&c, &a.vg)?;
    let p = sweep_pattern(&c, flux_range(&c, &a.flux)?, a.flux.phi_count, &v)?;
    emit(a.out.as_deref(), &report::pattern_csv(&p))?;
    if let Some(path) = &a.vertices {
        emit(Some(path), &report::vertices_csv(&p))?;
    }
    if let Some(path) = &a.json {
        emit(Some(path), &report::json_report("pattern", &p))?;
    }
    if let Some(path) = &a.svg {
        svg::write_svg(path, &svg::pattern_svg(&p)).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

fn map(a: &MapArgs) -> Result<(), CliError> {
    let c = load_config(&a.config)?;
    let v = gate_voltages(&c, &a.vg)?;
    let (p0, p1) = flux_range(&c, &a.flux)?;
    if a.i_count < 2 || !(a.i_stop > a.i_start) {
        return Err(CliError::Input("bias axis needs --i-stop > --i-start and --i-count >= 2".into()));
    }
    let m = region_map(
        &c,
        &linspace(p0, p1, a.flux.phi_count),
        &linspace(a.i_start, a.i_stop, a.i_count),
        &v,
        a.rn,
    )?;
    emit(a.out.as_deref(), &report::map_csv(&m))?;
    if let Some(path) = &a.svg {
        svg::write_svg(path, &svg::map_svg(&m, c.phi0)).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

fn loop_from(a: &OracleArgs) -> Result<TwoJunctionLoop, CliError> {
    let Some(path) = &a.config else {
        if !(a.beta.is_finite() && a.beta > 0.0) {
            return Err(CliError::Input(format!("--beta must be positive, got {}", a.beta)));
        }
        return Ok(TwoJunctionLoop::symmetric(a.beta));
    };
    let c = load_config(path)?;
    if c.branches.len() != 2 || !c.gates.is_empty() {
        return Err(CliError::Input(format!(
            "{}: the exact oracle needs two branches and no gates",
            path.display()
        )));
    }
    let (b1, b2) = (&c.branches[0], &c.branches[1]);
    Ok(TwoJunctionLoop::new(
        b1.inductance,
        b2.inductance,
        b1.critical_current,
        b2.critical_current,
        c.phi0,
    )?)
}

fn run_oracle(a: &OracleArgs) -> Result<(), CliError> {
    let lp = loop_from(a)?;
    if a.flux.phi_count < 2 || !(a.flux.phi_stop > a.flux.phi_start) {
        return Err(CliError::Input("flux axis needs --phi-stop > --phi-start and --phi-count >= 2".into()));
    }
    let phis = linspace(a.flux.phi_start * lp.phi0, a.flux.phi_stop * lp.phi0, a.flux.phi_count);
    let cmp = oracle::compare_linearized(&lp, &phis)?;
    emit(a.out.as_deref(), &report::comparison_csv(&cmp))?;
    if let Some(path) = &a.json {
        emit(Some(path), &report::json_report("oracle_comparison", &cmp))?;
    }
    if let Some(path) = &a.svg {
        let ms: BTreeSet<i64> = phis.iter().flat_map(|&p| lp.m_window(p)).collect();
        let lobes = ms
            .into_iter()
            .map(|m| oracle::stability_region(&lp, m, &phis))
            .collect::<Result<Vec<_>, _>>()?;
        svg::write_svg(path, &svg::oracle_svg(&cmp, lp.phi0, &lobes)).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

fn parse_free(s: &str) -> Result<ParamBound, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let [name, lo, hi] = parts[..] else {
        return Err(CliError::Input(format!("--free {s:?}: expected NAME:LOWER:UPPER")));
    };
    let param: FitParam = name.parse().map_err(CliError::Input)?;
    let q = |x: &str| parse_quantity(x).map_err(|e| CliError::Input(format!("--free {s:?}: {e}")));
    Ok(ParamBound::new(param, q(lo)?, q(hi)?))
}

/// Group rows into curves by gate voltage, in order of first appearance.
pub fn read_fit_data(path: &Path, n_gates: usize) -> Result<Vec<FitCurve>, CliError> {
    let bad = |msg: String| CliError::Input(format!("{}: {msg}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ip), Some(ic)) = (col("phi_ext"), col("i_c")) else {
        return Err(bad("needs columns phi_ext and i_c".into()));
    };
    let iv = col("v_g");
    let mut curves: Vec<FitCurve> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let line = k + 2;
        let field = |i: usize, name: &str| {
            let s = rec.get(i).unwrap_or("");
            parse_quantity(s).map_err(|e| bad(format!("line {line}, {name}: {e}")))
        };
        let phi = field(ip, "phi_ext")?;
        let i_c = field(ic, "i_c")?;
        let v = match iv {
            Some(i) => field(i, "v_g")?,
            None => 0.0,
        };
        let mut v_gate = vec![v; n_gates.min(1)];
        v_gate.resize(n_gates, 0.0);
        let curve = match curves.iter_mut().position(|c| c.v_gate == v_gate) {
            Some(j) => &mut curves[j],
            None => {
                curves.push(FitCurve {
                    v_gate,
                    phi_ext: Vec::new(),
                    i_c: Vec::new(),
                });
                curves.last_mut().unwrap()
            }
        };
        curve.phi_ext.push(phi);
        curve.i_c.push(i_c);
    }
    if curves.is_empty() {
        return Err(bad("no data rows".into()));
    }
    Ok(curves)
}

fn fit(a: &FitArgs) -> Result<(), CliError> {
    let template = load_config(&a.config)?;
    let free = a.free.iter().map(|s| parse_free(s)).collect::<Result<Vec<_>, _>>()?;
    let data = read_fit_data(&a.data, template.gates.len())?;
    let opts = FitOptions {
        starts: a.starts,
        seed: a.seed,
        ..FitOptions::default()
    };
    let result = fit_parameters(&data, &template, &free, &opts)?;
    emit(a.out.as_deref(), &report::json_report("fit", &result))?;
    if let Some(path) = &a.save_config {
        crate::io::config::save_config(&result.config, path).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ShiftRow {
    v_g: f64,
    phase_predicted: f64,
    phase_measured: f64,
    /// measured minus predicted, in flux quanta
    phase_difference_phi0: f64,
    phase_radians: f64,
    amplitude_predicted: f64,
    amplitude_measured: f64,
}

#[derive(Serialize)]
struct ShiftReport {
    reference_v_g: f64,
    phi0: f64,
    digest: String,
    shifts: Vec<ShiftRow>,
}

fn shift(a: &ShiftArgs) -> Result<(), CliError> {
    let c = load_config(&a.config)?;
    // only single-gate three-branch devices have closed-form shifts
    GatedSquid::from_config(&c)?;
    let v_ref = a.vg[0];
    let range = (0.0, 3.0 * c.phi0);
    let reference = sweep_pattern(&c, range, a.phi_count, &[v_ref])?;
    let ref_max = envelope_stats(&reference)?.max_ic;
    let pred_ref = analysis::phase_shift_predicted(&c, v_ref)?;
    let amp_ref = analysis::amplitude_shift_predicted(&c, v_ref)?;
    let mut shifts = Vec::new();
    for &v in &a.vg[1..] {
        let p = sweep_pattern(&c, range, a.phi_count, &[v])?;
        let measured = analysis::phase_shift_measured(&reference, &p)?;
        let predicted = analysis::wrap_half_period(analysis::phase_shift_predicted(&c, v)?.flux - pred_ref.flux, c.phi0);
        shifts.push(ShiftRow {
            v_g: v,
            phase_predicted: predicted,
            phase_measured: measured,
            phase_difference_phi0: analysis::wrap_half_period(measured - predicted, c.phi0) / c.phi0,
            phase_radians: -2.0 * std::f64::consts::PI * predicted / c.phi0,
            amplitude_predicted: analysis::amplitude_shift_predicted(&c, v)? - amp_ref,
            amplitude_measured: ref_max - envelope_stats(&p)?.max_ic,
        });
    }
    let rep = ShiftReport {
        reference_v_g: v_ref,
        phi0: c.phi0,
        digest: reference.digest.clone(),
        shifts,
    };
    emit(a.out.as_deref(), &report::json_report("shift", &rep))
}

#[derive(Serialize)]
struct AlphaReport {
    #[serde(flatten)]
    alpha: analysis::AlphaStar,
    resistance_ratio: f64,
    /// `L3 - (L1 + α ΣL) r` at the configured coupling.
    residual_at_config: f64,
    configured_alpha: f64,
}

fn alpha(path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let c = load_config(path)?;
    let dev = GatedSquid::from_config(&c)?;
    let a = analysis::alpha_star(&c)?;
    let configured = c.gates[0].effective_alpha();
    let rep = AlphaReport {
        alpha: a,
        resistance_ratio: dev.resistance_ratio(),
        residual_at_config: analysis::zero_inductance_residual(&c, configured)?,
        configured_alpha: configured,
    };
    emit(out, &report::json_report("alpha_star", &rep))
}
