//! Flag sets, resolved configurations and runners for each subcommand.

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use lvthermo::checks::{run_check, CheckOutcome, CHECKS, KNOWN_FAILURES};
use lvthermo::entropy::{log_bump, relative_entropy_at_time, uniform_ratio, DensityField, Domain, Psi, Rho};
use lvthermo::eos::{default_offsets, eos_grid, log_space, DEFAULT_ALPHAS};
use lvthermo::exec::{map_indexed, Execution};
use lvthermo::hdiff::{pss_curve_with, CoefficientForm, HDiffusionMode, NoiseAverage, DEFAULT_GRID_POINTS, DEFAULT_OFFSET_RANGE};
use lvthermo::io::{
    contour_table, entropy_table, eos_table, field_table, hdiff_table, jump_table, sde_table, trajectory_table, Cell,
    Preamble, Table,
};
use lvthermo::model::{hamiltonian, ModelParams, PhaseState};
use lvthermo::orbit::{log_extent, orbit_from_energy, DEFAULT_TOL};
use lvthermo::stats::{summarize, OrbitSummary};
use lvthermo::stochastic::{
    decomposition_drift, path_rng, sde_ensemble, ssa_simulate_with, DiscreteState, SdeConfig, DEFAULT_MAX_EVENTS,
};
use lvthermo::LvError;

use crate::config::{parse_name, resolve, usage, UsageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// What a command produces: the main document and, for `orbit`, an
/// optional summary written next to it.
pub struct Output {
    pub body: Vec<u8>,
    pub summary: Option<Vec<u8>>,
    /// Nonzero exit requested by the command itself (failed checks).
    pub failed: Option<String>,
}

impl Output {
    fn body(body: Vec<u8>) -> Self {
        Self { body, summary: None, failed: None }
    }
}

pub struct Context<'a> {
    pub file: Option<&'a Map<String, Value>>,
    pub format: Format,
    pub exec: Execution,
}

fn render(command: &str, config: &impl Serialize, table: &Table, format: Format) -> Vec<u8> {
    let pre = Preamble::new(command, config);
    match format {
        Format::Csv => table.to_bytes(&pre),
        Format::Json => json_document(&pre, table, None),
    }
}

fn json_document(pre: &Preamble, table: &Table, extra: Option<(&str, Value)>) -> Vec<u8> {
    let mut doc = serde_json::to_value(pre).expect("preamble serializes");
    let obj = doc.as_object_mut().expect("preamble is an object");
    obj.insert("columns".into(), table.columns.clone().into());
    let rows: Vec<Value> = table.rows.iter().map(|r| r.iter().map(cell_json).collect()).collect();
    obj.insert("rows".into(), rows.into());
    if let Some((k, v)) = extra {
        obj.insert(k.into(), v);
    }
    let mut out = serde_json::to_vec_pretty(&doc).expect("json");
    out.push(b'\n');
    out
}

fn cell_json(c: &Cell) -> Value {
    match c {
        Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
        Cell::Int(v) => (*v).into(),
        Cell::Text(s) => s.clone().into(),
    }
}

fn params(alpha: f64) -> Result<ModelParams, UsageError> {
    ModelParams::new(alpha).map_err(|e| usage(e.to_string()))
}

fn positive(name: &str, v: f64) -> Result<(), UsageError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("{name} must be positive and finite, got {v}")))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<(), UsageError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("{name} must be nonnegative and finite, got {v}")))
    }
}

fn above_minimum(name: &str, h: f64, p: ModelParams) -> Result<(), UsageError> {
    if h > p.h_min() && h.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("{name} = {h} must exceed alpha + 1 = {}", p.h_min())))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<(), UsageError> {
    if v >= min {
        Ok(())
    } else {
        Err(usage(format!("{name} must be at least {min}, got {v}")))
    }
}

// ---------------------------------------------------------------- orbit

#[derive(Debug, Args, Serialize)]
pub struct OrbitFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    /// Integrator tolerance.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    /// Resample the period to this many evenly spaced points (0 keeps the integrator steps).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    /// Also write the orbit summary as JSON to this path.
    #[arg(long)]
    #[serde(skip)]
    pub summary: Option<std::path::PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitConfig {
    pub alpha: f64,
    pub h: f64,
    pub tol: f64,
    pub samples: usize,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self { alpha: 1.0, h: 2.61, tol: DEFAULT_TOL, samples: 0 }
    }
}

pub fn orbit(ctx: &Context, flags: &OrbitFlags) -> anyhow::Result<Output> {
    let c: OrbitConfig = resolve(ctx.file, flags)?;
    let p = params(c.alpha)?;
    above_minimum("h", c.h, p)?;
    positive("tol", c.tol)?;

    let orbit = orbit_from_energy(c.h, p, c.tol)?;
    let summary = summarize(&orbit)?;
    let samples = if c.samples == 0 { orbit.dense.samples.clone() } else { orbit.dense.resample(c.samples) };
    let table = trajectory_table(&samples, p);
    let pre = Preamble::new("orbit", &c);
    let summary_doc = summary_json(&pre, &summary);
    let body = match ctx.format {
        Format::Csv => table.to_bytes(&pre),
        Format::Json => summary_doc.clone(),
    };
    let summary = flags.summary.as_ref().map(|_| summary_doc);
    Ok(Output { body, summary, failed: None })
}

fn summary_json(pre: &Preamble, s: &OrbitSummary) -> Vec<u8> {
    let mut doc = serde_json::to_value(pre).expect("preamble");
    doc.as_object_mut().unwrap().insert("summary".into(), serde_json::to_value(s).expect("summary"));
    let mut out = serde_json::to_vec_pretty(&doc).expect("json");
    out.push(b'\n');
    out
}

// ---------------------------------------------------------------- eos

#[derive(Debug, Args, Serialize)]
pub struct EosFlags {
    /// Comma-separated alpha values.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    alphas: Option<Vec<f64>>,
    /// Comma-separated offsets h - (alpha + 1).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    offsets: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EosConfig {
    pub alphas: Vec<f64>,
    pub offsets: Vec<f64>,
    pub tol: f64,
}

impl Default for EosConfig {
    fn default() -> Self {
        Self { alphas: DEFAULT_ALPHAS.to_vec(), offsets: default_offsets(16), tol: DEFAULT_TOL }
    }
}

pub fn eos(ctx: &Context, flags: &EosFlags) -> anyhow::Result<Output> {
    let c: EosConfig = resolve(ctx.file, flags)?;
    at_least("number of alphas", c.alphas.len(), 1)?;
    at_least("number of offsets", c.offsets.len(), 1)?;
    for &a in &c.alphas {
        params(a)?;
    }
    for &o in &c.offsets {
        positive("offset", o)?;
    }
    positive("tol", c.tol)?;
    // failed cells stay in the table with their error name
    let cells = eos_grid(&c.alphas, &c.offsets, c.tol, ctx.exec);
    Ok(Output::body(render("eos", &c, &eos_table(&cells), ctx.format)))
}

// ---------------------------------------------------------------- contours

#[derive(Debug, Args, Serialize)]
pub struct ContourFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    /// Comma-separated energy levels.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<f64>>,
    /// Points per curve.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourConfig {
    pub alpha: f64,
    pub levels: Vec<f64>,
    pub points: usize,
    pub tol: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self { alpha: 1.0, levels: vec![3.40, 2.61, 2.19, 2.01], points: 256, tol: DEFAULT_TOL }
    }
}

pub fn contours(ctx: &Context, flags: &ContourFlags) -> anyhow::Result<Output> {
    let c: ContourConfig = resolve(ctx.file, flags)?;
    let p = params(c.alpha)?;
    at_least("number of levels", c.levels.len(), 1)?;
    for &h in &c.levels {
        above_minimum("level", h, p)?;
    }
    at_least("points", c.points, 2)?;
    positive("tol", c.tol)?;

    let curves = map_indexed(ctx.exec, c.levels.len(), |i| {
        let h = c.levels[i];
        orbit_from_energy(h, p, c.tol).map(|o| (h, o.dense.resample(c.points)))
    })
    .into_iter()
    .collect::<Result<Vec<_>, LvError>>()?;
    Ok(Output::body(render("contours", &c, &contour_table(&curves, p), ctx.format)))
}

// ---------------------------------------------------------------- ssa

#[derive(Debug, Args, Serialize)]
pub struct SsaFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    /// System size; counts are densities times omega.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    /// Initial prey density.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    x0: Option<f64>,
    /// Initial predator density.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    y0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    paths: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Event cap per path.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_events: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsaConfig {
    pub alpha: f64,
    pub omega: f64,
    pub x0: f64,
    pub y0: f64,
    pub t_max: f64,
    pub paths: usize,
    pub seed: u64,
    pub max_events: usize,
}

impl Default for SsaConfig {
    fn default() -> Self {
        Self { alpha: 1.0, omega: 100.0, x0: 1.2, y0: 1.0, t_max: 10.0, paths: 1, seed: 0, max_events: DEFAULT_MAX_EVENTS }
    }
}

pub fn ssa(ctx: &Context, flags: &SsaFlags) -> anyhow::Result<Output> {
    let c: SsaConfig = resolve(ctx.file, flags)?;
    let p = params(c.alpha)?;
    positive("omega", c.omega)?;
    nonnegative("x0", c.x0)?;
    nonnegative("y0", c.y0)?;
    positive("t_max", c.t_max)?;
    at_least("paths", c.paths, 1)?;
    at_least("max_events", c.max_events, 1)?;
    let start = DiscreteState::from_densities(c.x0, c.y0, c.omega).map_err(|e| usage(e.to_string()))?;

    let paths = map_indexed(ctx.exec, c.paths, |i| {
        let mut rng = path_rng(c.seed, i as u64);
        ssa_simulate_with(start, p, c.t_max, c.max_events, c.seed, &mut rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>, LvError>>()?;
    Ok(Output::body(render("ssa", &c, &jump_table(&paths), ctx.format)))
}

// ---------------------------------------------------------------- sde

#[derive(Debug, Args, Serialize)]
pub struct SdeFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    x0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    y0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_max: Option<f64>,
    /// Write every k-th step (the final time is always written).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    record_every: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    paths: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeRunConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub x0: f64,
    pub y0: f64,
    pub dt: f64,
    pub t_max: f64,
    pub record_every: usize,
    pub paths: usize,
    pub seed: u64,
}

impl Default for SdeRunConfig {
    fn default() -> Self {
        Self { alpha: 1.0, epsilon: 0.01, x0: 1.2, y0: 1.0, dt: 1e-3, t_max: 10.0, record_every: 10, paths: 1, seed: 0 }
    }
}

pub fn sde(ctx: &Context, flags: &SdeFlags) -> anyhow::Result<Output> {
    let c: SdeRunConfig = resolve(ctx.file, flags)?;
    let p = params(c.alpha)?;
    nonnegative("epsilon", c.epsilon)?;
    positive("x0", c.x0)?;
    positive("y0", c.y0)?;
    positive("dt", c.dt)?;
    positive("t_max", c.t_max)?;
    at_least("record_every", c.record_every, 1)?;
    at_least("paths", c.paths, 1)?;

    let start = PhaseState::new(c.x0, c.y0).map_err(|e| usage(e.to_string()))?;
    let config = SdeConfig { epsilon: c.epsilon, dt: c.dt, t_max: c.t_max, record_every: c.record_every };
    let paths = sde_ensemble(start, p, config, c.seed, c.paths, ctx.exec)
        .into_iter()
        .collect::<Result<Vec<_>, LvError>>()?;
    Ok(Output::body(render("sde", &c, &sde_table(&paths, p), ctx.format)))
}

// ---------------------------------------------------------------- hdiff

#[derive(Debug, Args, Serialize)]
pub struct HdiffFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    /// Number of log-spaced grid points above alpha + 1.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_points: Option<usize>,
    /// Smallest offset h - (alpha + 1).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    offset_min: Option<f64>,
    /// Largest offset h - (alpha + 1).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    offset_max: Option<f64>,
    /// Normalization point, p(h_ref) A(h_ref)^2 = 1 (default alpha + 2).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    h_ref: Option<f64>,
    /// Coefficient formulas: literal or ito_derived.
    #[arg(long, value_parser = parse_name::<CoefficientForm>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    form: Option<CoefficientForm>,
    /// Noise average: mean_of_root or root_mean_square.
    #[arg(long, value_parser = parse_name::<NoiseAverage>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    average: Option<NoiseAverage>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HdiffConfig {
    pub alpha: f64,
    pub grid_points: usize,
    pub offset_min: f64,
    pub offset_max: f64,
    pub h_ref: Option<f64>,
    pub form: CoefficientForm,
    pub average: NoiseAverage,
    pub tol: f64,
}

impl Default for HdiffConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            grid_points: DEFAULT_GRID_POINTS,
            offset_min: DEFAULT_OFFSET_RANGE.0,
            offset_max: DEFAULT_OFFSET_RANGE.1,
            h_ref: None,
            form: CoefficientForm::default(),
            average: NoiseAverage::default(),
            tol: DEFAULT_TOL,
        }
    }
}

pub fn hdiff(ctx: &Context, flags: &HdiffFlags) -> anyhow::Result<Output> {
    let mut c: HdiffConfig = resolve(ctx.file, flags)?;
    let p = params(c.alpha)?;
    at_least("grid_points", c.grid_points, 2)?;
    positive("offset_min", c.offset_min)?;
    positive("offset_max", c.offset_max)?;
    if c.offset_max <= c.offset_min {
        return Err(usage("offset_max must exceed offset_min").into());
    }
    positive("tol", c.tol)?;
    let grid: Vec<f64> = log_space(c.offset_min, c.offset_max, c.grid_points).iter().map(|o| p.h_min() + o).collect();
    let h_ref = *c.h_ref.get_or_insert(p.h_min() + 1.0);
    if !(h_ref >= grid[0] && h_ref <= grid[grid.len() - 1]) {
        return Err(usage(format!("h_ref {h_ref} outside the grid [{}, {}]", grid[0], grid[grid.len() - 1])).into());
    }
    let mode = HDiffusionMode { form: c.form, average: c.average };
    let table = pss_curve_with(p, &grid, h_ref, mode, c.tol, ctx.exec)?;
    Ok(Output::body(render("hdiff", &c, &hdiff_table(&table), ctx.format)))
}

// ---------------------------------------------------------------- entropy

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialDensity {
    /// `(h - H)_+^4 x`
    Level,
    /// Smooth bump inside the domain.
    Bump,
    /// `w0 = 1`
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Unit,
    Gibbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyKind {
    #[serde(rename = "zlnz")]
    ZLnZ,
    Ln,
    One,
}

#[derive(Debug, Args, Serialize)]
pub struct EntropyFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    /// The domain is the sublevel set H <= h.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    /// Initial density ratio: level, bump or uniform.
    #[arg(long, value_parser = parse_name::<InitialDensity>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    density: Option<InitialDensity>,
    /// Stationary weight: unit or gibbs.
    #[arg(long, value_parser = parse_name::<WeightKind>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<WeightKind>,
    /// Temperature of the gibbs weight.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    /// Entropy function: zlnz, ln or one.
    #[arg(long, value_parser = parse_name::<EntropyKind>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    psi: Option<EntropyKind>,
    /// Number of evenly spaced times in [0, t_max].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    times: Option<usize>,
    /// Default: half the period of the boundary orbit.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_max: Option<f64>,
    /// Gauss-Legendre nodes per axis.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    quadrature: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyConfig {
    pub alpha: f64,
    pub h: f64,
    pub density: InitialDensity,
    pub rho: WeightKind,
    pub theta: f64,
    pub psi: EntropyKind,
    pub times: usize,
    pub t_max: Option<f64>,
    pub quadrature: usize,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            h: 2.61,
            density: InitialDensity::Level,
            rho: WeightKind::Unit,
            theta: 1.0,
            psi: EntropyKind::ZLnZ,
            times: 9,
            t_max: None,
            quadrature: 64,
        }
    }
}

pub fn entropy(ctx: &Context, flags: &EntropyFlags) -> anyhow::Result<Output> {
    let mut c: EntropyConfig = resolve(ctx.file, flags)?;
    let p = params(c.alpha)?;
    above_minimum("h", c.h, p)?;
    positive("theta", c.theta)?;
    at_least("times", c.times, 1)?;
    at_least("quadrature", c.quadrature, 2)?;
    if let Some(t) = c.t_max {
        nonnegative("t_max", t)?;
    }

    let t_max = match c.t_max {
        Some(t) => t,
        None => *c.t_max.insert(0.5 * orbit_from_energy(c.h, p, DEFAULT_TOL)?.period_tau),
    };
    let rho = match c.rho {
        WeightKind::Unit => Rho::unit(),
        WeightKind::Gibbs => Rho::gibbs(c.theta)?,
    };
    let psi = match c.psi {
        EntropyKind::ZLnZ => Psi::ZLnZ,
        EntropyKind::Ln => Psi::Ln,
        EntropyKind::One => Psi::One,
    };
    let domain = Domain::sublevel_set(c.h, p)?;
    let w0 = match c.density {
        InitialDensity::Uniform => uniform_ratio(),
        InitialDensity::Bump => {
            let [_, p1, _, _] = log_extent(c.h, p)?;
            let bump = log_bump(PhaseState::from_log(0.35 * p1, 0.0), 0.5 * p1);
            std::sync::Arc::new(move |s| 2.0 * bump(s))
        }
        InitialDensity::Level => {
            let h = c.h;
            std::sync::Arc::new(move |s| (h - hamiltonian(s, p)).max(0.0).powi(4) * s.x())
        }
    };
    let mut field = DensityField::new(move |s| w0(s), rho, domain);
    field.quadrature_n = c.quadrature;

    let n = c.times;
    let mut series = Vec::with_capacity(n);
    for k in 0..n {
        let t = if n == 1 { 0.0 } else { t_max * k as f64 / (n - 1) as f64 };
        series.push((t, relative_entropy_at_time(&field, p, t, &psi, ctx.exec)?));
    }
    Ok(Output::body(render("entropy", &c, &entropy_table(&series), ctx.format)))
}

// ---------------------------------------------------------------- field

#[derive(Debug, Args, Serialize)]
pub struct FieldFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    /// Comma-separated x range, lo,hi.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    #[serde(skip_serializing_if = "Option::is_none")]
    x_range: Option<Vec<f64>>,
    /// Comma-separated y range, lo,hi.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    #[serde(skip_serializing_if = "Option::is_none")]
    y_range: Option<Vec<f64>>,
    /// Grid points per axis.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub x_range: Vec<f64>,
    pub y_range: Vec<f64>,
    pub grid: usize,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { alpha: 1.0, epsilon: 0.1, x_range: vec![0.2, 2.5], y_range: vec![0.2, 2.5], grid: 21 }
    }
}

pub fn field(ctx: &Context, flags: &FieldFlags) -> anyhow::Result<Output> {
    let c: FieldConfig = resolve(ctx.file, flags)?;
    let p = params(c.alpha)?;
    nonnegative("epsilon", c.epsilon)?;
    at_least("grid", c.grid, 2)?;
    for (name, r) in [("x_range", &c.x_range), ("y_range", &c.y_range)] {
        if !(r.len() == 2 && r[0] > 0.0 && r[1] > r[0] && r[1].is_finite()) {
            return Err(usage(format!("{name} must be lo,hi with 0 < lo < hi, got {r:?}")).into());
        }
    }
    let axis = |r: &[f64]| -> Vec<f64> { (0..c.grid).map(|i| r[0] + (r[1] - r[0]) * i as f64 / (c.grid - 1) as f64).collect() };
    let (xs, ys) = (axis(&c.x_range), axis(&c.y_range));
    let mut points = Vec::with_capacity(c.grid * c.grid);
    for &x in &xs {
        for &y in &ys {
            let s = PhaseState::new(x, y)?;
            points.push((s, decomposition_drift(s, p, c.epsilon)));
        }
    }
    Ok(Output::body(render("field", &c, &field_table(&points, p, c.epsilon), ctx.format)))
}

// ---------------------------------------------------------------- check

#[derive(Debug, Args, Serialize)]
pub struct CheckFlags {
    /// Comma-separated check numbers (default: all).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    ids: Option<Vec<u32>>,
    /// Do not fail on the checks known to be unattainable as stated.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    allow_known_failures: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub ids: Vec<u32>,
    pub allow_known_failures: bool,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { ids: CHECKS.iter().map(|c| c.0).collect(), allow_known_failures: false }
    }
}

pub fn check(ctx: &Context, flags: &CheckFlags) -> anyhow::Result<Output> {
    let c: CheckConfig = resolve(ctx.file, flags)?;
    if let Some(id) = c.ids.iter().find(|id| !CHECKS.iter().any(|k| k.0 == **id)) {
        return Err(usage(format!("no check numbered {id}; valid numbers are 1..={}", CHECKS.len())).into());
    }
    let outcomes: Vec<CheckOutcome> = c.ids.iter().map(|&id| run_check(id, ctx.exec)).collect();
    let tolerated = |o: &CheckOutcome| c.allow_known_failures && KNOWN_FAILURES.contains(&o.id);
    let failing: Vec<u32> = outcomes.iter().filter(|o| !o.passed && !tolerated(o)).map(|o| o.id).collect();

    let body = match ctx.format {
        Format::Json => {
            let pre = Preamble::new("check", &c);
            let mut doc = serde_json::to_value(&pre)?;
            doc.as_object_mut().unwrap().insert("outcomes".into(), serde_json::to_value(&outcomes)?);
            let mut out = serde_json::to_vec_pretty(&doc)?;
            out.push(b'\n');
            out
        }
        Format::Csv => {
            let mut text = String::new();
            for o in &outcomes {
                let known = if !o.passed && KNOWN_FAILURES.contains(&o.id) { " (known)" } else { "" };
                text.push_str(&format!("{o}{known}\n"));
            }
            let passed = outcomes.iter().filter(|o| o.passed).count();
            text.push_str(&format!("{passed}/{} passed\n", outcomes.len()));
            text.into_bytes()
        }
    };
    let failed = (!failing.is_empty()).then(|| format!("checks failed: {failing:?}"));
    Ok(Output { body, summary: None, failed })
}
