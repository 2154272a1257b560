//! Config ingestion, command execution and table output for the `winoc`
//! binary.
//!
//! Configs are TOML with `[stack]`, `[geometry]`, `[approx]`, and optional
//! `[sweep]`, `[output]` and `[oracle]` sections. All inputs are SI units.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::complexity::complexity_report;
use crate::gain::{ApproxConfig, Channel, Model, ThetaBoundRule, SPEED_OF_LIGHT};
use crate::geometry::{AngleSample, Geometry};
use crate::materials::StackSpec;
use crate::oracle::{check_angle, Caps, Mismatch};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{key}: {constraint}")]
    Invalid { key: String, constraint: String },
}

impl ConfigError {
    fn invalid(key: &str, constraint: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            constraint: constraint.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("computation failed: {0}")]
    Compute(#[from] crate::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot write table: {0}")]
    Csv(#[from] csv::Error),
    #[error(
        "oracle mismatch at theta={theta:.16e}, n={n}, m={m}, J={layers}, J_bound={bound}: counted {counted}, enumerated {enumerated}",
        theta = .0.theta,
        n = .0.n,
        m = .0.m,
        layers = .0.layers,
        bound = bound_label(.0.boundary_layers),
        counted = .0.counted,
        enumerated = .0.enumerated
    )]
    OracleMismatch(Box<Mismatch>),
}

impl CliError {
    /// 1 validation, 2 computation, 3 oracle mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Compute(_) | CliError::Io { .. } | CliError::Csv(_) => 2,
            CliError::OracleMismatch(_) => 3,
        }
    }
}

fn bound_label(b: Option<u32>) -> String {
    b.map_or_else(|| "inf".to_string(), |b| b.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Tsv,
}

impl Format {
    fn delimiter(self) -> u8 {
        match self {
            Format::Csv => b',',
            Format::Tsv => b'\t',
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "tsv" => Ok(Format::Tsv),
            other => Err(format!("unknown format `{other}` (expected csv or tsv)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Layers,
    Displacement,
    BoundaryLayers,
    Samples,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Layers => "J",
            SweepVariable::Displacement => "d",
            SweepVariable::BoundaryLayers => "J_bound",
            SweepVariable::Samples => "r",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Format,
}

/// Small-instance matrix for `oracle-check`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMatrix {
    pub layers: Vec<u32>,
    /// `None` is the boundary-less case.
    pub boundaries: Vec<Option<u32>>,
    pub caps: Caps,
    /// Sample angles as fractions of each `θ_bound`.
    pub angle_fractions: Vec<f64>,
}

impl Default for OracleMatrix {
    fn default() -> Self {
        OracleMatrix {
            layers: vec![1, 2, 3],
            boundaries: vec![None, Some(0), Some(1), Some(2), Some(3)],
            caps: Caps { n_max: 9, m_max: 6 },
            angle_fractions: vec![0.6, 0.7, 0.8, 0.9, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub stack: StackSpec,
    pub geometry: Geometry,
    pub approx: ApproxConfig,
    pub theta_rule: ThetaBoundRule,
    pub sweep: Option<Sweep>,
    pub output: OutputSpec,
    pub oracle: OracleMatrix,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    stack: Option<RawStack>,
    geometry: Option<RawGeometry>,
    approx: Option<RawApprox>,
    sweep: Option<RawSweep>,
    output: Option<RawOutput>,
    oracle: Option<RawOracle>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStack {
    l1: Option<f64>,
    l2: Option<f64>,
    l3: Option<f64>,
    n1: Option<f64>,
    n2: Option<f64>,
    n3: Option<f64>,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    lambda3: Option<f64>,
    frequency: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    #[serde(rename = "J")]
    layers: Option<i64>,
    #[serde(rename = "J_bound")]
    boundary_layers: Option<i64>,
    d: Option<f64>,
    #[serde(rename = "L")]
    antenna_length: Option<f64>,
    g_t: Option<f64>,
    g_r: Option<f64>,
    r: Option<i64>,
    q: Option<i64>,
    theta_bound: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawApprox {
    t_c: Option<f64>,
    v: Option<f64>,
    refraction_truncation: Option<bool>,
    coherence_cutoff: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    variable: Option<String>,
    values: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<PathBuf>,
    format: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    #[serde(rename = "J")]
    layers: Option<Vec<i64>>,
    #[serde(rename = "J_bound")]
    boundaries: Option<Vec<i64>>,
    unbounded: Option<bool>,
    n_max: Option<i64>,
    m_max: Option<i64>,
    angle_fractions: Option<Vec<f64>>,
}

fn required<T>(v: Option<T>, key: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| ConfigError::invalid(key, "required key is missing"))
}

fn positive(v: f64, key: &str, name: &str) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::invalid(key, format!("{name} > 0")))
    }
}

fn non_negative(v: f64, key: &str, name: &str) -> Result<f64, ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::invalid(key, format!("{name} ≥ 0")))
    }
}

fn int_at_least(v: i64, min: i64, key: &str, name: &str) -> Result<u32, ConfigError> {
    if v < min || v > i64::from(u32::MAX) {
        return Err(ConfigError::invalid(key, format!("{name} ≥ {min}")));
    }
    Ok(v as u32)
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn parse_stack(raw: RawStack) -> Result<StackSpec, ConfigError> {
    let l1 = positive(required(raw.l1, "stack.l1")?, "stack.l1", "l1")?;
    let l2 = positive(required(raw.l2, "stack.l2")?, "stack.l2", "l2")?;
    let l3 = positive(required(raw.l3, "stack.l3")?, "stack.l3", "l3")?;
    let n1 = required(raw.n1, "stack.n1")?;
    let n2 = required(raw.n2, "stack.n2")?;
    let n3 = required(raw.n3, "stack.n3")?;
    for (v, key, name) in [(n1, "stack.n1", "n1"), (n2, "stack.n2", "n2"), (n3, "stack.n3", "n3")] {
        if !(v.is_finite() && v >= 1.0) {
            return Err(ConfigError::invalid(key, format!("{name} ≥ 1")));
        }
    }
    if n1 > n3 {
        return Err(ConfigError::invalid("stack.n1", "n1 ≤ n3"));
    }
    if n2 > n3 {
        return Err(ConfigError::invalid("stack.n2", "n2 ≤ n3"));
    }
    let a1 = non_negative(required(raw.lambda1, "stack.lambda1")?, "stack.lambda1", "lambda1")?;
    let a2 = non_negative(required(raw.lambda2, "stack.lambda2")?, "stack.lambda2", "lambda2")?;
    let a3 = non_negative(required(raw.lambda3, "stack.lambda3")?, "stack.lambda3", "lambda3")?;
    let frequency = non_negative(raw.frequency.unwrap_or(0.0), "stack.frequency", "frequency")?;
    let stack = StackSpec {
        thickness: [l1, l2, l3],
        index: [n1, n2, n3],
        attenuation: [a1, a2, a3],
        frequency,
    };
    stack
        .validate()
        .map_err(|e| ConfigError::invalid("stack", e.to_string()))?;
    Ok(stack)
}

fn parse_geometry(raw: RawGeometry) -> Result<(Geometry, ThetaBoundRule), ConfigError> {
    let layers = int_at_least(required(raw.layers, "geometry.J")?, 1, "geometry.J", "J")?;
    let boundary_layers = raw
        .boundary_layers
        .map(|b| int_at_least(b, 0, "geometry.J_bound", "J_bound"))
        .transpose()?;
    let d = non_negative(required(raw.d, "geometry.d")?, "geometry.d", "d")?;
    let l = positive(required(raw.antenna_length, "geometry.L")?, "geometry.L", "L")?;
    let g_t = positive(raw.g_t.unwrap_or(1.0), "geometry.g_t", "g_t")?;
    let g_r = positive(raw.g_r.unwrap_or(1.0), "geometry.g_r", "g_r")?;
    let r = int_at_least(required(raw.r, "geometry.r")?, 1, "geometry.r", "r")?;
    let rule = match (raw.q, raw.theta_bound) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::invalid("geometry.theta_bound", "give either q or theta_bound, not both"));
        }
        (_, Some(t)) => {
            if !(t > 0.0 && t < std::f64::consts::FRAC_PI_2) {
                return Err(ConfigError::invalid("geometry.theta_bound", "0 < theta_bound < π/2"));
            }
            ThetaBoundRule::Fixed(t)
        }
        (q, None) => ThetaBoundRule::Solve {
            q: int_at_least(q.unwrap_or(0), 0, "geometry.q", "q")?,
        },
    };
    let geometry = Geometry {
        layers,
        boundary_layers,
        displacement: d,
        antenna_length: l,
        tx_gain: g_t,
        rx_gain: g_r,
        samples: r,
    };
    Ok((geometry, rule))
}

fn parse_approx(raw: Option<RawApprox>) -> Result<ApproxConfig, ConfigError> {
    let d = ApproxConfig::default();
    let Some(raw) = raw else {
        return Ok(d);
    };
    Ok(ApproxConfig {
        coherence_time: positive(raw.t_c.unwrap_or(d.coherence_time), "approx.t_c", "t_c")?,
        light_speed: positive(raw.v.unwrap_or(SPEED_OF_LIGHT), "approx.v", "v")?,
        truncate_refractions: raw.refraction_truncation.unwrap_or(true),
        coherence_cutoff: raw.coherence_cutoff.unwrap_or(true),
    })
}

fn parse_sweep(raw: RawSweep) -> Result<Sweep, ConfigError> {
    let variable = match required(raw.variable, "sweep.variable")?.as_str() {
        "J" => SweepVariable::Layers,
        "d" => SweepVariable::Displacement,
        "J_bound" => SweepVariable::BoundaryLayers,
        "r" => SweepVariable::Samples,
        other => {
            return Err(ConfigError::invalid(
                "sweep.variable",
                format!("`{other}` is not one of J, d, J_bound, r"),
            ))
        }
    };
    let values = required(raw.values, "sweep.values")?;
    if values.is_empty() {
        return Err(ConfigError::invalid("sweep.values", "at least one value"));
    }
    for v in &values {
        let ok = match variable {
            SweepVariable::Displacement => v.is_finite() && *v >= 0.0,
            SweepVariable::Layers | SweepVariable::Samples => v.fract() == 0.0 && *v >= 1.0 && *v <= f64::from(u32::MAX),
            SweepVariable::BoundaryLayers => v.fract() == 0.0 && *v >= 0.0 && *v <= f64::from(u32::MAX),
        };
        if !ok {
            let constraint = match variable {
                SweepVariable::Displacement => "d ≥ 0",
                SweepVariable::Layers => "integer J ≥ 1",
                SweepVariable::Samples => "integer r ≥ 1",
                SweepVariable::BoundaryLayers => "integer J_bound ≥ 0",
            };
            return Err(ConfigError::invalid("sweep.values", constraint));
        }
    }
    Ok(Sweep { variable, values })
}

fn parse_output(raw: Option<RawOutput>) -> Result<OutputSpec, ConfigError> {
    let raw = raw.unwrap_or(RawOutput { path: None, format: None });
    let format = match raw.format {
        Some(f) => f.parse().map_err(|e: String| ConfigError::invalid("output.format", e))?,
        None => Format::Csv,
    };
    Ok(OutputSpec { path: raw.path, format })
}

fn parse_oracle(raw: Option<RawOracle>) -> Result<OracleMatrix, ConfigError> {
    let d = OracleMatrix::default();
    let Some(raw) = raw else {
        return Ok(d);
    };
    let layers = match raw.layers {
        Some(v) => v
            .into_iter()
            .map(|j| int_at_least(j, 1, "oracle.J", "J"))
            .collect::<Result<_, _>>()?,
        None => d.layers,
    };
    let mut boundaries = Vec::new();
    if raw.unbounded.unwrap_or(true) {
        boundaries.push(None);
    }
    match raw.boundaries {
        Some(v) => {
            for b in v {
                boundaries.push(Some(int_at_least(b, 0, "oracle.J_bound", "J_bound")?));
            }
        }
        None => boundaries.extend(d.boundaries.iter().flatten().map(|b| Some(*b))),
    }
    let n_max = int_at_least(raw.n_max.unwrap_or(d.caps.n_max as i64), 0, "oracle.n_max", "n_max")?;
    let m_max = int_at_least(raw.m_max.unwrap_or(d.caps.m_max as i64), 0, "oracle.m_max", "m_max")?;
    let caps = Caps::new(u64::from(n_max), u64::from(m_max))
        .map_err(|e| ConfigError::invalid("oracle.n_max", e.to_string()))?;
    let angle_fractions = raw.angle_fractions.unwrap_or(d.angle_fractions);
    if angle_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(ConfigError::invalid("oracle.angle_fractions", "0 < fraction ≤ 1"));
    }
    Ok(OracleMatrix {
        layers,
        boundaries,
        caps,
        angle_fractions,
    })
}

/// Parse and validate a config document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let stack = parse_stack(required(raw.stack, "stack")?)?;
    let (geometry, theta_rule) = parse_geometry(required(raw.geometry, "geometry")?)?;
    Ok(RunConfig {
        stack,
        geometry,
        approx: parse_approx(raw.approx)?,
        theta_rule,
        sweep: raw.sweep.map(parse_sweep).transpose()?,
        output: parse_output(raw.output)?,
        oracle: parse_oracle(raw.oracle)?,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_config(&text)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Gain,
    CompareModels,
    ApproxError,
    Sweep,
    Complexity,
    OracleCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Detail {
    #[default]
    Summary,
    Angle,
    Class,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub detail: Detail,
    /// Model for `gain` and the reference of `approx-error`. `gain`
    /// defaults to the constrained model when `J_bound` is set,
    /// `approx-error` to the boundary-less one.
    pub model: Option<Model>,
    pub serial: bool,
}

/// Header plus string rows, already in output order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

struct Point {
    label: [String; 2],
    geometry: Geometry,
}

fn points(cfg: &RunConfig) -> Vec<Point> {
    let Some(sweep) = &cfg.sweep else {
        return vec![Point {
            label: [String::new(), String::new()],
            geometry: cfg.geometry,
        }];
    };
    sweep
        .values
        .iter()
        .map(|&v| {
            let mut g = cfg.geometry;
            let value = match sweep.variable {
                SweepVariable::Layers => {
                    g.layers = v as u32;
                    g.layers.to_string()
                }
                SweepVariable::Displacement => {
                    g.displacement = v;
                    real(v)
                }
                SweepVariable::BoundaryLayers => {
                    g.boundary_layers = Some(v as u32);
                    (v as u32).to_string()
                }
                SweepVariable::Samples => {
                    g.samples = v as u32;
                    g.samples.to_string()
                }
            };
            Point {
                label: [sweep.variable.name().to_string(), value],
                geometry: g,
            }
        })
        .collect()
}

fn channel(cfg: &RunConfig, geometry: Geometry, opts: &RunOptions) -> Result<Channel, CliError> {
    Ok(Channel::new(cfg.stack, geometry, cfg.theta_rule)?
        .parallel(!opts.serial)
        .with_class_detail(opts.detail == Detail::Class))
}

fn gain_table(cfg: &RunConfig, opts: &RunOptions) -> Result<Table, CliError> {
    let mut t = match opts.detail {
        Detail::Summary => Table::new(&["sweep", "value", "model", "J", "J_bound", "r", "theta_bound", "h_linear", "h_db", "loops"]),
        Detail::Angle => Table::new(&["sweep", "value", "model", "theta", "h_theta", "h_theta_db"]),
        Detail::Class => Table::new(&["sweep", "value", "model", "theta", "n", "m", "count", "class_gain", "class_gain_db"]),
    };
    for p in points(cfg) {
        let ch = channel(cfg, p.geometry, opts)?;
        let model = opts.model.unwrap_or(if p.geometry.boundary_layers.is_some() {
            Model::BoundaryConstrained
        } else {
            Model::BoundaryLess
        });
        let res = ch.total_gain(model)?;
        let lead = [p.label[0].clone(), p.label[1].clone(), model.name().to_string()];
        match opts.detail {
            Detail::Summary => {
                let mut row = lead.to_vec();
                row.extend([
                    p.geometry.layers.to_string(),
                    bound_label(p.geometry.boundary_layers),
                    p.geometry.samples.to_string(),
                    real(res.theta_bound),
                    real(res.h_linear),
                    real(res.h_db),
                    res.loops_executed.to_string(),
                ]);
                t.rows.push(row);
            }
            Detail::Angle => {
                for a in &res.per_angle {
                    let mut row = lead.to_vec();
                    row.extend([real(a.theta), real(a.h), real(db(a.h))]);
                    t.rows.push(row);
                }
            }
            Detail::Class => {
                for c in res.per_class.iter().flatten() {
                    let mut row = lead.to_vec();
                    row.extend([
                        real(c.theta),
                        c.n.to_string(),
                        c.m.to_string(),
                        c.count.to_string(),
                        real(c.gain),
                        real(10.0 * c.ln_gain / std::f64::consts::LN_10),
                    ]);
                    t.rows.push(row);
                }
            }
        }
    }
    Ok(t)
}

fn compare_table(cfg: &RunConfig, opts: &RunOptions) -> Result<Table, CliError> {
    let mut t = Table::new(&[
        "sweep",
        "value",
        "J",
        "J_bound",
        "h_bl",
        "h_bc",
        "h_bl_db",
        "h_bc_db",
        "difference",
        "relative_difference",
    ]);
    for p in points(cfg) {
        let ch = channel(cfg, p.geometry, opts)?;
        let bl = ch.total_gain(Model::BoundaryLess)?;
        let bc = ch.total_gain(Model::BoundaryConstrained)?;
        let diff = bl.h_linear - bc.h_linear;
        t.rows.push(vec![
            p.label[0].clone(),
            p.label[1].clone(),
            p.geometry.layers.to_string(),
            bound_label(p.geometry.boundary_layers),
            real(bl.h_linear),
            real(bc.h_linear),
            real(bl.h_db),
            real(bc.h_db),
            real(diff),
            real(diff / bl.h_linear),
        ]);
    }
    Ok(t)
}

fn approx_table(cfg: &RunConfig, opts: &RunOptions) -> Result<Table, CliError> {
    let mut t = Table::new(&[
        "sweep",
        "value",
        "model",
        "J",
        "J_bound",
        "theta_t",
        "h_full",
        "h_approx",
        "h_full_db",
        "h_approx_db",
        "relative_error",
        "gap_db",
        "loops_full",
        "loops_approx",
    ]);
    let model = opts.model.unwrap_or(Model::BoundaryLess);
    for p in points(cfg) {
        let ch = channel(cfg, p.geometry, opts)?;
        let full = ch.total_gain(model)?;
        let approx = ch.approx_total_gain(model, &cfg.approx)?;
        let timing = ch.theta_threshold(&cfg.approx, None)?;
        t.rows.push(vec![
            p.label[0].clone(),
            p.label[1].clone(),
            model.name().to_string(),
            p.geometry.layers.to_string(),
            bound_label(p.geometry.boundary_layers),
            real(timing.theta_t),
            real(full.h_linear),
            real(approx.h_linear),
            real(full.h_db),
            real(approx.h_db),
            real((full.h_linear - approx.h_linear) / full.h_linear),
            real(full.h_db - approx.h_db),
            full.loops_executed.to_string(),
            approx.loops_executed.to_string(),
        ]);
    }
    Ok(t)
}

fn sweep_table(cfg: &RunConfig, opts: &RunOptions) -> Result<Table, CliError> {
    if cfg.sweep.is_none() {
        return Err(ConfigError::invalid("sweep", "the sweep command needs a [sweep] section").into());
    }
    let mut t = Table::new(&[
        "sweep",
        "value",
        "J",
        "J_bound",
        "d",
        "r",
        "theta_bound",
        "h_bl",
        "h_bl_db",
        "h_bc",
        "h_bc_db",
        "h_approx",
        "h_approx_db",
    ]);
    for p in points(cfg) {
        let ch = channel(cfg, p.geometry, opts)?;
        let bl = ch.total_gain(Model::BoundaryLess)?;
        let bc = ch.total_gain(Model::BoundaryConstrained)?;
        let approx = ch.approx_total_gain(opts.model.unwrap_or(Model::BoundaryLess), &cfg.approx)?;
        t.rows.push(vec![
            p.label[0].clone(),
            p.label[1].clone(),
            p.geometry.layers.to_string(),
            bound_label(p.geometry.boundary_layers),
            real(p.geometry.displacement),
            p.geometry.samples.to_string(),
            real(ch.theta_bound()),
            real(bl.h_linear),
            real(bl.h_db),
            real(bc.h_linear),
            real(bc.h_db),
            real(approx.h_linear),
            real(approx.h_db),
        ]);
    }
    Ok(t)
}

fn complexity_table(cfg: &RunConfig, opts: &RunOptions) -> Result<Table, CliError> {
    let mut t = Table::new(&[
        "sweep",
        "value",
        "J",
        "J_bound",
        "r",
        "loop_bl",
        "loop_bc",
        "empirical_difference",
        "excess",
        "predicted_difference",
        "relative_gap",
        "negative_terms",
    ]);
    for p in points(cfg) {
        let ch = channel(cfg, p.geometry, opts)?;
        let r = complexity_report(&ch)?;
        t.rows.push(vec![
            p.label[0].clone(),
            p.label[1].clone(),
            p.geometry.layers.to_string(),
            bound_label(p.geometry.boundary_layers),
            p.geometry.samples.to_string(),
            r.loop_bl.to_string(),
            r.loop_bc.to_string(),
            r.empirical_difference().to_string(),
            r.excess.to_string(),
            real(r.predicted_difference),
            real(r.relative_gap()),
            r.negative_terms.to_string(),
        ]);
    }
    Ok(t)
}

fn oracle_table(cfg: &RunConfig) -> Result<Table, CliError> {
    let mut t = Table::new(&["J", "J_bound", "theta", "classes_checked", "status"]);
    let m = &cfg.oracle;
    for &layers in &m.layers {
        for &bound in &m.boundaries {
            let geom = Geometry {
                layers,
                boundary_layers: bound,
                ..cfg.geometry
            };
            let ch = Channel::new(cfg.stack, geom, cfg.theta_rule)?;
            for &f in &m.angle_fractions {
                let sample = AngleSample::new(f * ch.theta_bound(), &cfg.stack).map_err(crate::Error::from)?;
                let (checked, bad) = check_angle(&sample, &geom, ch.table(), m.caps, bound.is_some())?;
                if let Some(bad) = bad {
                    return Err(CliError::OracleMismatch(Box::new(bad)));
                }
                t.rows.push(vec![
                    layers.to_string(),
                    bound_label(bound),
                    real(sample.theta),
                    checked.to_string(),
                    "ok".to_string(),
                ]);
            }
        }
    }
    Ok(t)
}

pub fn run_command(cmd: Command, cfg: &RunConfig, opts: &RunOptions) -> Result<Table, CliError> {
    match cmd {
        Command::Gain => gain_table(cfg, opts),
        Command::CompareModels => compare_table(cfg, opts),
        Command::ApproxError => approx_table(cfg, opts),
        Command::Sweep => sweep_table(cfg, opts),
        Command::Complexity => complexity_table(cfg, opts),
        Command::OracleCheck => oracle_table(cfg),
    }
}

/// Write `table` as delimited text, header first.
pub fn write_table<W: Write>(table: &Table, format: Format, out: W) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(format.delimiter())
        .terminator(csv::Terminator::CRLF)
        .from_writer(out);
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn emit_csv(table: &Table, format: Format, path: &Path) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut buf = std::io::BufWriter::new(file);
    write_table(table, format, &mut buf)?;
    buf.flush().map_err(io)?;
    Ok(())
}

/// Column documentation printed by `--help`.
pub fn schema_help() -> String {
    let mut s = String::from("Output schemas (header row first, reals as 17 significant digits):\n");
    let schemas: [(&str, &[&str]); 8] = [
        ("gain", &["sweep", "value", "model", "J", "J_bound", "r", "theta_bound", "h_linear", "h_db", "loops"]),
        ("gain --detail angle", &["sweep", "value", "model", "theta", "h_theta", "h_theta_db"]),
        (
            "gain --detail class",
            &["sweep", "value", "model", "theta", "n", "m", "count", "class_gain", "class_gain_db"],
        ),
        (
            "compare-models",
            &["sweep", "value", "J", "J_bound", "h_bl", "h_bc", "h_bl_db", "h_bc_db", "difference", "relative_difference"],
        ),
        (
            "approx-error",
            &[
                "sweep", "value", "model", "J", "J_bound", "theta_t", "h_full", "h_approx", "h_full_db", "h_approx_db",
                "relative_error", "gap_db", "loops_full", "loops_approx",
            ],
        ),
        (
            "sweep",
            &[
                "sweep", "value", "J", "J_bound", "d", "r", "theta_bound", "h_bl", "h_bl_db", "h_bc", "h_bc_db", "h_approx",
                "h_approx_db",
            ],
        ),
        (
            "complexity",
            &[
                "sweep", "value", "J", "J_bound", "r", "loop_bl", "loop_bc", "empirical_difference", "excess",
                "predicted_difference", "relative_gap", "negative_terms",
            ],
        ),
        ("oracle-check", &["J", "J_bound", "theta", "classes_checked", "status"]),
    ];
    for (name, cols) in schemas {
        let _ = writeln!(s, "  {name}: {}", cols.join(","));
    }
    s.push_str("Rows follow sweep order, then theta ascending, then n, then m. J_bound `inf` means no boundary.\n");
    s.push_str("Exit codes: 0 success, 1 validation, 2 computation, 3 oracle mismatch.");
    s
}
