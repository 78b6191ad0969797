//! Run configuration: a versioned TOML document with nested tables, optional
//! environment overrides, and exhaustive validation into a [`Plan`].

use std::fmt;
use std::path::{Path, PathBuf};

use ambit_core::exponents::ConditionStatus;
use ambit_core::{AmbitBoundary, AmbitModel, Axis, BasisKind, LatticeConfig, LevyBasis};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Prefix of every environment variable the CLI reads.
pub const ENV_PREFIX: &str = "AMBIT_";

/// Points in generated lag and window grids.
const GRID_POINTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_basis")]
    pub basis: BasisKind,
    #[serde(default)]
    pub scaling: ScalingTable,
    #[serde(default)]
    pub lattice: LatticeTable,
    #[serde(default)]
    pub estimate: EstimateTable,
    #[serde(default)]
    pub verify: VerifyTable,
    #[serde(default)]
    pub output: OutputTable,
}

fn default_seed() -> u64 {
    20_240_601
}

fn default_basis() -> BasisKind {
    BasisKind::Gaussian { a: 0.0, b: 1.0 }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            seed: default_seed(),
            basis: default_basis(),
            scaling: ScalingTable::default(),
            lattice: LatticeTable::default(),
            estimate: EstimateTable::default(),
            verify: VerifyTable::default(),
            output: OutputTable::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingTable {
    pub tau2: f64,
    pub t_scal: f64,
    #[serde(rename = "T_scal")]
    pub t_outer: f64,
    /// Decorrelation time; `1.2 T_scal` when absent.
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub decorrelation: Option<f64>,
    pub quad_tol: f64,
}

impl Default for ScalingTable {
    fn default() -> Self {
        Self {
            tau2: 0.2,
            t_scal: 0.01,
            t_outer: 1.0,
            decorrelation: None,
            quad_tol: ambit_core::DEFAULT_QUAD_TOL,
        }
    }
}

impl ScalingTable {
    pub fn decorrelation_time(&self) -> f64 {
        self.decorrelation.unwrap_or(1.2 * self.t_outer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeTable {
    pub dx: f64,
    pub dt: f64,
    pub nx: usize,
    pub nt: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    pub realizations: usize,
}

impl Default for LatticeTable {
    fn default() -> Self {
        Self {
            dx: 0.01,
            dt: 0.01,
            nx: 10_000,
            nt: 1_000,
            burn_in: None,
            realizations: 50,
        }
    }
}

/// Estimation plan. Lags and windows are physical lengths or durations and
/// must be multiples of the lattice spacing; absent grids are log-spaced over
/// the fit range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateTable {
    pub two_point_axes: Vec<Axis>,
    pub two_point_orders: Vec<[u32; 2]>,
    pub moment_axes: Vec<Axis>,
    pub moment_orders: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temporal_lags: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spatial_lags: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temporal_windows: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spatial_windows: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temporal_fit: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spatial_fit: Option<[f64; 2]>,
    pub max_order: u32,
}

impl Default for EstimateTable {
    fn default() -> Self {
        Self {
            two_point_axes: vec![Axis::Temporal, Axis::Spatial],
            two_point_orders: vec![[1, 1], [1, 2]],
            moment_axes: vec![Axis::Spatial, Axis::Temporal],
            moment_orders: vec![1, 2, 3],
            temporal_lags: None,
            spatial_lags: None,
            temporal_windows: None,
            spatial_windows: None,
            temporal_fit: None,
            spatial_fit: None,
            max_order: 8,
        }
    }
}

/// Pass/fail tolerances of `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyTable {
    /// Relative tolerance of fitted two-point slopes.
    pub slope_tolerance: f64,
    /// Relative tolerance of fitted coarse-moment slopes.
    pub moment_tolerance: f64,
    /// Standard errors allowed between empirical and closed-form means.
    pub mean_sigmas: f64,
    /// Absolute tolerance of slopes fitted to closed-form correlators.
    pub analytic_tolerance: f64,
}

impl Default for VerifyTable {
    fn default() -> Self {
        Self {
            slope_tolerance: 0.15,
            moment_tolerance: 0.20,
            mean_sigmas: 3.0,
            analytic_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputTable {
    pub dir: PathBuf,
}

impl Default for OutputTable {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("ambit-out"),
        }
    }
}

/// Every problem found in a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const KEYS: &[(&str, &[&str])] = &[
    ("", &["schema", "seed"]),
    ("basis", &["kind", "a", "b", "lambda", "jump", "shape", "gamma", "alpha", "c", "beta", "delta", "nu"]),
    ("scaling", &["tau2", "t_scal", "T_scal", "T", "quad_tol"]),
    ("lattice", &["dx", "dt", "nx", "nt", "burn_in", "realizations"]),
    (
        "estimate",
        &[
            "two_point_axes",
            "two_point_orders",
            "moment_axes",
            "moment_orders",
            "temporal_lags",
            "spatial_lags",
            "temporal_windows",
            "spatial_windows",
            "temporal_fit",
            "spatial_fit",
            "max_order",
        ],
    ),
    ("verify", &["slope_tolerance", "moment_tolerance", "mean_sigmas", "analytic_tolerance"]),
    ("output", &["dir"]),
];

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Apply `AMBIT_<TABLE>__<KEY>=value` overrides. Keys match exactly, or
/// case-insensitively when that is unambiguous.
pub fn apply_env_overrides(
    doc: &mut toml::Table,
    vars: impl IntoIterator<Item = (String, String)>,
) -> Result<(), ConfigErrors> {
    let mut errors = Vec::new();
    let mut vars: Vec<(String, String)> = vars
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX) && k.contains("__"))
        .collect();
    vars.sort();
    for (name, raw) in vars {
        let rest = &name[ENV_PREFIX.len()..];
        let Some((table, key)) = rest.split_once("__") else { continue };
        let table = table.to_ascii_lowercase();
        let Some((_, known)) = KEYS.iter().find(|(t, _)| !t.is_empty() && *t == table) else {
            errors.push(format!("{name}: unknown table `{table}`"));
            continue;
        };
        let key = if known.contains(&key) {
            key.to_string()
        } else {
            let matches: Vec<&&str> = known.iter().filter(|k| k.eq_ignore_ascii_case(key)).collect();
            match matches.as_slice() {
                [one] => one.to_string(),
                [] => {
                    errors.push(format!("{name}: unknown key `{key}` in table `{table}`"));
                    continue;
                }
                _ => {
                    errors.push(format!("{name}: key `{key}` is ambiguous, spell it with its exact case"));
                    continue;
                }
            }
        };
        let entry = doc
            .entry(table.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        match entry {
            toml::Value::Table(t) => {
                t.insert(key, parse_value(&raw));
            }
            _ => errors.push(format!("{name}: `{table}` is not a table")),
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(ConfigErrors(errors))
    }
}

impl RunConfig {
    /// Parse a TOML document after applying environment overrides.
    pub fn from_toml_with_env(
        text: Option<&str>,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigErrors> {
        let mut doc = match text {
            Some(t) => t
                .parse::<toml::Table>()
                .map_err(|e| ConfigErrors(vec![format!("TOML syntax: {e}")]))?,
            None => {
                let mut t = toml::Table::new();
                t.insert("schema".into(), toml::Value::Integer(SCHEMA_VERSION as i64));
                t
            }
        };
        apply_env_overrides(&mut doc, vars)?;
        if !doc.contains_key("schema") {
            return Err(ConfigErrors(vec![format!(
                "missing `schema` field (this version reads schema = {SCHEMA_VERSION})"
            )]));
        }
        toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigErrors(vec![e.to_string().split_whitespace().collect::<Vec<_>>().join(" ")]))
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigErrors> {
        Self::from_toml_with_env(Some(text), std::iter::empty())
    }

    /// Load from an optional file, then the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigErrors> {
        let text = match path {
            Some(p) => Some(
                std::fs::read_to_string(p)
                    .map_err(|e| ConfigErrors(vec![format!("cannot read {}: {e}", p.display())]))?,
            ),
            None => None,
        };
        Self::from_toml_with_env(text.as_deref(), std::env::vars())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Validate and resolve. With `with_lattice` the lattice and estimation
    /// tables are checked too; otherwise only the analytic part.
    pub fn resolve(&self, with_lattice: bool) -> Result<Plan, ConfigErrors> {
        let mut errors = Vec::new();
        if self.schema != SCHEMA_VERSION {
            errors.push(format!(
                "schema = {} is not supported (expected {SCHEMA_VERSION})",
                self.schema
            ));
        }
        let basis = LevyBasis::new(self.basis).map_err(|e| errors.push(format!("basis: {e}"))).ok();
        let sc = &self.scaling;
        if !(sc.quad_tol.is_finite() && sc.quad_tol > 0.0) {
            errors.push(format!("scaling.quad_tol must be positive, got {}", sc.quad_tol));
        }
        let boundary = basis.and_then(|b| {
            AmbitBoundary::build(sc.tau2, &b, sc.t_scal, sc.t_outer, sc.decorrelation_time())
                .map_err(|e| errors.push(format!("scaling: {e}")))
                .ok()
        });
        let est = &self.estimate;
        if est.max_order < 2 {
            errors.push(format!("estimate.max_order must be at least 2, got {}", est.max_order));
        }
        if let Some(b) = basis {
            check_orders(&b, sc.tau2, est, &mut errors);
        }
        let (Some(basis), Some(boundary)) = (basis, boundary) else {
            return Err(ConfigErrors(errors));
        };
        let spec = *boundary.spec();
        let temporal_fit = fit_range(est.temporal_fit, Axis::Temporal.default_fit_range(&spec), "temporal_fit", &mut errors);
        let spatial_fit = fit_range(est.spatial_fit, Axis::Spatial.default_fit_range(&spec), "spatial_fit", &mut errors);
        let lat = &self.lattice;
        let lattice = LatticeConfig {
            dx: lat.dx,
            dt: lat.dt,
            nx: lat.nx,
            nt: lat.nt,
            burn_in: lat.burn_in,
            seed: self.seed,
            realizations: lat.realizations,
        };
        let mut plan = Plan {
            config: self.clone(),
            basis,
            boundary,
            model: AmbitModel::new(basis, boundary).with_tolerance(sc.quad_tol),
            lattice,
            temporal_fit,
            spatial_fit,
            temporal_lags: Vec::new(),
            spatial_lags: Vec::new(),
            temporal_windows: Vec::new(),
            spatial_windows: Vec::new(),
        };
        if with_lattice {
            if lat.realizations < 2 {
                errors.push(format!(
                    "lattice.realizations must be at least 2 for standard errors, got {}",
                    lat.realizations
                ));
            }
            let spacing_ok = lat.dx.is_finite() && lat.dx > 0.0 && lat.dt.is_finite() && lat.dt > 0.0;
            if spacing_ok && lat.nx > 0 && lat.nt > 0 {
                plan.temporal_lags = cells(&est.temporal_lags, temporal_fit, lat.dt, 1, lat.nt - 1, "temporal_lags", &mut errors);
                plan.spatial_lags = cells(&est.spatial_lags, spatial_fit, lat.dx, 1, lat.nx - 1, "spatial_lags", &mut errors);
                plan.temporal_windows = cells(&est.temporal_windows, temporal_fit, lat.dt, 2, lat.nt, "temporal_windows", &mut errors);
                plan.spatial_windows = cells(&est.spatial_windows, spatial_fit, lat.dx, 2, lat.nx, "spatial_windows", &mut errors);
            }
            let max_lag = if est.two_point_axes.contains(&Axis::Spatial) {
                plan.spatial_lags.iter().max().copied().unwrap_or(0) as f64 * lat.dx
            } else {
                0.0
            };
            errors.extend(lattice.violations(&boundary, max_lag));
        }
        if errors.is_empty() {
            Ok(plan)
        } else {
            Err(ConfigErrors(errors))
        }
    }
}

fn check_orders(basis: &LevyBasis, tau2: f64, est: &EstimateTable, errors: &mut Vec<String>) {
    for &[n1, n2] in &est.two_point_orders {
        if n1 == 0 || n2 == 0 {
            errors.push(format!("estimate.two_point_orders: orders must be positive, got ({n1}, {n2})"));
            continue;
        }
        if let Err(e) = basis.cumulant((n1 + n2) as f64) {
            errors.push(format!(
                "estimate.two_point_orders ({n1}, {n2}): moment of order {} does not exist: {e}",
                n1 + n2
            ));
        }
    }
    for &n in &est.moment_orders {
        if n == 0 {
            errors.push("estimate.moment_orders: orders must be positive".into());
            continue;
        }
        for k in 2..=n {
            match ConditionStatus::evaluate(basis, tau2, k) {
                ConditionStatus::Holds => {}
                ConditionStatus::Violated => {
                    errors.push(format!(
                        "estimate.moment_orders: order {n} violates the multifractal condition mu(k) - mu(k-1) < 1 at k = {k}"
                    ));
                    break;
                }
                ConditionStatus::Undefined => {
                    let detail = basis.cumulant(k as f64).err().map(|e| e.to_string()).unwrap_or_default();
                    errors.push(format!(
                        "estimate.moment_orders: order {n} needs the moment of order {k}, which does not exist: {detail}"
                    ));
                    break;
                }
            }
        }
    }
}

fn fit_range(given: Option<[f64; 2]>, default: (f64, f64), name: &str, errors: &mut Vec<String>) -> (f64, f64) {
    match given {
        None => default,
        Some([lo, hi]) => {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                errors.push(format!("estimate.{name} must satisfy 0 < lo < hi, got [{lo}, {hi}]"));
            }
            (lo, hi)
        }
    }
}

/// Convert physical lags or windows to whole cells, or generate a log-spaced
/// grid over `range` when none are given.
fn cells(
    given: &Option<Vec<f64>>,
    range: (f64, f64),
    spacing: f64,
    min: usize,
    max: usize,
    name: &str,
    errors: &mut Vec<String>,
) -> Vec<usize> {
    match given {
        Some(values) => {
            let mut out = Vec::with_capacity(values.len());
            for &v in values {
                let k = (v / spacing).round();
                if !(v.is_finite() && v > 0.0) || (k * spacing - v).abs() > 1e-6 * v.abs().max(spacing) {
                    errors.push(format!("estimate.{name}: {v} is not a positive multiple of the spacing {spacing}"));
                    continue;
                }
                let k = k as usize;
                if k < min || k > max {
                    errors.push(format!(
                        "estimate.{name}: {v} spans {k} cells, outside the admissible {min}..={max}"
                    ));
                    continue;
                }
                out.push(k);
            }
            if values.is_empty() {
                errors.push(format!("estimate.{name} is empty"));
            }
            out
        }
        None => {
            let (lo, hi) = range;
            let mut out: Vec<usize> = (0..GRID_POINTS)
                .map(|i| {
                    let v = lo * (hi / lo).powf(i as f64 / (GRID_POINTS - 1) as f64);
                    (v / spacing).round() as usize
                })
                .filter(|&k| k >= min && k <= max)
                .collect();
            out.dedup();
            if out.len() < 5 {
                errors.push(format!(
                    "estimate.{name}: the lattice resolves only {} distinct values in [{lo}, {hi}]; refine the spacing or give the grid explicitly",
                    out.len()
                ));
            }
            out
        }
    }
}

/// A validated configuration with every derived object resolved.
#[derive(Debug, Clone)]
pub struct Plan {
    pub config: RunConfig,
    pub basis: LevyBasis,
    pub boundary: AmbitBoundary,
    pub model: AmbitModel,
    pub lattice: LatticeConfig,
    pub temporal_fit: (f64, f64),
    pub spatial_fit: (f64, f64),
    pub temporal_lags: Vec<usize>,
    pub spatial_lags: Vec<usize>,
    pub temporal_windows: Vec<usize>,
    pub spatial_windows: Vec<usize>,
}

impl Plan {
    pub fn tau2(&self) -> f64 {
        self.config.scaling.tau2
    }

    pub fn fit_range(&self, axis: Axis) -> (f64, f64) {
        match axis {
            Axis::Temporal => self.temporal_fit,
            Axis::Spatial => self.spatial_fit,
        }
    }

    pub fn lags(&self, axis: Axis) -> &[usize] {
        match axis {
            Axis::Temporal => &self.temporal_lags,
            Axis::Spatial => &self.spatial_lags,
        }
    }

    pub fn windows(&self, axis: Axis) -> &[usize] {
        match axis {
            Axis::Temporal => &self.temporal_windows,
            Axis::Spatial => &self.spatial_windows,
        }
    }

    pub fn spacing(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Temporal => self.lattice.dt,
            Axis::Spatial => self.lattice.dx,
        }
    }
}
