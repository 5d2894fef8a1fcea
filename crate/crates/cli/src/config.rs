//! Sectioned configuration files: `[map]`, `[bump]`, `[experiment]`,
//! `[params]` and `[thresholds]`.

use std::collections::BTreeMap;
use std::fmt;

use skewlab::{eigen_data, MapError, Observable};
use thiserror::Error;
use toml::{Table, Value};

use crate::runner::{metric_catalog, Subcommand};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapSpec {
    Toral([[i64; 2]; 2]),
    Circle(i64),
}

impl MapSpec {
    pub fn base_dim(&self) -> usize {
        match self {
            MapSpec::Toral(_) => 2,
            MapSpec::Circle(_) => 1,
        }
    }
}

impl fmt::Display for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapSpec::Toral(m) => write!(
                f,
                "toral matrix [{}, {}; {}, {}]",
                m[0][0], m[0][1], m[1][0], m[1][1]
            ),
            MapSpec::Circle(k) => write!(f, "circle multiplier {k}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BumpDirection {
    Unstable,
    Vector(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BumpSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
    pub direction: BumpDirection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Min,
    Max,
}

/// `metric >= value` (`Min`) or `metric <= value` (`Max`), declared under `key`.
#[derive(Clone, Debug, PartialEq)]
pub struct Threshold {
    pub key: String,
    pub metric: String,
    pub bound: Bound,
    pub value: f64,
}

impl Threshold {
    pub fn holds(&self, measured: f64) -> bool {
        match self.bound {
            Bound::Min => measured >= self.value,
            Bound::Max => measured <= self.value,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub depth: usize,
    pub lyapunov_iterations: usize,
    pub lyapunov_starts: usize,
    pub center_samples: usize,
    pub center_orbit_length: usize,
    pub bundle_points: usize,
    pub direction_steps: usize,
    pub rate_samples: usize,
    pub rate_horizon: usize,
    pub spread_random_preorbits: usize,
    pub holonomy_grid: usize,
    pub holonomy_max_scale: f64,
    pub su_targets: usize,
    pub su_tolerance: f64,
    pub leaf_length: f64,
    pub leaf_grid: usize,
    pub birkhoff_starts: usize,
    pub birkhoff_iterations: usize,
    pub observable: Observable,
    pub transitivity_grid: usize,
    pub transitivity_iterations: usize,
    pub cloud_size: usize,
    pub ball_radius: f64,
    pub ball_center: Vec<f64>,
    pub srb_half_length: f64,
    pub srb_points: usize,
    pub volume_samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub map: MapSpec,
    /// `None` for the product map.
    pub bump: Option<BumpSpec>,
    pub name: String,
    pub seed: u64,
    pub params: Params,
    pub thresholds: Vec<Threshold>,
    /// Keys that were absent and filled with defaults.
    pub defaulted: Vec<String>,
    pub source: String,
}

pub const DEFAULT_THRESHOLDS: &[(&str, f64)] = &[
    ("volume_deviation_max", 1e-9),
    ("lambda_u_error_max", 1e-3),
    ("lambda_s_error_max", 1e-3),
    ("lambda_c_abs_max", 1e-8),
    ("sum_error_max", 1e-6),
    ("center_exponent_abs_max", 2e-3),
    ("center_lambda_c_sigmas_max", 3.0),
    ("pesin_error_max", 2e-3),
    ("invariance_defect_max", 1e-8),
    ("partial_hyperbolicity_min", 1.0),
    ("spread_error_max", 1e-6),
    ("integrability_defect_min", 1e-6),
    ("additivity_error_max", 1e-10),
    ("supath_reached_fraction_min", 1.0),
    ("covering_radius_max", 0.05),
    ("dispersion_max", 0.05),
    ("coverage_min", 0.99),
    ("srb_normalization_error_max", 1e-8),
    ("srb_cocycle_error_max", 1e-8),
    ("srb_uniform_deviation_min", 1e-4),
];

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

struct Section<'a> {
    name: &'a str,
    table: Table,
    defaulted: &'a mut Vec<String>,
}

impl Section<'_> {
    fn key(&self, k: &str) -> String {
        format!("{}.{}", self.name, k)
    }

    fn take(&mut self, k: &str) -> Option<Value> {
        self.table.remove(k)
    }

    fn float(&mut self, k: &str, default: f64) -> Result<f64, ConfigError> {
        match self.take(k) {
            None => {
                self.defaulted.push(self.key(k));
                Ok(default)
            }
            Some(v) => as_float(&v).ok_or_else(|| invalid(&self.key(k), "expected a number")),
        }
    }

    fn count(&mut self, k: &str, default: usize) -> Result<usize, ConfigError> {
        match self.take(k) {
            None => {
                self.defaulted.push(self.key(k));
                Ok(default)
            }
            Some(Value::Integer(i)) if i >= 0 => Ok(i as usize),
            Some(_) => Err(invalid(&self.key(k), "expected a non-negative integer")),
        }
    }

    fn floats(&mut self, k: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.take(k) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(as_float)
                .collect::<Option<Vec<f64>>>()
                .map(Some)
                .ok_or_else(|| invalid(&self.key(k), "expected an array of numbers")),
            Some(_) => Err(invalid(&self.key(k), "expected an array of numbers")),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.table.keys().next() {
            Some(k) => Err(invalid(&self.key(k), "unknown key")),
            None => Ok(()),
        }
    }
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn section<'a>(
    root: &mut Table,
    name: &'a str,
    defaulted: &'a mut Vec<String>,
) -> Result<Option<Section<'a>>, ConfigError> {
    match root.remove(name) {
        None => Ok(None),
        Some(Value::Table(table)) => Ok(Some(Section {
            name,
            table,
            defaulted,
        })),
        Some(_) => Err(invalid(name, "expected a section")),
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse {
            line: e.span().map_or(1, |s| line_of(text, s.start)),
            message: e.message().trim().to_string(),
        })?;
    let mut defaulted = Vec::new();

    let map = parse_map(
        section(&mut root, "map", &mut defaulted)?
            .ok_or_else(|| invalid("map", "missing section"))?,
    )?;
    let bump = match section(&mut root, "bump", &mut defaulted)? {
        Some(s) => parse_bump(s, &map)?,
        None => None,
    };

    let (name, seed) = match section(&mut root, "experiment", &mut defaulted)? {
        Some(mut s) => {
            let name = match s.take("name") {
                None => "unnamed".to_string(),
                Some(Value::String(n)) => n,
                Some(_) => return Err(invalid("experiment.name", "expected a string")),
            };
            let seed = match s.take("seed") {
                None => {
                    s.defaulted.push("experiment.seed".into());
                    1
                }
                Some(Value::Integer(i)) if i >= 0 => i as u64,
                Some(_) => {
                    return Err(invalid(
                        "experiment.seed",
                        "expected a non-negative integer",
                    ))
                }
            };
            s.finish()?;
            (name, seed)
        }
        None => {
            defaulted.push("experiment.seed".into());
            ("unnamed".to_string(), 1)
        }
    };

    let params_table = match root.remove("params") {
        None => Table::new(),
        Some(Value::Table(t)) => t,
        Some(_) => return Err(invalid("params", "expected a section")),
    };
    let params = parse_params(
        Section {
            name: "params",
            table: params_table,
            defaulted: &mut defaulted,
        },
        &map,
    )?;
    let thresholds = match root.remove("thresholds") {
        None => {
            defaulted.push("thresholds".into());
            DEFAULT_THRESHOLDS
                .iter()
                .map(|(k, v)| threshold(k, *v))
                .collect::<Result<Vec<_>, _>>()?
        }
        Some(Value::Table(t)) => t
            .iter()
            .map(|(k, v)| {
                let x = as_float(v)
                    .ok_or_else(|| invalid(&format!("thresholds.{k}"), "expected a number"))?;
                threshold(k, x)
            })
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(invalid("thresholds", "expected a section")),
    };
    if let Some(k) = root.keys().next() {
        return Err(invalid(k, "unknown section"));
    }
    Ok(ExperimentConfig {
        map,
        bump,
        name,
        seed,
        params,
        thresholds,
        defaulted,
        source: text.to_string(),
    })
}

fn threshold(key: &str, value: f64) -> Result<Threshold, ConfigError> {
    let full = format!("thresholds.{key}");
    let (metric, bound) = if let Some(m) = key.strip_suffix("_min") {
        (m, Bound::Min)
    } else if let Some(m) = key.strip_suffix("_max") {
        (m, Bound::Max)
    } else {
        return Err(invalid(&full, "threshold keys end in `_min` or `_max`"));
    };
    if !metric_catalog().iter().any(|(name, _)| *name == metric) {
        return Err(invalid(&full, format!("unknown metric `{metric}`")));
    }
    if !value.is_finite() {
        return Err(invalid(&full, "must be finite"));
    }
    Ok(Threshold {
        key: key.to_string(),
        metric: metric.to_string(),
        bound,
        value,
    })
}

fn parse_map(mut s: Section) -> Result<MapSpec, ConfigError> {
    let matrix = s.take("matrix");
    let multiplier = s.take("multiplier");
    let spec = match (matrix, multiplier) {
        (Some(_), Some(_)) => {
            return Err(invalid(
                "map",
                "give either `matrix` or `multiplier`, not both",
            ))
        }
        (None, None) => return Err(invalid("map.matrix", "missing (or give map.multiplier)")),
        (Some(Value::Array(a)), None) => {
            let e: Vec<i64> = a
                .iter()
                .map(|v| v.as_integer())
                .collect::<Option<Vec<i64>>>()
                .filter(|v| v.len() == 4)
                .ok_or_else(|| invalid("map.matrix", "expected four integers a, b, c, d"))?;
            let m = [[e[0], e[1]], [e[2], e[3]]];
            if e[0] * e[3] - e[1] * e[2] == 0 {
                return Err(invalid("map.matrix", "singular matrix"));
            }
            eigen_data(&m).map_err(|err: MapError| invalid("map.matrix", err.to_string()))?;
            MapSpec::Toral(m)
        }
        (Some(_), None) => return Err(invalid("map.matrix", "expected four integers a, b, c, d")),
        (None, Some(Value::Integer(k))) => {
            if k.abs() < 2 {
                return Err(invalid(
                    "map.multiplier",
                    MapError::NotExpanding(k).to_string(),
                ));
            }
            MapSpec::Circle(k)
        }
        (None, Some(_)) => return Err(invalid("map.multiplier", "expected an integer")),
    };
    s.finish()?;
    Ok(spec)
}

fn parse_bump(mut s: Section, map: &MapSpec) -> Result<Option<BumpSpec>, ConfigError> {
    if s.table.is_empty() {
        return Ok(None);
    }
    let dim = map.base_dim();
    let center = s.floats("center")?.unwrap_or_else(|| {
        s.defaulted.push("bump.center".into());
        vec![0.0; dim]
    });
    if center.len() != dim {
        return Err(invalid(
            "bump.center",
            format!("expected {dim} coordinates"),
        ));
    }
    let radius = s.float("radius", 0.3)?;
    if !(radius > 0.0 && radius < 0.5) {
        return Err(invalid("bump.radius", "must lie in (0, 0.5)"));
    }
    let amplitude = s.float("amplitude", 2.0)?;
    if !amplitude.is_finite() {
        return Err(invalid("bump.amplitude", "must be finite"));
    }
    let direction = match s.take("direction") {
        None => {
            s.defaulted.push("bump.direction".into());
            BumpDirection::Unstable
        }
        Some(Value::String(d)) if d == "unstable" => BumpDirection::Unstable,
        Some(Value::Array(a)) => {
            let v = a
                .iter()
                .map(as_float)
                .collect::<Option<Vec<f64>>>()
                .filter(|v| v.len() == dim && v.iter().any(|x| *x != 0.0))
                .ok_or_else(|| {
                    invalid(
                        "bump.direction",
                        format!("expected {dim} numbers, not all zero"),
                    )
                })?;
            BumpDirection::Vector(v)
        }
        Some(_) => {
            return Err(invalid(
                "bump.direction",
                "expected \"unstable\" or an array",
            ))
        }
    };
    s.finish()?;
    Ok(Some(BumpSpec {
        center,
        radius,
        amplitude,
        direction,
    }))
}

fn parse_params(mut s: Section, map: &MapSpec) -> Result<Params, ConfigError> {
    let dim = map.base_dim() + 1;
    let observable = match s.take("observable") {
        None => {
            s.defaulted.push("params.observable".into());
            Observable::CosFiber
        }
        Some(Value::String(n)) => Observable::from_name(&n)
            .ok_or_else(|| invalid("params.observable", format!("unknown observable `{n}`")))?,
        Some(_) => return Err(invalid("params.observable", "expected a string")),
    };
    let p = Params {
        depth: s.count("depth", 60)?,
        lyapunov_iterations: s.count("lyapunov_iterations", 1_000_000)?,
        lyapunov_starts: s.count("lyapunov_starts", 4)?,
        center_samples: s.count("center_samples", 100)?,
        center_orbit_length: s.count("center_orbit_length", 10_000)?,
        bundle_points: s.count("bundle_points", 100)?,
        direction_steps: s.count("direction_steps", 60)?,
        rate_samples: s.count("rate_samples", 20)?,
        rate_horizon: s.count("rate_horizon", 20)?,
        spread_random_preorbits: s.count("spread_random_preorbits", 8)?,
        holonomy_grid: s.count("holonomy_grid", 10)?,
        holonomy_max_scale: s.float("holonomy_max_scale", 0.4)?,
        su_targets: s.count("su_targets", 20)?,
        su_tolerance: s.float("su_tolerance", 1e-4)?,
        leaf_length: s.float("leaf_length", 1e4)?,
        leaf_grid: s.count("leaf_grid", 20)?,
        birkhoff_starts: s.count("birkhoff_starts", 100)?,
        birkhoff_iterations: s.count("birkhoff_iterations", 1_000_000)?,
        observable,
        transitivity_grid: s.count("transitivity_grid", 20)?,
        transitivity_iterations: s.count("transitivity_iterations", 10_000)?,
        cloud_size: s.count("cloud_size", 1000)?,
        ball_radius: s.float("ball_radius", 0.05)?,
        ball_center: s.floats("ball_center")?.unwrap_or_else(|| {
            s.defaulted.push("params.ball_center".into());
            vec![0.525; dim]
        }),
        srb_half_length: s.float("srb_half_length", 0.3)?,
        srb_points: s.count("srb_points", 201)?,
        volume_samples: s.count("volume_samples", 10_000)?,
    };
    s.finish()?;

    let positive = [
        ("depth", p.depth),
        ("lyapunov_iterations", p.lyapunov_iterations),
        ("lyapunov_starts", p.lyapunov_starts),
        ("center_samples", p.center_samples),
        ("center_orbit_length", p.center_orbit_length),
        ("bundle_points", p.bundle_points),
        ("direction_steps", p.direction_steps),
        ("rate_samples", p.rate_samples),
        ("rate_horizon", p.rate_horizon),
        ("holonomy_grid", p.holonomy_grid),
        ("su_targets", p.su_targets),
        ("birkhoff_iterations", p.birkhoff_iterations),
        ("cloud_size", p.cloud_size),
        ("volume_samples", p.volume_samples),
    ];
    for (k, v) in positive {
        if v == 0 {
            return Err(invalid(&format!("params.{k}"), "must be positive"));
        }
    }
    let at_least = [
        ("depth", p.depth, 21),
        ("birkhoff_starts", p.birkhoff_starts, 2),
        ("leaf_grid", p.leaf_grid, 2),
        ("transitivity_grid", p.transitivity_grid, 2),
        ("srb_points", p.srb_points, 2),
    ];
    for (k, v, min) in at_least {
        if v < min {
            return Err(invalid(
                &format!("params.{k}"),
                format!("must be at least {min}"),
            ));
        }
    }
    if p.direction_steps > p.depth {
        return Err(invalid(
            "params.direction_steps",
            "must not exceed params.depth",
        ));
    }
    for (k, v) in [
        ("holonomy_max_scale", p.holonomy_max_scale),
        ("ball_radius", p.ball_radius),
        ("srb_half_length", p.srb_half_length),
    ] {
        if !(v > 0.0 && v < 0.5) {
            return Err(invalid(&format!("params.{k}"), "must lie in (0, 0.5)"));
        }
    }
    if p.su_tolerance.is_nan() || p.su_tolerance <= 0.0 {
        return Err(invalid("params.su_tolerance", "must be positive"));
    }
    if !(p.leaf_length > 0.0 && p.leaf_length.is_finite()) {
        return Err(invalid("params.leaf_length", "must be positive"));
    }
    if p.ball_center.len() != dim {
        return Err(invalid(
            "params.ball_center",
            format!("expected {dim} coordinates"),
        ));
    }
    Ok(p)
}

impl ExperimentConfig {
    /// Thresholds that apply to one subcommand.
    pub fn thresholds_for(&self, sub: Subcommand) -> Vec<&Threshold> {
        let catalog = metric_catalog();
        self.thresholds
            .iter()
            .filter(|t| catalog.iter().any(|(m, s)| *m == t.metric && *s == sub))
            .collect()
    }

    /// Every parameter as `key = value`, in declaration order.
    pub fn echo_params(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let mut out: BTreeMap<&str, String> = BTreeMap::new();
        out.insert("depth", p.depth.to_string());
        out.insert("lyapunov_iterations", p.lyapunov_iterations.to_string());
        out.insert("lyapunov_starts", p.lyapunov_starts.to_string());
        out.insert("center_samples", p.center_samples.to_string());
        out.insert("center_orbit_length", p.center_orbit_length.to_string());
        out.insert("bundle_points", p.bundle_points.to_string());
        out.insert("direction_steps", p.direction_steps.to_string());
        out.insert("rate_samples", p.rate_samples.to_string());
        out.insert("rate_horizon", p.rate_horizon.to_string());
        out.insert(
            "spread_random_preorbits",
            p.spread_random_preorbits.to_string(),
        );
        out.insert("holonomy_grid", p.holonomy_grid.to_string());
        out.insert("holonomy_max_scale", p.holonomy_max_scale.to_string());
        out.insert("su_targets", p.su_targets.to_string());
        out.insert("su_tolerance", p.su_tolerance.to_string());
        out.insert("leaf_length", p.leaf_length.to_string());
        out.insert("leaf_grid", p.leaf_grid.to_string());
        out.insert("birkhoff_starts", p.birkhoff_starts.to_string());
        out.insert("birkhoff_iterations", p.birkhoff_iterations.to_string());
        out.insert("observable", p.observable.name().to_string());
        out.insert("transitivity_grid", p.transitivity_grid.to_string());
        out.insert(
            "transitivity_iterations",
            p.transitivity_iterations.to_string(),
        );
        out.insert("cloud_size", p.cloud_size.to_string());
        out.insert("ball_radius", p.ball_radius.to_string());
        out.insert("ball_center", format!("{:?}", p.ball_center));
        out.insert("srb_half_length", p.srb_half_length.to_string());
        out.insert("srb_points", p.srb_points.to_string());
        out.insert("volume_samples", p.volume_samples.to_string());
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}
