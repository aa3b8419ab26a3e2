//! Sectioned `key = value` configuration.
//!
//! ```text
//! [system]
//! builtin = unicycle            # or circle-particle (radius, mass), euclidean (dim)
//! initial = 1, -0.1, 0.6
//!
//! [gains]
//! kp = 20
//! kd = 2
//! ki = 0.5
//! kappa = 1
//! lambda = 4                    # optional reference bounds
//! mu = 1
//!
//! [sim]
//! dt = 0.001
//! t_end = 150
//!
//! [region]
//! lower = -2, -2, 0
//! upper = 2, 2, 2*pi
//! samples = 21
//! ```
//!
//! A custom system replaces `builtin` with `name`, `variables`, `topology`,
//! `metric` and `basis`, and adds a `[morse]` section with `value`, `minimum`
//! and optionally `differential`. Matrix rows are separated by `;` and entries
//! by `,`. Numbers may be constant expressions such as `2*pi`.

use std::collections::BTreeMap;
use std::sync::Arc;

use geopid::constraint::{ConstraintFrame, DistributionField};
use geopid::dynamics::MechanicalSystem;
use geopid::error::GeoError;
use geopid::geometry::{ChartPoint, MetricField, Topology};
use geopid::morse::{MorseSpec, SamplingRegion};
use geopid::systems;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::expr::{Expr, ExprError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: key '{key}': syntax error at column {column}: {message}")]
    ExprSyntax {
        line: usize,
        key: String,
        column: usize,
        message: String,
    },
    #[error("line {line}: key '{key}': unknown function '{name}' at column {column}")]
    UnknownFunction {
        line: usize,
        key: String,
        name: String,
        column: usize,
    },
    #[error("line {line}: key '{key}': unknown variable '{name}' at column {column}")]
    UnknownVariable {
        line: usize,
        key: String,
        name: String,
        column: usize,
    },
    #[error("missing key '{key}' in section [{section}]")]
    MissingKey { section: String, key: String },
    #[error("line {line}: unknown key '{key}' in section [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: key '{key}': {message}")]
    InvalidValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("line {line}: key '{key}': expected {expected} entries, found {found}")]
    DimensionMismatch {
        line: usize,
        key: String,
        expected: usize,
        found: usize,
    },
    #[error("system fails validation at the initial state: {0}")]
    Invariant(#[source] GeoError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    Unicycle,
    CircleParticle { radius: f64, mass: f64 },
    Euclidean { dim: usize },
}

pub const BUILTIN_NAMES: [&str; 3] = ["unicycle", "circle-particle", "euclidean"];

impl Builtin {
    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Unicycle => "unicycle",
            Builtin::CircleParticle { .. } => "circle-particle",
            Builtin::Euclidean { .. } => "euclidean",
        }
    }

    fn dim(&self) -> usize {
        match self {
            Builtin::Unicycle => 3,
            Builtin::CircleParticle { .. } => 2,
            Builtin::Euclidean { dim } => *dim,
        }
    }

    fn topology(&self) -> Arc<[Topology]> {
        match self {
            Builtin::Unicycle => systems::unicycle_topology(),
            _ => systems::euclidean_topology(self.dim()),
        }
    }

    fn coordinate_names(&self) -> Vec<String> {
        match self {
            Builtin::Unicycle => vec!["x".into(), "y".into(), "theta".into()],
            Builtin::CircleParticle { .. } => vec!["x".into(), "y".into()],
            Builtin::Euclidean { dim } => (1..=*dim).map(|i| format!("x{i}")).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomSystem {
    pub name: String,
    pub variables: Vec<String>,
    pub topology: Vec<Topology>,
    /// `n × n` metric entries.
    pub metric: Vec<Vec<Expr>>,
    /// `n × k` basis entries.
    pub basis: Vec<Vec<Expr>>,
    pub morse_value: Expr,
    pub morse_differential: Option<Vec<Expr>>,
    pub minimum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemSpec {
    Builtin(Builtin),
    Custom(CustomSystem),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainSettings {
    pub kp: f64,
    pub kd: f64,
    pub ki: f64,
    pub kappa: f64,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSettings {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub system: SystemSpec,
    pub initial: Vec<f64>,
    pub gains: GainSettings,
    pub sim: SimSettings,
    pub region: RegionSettings,
}

/// A config turned into library objects.
pub struct Model {
    pub system: MechanicalSystem<f64>,
    pub morse: MorseSpec<f64>,
    pub coordinate_names: Vec<String>,
    pub initial: ChartPoint<f64>,
}

impl Model {
    pub fn sampling_region(
        &self,
        region: &RegionSettings,
    ) -> Result<SamplingRegion<f64>, GeoError> {
        SamplingRegion::new(
            region.lower.clone(),
            region.upper.clone(),
            self.system.topology.clone(),
            region.samples,
        )
    }
}

fn default_region(topology: &[Topology]) -> RegionSettings {
    let r = systems::default_region::<f64>(Arc::from(topology.to_vec()));
    RegionSettings {
        lower: r.lower,
        upper: r.upper,
        samples: r.samples_per_axis,
    }
}

impl SystemConfig {
    /// Built-in system with its reference settings.
    pub fn builtin(name: &str) -> Option<Self> {
        let b = match name {
            "unicycle" => Builtin::Unicycle,
            "circle-particle" => Builtin::CircleParticle {
                radius: 1.5,
                mass: 1.0,
            },
            "euclidean" => Builtin::Euclidean { dim: 2 },
            _ => return None,
        };
        Some(Self::for_builtin(b))
    }

    fn for_builtin(b: Builtin) -> Self {
        let region = default_region(&b.topology());
        let (initial, gains, t_end) = match &b {
            Builtin::Unicycle => {
                let (kp, kd, ki) = systems::UNICYCLE_GAINS;
                (
                    systems::UNICYCLE_INITIAL.to_vec(),
                    GainSettings {
                        kp,
                        kd,
                        ki,
                        kappa: 1.0,
                        lambda: Some(systems::UNICYCLE_LAMBDA),
                        mu: Some(systems::UNICYCLE_MU),
                    },
                    150.0,
                )
            }
            Builtin::CircleParticle { radius, .. } => (vec![0.0, *radius], moderate_gains(), 60.0),
            Builtin::Euclidean { dim } => {
                let initial = (0..*dim)
                    .map(|i| if i % 2 == 0 { 1.0 } else { -0.5 })
                    .collect();
                (initial, moderate_gains(), 60.0)
            }
        };
        Self {
            system: SystemSpec::Builtin(b),
            initial,
            gains,
            sim: SimSettings { dt: 1e-3, t_end },
            region,
        }
    }

    pub fn name(&self) -> &str {
        match &self.system {
            SystemSpec::Builtin(b) => b.name(),
            SystemSpec::Custom(c) => &c.name,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.system {
            SystemSpec::Builtin(b) => b.dim(),
            SystemSpec::Custom(c) => c.variables.len(),
        }
    }

    /// Builds the system, Morse function and initial point, and checks the
    /// metric and distribution at the initial point.
    pub fn build(&self) -> Result<Model, ConfigError> {
        let (system, morse, coordinate_names) = match &self.system {
            SystemSpec::Builtin(b) => {
                let (sys, morse) = match b {
                    Builtin::Unicycle => (systems::unicycle(), systems::unicycle_morse()),
                    Builtin::CircleParticle { radius, mass } => (
                        systems::circle_particle(*mass),
                        systems::circle_particle_morse(*radius),
                    ),
                    Builtin::Euclidean { dim } => (
                        systems::euclidean(*dim),
                        systems::euclidean_morse(ChartPoint::identity(
                            systems::euclidean_topology(*dim),
                        )),
                    ),
                };
                (sys, morse, b.coordinate_names())
            }
            SystemSpec::Custom(c) => {
                let (sys, morse) = build_custom(c)?;
                (sys, morse, c.variables.clone())
            }
        };
        let initial = ChartPoint::from_slice(&self.initial, system.topology.clone())
            .map_err(ConfigError::Invariant)?;
        system
            .metric
            .validate_at(&initial)
            .map_err(ConfigError::Invariant)?;
        ConstraintFrame::at(&system.metric, &system.dist, &initial)
            .map_err(ConfigError::Invariant)?;
        Ok(Model {
            system,
            morse,
            coordinate_names,
            initial,
        })
    }
}

fn moderate_gains() -> GainSettings {
    GainSettings {
        kp: 2.5,
        kd: 1.0,
        ki: 0.5,
        kappa: 1.0,
        lambda: None,
        mu: None,
    }
}

fn eval_row(row: &[Expr], g: &ChartPoint<f64>) -> Vec<f64> {
    row.iter().map(|e| e.eval(g.coords().as_slice())).collect()
}

fn matrix_of(entries: &[Vec<Expr>], g: &ChartPoint<f64>) -> DMatrix<f64> {
    let rows: Vec<f64> = entries.iter().flat_map(|r| eval_row(r, g)).collect();
    DMatrix::from_row_slice(entries.len(), entries[0].len(), &rows)
}

fn all_constant(entries: &[Vec<Expr>]) -> bool {
    entries.iter().flatten().all(Expr::is_constant)
}

fn build_custom(c: &CustomSystem) -> Result<(MechanicalSystem<f64>, MorseSpec<f64>), ConfigError> {
    let n = c.variables.len();
    let topology: Arc<[Topology]> = Arc::from(c.topology.clone());
    let origin = ChartPoint::identity(topology.clone());

    let metric = if all_constant(&c.metric) {
        MetricField::constant(matrix_of(&c.metric, &origin))
    } else {
        let entries = c.metric.clone();
        MetricField::new(n, move |g: &ChartPoint<f64>| matrix_of(&entries, g))
    };
    let k = c.basis[0].len();
    let dist = if all_constant(&c.basis) {
        DistributionField::constant(matrix_of(&c.basis, &origin))
    } else {
        let entries = c.basis.clone();
        DistributionField::new(n, k, move |g: &ChartPoint<f64>| matrix_of(&entries, g))
    };
    let sys = MechanicalSystem::new(c.name.clone(), topology.clone(), metric, dist)
        .map_err(ConfigError::Invariant)?;

    let minimum = ChartPoint::from_slice(&c.minimum, topology).map_err(ConfigError::Invariant)?;
    let value = c.morse_value.clone();
    let mut morse = MorseSpec::new(
        move |g: &ChartPoint<f64>| value.eval(g.coords().as_slice()),
        minimum,
    );
    if let Some(diff) = &c.morse_differential {
        let diff = diff.clone();
        morse = morse
            .with_differential(move |g: &ChartPoint<f64>| DVector::from_vec(eval_row(&diff, g)));
    }
    Ok((sys, morse))
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Sections {
    map: BTreeMap<String, BTreeMap<String, Entry>>,
}

const SECTIONS: [&str; 5] = ["system", "morse", "gains", "sim", "region"];

impl Sections {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: format!("malformed section header '{content}'"),
                })?;
                let name = name.trim().to_string();
                if !SECTIONS.contains(&name.as_str()) {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("unknown section [{name}]"),
                    });
                }
                if map.contains_key(&name) {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("duplicate section [{name}]"),
                    });
                }
                map.insert(name.clone(), BTreeMap::new());
                current = Some(name);
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected 'key = value', found '{content}'"),
            })?;
            let section = current.as_ref().ok_or_else(|| ConfigError::Syntax {
                line,
                message: "key outside of any section".into(),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: "empty key".into(),
                });
            }
            let table = map.get_mut(section).expect("section registered");
            if table.contains_key(&key) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("duplicate key '{key}'"),
                });
            }
            table.insert(
                key,
                Entry {
                    value: value.trim().to_string(),
                    line,
                    used: false,
                },
            );
        }
        Ok(Self { map })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        let e = self.map.get_mut(section)?.get_mut(key)?;
        e.used = true;
        Some((e.value.clone(), e.line))
    }

    fn require(&mut self, section: &str, key: &str) -> Result<(String, usize), ConfigError> {
        self.take(section, key)
            .ok_or_else(|| ConfigError::MissingKey {
                section: section.into(),
                key: key.into(),
            })
    }

    fn has_section(&self, section: &str) -> bool {
        self.map.contains_key(section)
    }

    fn check_all_used(&self) -> Result<(), ConfigError> {
        for (section, table) in &self.map {
            for (key, e) in table {
                if !e.used {
                    return Err(ConfigError::UnknownKey {
                        line: e.line,
                        section: section.clone(),
                        key: key.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

fn expr_error(e: ExprError, line: usize, key: &str) -> ConfigError {
    let key = key.to_string();
    match e {
        ExprError::Syntax { column, message } => ConfigError::ExprSyntax {
            line,
            key,
            column,
            message,
        },
        ExprError::UnknownFunction { name, column } => ConfigError::UnknownFunction {
            line,
            key,
            name,
            column,
        },
        ExprError::UnknownVariable { name, column } => ConfigError::UnknownVariable {
            line,
            key,
            name,
            column,
        },
    }
}

fn parse_expr(src: &str, vars: &[String], line: usize, key: &str) -> Result<Expr, ConfigError> {
    Expr::parse(src, vars).map_err(|e| expr_error(e, line, key))
}

fn parse_number(src: &str, line: usize, key: &str) -> Result<f64, ConfigError> {
    let v = parse_expr(src, &[], line, key)?.eval::<f64>(&[]);
    if !v.is_finite() {
        return Err(ConfigError::InvalidValue {
            line,
            key: key.into(),
            message: format!("'{src}' is not finite"),
        });
    }
    Ok(v)
}

fn parse_positive(src: &str, line: usize, key: &str) -> Result<f64, ConfigError> {
    let v = parse_number(src, line, key)?;
    if v <= 0.0 {
        return Err(ConfigError::InvalidValue {
            line,
            key: key.into(),
            message: format!("must be positive, got {v}"),
        });
    }
    Ok(v)
}

fn parse_count(src: &str, line: usize, key: &str) -> Result<usize, ConfigError> {
    src.trim()
        .parse::<usize>()
        .map_err(|_| ConfigError::InvalidValue {
            line,
            key: key.into(),
            message: format!("expected a non-negative integer, found '{src}'"),
        })
}

fn split_list(src: &str) -> Vec<&str> {
    src.split(',').map(str::trim).collect()
}

fn parse_numbers(
    src: &str,
    line: usize,
    key: &str,
    expected: usize,
) -> Result<Vec<f64>, ConfigError> {
    let items = split_list(src);
    if items.len() != expected {
        return Err(ConfigError::DimensionMismatch {
            line,
            key: key.into(),
            expected,
            found: items.len(),
        });
    }
    items.iter().map(|s| parse_number(s, line, key)).collect()
}

fn parse_matrix(
    src: &str,
    vars: &[String],
    line: usize,
    key: &str,
    rows: usize,
    cols: Option<usize>,
) -> Result<Vec<Vec<Expr>>, ConfigError> {
    let parsed: Vec<Vec<Expr>> = src
        .split(';')
        .map(|row| {
            split_list(row)
                .iter()
                .map(|e| parse_expr(e, vars, line, key))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    if parsed.len() != rows {
        return Err(ConfigError::DimensionMismatch {
            line,
            key: key.into(),
            expected: rows,
            found: parsed.len(),
        });
    }
    let width = cols.unwrap_or(parsed[0].len());
    for row in &parsed {
        if row.len() != width {
            return Err(ConfigError::DimensionMismatch {
                line,
                key: key.into(),
                expected: width,
                found: row.len(),
            });
        }
    }
    Ok(parsed)
}

fn parse_topology(src: &str, line: usize, key: &str) -> Result<Vec<Topology>, ConfigError> {
    split_list(src)
        .into_iter()
        .map(|t| match t {
            "linear" => Ok(Topology::Linear),
            "angular" => Ok(Topology::Angular),
            other => Err(ConfigError::InvalidValue {
                line,
                key: key.into(),
                message: format!("topology must be 'linear' or 'angular', found '{other}'"),
            }),
        })
        .collect()
}

fn parse_builtin(s: &mut Sections, name: &str, line: usize) -> Result<Builtin, ConfigError> {
    match name {
        "unicycle" => Ok(Builtin::Unicycle),
        "circle-particle" => {
            let radius = match s.take("system", "radius") {
                Some((v, l)) => parse_positive(&v, l, "radius")?,
                None => 1.5,
            };
            let mass = match s.take("system", "mass") {
                Some((v, l)) => parse_positive(&v, l, "mass")?,
                None => 1.0,
            };
            Ok(Builtin::CircleParticle { radius, mass })
        }
        "euclidean" => {
            let dim = match s.take("system", "dim") {
                Some((v, l)) => {
                    let d = parse_count(&v, l, "dim")?;
                    if d == 0 {
                        return Err(ConfigError::InvalidValue {
                            line: l,
                            key: "dim".into(),
                            message: "dimension must be at least 1".into(),
                        });
                    }
                    d
                }
                None => 2,
            };
            Ok(Builtin::Euclidean { dim })
        }
        other => Err(ConfigError::InvalidValue {
            line,
            key: "builtin".into(),
            message: format!(
                "unknown builtin '{other}' (available: {})",
                BUILTIN_NAMES.join(", ")
            ),
        }),
    }
}

fn parse_custom(s: &mut Sections) -> Result<CustomSystem, ConfigError> {
    let (name, _) = s.require("system", "name")?;
    let (vars_src, vline) = s.require("system", "variables")?;
    let variables: Vec<String> = split_list(&vars_src)
        .into_iter()
        .map(String::from)
        .collect();
    for v in &variables {
        let valid = v
            .chars()
            .next()
            .is_some_and(|c| c.is_alphabetic() || c == '_')
            && v.chars().all(|c| c.is_alphanumeric() || c == '_')
            && !["sin", "cos", "sqrt", "pi"].contains(&v.as_str());
        if !valid {
            return Err(ConfigError::InvalidValue {
                line: vline,
                key: "variables".into(),
                message: format!("invalid variable name '{v}'"),
            });
        }
    }
    let n = variables.len();
    let (topo_src, tline) = s.require("system", "topology")?;
    let topology = parse_topology(&topo_src, tline, "topology")?;
    if topology.len() != n {
        return Err(ConfigError::DimensionMismatch {
            line: tline,
            key: "topology".into(),
            expected: n,
            found: topology.len(),
        });
    }
    let (m_src, mline) = s.require("system", "metric")?;
    let metric = parse_matrix(&m_src, &variables, mline, "metric", n, Some(n))?;
    let (b_src, bline) = s.require("system", "basis")?;
    let basis = parse_matrix(&b_src, &variables, bline, "basis", n, None)?;
    if basis[0].len() > n {
        return Err(ConfigError::DimensionMismatch {
            line: bline,
            key: "basis".into(),
            expected: n,
            found: basis[0].len(),
        });
    }

    if !s.has_section("morse") {
        return Err(ConfigError::MissingKey {
            section: "morse".into(),
            key: "value".into(),
        });
    }
    let (v_src, vl) = s.require("morse", "value")?;
    let morse_value = parse_expr(&v_src, &variables, vl, "value")?;
    let (min_src, ml) = s.require("morse", "minimum")?;
    let minimum = parse_numbers(&min_src, ml, "minimum", n)?;
    let morse_differential = match s.take("morse", "differential") {
        Some((d_src, dl)) => {
            let items = split_list(&d_src);
            if items.len() != n {
                return Err(ConfigError::DimensionMismatch {
                    line: dl,
                    key: "differential".into(),
                    expected: n,
                    found: items.len(),
                });
            }
            Some(
                items
                    .iter()
                    .map(|e| parse_expr(e, &variables, dl, "differential"))
                    .collect::<Result<_, _>>()?,
            )
        }
        None => None,
    };
    Ok(CustomSystem {
        name,
        variables,
        topology,
        metric,
        basis,
        morse_value,
        morse_differential,
        minimum,
    })
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<SystemConfig, ConfigError> {
    let mut s = Sections::parse(text)?;
    if !s.has_section("system") {
        return Err(ConfigError::MissingKey {
            section: "system".into(),
            key: "builtin".into(),
        });
    }
    let mut cfg = match s.take("system", "builtin") {
        Some((name, line)) => {
            let b = parse_builtin(&mut s, &name, line)?;
            if s.has_section("morse") {
                return Err(ConfigError::Syntax {
                    line,
                    message: "a [morse] section is only allowed for custom systems".into(),
                });
            }
            SystemConfig::for_builtin(b)
        }
        None => {
            let custom = parse_custom(&mut s)?;
            let region = default_region(&custom.topology);
            let initial = vec![0.0; custom.variables.len()];
            SystemConfig {
                system: SystemSpec::Custom(custom),
                initial,
                gains: moderate_gains(),
                sim: SimSettings {
                    dt: 1e-3,
                    t_end: 60.0,
                },
                region,
            }
        }
    };
    let n = cfg.dim();

    match s.take("system", "initial") {
        Some((v, l)) => cfg.initial = parse_numbers(&v, l, "initial", n)?,
        None if matches!(cfg.system, SystemSpec::Custom(_)) => {
            return Err(ConfigError::MissingKey {
                section: "system".into(),
                key: "initial".into(),
            })
        }
        None => {}
    }

    let g = &mut cfg.gains;
    for (key, slot) in [("kp", &mut g.kp), ("kd", &mut g.kd), ("ki", &mut g.ki)] {
        if let Some((v, l)) = s.take("gains", key) {
            *slot = parse_number(&v, l, key)?;
        }
    }
    if let Some((v, l)) = s.take("gains", "kappa") {
        g.kappa = parse_positive(&v, l, "kappa")?;
    }
    for (key, slot) in [("lambda", &mut g.lambda), ("mu", &mut g.mu)] {
        if let Some((v, l)) = s.take("gains", key) {
            *slot = Some(parse_positive(&v, l, key)?);
        }
    }
    if let Some((v, l)) = s.take("sim", "dt") {
        cfg.sim.dt = parse_positive(&v, l, "dt")?;
    }
    if let Some((v, l)) = s.take("sim", "t_end") {
        cfg.sim.t_end = parse_positive(&v, l, "t_end")?;
    }
    if let Some((v, l)) = s.take("region", "lower") {
        cfg.region.lower = parse_numbers(&v, l, "lower", n)?;
    }
    if let Some((v, l)) = s.take("region", "upper") {
        cfg.region.upper = parse_numbers(&v, l, "upper", n)?;
    }
    if let Some((v, l)) = s.take("region", "samples") {
        cfg.region.samples = parse_count(&v, l, "samples")?;
    }
    s.check_all_used()?;
    cfg.build()?;
    Ok(cfg)
}

fn join_numbers(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn join_matrix(m: &[Vec<Expr>]) -> String {
    m.iter()
        .map(|row| row.iter().map(Expr::source).collect::<Vec<_>>().join(", "))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Writes a configuration that [`parse_config`] reads back to an equal value.
pub fn serialize_config(cfg: &SystemConfig) -> String {
    let mut out = String::from("[system]\n");
    match &cfg.system {
        SystemSpec::Builtin(b) => {
            out += &format!("builtin = {}\n", b.name());
            match b {
                Builtin::Unicycle => {}
                Builtin::CircleParticle { radius, mass } => {
                    out += &format!("radius = {radius}\nmass = {mass}\n")
                }
                Builtin::Euclidean { dim } => out += &format!("dim = {dim}\n"),
            }
        }
        SystemSpec::Custom(c) => {
            let topo: Vec<&str> = c
                .topology
                .iter()
                .map(|t| match t {
                    Topology::Linear => "linear",
                    Topology::Angular => "angular",
                })
                .collect();
            out += &format!("name = {}\n", c.name);
            out += &format!("variables = {}\n", c.variables.join(", "));
            out += &format!("topology = {}\n", topo.join(", "));
            out += &format!("metric = {}\n", join_matrix(&c.metric));
            out += &format!("basis = {}\n", join_matrix(&c.basis));
        }
    }
    out += &format!("initial = {}\n", join_numbers(&cfg.initial));

    if let SystemSpec::Custom(c) = &cfg.system {
        out += "\n[morse]\n";
        out += &format!("value = {}\n", c.morse_value);
        out += &format!("minimum = {}\n", join_numbers(&c.minimum));
        if let Some(d) = &c.morse_differential {
            out += &format!(
                "differential = {}\n",
                d.iter().map(Expr::source).collect::<Vec<_>>().join(", ")
            );
        }
    }

    let g = &cfg.gains;
    out += &format!(
        "\n[gains]\nkp = {}\nkd = {}\nki = {}\nkappa = {}\n",
        g.kp, g.kd, g.ki, g.kappa
    );
    if let Some(l) = g.lambda {
        out += &format!("lambda = {l}\n");
    }
    if let Some(m) = g.mu {
        out += &format!("mu = {m}\n");
    }
    out += &format!("\n[sim]\ndt = {}\nt_end = {}\n", cfg.sim.dt, cfg.sim.t_end);
    out += &format!(
        "\n[region]\nlower = {}\nupper = {}\nsamples = {}\n",
        join_numbers(&cfg.region.lower),
        join_numbers(&cfg.region.upper),
        cfg.region.samples
    );
    out
}
