//! Sweep configuration files.
//!
//! The format is flat `key = value` text; `#` starts a comment. Numeric keys
//! accept a scalar, a comma-separated list, or a `start:step:stop` range. At
//! most one of `N`, `L`, `alpha` and `pt_over_n0_db` may carry more than one
//! value; that key becomes the swept parameter (`pt_over_n0_db` when all are
//! scalar).
//!
//! ```text
//! N = 4
//! M = 2
//! L = 2
//! alpha = 2
//! xi = 1
//! pt_over_n0_db = 0:5:50
//! allocation_mode = equal_per_node
//! distance_policy = fixed_total(5)
//! engines = closed_form, asymptotic
//! trials = 1000000
//! seed = 0
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::analysis::OutageQuery;
use crate::channel::{AllocationMode, Topology, TopologyError};
use crate::modem::{ModemError, ModulationParams};

pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_CONFIDENCE: f64 = 0.95;

const KNOWN_KEYS: [&str; 12] = [
    "N",
    "M",
    "L",
    "alpha",
    "xi",
    "pt_over_n0_db",
    "allocation_mode",
    "distance_policy",
    "engines",
    "trials",
    "seed",
    "confidence_level",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{}", FieldDisplay { line: *.line, field, reason })]
    Field {
        line: Option<usize>,
        field: String,
        reason: String,
    },
}

struct FieldDisplay<'a> {
    line: Option<usize>,
    field: &'a str,
    reason: &'a str,
}

impl fmt::Display for FieldDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        write!(f, "field `{}`: {}", self.field, self.reason)
    }
}

impl ConfigError {
    fn field(line: Option<usize>, field: &str, reason: impl Into<String>) -> Self {
        ConfigError::Field {
            line,
            field: field.to_owned(),
            reason: reason.into(),
        }
    }

    /// Name of the offending field, when the error concerns one.
    pub fn field_name(&self) -> Option<&str> {
        match self {
            ConfigError::Field { field, .. } => Some(field),
            _ => None,
        }
    }
}

/// Parameter varied across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweptParameter {
    PtOverN0Db,
    Subcarriers,
    Hops,
    PathLossExponent,
}

impl SweptParameter {
    pub fn key(&self) -> &'static str {
        match self {
            SweptParameter::PtOverN0Db => "pt_over_n0_db",
            SweptParameter::Subcarriers => "N",
            SweptParameter::Hops => "L",
            SweptParameter::PathLossExponent => "alpha",
        }
    }
}

impl fmt::Display for SweptParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Outage evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Engine {
    ClosedForm,
    Asymptotic,
    McThreshold,
    McExact,
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::ClosedForm => "closed_form",
            Engine::Asymptotic => "asymptotic",
            Engine::McThreshold => "mc_threshold",
            Engine::McExact => "mc_exact",
        }
    }

    pub fn is_monte_carlo(&self) -> bool {
        matches!(self, Engine::McThreshold | Engine::McExact)
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "closed_form" => Ok(Engine::ClosedForm),
            "asymptotic" => Ok(Engine::Asymptotic),
            "mc_threshold" => Ok(Engine::McThreshold),
            "mc_exact" => Ok(Engine::McExact),
            other => Err(format!(
                "unknown engine `{other}` (expected closed_form, asymptotic, mc_threshold or mc_exact)"
            )),
        }
    }
}

/// Parses a comma-separated engine list, rejecting duplicates.
pub fn parse_engines(s: &str) -> Result<Vec<Engine>, String> {
    let mut engines = Vec::new();
    for item in s.split(',').filter(|item| !item.trim().is_empty()) {
        let engine: Engine = item.parse()?;
        if engines.contains(&engine) {
            return Err(format!("engine `{engine}` listed twice"));
        }
        engines.push(engine);
    }
    if engines.is_empty() {
        return Err("at least one engine is required".into());
    }
    Ok(engines)
}

/// How hop distances are set at each sweep point.
#[derive(Debug, Clone, PartialEq)]
pub enum DistancePolicy {
    /// `L` equal hops summing to the given total.
    FixedTotal(f64),
    /// The listed per-hop distances; their count must equal `L`.
    Explicit(Vec<f64>),
}

impl DistancePolicy {
    pub fn distances(&self, hops: usize) -> Result<Vec<f64>, String> {
        match self {
            DistancePolicy::FixedTotal(total) => Ok(vec![total / hops as f64; hops]),
            DistancePolicy::Explicit(list) if list.len() == hops => Ok(list.clone()),
            DistancePolicy::Explicit(list) => Err(format!(
                "explicit distance list has {} entries but L = {hops}",
                list.len()
            )),
        }
    }

    pub fn placement(&self) -> &'static str {
        match self {
            DistancePolicy::FixedTotal(_) => "equidistant",
            DistancePolicy::Explicit(_) => "explicit",
        }
    }
}

impl FromStr for DistancePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, rest) = s
            .split_once('(')
            .ok_or_else(|| format!("expected fixed_total(<total>) or explicit(<d1>, ...), got `{s}`"))?;
        let args = rest
            .strip_suffix(')')
            .ok_or_else(|| format!("missing closing parenthesis in `{s}`"))?;
        let numbers = args
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("`{}` is not a number", a.trim()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(bad) = numbers.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(format!("distances must be positive and finite (got {bad})"));
        }
        match name.trim() {
            "fixed_total" if numbers.len() == 1 => Ok(DistancePolicy::FixedTotal(numbers[0])),
            "fixed_total" => Err("fixed_total takes exactly one value".into()),
            "explicit" => Ok(DistancePolicy::Explicit(numbers)),
            other => Err(format!("unknown distance policy `{other}`")),
        }
    }
}

impl fmt::Display for DistancePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistancePolicy::FixedTotal(total) => write!(f, "fixed_total({total})"),
            DistancePolicy::Explicit(list) => {
                let parts: Vec<String> = list.iter().map(|d| d.to_string()).collect();
                write!(f, "explicit({})", parts.join(", "))
            }
        }
    }
}

fn parse_allocation(s: &str) -> Result<AllocationMode, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "equal_per_node" => Ok(AllocationMode::EqualPerNode),
        "total_uniform" => Ok(AllocationMode::TotalUniform),
        other => Err(format!(
            "unknown allocation mode `{other}` (expected equal_per_node or total_uniform)"
        )),
    }
}

/// Parses a scalar, a comma list, or a `start:step:stop` range.
pub fn parse_values(s: &str) -> Result<Vec<f64>, String> {
    let number = |t: &str| {
        let t = t.trim();
        t.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("`{t}` is not a finite number"))
    };
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range `{s}` must be start:step:stop"));
        }
        let (start, step, stop) = (number(parts[0])?, number(parts[1])?, number(parts[2])?);
        if step == 0.0 || (stop - start) * step < 0.0 {
            return Err(format!("range `{s}` has a step that never reaches the stop value"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + i as f64 * step).collect());
    }
    let values = s.split(',').map(number).collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err("no value given".into());
    }
    Ok(values)
}

fn integral(v: f64) -> Option<usize> {
    (v >= 0.0 && v.fract() == 0.0 && v <= usize::MAX as f64).then_some(v as usize)
}

/// A validated sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub subcarriers: usize,
    pub order: usize,
    pub hops: usize,
    pub alpha: f64,
    pub xi: f64,
    pub pt_over_n0_db: f64,
    pub allocation: AllocationMode,
    pub distance_policy: DistancePolicy,
    pub swept: SweptParameter,
    pub values: Vec<f64>,
    pub engines: Vec<Engine>,
    pub trials: u64,
    pub seed: u64,
    pub confidence_level: f64,
    /// Worker threads for Monte Carlo engines; not read from the file.
    pub workers: Option<usize>,
}

/// One fully resolved sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub pt_over_n0_db: f64,
    pub query: OutageQuery,
}

/// dB to linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl SweepSpec {
    /// Resolves the sweep point where the swept parameter equals `value`.
    pub fn point(&self, value: f64) -> Result<SweepPoint, ConfigError> {
        let (mut n, mut l, mut alpha, mut db) = (
            self.subcarriers as f64,
            self.hops as f64,
            self.alpha,
            self.pt_over_n0_db,
        );
        match self.swept {
            SweptParameter::Subcarriers => n = value,
            SweptParameter::Hops => l = value,
            SweptParameter::PathLossExponent => alpha = value,
            SweptParameter::PtOverN0Db => db = value,
        }
        let n = integral(n).ok_or_else(|| ConfigError::field(None, "N", format!("N must be a positive integer (got {n})")))?;
        let l = integral(l)
            .filter(|&l| l >= 1)
            .ok_or_else(|| ConfigError::field(None, "L", format!("L must be an integer >= 1 (got {l})")))?;
        let params = ModulationParams::new(n, self.order).map_err(|e| {
            let field = match e {
                ModemError::SubcarriersNotPowerOfTwo(_) => "N",
                _ => "M",
            };
            ConfigError::field(None, field, e.to_string())
        })?;
        let distances = self
            .distance_policy
            .distances(l)
            .map_err(|reason| ConfigError::field(None, "distance_policy", reason))?;
        let topology = Topology::new(distances, alpha, db_to_linear(db), self.xi, self.allocation)
            .map_err(|e| {
                let field = match e {
                    TopologyError::InvalidPathLoss(_) => "alpha",
                    TopologyError::InvalidPower(_) => "pt_over_n0_db",
                    TopologyError::InvalidThreshold(_) => "xi",
                    _ => "distance_policy",
                };
                ConfigError::field(None, field, e.to_string())
            })?;
        Ok(SweepPoint {
            value,
            pt_over_n0_db: db,
            query: OutageQuery::new(topology, params),
        })
    }

    pub fn points(&self) -> Result<Vec<SweepPoint>, ConfigError> {
        self.values.iter().map(|&v| self.point(v)).collect()
    }
}

struct Entry {
    line: usize,
    value: String,
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<SweepSpec, ConfigError> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::field(Some(line), key, "unknown key"));
        }
        if let Some(previous) = entries.get(key) {
            return Err(ConfigError::field(
                Some(line),
                key,
                format!("duplicate key (first set on line {})", previous.line),
            ));
        }
        entries.insert(
            key.to_owned(),
            Entry {
                line,
                value: value.trim().to_owned(),
            },
        );
    }

    let required = |key: &str| {
        entries
            .get(key)
            .ok_or_else(|| ConfigError::field(None, key, "missing required field"))
    };
    let invalid = |key: &str, entry: &Entry, reason: String| ConfigError::field(Some(entry.line), key, reason);

    let numeric = |key: &str| -> Result<(Vec<f64>, usize), ConfigError> {
        let entry = required(key)?;
        let values = parse_values(&entry.value).map_err(|r| invalid(key, entry, r))?;
        Ok((values, entry.line))
    };
    let scalar_int = |key: &str, values: &[f64], line: usize| -> Result<Vec<usize>, ConfigError> {
        values
            .iter()
            .map(|&v| {
                integral(v).ok_or_else(|| ConfigError::field(Some(line), key, format!("{key} must be an integer (got {v})")))
            })
            .collect()
    };

    let (n_values, n_line) = numeric("N")?;
    let n_values = scalar_int("N", &n_values, n_line)?;
    for &n in &n_values {
        if n == 0 || !n.is_power_of_two() {
            return Err(ConfigError::field(Some(n_line), "N", format!("N must be a power of two (got {n})")));
        }
    }
    let (m_values, m_line) = numeric("M")?;
    let m_values = scalar_int("M", &m_values, m_line)?;
    if m_values.len() != 1 {
        return Err(ConfigError::field(Some(m_line), "M", "M cannot be swept"));
    }
    let order = m_values[0];
    if order < 2 || !order.is_power_of_two() {
        return Err(ConfigError::field(Some(m_line), "M", format!("M must be a power of two and at least 2 (got {order})")));
    }
    let (l_values, l_line) = numeric("L")?;
    let l_values = scalar_int("L", &l_values, l_line)?;
    if let Some(&bad) = l_values.iter().find(|&&l| l == 0) {
        return Err(ConfigError::field(Some(l_line), "L", format!("L must be at least 1 (got {bad})")));
    }
    let (alpha_values, alpha_line) = numeric("alpha")?;
    if let Some(bad) = alpha_values.iter().find(|&&a| a < 0.0) {
        return Err(ConfigError::field(Some(alpha_line), "alpha", format!("alpha must be non-negative (got {bad})")));
    }
    let (xi_values, xi_line) = numeric("xi")?;
    if xi_values.len() != 1 || xi_values[0] < 0.0 {
        return Err(ConfigError::field(Some(xi_line), "xi", "xi must be a single non-negative value"));
    }
    let (pt_values, _) = numeric("pt_over_n0_db")?;

    let allocation_entry = required("allocation_mode")?;
    let allocation = parse_allocation(&allocation_entry.value)
        .map_err(|r| invalid("allocation_mode", allocation_entry, r))?;
    let policy_entry = required("distance_policy")?;
    let distance_policy: DistancePolicy = policy_entry
        .value
        .parse()
        .map_err(|r| invalid("distance_policy", policy_entry, r))?;
    let engines_entry = required("engines")?;
    let engines = parse_engines(&engines_entry.value).map_err(|r| invalid("engines", engines_entry, r))?;

    let trials = match entries.get("trials") {
        Some(entry) => entry
            .value
            .replace('_', "")
            .parse::<u64>()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| invalid("trials", entry, format!("trials must be a positive integer (got `{}`)", entry.value)))?,
        None => DEFAULT_TRIALS,
    };
    let seed = match entries.get("seed") {
        Some(entry) => entry
            .value
            .parse::<u64>()
            .map_err(|_| invalid("seed", entry, format!("seed must be an unsigned 64-bit integer (got `{}`)", entry.value)))?,
        None => 0,
    };
    let confidence_level = match entries.get("confidence_level") {
        Some(entry) => entry
            .value
            .parse::<f64>()
            .ok()
            .filter(|c| *c > 0.0 && *c < 1.0)
            .ok_or_else(|| invalid("confidence_level", entry, format!("confidence_level must lie in (0, 1) (got `{}`)", entry.value)))?,
        None => DEFAULT_CONFIDENCE,
    };

    let multi: Vec<(SweptParameter, usize)> = [
        (SweptParameter::Subcarriers, n_values.len(), n_line),
        (SweptParameter::Hops, l_values.len(), l_line),
        (SweptParameter::PathLossExponent, alpha_values.len(), alpha_line),
        (SweptParameter::PtOverN0Db, pt_values.len(), entries["pt_over_n0_db"].line),
    ]
    .into_iter()
    .filter(|(_, count, _)| *count > 1)
    .map(|(param, _, line)| (param, line))
    .collect();
    if multi.len() > 1 {
        let names: Vec<&str> = multi.iter().map(|(p, _)| p.key()).collect();
        return Err(ConfigError::field(
            Some(multi[1].1),
            multi[1].0.key(),
            format!("only one parameter may be swept, found {}", names.join(" and ")),
        ));
    }
    let swept = multi.first().map(|(p, _)| *p).unwrap_or(SweptParameter::PtOverN0Db);
    let values = match swept {
        SweptParameter::Subcarriers => n_values.iter().map(|&n| n as f64).collect(),
        SweptParameter::Hops => l_values.iter().map(|&l| l as f64).collect(),
        SweptParameter::PathLossExponent => alpha_values.clone(),
        SweptParameter::PtOverN0Db => pt_values.clone(),
    };

    let spec = SweepSpec {
        subcarriers: n_values[0],
        order,
        hops: l_values[0],
        alpha: alpha_values[0],
        xi: xi_values[0],
        pt_over_n0_db: pt_values[0],
        allocation,
        distance_policy,
        swept,
        values,
        engines,
        trials,
        seed,
        confidence_level,
        workers: None,
    };
    // attach line numbers to point-level failures
    spec.points().map_err(|e| match e {
        ConfigError::Field { line: None, field, reason } => {
            let line = entries.get(field.as_str()).map(|entry| entry.line);
            ConfigError::Field { line, field, reason }
        }
        other => other,
    })?;
    Ok(spec)
}

/// Reads and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<SweepSpec, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_config(&text)
}
