//! Sweep execution and CSV output.

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analysis::{asymptotic_average_outage, average_outage};
use crate::channel::AllocationMode;
use crate::config::{Engine, SweepPoint, SweepSpec, SweptParameter};
use crate::montecarlo::{simulate, SimulationMode, SimulationPlan};

pub const CSV_HEADER: [&str; 10] = [
    "sweep_param",
    "sweep_value",
    "engine",
    "outage",
    "trials",
    "failures",
    "std_error",
    "ci_low",
    "ci_high",
    "status",
];

const METADATA_HEADER: [&str; 11] = [
    "sweep_value",
    "N",
    "M",
    "L",
    "alpha",
    "xi",
    "pt_over_n0_db",
    "allocation_mode",
    "distances",
    "total_distance",
    "relay_placement",
];

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("result table is empty")]
    EmptyTable,
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Ok,
    /// Asymptotic value above one.
    OutsideAsymptoticRegime,
    Error(String),
}

impl RowStatus {
    pub fn label(&self) -> String {
        match self {
            RowStatus::Ok => "ok".into(),
            RowStatus::OutsideAsymptoticRegime => "outside_asymptotic_regime".into(),
            RowStatus::Error(message) => format!("error: {message}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloStats {
    pub trials: u64,
    pub failures: u64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_param: SweptParameter,
    pub sweep_value: f64,
    pub engine: Engine,
    pub outage: Option<f64>,
    pub monte_carlo: Option<MonteCarloStats>,
    pub status: RowStatus,
}

/// Parameters actually used at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMetadata {
    pub sweep_value: f64,
    pub subcarriers: usize,
    pub order: usize,
    pub alpha: f64,
    pub xi: f64,
    pub pt_over_n0_db: f64,
    pub allocation: AllocationMode,
    pub distances: Vec<f64>,
    pub relay_placement: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub points: Vec<PointMetadata>,
}

fn evaluate(spec: &SweepSpec, point: &SweepPoint, engine: Engine) -> ResultRow {
    let mut row = ResultRow {
        sweep_param: spec.swept,
        sweep_value: point.value,
        engine,
        outage: None,
        monte_carlo: None,
        status: RowStatus::Ok,
    };
    match engine {
        Engine::ClosedForm => row.outage = Some(average_outage(&point.query)),
        Engine::Asymptotic => {
            let value = asymptotic_average_outage(&point.query);
            row.outage = Some(value.value);
            if !value.in_regime {
                row.status = RowStatus::OutsideAsymptoticRegime;
            }
        }
        Engine::McThreshold | Engine::McExact => {
            let mode = if engine == Engine::McExact {
                SimulationMode::Exact
            } else {
                SimulationMode::Threshold
            };
            let mut plan = SimulationPlan::new(point.query.clone(), spec.trials, spec.seed, mode);
            plan.confidence_level = spec.confidence_level;
            plan.workers = spec.workers;
            match simulate(&plan) {
                Ok(estimate) => {
                    row.outage = Some(estimate.probability);
                    row.monte_carlo = Some(MonteCarloStats {
                        trials: estimate.trials,
                        failures: estimate.failures,
                        std_error: estimate.std_error,
                        ci_low: estimate.ci_low,
                        ci_high: estimate.ci_high,
                    });
                }
                Err(e) => row.status = RowStatus::Error(e.to_string()),
            }
        }
    }
    row
}

/// Evaluates every engine at every sweep point, in sweep order.
///
/// A point that cannot be resolved or an engine that fails produces rows
/// with an error status; the rest of the sweep still runs.
pub fn run_sweep(spec: &SweepSpec) -> ResultTable {
    let mut rows = Vec::with_capacity(spec.values.len() * spec.engines.len());
    let mut points = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let point = match spec.point(value) {
            Ok(point) => point,
            Err(e) => {
                for &engine in &spec.engines {
                    rows.push(ResultRow {
                        sweep_param: spec.swept,
                        sweep_value: value,
                        engine,
                        outage: None,
                        monte_carlo: None,
                        status: RowStatus::Error(e.to_string()),
                    });
                }
                continue;
            }
        };
        let topology = &point.query.topology;
        points.push(PointMetadata {
            sweep_value: value,
            subcarriers: point.query.params.subcarriers(),
            order: point.query.params.order(),
            alpha: topology.path_loss_exponent(),
            xi: topology.threshold(),
            pt_over_n0_db: point.pt_over_n0_db,
            allocation: topology.allocation(),
            distances: topology.distances().to_vec(),
            relay_placement: spec.distance_policy.placement(),
        });
        for &engine in &spec.engines {
            rows.push(evaluate(spec, &point, engine));
        }
    }
    ResultTable { rows, points }
}

fn fmt_prob(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt<T>(v: Option<T>, f: impl FnOnce(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

/// Writes the table as CSV: header, then one row per (sweep value, engine).
pub fn write_csv<W: Write>(table: &ResultTable, out: W) -> Result<(), SweepError> {
    if table.rows.is_empty() {
        return Err(SweepError::EmptyTable);
    }
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for row in &table.rows {
        let mc = row.monte_carlo;
        writer.write_record([
            row.sweep_param.key().to_owned(),
            row.sweep_value.to_string(),
            row.engine.name().to_owned(),
            opt(row.outage, fmt_prob),
            opt(mc, |m| m.trials.to_string()),
            opt(mc, |m| m.failures.to_string()),
            opt(mc, |m| fmt_prob(m.std_error)),
            opt(mc, |m| fmt_prob(m.ci_low)),
            opt(mc, |m| fmt_prob(m.ci_high)),
            row.status.label(),
        ])?;
    }
    writer.flush().map_err(|e| SweepError::Csv(e.into()))?;
    Ok(())
}

/// Writes the per-point parameters, including hop distances.
pub fn write_metadata<W: Write>(table: &ResultTable, out: W) -> Result<(), SweepError> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer.write_record(METADATA_HEADER)?;
    for point in &table.points {
        let distances: Vec<String> = point.distances.iter().map(|d| d.to_string()).collect();
        writer.write_record([
            point.sweep_value.to_string(),
            point.subcarriers.to_string(),
            point.order.to_string(),
            point.distances.len().to_string(),
            point.alpha.to_string(),
            point.xi.to_string(),
            point.pt_over_n0_db.to_string(),
            point.allocation.as_str().to_owned(),
            distances.join(";"),
            point.distances.iter().sum::<f64>().to_string(),
            point.relay_placement.to_owned(),
        ])?;
    }
    writer.flush().map_err(|e| SweepError::Csv(e.into()))?;
    Ok(())
}

fn create(path: &Path) -> Result<std::fs::File, SweepError> {
    std::fs::File::create(path).map_err(|source| SweepError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Writes the table to `path` as CSV.
pub fn emit_csv(table: &ResultTable, path: impl AsRef<Path>) -> Result<(), SweepError> {
    let path = path.as_ref();
    if table.rows.is_empty() {
        return Err(SweepError::EmptyTable);
    }
    write_csv(table, create(path)?)
}

/// Companion metadata path: `out.csv` becomes `out.meta.csv`.
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sweep".into());
    csv_path.with_file_name(format!("{stem}.meta.csv"))
}

pub fn emit_metadata(table: &ResultTable, path: impl AsRef<Path>) -> Result<(), SweepError> {
    write_metadata(table, create(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const SNR_SWEEP: &str = "\
N = 4
M = 2
L = 2
alpha = 2
xi = 1
pt_over_n0_db = 0:5:50
allocation_mode = equal_per_node
distance_policy = fixed_total(5)
engines = closed_form, asymptotic
";

    fn csv_string(table: &ResultTable) -> String {
        let mut buf = Vec::new();
        write_csv(table, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn row_count_and_layout() {
        let table = run_sweep(&parse_config(SNR_SWEEP).unwrap());
        let text = csv_string(&table);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 23);
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert!(text.ends_with('\n'));
        // closed-form rows leave Monte Carlo columns empty
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first[2], "closed_form");
        assert!(first[4..9].iter().all(|f| f.is_empty()));
        assert_eq!(first[9], "ok");
        // low-SNR asymptote exceeds one
        let second: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(second[2], "asymptotic");
        assert_eq!(second[9], "outside_asymptotic_regime");
    }

    #[test]
    fn probabilities_keep_precision() {
        let table = run_sweep(&parse_config(SNR_SWEEP).unwrap());
        let text = csv_string(&table);
        let row = text.lines().nth(17).unwrap();
        let outage: Vec<&str> = row.split(',').collect();
        let mantissa = outage[3].split('e').next().unwrap().replace(['.', '-'], "");
        assert!(mantissa.len() >= 9);
        let parsed: f64 = outage[3].parse().unwrap();
        assert_eq!(parsed, table.rows[16].outage.unwrap());
    }

    #[test]
    fn engine_failure_is_recorded() {
        let text = SNR_SWEEP
            .replace("N = 4", "N = 16")
            .replace("M = 2", "M = 4")
            .replace("0:5:50", "10")
            .replace("closed_form, asymptotic", "closed_form, mc_exact")
            + "trials = 10\n";
        let table = run_sweep(&parse_config(&text).unwrap());
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[0].status, RowStatus::Ok);
        assert!(matches!(table.rows[1].status, RowStatus::Error(_)));
        let csv = csv_string(&table);
        assert!(csv.lines().nth(2).unwrap().contains("error: "));
    }

    #[test]
    fn metadata_path_naming() {
        assert_eq!(metadata_path(Path::new("/tmp/out.csv")), PathBuf::from("/tmp/out.meta.csv"));
        assert_eq!(metadata_path(Path::new("res")), PathBuf::from("res.meta.csv"));
    }

    #[test]
    fn empty_table_is_rejected() {
        let table = ResultTable {
            rows: vec![],
            points: vec![],
        };
        assert!(matches!(write_csv(&table, Vec::new()), Err(SweepError::EmptyTable)));
    }
}
