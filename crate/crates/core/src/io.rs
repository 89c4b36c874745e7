//! Instance files and report directories.
//!
//! An instance is one JSON document:
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "name": "g1-seed0",
//!   "periods": 4,
//!   "period_length_h": 6.0,
//!   "shed_cost": 3000.0,
//!   "annualization_days": 365.0,
//!   "big_m_angle_spread": 6.28318531,
//!   "gen_techs": [...], "storage_techs": [...], "load_techs": [...],
//!   "branches": [...], "buses": [...],
//!   "scenarios": [
//!     { "id": "s1", "probability": 0.5,
//!       "demand": { "b1": [9.0, 11.5, 12.0, 10.0] } | "s1_demand.csv",
//!       "availability": { "b1": { "solar": [0.0, 0.6, 0.9, 0.1] } } | "s1_avail.csv" }
//!   ],
//!   "policies": [...]
//! }
//! ```
//!
//! A time series is either inline or the path of a CSV file relative to the
//! instance file. Demand CSVs have one column per bus id; availability CSVs
//! one column per `bus/tech` pair; both have one row per period. Availability
//! pairs that are not listed default to 1.
//!
//! Every number is written with at most 9 significant digits, so saving a
//! loaded canonical file reproduces it byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{
    validate_instance, Branch, Bus, ExpectedOutputPolicy, GenTech, LargeLoadTech, PlanningInstance, Scenario,
    StorageTech,
};
use crate::report::SolveReport;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum DemandSeries {
    File(String),
    Inline(BTreeMap<String, Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum AvailabilitySeries {
    File(String),
    Inline(BTreeMap<String, BTreeMap<String, Vec<f64>>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    id: String,
    probability: f64,
    demand: DemandSeries,
    #[serde(default = "no_availability")]
    availability: AvailabilitySeries,
}

fn no_availability() -> AvailabilitySeries {
    AvailabilitySeries::Inline(BTreeMap::new())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    schema_version: u32,
    name: String,
    periods: usize,
    period_length_h: f64,
    shed_cost: f64,
    annualization_days: f64,
    big_m_angle_spread: f64,
    #[serde(default)]
    gen_techs: Vec<GenTech>,
    #[serde(default)]
    storage_techs: Vec<StorageTech>,
    #[serde(default)]
    load_techs: Vec<LargeLoadTech>,
    #[serde(default)]
    branches: Vec<Branch>,
    buses: Vec<Bus>,
    scenarios: Vec<ScenarioFile>,
    #[serde(default)]
    policies: Vec<ExpectedOutputPolicy>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Read, check dimensions and validate an instance file. Validation
/// violations are reported all at once.
pub fn load_instance(path: impl AsRef<Path>) -> Result<PlanningInstance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let inst = parse_instance(&text, path, &base)?;
    let violations = validate_instance(&inst);
    if !violations.is_empty() {
        return Err(Error::InvalidInstance(violations));
    }
    Ok(inst)
}

/// Parse instance text without validating; CSV references resolve against
/// `base`. `path` is only used in error messages.
pub fn parse_instance(text: &str, path: &Path, base: &Path) -> Result<PlanningInstance> {
    let parse_err = |e: serde_json::Error| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    // Check the version before the full schema so old files get a clear error.
    let raw: Value = serde_json::from_str(text).map_err(parse_err)?;
    match raw.get("schema_version").and_then(Value::as_u64) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(Error::SchemaVersion {
                found: u32::try_from(v).unwrap_or(u32::MAX),
                expected: SCHEMA_VERSION,
            })
        }
        None => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                column: 1,
                message: "missing integer field `schema_version`".into(),
            })
        }
    }
    let file: InstanceFile = serde_json::from_str(text).map_err(parse_err)?;
    let mut scenarios = Vec::with_capacity(file.scenarios.len());
    for sf in &file.scenarios {
        scenarios.push(resolve_scenario(&file, sf, base)?);
    }
    Ok(PlanningInstance {
        name: file.name,
        buses: file.buses,
        gen_techs: file.gen_techs,
        storage_techs: file.storage_techs,
        load_techs: file.load_techs,
        branches: file.branches,
        scenarios,
        period_length_h: file.period_length_h,
        shed_cost: file.shed_cost,
        annualization_days: file.annualization_days,
        policies: file.policies,
        big_m_angle_spread: file.big_m_angle_spread,
    })
}

fn dim_err(table: &str, message: impl Into<String>) -> Error {
    Error::Dimension {
        table: table.to_string(),
        message: message.into(),
    }
}

fn check_len(table: &str, key: &str, series: &[f64], periods: usize) -> Result<()> {
    if series.len() != periods {
        return Err(dim_err(
            table,
            format!("`{key}` has {} periods, expected {periods}", series.len()),
        ));
    }
    Ok(())
}

fn resolve_scenario(file: &InstanceFile, sf: &ScenarioFile, base: &Path) -> Result<Scenario> {
    let periods = file.periods;
    let demand_table = match &sf.demand {
        DemandSeries::File(p) => p.clone(),
        DemandSeries::Inline(_) => format!("scenarios[{}].demand", sf.id),
    };
    let demand_map = match &sf.demand {
        DemandSeries::Inline(m) => m.clone(),
        DemandSeries::File(p) => read_columns(&base.join(p), p)?,
    };
    let mut demand = Vec::with_capacity(file.buses.len());
    for bus in &file.buses {
        let series = demand_map
            .get(&bus.id)
            .ok_or_else(|| dim_err(&demand_table, format!("no column for bus `{}`", bus.id)))?;
        check_len(&demand_table, &bus.id, series, periods)?;
        demand.push(series.clone());
    }
    if let Some(extra) = demand_map.keys().find(|k| !file.buses.iter().any(|b| &b.id == *k)) {
        return Err(dim_err(&demand_table, format!("column `{extra}` is not a bus")));
    }

    let avail_table = match &sf.availability {
        AvailabilitySeries::File(p) => p.clone(),
        AvailabilitySeries::Inline(_) => format!("scenarios[{}].availability", sf.id),
    };
    let avail_map: BTreeMap<String, BTreeMap<String, Vec<f64>>> = match &sf.availability {
        AvailabilitySeries::Inline(m) => m.clone(),
        AvailabilitySeries::File(p) => {
            let mut nested: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
            for (key, series) in read_columns(&base.join(p), p)? {
                let (bus, tech) = key
                    .split_once('/')
                    .ok_or_else(|| dim_err(p, format!("column `{key}` is not of the form bus/tech")))?;
                nested
                    .entry(bus.to_string())
                    .or_default()
                    .insert(tech.to_string(), series);
            }
            nested
        }
    };
    for (bus, techs) in &avail_map {
        if !file.buses.iter().any(|b| &b.id == bus) {
            return Err(dim_err(&avail_table, format!("`{bus}` is not a bus")));
        }
        for tech in techs.keys() {
            if !file.gen_techs.iter().any(|g| &g.id == tech) {
                return Err(dim_err(
                    &avail_table,
                    format!("`{bus}/{tech}` names no generation tech"),
                ));
            }
        }
    }
    let mut availability = Vec::with_capacity(file.buses.len());
    for bus in &file.buses {
        let mut per_tech = Vec::with_capacity(file.gen_techs.len());
        for tech in &file.gen_techs {
            match avail_map.get(&bus.id).and_then(|m| m.get(&tech.id)) {
                Some(series) => {
                    check_len(&avail_table, &format!("{}/{}", bus.id, tech.id), series, periods)?;
                    per_tech.push(series.clone());
                }
                None => per_tech.push(vec![1.0; periods]),
            }
        }
        availability.push(per_tech);
    }
    Ok(Scenario {
        id: sf.id.clone(),
        probability: sf.probability,
        demand,
        availability,
    })
}

/// Columns of a header-first numeric CSV, keyed by header.
fn read_columns(path: &Path, table: &str) -> Result<BTreeMap<String, Vec<f64>>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                dim_err(
                    table,
                    format!("row {} column `{}`: {field:?} is not a number", i + 1, headers[j]),
                )
            })?;
            cols[j].push(v);
        }
    }
    let mut out = BTreeMap::new();
    for (h, c) in headers.into_iter().zip(cols) {
        if out.insert(h.clone(), c).is_some() {
            return Err(dim_err(table, format!("duplicate column `{h}`")));
        }
    }
    Ok(out)
}

/// Round to 9 significant digits; `-0` becomes `0`.
pub fn round9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { 0.0 } else { v };
    }
    format!("{v:.8e}").parse().unwrap_or(v)
}

/// Shortest text of `round9(v)`; exponent form outside `[1e-4, 1e15)`.
pub fn fmt9(v: f64) -> String {
    let r = round9(v);
    if r == 0.0 {
        "0".into()
    } else if r.abs() < 1e-4 || r.abs() >= 1e15 {
        format!("{r:e}")
    } else if r == r.trunc() {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round9(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_numbers),
        Value::Object(o) => o.values_mut().for_each(round_numbers),
        _ => {}
    }
}

/// Canonical text of an instance: pretty JSON, inline series, 9-digit numbers,
/// LF line endings and a trailing newline.
pub fn instance_to_string(inst: &PlanningInstance) -> String {
    let scenarios = inst
        .scenarios
        .iter()
        .map(|s| ScenarioFile {
            id: s.id.clone(),
            probability: s.probability,
            demand: DemandSeries::Inline(
                inst.buses
                    .iter()
                    .zip(&s.demand)
                    .map(|(b, d)| (b.id.clone(), d.clone()))
                    .collect(),
            ),
            availability: AvailabilitySeries::Inline(
                inst.buses
                    .iter()
                    .zip(&s.availability)
                    .map(|(b, per_tech)| {
                        let m = inst
                            .gen_techs
                            .iter()
                            .zip(per_tech)
                            .filter(|(_, a)| a.iter().any(|&v| v != 1.0))
                            .map(|(g, a)| (g.id.clone(), a.clone()))
                            .collect::<BTreeMap<_, _>>();
                        (b.id.clone(), m)
                    })
                    .filter(|(_, m)| !m.is_empty())
                    .collect(),
            ),
        })
        .collect();
    let file = InstanceFile {
        schema_version: SCHEMA_VERSION,
        name: inst.name.clone(),
        periods: inst.periods(),
        period_length_h: inst.period_length_h,
        shed_cost: inst.shed_cost,
        annualization_days: inst.annualization_days,
        big_m_angle_spread: inst.big_m_angle_spread,
        gen_techs: inst.gen_techs.clone(),
        storage_techs: inst.storage_techs.clone(),
        load_techs: inst.load_techs.clone(),
        branches: inst.branches.clone(),
        buses: inst.buses.clone(),
        scenarios,
        policies: inst.policies.clone(),
    };
    let mut value = serde_json::to_value(&file).expect("instance serializes");
    round_numbers(&mut value);
    let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
    text.push('\n');
    text
}

pub fn save_instance(inst: &PlanningInstance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, instance_to_string(inst)).map_err(io_err(path))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt9).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// The files [`save_report`] writes, in order.
pub const REPORT_FILES: [&str; 6] = [
    "summary.json",
    "buildout.csv",
    "costs.csv",
    "reliability.csv",
    "emissions.csv",
    "trace.csv",
];

/// Summary fields of a report as canonical JSON.
pub fn summary_json(report: &SolveReport) -> String {
    let num = |v: Option<f64>| v.map_or(Value::Null, |x| serde_json::json!(round9(x)));
    let sigma: serde_json::Map<String, Value> = report
        .sigma_bar
        .iter()
        .map(|(h, s)| (h.clone(), serde_json::json!(round9(*s))))
        .collect();
    let v = serde_json::json!({
        "instance": report.instance,
        "method": report.method.to_string(),
        "status": report.status.to_string(),
        "termination": report.termination,
        "objective": num(report.objective),
        "lower_bound": num(report.lower_bound),
        "upper_bound": num(report.upper_bound),
        "gap": num(report.gap),
        "iterations": report.trace.len(),
        "sigma_bar": sigma,
    });
    let mut text = serde_json::to_string_pretty(&v).expect("summary serializes");
    text.push('\n');
    text
}

/// Write the report directory (created if missing); returns the paths written.
pub fn save_report(report: &SolveReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let p = |f: &str| dir.join(f);

    let summary = p(REPORT_FILES[0]);
    fs::write(&summary, summary_json(report)).map_err(io_err(&summary))?;
    write_csv(
        &p(REPORT_FILES[1]),
        &["kind", "location", "tech", "units", "mw"],
        report.buildout.iter().map(|r| {
            vec![
                r.kind.into(),
                r.location.clone(),
                r.tech.clone(),
                fmt9(r.units),
                fmt9(r.mw),
            ]
        }),
    )?;
    write_csv(
        &p(REPORT_FILES[2]),
        &["category", "component", "value"],
        report
            .costs
            .iter()
            .map(|r| vec![r.category.into(), r.component.into(), fmt9(r.value)]),
    )?;
    write_csv(
        &p(REPORT_FILES[3]),
        &["bus", "load_tech", "tier", "units", "required", "achieved"],
        report.reliability.iter().map(|r| {
            vec![
                r.bus.clone(),
                r.load_tech.clone(),
                r.tier.to_string(),
                fmt9(r.units),
                fmt9(r.required),
                fmt9(r.achieved),
            ]
        }),
    )?;
    write_csv(
        &p(REPORT_FILES[4]),
        &["policy", "lhs", "threshold", "sigma_bar"],
        report
            .policies
            .iter()
            .map(|r| vec![r.policy.clone(), fmt9(r.lhs), fmt9(r.threshold), fmt9(r.sigma_bar)]),
    )?;
    write_csv(
        &p(REPORT_FILES[5]),
        &[
            "iteration",
            "consensus_metric",
            "max_abs_sigma_bar",
            "lower_bound",
            "upper_bound",
            "wall_time_s",
        ],
        report.trace.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                fmt9(r.consensus_metric),
                fmt9(r.max_abs_sigma_bar),
                opt(r.lower_bound),
                opt(r.upper_bound),
                fmt9(r.wall_time_s),
            ]
        }),
    )?;
    Ok(REPORT_FILES.iter().map(|f| p(f)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round9_keeps_nine_digits() {
        assert_eq!(round9(1.234567891234), 1.23456789);
        assert_eq!(round9(-0.0).to_bits(), 0.0f64.to_bits());
        assert_eq!(fmt9(11466267.322549768), "11466267.3");
        assert_eq!(fmt9(3.0), "3");
        assert_eq!(fmt9(1e-12), "1e-12");
    }

    #[test]
    fn version_mismatch_is_reported() {
        let err = parse_instance(r#"{"schema_version": 7}"#, Path::new("x.json"), Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::SchemaVersion { found: 7, expected: 1 }));
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_instance(
            "{\n  \"schema_version\": 1,\n  oops\n}",
            Path::new("x.json"),
            Path::new("."),
        )
        .unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column >= 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
