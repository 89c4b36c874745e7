//! Entry points behind the `cepkit` binary. Every command writes its
//! human-readable output to a caller-supplied writer and returns the process
//! exit code, so tests can drive them without spawning processes.

use std::io::Write;
use std::path::{Path, PathBuf};

use cepkit::ef::solve_extensive_form;
use cepkit::io::{fmt9, load_instance, save_report};
use cepkit::model::{validate_instance, TierSpec};
use cepkit::pha::{run_pha, PhaConfig, Termination};
use cepkit::report::{Method, ReportStatus, SolveReport};
use cepkit::solver::SolverConfig;
use cepkit::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;
pub const EXIT_NO_INCUMBENT: i32 = 4;
pub const EXIT_BACKEND: i32 = 5;

/// Everything a solve run depends on.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub instance: PathBuf,
    pub method: Method,
    pub solver: SolverConfig,
    pub pha: PhaConfig,
    pub out: PathBuf,
    /// Copied into the solver seed, the only source of randomness.
    pub seed: u64,
}

impl RunManifest {
    pub fn new(instance: impl Into<PathBuf>, method: Method, out: impl Into<PathBuf>) -> Self {
        Self {
            instance: instance.into(),
            method,
            solver: SolverConfig::default(),
            pha: PhaConfig::default(),
            out: out.into(),
            seed: 0,
        }
    }
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInstance(_)
        | Error::Parse { .. }
        | Error::SchemaVersion { .. }
        | Error::Dimension { .. }
        | Error::NegativeCostWithoutEqualityMandate(_)
        | Error::Config(_) => EXIT_INVALID,
        Error::Io { .. } | Error::Csv { .. } => EXIT_IO,
        _ => EXIT_BACKEND,
    }
}

fn report_error(err: &mut impl Write, e: &Error) -> i32 {
    match e {
        Error::InvalidInstance(vs) => {
            for v in vs {
                let _ = writeln!(err, "{v}");
            }
        }
        Error::BackendFailure { message, diagnostics } => {
            let _ = writeln!(err, "error: solver backend failed: {message}");
            if !diagnostics.is_empty() {
                let _ = writeln!(err, "{diagnostics}");
            }
        }
        other => {
            let _ = writeln!(err, "error: {other}");
        }
    }
    error_code(e)
}

/// Check an instance file; violations go to `out`, one per line.
pub fn cmd_validate(path: &Path, out: &mut impl Write) -> i32 {
    match load_instance(path) {
        Ok(_) => EXIT_OK,
        Err(e) => report_error(out, &e),
    }
}

fn solve_code(report: &SolveReport) -> i32 {
    match report.status {
        ReportStatus::Optimal => EXIT_OK,
        ReportStatus::Incumbent => {
            let done = [Termination::Converged, Termination::GapClosed]
                .iter()
                .any(|t| t.to_string() == report.termination);
            if done {
                EXIT_OK
            } else {
                EXIT_LIMIT
            }
        }
        ReportStatus::NoFeasibleIncumbent | ReportStatus::Infeasible => EXIT_NO_INCUMBENT,
    }
}

/// The summary printed after a solve.
pub fn summary_text(report: &SolveReport) -> String {
    let num = |v: Option<f64>| v.map_or_else(|| "none".to_string(), fmt9);
    let mut s = String::new();
    s.push_str(&format!("instance     {}\n", report.instance));
    s.push_str(&format!("method       {}\n", report.method));
    s.push_str(&format!("status       {}\n", report.status));
    s.push_str(&format!("termination  {}\n", report.termination));
    s.push_str(&format!("objective    {}\n", num(report.objective)));
    s.push_str(&format!("lower bound  {}\n", num(report.lower_bound)));
    s.push_str(&format!("upper bound  {}\n", num(report.upper_bound)));
    s.push_str(&format!("gap          {}\n", num(report.gap)));
    for (h, v) in &report.sigma_bar {
        s.push_str(&format!("sigma_bar    {h} {}\n", fmt9(*v)));
    }
    s
}

/// Run a manifest, write its report directory and print the summary.
pub fn cmd_solve(manifest: &RunManifest, out: &mut impl Write) -> i32 {
    match solve_manifest(manifest) {
        Ok(report) => {
            if let Err(e) = save_report(&report, &manifest.out) {
                return report_error(out, &e);
            }
            let _ = out.write_all(summary_text(&report).as_bytes());
            solve_code(&report)
        }
        Err(e) => report_error(out, &e),
    }
}

/// Run a manifest without touching the file system beyond reading the instance.
pub fn solve_manifest(manifest: &RunManifest) -> Result<SolveReport, Error> {
    let inst = load_instance(&manifest.instance)?;
    let mut solver = manifest.solver.clone();
    solver.seed = manifest.seed;
    match manifest.method {
        Method::Ef => Ok(solve_extensive_form(&inst, &solver)?.report),
        Method::Pha => Ok(run_pha(&inst, &manifest.pha, &solver)?.0),
    }
}

/// One tier variant in a flexibility comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct FlexVariant {
    pub name: String,
    pub tiers: TierSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlexRow {
    pub variant: String,
    pub status: String,
    pub total_cost: Option<f64>,
    /// Sum of expected-output policy totals.
    pub emissions: Option<f64>,
    /// Built units of the compared load tech, summed over buses.
    pub load_units: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlexTable {
    pub rows: Vec<FlexRow>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl FlexTable {
    pub fn to_text(&self) -> String {
        let num = |v: Option<f64>| v.map_or_else(|| "-".to_string(), fmt9);
        let mut s = String::from("variant\tstatus\ttotal_cost\temissions\tload_units\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.variant,
                r.status,
                num(r.total_cost),
                num(r.emissions),
                num(r.load_units)
            ));
        }
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s
    }
}

/// Absolute cost increase tolerated before a monotonicity warning.
pub const MONOTONICITY_TOL: f64 = 1e-6;

/// Solve the extensive form once per tier variant of `load_tech`.
pub fn cmd_compare_flexibility(
    instance: &Path,
    load_tech: &str,
    variants: &[FlexVariant],
    solver: &SolverConfig,
) -> Result<FlexTable, Error> {
    let base = load_instance(instance)?;
    compare_flexibility(&base, load_tech, variants, solver)
}

pub fn compare_flexibility(
    base: &cepkit::model::PlanningInstance,
    load_tech: &str,
    variants: &[FlexVariant],
    solver: &SolverConfig,
) -> Result<FlexTable, Error> {
    let d = base
        .load_index(load_tech)
        .ok_or_else(|| Error::Config(format!("no load tech `{load_tech}`")))?;
    let mut table = FlexTable::default();
    for v in variants {
        let mut inst = base.clone();
        inst.load_techs[d].tiers = v.tiers.clone();
        let vs = validate_instance(&inst);
        if !vs.is_empty() {
            return Err(Error::InvalidInstance(vs));
        }
        let row = match solve_extensive_form(&inst, solver) {
            Ok(o) => FlexRow {
                variant: v.name.clone(),
                status: o.report.status.to_string(),
                total_cost: o.report.total_cost(),
                emissions: (!o.report.policies.is_empty()).then(|| o.report.policies.iter().map(|p| p.lhs).sum()),
                load_units: o.plan.as_ref().map(|_| {
                    o.report
                        .buildout
                        .iter()
                        .filter(|b| b.kind == "large-load" && b.tech == load_tech)
                        .map(|b| b.units)
                        .sum()
                }),
                error: None,
            },
            Err(e) => FlexRow {
                variant: v.name.clone(),
                status: "error".into(),
                total_cost: None,
                emissions: None,
                load_units: None,
                error: Some(e.to_string()),
            },
        };
        table.rows.push(row);
    }
    for i in 0..variants.len() {
        for j in i + 1..variants.len() {
            let (a, b) = (&variants[i], &variants[j]);
            if a.tiers.breakpoints != b.tiers.breakpoints {
                table.notes.push(format!(
                    "`{}` and `{}` have different breakpoints; not compared",
                    a.name, b.name
                ));
                continue;
            }
            let (ca, cb) = (table.rows[i].total_cost, table.rows[j].total_cost);
            let (Some(ca), Some(cb)) = (ca, cb) else { continue };
            // The more flexible variant is a relaxation and may not cost more.
            if b.tiers.is_relaxation_of(&a.tiers) && cb > ca + MONOTONICITY_TOL {
                table.warnings.push(format!(
                    "`{}` relaxes `{}` but costs more ({} > {})",
                    b.name,
                    a.name,
                    fmt9(cb),
                    fmt9(ca)
                ));
            }
            if a.tiers.is_relaxation_of(&b.tiers) && ca > cb + MONOTONICITY_TOL {
                table.warnings.push(format!(
                    "`{}` relaxes `{}` but costs more ({} > {})",
                    a.name,
                    b.name,
                    fmt9(ca),
                    fmt9(cb)
                ));
            }
        }
    }
    Ok(table)
}

/// Parse `name=u1,u2,...:phi1,phi2,...`.
pub fn parse_variant(text: &str) -> Result<FlexVariant, String> {
    let (name, rest) = text
        .split_once('=')
        .ok_or_else(|| format!("variant `{text}` is not of the form name=u,...:phi,..."))?;
    let (u, phi) = rest
        .split_once(':')
        .ok_or_else(|| format!("variant `{text}` lacks the `:` between u and phi"))?;
    let nums = |s: &str| -> Result<Vec<f64>, String> {
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
            .collect()
    };
    Ok(FlexVariant {
        name: name.to_string(),
        tiers: TierSpec::new(nums(u)?, nums(phi)?),
    })
}
