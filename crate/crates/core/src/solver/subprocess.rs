use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use super::solution_file::SolutionFile;
use super::{SolverConfig, SOLVER_BIN_ENV};
use crate::canonical::{CanonicalModel, SolveResult, SolveStatus};
use crate::error::{Error, Result};
use crate::lp_format::write_lp;

fn resolve_binary(configured: Option<&Path>) -> Result<PathBuf> {
    if let Some(p) = configured {
        return Ok(p.to_path_buf());
    }
    match std::env::var_os(SOLVER_BIN_ENV) {
        Some(p) if !p.is_empty() => Ok(PathBuf::from(p)),
        _ => Err(Error::BackendUnavailable(format!(
            "no solver binary configured and {SOLVER_BIN_ENV} is unset"
        ))),
    }
}

pub(crate) fn status_from_text(text: &str) -> Option<SolveStatus> {
    Some(match text {
        "Optimal" | "Empty" => SolveStatus::Optimal,
        "Infeasible" => SolveStatus::Infeasible,
        "Unbounded" | "Primal unbounded" => SolveStatus::Unbounded,
        "Time limit reached" | "Iteration limit reached" | "Solution limit reached" | "Interrupted by user" => {
            SolveStatus::LimitReached
        }
        _ => return None,
    })
}

pub(super) fn solve(
    model: &CanonicalModel,
    cfg: &SolverConfig,
    binary: Option<&Path>,
    want_duals: bool,
) -> Result<SolveResult> {
    let bin = resolve_binary(binary)?;
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| Error::Io {
        path: std::env::temp_dir(),
        source: e,
    })?;
    let lp_path = dir.path().join("model.lp");
    let sol_path = dir.path().join("model.sol");
    let opt_path = dir.path().join("options.txt");
    std::fs::write(&lp_path, write_lp(model)).map_err(|e| Error::ModelWrite {
        path: lp_path.clone(),
        source: e,
    })?;
    let options = format!(
        "time_limit = {}\nmip_rel_gap = {}\nrandom_seed = {}\nthreads = {}\nwrite_solution_style = 0\n",
        cfg.time_limit_s,
        cfg.mip_gap,
        cfg.highs_seed(),
        cfg.threads
    );
    std::fs::write(&opt_path, options).map_err(|e| Error::ModelWrite {
        path: opt_path.clone(),
        source: e,
    })?;
    let output = Command::new(&bin)
        .arg("--model_file")
        .arg(&lp_path)
        .arg("--solution_file")
        .arg(&sol_path)
        .arg("--options_file")
        .arg(&opt_path)
        .output()
        .map_err(|e| Error::BackendUnavailable(format!("cannot run {}: {e}", bin.display())))?;
    let diagnostics = String::from_utf8_lossy(&output.stderr).into_owned();
    if !output.status.success() {
        return Err(Error::BackendFailure {
            message: format!("{} exited with {}", bin.display(), output.status),
            diagnostics,
        });
    }
    let text = std::fs::read_to_string(&sol_path).map_err(|e| Error::BackendFailure {
        message: format!("no solution file written: {e}"),
        diagnostics: diagnostics.clone(),
    })?;
    let sol = SolutionFile::parse(&text)?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut status = status_from_text(&sol.model_status).ok_or_else(|| Error::BackendFailure {
        message: format!("unrecognized model status {:?}", sol.model_status),
        diagnostics: diagnostics.clone(),
    })?;
    if status == SolveStatus::LimitReached && sol.objective.is_some() && model.is_mip() {
        status = SolveStatus::FeasibleWithGap;
    }
    if !status.has_solution() {
        return Ok(SolveResult::no_solution(status, elapsed));
    }
    let objective = sol.objective.ok_or_else(|| Error::BackendFailure {
        message: "solution file has no primal values".into(),
        diagnostics: diagnostics.clone(),
    })?;
    // Map values back by name; the file may list columns in any order.
    let by_name: std::collections::HashMap<&str, f64> = sol.columns.iter().map(|(n, v)| (n.as_str(), *v)).collect();
    let primal = model
        .variables
        .iter()
        .map(|v| {
            by_name
                .get(v.name.as_str())
                .copied()
                .ok_or_else(|| Error::BackendFailure {
                    message: format!("solution file lacks column {}", v.name),
                    diagnostics: diagnostics.clone(),
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    let duals = if want_duals {
        let rows = sol.dual_rows.ok_or_else(|| Error::BackendFailure {
            message: "solution file has no dual values".into(),
            diagnostics: diagnostics.clone(),
        })?;
        let by_name: std::collections::HashMap<String, f64> = rows.into_iter().collect();
        Some(
            model
                .constraints
                .iter()
                .map(|r| by_name.get(&r.name).copied().unwrap_or(0.0))
                .collect(),
        )
    } else {
        None
    };
    Ok(SolveResult {
        status,
        objective,
        primal,
        mip_gap: sol.mip_gap.or(model.is_mip().then_some(0.0)),
        dual_bound: sol.dual_bound,
        duals,
        wall_time_s: elapsed,
    })
}
