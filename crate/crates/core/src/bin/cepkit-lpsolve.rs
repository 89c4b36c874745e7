//! Command-line LP/MILP solver compatible with the HiGHS CLI flags used by the
//! subprocess backend: `--model_file`, `--solution_file`, `--options_file`.

use std::path::PathBuf;
use std::process::ExitCode;

use cepkit::canonical::SolveStatus;
use cepkit::lp_format::read_lp;
use cepkit::solver::solution_file::SolutionFile;
use cepkit::solver::{solve, solve_lp_with_duals, SolverConfig};

fn usage() -> ExitCode {
    eprintln!("usage: cepkit-lpsolve --model_file F [--solution_file F] [--options_file F]");
    ExitCode::from(2)
}

fn apply_options(cfg: &mut SolverConfig, text: &str) -> Result<(), String> {
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("bad option line {line:?}"))?;
        let value = value.trim();
        let bad = |e: &dyn std::fmt::Display| format!("bad value for {}: {e}", key.trim());
        match key.trim() {
            "time_limit" => cfg.time_limit_s = value.parse().map_err(|e| bad(&e))?,
            "mip_rel_gap" => cfg.mip_gap = value.parse().map_err(|e| bad(&e))?,
            "random_seed" => cfg.seed = value.parse().map_err(|e| bad(&e))?,
            "threads" => cfg.threads = value.parse().map_err(|e| bad(&e))?,
            _ => {}
        }
    }
    Ok(())
}

fn status_text(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "Optimal",
        SolveStatus::FeasibleWithGap | SolveStatus::LimitReached => "Time limit reached",
        SolveStatus::Infeasible => "Infeasible",
        SolveStatus::Unbounded => "Unbounded",
    }
}

fn main() -> ExitCode {
    let mut model_file = None;
    let mut solution_file = None;
    let mut options_file = None;
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        let slot = match a.as_str() {
            "--model_file" => &mut model_file,
            "--solution_file" => &mut solution_file,
            "--options_file" => &mut options_file,
            _ => return usage(),
        };
        match args.next() {
            Some(v) => *slot = Some(PathBuf::from(v)),
            None => return usage(),
        }
    }
    let Some(model_file) = model_file else {
        return usage();
    };
    let mut cfg = SolverConfig::default();
    if let Some(p) = options_file {
        let applied = std::fs::read_to_string(&p)
            .map_err(|e| e.to_string())
            .and_then(|t| apply_options(&mut cfg, &t));
        if let Err(e) = applied {
            eprintln!("{}: {e}", p.display());
            return ExitCode::from(1);
        }
    }
    let model = match std::fs::read_to_string(&model_file)
        .map_err(|e| e.to_string())
        .and_then(|t| read_lp(&t).map_err(|e| e.to_string()))
    {
        Ok(m) => m,
        Err(e) => {
            eprintln!("{}: {e}", model_file.display());
            return ExitCode::from(1);
        }
    };
    let result = if model.is_mip() {
        solve(&model, &cfg)
    } else {
        solve_lp_with_duals(&model, &cfg)
    };
    let result = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("solve failed: {e}");
            return ExitCode::from(1);
        }
    };
    let mut file = SolutionFile {
        model_status: status_text(result.status).to_string(),
        ..Default::default()
    };
    if result.status.has_solution() {
        file.objective = Some(result.objective);
        file.columns = model
            .variables
            .iter()
            .zip(&result.primal)
            .map(|(v, &x)| (v.name.clone(), x))
            .collect();
        file.rows = model
            .constraints
            .iter()
            .map(|r| (r.name.clone(), r.activity(&result.primal)))
            .collect();
        file.dual_rows = result.duals.as_ref().map(|d| {
            model
                .constraints
                .iter()
                .zip(d)
                .map(|(r, &y)| (r.name.clone(), y))
                .collect()
        });
        file.dual_bound = result.dual_bound;
        file.mip_gap = result.mip_gap;
    }
    let text = file.write();
    match solution_file {
        Some(p) => {
            if let Err(e) = std::fs::write(&p, text) {
                eprintln!("{}: {e}", p.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::SUCCESS
}
