use std::ops::Bound;
use std::time::Instant;

use highs::{HighsModelStatus, RowProblem, Sense};

use super::{status_from_limit, SolverConfig};
use crate::canonical::{CanonicalModel, RowSense, SolveResult, SolveStatus};
use crate::error::{Error, Result};

fn bounds(lo: f64, hi: f64) -> (Bound<f64>, Bound<f64>) {
    let l = if lo == f64::NEG_INFINITY {
        Bound::Unbounded
    } else {
        Bound::Included(lo)
    };
    let u = if hi == f64::INFINITY {
        Bound::Unbounded
    } else {
        Bound::Included(hi)
    };
    (l, u)
}

fn run(
    model: &CanonicalModel,
    cfg: &SolverConfig,
    presolve: bool,
    tight: bool,
) -> Result<(HighsModelStatus, highs::SolvedModel)> {
    let mut pb = RowProblem::default();
    let cols: Vec<highs::Col> = model
        .variables
        .iter()
        .zip(&model.objective.linear)
        .map(|(v, &c)| {
            let b = bounds(v.lower, v.upper);
            if v.integer {
                pb.add_integer_column(c, b)
            } else {
                pb.add_column(c, b)
            }
        })
        .collect();
    for row in &model.constraints {
        let factors = row.coeffs.iter().map(|&(j, a)| (cols[j], a));
        match row.sense {
            RowSense::Le => pb.add_row((Bound::Unbounded, Bound::Included(row.rhs)), factors),
            RowSense::Ge => pb.add_row((Bound::Included(row.rhs), Bound::Unbounded), factors),
            RowSense::Eq => pb.add_row(row.rhs..=row.rhs, factors),
        }
    }
    let mut hm = pb.optimise(Sense::Minimise);
    hm.make_quiet();
    hm.set_option("time_limit", cfg.time_limit_s);
    hm.set_option("mip_rel_gap", cfg.mip_gap);
    hm.set_option("mip_abs_gap", 1e-9);
    hm.set_option("random_seed", cfg.highs_seed());
    if tight {
        hm.set_option("primal_feasibility_tolerance", 1e-8);
        hm.set_option("dual_feasibility_tolerance", 1e-8);
        hm.set_option("mip_feasibility_tolerance", 1e-8);
    }
    if !presolve {
        hm.set_option("presolve", &b"off"[..]);
    }
    let solved = hm.try_solve().map_err(|s| Error::BackendFailure {
        message: "HiGHS solve call failed".into(),
        diagnostics: format!("{s:?}"),
    })?;
    Ok((solved.status(), solved))
}

pub(super) fn solve(model: &CanonicalModel, cfg: &SolverConfig, want_duals: bool) -> Result<SolveResult> {
    let start = Instant::now();
    if model.num_cols() == 0 {
        let status = if model.constraints.iter().all(|r| r.violation(&[]) <= 0.0) {
            SolveStatus::Optimal
        } else {
            SolveStatus::Infeasible
        };
        let mut r = SolveResult::no_solution(status, 0.0);
        if status == SolveStatus::Optimal {
            r.objective = model.objective.offset;
            r.duals = want_duals.then(|| vec![0.0; model.num_rows()]);
        }
        return Ok(r);
    }
    // Retry with presolve off when presolve cannot tell infeasible from
    // unbounded, then at default tolerances: cleanup after postsolve can stall
    // or error on residuals just above the tight ones, and the caller
    // re-checks feasibility at 1e-6 regardless.
    let attempts = [(true, true), (false, true), (true, false), (false, false)];
    let mut last = None;
    for (presolve, tight) in attempts {
        let outcome = run(model, cfg, presolve, tight);
        let settled = matches!(&outcome, Ok((s, _)) if !matches!(s, HighsModelStatus::UnboundedOrInfeasible | HighsModelStatus::Unknown));
        last = Some(outcome);
        if settled {
            break;
        }
    }
    let (status, solved) = last.expect("at least one attempt")?;
    let elapsed = start.elapsed().as_secs_f64();
    let has_point = || solved.int_info_value(c"primal_solution_status").is_ok_and(|s| s == 2);
    let status = match status {
        HighsModelStatus::Optimal => SolveStatus::Optimal,
        HighsModelStatus::Infeasible => SolveStatus::Infeasible,
        HighsModelStatus::Unbounded => SolveStatus::Unbounded,
        HighsModelStatus::ReachedTimeLimit
        | HighsModelStatus::ReachedIterationLimit
        | HighsModelStatus::ReachedSolutionLimit
        | HighsModelStatus::ReachedInterrupt
        | HighsModelStatus::ReachedMemoryLimit
        | HighsModelStatus::ObjectiveBound
        | HighsModelStatus::ObjectiveTarget => status_from_limit(model.is_mip() && has_point()),
        other => {
            return Err(Error::BackendFailure {
                message: format!("HiGHS returned model status {other:?}"),
                diagnostics: String::new(),
            })
        }
    };
    if !status.has_solution() {
        return Ok(SolveResult::no_solution(status, elapsed));
    }
    let sol = solved.get_solution();
    let primal = sol.columns().to_vec();
    let (mip_gap, dual_bound) = if model.is_mip() {
        let gap = solved.mip_gap();
        let bound = solved
            .double_info_value(c"mip_dual_bound")
            .ok()
            .map(|b| b + model.objective.offset);
        (Some(if gap.is_finite() { gap } else { 0.0 }), bound)
    } else {
        (None, None)
    };
    Ok(SolveResult {
        status,
        objective: solved.objective_value() + model.objective.offset,
        primal,
        mip_gap,
        dual_bound,
        duals: (want_duals && !model.is_mip()).then(|| sol.dual_rows().to_vec()),
        wall_time_s: elapsed,
    })
}
