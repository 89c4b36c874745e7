//! Direct solve of the extensive form.

use crate::builder::build_extensive_form;
use crate::canonical::{SolveResult, SolveStatus};
use crate::error::Result;
use crate::model::PlanningInstance;
use crate::report::{Method, PlanSolution, ReportStatus, SolveReport};
use crate::solver::{solve, SolverConfig};

#[derive(Debug, Clone)]
pub struct EfOutcome {
    pub report: SolveReport,
    /// Primal plan, when the solver returned one.
    pub plan: Option<PlanSolution>,
    pub result: SolveResult,
}

/// Build and solve the extensive form. Only a proven MILP optimum yields
/// [`ReportStatus::Optimal`].
pub fn solve_extensive_form(inst: &PlanningInstance, solver: &SolverConfig) -> Result<EfOutcome> {
    solver.validate()?;
    let (model, index) = build_extensive_form(inst)?;
    let result = solve(&model, solver)?;
    let (status, termination) = match result.status {
        SolveStatus::Optimal => (ReportStatus::Optimal, "optimal"),
        SolveStatus::FeasibleWithGap => (ReportStatus::Incumbent, "limit-reached"),
        SolveStatus::Infeasible => (ReportStatus::Infeasible, "infeasible"),
        SolveStatus::Unbounded => (ReportStatus::NoFeasibleIncumbent, "unbounded"),
        SolveStatus::LimitReached => (ReportStatus::NoFeasibleIncumbent, "limit-reached"),
    };
    let mut report = SolveReport::empty(inst, Method::Ef, status, termination);
    let plan = result
        .status
        .has_solution()
        .then(|| PlanSolution::from_index(&index, &result.primal));
    if let Some(plan) = &plan {
        report = report.with_plan(inst, plan);
        report.objective = Some(result.objective);
        report.upper_bound = Some(result.objective);
        report.lower_bound = Some(result.dual_bound.unwrap_or(result.objective));
        report.gap = Some(result.mip_gap.unwrap_or(0.0));
    }
    Ok(EfOutcome { report, plan, result })
}
