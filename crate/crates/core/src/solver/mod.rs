//! Uniform solve interface over interchangeable LP/MILP backends.
//!
//! * [`Backend::InProcess`] links HiGHS directly.
//! * [`Backend::Subprocess`] writes a CPLEX-LP file, runs an external solver
//!   binary that speaks the HiGHS command-line conventions, and parses the raw
//!   solution file it writes back.
//!
//! Diagonal quadratic objectives never reach a backend. Continuous models get
//! tangent cuts added until the epigraph is tight; integer models get a fixed
//! set of tangents (exact at integer points of integer columns). The HiGHS
//! active-set QP solver cycled on badly scaled proximal terms.

mod highs_backend;
pub mod solution_file;
mod subprocess;

use std::path::PathBuf;

use crate::canonical::{CanonicalModel, RowSense, SolveResult, SolveStatus};
use crate::error::{Error, Result};

/// Absolute primal feasibility tolerance enforced on every returned solution.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Environment variable naming the external solver binary.
pub const SOLVER_BIN_ENV: &str = "CEPKIT_SOLVER_BIN";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    InProcess,
    /// External binary; `None` falls back to [`SOLVER_BIN_ENV`].
    Subprocess {
        binary: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub backend: Backend,
    pub time_limit_s: f64,
    /// Relative MIP gap target in `[0, 1)`.
    pub mip_gap: f64,
    pub threads: u32,
    pub seed: u64,
    /// Segments of the piecewise-linear proximal approximation.
    pub pwl_segments: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            backend: Backend::InProcess,
            time_limit_s: 1800.0,
            mip_gap: 1e-9,
            threads: 1,
            seed: 0,
            pwl_segments: 8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_limit_s > 0.0) {
            return Err(Error::Config(format!(
                "time limit must be > 0, got {}",
                self.time_limit_s
            )));
        }
        if !(0.0..1.0).contains(&self.mip_gap) {
            return Err(Error::Config(format!(
                "mip gap must lie in [0, 1), got {}",
                self.mip_gap
            )));
        }
        if self.threads == 0 {
            return Err(Error::Config("thread count must be >= 1".into()));
        }
        if self.pwl_segments == 0 {
            return Err(Error::Config("pwl segments must be >= 1".into()));
        }
        Ok(())
    }

    /// HiGHS takes a 32-bit seed.
    pub(crate) fn highs_seed(&self) -> i32 {
        (self.seed % (i32::MAX as u64)) as i32
    }
}

/// Solve `model` with the configured backend.
pub fn solve(model: &CanonicalModel, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_inner(model, cfg, false)
}

/// Solve a continuous model and return row duals (HiGHS sign convention:
/// `>=` rows carry non-negative duals in a minimization).
pub fn solve_lp_with_duals(model: &CanonicalModel, cfg: &SolverConfig) -> Result<SolveResult> {
    if model.is_mip() {
        return Err(Error::IntegerColumnsPresent);
    }
    solve_inner(model, cfg, true)
}

fn solve_inner(model: &CanonicalModel, cfg: &SolverConfig, want_duals: bool) -> Result<SolveResult> {
    cfg.validate()?;
    model.check().map_err(|m| Error::BackendFailure {
        message: format!("malformed model: {m}"),
        diagnostics: String::new(),
    })?;
    let (mut result, linearized) = if !model.has_quadratic() {
        (backend_solve(model, cfg, want_duals)?, false)
    } else if model.is_mip() {
        let lin = linearize_quadratic(model, cfg.pwl_segments)?;
        (backend_solve(&lin, cfg, false)?, true)
    } else {
        (outer_approximation(model, cfg)?, true)
    };
    if result.status.has_solution() {
        result.primal.truncate(model.num_cols());
        if linearized {
            result.dual_bound = None;
            result.duals = None;
        }
        // Report the objective of the original model at the returned point.
        result.objective = model.evaluate(&result.primal);
        if !linearized && !model.is_mip() {
            result.dual_bound = Some(result.objective);
        }
        let viol = model.max_violation(&result.primal);
        if viol > FEASIBILITY_TOL {
            return Err(Error::BackendFailure {
                message: format!("returned point violates the model by {viol:e}"),
                diagnostics: String::new(),
            });
        }
    }
    Ok(result)
}

fn backend_solve(model: &CanonicalModel, cfg: &SolverConfig, want_duals: bool) -> Result<SolveResult> {
    match &cfg.backend {
        Backend::InProcess => highs_backend::solve(model, cfg, want_duals),
        Backend::Subprocess { binary } => subprocess::solve(model, cfg, binary.as_deref(), want_duals),
    }
}

const OA_MAX_ROUNDS: usize = 1000;
/// Epigraph undershoot, in objective units, below which a column is settled.
const OA_TOL: f64 = 1e-9;

/// Kelley cutting planes for a continuous model with a diagonal quadratic
/// objective: start from the tangent linearization and add a tangent at the
/// current point of every column whose epigraph value undershoots.
fn outer_approximation(model: &CanonicalModel, cfg: &SolverConfig) -> Result<SolveResult> {
    let (mut lp, epi) = linearize_with_map(model, cfg.pwl_segments)?;
    let mut tangents: Vec<Vec<f64>> = vec![Vec::new(); epi.len()];
    let mut cuts = 0usize;
    for _ in 0..OA_MAX_ROUNDS {
        let r = backend_solve(&lp, cfg, false)?;
        if r.status != SolveStatus::Optimal {
            return Ok(r);
        }
        let mut added = false;
        for (&(j, z, q), seen) in epi.iter().zip(&mut tangents) {
            let x = r.primal[j];
            let under = q * (x * x - r.primal[z]);
            // A repeated tangent point means the LP tolerance, not the model,
            // is holding the epigraph below the curve.
            let repeated = seen.iter().any(|&p| (p - x).abs() <= 1e-12 * (1.0 + x.abs()));
            if under > OA_TOL && !repeated {
                lp.add_constraint(
                    format!("oacut({},{cuts})", model.variables[j].name),
                    [(z, 1.0), (j, -2.0 * x)],
                    RowSense::Ge,
                    -x * x,
                );
                seen.push(x);
                cuts += 1;
                added = true;
            }
        }
        if !added {
            return Ok(r);
        }
    }
    Err(Error::BackendFailure {
        message: format!("quadratic outer approximation did not settle in {OA_MAX_ROUNDS} rounds"),
        diagnostics: String::new(),
    })
}

/// Replace every diagonal quadratic term `q x^2` by `q z` with an epigraph
/// column `z >= 0` and tangent cuts `z >= 2 p x - p^2` at `segments + 1` points spread over
/// the column's box (integer points for integer columns). Columns are appended
/// after the originals.
pub fn linearize_quadratic(model: &CanonicalModel, segments: usize) -> Result<CanonicalModel> {
    Ok(linearize_with_map(model, segments)?.0)
}

/// As [`linearize_quadratic`], also returning `(column, epigraph column, q)`.
/// `(column, epigraph column, coefficient)` for each quadratic term.
type Epigraphs = Vec<(usize, usize, f64)>;

fn linearize_with_map(model: &CanonicalModel, segments: usize) -> Result<(CanonicalModel, Epigraphs)> {
    let mut epi = Vec::new();
    let mut out = model.clone();
    out.objective.quadratic.clear();
    for &(j, q) in &model.objective.quadratic {
        if q == 0.0 {
            continue;
        }
        if q < 0.0 {
            return Err(Error::Config(format!(
                "quadratic coefficient on column {j} is negative"
            )));
        }
        let var = &model.variables[j];
        let (lo, hi) = (var.lower, var.upper);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!(
                "quadratic column {} needs finite bounds for linearization",
                var.name
            )));
        }
        if hi - lo <= 0.0 {
            out.objective.offset += q * lo * lo;
            continue;
        }
        let mut points: Vec<f64> = (0..=segments)
            .map(|i| lo + (hi - lo) * i as f64 / segments as f64)
            .collect();
        if var.integer {
            for p in &mut points {
                *p = p.round();
            }
            points.dedup();
        }
        // z stands for x^2 and carries q in the objective, which keeps the
        // cut coefficients on the scale of the column's box.
        let z = out.add_variable(format!("prox({})", var.name), 0.0, f64::INFINITY, false, q);
        epi.push((j, z, q));
        for (i, p) in points.into_iter().enumerate() {
            out.add_constraint(
                format!("proxcut({},{i})", var.name),
                [(z, 1.0), (j, -2.0 * p)],
                RowSense::Ge,
                -p * p,
            );
        }
    }
    Ok((out, epi))
}

/// Largest complementary-slackness / dual-sign residual of an LP solution,
/// scaled by `1 + |value|` of the compared quantities.
pub fn dual_residual(model: &CanonicalModel, result: &SolveResult) -> Option<f64> {
    let duals = result.duals.as_ref()?;
    let x = &result.primal;
    let mut worst: f64 = 0.0;
    let mut reduced = model.objective.linear.clone();
    for &(j, q) in &model.objective.quadratic {
        reduced[j] += 2.0 * q * x[j];
    }
    for (row, &y) in model.constraints.iter().zip(duals) {
        let slack = row.activity(x) - row.rhs;
        match row.sense {
            RowSense::Le => worst = worst.max(y.max(0.0)),
            RowSense::Ge => worst = worst.max((-y).max(0.0)),
            RowSense::Eq => {}
        }
        if row.sense != RowSense::Eq {
            worst = worst.max((y * slack).abs() / (1.0 + slack.abs().max(y.abs())));
        }
        for &(j, a) in &row.coeffs {
            reduced[j] -= a * y;
        }
    }
    for (j, v) in model.variables.iter().enumerate() {
        let d = reduced[j];
        let at_lower = (x[j] - v.lower).abs() <= FEASIBILITY_TOL;
        let at_upper = (v.upper - x[j]).abs() <= FEASIBILITY_TOL;
        let r = match (at_lower, at_upper) {
            (true, true) => 0.0,
            (true, false) => (-d).max(0.0),
            (false, true) => d.max(0.0),
            (false, false) => d.abs(),
        };
        worst = worst.max(r / (1.0 + model.objective.linear[j].abs()));
    }
    Some(worst)
}

/// Dual objective `sum_i rhs_i y_i + sum_j bound_j d_j + offset` of an LP solution.
pub fn dual_objective(model: &CanonicalModel, result: &SolveResult) -> Option<f64> {
    let duals = result.duals.as_ref()?;
    let mut reduced = model.objective.linear.clone();
    let mut value = model.objective.offset;
    for (row, &y) in model.constraints.iter().zip(duals) {
        value += row.rhs * y;
        for &(j, a) in &row.coeffs {
            reduced[j] -= a * y;
        }
    }
    for ((v, d), c) in model.variables.iter().zip(reduced).zip(&model.objective.linear) {
        let bound = if d > 0.0 { v.lower } else { v.upper };
        // Roundoff-sized reduced costs on unbounded sides count as zero.
        if d != 0.0 && (bound.is_finite() || d.abs() > 1e-9 * (1.0 + c.abs())) {
            value += d * bound;
        }
    }
    Some(value)
}

pub(crate) fn status_from_limit(has_incumbent: bool) -> SolveStatus {
    if has_incumbent {
        SolveStatus::FeasibleWithGap
    } else {
        SolveStatus::LimitReached
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_var(integer: bool, lb: f64) -> CanonicalModel {
        let mut m = CanonicalModel::new();
        let x = m.add_variable("x", f64::NEG_INFINITY, f64::INFINITY, integer, 1.0);
        m.add_constraint("r", [(x, 1.0)], RowSense::Ge, lb);
        m
    }

    #[test]
    fn continuous_minimum() {
        let r = solve(&one_var(false, 3.0), &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn integer_rounds_up() {
        let r = solve(&one_var(true, 2.5), &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_toy() {
        let mut m = CanonicalModel::new();
        let x = m.add_variable("x", f64::NEG_INFINITY, f64::INFINITY, false, 1.0);
        m.add_constraint("lo", [(x, 1.0)], RowSense::Ge, 1.0);
        m.add_constraint("hi", [(x, 1.0)], RowSense::Le, 0.0);
        let r = solve(&m, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unit_dual_on_single_row() {
        let m = one_var(false, 3.0);
        let r = solve_lp_with_duals(&m, &SolverConfig::default()).unwrap();
        let duals = r.duals.as_ref().unwrap();
        assert!((duals[0] - 1.0).abs() < 1e-9);
        assert!(dual_residual(&m, &r).unwrap() < 1e-5);
    }

    #[test]
    fn degenerate_duplicate_rows() {
        let mut m = one_var(false, 3.0);
        m.add_constraint("r2", [(0, 1.0)], RowSense::Ge, 3.0);
        let r = solve_lp_with_duals(&m, &SolverConfig::default()).unwrap();
        let duals = r.duals.as_ref().unwrap();
        assert!((duals[0] + duals[1] - 1.0).abs() < 1e-9);
        assert!(dual_residual(&m, &r).unwrap() < 1e-5);
        assert!((dual_objective(&m, &r).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn duals_refused_for_mip() {
        assert!(matches!(
            solve_lp_with_duals(&one_var(true, 1.0), &SolverConfig::default()),
            Err(Error::IntegerColumnsPresent)
        ));
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            mip_gap: 1.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            time_limit_s: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn quadratic_outer_approximation() {
        // min (x - 1.3)^2 over x in [0, 4]
        let mut m = CanonicalModel::new();
        let x = m.add_variable("x", 0.0, 4.0, false, -2.6);
        m.add_quadratic(x, 1.0);
        m.objective.offset = 1.69;
        let exact = solve(&m, &SolverConfig::default()).unwrap();
        assert!((exact.primal[0] - 1.3).abs() < 1e-4);
        assert!(exact.objective.abs() < 1e-8);
        assert!(exact.duals.is_none());

        // Integer version is exact at integer tangent points.
        let mut mi = m.clone();
        mi.variables[0].integer = true;
        let r = solve(&mi, &SolverConfig::default()).unwrap();
        assert_eq!(r.primal[0], 1.0);
        assert!((r.objective - 0.09).abs() < 1e-9);

        let lin = linearize_quadratic(&m, 8).unwrap();
        assert_eq!(lin.num_cols(), 2);
        assert_eq!(lin.num_rows(), 9);
        assert!(!lin.has_quadratic());
    }
}
