//! Progressive hedging with dualized expectation constraints.
//!
//! Each iteration solves every scenario subproblem (concurrently), averages the
//! first-stage copies, updates the non-anticipativity weights `w` and the
//! projected expectation multipliers `lambda`, evaluates a Lagrangian lower
//! bound, and on a schedule tries to turn the consensus plan into a feasible
//! incumbent by fixing the first stage and iterating on `lambda` alone.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::builder::{
    build_scenario_subproblem, first_stage_scale, first_stage_unit_cost, Rho, SubproblemMode, SubproblemSpec,
};
use crate::canonical::{fix_variables, relax_integrality, CanonicalModel, Coord, SolveResult, VariableIndex};
use crate::error::{Error, Result};
use crate::model::{enumerate_expectation_constraints, PlanningInstance};
use crate::report::{investment_cost, relative_gap, Method, PlanSolution, ReportStatus, SolveReport, TraceRow};
use crate::solver::{solve, solve_lp_with_duals, SolverConfig};

/// Tolerance on `sum_w pi_w w_w = 0`, relative to the largest weight.
pub const WEIGHT_BALANCE_TOL: f64 = 1e-8;
/// Multiplier change below which fix-and-iterate stops early.
pub const LAMBDA_STABLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaConfig {
    /// Uniform proximal coefficient on MW-scaled coordinates; `None` uses
    /// one tenth of each coordinate's unit fixed cost.
    pub rho: Option<f64>,
    /// Multiplier step size; `None` uses [`DEFAULT_BETA`].
    pub beta: Option<f64>,
    pub initial_multipliers: BTreeMap<String, f64>,
    pub max_iters: usize,
    /// Consensus tolerance on the MW-scaled first stage.
    pub consensus_tol: f64,
    /// Tolerance on the expected slack of active expectation constraints.
    pub slack_tol: f64,
    /// Stop once the relative bound gap drops below this value.
    pub gap_tol: f64,
    /// First scheduled incumbent attempt; later attempts double the iteration.
    pub incumbent_start: usize,
    /// Multiplier iterations run with the first stage fixed.
    pub fix_iters: usize,
    /// Fractional part at or above which integer coordinates round up.
    pub rounding_threshold: f64,
    /// Treat every integer column as continuous.
    pub relax_integrality: bool,
    /// Solve scenarios on the rayon pool.
    pub parallel: bool,
    /// Record wall-clock time in the trace (otherwise zero, for reproducible output).
    pub record_timing: bool,
}

impl Default for PhaConfig {
    fn default() -> Self {
        Self {
            rho: None,
            beta: None,
            initial_multipliers: BTreeMap::new(),
            max_iters: 200,
            consensus_tol: 1e-4,
            slack_tol: 1e-4,
            gap_tol: 1e-3,
            incumbent_start: 5,
            fix_iters: 50,
            rounding_threshold: 0.5,
            relax_integrality: false,
            parallel: true,
            record_timing: false,
        }
    }
}

impl PhaConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("consensus tolerance", self.consensus_tol),
            ("slack tolerance", self.slack_tol),
            ("gap threshold", self.gap_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if let Some(r) = self.rho {
            if !(r > 0.0) {
                return Err(Error::Config(format!("rho must be > 0, got {r}")));
            }
        }
        if let Some(b) = self.beta {
            if !(b > 0.0) {
                return Err(Error::Config(format!("beta must be > 0, got {b}")));
            }
        }
        if self.fix_iters == 0 {
            return Err(Error::Config("fix-and-iterate needs at least one iteration".into()));
        }
        if !(0.0..=1.0).contains(&self.rounding_threshold) {
            return Err(Error::Config("rounding threshold must lie in [0, 1]".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max iterations must be >= 1".into()));
        }
        if let Some((h, v)) = self.initial_multipliers.iter().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::Config(format!(
                "initial multiplier for `{h}` must be >= 0, got {v}"
            )));
        }
        Ok(())
    }

    fn incumbent_due(&self, k: usize) -> bool {
        let mut at = self.incumbent_start.max(1);
        while at < k {
            at *= 2;
        }
        at == k
    }
}

/// Default proximal coefficients: one tenth of the annual fixed cost per MW of
/// each first-stage coordinate, in MW-scaled units (1 per MW^2 when that cost
/// is not positive).
pub fn default_rho(inst: &PlanningInstance, coords: &[Coord]) -> BTreeMap<Coord, f64> {
    coords
        .iter()
        .map(|c| {
            // One tenth of the fixed cost per MW, applied to the MW-scaled
            // coordinate; unit counts pick up the square of their unit size.
            let cost = first_stage_unit_cost(inst, c);
            let scale = first_stage_scale(inst, c);
            (*c, if cost > 0.0 { 0.1 * cost * scale } else { scale * scale })
        })
        .collect()
}

/// Default multiplier step, in $/MWh per annual MWh of expected slack.
pub const DEFAULT_BETA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    GapClosed,
    IterationLimit,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::GapClosed => "gap-closed",
            Termination::IterationLimit => "iteration-limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsRecord {
    pub iteration: usize,
    pub lower: f64,
    /// `None` marks "no feasible incumbent".
    pub upper: Option<f64>,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub consensus: f64,
    pub max_abs_sigma_bar: f64,
    /// Largest slack residual counted for convergence: `|sigma_bar|` where the
    /// multiplier is positive, the positive part elsewhere.
    pub sigma_residual: f64,
    pub lower_bound: f64,
    pub upper_bound: Option<f64>,
    pub weight_imbalance: f64,
    /// Multipliers after this iteration's update, in handle order.
    pub multipliers: Vec<f64>,
    pub sigma_bar: Vec<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaState {
    pub iteration: usize,
    /// First-stage coordinates, in column order of every subproblem.
    pub coords: Vec<Coord>,
    pub probabilities: Vec<f64>,
    pub scenario_x: Vec<Vec<f64>>,
    pub xbar: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
    pub rho: Vec<f64>,
    pub beta: f64,
    pub handles: Vec<String>,
    pub multipliers: Vec<f64>,
    pub sigma_bar: Vec<f64>,
    pub best_lower: Option<f64>,
    pub best_upper: Option<f64>,
    /// Plan behind `best_upper`.
    pub incumbent: Option<PlanSolution>,
    pub history: Vec<IterationRecord>,
    pub bounds: Vec<BoundsRecord>,
    pub termination: Option<Termination>,
}

/// `(sum_w pi_w ||s * (x_w - xbar)||^2)^(1/2)` with `s` the MW per unit of each
/// coordinate.
pub fn consensus_metric(state: &PhaState, inst: &PlanningInstance) -> f64 {
    let scales: Vec<f64> = state.coords.iter().map(|c| first_stage_scale(inst, c)).collect();
    let mut total = 0.0;
    for (x, &p) in state.scenario_x.iter().zip(&state.probabilities) {
        for ((xi, xb), s) in x.iter().zip(&state.xbar).zip(&scales) {
            total += p * (s * (xi - xb)).powi(2);
        }
    }
    total.sqrt()
}

/// Largest `|sum_w pi_w w_w|` component, scaled by the largest weight.
pub fn weight_imbalance(probabilities: &[f64], weights: &[Vec<f64>]) -> f64 {
    let n = weights.first().map_or(0, Vec::len);
    let scale = weights.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    (0..n)
        .map(|i| {
            weights
                .iter()
                .zip(probabilities)
                .map(|(w, p)| p * w[i])
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max)
        / scale
}

struct ScenarioSolve {
    index: VariableIndex,
    model: CanonicalModel,
    result: SolveResult,
}

impl ScenarioSolve {
    fn first_stage(&self, coords: &[Coord]) -> Vec<f64> {
        coords
            .iter()
            .map(|c| self.index.value(&self.result.primal, c))
            .collect()
    }

    fn slacks(&self, n: usize, w: usize) -> Vec<f64> {
        (0..n)
            .map(|c| self.index.value(&self.result.primal, &Coord::Slack { c, w }))
            .collect()
    }

    /// Operating cost of the scenario (unweighted): linear cost of every
    /// second-stage column except the slacks.
    fn operating_cost(&self) -> f64 {
        self.index
            .iter()
            .filter(|(c, _)| !c.is_first_stage() && !matches!(c, Coord::Slack { .. }))
            .map(|(_, col)| self.model.objective.linear[col] * self.result.primal[col])
            .sum()
    }

    /// Proven lower bound on the subproblem optimum.
    fn lower_bound(&self) -> f64 {
        match self.result.dual_bound {
            Some(b) if self.model.is_mip() => b.min(self.result.objective),
            _ => self.result.objective,
        }
    }
}

fn run_scenarios<F>(n: usize, parallel: bool, f: F) -> Result<Vec<ScenarioSolve>>
where
    F: Fn(usize) -> Result<ScenarioSolve> + Sync,
{
    if parallel {
        (0..n).into_par_iter().map(&f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

fn solve_subproblem(
    inst: &PlanningInstance,
    spec: &SubproblemSpec,
    w: usize,
    relax: bool,
    fixed: Option<&BTreeMap<Coord, f64>>,
    solver: &SolverConfig,
) -> Result<ScenarioSolve> {
    let (mut model, index) = build_scenario_subproblem(inst, spec)?;
    if relax {
        model = relax_integrality(&model);
    }
    if let Some(fixed) = fixed {
        let by_col: BTreeMap<usize, f64> = fixed
            .iter()
            .filter_map(|(c, &v)| index.column(c).map(|col| (col, v)))
            .collect();
        model = relax_integrality(&fix_variables(&model, &by_col)?);
    }
    let result = solve(&model, solver)?;
    if !result.status.has_solution() {
        return Err(Error::SubproblemFailed {
            scenario: inst.scenarios[w].id.clone(),
            status: result.status.to_string(),
        });
    }
    Ok(ScenarioSolve { index, model, result })
}

fn multiplier_map(handles: &[String], values: &[f64]) -> BTreeMap<String, f64> {
    handles.iter().cloned().zip(values.iter().copied()).collect()
}

/// First-stage coordinates in subproblem column order.
pub fn first_stage_coords(inst: &PlanningInstance) -> Result<Vec<Coord>> {
    let spec = SubproblemSpec::lagrangian(inst.scenarios[0].id.clone(), BTreeMap::new());
    let (_, index) = build_scenario_subproblem(inst, &spec)?;
    Ok(index.first_stage().into_iter().map(|(c, _)| c).collect())
}

/// Lagrangian lower bound `sum_w pi_w min { C^inv + C^op_w + lambda.sigma_w + w_w.x }`.
/// `weights[w]` maps first-stage coordinates to scenario `w`'s weights (missing = 0).
pub fn lagrangian_lower_bound(
    inst: &PlanningInstance,
    multipliers: &BTreeMap<String, f64>,
    weights: &[BTreeMap<Coord, f64>],
    solver: &SolverConfig,
) -> Result<f64> {
    lagrangian_lower_bound_with(inst, multipliers, weights, solver, false, true)
}

pub fn lagrangian_lower_bound_with(
    inst: &PlanningInstance,
    multipliers: &BTreeMap<String, f64>,
    weights: &[BTreeMap<Coord, f64>],
    solver: &SolverConfig,
    relax: bool,
    parallel: bool,
) -> Result<f64> {
    let probs = inst.probabilities();
    if !weights.is_empty() {
        if weights.len() != probs.len() {
            return Err(Error::Config(format!(
                "expected {} weight maps, got {}",
                probs.len(),
                weights.len()
            )));
        }
        let coords = first_stage_coords(inst)?;
        let dense: Vec<Vec<f64>> = weights
            .iter()
            .map(|m| coords.iter().map(|c| m.get(c).copied().unwrap_or(0.0)).collect())
            .collect();
        let imbalance = weight_imbalance(&probs, &dense);
        if imbalance > WEIGHT_BALANCE_TOL {
            return Err(Error::WeightImbalance(imbalance));
        }
    }
    let solves = run_scenarios(probs.len(), parallel, |w| {
        let spec = SubproblemSpec {
            mode: SubproblemMode::ProgressiveHedging,
            weights: weights.get(w).cloned().unwrap_or_default(),
            ..SubproblemSpec::lagrangian(inst.scenarios[w].id.clone(), multipliers.clone())
        };
        solve_subproblem(inst, &spec, w, relax, None, solver)
    })?;
    Ok(solves.iter().zip(&probs).map(|(s, p)| p * s.lower_bound()).sum())
}

/// Outcome of [`fix_and_iterate_upper_bound`].
#[derive(Debug, Clone, PartialEq)]
pub struct UpperBoundOutcome {
    /// `C^inv + sum_w pi_w C^op_w` of the recovered plan, or `None` when no
    /// expectation-feasible combination of the dispatches was found.
    pub upper: Option<f64>,
    pub plan: Option<PlanSolution>,
    /// Expected slack of the recovered plan (or of the last dispatch when none).
    pub sigma_bar: Vec<f64>,
    pub multipliers: Vec<f64>,
    /// `max |lambda^{k+1} - lambda^k|` per fixed iteration.
    pub multiplier_steps: Vec<f64>,
}

/// Round integer coordinates of `x` by `threshold`, clip to the construction
/// limits and repair mandates (adding units at the lowest-indexed bus with
/// room, removing from the highest-indexed bus for equality mandates).
pub fn repair_candidate(
    inst: &PlanningInstance,
    coords: &[Coord],
    x: &[f64],
    threshold: f64,
    relax: bool,
) -> BTreeMap<Coord, f64> {
    let mut out = BTreeMap::new();
    for (c, &v) in coords.iter().zip(x) {
        let integer = !relax
            && match *c {
                Coord::BuildGen { gen, .. } => inst.gen_techs[gen].is_integer(),
                Coord::BuildLoad { .. } | Coord::BuildLine { .. } => true,
                _ => false,
            };
        let ub = match *c {
            Coord::BuildGen { bus, gen } => inst.gen_build_bound(bus, gen),
            Coord::BuildStorage { bus, storage } => inst.storage_build_bound(bus, storage),
            Coord::BuildLoad { bus, load } => f64::from(inst.load_build_bound(bus, load)),
            Coord::BuildLine { .. } => 1.0,
            _ => unreachable!("first-stage coordinates only"),
        };
        let v = if integer {
            let fl = v.floor();
            if v - fl >= threshold - 1e-12 {
                fl + 1.0
            } else {
                fl
            }
        } else {
            v
        };
        out.insert(*c, v.clamp(0.0, ub.max(0.0)));
    }
    for (d, tech) in inst.load_techs.iter().enumerate() {
        let Some(m) = &tech.mandate else { continue };
        let target = f64::from(m.min_units);
        let total = |out: &BTreeMap<Coord, f64>| -> f64 {
            (0..inst.buses.len())
                .map(|b| out[&Coord::BuildLoad { bus: b, load: d }])
                .sum()
        };
        for b in 0..inst.buses.len() {
            let deficit = target - total(&out);
            if deficit <= 1e-9 {
                break;
            }
            let key = Coord::BuildLoad { bus: b, load: d };
            let room = f64::from(inst.load_build_bound(b, d)) - out[&key];
            *out.get_mut(&key).unwrap() += deficit.min(room.max(0.0));
        }
        if m.equality {
            for b in (0..inst.buses.len()).rev() {
                let excess = total(&out) - target;
                if excess <= 1e-9 {
                    break;
                }
                let key = Coord::BuildLoad { bus: b, load: d };
                let cur = out[&key];
                *out.get_mut(&key).unwrap() = cur - excess.min(cur);
            }
        }
    }
    out
}

/// Check `x` against the first-stage-only constraints (bounds, integrality,
/// mandates).
fn check_candidate(inst: &PlanningInstance, x: &BTreeMap<Coord, f64>, relax: bool) -> Result<()> {
    for (c, &v) in x {
        let ub = match *c {
            Coord::BuildGen { bus, gen } => inst.gen_build_bound(bus, gen),
            Coord::BuildStorage { bus, storage } => inst.storage_build_bound(bus, storage),
            Coord::BuildLoad { bus, load } => f64::from(inst.load_build_bound(bus, load)),
            Coord::BuildLine { .. } => 1.0,
            _ => return Err(Error::InfeasibleCandidate(format!("{c} is not first-stage"))),
        };
        if v < -1e-9 || v > ub + 1e-9 {
            return Err(Error::InfeasibleCandidate(format!("{c} = {v} outside [0, {ub}]")));
        }
        let integer = !relax
            && match *c {
                Coord::BuildGen { gen, .. } => inst.gen_techs[gen].is_integer(),
                Coord::BuildLoad { .. } | Coord::BuildLine { .. } => true,
                _ => false,
            };
        if integer && (v - v.round()).abs() > 1e-6 {
            return Err(Error::InfeasibleCandidate(format!("{c} = {v} is not integral")));
        }
    }
    for (d, tech) in inst.load_techs.iter().enumerate() {
        let Some(m) = &tech.mandate else { continue };
        let total: f64 = (0..inst.buses.len())
            .map(|b| x.get(&Coord::BuildLoad { bus: b, load: d }).copied().unwrap_or(0.0))
            .sum();
        let target = f64::from(m.min_units);
        let ok = if m.equality {
            (total - target).abs() <= 1e-6
        } else {
            total >= target - 1e-6
        };
        if !ok {
            return Err(Error::InfeasibleCandidate(format!(
                "mandate for `{}` needs {} units, plan has {total}",
                tech.id, m.min_units
            )));
        }
    }
    Ok(())
}

/// Fix the first stage to `candidate` and run up to `cfg.fix_iters` rounds of
/// scenario LP solves with multiplier updates. Every round's dispatches are
/// recombined, per scenario, by a small master LP that picks the cheapest
/// convex combination whose expected slacks are all non-positive. While that
/// master is infeasible the multipliers take projected steps starting at
/// `beta` and doubling each round; afterwards they are the master's slack prices (column generation), which
/// settle after finitely many rounds. The master's cost is the upper bound.
pub fn fix_and_iterate_upper_bound(
    inst: &PlanningInstance,
    candidate: &BTreeMap<Coord, f64>,
    multipliers_start: &BTreeMap<String, f64>,
    beta: f64,
    cfg: &PhaConfig,
    solver: &SolverConfig,
) -> Result<UpperBoundOutcome> {
    check_candidate(inst, candidate, cfg.relax_integrality)?;
    let probs = inst.probabilities();
    let specs = enumerate_expectation_constraints(inst);
    let handles: Vec<String> = specs.iter().map(|s| s.handle.clone()).collect();
    let n_c = handles.len();
    let mut lambda: Vec<f64> = handles
        .iter()
        .map(|h| multipliers_start.get(h).copied().unwrap_or(0.0).max(0.0))
        .collect();
    let inv = {
        let mut plan = PlanSolution::new();
        for (c, &v) in candidate {
            plan.set(*c, v);
        }
        investment_cost(inst, &plan)
    };

    // columns[w] = (operating cost, slacks, solve) per round
    let mut columns: Vec<Vec<(f64, Vec<f64>, ScenarioSolve)>> = (0..probs.len()).map(|_| Vec::new()).collect();
    let mut steps = Vec::new();
    let mut weights = None;
    let mut last_sbar = vec![0.0; n_c];
    let mut infeasible_rounds = 0;
    let rounds = if n_c == 0 { 1 } else { cfg.fix_iters };
    for _ in 0..rounds {
        let mults = multiplier_map(&handles, &lambda);
        let solves = run_scenarios(probs.len(), cfg.parallel, |w| {
            let spec = SubproblemSpec::lagrangian(inst.scenarios[w].id.clone(), mults.clone());
            solve_subproblem(inst, &spec, w, cfg.relax_integrality, Some(candidate), solver)
        })?;
        let mut sbar = vec![0.0; n_c];
        for (w, s) in solves.into_iter().enumerate() {
            let sig = s.slacks(n_c, w);
            for (acc, v) in sbar.iter_mut().zip(&sig) {
                *acc += probs[w] * v;
            }
            columns[w].push((s.operating_cost(), sig, s));
        }
        last_sbar = sbar.clone();
        let master = recombine(&probs, &columns, n_c, solver)?;
        // Once the recorded dispatches can be recombined feasibly, price with
        // the master duals; before that, take projected subgradient steps.
        let next: Vec<f64> = match &master {
            Some((_, duals)) => duals.clone(),
            None => {
                let step = beta * f64::powi(2.0, infeasible_rounds);
                infeasible_rounds += 1;
                lambda.iter().zip(&sbar).map(|(l, s)| (l + step * s).max(0.0)).collect()
            }
        };
        let step = lambda.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        steps.push(step);
        lambda = next;
        let feasible = master.is_some();
        weights = master.map(|(mu, _)| mu);
        if feasible && step <= LAMBDA_STABLE_TOL {
            break;
        }
    }

    let Some(weights) = weights else {
        return Ok(UpperBoundOutcome {
            upper: None,
            plan: None,
            sigma_bar: last_sbar,
            multipliers: lambda,
            multiplier_steps: steps,
        });
    };

    let mut plan = PlanSolution::new();
    for (c, &v) in candidate {
        plan.set(*c, v);
    }
    let mut op = 0.0;
    let mut sbar = vec![0.0; n_c];
    for (w, (cols, mu)) in columns.iter().zip(&weights).enumerate() {
        let mut combined: BTreeMap<Coord, f64> = BTreeMap::new();
        for ((cost, sig, s), &m) in cols.iter().zip(mu) {
            if m == 0.0 {
                continue;
            }
            op += probs[w] * m * cost;
            for (acc, v) in sbar.iter_mut().zip(sig) {
                *acc += probs[w] * m * v;
            }
            for (coord, col) in s.index.iter() {
                if !coord.is_first_stage() && !matches!(coord, Coord::Slack { .. }) {
                    *combined.entry(coord).or_insert(0.0) += m * s.result.primal[col];
                }
            }
        }
        for (c, v) in combined {
            plan.set(c, v);
        }
    }
    Ok(UpperBoundOutcome {
        upper: Some(inv + op),
        plan: Some(plan),
        sigma_bar: sbar,
        multipliers: lambda,
        multiplier_steps: steps,
    })
}

/// Per-scenario convex weights over the recorded dispatches minimizing
/// expected operating cost subject to every expected slack being `<= 0`,
/// together with the (non-negative) prices of those slack rows. Returns `None`
/// when no such combination exists.
#[allow(clippy::type_complexity)]
fn recombine(
    probs: &[f64],
    columns: &[Vec<(f64, Vec<f64>, ScenarioSolve)>],
    n_c: usize,
    solver: &SolverConfig,
) -> Result<Option<(Vec<Vec<f64>>, Vec<f64>)>> {
    use crate::canonical::{RowSense, SolveStatus};
    if n_c == 0 {
        // Single round, nothing to recombine.
        return Ok(Some((columns.iter().map(|c| vec![1.0; c.len()]).collect(), Vec::new())));
    }
    let mut m = CanonicalModel::new();
    let mut ids: Vec<Vec<usize>> = Vec::new();
    for (w, cols) in columns.iter().enumerate() {
        let v: Vec<usize> = cols
            .iter()
            .enumerate()
            .map(|(k, (cost, _, _))| m.add_variable(format!("mu({w},{k})"), 0.0, 1.0, false, probs[w] * cost))
            .collect();
        m.add_constraint(format!("convex({w})"), v.iter().map(|&j| (j, 1.0)), RowSense::Eq, 1.0);
        ids.push(v);
    }
    for c in 0..n_c {
        let coeffs: Vec<(usize, f64)> = columns
            .iter()
            .zip(&ids)
            .enumerate()
            .flat_map(|(w, (cols, v))| cols.iter().zip(v).map(move |((_, sig, _), &j)| (j, probs[w] * sig[c])))
            .collect();
        m.add_constraint(format!("slack({c})"), coeffs, RowSense::Le, 0.0);
    }
    let r = solve_lp_with_duals(&m, solver)?;
    match r.status {
        SolveStatus::Optimal => {
            let mu = ids
                .iter()
                .map(|v| v.iter().map(|&j| r.primal[j].max(0.0)).collect())
                .collect();
            let duals = r.duals.as_deref().unwrap_or(&[]);
            let n_w = columns.len();
            let prices = (0..n_c)
                .map(|c| duals.get(n_w + c).map_or(0.0, |y| (-y).max(0.0)))
                .collect();
            Ok(Some((mu, prices)))
        }
        SolveStatus::Infeasible => Ok(None),
        other => Err(Error::BackendFailure {
            message: format!("recombination LP ended with status {other}"),
            diagnostics: String::new(),
        }),
    }
}

/// Run the decomposition. The report carries the best incumbent found (if
/// any), both bounds, and the full per-iteration trace; its status is never
/// [`ReportStatus::Optimal`].
pub fn run_pha(inst: &PlanningInstance, cfg: &PhaConfig, solver: &SolverConfig) -> Result<(SolveReport, PhaState)> {
    cfg.validate()?;
    solver.validate()?;
    let start = Instant::now();
    let probs = inst.probabilities();
    let n_w = probs.len();
    let coords = first_stage_coords(inst)?;
    let specs = enumerate_expectation_constraints(inst);
    let handles: Vec<String> = specs.iter().map(|s| s.handle.clone()).collect();
    for h in cfg.initial_multipliers.keys() {
        if !handles.contains(h) {
            return Err(Error::UnknownHandle(h.clone()));
        }
    }
    let n_c = handles.len();
    let rho_map: BTreeMap<Coord, f64> = match cfg.rho {
        Some(r) => coords
            .iter()
            .map(|c| (*c, Rho::Uniform(r).for_coord(inst, c).unwrap()))
            .collect(),
        None => default_rho(inst, &coords),
    };
    let rho: Vec<f64> = coords.iter().map(|c| rho_map[c]).collect();
    let beta = cfg.beta.unwrap_or(DEFAULT_BETA);
    let mut state = PhaState {
        iteration: 0,
        coords: coords.clone(),
        probabilities: probs.clone(),
        scenario_x: vec![vec![0.0; coords.len()]; n_w],
        xbar: vec![0.0; coords.len()],
        weights: vec![vec![0.0; coords.len()]; n_w],
        rho,
        beta,
        handles: handles.clone(),
        multipliers: handles
            .iter()
            .map(|h| cfg.initial_multipliers.get(h).copied().unwrap_or(0.0))
            .collect(),
        sigma_bar: vec![0.0; n_c],
        best_lower: None,
        best_upper: None,
        incumbent: None,
        history: Vec::new(),
        bounds: Vec::new(),
        termination: None,
    };
    let mut best_plan: Option<(PlanSolution, Vec<f64>)> = None;
    let rho_spec = Rho::PerCoordinate(rho_map);

    for k in 1..=cfg.max_iters {
        state.iteration = k;
        let mults = multiplier_map(&handles, &state.multipliers);
        let weights: Vec<BTreeMap<Coord, f64>> = state
            .weights
            .iter()
            .map(|w| coords.iter().copied().zip(w.iter().copied()).collect())
            .collect();
        let anchor: BTreeMap<Coord, f64> = coords.iter().copied().zip(state.xbar.iter().copied()).collect();
        let solves = run_scenarios(n_w, cfg.parallel, |w| {
            let spec = SubproblemSpec {
                scenario: inst.scenarios[w].id.clone(),
                mode: SubproblemMode::ProgressiveHedging,
                multipliers: mults.clone(),
                weights: weights[w].clone(),
                anchor: if k == 1 { BTreeMap::new() } else { anchor.clone() },
                rho: rho_spec.clone(),
            };
            solve_subproblem(inst, &spec, w, cfg.relax_integrality, None, solver)
        })?;

        // Lower bound from the multipliers and weights used in this round; the
        // first round has no proximal term, so its solves already are the bound.
        let lower = if k == 1 {
            solves.iter().zip(&probs).map(|(s, p)| p * s.lower_bound()).sum()
        } else {
            lagrangian_lower_bound_with(inst, &mults, &weights, solver, cfg.relax_integrality, cfg.parallel)?
        };
        state.best_lower = Some(state.best_lower.map_or(lower, |b: f64| b.max(lower)));

        for (w, s) in solves.iter().enumerate() {
            state.scenario_x[w] = s.first_stage(&coords);
        }
        for i in 0..coords.len() {
            state.xbar[i] = (0..n_w).map(|w| probs[w] * state.scenario_x[w][i]).sum();
        }
        for w in 0..n_w {
            for i in 0..coords.len() {
                state.weights[w][i] += state.rho[i] * (state.scenario_x[w][i] - state.xbar[i]);
            }
        }
        let imbalance = weight_imbalance(&probs, &state.weights);
        if imbalance > WEIGHT_BALANCE_TOL {
            return Err(Error::WeightImbalance(imbalance));
        }
        let mut sbar = vec![0.0; n_c];
        for (w, s) in solves.iter().enumerate() {
            for (acc, v) in sbar.iter_mut().zip(s.slacks(n_c, w)) {
                *acc += probs[w] * v;
            }
        }
        for (l, s) in state.multipliers.iter_mut().zip(&sbar) {
            *l = (*l + beta * s).max(0.0);
        }
        state.sigma_bar = sbar;
        let consensus = consensus_metric(&state, inst);
        let residual = state
            .sigma_bar
            .iter()
            .zip(&state.multipliers)
            .map(|(&s, &l)| if l > 0.0 { s.abs() } else { s.max(0.0) })
            .fold(0.0, f64::max);
        let converged = consensus < cfg.consensus_tol && residual < cfg.slack_tol;
        let gap_now = |st: &PhaState| match (st.best_lower, st.best_upper) {
            (Some(l), Some(u)) => Some(relative_gap(l, u)),
            _ => None,
        };
        let last = k == cfg.max_iters;
        let gap_closed = gap_now(&state).is_some_and(|g| g < cfg.gap_tol);
        if cfg.incumbent_due(k) || last || converged || gap_closed {
            let candidate = repair_candidate(
                inst,
                &coords,
                &state.xbar,
                cfg.rounding_threshold,
                cfg.relax_integrality,
            );
            let mults = multiplier_map(&handles, &state.multipliers);
            let ub = fix_and_iterate_upper_bound(inst, &candidate, &mults, beta, cfg, solver)?;
            if let (Some(u), Some(plan)) = (ub.upper, ub.plan) {
                if state.best_upper.is_none_or(|b| u < b) {
                    state.best_upper = Some(u);
                    best_plan = Some((plan, ub.sigma_bar));
                }
            }
        }
        let gap = gap_now(&state);
        state.bounds.push(BoundsRecord {
            iteration: k,
            lower: state.best_lower.unwrap(),
            upper: state.best_upper,
            gap,
        });
        state.history.push(IterationRecord {
            iteration: k,
            consensus,
            max_abs_sigma_bar: state.sigma_bar.iter().fold(0.0, |m, s| m.max(s.abs())),
            sigma_residual: residual,
            lower_bound: state.best_lower.unwrap(),
            upper_bound: state.best_upper,
            weight_imbalance: imbalance,
            multipliers: state.multipliers.clone(),
            sigma_bar: state.sigma_bar.clone(),
            wall_time_s: if cfg.record_timing {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
        });
        if converged {
            state.termination = Some(Termination::Converged);
            break;
        }
        if gap.is_some_and(|g| g < cfg.gap_tol) {
            state.termination = Some(Termination::GapClosed);
            break;
        }
        if last {
            state.termination = Some(Termination::IterationLimit);
        }
    }

    let termination = state.termination.unwrap_or(Termination::IterationLimit);
    let trace: Vec<TraceRow> = state
        .history
        .iter()
        .map(|h| TraceRow {
            iteration: h.iteration,
            consensus_metric: h.consensus,
            max_abs_sigma_bar: h.max_abs_sigma_bar,
            lower_bound: Some(h.lower_bound),
            upper_bound: h.upper_bound,
            wall_time_s: h.wall_time_s,
        })
        .collect();
    state.incumbent = best_plan.as_ref().map(|(p, _)| p.clone());
    let mut report = match best_plan {
        Some((plan, _)) => SolveReport::empty(inst, Method::Pha, ReportStatus::Incumbent, termination.to_string())
            .with_plan(inst, &plan),
        None => SolveReport::empty(
            inst,
            Method::Pha,
            ReportStatus::NoFeasibleIncumbent,
            termination.to_string(),
        ),
    };
    report.objective = state.best_upper;
    report.lower_bound = state.best_lower;
    report.upper_bound = state.best_upper;
    report.gap = state.bounds.last().and_then(|b| b.gap);
    if report.sigma_bar.is_empty() {
        report.sigma_bar = handles.iter().cloned().zip(state.sigma_bar.iter().copied()).collect();
    }
    report.trace = trace;
    Ok((report, state))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incumbent_schedule_doubles() {
        let cfg = PhaConfig::default();
        let due: Vec<usize> = (1..=100).filter(|&k| cfg.incumbent_due(k)).collect();
        assert_eq!(due, vec![5, 10, 20, 40, 80]);
    }

    #[test]
    fn consensus_of_two_points() {
        let inst = crate::model::tests::small_instance(crate::model::TierSpec::inflexible());
        let coord = Coord::BuildStorage { bus: 0, storage: 0 };
        let state = PhaState {
            iteration: 1,
            coords: vec![coord],
            probabilities: vec![0.5, 0.5],
            scenario_x: vec![vec![0.0], vec![2.0]],
            xbar: vec![1.0],
            weights: vec![vec![0.0], vec![0.0]],
            rho: vec![1.0],
            beta: 1.0,
            handles: vec![],
            multipliers: vec![],
            sigma_bar: vec![],
            best_lower: None,
            best_upper: None,
            incumbent: None,
            history: vec![],
            bounds: vec![],
            termination: None,
        };
        assert!((consensus_metric(&state, &inst) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weight_imbalance_detects_drift() {
        let p = [0.5, 0.5];
        assert_eq!(weight_imbalance(&p, &[vec![1.0], vec![-1.0]]), 0.0);
        assert!(weight_imbalance(&p, &[vec![1.0], vec![-0.5]]) > 0.1);
    }

    #[test]
    fn config_rejects_bad_values() {
        let cfg = PhaConfig {
            fix_iters: 0,
            ..PhaConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = PhaConfig {
            slack_tol: 0.0,
            ..PhaConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
