//! Translation of a [`PlanningInstance`] into the extensive-form MILP and into
//! per-scenario Lagrangian / progressive-hedging subproblems.
//!
//! Conventions shared by every builder:
//! * investment columns are bounded by the construction limits;
//! * large-load tier `k` is capped at `(u_k - u_{k-1}) * unit_size * xD`;
//! * tier reliability reads `sum_w pi_w sum_t tau pDK >= phi_k * width_k * unit_size * tau * |T| * xD`;
//! * storage wraps cyclically, `level(0) = level(T-1) + tau (eta_ch ch(0) - dch(0))`;
//! * candidate lines use big-M rows with `M = |b| * angle_spread` and angles boxed
//!   to `+-angle_spread / 2`; the reference bus angle is fixed to zero;
//! * every expectation constraint is stored in `f.x + h.y >= e` form.

use std::collections::BTreeMap;

use crate::canonical::{CanonicalModel, Coord, RowSense, VariableIndex};
use crate::error::{Error, Result};
use crate::model::{
    enumerate_expectation_constraints, validate_instance, ExpectationConstraintSpec, ExpectationKind, PlanningInstance,
};

/// Linear form of one expectation constraint for one scenario:
/// `first_stage . x + second_stage . y_w >= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationRow {
    pub first_stage: Vec<(Coord, f64)>,
    pub second_stage: Vec<(Coord, f64)>,
    pub rhs: f64,
}

/// Coefficients of constraint `spec` in scenario `w` (unweighted by probability).
pub fn expectation_row(inst: &PlanningInstance, spec: &ExpectationConstraintSpec, w: usize) -> ExpectationRow {
    let tau = inst.period_length_h;
    let periods = inst.periods();
    match spec.kind {
        ExpectationKind::TierReliability { bus, load, tier } => {
            // Annual MWh, like the objective and the output policies, so that
            // one multiplier step size suits every expectation row.
            let tech = &inst.load_techs[load];
            let scale = inst.annualization_days * tau;
            let required =
                tech.tiers.reliabilities[tier] * tech.tiers.width(tier) * tech.unit_size_mw * scale * periods as f64;
            let second_stage = (0..periods)
                .map(|t| (Coord::LoadTier { bus, load, tier, t, w }, scale))
                .collect();
            ExpectationRow {
                first_stage: vec![(Coord::BuildLoad { bus, load }, -required)],
                second_stage,
                rhs: 0.0,
            }
        }
        ExpectationKind::ExpectedOutput { policy } => {
            // sum pi (q.pG + r.pD) <= E, negated into >= form.
            let pol = &inst.policies[policy];
            let scale = inst.annualization_days * tau;
            let mut second_stage = Vec::new();
            for b in 0..inst.buses.len() {
                for t in 0..periods {
                    for (g, tech) in inst.gen_techs.iter().enumerate() {
                        if let Some(&q) = pol.gen_coefficients.get(&tech.id) {
                            if q != 0.0 {
                                second_stage.push((Coord::Gen { bus: b, gen: g, t, w }, -scale * q));
                            }
                        }
                    }
                    for (d, tech) in inst.load_techs.iter().enumerate() {
                        if let Some(&r) = pol.load_coefficients.get(&tech.id) {
                            if r != 0.0 {
                                for k in 0..tech.tiers.len() {
                                    second_stage.push((
                                        Coord::LoadTier {
                                            bus: b,
                                            load: d,
                                            tier: k,
                                            t,
                                            w,
                                        },
                                        -scale * r,
                                    ));
                                }
                            }
                        }
                    }
                }
            }
            ExpectationRow {
                first_stage: Vec::new(),
                second_stage,
                rhs: -pol.threshold,
            }
        }
    }
}

/// MW represented by one unit of a first-stage coordinate; used to put
/// unit-count and MW coordinates on a common footing.
pub fn first_stage_scale(inst: &PlanningInstance, coord: &Coord) -> f64 {
    match *coord {
        Coord::BuildGen { gen, .. } => inst.gen_techs[gen].unit_mw(),
        Coord::BuildStorage { .. } => 1.0,
        Coord::BuildLoad { load, .. } => inst.load_techs[load].unit_size_mw,
        Coord::BuildLine { branch } => inst.branches[branch].capacity_mw,
        _ => panic!("{coord} is not a first-stage coordinate"),
    }
}

/// Annual fixed cost of one unit of a first-stage coordinate.
pub fn first_stage_unit_cost(inst: &PlanningInstance, coord: &Coord) -> f64 {
    match *coord {
        Coord::BuildGen { gen, .. } => {
            let g = &inst.gen_techs[gen];
            g.fixed_cost * g.unit_mw()
        }
        Coord::BuildStorage { storage, .. } => inst.storage_techs[storage].fixed_cost,
        Coord::BuildLoad { load, .. } => inst.load_techs[load].fixed_cost,
        Coord::BuildLine { branch } => inst.branches[branch].fixed_cost,
        _ => panic!("{coord} is not a first-stage coordinate"),
    }
}

fn check_buildable(inst: &PlanningInstance) -> Result<()> {
    if let Some(tech) = inst.negative_cost_load() {
        return Err(Error::NegativeCostWithoutEqualityMandate(tech.id.clone()));
    }
    let violations = validate_instance(inst);
    if !violations.is_empty() {
        return Err(Error::InvalidInstance(violations));
    }
    Ok(())
}

struct Builder<'a> {
    inst: &'a PlanningInstance,
    model: CanonicalModel,
    index: VariableIndex,
}

impl<'a> Builder<'a> {
    fn new(inst: &'a PlanningInstance) -> Self {
        Self {
            inst,
            model: CanonicalModel::new(),
            index: VariableIndex::new(),
        }
    }

    fn var(&mut self, coord: Coord, lower: f64, upper: f64, integer: bool, cost: f64) -> usize {
        let col = self.model.add_variable(coord.to_string(), lower, upper, integer, cost);
        self.index.insert(coord, col);
        col
    }

    fn col(&self, coord: Coord) -> usize {
        self.index
            .column(&coord)
            .unwrap_or_else(|| panic!("missing column {coord}"))
    }

    fn row(&mut self, name: String, coeffs: Vec<(Coord, f64)>, sense: RowSense, rhs: f64) {
        let coeffs: Vec<(usize, f64)> = coeffs.into_iter().map(|(c, a)| (self.col(c), a)).collect();
        self.model.add_constraint(name, coeffs, sense, rhs);
    }

    /// Investment columns with their annual fixed cost, plus mandate rows.
    fn first_stage(&mut self) {
        let inst = self.inst;
        for b in 0..inst.buses.len() {
            for (g, tech) in inst.gen_techs.iter().enumerate() {
                let ub = inst.gen_build_bound(b, g);
                self.var(
                    Coord::BuildGen { bus: b, gen: g },
                    0.0,
                    ub,
                    tech.is_integer(),
                    tech.fixed_cost * tech.unit_mw(),
                );
            }
            for (s, tech) in inst.storage_techs.iter().enumerate() {
                let ub = inst.storage_build_bound(b, s);
                self.var(
                    Coord::BuildStorage { bus: b, storage: s },
                    0.0,
                    ub,
                    false,
                    tech.fixed_cost,
                );
            }
            for (d, tech) in inst.load_techs.iter().enumerate() {
                let ub = f64::from(inst.load_build_bound(b, d));
                self.var(Coord::BuildLoad { bus: b, load: d }, 0.0, ub, true, tech.fixed_cost);
            }
        }
        for (l, br) in inst.branches.iter().enumerate() {
            if br.is_candidate() {
                self.var(Coord::BuildLine { branch: l }, 0.0, 1.0, true, br.fixed_cost);
            }
        }
        for (d, tech) in inst.load_techs.iter().enumerate() {
            if let Some(m) = &tech.mandate {
                let coeffs = (0..inst.buses.len())
                    .map(|b| (Coord::BuildLoad { bus: b, load: d }, 1.0))
                    .collect();
                let sense = if m.equality { RowSense::Eq } else { RowSense::Ge };
                self.row(format!("mandate({d})"), coeffs, sense, f64::from(m.min_units));
            }
        }
    }

    /// Operational columns and rows of scenario `w`; operating costs are
    /// multiplied by `weight * days * tau`.
    fn second_stage(&mut self, w: usize, weight: f64) {
        let inst = self.inst;
        let sc = &inst.scenarios[w];
        let tau = inst.period_length_h;
        let cost_scale = weight * inst.annualization_days * tau;
        let periods = inst.periods();
        let half_spread = inst.big_m_angle_spread / 2.0;
        let reference = inst.reference_bus();

        for t in 0..periods {
            for b in 0..inst.buses.len() {
                for (g, tech) in inst.gen_techs.iter().enumerate() {
                    self.var(
                        Coord::Gen { bus: b, gen: g, t, w },
                        0.0,
                        f64::INFINITY,
                        false,
                        cost_scale * tech.variable_cost,
                    );
                }
                for (s, tech) in inst.storage_techs.iter().enumerate() {
                    self.var(
                        Coord::StorageLevel {
                            bus: b,
                            storage: s,
                            t,
                            w,
                        },
                        0.0,
                        f64::INFINITY,
                        false,
                        0.0,
                    );
                    self.var(
                        Coord::Charge {
                            bus: b,
                            storage: s,
                            t,
                            w,
                        },
                        0.0,
                        f64::INFINITY,
                        false,
                        0.0,
                    );
                    self.var(
                        Coord::Discharge {
                            bus: b,
                            storage: s,
                            t,
                            w,
                        },
                        0.0,
                        f64::INFINITY,
                        false,
                        cost_scale * tech.variable_cost,
                    );
                }
                for (d, tech) in inst.load_techs.iter().enumerate() {
                    for k in 0..tech.tiers.len() {
                        self.var(
                            Coord::LoadTier {
                                bus: b,
                                load: d,
                                tier: k,
                                t,
                                w,
                            },
                            0.0,
                            f64::INFINITY,
                            false,
                            cost_scale * tech.variable_cost,
                        );
                    }
                }
                self.var(
                    Coord::Shed { bus: b, t, w },
                    0.0,
                    sc.demand[b][t],
                    false,
                    cost_scale * inst.shed_cost,
                );
            }
            for (l, br) in inst.branches.iter().enumerate() {
                self.var(
                    Coord::Flow { branch: l, t, w },
                    -br.capacity_mw,
                    br.capacity_mw,
                    false,
                    0.0,
                );
            }
            for b in 0..inst.buses.len() {
                let (lo, hi) = if b == reference {
                    (0.0, 0.0)
                } else {
                    (-half_spread, half_spread)
                };
                self.var(Coord::Angle { bus: b, t, w }, lo, hi, false, 0.0);
            }
        }

        for t in 0..periods {
            for (b, bus) in inst.buses.iter().enumerate() {
                for (g, tech) in inst.gen_techs.iter().enumerate() {
                    let alpha = sc.availability[b][g][t];
                    self.row(
                        format!("avail({b},{g},{t},{w})"),
                        vec![
                            (Coord::Gen { bus: b, gen: g, t, w }, 1.0),
                            (Coord::BuildGen { bus: b, gen: g }, -alpha * tech.unit_mw()),
                        ],
                        RowSense::Le,
                        alpha * bus.existing_gen(&tech.id),
                    );
                }
                for (s, tech) in inst.storage_techs.iter().enumerate() {
                    let existing = bus.existing_storage(&tech.id);
                    let build = Coord::BuildStorage { bus: b, storage: s };
                    self.row(
                        format!("chcap({b},{s},{t},{w})"),
                        vec![
                            (
                                Coord::Charge {
                                    bus: b,
                                    storage: s,
                                    t,
                                    w,
                                },
                                1.0,
                            ),
                            (build, -1.0),
                        ],
                        RowSense::Le,
                        existing,
                    );
                    self.row(
                        format!("dchcap({b},{s},{t},{w})"),
                        vec![
                            (
                                Coord::Discharge {
                                    bus: b,
                                    storage: s,
                                    t,
                                    w,
                                },
                                1.0,
                            ),
                            (build, -1.0),
                        ],
                        RowSense::Le,
                        existing,
                    );
                    self.row(
                        format!("ecap({b},{s},{t},{w})"),
                        vec![
                            (
                                Coord::StorageLevel {
                                    bus: b,
                                    storage: s,
                                    t,
                                    w,
                                },
                                1.0,
                            ),
                            (build, -tech.duration_h),
                        ],
                        RowSense::Le,
                        tech.duration_h * existing,
                    );
                    let prev = if t == 0 { periods - 1 } else { t - 1 };
                    self.row(
                        format!("stdyn({b},{s},{t},{w})"),
                        vec![
                            (
                                Coord::StorageLevel {
                                    bus: b,
                                    storage: s,
                                    t,
                                    w,
                                },
                                1.0,
                            ),
                            (
                                Coord::StorageLevel {
                                    bus: b,
                                    storage: s,
                                    t: prev,
                                    w,
                                },
                                -1.0,
                            ),
                            (
                                Coord::Charge {
                                    bus: b,
                                    storage: s,
                                    t,
                                    w,
                                },
                                -tau * tech.eff_charge,
                            ),
                            (
                                Coord::Discharge {
                                    bus: b,
                                    storage: s,
                                    t,
                                    w,
                                },
                                tau,
                            ),
                        ],
                        RowSense::Eq,
                        0.0,
                    );
                }
                for (d, tech) in inst.load_techs.iter().enumerate() {
                    for k in 0..tech.tiers.len() {
                        self.row(
                            format!("tcap({b},{d},{k},{t},{w})"),
                            vec![
                                (
                                    Coord::LoadTier {
                                        bus: b,
                                        load: d,
                                        tier: k,
                                        t,
                                        w,
                                    },
                                    1.0,
                                ),
                                (
                                    Coord::BuildLoad { bus: b, load: d },
                                    -tech.tiers.width(k) * tech.unit_size_mw,
                                ),
                            ],
                            RowSense::Le,
                            0.0,
                        );
                    }
                }
            }

            for (l, br) in inst.branches.iter().enumerate() {
                let (o, dest) = inst.branch_ends(l);
                let coupling = vec![
                    (Coord::Flow { branch: l, t, w }, 1.0),
                    (Coord::Angle { bus: o, t, w }, -br.susceptance),
                    (Coord::Angle { bus: dest, t, w }, br.susceptance),
                ];
                if br.is_candidate() {
                    let big_m = br.susceptance.abs() * inst.big_m_angle_spread;
                    let build = Coord::BuildLine { branch: l };
                    let mut up = coupling.clone();
                    up.push((build, big_m));
                    self.row(format!("bigm_up({l},{t},{w})"), up, RowSense::Le, big_m);
                    let mut lo = coupling;
                    lo.push((build, -big_m));
                    self.row(format!("bigm_lo({l},{t},{w})"), lo, RowSense::Ge, -big_m);
                    self.row(
                        format!("fcap_up({l},{t},{w})"),
                        vec![(Coord::Flow { branch: l, t, w }, 1.0), (build, -br.capacity_mw)],
                        RowSense::Le,
                        0.0,
                    );
                    self.row(
                        format!("fcap_lo({l},{t},{w})"),
                        vec![(Coord::Flow { branch: l, t, w }, 1.0), (build, br.capacity_mw)],
                        RowSense::Ge,
                        0.0,
                    );
                } else {
                    self.row(format!("flow({l},{t},{w})"), coupling, RowSense::Eq, 0.0);
                }
            }

            for b in 0..inst.buses.len() {
                let mut coeffs = Vec::new();
                for g in 0..inst.gen_techs.len() {
                    coeffs.push((Coord::Gen { bus: b, gen: g, t, w }, 1.0));
                }
                for (s, tech) in inst.storage_techs.iter().enumerate() {
                    coeffs.push((
                        Coord::Discharge {
                            bus: b,
                            storage: s,
                            t,
                            w,
                        },
                        tech.eff_discharge,
                    ));
                    coeffs.push((
                        Coord::Charge {
                            bus: b,
                            storage: s,
                            t,
                            w,
                        },
                        -1.0,
                    ));
                }
                for l in 0..inst.branches.len() {
                    let (o, dest) = inst.branch_ends(l);
                    if o == b {
                        coeffs.push((Coord::Flow { branch: l, t, w }, -1.0));
                    }
                    if dest == b {
                        coeffs.push((Coord::Flow { branch: l, t, w }, 1.0));
                    }
                }
                coeffs.push((Coord::Shed { bus: b, t, w }, 1.0));
                for (d, tech) in inst.load_techs.iter().enumerate() {
                    for k in 0..tech.tiers.len() {
                        coeffs.push((
                            Coord::LoadTier {
                                bus: b,
                                load: d,
                                tier: k,
                                t,
                                w,
                            },
                            -1.0,
                        ));
                    }
                }
                self.row(format!("bal({b},{t},{w})"), coeffs, RowSense::Eq, sc.demand[b][t]);
            }
        }
    }
}

/// Options for the extensive form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EfOptions {
    /// Include the tier-reliability and expected-output rows.
    pub expectation_constraints: bool,
}

impl Default for EfOptions {
    fn default() -> Self {
        Self {
            expectation_constraints: true,
        }
    }
}

/// The extensive-form MILP over all scenarios.
pub fn build_extensive_form(inst: &PlanningInstance) -> Result<(CanonicalModel, VariableIndex)> {
    build_extensive_form_with(inst, EfOptions::default())
}

pub fn build_extensive_form_with(inst: &PlanningInstance, opts: EfOptions) -> Result<(CanonicalModel, VariableIndex)> {
    check_buildable(inst)?;
    let probs = inst.probabilities();
    let mut bld = Builder::new(inst);
    bld.first_stage();
    for (w, &p) in probs.iter().enumerate() {
        bld.second_stage(w, p);
    }
    if opts.expectation_constraints {
        for (c, spec) in enumerate_expectation_constraints(inst).iter().enumerate() {
            let mut coeffs = Vec::new();
            let mut rhs = 0.0;
            for (w, &p) in probs.iter().enumerate() {
                let row = expectation_row(inst, spec, w);
                coeffs.extend(row.second_stage.iter().map(|&(c, a)| (c, p * a)));
                if w == 0 {
                    coeffs.extend(row.first_stage.iter().copied());
                    rhs = row.rhs;
                }
            }
            bld.row(format!("exp({c})"), coeffs, RowSense::Ge, rhs);
        }
    }
    Ok((bld.model, bld.index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubproblemMode {
    /// Scenario slice of the extensive form: no slacks, no multipliers.
    EfSlice,
    /// Lagrangian relaxation: slack columns priced by the multipliers.
    Lagrangian,
    /// Lagrangian plus non-anticipativity weights and proximal term.
    ProgressiveHedging,
}

/// Proximal coefficient: a single value applied to MW-scaled first-stage
/// coordinates, or explicit per-coordinate values on raw coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Rho {
    Uniform(f64),
    PerCoordinate(BTreeMap<Coord, f64>),
}

impl Rho {
    /// Effective coefficient on the raw coordinate.
    pub fn for_coord(&self, inst: &PlanningInstance, coord: &Coord) -> Option<f64> {
        match self {
            Rho::Uniform(r) => {
                let s = first_stage_scale(inst, coord);
                Some(r * s * s)
            }
            Rho::PerCoordinate(map) => map.get(coord).copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSpec {
    pub scenario: String,
    pub mode: SubproblemMode,
    /// Multiplier per expectation-constraint handle (missing = 0).
    pub multipliers: BTreeMap<String, f64>,
    /// Linear non-anticipativity weights per first-stage coordinate.
    pub weights: BTreeMap<Coord, f64>,
    /// Proximal anchor per first-stage coordinate.
    pub anchor: BTreeMap<Coord, f64>,
    pub rho: Rho,
}

impl SubproblemSpec {
    pub fn lagrangian(scenario: impl Into<String>, multipliers: BTreeMap<String, f64>) -> Self {
        Self {
            scenario: scenario.into(),
            mode: SubproblemMode::Lagrangian,
            multipliers,
            weights: BTreeMap::new(),
            anchor: BTreeMap::new(),
            rho: Rho::Uniform(1.0),
        }
    }

    fn check(&self, inst: &PlanningInstance, specs: &[ExpectationConstraintSpec]) -> Result<usize> {
        let w = inst
            .scenario_index(&self.scenario)
            .ok_or_else(|| Error::UnknownScenario(self.scenario.clone()))?;
        for (handle, &lam) in &self.multipliers {
            if !specs.iter().any(|s| &s.handle == handle) {
                return Err(Error::UnknownHandle(handle.clone()));
            }
            if !(lam >= 0.0) {
                return Err(Error::InvalidSubproblem(format!(
                    "multiplier for `{handle}` must be >= 0, got {lam}"
                )));
            }
        }
        for coord in self.weights.keys().chain(self.anchor.keys()) {
            if !coord.is_first_stage() {
                return Err(Error::InvalidSubproblem(format!("{coord} is not first-stage")));
            }
        }
        if self.mode == SubproblemMode::ProgressiveHedging {
            let ok = match &self.rho {
                Rho::Uniform(r) => *r > 0.0,
                Rho::PerCoordinate(m) => m.values().all(|&r| r > 0.0),
            };
            if !ok {
                return Err(Error::InvalidSubproblem("rho must be > 0".into()));
            }
        }
        Ok(w)
    }
}

/// One scenario's subproblem: a full copy of the first stage, the scenario's
/// operations with unweighted costs, and (outside EF-slice mode) one free slack
/// column per expectation constraint, defined by `sigma = e - (f.x + h.y)`.
pub fn build_scenario_subproblem(
    inst: &PlanningInstance,
    spec: &SubproblemSpec,
) -> Result<(CanonicalModel, VariableIndex)> {
    check_buildable(inst)?;
    let constraints = enumerate_expectation_constraints(inst);
    let w = spec.check(inst, &constraints)?;
    let mut bld = Builder::new(inst);
    bld.first_stage();
    bld.second_stage(w, 1.0);
    if spec.mode != SubproblemMode::EfSlice {
        for (c, ec) in constraints.iter().enumerate() {
            let lam = spec.multipliers.get(&ec.handle).copied().unwrap_or(0.0);
            bld.var(Coord::Slack { c, w }, f64::NEG_INFINITY, f64::INFINITY, false, lam);
            let row = expectation_row(inst, ec, w);
            let mut coeffs = vec![(Coord::Slack { c, w }, 1.0)];
            coeffs.extend(row.first_stage);
            coeffs.extend(row.second_stage);
            bld.row(format!("sdef({c},{w})"), coeffs, RowSense::Eq, row.rhs);
        }
    }
    if spec.mode == SubproblemMode::ProgressiveHedging {
        for (coord, col) in bld.index.first_stage() {
            if let Some(&wt) = spec.weights.get(&coord) {
                bld.model.objective.linear[col] += wt;
            }
            let Some(&anchor) = spec.anchor.get(&coord) else {
                continue;
            };
            let rho = spec
                .rho
                .for_coord(inst, &coord)
                .ok_or_else(|| Error::InvalidSubproblem(format!("no rho for {coord}")))?;
            // (rho/2)(x - a)^2 = (rho/2) x^2 - rho a x + (rho/2) a^2
            bld.model.add_quadratic(col, rho / 2.0);
            bld.model.objective.linear[col] -= rho * anchor;
            bld.model.objective.offset += rho / 2.0 * anchor * anchor;
        }
    }
    Ok((bld.model, bld.index))
}

/// Closed-form column and row counts of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSize {
    pub cols: usize,
    pub rows: usize,
}

fn per_scenario_size(inst: &PlanningInstance) -> (usize, usize) {
    let b = inst.buses.len();
    let g = inst.gen_techs.len();
    let s = inst.storage_techs.len();
    let tiers: usize = inst.load_techs.iter().map(|d| d.tiers.len()).sum();
    let cand = inst.branches.iter().filter(|l| l.is_candidate()).count();
    let existing = inst.branches.len() - cand;
    let t = inst.periods();
    let cols = t * (b * g + 3 * b * s + b * tiers + 2 * b + inst.branches.len());
    let rows = t * (b * g + 4 * b * s + b * tiers + existing + 4 * cand + b);
    (cols, rows)
}

fn first_stage_size(inst: &PlanningInstance) -> (usize, usize) {
    let b = inst.buses.len();
    let cand = inst.branches.iter().filter(|l| l.is_candidate()).count();
    let cols = b * (inst.gen_techs.len() + inst.storage_techs.len() + inst.load_techs.len()) + cand;
    let rows = inst.load_techs.iter().filter(|d| d.mandate.is_some()).count();
    (cols, rows)
}

pub fn extensive_form_size(inst: &PlanningInstance) -> ModelSize {
    let (fc, fr) = first_stage_size(inst);
    let (sc, sr) = per_scenario_size(inst);
    let n_exp = enumerate_expectation_constraints(inst).len();
    let w = inst.scenarios.len();
    ModelSize {
        cols: fc + w * sc,
        rows: fr + w * sr + n_exp,
    }
}

pub fn subproblem_size(inst: &PlanningInstance, mode: SubproblemMode) -> ModelSize {
    let (fc, fr) = first_stage_size(inst);
    let (sc, sr) = per_scenario_size(inst);
    let n_exp = match mode {
        SubproblemMode::EfSlice => 0,
        _ => enumerate_expectation_constraints(inst).len(),
    };
    ModelSize {
        cols: fc + sc + n_exp,
        rows: fr + sr + n_exp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::small_instance;
    use crate::model::{Bus, GenTech, Integrality, Scenario, StorageTech, TierSpec};

    fn one_bus(demand: f64) -> PlanningInstance {
        let mut bus = Bus::new("n");
        bus.build_limit_gen.insert("pv".into(), 10.0);
        PlanningInstance {
            name: "one".into(),
            buses: vec![bus],
            gen_techs: vec![GenTech {
                id: "pv".into(),
                integrality: Integrality::Continuous,
                unit_size_mw: None,
                fixed_cost: 1.0,
                variable_cost: 0.0,
                emission_factor: 0.0,
            }],
            storage_techs: vec![],
            load_techs: vec![],
            branches: vec![],
            scenarios: vec![Scenario {
                id: "s".into(),
                probability: 1.0,
                demand: vec![vec![demand, demand]],
                availability: vec![vec![vec![1.0, 1.0]]],
            }],
            period_length_h: 1.0,
            shed_cost: 100.0,
            annualization_days: 365.0,
            policies: vec![],
            big_m_angle_spread: crate::model::DEFAULT_BIG_M_ANGLE_SPREAD,
        }
    }

    #[test]
    fn minimal_model_has_expected_columns() {
        let inst = one_bus(0.0);
        let (m, idx) = build_extensive_form(&inst).unwrap();
        // xG, pG x2, pSh x2, theta x2
        assert_eq!(m.num_cols(), 7);
        assert_eq!(m.num_rows(), 4);
        assert!(idx.column(&Coord::BuildGen { bus: 0, gen: 0 }).is_some());
        assert_eq!(
            extensive_form_size(&inst),
            ModelSize {
                cols: m.num_cols(),
                rows: m.num_rows()
            }
        );
        let names: Vec<_> = m.variables.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "xG(0,0)",
                "pG(0,0,0,0)",
                "pSh(0,0,0)",
                "theta(0,0,0)",
                "pG(0,0,1,0)",
                "pSh(0,1,0)",
                "theta(0,1,0)"
            ]
        );
    }

    #[test]
    fn counts_match_closed_form_with_everything() {
        let mut inst = small_instance(TierSpec::new(vec![0.5, 0.75, 1.0], vec![1.0, 0.5, 0.0]));
        inst.storage_techs.push(StorageTech {
            id: "bat".into(),
            fixed_cost: 10.0,
            variable_cost: 0.1,
            duration_h: 4.0,
            eff_charge: 0.9,
            eff_discharge: 0.95,
        });
        inst.buses[0].build_limit_storage.insert("bat".into(), 5.0);
        let mut cand = inst.branches[0].clone();
        cand.id = "l2".into();
        cand.status = crate::model::BranchStatus::Candidate;
        cand.fixed_cost = 3.0;
        inst.branches.push(cand);
        let (m, _) = build_extensive_form(&inst).unwrap();
        assert_eq!(
            extensive_form_size(&inst),
            ModelSize {
                cols: m.num_cols(),
                rows: m.num_rows()
            }
        );
        for mode in [SubproblemMode::EfSlice, SubproblemMode::Lagrangian] {
            let spec = SubproblemSpec {
                mode,
                ..SubproblemSpec::lagrangian("s1", BTreeMap::new())
            };
            let (sm, _) = build_scenario_subproblem(&inst, &spec).unwrap();
            assert_eq!(
                subproblem_size(&inst, mode),
                ModelSize {
                    cols: sm.num_cols(),
                    rows: sm.num_rows()
                }
            );
            assert!(sm.check().is_ok());
        }
        assert!(m.check().is_ok());
    }

    #[test]
    fn negative_cost_without_equality_mandate_is_rejected() {
        let mut inst = small_instance(TierSpec::inflexible());
        inst.load_techs[0].variable_cost = -4.0;
        assert!(matches!(
            build_extensive_form(&inst),
            Err(Error::NegativeCostWithoutEqualityMandate(_))
        ));
    }

    #[test]
    fn subproblem_rejects_unknown_inputs() {
        let inst = small_instance(TierSpec::inflexible());
        let spec = SubproblemSpec::lagrangian("nope", BTreeMap::new());
        assert!(matches!(
            build_scenario_subproblem(&inst, &spec),
            Err(Error::UnknownScenario(_))
        ));
        let spec = SubproblemSpec::lagrangian("s1", BTreeMap::from([("tier:x".to_string(), 1.0)]));
        assert!(matches!(
            build_scenario_subproblem(&inst, &spec),
            Err(Error::UnknownHandle(_))
        ));
        let spec = SubproblemSpec::lagrangian("s1", BTreeMap::from([("tier:b1:dac:1".to_string(), -1.0)]));
        assert!(matches!(
            build_scenario_subproblem(&inst, &spec),
            Err(Error::InvalidSubproblem(_))
        ));
    }

    #[test]
    fn proximal_term_vanishes_at_anchor() {
        let inst = small_instance(TierSpec::inflexible());
        let lag = SubproblemSpec::lagrangian("s1", BTreeMap::from([("tier:b1:dac:1".to_string(), 2.0)]));
        let (lm, lidx) = build_scenario_subproblem(&inst, &lag).unwrap();
        let point: BTreeMap<Coord, f64> = lidx
            .first_stage()
            .into_iter()
            .enumerate()
            .map(|(i, (c, _))| (c, i as f64 + 0.5))
            .collect();
        let pha = SubproblemSpec {
            mode: SubproblemMode::ProgressiveHedging,
            anchor: point.clone(),
            rho: Rho::Uniform(3.0),
            ..lag.clone()
        };
        let (pm, pidx) = build_scenario_subproblem(&inst, &pha).unwrap();
        assert_eq!(lidx, pidx);
        let mut x = vec![0.7; lm.num_cols()];
        for (c, v) in &point {
            x[lidx.column(c).unwrap()] = *v;
        }
        approx::assert_relative_eq!(lm.evaluate(&x), pm.evaluate(&x), max_relative = 1e-12);
    }
}
