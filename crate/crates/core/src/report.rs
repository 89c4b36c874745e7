//! Plan solutions and the report derived from them: buildout, cost
//! decomposition, per-tier reliability audit, expectation-policy totals and
//! the convergence trace.

use std::collections::HashMap;
use std::fmt;

use crate::builder::expectation_row;
use crate::canonical::{Coord, VariableIndex};
use crate::model::{enumerate_expectation_constraints, PlanningInstance};

/// Values of first-stage and per-scenario second-stage coordinates. Missing
/// coordinates read as zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanSolution {
    values: HashMap<Coord, f64>,
}

impl PlanSolution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_index(index: &VariableIndex, primal: &[f64]) -> Self {
        let mut s = Self::new();
        for (coord, col) in index.iter() {
            if !matches!(coord, Coord::Slack { .. }) {
                s.values.insert(coord, primal[col]);
            }
        }
        s
    }

    pub fn get(&self, coord: &Coord) -> f64 {
        self.values.get(coord).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, coord: Coord, value: f64) {
        self.values.insert(coord, value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ef,
    Pha,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ef => "ef",
            Method::Pha => "pha",
        })
    }
}

/// Outcome classes of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportStatus {
    /// Certified optimal by the MILP solver (extensive form only).
    Optimal,
    /// A feasible plan with a bound gap; the decomposition path always lands here.
    Incumbent,
    NoFeasibleIncumbent,
    Infeasible,
}

impl fmt::Display for ReportStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportStatus::Optimal => "optimal",
            ReportStatus::Incumbent => "incumbent",
            ReportStatus::NoFeasibleIncumbent => "no-feasible-incumbent",
            ReportStatus::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildRow {
    pub kind: &'static str,
    pub location: String,
    pub tech: String,
    pub units: f64,
    pub mw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub category: &'static str,
    pub component: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityRow {
    pub bus: String,
    pub load_tech: String,
    pub tier: usize,
    pub units: f64,
    pub required: f64,
    pub achieved: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRow {
    pub policy: String,
    pub lhs: f64,
    pub threshold: f64,
    pub sigma_bar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub consensus_metric: f64,
    pub max_abs_sigma_bar: f64,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub instance: String,
    pub method: Method,
    pub status: ReportStatus,
    pub termination: String,
    pub objective: Option<f64>,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub gap: Option<f64>,
    pub buildout: Vec<BuildRow>,
    pub costs: Vec<CostRow>,
    pub reliability: Vec<ReliabilityRow>,
    pub policies: Vec<PolicyRow>,
    /// Expected slack per expectation-constraint handle at the reported plan.
    pub sigma_bar: Vec<(String, f64)>,
    pub trace: Vec<TraceRow>,
}

/// Relative gap `(ub - lb) / max(|ub|, 1)`.
pub fn relative_gap(lower: f64, upper: f64) -> f64 {
    (upper - lower) / upper.abs().max(1.0)
}

impl SolveReport {
    /// A report with no plan (infeasible or no incumbent).
    pub fn empty(
        inst: &PlanningInstance,
        method: Method,
        status: ReportStatus,
        termination: impl Into<String>,
    ) -> Self {
        Self {
            instance: inst.name.clone(),
            method,
            status,
            termination: termination.into(),
            objective: None,
            lower_bound: None,
            upper_bound: None,
            gap: None,
            buildout: Vec::new(),
            costs: Vec::new(),
            reliability: Vec::new(),
            policies: Vec::new(),
            sigma_bar: Vec::new(),
            trace: Vec::new(),
        }
    }

    /// Fill the plan-derived tables from `sol`.
    pub fn with_plan(mut self, inst: &PlanningInstance, sol: &PlanSolution) -> Self {
        self.buildout = buildout(inst, sol);
        self.costs = costs(inst, sol);
        self.reliability = reliability(inst, sol);
        self.policies = policies(inst, sol);
        self.sigma_bar = sigma_bar(inst, sol);
        self
    }

    pub fn total_cost(&self) -> Option<f64> {
        self.costs.iter().find(|c| c.category == "total").map(|c| c.value)
    }
}

pub fn buildout(inst: &PlanningInstance, sol: &PlanSolution) -> Vec<BuildRow> {
    let mut rows = Vec::new();
    for (b, bus) in inst.buses.iter().enumerate() {
        for (g, tech) in inst.gen_techs.iter().enumerate() {
            let x = sol.get(&Coord::BuildGen { bus: b, gen: g });
            rows.push(BuildRow {
                kind: "generation",
                location: bus.id.clone(),
                tech: tech.id.clone(),
                units: x,
                mw: x * tech.unit_mw(),
            });
        }
        for (s, tech) in inst.storage_techs.iter().enumerate() {
            let x = sol.get(&Coord::BuildStorage { bus: b, storage: s });
            rows.push(BuildRow {
                kind: "storage",
                location: bus.id.clone(),
                tech: tech.id.clone(),
                units: x,
                mw: x,
            });
        }
        for (d, tech) in inst.load_techs.iter().enumerate() {
            let x = sol.get(&Coord::BuildLoad { bus: b, load: d });
            rows.push(BuildRow {
                kind: "large-load",
                location: bus.id.clone(),
                tech: tech.id.clone(),
                units: x,
                mw: x * tech.unit_size_mw,
            });
        }
    }
    for (l, br) in inst.branches.iter().enumerate() {
        if br.is_candidate() {
            let x = sol.get(&Coord::BuildLine { branch: l });
            rows.push(BuildRow {
                kind: "line",
                location: br.id.clone(),
                tech: "candidate".into(),
                units: x,
                mw: x * br.capacity_mw,
            });
        }
    }
    rows
}

/// Annual investment cost `C^inv` of the first stage in `sol`.
pub fn investment_cost(inst: &PlanningInstance, sol: &PlanSolution) -> f64 {
    costs(inst, sol)
        .iter()
        .filter(|c| c.category == "investment")
        .map(|c| c.value)
        .sum()
}

pub fn costs(inst: &PlanningInstance, sol: &PlanSolution) -> Vec<CostRow> {
    let probs = inst.probabilities();
    let scale = inst.annualization_days * inst.period_length_h;
    let (mut inv_g, mut inv_s, mut inv_d, mut inv_l) = (0.0, 0.0, 0.0, 0.0);
    for b in 0..inst.buses.len() {
        for (g, tech) in inst.gen_techs.iter().enumerate() {
            inv_g += tech.fixed_cost * tech.unit_mw() * sol.get(&Coord::BuildGen { bus: b, gen: g });
        }
        for (s, tech) in inst.storage_techs.iter().enumerate() {
            inv_s += tech.fixed_cost * sol.get(&Coord::BuildStorage { bus: b, storage: s });
        }
        for (d, tech) in inst.load_techs.iter().enumerate() {
            inv_d += tech.fixed_cost * sol.get(&Coord::BuildLoad { bus: b, load: d });
        }
    }
    for (l, br) in inst.branches.iter().enumerate() {
        if br.is_candidate() {
            inv_l += br.fixed_cost * sol.get(&Coord::BuildLine { branch: l });
        }
    }
    let (mut op_g, mut op_s, mut op_d, mut op_sh) = (0.0, 0.0, 0.0, 0.0);
    for (w, &p) in probs.iter().enumerate() {
        let f = p * scale;
        for t in 0..inst.periods() {
            for b in 0..inst.buses.len() {
                for (g, tech) in inst.gen_techs.iter().enumerate() {
                    op_g += f * tech.variable_cost * sol.get(&Coord::Gen { bus: b, gen: g, t, w });
                }
                for (s, tech) in inst.storage_techs.iter().enumerate() {
                    op_s += f
                        * tech.variable_cost
                        * sol.get(&Coord::Discharge {
                            bus: b,
                            storage: s,
                            t,
                            w,
                        });
                }
                for (d, tech) in inst.load_techs.iter().enumerate() {
                    for k in 0..tech.tiers.len() {
                        op_d += f
                            * tech.variable_cost
                            * sol.get(&Coord::LoadTier {
                                bus: b,
                                load: d,
                                tier: k,
                                t,
                                w,
                            });
                    }
                }
                op_sh += f * inst.shed_cost * sol.get(&Coord::Shed { bus: b, t, w });
            }
        }
    }
    let inv = inv_g + inv_s + inv_d + inv_l;
    let op = op_g + op_s + op_d + op_sh;
    vec![
        CostRow {
            category: "investment",
            component: "generation",
            value: inv_g,
        },
        CostRow {
            category: "investment",
            component: "storage",
            value: inv_s,
        },
        CostRow {
            category: "investment",
            component: "large-load",
            value: inv_d,
        },
        CostRow {
            category: "investment",
            component: "transmission",
            value: inv_l,
        },
        CostRow {
            category: "operation",
            component: "generation",
            value: op_g,
        },
        CostRow {
            category: "operation",
            component: "storage",
            value: op_s,
        },
        CostRow {
            category: "operation",
            component: "large-load",
            value: op_d,
        },
        CostRow {
            category: "operation",
            component: "shedding",
            value: op_sh,
        },
        CostRow {
            category: "subtotal",
            component: "investment",
            value: inv,
        },
        CostRow {
            category: "subtotal",
            component: "operation",
            value: op,
        },
        CostRow {
            category: "total",
            component: "all",
            value: inv + op,
        },
    ]
}

/// Achieved expected capacity factor of every tier of every built large load.
pub fn reliability(inst: &PlanningInstance, sol: &PlanSolution) -> Vec<ReliabilityRow> {
    let probs = inst.probabilities();
    let tau = inst.period_length_h;
    let periods = inst.periods();
    let mut rows = Vec::new();
    for (b, bus) in inst.buses.iter().enumerate() {
        for (d, tech) in inst.load_techs.iter().enumerate() {
            let units = sol.get(&Coord::BuildLoad { bus: b, load: d });
            if units <= 1e-9 {
                continue;
            }
            for k in 0..tech.tiers.len() {
                let width = tech.tiers.width(k);
                if width <= 0.0 {
                    continue;
                }
                let mut delivered = 0.0;
                for (w, &p) in probs.iter().enumerate() {
                    for t in 0..periods {
                        delivered += p
                            * tau
                            * sol.get(&Coord::LoadTier {
                                bus: b,
                                load: d,
                                tier: k,
                                t,
                                w,
                            });
                    }
                }
                let max_energy = width * tech.unit_size_mw * tau * periods as f64 * units;
                rows.push(ReliabilityRow {
                    bus: bus.id.clone(),
                    load_tech: tech.id.clone(),
                    tier: k + 1,
                    units,
                    required: tech.tiers.reliabilities[k],
                    achieved: delivered / max_energy,
                });
            }
        }
    }
    rows
}

/// Expected `sigma` per expectation constraint, in `<= 0 is satisfied` form.
pub fn sigma_bar(inst: &PlanningInstance, sol: &PlanSolution) -> Vec<(String, f64)> {
    let probs = inst.probabilities();
    enumerate_expectation_constraints(inst)
        .iter()
        .map(|spec| {
            let mut total = 0.0;
            for (w, &p) in probs.iter().enumerate() {
                let row = expectation_row(inst, spec, w);
                let lhs: f64 = row
                    .first_stage
                    .iter()
                    .chain(&row.second_stage)
                    .map(|(c, a)| a * sol.get(c))
                    .sum();
                total += p * (row.rhs - lhs);
            }
            (spec.handle.clone(), total)
        })
        .collect()
}

pub fn policies(inst: &PlanningInstance, sol: &PlanSolution) -> Vec<PolicyRow> {
    let probs = inst.probabilities();
    let scale = inst.annualization_days * inst.period_length_h;
    inst.policies
        .iter()
        .map(|pol| {
            let mut lhs = 0.0;
            for (w, &p) in probs.iter().enumerate() {
                for t in 0..inst.periods() {
                    for b in 0..inst.buses.len() {
                        for (g, tech) in inst.gen_techs.iter().enumerate() {
                            let q = pol.gen_coefficients.get(&tech.id).copied().unwrap_or(0.0);
                            lhs += p * scale * q * sol.get(&Coord::Gen { bus: b, gen: g, t, w });
                        }
                        for (d, tech) in inst.load_techs.iter().enumerate() {
                            let r = pol.load_coefficients.get(&tech.id).copied().unwrap_or(0.0);
                            for k in 0..tech.tiers.len() {
                                lhs += p
                                    * scale
                                    * r
                                    * sol.get(&Coord::LoadTier {
                                        bus: b,
                                        load: d,
                                        tier: k,
                                        t,
                                        w,
                                    });
                            }
                        }
                    }
                }
            }
            PolicyRow {
                policy: pol.name.clone(),
                lhs,
                threshold: pol.threshold,
                sigma_bar: lhs - pol.threshold,
            }
        })
        .collect()
}

/// Largest physical-invariant residuals of a plan: nodal balance (MW),
/// storage cyclic dynamics (MWh), candidate-line flow beyond the built share
/// of its capacity (MW, so any flow on an unbuilt line), tier
/// consumption above its slice of the built capacity (MW), and the gap between
/// the summed tier slices and the built capacity (MW).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InvariantResiduals {
    pub balance: f64,
    pub storage_cycle: f64,
    pub unbuilt_flow: f64,
    pub tier_excess: f64,
    pub tier_sum: f64,
}

pub fn invariant_residuals(inst: &PlanningInstance, sol: &PlanSolution) -> InvariantResiduals {
    let mut r = InvariantResiduals::default();
    let periods = inst.periods();
    let tau = inst.period_length_h;
    for b in 0..inst.buses.len() {
        for (d, tech) in inst.load_techs.iter().enumerate() {
            let built = tech.unit_size_mw * sol.get(&Coord::BuildLoad { bus: b, load: d });
            let slices: f64 = (0..tech.tiers.len()).map(|k| tech.tiers.width(k) * built).sum();
            r.tier_sum = r.tier_sum.max((slices - built).abs());
        }
    }
    for (w, sc) in inst.scenarios.iter().enumerate() {
        for t in 0..periods {
            for b in 0..inst.buses.len() {
                let mut net = sol.get(&Coord::Shed { bus: b, t, w }) - sc.demand[b][t];
                for g in 0..inst.gen_techs.len() {
                    net += sol.get(&Coord::Gen { bus: b, gen: g, t, w });
                }
                for (s, tech) in inst.storage_techs.iter().enumerate() {
                    net += tech.eff_discharge
                        * sol.get(&Coord::Discharge {
                            bus: b,
                            storage: s,
                            t,
                            w,
                        })
                        - sol.get(&Coord::Charge {
                            bus: b,
                            storage: s,
                            t,
                            w,
                        });
                    let prev = if t == 0 { periods - 1 } else { t - 1 };
                    let dyn_res = sol.get(&Coord::StorageLevel {
                        bus: b,
                        storage: s,
                        t,
                        w,
                    }) - sol.get(&Coord::StorageLevel {
                        bus: b,
                        storage: s,
                        t: prev,
                        w,
                    }) - tau
                        * tech.eff_charge
                        * sol.get(&Coord::Charge {
                            bus: b,
                            storage: s,
                            t,
                            w,
                        })
                        + tau
                            * sol.get(&Coord::Discharge {
                                bus: b,
                                storage: s,
                                t,
                                w,
                            });
                    r.storage_cycle = r.storage_cycle.max(dyn_res.abs());
                }
                for (d, tech) in inst.load_techs.iter().enumerate() {
                    let built = tech.unit_size_mw * sol.get(&Coord::BuildLoad { bus: b, load: d });
                    for k in 0..tech.tiers.len() {
                        let p = sol.get(&Coord::LoadTier {
                            bus: b,
                            load: d,
                            tier: k,
                            t,
                            w,
                        });
                        net -= p;
                        r.tier_excess = r.tier_excess.max(p - tech.tiers.width(k) * built);
                    }
                }
                for l in 0..inst.branches.len() {
                    let (o, dest) = inst.branch_ends(l);
                    let f = sol.get(&Coord::Flow { branch: l, t, w });
                    if o == b {
                        net -= f;
                    }
                    if dest == b {
                        net += f;
                    }
                }
                r.balance = r.balance.max(net.abs());
            }
            for (l, br) in inst.branches.iter().enumerate() {
                if br.is_candidate() {
                    let allowed = br.capacity_mw * sol.get(&Coord::BuildLine { branch: l });
                    let f = sol.get(&Coord::Flow { branch: l, t, w }).abs();
                    r.unbuilt_flow = r.unbuilt_flow.max(f - allowed);
                }
            }
        }
    }
    r
}
