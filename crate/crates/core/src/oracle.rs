//! Desk-scale ground truth: seeded synthetic instances and an exhaustive
//! solver that enumerates every integer first-stage assignment and solves the
//! remaining LP with expectation constraints imposed directly.
//!
//! The LP assembler here is deliberately separate from [`crate::builder`]:
//! lines are modeled disjunctively (built lines obey the flow law, unbuilt
//! lines carry no flow) instead of through big-M rows, and the expectation
//! constraints are written as plain expected sums.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::canonical::{CanonicalModel, Coord, RowSense, SolveStatus};
use crate::error::{Error, Result};
use crate::model::{
    validate_instance, Branch, BranchStatus, Bus, ExpectedOutputPolicy, GenTech, Integrality, LargeLoadTech, Mandate,
    PlanningInstance, Scenario, StorageTech, TierSpec, DEFAULT_ANNUALIZATION_DAYS, DEFAULT_BIG_M_ANGLE_SPREAD,
};
use crate::solver::{solve, SolverConfig};

/// Largest lattice the brute-force solver will enumerate.
pub const LATTICE_LIMIT: u128 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Generator {
    /// Two buses joined by one candidate line, one integer and one continuous
    /// generation tech, one storage tech, a mid-flex DAC-like load and a
    /// net-zero policy.
    G1,
    /// G1 plus a mandated datacenter-like load with negative variable cost.
    G2,
    /// Three radial buses with the DAC-like load sited at either end bus.
    G3,
}

impl std::str::FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "g1" => Ok(Generator::G1),
            "g2" => Ok(Generator::G2),
            "g3" => Ok(Generator::G3),
            _ => Err(Error::Config(format!(
                "unknown generator `{s}` (expected g1, g2 or g3)"
            ))),
        }
    }
}

impl std::fmt::Display for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Generator::G1 => "g1",
            Generator::G2 => "g2",
            Generator::G3 => "g3",
        })
    }
}

pub const PERIODS: usize = 4;
pub const PERIOD_LENGTH_H: f64 = 6.0;

/// DAC tier variants used by the flexibility comparison.
pub fn dac_inflexible() -> TierSpec {
    TierSpec::inflexible()
}

pub fn dac_mid_flex() -> TierSpec {
    TierSpec::new(vec![0.5, 0.75, 1.0], vec![1.0, 0.5, 0.0])
}

pub fn dac_full_flex() -> TierSpec {
    TierSpec::full_flex()
}

pub fn datacenter_mid_flex() -> TierSpec {
    TierSpec::new(vec![0.5, 0.9, 1.0], vec![1.0, 0.85, 0.0])
}

fn gen_techs() -> Vec<GenTech> {
    vec![
        GenTech {
            id: "gas".into(),
            integrality: Integrality::IntegerUnits,
            unit_size_mw: Some(12.0),
            fixed_cost: 80_000.0,
            variable_cost: 45.0,
            emission_factor: 0.2,
        },
        GenTech {
            id: "solar".into(),
            integrality: Integrality::Continuous,
            unit_size_mw: None,
            fixed_cost: 95_000.0,
            variable_cost: 0.0,
            emission_factor: 0.0,
        },
    ]
}

fn storage_techs() -> Vec<StorageTech> {
    vec![StorageTech {
        id: "battery".into(),
        fixed_cost: 70_000.0,
        variable_cost: 0.5,
        duration_h: 4.0,
        eff_charge: 0.92,
        eff_discharge: 0.92,
    }]
}

fn dac() -> LargeLoadTech {
    LargeLoadTech {
        id: "dac".into(),
        unit_size_mw: 4.0,
        fixed_cost: 40_000.0,
        variable_cost: 2.0,
        tiers: dac_mid_flex(),
        // 2 MWh per tCO2 captured.
        capture_factor: 0.5,
        mandate: None,
    }
}

fn datacenter() -> LargeLoadTech {
    LargeLoadTech {
        id: "datacenter".into(),
        unit_size_mw: 8.0,
        fixed_cost: 40_000.0,
        variable_cost: -4.0,
        tiers: datacenter_mid_flex(),
        capture_factor: 0.0,
        mandate: Some(Mandate {
            min_units: 1,
            equality: true,
        }),
    }
}

fn net_zero() -> ExpectedOutputPolicy {
    ExpectedOutputPolicy {
        name: "net-zero".into(),
        gen_coefficients: [("gas".to_string(), 0.2)].into_iter().collect(),
        load_coefficients: [("dac".to_string(), -0.5)].into_iter().collect(),
        threshold: 0.0,
    }
}

fn bus(id: &str, gas_existing: f64, gas_limit: f64, solar_limit: f64, storage_limit: f64) -> Bus {
    let mut b = Bus::new(id);
    if gas_existing > 0.0 {
        b.existing_gen.insert("gas".into(), gas_existing);
    }
    if gas_limit > 0.0 {
        b.build_limit_gen.insert("gas".into(), gas_limit);
    }
    if solar_limit > 0.0 {
        b.build_limit_gen.insert("solar".into(), solar_limit);
    }
    if storage_limit > 0.0 {
        b.build_limit_storage.insert("battery".into(), storage_limit);
    }
    b
}

/// Solar shape over four six-hour periods (night, morning, afternoon, evening).
const SOLAR_SHAPE: [f64; PERIODS] = [0.0, 0.55, 0.9, 0.15];
const DEMAND_SHAPE: [f64; PERIODS] = [0.75, 0.95, 1.0, 1.1];

fn scenario(rng: &mut ChaCha8Rng, id: &str, probability: f64, peaks: &[f64], gas_at: &[bool]) -> Scenario {
    let cloud: f64 = rng.gen_range(0.55..1.0);
    let demand = peaks
        .iter()
        .map(|&peak| {
            DEMAND_SHAPE
                .iter()
                .map(|s| peak * s * rng.gen_range(0.85..1.15))
                .collect()
        })
        .collect();
    let availability = gas_at
        .iter()
        .map(|&has_gas| {
            let gas = (0..PERIODS)
                .map(|_| if has_gas { rng.gen_range(0.9..1.0) } else { 1.0 })
                .collect();
            let solar = SOLAR_SHAPE
                .iter()
                .map(|s| (s * cloud * rng.gen_range(0.9..1.1)).min(1.0))
                .collect();
            vec![gas, solar]
        })
        .collect();
    Scenario {
        id: id.into(),
        probability,
        demand,
        availability,
    }
}

/// Deterministic instance for `(spec, seed)`.
pub fn generate(spec: Generator, seed: u64) -> PlanningInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (spec as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let p0: f64 = rng.gen_range(0.35..0.65);
    let probs = [p0, 1.0 - p0];
    let (mut buses, branches, peaks, gas_at) = match spec {
        Generator::G1 | Generator::G2 => {
            let b1 = bus("b1", 10.0, 34.0, 150.0, 80.0);
            let b2 = bus("b2", 0.0, 0.0, 150.0, 80.0);
            let line = Branch {
                id: "l1".into(),
                from_bus: "b1".into(),
                to_bus: "b2".into(),
                susceptance: 400.0,
                capacity_mw: 40.0,
                status: BranchStatus::Candidate,
                fixed_cost: rng.gen_range(150_000.0..450_000.0),
            };
            let peaks = vec![rng.gen_range(8.0..14.0), rng.gen_range(16.0..26.0)];
            (vec![b1, b2], vec![line], peaks, vec![true, false])
        }
        Generator::G3 => {
            let b1 = bus("b1", 10.0, 34.0, 100.0, 60.0);
            let b2 = bus("b2", 0.0, 0.0, 100.0, 60.0);
            let b3 = bus("b3", 0.0, 0.0, 100.0, 60.0);
            let l1 = Branch {
                id: "l1".into(),
                from_bus: "b1".into(),
                to_bus: "b2".into(),
                susceptance: 400.0,
                capacity_mw: 35.0,
                status: BranchStatus::Existing,
                fixed_cost: 0.0,
            };
            let l2 = Branch {
                id: "l2".into(),
                from_bus: "b2".into(),
                to_bus: "b3".into(),
                susceptance: 300.0,
                capacity_mw: 30.0,
                status: BranchStatus::Candidate,
                fixed_cost: rng.gen_range(100_000.0..300_000.0),
            };
            let peaks = vec![
                rng.gen_range(6.0..10.0),
                rng.gen_range(8.0..14.0),
                rng.gen_range(8.0..14.0),
            ];
            (vec![b1, b2, b3], vec![l1, l2], peaks, vec![true, false, false])
        }
    };
    let dac_sites: &[usize] = match spec {
        Generator::G3 => &[0, 2],
        _ => &[0, 1],
    };
    for &b in dac_sites {
        buses[b].build_limit_load.insert("dac".into(), 2);
    }
    let mut load_techs = vec![dac()];
    if spec == Generator::G2 {
        load_techs.push(datacenter());
        for b in &mut buses {
            b.build_limit_load.insert("datacenter".into(), 1);
        }
    }
    let scenarios = ["s1", "s2"]
        .iter()
        .zip(probs)
        .map(|(id, p)| scenario(&mut rng, id, p, &peaks, &gas_at))
        .collect();
    let inst = PlanningInstance {
        name: format!("{spec}-seed{seed}"),
        buses,
        gen_techs: gen_techs(),
        storage_techs: storage_techs(),
        load_techs,
        branches,
        scenarios,
        period_length_h: PERIOD_LENGTH_H,
        shed_cost: 3_000.0,
        annualization_days: DEFAULT_ANNUALIZATION_DAYS,
        policies: vec![net_zero()],
        big_m_angle_spread: DEFAULT_BIG_M_ANGLE_SPREAD,
    };
    debug_assert!(validate_instance(&inst).is_empty());
    inst
}

/// Certified optimum of the extensive form, or an infeasibility verdict.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    Optimal {
        objective: f64,
        /// Full first stage: the lattice point plus the LP's continuous values.
        assignment: BTreeMap<Coord, f64>,
        /// Number of lattice points whose LP was feasible.
        feasible_points: usize,
    },
    Infeasible,
}

impl OracleOutcome {
    pub fn objective(&self) -> Option<f64> {
        match self {
            OracleOutcome::Optimal { objective, .. } => Some(*objective),
            OracleOutcome::Infeasible => None,
        }
    }
}

/// Integer first-stage coordinates and their ranges `0..=ub`.
pub fn lattice(inst: &PlanningInstance) -> Vec<(Coord, u32)> {
    let mut out = Vec::new();
    for b in 0..inst.buses.len() {
        for (g, tech) in inst.gen_techs.iter().enumerate() {
            if tech.is_integer() {
                out.push((Coord::BuildGen { bus: b, gen: g }, inst.gen_build_bound(b, g) as u32));
            }
        }
        for d in 0..inst.load_techs.len() {
            out.push((Coord::BuildLoad { bus: b, load: d }, inst.load_build_bound(b, d)));
        }
    }
    for (l, br) in inst.branches.iter().enumerate() {
        if br.is_candidate() {
            out.push((Coord::BuildLine { branch: l }, 1));
        }
    }
    out
}

pub fn lattice_size(inst: &PlanningInstance) -> u128 {
    lattice(inst)
        .iter()
        .fold(1u128, |acc, (_, ub)| acc.saturating_mul(u128::from(*ub) + 1))
}

/// Enumerate every integer first-stage point and return the best LP optimum.
/// Ties within `1e-9` relative go to the lexicographically smallest point.
pub fn brute_force_optimum(inst: &PlanningInstance, solver: &SolverConfig) -> Result<OracleOutcome> {
    let violations = validate_instance(inst);
    if !violations.is_empty() {
        return Err(Error::InvalidInstance(violations));
    }
    let size = lattice_size(inst);
    if size > LATTICE_LIMIT {
        return Err(Error::LatticeTooLarge {
            size,
            limit: LATTICE_LIMIT,
        });
    }
    let axes = lattice(inst);
    let points: Vec<Vec<u32>> = (0..size as usize)
        .map(|mut i| {
            // Last axis varies fastest, so points come out in lexicographic order.
            let mut p = vec![0u32; axes.len()];
            for (slot, (_, ub)) in p.iter_mut().zip(&axes).rev() {
                let radix = *ub as usize + 1;
                *slot = (i % radix) as u32;
                i /= radix;
            }
            p
        })
        .collect();
    let results: Vec<Option<(f64, BTreeMap<Coord, f64>)>> = points
        .par_iter()
        .map(|p| {
            let fixed: HashMap<Coord, f64> = axes.iter().zip(p).map(|((c, _), &v)| (*c, f64::from(v))).collect();
            solve_point(inst, &fixed, solver)
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(f64, BTreeMap<Coord, f64>)> = None;
    let mut feasible = 0;
    for r in results.into_iter().flatten() {
        feasible += 1;
        let better = match &best {
            None => true,
            Some((b, _)) => r.0 < *b - 1e-9 * b.abs().max(1.0),
        };
        if better {
            best = Some(r);
        }
    }
    Ok(match best {
        Some((objective, assignment)) => OracleOutcome::Optimal {
            objective,
            assignment,
            feasible_points: feasible,
        },
        None => OracleOutcome::Infeasible,
    })
}

struct PointLp {
    m: CanonicalModel,
    cols: HashMap<String, usize>,
}

impl PointLp {
    fn col(&mut self, key: String, lo: f64, hi: f64, cost: f64) -> usize {
        let j = self.m.add_variable(key.clone(), lo, hi, false, cost);
        self.cols.insert(key, j);
        j
    }

    fn get(&self, key: &str) -> usize {
        self.cols[key]
    }
}

/// LP of one lattice point; `None` when it is infeasible (including mandate
/// violations, which are checked before any solve).
fn solve_point(
    inst: &PlanningInstance,
    fixed: &HashMap<Coord, f64>,
    solver: &SolverConfig,
) -> Result<Option<(f64, BTreeMap<Coord, f64>)>> {
    let nb = inst.buses.len();
    for (d, tech) in inst.load_techs.iter().enumerate() {
        if let Some(m) = &tech.mandate {
            let total: f64 = (0..nb).map(|b| fixed[&Coord::BuildLoad { bus: b, load: d }]).sum();
            let target = f64::from(m.min_units);
            if total < target || (m.equality && total > target) {
                return Ok(None);
            }
        }
    }
    let probs = inst.probabilities();
    let periods = inst.periods();
    let tau = inst.period_length_h;
    let days = inst.annualization_days;
    let mut lp = PointLp {
        m: CanonicalModel::new(),
        cols: HashMap::new(),
    };
    let mut constant = 0.0;

    // Installed capacity per (bus, gen) and (bus, storage): either a constant
    // or a continuous investment column.
    enum Cap {
        Fixed(f64),
        Var(usize, f64),
    }
    let mut gen_cap: HashMap<(usize, usize), Cap> = HashMap::new();
    let mut sto_cap: HashMap<(usize, usize), Cap> = HashMap::new();
    for (b, bus) in inst.buses.iter().enumerate() {
        for (g, tech) in inst.gen_techs.iter().enumerate() {
            let existing = bus.existing_gen.get(&tech.id).copied().unwrap_or(0.0);
            if tech.is_integer() {
                let units = fixed[&Coord::BuildGen { bus: b, gen: g }];
                let unit = tech.unit_size_mw.unwrap_or(1.0);
                constant += tech.fixed_cost * unit * units;
                gen_cap.insert((b, g), Cap::Fixed(existing + unit * units));
            } else {
                let limit = bus.build_limit_gen.get(&tech.id).copied().unwrap_or(existing);
                let j = lp.col(
                    format!("build_gen/{b}/{g}"),
                    0.0,
                    (limit - existing).max(0.0),
                    tech.fixed_cost,
                );
                gen_cap.insert((b, g), Cap::Var(j, existing));
            }
        }
        for (s, tech) in inst.storage_techs.iter().enumerate() {
            let existing = bus.existing_storage.get(&tech.id).copied().unwrap_or(0.0);
            let limit = bus.build_limit_storage.get(&tech.id).copied().unwrap_or(existing);
            let j = lp.col(
                format!("build_sto/{b}/{s}"),
                0.0,
                (limit - existing).max(0.0),
                tech.fixed_cost,
            );
            sto_cap.insert((b, s), Cap::Var(j, existing));
        }
        for (d, tech) in inst.load_techs.iter().enumerate() {
            constant += tech.fixed_cost * fixed[&Coord::BuildLoad { bus: b, load: d }];
        }
    }
    for (l, br) in inst.branches.iter().enumerate() {
        if br.is_candidate() {
            constant += br.fixed_cost * fixed[&Coord::BuildLine { branch: l }];
        }
    }
    // `row <= cap`: moves a capacity expression to the left-hand side.
    let cap_row = |lp: &mut PointLp, name: String, mut coeffs: Vec<(usize, f64)>, cap: &Cap, factor: f64| {
        let rhs = match *cap {
            Cap::Fixed(c) => factor * c,
            Cap::Var(j, existing) => {
                coeffs.push((j, -factor));
                factor * existing
            }
        };
        lp.m.add_constraint(name, coeffs, RowSense::Le, rhs);
    };

    let mut tier_energy: HashMap<(usize, usize, usize), Vec<(usize, f64)>> = HashMap::new();
    let mut policy_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.policies.len()];
    let half = inst.big_m_angle_spread / 2.0;
    let reference = inst.reference_bus();
    for (w, sc) in inst.scenarios.iter().enumerate() {
        let pw = probs[w];
        let op = pw * days * tau;
        for t in 0..periods {
            for b in 0..nb {
                let lo = if b == reference { 0.0 } else { -half };
                let hi = if b == reference { 0.0 } else { half };
                lp.col(format!("ang/{w}/{t}/{b}"), lo, hi, 0.0);
            }
            let mut inject: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nb];
            for (l, br) in inst.branches.iter().enumerate() {
                let o = inst.bus_index(&br.from_bus).unwrap();
                let dst = inst.bus_index(&br.to_bus).unwrap();
                let built = !br.is_candidate() || fixed[&Coord::BuildLine { branch: l }] > 0.5;
                if !built {
                    continue;
                }
                let f = lp.col(format!("flow/{w}/{t}/{l}"), -br.capacity_mw, br.capacity_mw, 0.0);
                let ao = lp.get(&format!("ang/{w}/{t}/{o}"));
                let ad = lp.get(&format!("ang/{w}/{t}/{dst}"));
                lp.m.add_constraint(
                    format!("ohm/{w}/{t}/{l}"),
                    [(f, 1.0), (ao, -br.susceptance), (ad, br.susceptance)],
                    RowSense::Eq,
                    0.0,
                );
                inject[o].push((f, -1.0));
                inject[dst].push((f, 1.0));
            }
            for b in 0..nb {
                let mut bal = inject[b].clone();
                for (g, tech) in inst.gen_techs.iter().enumerate() {
                    let p = lp.col(
                        format!("gen/{w}/{t}/{b}/{g}"),
                        0.0,
                        f64::INFINITY,
                        op * tech.variable_cost,
                    );
                    bal.push((p, 1.0));
                    let alpha = sc.availability[b][g][t];
                    cap_row(
                        &mut lp,
                        format!("avail/{w}/{t}/{b}/{g}"),
                        vec![(p, 1.0)],
                        &gen_cap[&(b, g)],
                        alpha,
                    );
                    for (pi, pol) in inst.policies.iter().enumerate() {
                        if let Some(&q) = pol.gen_coefficients.get(&tech.id) {
                            policy_terms[pi].push((p, pw * days * tau * q));
                        }
                    }
                }
                for (s, tech) in inst.storage_techs.iter().enumerate() {
                    let ch = lp.col(format!("ch/{w}/{t}/{b}/{s}"), 0.0, f64::INFINITY, 0.0);
                    let dch = lp.col(
                        format!("dch/{w}/{t}/{b}/{s}"),
                        0.0,
                        f64::INFINITY,
                        op * tech.variable_cost,
                    );
                    let lev = lp.col(format!("lev/{w}/{t}/{b}/{s}"), 0.0, f64::INFINITY, 0.0);
                    let cap = &sto_cap[&(b, s)];
                    cap_row(&mut lp, format!("chmax/{w}/{t}/{b}/{s}"), vec![(ch, 1.0)], cap, 1.0);
                    cap_row(&mut lp, format!("dchmax/{w}/{t}/{b}/{s}"), vec![(dch, 1.0)], cap, 1.0);
                    cap_row(
                        &mut lp,
                        format!("levmax/{w}/{t}/{b}/{s}"),
                        vec![(lev, 1.0)],
                        cap,
                        tech.duration_h,
                    );
                    bal.push((dch, tech.eff_discharge));
                    bal.push((ch, -1.0));
                }
                for (d, tech) in inst.load_techs.iter().enumerate() {
                    let units = fixed[&Coord::BuildLoad { bus: b, load: d }];
                    let mut lower = 0.0;
                    for (k, (&u, _)) in tech.tiers.breakpoints.iter().zip(&tech.tiers.reliabilities).enumerate() {
                        let band = (u - lower) * tech.unit_size_mw * units;
                        lower = u;
                        let p = lp.col(format!("load/{w}/{t}/{b}/{d}/{k}"), 0.0, band, op * tech.variable_cost);
                        bal.push((p, -1.0));
                        tier_energy.entry((b, d, k)).or_default().push((p, pw * tau));
                        for (pi, pol) in inst.policies.iter().enumerate() {
                            if let Some(&r) = pol.load_coefficients.get(&tech.id) {
                                policy_terms[pi].push((p, pw * days * tau * r));
                            }
                        }
                    }
                }
                let shed = lp.col(format!("shed/{w}/{t}/{b}"), 0.0, sc.demand[b][t], op * inst.shed_cost);
                bal.push((shed, 1.0));
                lp.m.add_constraint(format!("bal/{w}/{t}/{b}"), bal, RowSense::Eq, sc.demand[b][t]);
            }
        }
        // Cyclic storage dynamics, written after all periods exist.
        for b in 0..nb {
            for (s, tech) in inst.storage_techs.iter().enumerate() {
                for t in 0..periods {
                    let prev = (t + periods - 1) % periods;
                    let coeffs = [
                        (lp.get(&format!("lev/{w}/{t}/{b}/{s}")), 1.0),
                        (lp.get(&format!("lev/{w}/{prev}/{b}/{s}")), -1.0),
                        (lp.get(&format!("ch/{w}/{t}/{b}/{s}")), -tau * tech.eff_charge),
                        (lp.get(&format!("dch/{w}/{t}/{b}/{s}")), tau),
                    ];
                    lp.m.add_constraint(format!("soc/{w}/{t}/{b}/{s}"), coeffs, RowSense::Eq, 0.0);
                }
            }
        }
    }
    // Expected service of every tier: sum_w pi_w sum_t tau p >= phi * band energy.
    for b in 0..nb {
        for (d, tech) in inst.load_techs.iter().enumerate() {
            let units = fixed[&Coord::BuildLoad { bus: b, load: d }];
            let mut lower = 0.0;
            for (k, (&u, &phi)) in tech.tiers.breakpoints.iter().zip(&tech.tiers.reliabilities).enumerate() {
                let energy = phi * (u - lower) * tech.unit_size_mw * units * tau * periods as f64;
                lower = u;
                if energy > 0.0 {
                    lp.m.add_constraint(
                        format!("service/{b}/{d}/{k}"),
                        tier_energy[&(b, d, k)].clone(),
                        RowSense::Ge,
                        energy,
                    );
                }
            }
        }
    }
    for (pi, pol) in inst.policies.iter().enumerate() {
        lp.m.add_constraint(
            format!("policy/{pi}"),
            policy_terms[pi].clone(),
            RowSense::Le,
            pol.threshold,
        );
    }
    lp.m.objective.offset = constant;

    let r = solve(&lp.m, solver)?;
    match r.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Ok(None),
        other => {
            return Err(Error::BackendFailure {
                message: format!("oracle LP ended with status {other}"),
                diagnostics: String::new(),
            })
        }
    }
    let mut assignment: BTreeMap<Coord, f64> = fixed.iter().map(|(c, v)| (*c, *v)).collect();
    for b in 0..nb {
        for g in 0..inst.gen_techs.len() {
            if let Some(&j) = lp.cols.get(&format!("build_gen/{b}/{g}")) {
                assignment.insert(Coord::BuildGen { bus: b, gen: g }, r.primal[j]);
            }
        }
        for s in 0..inst.storage_techs.len() {
            let j = lp.get(&format!("build_sto/{b}/{s}"));
            assignment.insert(Coord::BuildStorage { bus: b, storage: s }, r.primal[j]);
        }
    }
    Ok(Some((r.objective, assignment)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::enumerate_expectation_constraints;

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate(Generator::G1, 7), generate(Generator::G1, 7));
        assert_ne!(
            generate(Generator::G1, 7).scenarios[0].demand,
            generate(Generator::G1, 8).scenarios[0].demand
        );
    }

    #[test]
    fn generated_instances_are_valid_and_enumerable() {
        for g in [Generator::G1, Generator::G2, Generator::G3] {
            for seed in 0..5 {
                let inst = generate(g, seed);
                assert!(validate_instance(&inst).is_empty(), "{g} seed {seed}");
                assert!(lattice_size(&inst) <= LATTICE_LIMIT);
            }
        }
    }

    #[test]
    fn g1_shape() {
        let inst = generate(Generator::G1, 7);
        assert_eq!(inst.buses.len(), 2);
        assert_eq!(inst.scenarios.len(), 2);
        assert_eq!(inst.periods(), PERIODS);
        assert_eq!(enumerate_expectation_constraints(&inst).len(), 7);
        assert_eq!(inst.branches.iter().filter(|b| b.is_candidate()).count(), 1);
    }

    #[test]
    fn g2_has_mandated_negative_cost_datacenter() {
        let inst = generate(Generator::G2, 3);
        let dc = inst.load_techs.iter().find(|d| d.id == "datacenter").unwrap();
        assert!(dc.variable_cost < 0.0);
        assert!(dc.mandate.as_ref().unwrap().equality);
        assert_eq!(dc.tiers, datacenter_mid_flex());
    }

    #[test]
    fn lattice_order_is_lexicographic() {
        let inst = generate(Generator::G1, 1);
        let axes = lattice(&inst);
        assert_eq!(axes.last().unwrap().0, Coord::BuildLine { branch: 0 });
        assert_eq!(
            lattice_size(&inst),
            axes.iter().map(|(_, u)| u128::from(*u) + 1).product()
        );
    }
}
