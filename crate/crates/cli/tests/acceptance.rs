//! Acceptance checks. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits nonzero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cepkit::builder::build_extensive_form;
use cepkit::canonical::{relax_integrality, Coord, SolveStatus};
use cepkit::ef::solve_extensive_form;
use cepkit::io::{save_report, REPORT_FILES};
use cepkit::model::{enumerate_expectation_constraints, PlanningInstance};
use cepkit::oracle::{
    brute_force_optimum, dac_full_flex, dac_inflexible, dac_mid_flex, generate, Generator, OracleOutcome,
};
use cepkit::pha::{first_stage_coords, lagrangian_lower_bound, run_pha, PhaConfig, PhaState, WEIGHT_BALANCE_TOL};
use cepkit::report::{invariant_residuals, relative_gap, Method, PlanSolution, ReportStatus};
use cepkit::solver::{solve, SolverConfig};
use cepkit_cli::{cmd_compare_flexibility, cmd_solve, compare_flexibility, FlexVariant, RunManifest};

const ORACLE_TOL: f64 = 1e-6;
const BALANCE_TOL: f64 = 1e-6;
const STORAGE_TOL: f64 = 1e-6;
const TIER_SUM_TOL: f64 = 1e-9;
const FLOW_TOL: f64 = 1e-6;
const RELIABILITY_TOL: f64 = 1e-6;

/// Worst invariant residuals over every solve of criteria 1 to 5.
#[derive(Default)]
struct Audit {
    solves: usize,
    balance: f64,
    storage: f64,
    tier_sum: f64,
    tier_excess: f64,
    unbuilt_flow: f64,
    pha_iterations: usize,
    weight_imbalance: f64,
}

impl Audit {
    fn plan(&mut self, inst: &PlanningInstance, plan: &PlanSolution) {
        let r = invariant_residuals(inst, plan);
        self.solves += 1;
        self.balance = self.balance.max(r.balance);
        self.storage = self.storage.max(r.storage_cycle);
        self.tier_sum = self.tier_sum.max(r.tier_sum);
        self.tier_excess = self.tier_excess.max(r.tier_excess);
        self.unbuilt_flow = self.unbuilt_flow.max(r.unbuilt_flow);
    }

    fn pha(&mut self, inst: &PlanningInstance, state: &PhaState) {
        for h in &state.history {
            self.pha_iterations += 1;
            self.weight_imbalance = self.weight_imbalance.max(h.weight_imbalance);
        }
        if let Some(p) = &state.incumbent {
            self.plan(inst, p);
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// Rows of `reliability.csv` with built units: (label, required, achieved).
fn reliability_rows(dir: &Path) -> Vec<(String, f64, f64)> {
    let text = fs::read_to_string(dir.join("reliability.csv")).expect("reliability.csv");
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let num = |i: usize| f[i].parse::<f64>().expect("numeric field");
            (format!("{}/{}/tier{}", f[0], f[1], f[2]), num(4), num(5))
        })
        .collect()
}

fn criterion_1_and_6(solver: &SolverConfig, audit: &mut Audit) -> (Result<String, String>, Result<String, String>) {
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut tranches = 0;
    let mut reliability_failures = Vec::new();
    let tmp = tempfile::tempdir().expect("tempdir");
    for g in [Generator::G1, Generator::G2, Generator::G3] {
        for seed in 0..10 {
            let inst = generate(g, seed);
            let ef = match solve_extensive_form(&inst, solver) {
                Ok(o) => o,
                Err(e) => {
                    failures.push(format!("{g}/{seed}: EF error {e}"));
                    continue;
                }
            };
            let oracle = match brute_force_optimum(&inst, solver) {
                Ok(o) => o,
                Err(e) => {
                    failures.push(format!("{g}/{seed}: oracle error {e}"));
                    continue;
                }
            };
            match (ef.report.objective, oracle.objective()) {
                (Some(a), Some(b)) => {
                    let r = rel(a, b);
                    worst = worst.max(r);
                    if r > ORACLE_TOL {
                        failures.push(format!("{g}/{seed}: EF {a} vs oracle {b}"));
                    }
                }
                (a, b) => failures.push(format!("{g}/{seed}: EF {a:?} vs oracle {b:?}")),
            }
            if ef.report.status != ReportStatus::Optimal {
                failures.push(format!("{g}/{seed}: EF status {}", ef.report.status));
            }
            if let Some(plan) = &ef.plan {
                audit.plan(&inst, plan);
            }
            let dir = tmp.path().join(format!("{g}-{seed}"));
            save_report(&ef.report, &dir).expect("report written");
            for (label, required, achieved) in reliability_rows(&dir) {
                tranches += 1;
                if achieved < required - RELIABILITY_TOL {
                    reliability_failures.push(format!("{g}/{seed} {label}: {achieved} < {required}"));
                }
            }
        }
    }
    let c1 = if failures.is_empty() {
        Ok(format!("30 instances, worst relative difference {worst:.2e}"))
    } else {
        Err(failures.join("; "))
    };
    let c6 = if tranches == 0 {
        Err("no built tranche in any run".into())
    } else if reliability_failures.is_empty() {
        Ok(format!("{tranches} built tranches meet their required factor"))
    } else {
        Err(reliability_failures.join("; "))
    };
    (c1, c6)
}

fn criterion_2(solver: &SolverConfig) -> Result<String, String> {
    let inst = generate(Generator::G1, 0);
    let ef = solve_extensive_form(&inst, solver).map_err(|e| e.to_string())?;
    let opt = ef.report.objective.ok_or("EF has no optimum")?;
    let handles: Vec<String> = enumerate_expectation_constraints(&inst)
        .into_iter()
        .map(|s| s.handle)
        .collect();
    let coords: Vec<Coord> = first_stage_coords(&inst).map_err(|e| e.to_string())?;
    let probs = inst.probabilities();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..20 {
        let lambda: BTreeMap<String, f64> = handles.iter().map(|h| (h.clone(), rng.gen_range(0.0..60.0))).collect();
        let mut raw: Vec<Vec<f64>> = probs
            .iter()
            .map(|_| coords.iter().map(|_| rng.gen_range(-2e4..2e4)).collect())
            .collect();
        for i in 0..coords.len() {
            let mean: f64 = raw.iter().zip(&probs).map(|(w, p)| p * w[i]).sum();
            for w in raw.iter_mut() {
                w[i] -= mean;
            }
        }
        let weights: Vec<BTreeMap<Coord, f64>> = raw
            .iter()
            .map(|w| coords.iter().copied().zip(w.iter().copied()).collect())
            .collect();
        let lb = lagrangian_lower_bound(&inst, &lambda, &weights, solver).map_err(|e| format!("trial {trial}: {e}"))?;
        let excess = (lb - opt) / opt.abs().max(1.0);
        worst = worst.max(excess);
        if excess > ORACLE_TOL {
            return Err(format!("trial {trial}: bound {lb} exceeds optimum {opt}"));
        }
    }
    Ok(format!("20 evaluations, largest (bound - optimum)/optimum {worst:.2e}"))
}

fn criterion_3(solver: &SolverConfig, audit: &mut Audit) -> Result<String, String> {
    let inst = generate(Generator::G1, 0);
    let (ef, _) = build_extensive_form(&inst).map_err(|e| e.to_string())?;
    let relaxed = solve(&relax_integrality(&ef), solver).map_err(|e| e.to_string())?;
    if relaxed.status != SolveStatus::Optimal {
        return Err(format!("relaxed EF status {}", relaxed.status));
    }
    let cfg = PhaConfig {
        relax_integrality: true,
        rho: Some(1e4),
        beta: Some(1e-3),
        max_iters: 200,
        ..Default::default()
    };
    let (report, state) = run_pha(&inst, &cfg, solver).map_err(|e| e.to_string())?;
    audit.pha(&inst, &state);
    let obj = report.objective.ok_or("no incumbent")?;
    let err = rel(obj, relaxed.objective);
    let violation = report.sigma_bar.iter().fold(0.0f64, |m, (_, s)| m.max(*s));
    let iters = state.history.len();
    let detail = format!(
        "{iters} iterations, objective {obj:.6} vs relaxed optimum {:.6} (rel {err:.2e}), max expected violation {violation:.2e}",
        relaxed.objective
    );
    if err <= 5e-3 && violation <= 1e-4 && iters <= 200 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_4(solver: &SolverConfig, audit: &mut Audit) -> Result<String, String> {
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for g in [Generator::G1, Generator::G2] {
        for seed in 0..3 {
            let inst = generate(g, seed);
            let oracle = match brute_force_optimum(&inst, solver).map_err(|e| e.to_string())? {
                OracleOutcome::Optimal { objective, .. } => objective,
                OracleOutcome::Infeasible => {
                    failures.push(format!("{g}/{seed}: oracle infeasible"));
                    continue;
                }
            };
            let (report, state) = run_pha(&inst, &PhaConfig::default(), solver).map_err(|e| e.to_string())?;
            audit.pha(&inst, &state);
            let slack = ORACLE_TOL * oracle.abs().max(1.0);
            let lb = report.lower_bound.unwrap_or(f64::NEG_INFINITY);
            if lb > oracle + slack {
                failures.push(format!("{g}/{seed}: lower {lb} > oracle {oracle}"));
            }
            if let Some(ub) = report.upper_bound {
                if ub < oracle - slack {
                    failures.push(format!("{g}/{seed}: upper {ub} < oracle {oracle}"));
                }
                let gap = relative_gap(lb, ub);
                let last = report.trace.last().and_then(|t| t.upper_bound.zip(t.lower_bound));
                if report.gap != Some(gap) || last != Some((ub, lb)) {
                    failures.push(format!(
                        "{g}/{seed}: reported gap {:?} inconsistent with bounds",
                        report.gap
                    ));
                }
            }
            if report.status == ReportStatus::Optimal {
                failures.push(format!("{g}/{seed}: decomposition claimed optimality"));
            }
            lines.push(format!(
                "{g}/{seed} {} lb {:.4e} oracle {oracle:.4e} ub {}",
                report.status,
                lb,
                report.upper_bound.map_or("none".into(), |u| format!("{u:.4e}"))
            ));
        }
    }
    if failures.is_empty() {
        Ok(lines.join(", "))
    } else {
        Err(failures.join("; "))
    }
}

fn flex_variants() -> Vec<FlexVariant> {
    vec![
        FlexVariant {
            name: "inflexible".into(),
            tiers: dac_inflexible(),
        },
        FlexVariant {
            name: "mid-flex".into(),
            tiers: dac_mid_flex(),
        },
        FlexVariant {
            name: "full-flex".into(),
            tiers: dac_full_flex(),
        },
    ]
}

fn criterion_5(solver: &SolverConfig, audit: &mut Audit) -> Result<String, String> {
    let variants = flex_variants();
    let mut tables = vec![(
        "fixture".to_string(),
        cmd_compare_flexibility(&fixture("g1.json"), "dac", &variants, solver).map_err(|e| e.to_string())?,
    )];
    for seed in 0..10 {
        let inst = generate(Generator::G1, seed);
        let table = compare_flexibility(&inst, "dac", &variants, solver).map_err(|e| e.to_string())?;
        tables.push((format!("seed {seed}"), table));
        for v in &variants {
            let mut vi = inst.clone();
            vi.load_techs[0].tiers = v.tiers.clone();
            let ef = solve_extensive_form(&vi, solver).map_err(|e| e.to_string())?;
            if let Some(p) = &ef.plan {
                audit.plan(&vi, p);
            }
        }
    }
    let mut failures = Vec::new();
    for (label, t) in &tables {
        let costs: Vec<Option<f64>> = t.rows.iter().map(|r| r.total_cost).collect();
        if costs.iter().any(Option::is_none) {
            failures.push(format!("{label}: a variant has no cost"));
            continue;
        }
        for k in 1..costs.len() {
            let (prev, next) = (costs[k - 1].unwrap(), costs[k].unwrap());
            if next > prev + 1e-6 {
                failures.push(format!("{label}: {} costs {next} > {prev}", t.rows[k].variant));
            }
        }
        if !t.warnings.is_empty() {
            failures.push(format!("{label}: {}", t.warnings.join("; ")));
        }
    }
    let fixture_costs: Vec<String> = tables[0]
        .1
        .rows
        .iter()
        .map(|r| format!("{} {:.6}", r.variant, r.total_cost.unwrap_or(f64::NAN)))
        .collect();
    if failures.is_empty() {
        Ok(format!(
            "11 instances non-increasing; fixture: {}",
            fixture_costs.join(" >= ")
        ))
    } else {
        Err(failures.join("; "))
    }
}

fn criterion_7(solver: &SolverConfig) -> Result<String, String> {
    let mut inst = generate(Generator::G1, 0);
    inst.policies[0].threshold = -1e6;
    let ef = solve_extensive_form(&inst, solver).map_err(|e| e.to_string())?;
    if ef.report.status != ReportStatus::Infeasible {
        return Err(format!("EF status {}", ef.report.status));
    }
    let cfg = PhaConfig {
        max_iters: 30,
        ..Default::default()
    };
    let (report, state) = run_pha(&inst, &cfg, solver).map_err(|e| e.to_string())?;
    let c = state
        .handles
        .iter()
        .position(|h| h.starts_with("policy:"))
        .ok_or("no policy handle")?;
    if state.history.iter().any(|h| !h.lower_bound.is_finite()) {
        return Err("non-finite subproblem bound".into());
    }
    let lambdas: Vec<f64> = state.history.iter().map(|h| h.multipliers[c]).collect();
    let growing = lambdas.windows(2).all(|w| w[1] > w[0]);
    let min_sigma = state
        .history
        .iter()
        .map(|h| h.sigma_bar[c])
        .fold(f64::INFINITY, f64::min);
    let detail = format!(
        "EF infeasible; {} iterations, decomposition {}, policy multiplier {:.3} -> {:.3}, min expected slack {min_sigma:.3e}",
        state.history.len(),
        report.status,
        lambdas[0],
        lambdas[lambdas.len() - 1]
    );
    if growing && min_sigma > 1.0 && report.status != ReportStatus::Optimal {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    REPORT_FILES
        .iter()
        .map(|f| (f.to_string(), fs::read(dir.join(f)).unwrap_or_default()))
        .collect()
}

fn criterion_8(solver: &SolverConfig) -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for method in [Method::Ef, Method::Pha] {
        let mut dirs = Vec::new();
        for run in 0..2 {
            let out = tmp.path().join(format!("{method}-{run}"));
            let mut m = RunManifest::new(fixture("g1.json"), method, &out);
            m.solver = solver.clone();
            m.seed = 11;
            m.pha.max_iters = 20;
            let mut sink = Vec::new();
            let code = cmd_solve(&m, &mut sink);
            if code > 4 {
                return Err(format!("{method} run {run} exited {code}"));
            }
            dirs.push((out, sink));
        }
        if dirs[0].1 != dirs[1].1 {
            return Err(format!("{method}: summaries differ"));
        }
        let (a, b) = (read_dir_bytes(&dirs[0].0), read_dir_bytes(&dirs[1].0));
        for ((name, x), (_, y)) in a.iter().zip(&b) {
            if x.is_empty() || x != y {
                return Err(format!("{method}: {name} differs or is empty"));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} report files byte-identical across repeated runs"))
}

fn criterion_9(audit: &Audit) -> Result<String, String> {
    let detail = format!(
        "{} plans, {} iterations: balance {:.1e}, storage {:.1e}, tier sum {:.1e}, tier excess {:.1e}, unbuilt flow {:.1e}, weight imbalance {:.1e}",
        audit.solves,
        audit.pha_iterations,
        audit.balance,
        audit.storage,
        audit.tier_sum,
        audit.tier_excess,
        audit.unbuilt_flow,
        audit.weight_imbalance
    );
    let ok = audit.solves > 0
        && audit.pha_iterations > 0
        && audit.balance <= BALANCE_TOL
        && audit.storage <= STORAGE_TOL
        && audit.tier_sum <= TIER_SUM_TOL
        && audit.tier_excess <= BALANCE_TOL
        && audit.unbuilt_flow <= FLOW_TOL
        && audit.weight_imbalance <= WEIGHT_BALANCE_TOL;
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn line(n: usize, name: &str, secs: f64, r: &Result<String, String>) -> bool {
    match r {
        Ok(d) => println!("criterion {n} {name}: PASS [{secs:.1}s] {d}"),
        Err(d) => println!("criterion {n} {name}: FAIL [{secs:.1}s] {d}"),
    }
    r.is_ok()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn main() {
    // `cargo test -- --list`
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let solver = SolverConfig::default();
    let mut audit = Audit::default();
    let mut ok = true;

    let ((c1, c6), t16) = timed(|| criterion_1_and_6(&solver, &mut audit));
    ok &= line(1, "oracle equivalence", t16, &c1);
    let (c2, t) = timed(|| criterion_2(&solver));
    ok &= line(2, "weak duality", t, &c2);
    let (c3, t) = timed(|| criterion_3(&solver, &mut audit));
    ok &= line(3, "convex convergence", t, &c3);
    let (c4, t) = timed(|| criterion_4(&solver, &mut audit));
    ok &= line(4, "bound sandwich", t, &c4);
    let (c5, t) = timed(|| criterion_5(&solver, &mut audit));
    ok &= line(5, "flexibility monotonicity", t, &c5);
    ok &= line(6, "reliability audit", t16, &c6);
    let (c7, t) = timed(|| criterion_7(&solver));
    ok &= line(7, "relaxation feasibility", t, &c7);
    let (c8, t) = timed(|| criterion_8(&solver));
    ok &= line(8, "determinism", t, &c8);
    ok &= line(9, "invariant suite", 0.0, &criterion_9(&audit));

    if !ok {
        std::process::exit(1);
    }
}
