use std::path::PathBuf;

use cepkit::builder::build_extensive_form;
use cepkit::canonical::{relax_integrality, SolveStatus};
use cepkit::oracle::{generate, Generator};
use cepkit::solver::{dual_objective, solve, solve_lp_with_duals, Backend, SolverConfig};
use cepkit::Error;

fn shim() -> SolverConfig {
    SolverConfig {
        backend: Backend::Subprocess {
            binary: Some(PathBuf::from(env!("CARGO_BIN_EXE_cepkit-lpsolve"))),
        },
        ..Default::default()
    }
}

#[test]
fn subprocess_matches_in_process_milp() {
    for g in [Generator::G1, Generator::G3] {
        let (model, _) = build_extensive_form(&generate(g, 2)).unwrap();
        let a = solve(&model, &SolverConfig::default()).unwrap();
        let b = solve(&model, &shim()).unwrap();
        assert_eq!(a.status, SolveStatus::Optimal);
        assert_eq!(b.status, SolveStatus::Optimal);
        assert!((a.objective - b.objective).abs() <= 1e-6 * a.objective.abs());
        assert!(model.max_violation(&b.primal) <= 1e-6);
    }
}

#[test]
fn subprocess_duals_match_in_process_duals() {
    let (model, _) = build_extensive_form(&generate(Generator::G1, 4)).unwrap();
    let lp = relax_integrality(&model);
    let a = solve_lp_with_duals(&lp, &SolverConfig::default()).unwrap();
    let b = solve_lp_with_duals(&lp, &shim()).unwrap();
    assert!((a.objective - b.objective).abs() <= 1e-6 * a.objective.abs());
    // Dual optima need not be unique, so compare dual objectives.
    for r in [&a, &b] {
        let d = dual_objective(&lp, r).unwrap();
        assert!(
            (d - a.objective).abs() <= 1e-5 * a.objective.abs(),
            "{d} vs {}",
            a.objective
        );
    }
}

#[test]
fn missing_binary_is_reported() {
    let cfg = SolverConfig {
        backend: Backend::Subprocess {
            binary: Some(PathBuf::from("/nonexistent/highs")),
        },
        ..Default::default()
    };
    let (model, _) = build_extensive_form(&generate(Generator::G1, 0)).unwrap();
    assert!(matches!(solve(&model, &cfg), Err(Error::BackendUnavailable(_))));
}
