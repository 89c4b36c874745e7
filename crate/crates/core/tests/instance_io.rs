use std::fs;
use std::path::{Path, PathBuf};

use proptest::prelude::*;

use cepkit::canonical::Coord;
use cepkit::ef::solve_extensive_form;
use cepkit::io::{instance_to_string, load_instance, parse_instance, round9, save_instance, save_report};
use cepkit::model::enumerate_expectation_constraints;
use cepkit::oracle::{generate, Generator};
use cepkit::solver::SolverConfig;
use cepkit::Error;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

#[test]
fn g1_fixture_shape() {
    let inst = load_instance(fixture("g1.json")).unwrap();
    assert_eq!(inst.buses.len(), 2);
    assert_eq!(inst.scenarios.len(), 2);
    assert_eq!(enumerate_expectation_constraints(&inst).len(), 7);
}

#[test]
fn csv_series_match_inline_series() {
    let inline = load_instance(fixture("g1.json")).unwrap();
    let csv = load_instance(fixture("g1-csv/instance.json")).unwrap();
    assert_eq!(inline, csv);
}

#[test]
fn fixtures_round_trip_byte_for_byte() {
    for name in ["g1.json", "g2.json", "g3.json"] {
        let path = fixture(name);
        let text = fs::read_to_string(&path).unwrap();
        let inst = load_instance(&path).unwrap();
        assert_eq!(instance_to_string(&inst), text, "{name}");
    }
}

#[test]
fn save_then_load_in_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g3.json");
    let inst = load_instance(fixture("g3.json")).unwrap();
    save_instance(&inst, &path).unwrap();
    assert_eq!(load_instance(&path).unwrap(), inst);
    let bytes = fs::read(&path).unwrap();
    assert!(!bytes.contains(&b'\r'));
    assert_eq!(bytes.last(), Some(&b'\n'));
}

#[test]
fn short_demand_table_names_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let src = fixture("g1-csv");
    for f in fs::read_dir(&src).unwrap() {
        let f = f.unwrap();
        fs::copy(f.path(), dir.path().join(f.file_name())).unwrap();
    }
    let demand = dir.path().join("s2_demand.csv");
    let text = fs::read_to_string(&demand).unwrap();
    let truncated: Vec<&str> = text.lines().take(3).collect();
    fs::write(&demand, truncated.join("\n") + "\n").unwrap();
    match load_instance(dir.path().join("instance.json")) {
        Err(Error::Dimension { table, message }) => {
            assert_eq!(table, "s2_demand.csv");
            assert!(message.contains("expected 4"), "{message}");
        }
        other => panic!("expected a dimension error, got {other:?}"),
    }
}

#[test]
fn inline_table_with_wrong_length_names_the_scenario() {
    let text = fs::read_to_string(fixture("g1.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["scenarios"][1]["demand"]["b2"].as_array_mut().unwrap().pop();
    let err = parse_instance(&v.to_string(), Path::new("g1.json"), Path::new(".")).unwrap_err();
    match err {
        Error::Dimension { table, .. } => assert_eq!(table, "scenarios[s2].demand"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn validation_violations_are_aggregated() {
    let text = fs::read_to_string(fixture("g1.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["scenarios"][0]["probability"] = 0.9.into();
    v["load_techs"][0]["tiers"]["reliabilities"] = serde_json::json!([1.0, 0.2, 0.5]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, v.to_string()).unwrap();
    match load_instance(&path) {
        Err(Error::InvalidInstance(vs)) => assert!(vs.len() >= 2, "{vs:?}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(load_instance("does/not/exist.json"), Err(Error::Io { .. })));
}

#[test]
fn g1_report_tables() {
    let inst = load_instance(fixture("g1.json")).unwrap();
    let ef = solve_extensive_form(&inst, &SolverConfig::default()).unwrap();
    let plan = ef.plan.as_ref().unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_report(&ef.report, dir.path()).unwrap();

    let buildout = fs::read_to_string(dir.path().join("buildout.csv")).unwrap();
    // buses x (gen + storage + load techs) + candidate lines
    assert_eq!(buildout.lines().count() - 1, 2 * (2 + 1 + 1) + 1);

    let total = ef.report.total_cost().unwrap();
    assert!((total - ef.result.objective).abs() <= 1e-6 * total.abs());
    let costs = fs::read_to_string(dir.path().join("costs.csv")).unwrap();
    let last = costs.lines().last().unwrap();
    assert!(last.starts_with("total,all,"));
    let printed: f64 = last.rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(printed, round9(total));

    // Achieved capacity factor recomputed from the primal values.
    let probs = inst.probabilities();
    let periods = inst.periods() as f64;
    let tau = inst.period_length_h;
    assert!(!ef.report.reliability.is_empty());
    for row in &ef.report.reliability {
        let b = inst.bus_index(&row.bus).unwrap();
        let d = inst.load_index(&row.load_tech).unwrap();
        let k = row.tier - 1;
        let tech = &inst.load_techs[d];
        let x = plan.get(&Coord::BuildLoad { bus: b, load: d });
        let mut energy = 0.0;
        for (w, p) in probs.iter().enumerate() {
            for t in 0..inst.periods() {
                energy += p
                    * tau
                    * plan.get(&Coord::LoadTier {
                        bus: b,
                        load: d,
                        tier: k,
                        t,
                        w,
                    });
            }
        }
        let achieved = energy / (tech.tiers.width(k) * tech.unit_size_mw * tau * periods * x);
        assert!((achieved - row.achieved).abs() <= 1e-9, "{row:?} vs {achieved}");
        assert!(row.achieved >= row.required - 1e-6);
    }
}

#[test]
fn inflexible_tier_runs_at_full_output() {
    let mut inst = load_instance(fixture("g1.json")).unwrap();
    inst.load_techs[0].tiers = cepkit::model::TierSpec::inflexible();
    let ef = solve_extensive_form(&inst, &SolverConfig::default()).unwrap();
    for row in &ef.report.reliability {
        assert_eq!(row.required, 1.0);
        assert!(row.achieved >= 1.0 - 1e-6, "{row:?}");
    }
}

#[test]
fn zero_demand_costs_nothing() {
    let mut inst = load_instance(fixture("g1.json")).unwrap();
    for s in &mut inst.scenarios {
        for d in &mut s.demand {
            d.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let ef = solve_extensive_form(&inst, &SolverConfig::default()).unwrap();
    assert_eq!(ef.report.total_cost(), Some(0.0));
    let dir = tempfile::tempdir().unwrap();
    save_report(&ef.report, dir.path()).unwrap();
    let costs = fs::read_to_string(dir.path().join("costs.csv")).unwrap();
    assert!(costs.ends_with("total,all,0\n"), "{costs}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn canonical_text_is_a_fixed_point(seed in 0u64..10_000, g in 0usize..3) {
        let gen = [Generator::G1, Generator::G2, Generator::G3][g];
        let text = instance_to_string(&generate(gen, seed));
        let back = parse_instance(&text, Path::new("mem.json"), Path::new(".")).unwrap();
        prop_assert_eq!(instance_to_string(&back), text);
    }

    #[test]
    fn round9_is_idempotent(v in -1e12f64..1e12) {
        let r = round9(v);
        prop_assert_eq!(round9(r), r);
        prop_assert!((r - v).abs() <= 1e-8 * v.abs());
    }
}
