use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use cepkit::io::{load_instance, save_instance};
use cepkit::model::{Mandate, TierSpec};
use cepkit::report::Method;
use cepkit_cli::{
    cmd_solve, cmd_validate, compare_flexibility, FlexVariant, RunManifest, EXIT_INVALID, EXIT_IO, EXIT_LIMIT, EXIT_OK,
};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn validate(path: &Path) -> (i32, String) {
    let mut out = Vec::new();
    let code = cmd_validate(path, &mut out);
    (code, String::from_utf8(out).unwrap())
}

#[test]
fn validate_exit_codes() {
    assert_eq!(validate(&fixture("g1.json")), (EXIT_OK, String::new()));
    let (code, text) = validate(&fixture("invalid-phi-order.json"));
    assert_eq!(code, EXIT_INVALID);
    assert_eq!(text.lines().count(), 1, "{text}");
    assert!(
        text.contains("dac") && text.contains("tier 2") && text.contains("tier 3"),
        "{text}"
    );
    assert_eq!(validate(Path::new("no/such/instance.json")).0, EXIT_IO);
}

fn summary_value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .map(|v| v.trim().to_string())
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
}

#[test]
fn ef_solve_writes_consistent_reports() {
    let dir = tempfile::tempdir().unwrap();
    let m = RunManifest::new(fixture("g1.json"), Method::Ef, dir.path());
    let mut out = Vec::new();
    assert_eq!(cmd_solve(&m, &mut out), EXIT_OK);
    let text = String::from_utf8(out).unwrap();
    assert_eq!(summary_value(&text, "status"), "optimal");
    let costs = fs::read_to_string(dir.path().join("costs.csv")).unwrap();
    let total = costs.lines().last().unwrap().rsplit(',').next().unwrap().to_string();
    assert_eq!(summary_value(&text, "objective"), total);
    for f in cepkit::io::REPORT_FILES {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn pha_solve_reports_its_trace_gap() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = RunManifest::new(fixture("g1.json"), Method::Pha, dir.path());
    m.pha.gap_tol = 0.05;
    m.pha.max_iters = 40;
    let mut out = Vec::new();
    let code = cmd_solve(&m, &mut out);
    assert!(code == EXIT_OK || code == EXIT_LIMIT, "exit {code}");
    let text = String::from_utf8(out).unwrap();
    assert_ne!(summary_value(&text, "status"), "optimal");
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let last: Vec<&str> = trace.lines().last().unwrap().split(',').collect();
    let (lb, ub): (f64, f64) = (last[3].parse().unwrap(), last[4].parse().unwrap());
    let gap: f64 = summary_value(&text, "gap").parse().unwrap();
    let expected = (ub - lb) / ub.abs().max(1.0);
    assert!(
        (gap - expected).abs() <= 1e-8 * expected.abs().max(1.0),
        "{gap} vs {expected}"
    );
}

#[test]
fn unbuildable_mandate_fails_validation_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let mut inst = load_instance(fixture("g2.json")).unwrap();
    let d = inst.load_index("datacenter").unwrap();
    inst.load_techs[d].mandate = Some(Mandate {
        min_units: 5,
        equality: true,
    });
    let path = dir.path().join("mandate.json");
    save_instance(&inst, &path).unwrap();
    let m = RunManifest::new(&path, Method::Ef, dir.path().join("out"));
    let mut out = Vec::new();
    assert_eq!(cmd_solve(&m, &mut out), EXIT_INVALID);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn single_variant_comparison_has_no_warnings() {
    let inst = load_instance(fixture("g1.json")).unwrap();
    let variants = [FlexVariant {
        name: "mid".into(),
        tiers: inst.load_techs[0].tiers.clone(),
    }];
    let t = compare_flexibility(&inst, "dac", &variants, &Default::default()).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert!(t.warnings.is_empty() && t.notes.is_empty());
}

#[test]
fn incomparable_variants_get_a_note() {
    let inst = load_instance(fixture("g1.json")).unwrap();
    let variants = [
        FlexVariant {
            name: "mid".into(),
            tiers: inst.load_techs[0].tiers.clone(),
        },
        FlexVariant {
            name: "full".into(),
            tiers: TierSpec::full_flex(),
        },
    ];
    let t = compare_flexibility(&inst, "dac", &variants, &Default::default()).unwrap();
    assert!(t.warnings.is_empty());
    assert_eq!(t.notes.len(), 1, "{:?}", t.notes);
}

#[test]
fn relaxed_variant_costs_no_more() {
    let inst = load_instance(fixture("g1.json")).unwrap();
    let loose = FlexVariant {
        name: "loose".into(),
        tiers: TierSpec::new(vec![0.5, 0.75, 1.0], vec![1.0, 0.0, 0.0]),
    };
    let strict = FlexVariant {
        name: "strict".into(),
        tiers: TierSpec::new(vec![0.5, 0.75, 1.0], vec![1.0, 1.0, 1.0]),
    };
    let t = compare_flexibility(&inst, "dac", &[strict, loose], &Default::default()).unwrap();
    assert!(t.warnings.is_empty(), "{:?}", t.warnings);
    assert!(t.rows[0].total_cost.unwrap() >= t.rows[1].total_cost.unwrap() - 1e-6);
}

#[test]
fn binary_round_trip() {
    let bin = env!("CARGO_BIN_EXE_cepkit");
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("g3.json");
    let gen = Command::new(bin)
        .args(["generate", "--generator", "g3", "--seed", "0", "--out"])
        .arg(&inst)
        .status()
        .unwrap();
    assert!(gen.success());
    assert_eq!(fs::read(&inst).unwrap(), fs::read(fixture("g3.json")).unwrap());

    let v = Command::new(bin)
        .args(["validate", "--instance"])
        .arg(fixture("invalid-phi-order.json"))
        .output()
        .unwrap();
    assert_eq!(v.status.code(), Some(1));

    let out = dir.path().join("report");
    let s = Command::new(bin)
        .args(["solve", "--method", "ef", "--instance"])
        .arg(&inst)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(s.status.code(), Some(0), "{}", String::from_utf8_lossy(&s.stdout));
    assert!(out.join("buildout.csv").is_file());

    let c = Command::new(bin)
        .args(["compare-flexibility", "--load-tech", "dac", "--instance"])
        .arg(fixture("g1.json"))
        .args(["--variant", "inflexible=1:1", "--variant", "full=1:0"])
        .output()
        .unwrap();
    assert!(c.status.success());
    let table = String::from_utf8(c.stdout).unwrap();
    assert_eq!(table.lines().filter(|l| !l.starts_with("note")).count(), 3, "{table}");
}
