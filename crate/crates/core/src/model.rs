//! Planning-instance domain types and structural validation.
//!
//! Everything downstream (model builders, decomposition engine, oracle) assumes
//! an instance that passed [`validate_instance`]. Instances are immutable once
//! built and are shared by reference across worker threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Tolerance on the sum of scenario probabilities.
pub const PROBABILITY_SUM_TOL: f64 = 1e-9;

/// Default number of days a representative horizon is scaled to.
pub const DEFAULT_ANNUALIZATION_DAYS: f64 = 365.0;

/// Default angle spread used to size the big-M of candidate lines.
pub const DEFAULT_BIG_M_ANGLE_SPREAD: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    /// Existing generation capacity per tech, MW.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub existing_gen: BTreeMap<String, f64>,
    /// Existing storage power capacity per tech, MW.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub existing_storage: BTreeMap<String, f64>,
    /// Maximum total (existing + new) generation per tech, MW. Absent means no expansion.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub build_limit_gen: BTreeMap<String, f64>,
    /// Maximum total storage power per tech, MW. Absent means no expansion.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub build_limit_storage: BTreeMap<String, f64>,
    /// Maximum number of large-load units per tech. Absent means zero.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub build_limit_load: BTreeMap<String, u32>,
}

impl Bus {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            existing_gen: BTreeMap::new(),
            existing_storage: BTreeMap::new(),
            build_limit_gen: BTreeMap::new(),
            build_limit_storage: BTreeMap::new(),
            build_limit_load: BTreeMap::new(),
        }
    }

    pub fn existing_gen(&self, tech: &str) -> f64 {
        self.existing_gen.get(tech).copied().unwrap_or(0.0)
    }

    pub fn existing_storage(&self, tech: &str) -> f64 {
        self.existing_storage.get(tech).copied().unwrap_or(0.0)
    }

    /// Total generation allowed at this bus; defaults to the existing capacity.
    pub fn gen_limit(&self, tech: &str) -> f64 {
        self.build_limit_gen
            .get(tech)
            .copied()
            .unwrap_or_else(|| self.existing_gen(tech))
    }

    pub fn storage_limit(&self, tech: &str) -> f64 {
        self.build_limit_storage
            .get(tech)
            .copied()
            .unwrap_or_else(|| self.existing_storage(tech))
    }

    pub fn load_limit(&self, tech: &str) -> u32 {
        self.build_limit_load.get(tech).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrality {
    IntegerUnits,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenTech {
    pub id: String,
    pub integrality: Integrality,
    /// MW per unit; required for integer-unit techs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_size_mw: Option<f64>,
    /// $/MW-year.
    pub fixed_cost: f64,
    /// $/MWh.
    pub variable_cost: f64,
    /// tCO2/MWh.
    #[serde(default)]
    pub emission_factor: f64,
}

impl GenTech {
    /// MW represented by one unit of the investment variable.
    pub fn unit_mw(&self) -> f64 {
        match self.integrality {
            Integrality::IntegerUnits => self.unit_size_mw.unwrap_or(1.0),
            Integrality::Continuous => 1.0,
        }
    }

    pub fn is_integer(&self) -> bool {
        self.integrality == Integrality::IntegerUnits
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageTech {
    pub id: String,
    /// $/MW-year.
    pub fixed_cost: f64,
    /// $/MWh discharged.
    pub variable_cost: f64,
    pub duration_h: f64,
    pub eff_charge: f64,
    pub eff_discharge: f64,
}

/// Tier breakpoints `u` (cumulative fractions of installed capacity) and the
/// expected capacity factor `phi` required of each tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierSpec {
    pub breakpoints: Vec<f64>,
    pub reliabilities: Vec<f64>,
}

impl TierSpec {
    pub fn new(breakpoints: Vec<f64>, reliabilities: Vec<f64>) -> Self {
        Self {
            breakpoints,
            reliabilities,
        }
    }

    pub fn inflexible() -> Self {
        Self::new(vec![1.0], vec![1.0])
    }

    pub fn full_flex() -> Self {
        Self::new(vec![1.0], vec![0.0])
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    /// Width `u_k - u_{k-1}` of tier `k` (zero-based), with `u_0 = 0`.
    pub fn width(&self, k: usize) -> f64 {
        let prev = if k == 0 { 0.0 } else { self.breakpoints[k - 1] };
        self.breakpoints[k] - prev
    }

    /// Pointwise-weaker comparison: same breakpoints, every `phi` no larger.
    pub fn is_relaxation_of(&self, other: &TierSpec) -> bool {
        self.breakpoints == other.breakpoints
            && self.reliabilities.len() == other.reliabilities.len()
            && self.reliabilities.iter().zip(&other.reliabilities).all(|(a, b)| a <= b)
    }

    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        let (u, phi) = (&self.breakpoints, &self.reliabilities);
        if u.is_empty() {
            out.push(Violation::new(path, "tier spec needs at least one tier"));
            return;
        }
        if u.len() != phi.len() {
            out.push(Violation::new(
                path,
                format!(
                    "breakpoints ({}) and reliabilities ({}) differ in length",
                    u.len(),
                    phi.len()
                ),
            ));
            return;
        }
        for (k, &uk) in u.iter().enumerate() {
            if !(0.0..=1.0).contains(&uk) {
                out.push(Violation::new(
                    format!("{path}.breakpoints[{k}]"),
                    format!("u must lie in [0, 1], got {uk}"),
                ));
            }
            if k > 0 && uk < u[k - 1] {
                out.push(Violation::new(
                    format!("{path}.breakpoints[{k}]"),
                    format!("u must be non-decreasing ({} then {uk})", u[k - 1]),
                ));
            }
        }
        if (u[u.len() - 1] - 1.0).abs() > 1e-12 {
            out.push(Violation::new(
                format!("{path}.breakpoints"),
                format!("last breakpoint must equal 1, got {}", u[u.len() - 1]),
            ));
        }
        for (k, &p) in phi.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                out.push(Violation::new(
                    format!("{path}.reliabilities[{k}]"),
                    format!("phi must lie in [0, 1], got {p}"),
                ));
            }
            if k > 0 && p > phi[k - 1] {
                out.push(Violation::new(
                    format!("{path}.reliabilities[{k}]"),
                    format!(
                        "phi must be non-increasing (phi non-increasing violated: tier {} = {}, tier {} = {p})",
                        k,
                        phi[k - 1],
                        k + 1
                    ),
                ));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mandate {
    pub min_units: u32,
    #[serde(default)]
    pub equality: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeLoadTech {
    pub id: String,
    pub unit_size_mw: f64,
    /// $/unit-year.
    pub fixed_cost: f64,
    /// $/MWh consumed. Negative only with an equality mandate.
    pub variable_cost: f64,
    pub tiers: TierSpec,
    /// Output per MWh consumed (e.g. tCO2 captured, expressed with its sign).
    #[serde(default)]
    pub capture_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mandate: Option<Mandate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchStatus {
    Existing,
    Candidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    /// MW per radian of angle difference.
    pub susceptance: f64,
    pub capacity_mw: f64,
    pub status: BranchStatus,
    /// $/year, candidates only.
    #[serde(default)]
    pub fixed_cost: f64,
}

impl Branch {
    pub fn is_candidate(&self) -> bool {
        self.status == BranchStatus::Candidate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub probability: f64,
    /// MW, indexed `[bus][period]`.
    pub demand: Vec<Vec<f64>>,
    /// Fraction, indexed `[bus][gen tech][period]`.
    pub availability: Vec<Vec<Vec<f64>>>,
}

impl Scenario {
    pub fn periods(&self) -> usize {
        self.demand.first().map_or(0, Vec::len)
    }
}

/// A user-authored bound on expected output:
/// `sum_w pi_w * days * tau * sum_t sum_b (q . pG + r . pD) <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedOutputPolicy {
    pub name: String,
    /// Coefficient per gen tech (e.g. tCO2/MWh).
    #[serde(default)]
    pub gen_coefficients: BTreeMap<String, f64>,
    /// Coefficient per large-load tech.
    #[serde(default)]
    pub load_coefficients: BTreeMap<String, f64>,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanningInstance {
    pub name: String,
    pub buses: Vec<Bus>,
    pub gen_techs: Vec<GenTech>,
    pub storage_techs: Vec<StorageTech>,
    pub load_techs: Vec<LargeLoadTech>,
    pub branches: Vec<Branch>,
    pub scenarios: Vec<Scenario>,
    /// Hours per period.
    pub period_length_h: f64,
    /// $/MWh of shed demand.
    pub shed_cost: f64,
    pub annualization_days: f64,
    pub policies: Vec<ExpectedOutputPolicy>,
    pub big_m_angle_spread: f64,
}

impl PlanningInstance {
    pub fn periods(&self) -> usize {
        self.scenarios.first().map_or(0, Scenario::periods)
    }

    /// Scenario probabilities renormalized to sum exactly to one.
    pub fn probabilities(&self) -> Vec<f64> {
        let total: f64 = self.scenarios.iter().map(|s| s.probability).sum();
        self.scenarios.iter().map(|s| s.probability / total).collect()
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn gen_index(&self, id: &str) -> Option<usize> {
        self.gen_techs.iter().position(|g| g.id == id)
    }

    pub fn load_index(&self, id: &str) -> Option<usize> {
        self.load_techs.iter().position(|d| d.id == id)
    }

    pub fn scenario_index(&self, id: &str) -> Option<usize> {
        self.scenarios.iter().position(|s| s.id == id)
    }

    /// Reference bus for the angle gauge: the bus with the lexicographically smallest id.
    pub fn reference_bus(&self) -> usize {
        self.buses
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.id.cmp(&b.1.id))
            .map_or(0, |(i, _)| i)
    }

    /// `(from, to)` bus positions of a branch. Panics on unresolved ids, which
    /// validation rules out.
    pub fn branch_ends(&self, l: usize) -> (usize, usize) {
        let br = &self.branches[l];
        let from = self.bus_index(&br.from_bus).expect("validated branch endpoint");
        let to = self.bus_index(&br.to_bus).expect("validated branch endpoint");
        (from, to)
    }

    /// Upper bound on the investment variable of gen tech `g` at bus `b`
    /// (units for integer techs, MW otherwise).
    pub fn gen_build_bound(&self, b: usize, g: usize) -> f64 {
        let bus = &self.buses[b];
        let tech = &self.gen_techs[g];
        let room = (bus.gen_limit(&tech.id) - bus.existing_gen(&tech.id)).max(0.0);
        if tech.is_integer() {
            (room / tech.unit_mw() + 1e-9).floor()
        } else {
            room
        }
    }

    pub fn storage_build_bound(&self, b: usize, s: usize) -> f64 {
        let bus = &self.buses[b];
        let id = &self.storage_techs[s].id;
        (bus.storage_limit(id) - bus.existing_storage(id)).max(0.0)
    }

    pub fn load_build_bound(&self, b: usize, d: usize) -> u32 {
        self.buses[b].load_limit(&self.load_techs[d].id)
    }

    /// True when a load tech runs with negative variable cost.
    pub fn negative_cost_load(&self) -> Option<&LargeLoadTech> {
        self.load_techs
            .iter()
            .find(|d| d.variable_cost < 0.0 && !d.mandate.as_ref().is_some_and(|m| m.equality))
    }
}

/// One invariant violation, addressed by a dotted path into the instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn check_unique<'a>(what: &str, ids: impl Iterator<Item = &'a str>, out: &mut Vec<Violation>) -> BTreeSet<&'a str> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            out.push(Violation::new(format!("{what}[{id}]"), format!("duplicate {what} id")));
        }
    }
    seen
}

fn nonneg(path: String, value: f64, out: &mut Vec<Violation>) {
    if !(value >= 0.0 && value.is_finite()) {
        out.push(Violation::new(path, format!("must be finite and >= 0, got {value}")));
    }
}

/// Check every structural invariant. Returns violations sorted by path; an
/// empty list means the instance is valid.
pub fn validate_instance(inst: &PlanningInstance) -> Vec<Violation> {
    let mut out = Vec::new();

    if inst.buses.is_empty() {
        out.push(Violation::new("buses", "at least one bus is required"));
    }
    if inst.scenarios.is_empty() {
        out.push(Violation::new("scenarios", "at least one scenario is required"));
    }
    for (name, value) in [
        ("period_length_h", inst.period_length_h),
        ("annualization_days", inst.annualization_days),
        ("big_m_angle_spread", inst.big_m_angle_spread),
    ] {
        if !(value > 0.0 && value.is_finite()) {
            out.push(Violation::new(name, format!("must be > 0, got {value}")));
        }
    }
    nonneg("shed_cost".into(), inst.shed_cost, &mut out);

    let bus_ids = check_unique("buses", inst.buses.iter().map(|b| b.id.as_str()), &mut out);
    let gen_ids = check_unique("gen_techs", inst.gen_techs.iter().map(|g| g.id.as_str()), &mut out);
    let sto_ids = check_unique(
        "storage_techs",
        inst.storage_techs.iter().map(|s| s.id.as_str()),
        &mut out,
    );
    let load_ids = check_unique("load_techs", inst.load_techs.iter().map(|d| d.id.as_str()), &mut out);
    check_unique("branches", inst.branches.iter().map(|l| l.id.as_str()), &mut out);
    check_unique("scenarios", inst.scenarios.iter().map(|s| s.id.as_str()), &mut out);
    check_unique("policies", inst.policies.iter().map(|p| p.name.as_str()), &mut out);

    for g in &inst.gen_techs {
        let path = format!("gen_techs[{}]", g.id);
        nonneg(format!("{path}.fixed_cost"), g.fixed_cost, &mut out);
        if !g.variable_cost.is_finite() {
            out.push(Violation::new(format!("{path}.variable_cost"), "must be finite"));
        }
        if g.is_integer() && !g.unit_size_mw.is_some_and(|u| u > 0.0 && u.is_finite()) {
            out.push(Violation::new(
                format!("{path}.unit_size_mw"),
                "integer-unit techs need a unit size > 0",
            ));
        }
    }

    for s in &inst.storage_techs {
        let path = format!("storage_techs[{}]", s.id);
        nonneg(format!("{path}.fixed_cost"), s.fixed_cost, &mut out);
        nonneg(format!("{path}.variable_cost"), s.variable_cost, &mut out);
        if !(s.duration_h > 0.0) {
            out.push(Violation::new(format!("{path}.duration_h"), "must be > 0"));
        }
        for (name, eff) in [("eff_charge", s.eff_charge), ("eff_discharge", s.eff_discharge)] {
            if !(eff > 0.0 && eff <= 1.0) {
                out.push(Violation::new(
                    format!("{path}.{name}"),
                    format!("efficiency must lie in (0, 1], got {eff}"),
                ));
            }
        }
    }

    for d in &inst.load_techs {
        let path = format!("load_techs[{}]", d.id);
        if !(d.unit_size_mw > 0.0 && d.unit_size_mw.is_finite()) {
            out.push(Violation::new(format!("{path}.unit_size_mw"), "must be > 0"));
        }
        nonneg(format!("{path}.fixed_cost"), d.fixed_cost, &mut out);
        d.tiers.check(&format!("{path}.tiers"), &mut out);
        if d.variable_cost < 0.0 && !d.mandate.as_ref().is_some_and(|m| m.equality) {
            out.push(Violation::new(
                format!("{path}.variable_cost"),
                "negative variable cost requires an equality mandate",
            ));
        }
        if let Some(m) = &d.mandate {
            let buildable: u64 = inst.buses.iter().map(|b| u64::from(b.load_limit(&d.id))).sum();
            if u64::from(m.min_units) > buildable {
                out.push(Violation::new(
                    format!("{path}.mandate.min_units"),
                    format!(
                        "mandate of {} units exceeds the {buildable} buildable across all buses",
                        m.min_units
                    ),
                ));
            }
        }
    }

    for bus in &inst.buses {
        let path = format!("buses[{}]", bus.id);
        for (field, map, catalog) in [
            ("existing_gen", &bus.existing_gen, &gen_ids),
            ("build_limit_gen", &bus.build_limit_gen, &gen_ids),
            ("existing_storage", &bus.existing_storage, &sto_ids),
            ("build_limit_storage", &bus.build_limit_storage, &sto_ids),
        ] {
            for (tech, &v) in map {
                nonneg(format!("{path}.{field}.{tech}"), v, &mut out);
                if !catalog.contains(tech.as_str()) {
                    out.push(Violation::new(
                        format!("{path}.{field}.{tech}"),
                        format!("unknown tech `{tech}`"),
                    ));
                }
            }
        }
        for tech in bus.build_limit_load.keys() {
            if !load_ids.contains(tech.as_str()) {
                out.push(Violation::new(
                    format!("{path}.build_limit_load.{tech}"),
                    format!("unknown tech `{tech}`"),
                ));
            }
        }
        for (tech, &limit) in &bus.build_limit_gen {
            if limit + 1e-9 < bus.existing_gen(tech) {
                out.push(Violation::new(
                    format!("{path}.build_limit_gen.{tech}"),
                    "build limit is below existing capacity",
                ));
            }
        }
        for (tech, &limit) in &bus.build_limit_storage {
            if limit + 1e-9 < bus.existing_storage(tech) {
                out.push(Violation::new(
                    format!("{path}.build_limit_storage.{tech}"),
                    "build limit is below existing capacity",
                ));
            }
        }
    }

    for br in &inst.branches {
        let path = format!("branches[{}]", br.id);
        if !(br.capacity_mw > 0.0 && br.capacity_mw.is_finite()) {
            out.push(Violation::new(format!("{path}.capacity_mw"), "must be > 0"));
        }
        if br.susceptance == 0.0 || !br.susceptance.is_finite() {
            out.push(Violation::new(format!("{path}.susceptance"), "must be nonzero"));
        }
        if br.from_bus == br.to_bus {
            out.push(Violation::new(path.clone(), "from_bus and to_bus must differ"));
        }
        for end in [&br.from_bus, &br.to_bus] {
            if !bus_ids.contains(end.as_str()) {
                out.push(Violation::new(path.clone(), format!("unknown bus `{end}`")));
            }
        }
        nonneg(format!("{path}.fixed_cost"), br.fixed_cost, &mut out);
    }

    let periods = inst.periods();
    let mut prob_sum = 0.0;
    for sc in &inst.scenarios {
        let path = format!("scenarios[{}]", sc.id);
        prob_sum += sc.probability;
        if !(sc.probability > 0.0 && sc.probability <= 1.0) {
            out.push(Violation::new(
                format!("{path}.probability"),
                format!("probability must lie in (0, 1], got {}", sc.probability),
            ));
        }
        if sc.demand.len() != inst.buses.len() {
            out.push(Violation::new(
                format!("{path}.demand"),
                format!("expected {} bus rows, got {}", inst.buses.len(), sc.demand.len()),
            ));
        }
        for (b, row) in sc.demand.iter().enumerate() {
            if row.len() != periods {
                out.push(Violation::new(
                    format!("{path}.demand[{b}]"),
                    format!("expected {periods} periods, got {}", row.len()),
                ));
            }
            if row.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                out.push(Violation::new(format!("{path}.demand[{b}]"), "demand must be >= 0"));
            }
        }
        if sc.availability.len() != inst.buses.len() {
            out.push(Violation::new(
                format!("{path}.availability"),
                format!("expected {} bus rows, got {}", inst.buses.len(), sc.availability.len()),
            ));
        }
        for (b, per_gen) in sc.availability.iter().enumerate() {
            if per_gen.len() != inst.gen_techs.len() {
                out.push(Violation::new(
                    format!("{path}.availability[{b}]"),
                    format!("expected {} gen techs, got {}", inst.gen_techs.len(), per_gen.len()),
                ));
            }
            for (g, series) in per_gen.iter().enumerate() {
                if series.len() != periods {
                    out.push(Violation::new(
                        format!("{path}.availability[{b}][{g}]"),
                        format!("expected {periods} periods, got {}", series.len()),
                    ));
                }
                if series.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
                    out.push(Violation::new(
                        format!("{path}.availability[{b}][{g}]"),
                        "availability must lie in [0, 1]",
                    ));
                }
            }
        }
    }
    if !inst.scenarios.is_empty() {
        if periods == 0 {
            out.push(Violation::new("scenarios", "at least one period is required"));
        }
        if (prob_sum - 1.0).abs() > PROBABILITY_SUM_TOL {
            out.push(Violation::new(
                "scenarios",
                format!("probabilities must sum to 1, got {prob_sum}"),
            ));
        }
    }

    for pol in &inst.policies {
        let path = format!("policies[{}]", pol.name);
        if !pol.threshold.is_finite() {
            out.push(Violation::new(format!("{path}.threshold"), "must be finite"));
        }
        for tech in pol.gen_coefficients.keys() {
            if !gen_ids.contains(tech.as_str()) {
                out.push(Violation::new(
                    format!("{path}.gen_coefficients.{tech}"),
                    format!("unknown gen tech `{tech}`"),
                ));
            }
        }
        for tech in pol.load_coefficients.keys() {
            if !load_ids.contains(tech.as_str()) {
                out.push(Violation::new(
                    format!("{path}.load_coefficients.{tech}"),
                    format!("unknown load tech `{tech}`"),
                ));
            }
        }
    }

    out.sort();
    out
}

/// Which expectation constraint a handle refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExpectationKind {
    /// Expected service of tier `tier` of load tech `load` at `bus`.
    TierReliability { bus: usize, load: usize, tier: usize },
    /// User policy at position `policy`.
    ExpectedOutput { policy: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExpectationConstraintSpec {
    pub handle: String,
    pub kind: ExpectationKind,
}

/// All expectation constraints of an instance: one tier-reliability constraint
/// per `(bus, load tech, tier)` where the load is buildable, followed by the user
/// policies in declaration order.
pub fn enumerate_expectation_constraints(inst: &PlanningInstance) -> Vec<ExpectationConstraintSpec> {
    let mut specs = Vec::new();
    for (b, bus) in inst.buses.iter().enumerate() {
        for (d, load) in inst.load_techs.iter().enumerate() {
            if bus.load_limit(&load.id) == 0 {
                continue;
            }
            for k in 0..load.tiers.len() {
                specs.push(ExpectationConstraintSpec {
                    handle: format!("tier:{}:{}:{}", bus.id, load.id, k + 1),
                    kind: ExpectationKind::TierReliability {
                        bus: b,
                        load: d,
                        tier: k,
                    },
                });
            }
        }
    }
    for (p, pol) in inst.policies.iter().enumerate() {
        specs.push(ExpectationConstraintSpec {
            handle: format!("policy:{}", pol.name),
            kind: ExpectationKind::ExpectedOutput { policy: p },
        });
    }
    specs
}
