//! Solver-agnostic linear / mixed-integer programs and the semantic column index.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::{Error, Result};

/// Integrality tolerance used when fixing integer columns.
pub const INTEGRALITY_TOL: f64 = 1e-6;

/// Semantic coordinate of a model column. Positions refer to the instance's
/// catalog vectors; `t` is the period and `w` the scenario position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coord {
    /// New generation at a bus (units for integer techs, MW otherwise).
    BuildGen {
        bus: usize,
        gen: usize,
    },
    /// New storage power capacity, MW.
    BuildStorage {
        bus: usize,
        storage: usize,
    },
    /// New large-load units.
    BuildLoad {
        bus: usize,
        load: usize,
    },
    /// Candidate line build decision.
    BuildLine {
        branch: usize,
    },
    Gen {
        bus: usize,
        gen: usize,
        t: usize,
        w: usize,
    },
    StorageLevel {
        bus: usize,
        storage: usize,
        t: usize,
        w: usize,
    },
    Charge {
        bus: usize,
        storage: usize,
        t: usize,
        w: usize,
    },
    Discharge {
        bus: usize,
        storage: usize,
        t: usize,
        w: usize,
    },
    LoadTier {
        bus: usize,
        load: usize,
        tier: usize,
        t: usize,
        w: usize,
    },
    Shed {
        bus: usize,
        t: usize,
        w: usize,
    },
    Flow {
        branch: usize,
        t: usize,
        w: usize,
    },
    Angle {
        bus: usize,
        t: usize,
        w: usize,
    },
    /// Slack of expectation constraint `c` in scenario `w`.
    Slack {
        c: usize,
        w: usize,
    },
}

impl Coord {
    pub fn is_first_stage(&self) -> bool {
        matches!(
            self,
            Coord::BuildGen { .. } | Coord::BuildStorage { .. } | Coord::BuildLoad { .. } | Coord::BuildLine { .. }
        )
    }

    /// Scenario position of a second-stage coordinate.
    pub fn scenario(&self) -> Option<usize> {
        match *self {
            Coord::Gen { w, .. }
            | Coord::StorageLevel { w, .. }
            | Coord::Charge { w, .. }
            | Coord::Discharge { w, .. }
            | Coord::LoadTier { w, .. }
            | Coord::Shed { w, .. }
            | Coord::Flow { w, .. }
            | Coord::Angle { w, .. }
            | Coord::Slack { w, .. } => Some(w),
            _ => None,
        }
    }
}

/// Column names used in LP files: `xG(b,g)`, `pDK(b,d,k,t,w)`, `sigma(c,w)`, ...
/// All indices are zero-based catalog positions.
impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Coord::BuildGen { bus, gen } => write!(f, "xG({bus},{gen})"),
            Coord::BuildStorage { bus, storage } => write!(f, "xS({bus},{storage})"),
            Coord::BuildLoad { bus, load } => write!(f, "xD({bus},{load})"),
            Coord::BuildLine { branch } => write!(f, "xL({branch})"),
            Coord::Gen { bus, gen, t, w } => write!(f, "pG({bus},{gen},{t},{w})"),
            Coord::StorageLevel { bus, storage, t, w } => write!(f, "pS({bus},{storage},{t},{w})"),
            Coord::Charge { bus, storage, t, w } => write!(f, "pSch({bus},{storage},{t},{w})"),
            Coord::Discharge { bus, storage, t, w } => write!(f, "pSdch({bus},{storage},{t},{w})"),
            Coord::LoadTier { bus, load, tier, t, w } => {
                write!(f, "pDK({bus},{load},{tier},{t},{w})")
            }
            Coord::Shed { bus, t, w } => write!(f, "pSh({bus},{t},{w})"),
            Coord::Flow { branch, t, w } => write!(f, "f({branch},{t},{w})"),
            Coord::Angle { bus, t, w } => write!(f, "theta({bus},{t},{w})"),
            Coord::Slack { c, w } => write!(f, "sigma({c},{w})"),
        }
    }
}

/// Bidirectional map between columns and semantic coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariableIndex {
    forward: HashMap<Coord, usize>,
    reverse: Vec<Option<Coord>>,
}

impl VariableIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register `coord` at `column`. Panics if either side is already mapped.
    pub fn insert(&mut self, coord: Coord, column: usize) {
        assert!(
            self.forward.insert(coord, column).is_none(),
            "coordinate {coord} mapped twice"
        );
        if self.reverse.len() <= column {
            self.reverse.resize(column + 1, None);
        }
        assert!(self.reverse[column].is_none(), "column {column} mapped twice");
        self.reverse[column] = Some(coord);
    }

    pub fn column(&self, coord: &Coord) -> Option<usize> {
        self.forward.get(coord).copied()
    }

    pub fn coord(&self, column: usize) -> Option<Coord> {
        self.reverse.get(column).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Mapped `(coord, column)` pairs in column order.
    pub fn iter(&self) -> impl Iterator<Item = (Coord, usize)> + '_ {
        self.reverse
            .iter()
            .enumerate()
            .filter_map(|(col, c)| c.map(|c| (c, col)))
    }

    /// First-stage coordinates in column order.
    pub fn first_stage(&self) -> Vec<(Coord, usize)> {
        self.iter().filter(|(c, _)| c.is_first_stage()).collect()
    }

    /// Value of `coord` in a primal vector, zero when the coordinate is absent.
    pub fn value(&self, primal: &[f64], coord: &Coord) -> f64 {
        self.column(coord).map_or(0.0, |c| primal[c])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

impl RowSense {
    pub fn symbol(self) -> &'static str {
        match self {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Sorted by column, no duplicates, no explicit zeros.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(c, a)| a * x[c]).sum()
    }

    /// Amount by which `x` violates this row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            RowSense::Le => (act - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - act).max(0.0),
            RowSense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// Minimization objective `linear . x + sum_j quadratic_j x_j^2 + offset`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Objective {
    pub linear: Vec<f64>,
    /// Diagonal quadratic terms `(column, q)` meaning `q * x^2`; sorted by column.
    pub quadratic: Vec<(usize, f64)>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CanonicalModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Objective,
}

impl CanonicalModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_cols(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_integer(&self) -> usize {
        self.variables.iter().filter(|v| v.integer).count()
    }

    pub fn is_mip(&self) -> bool {
        self.variables.iter().any(|v| v.integer)
    }

    pub fn has_quadratic(&self) -> bool {
        self.objective.quadratic.iter().any(|&(_, q)| q != 0.0)
    }

    pub fn add_variable(&mut self, name: impl Into<String>, lower: f64, upper: f64, integer: bool, cost: f64) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            integer,
        });
        self.objective.linear.push(cost);
        self.variables.len() - 1
    }

    /// Append a row; coefficients are merged per column, sorted, and zeros dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: impl IntoIterator<Item = (usize, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> usize {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (c, a) in coeffs {
            *merged.entry(c).or_insert(0.0) += a;
        }
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs: merged.into_iter().filter(|&(_, a)| a != 0.0).collect(),
            sense,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn add_quadratic(&mut self, column: usize, q: f64) {
        match self.objective.quadratic.binary_search_by_key(&column, |&(c, _)| c) {
            Ok(pos) => self.objective.quadratic[pos].1 += q,
            Err(pos) => self.objective.quadratic.insert(pos, (column, q)),
        }
    }

    /// Objective value of a primal vector.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.objective.linear.iter().zip(x).map(|(c, v)| c * v).sum();
        let quad: f64 = self.objective.quadratic.iter().map(|&(c, q)| q * x[c] * x[c]).sum();
        lin + quad + self.objective.offset
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(x)
            .map(|(v, &xv)| (v.lower - xv).max(xv - v.upper).max(0.0))
            .fold(0.0, f64::max);
        let rows = self.constraints.iter().map(|r| r.violation(x)).fold(0.0, f64::max);
        bounds.max(rows)
    }

    /// Check structural invariants: column references in range, `lower <= upper`.
    pub fn check(&self) -> std::result::Result<(), String> {
        let n = self.num_cols();
        if self.objective.linear.len() != n {
            return Err(format!(
                "objective has {} entries for {n} columns",
                self.objective.linear.len()
            ));
        }
        for (j, v) in self.variables.iter().enumerate() {
            if v.lower > v.upper || v.lower.is_nan() || v.upper.is_nan() {
                return Err(format!("column {j} ({}) has lower > upper", v.name));
            }
        }
        for row in &self.constraints {
            if let Some(&(c, _)) = row.coeffs.iter().find(|&&(c, _)| c >= n) {
                return Err(format!("row {} references column {c}", row.name));
            }
        }
        if let Some(&(c, _)) = self.objective.quadratic.iter().find(|&&(c, _)| c >= n) {
            return Err(format!("quadratic term references column {c}"));
        }
        Ok(())
    }
}

/// Copy of `model` with each assigned column fixed (`lower = upper = value`).
pub fn fix_variables(model: &CanonicalModel, assignments: &BTreeMap<usize, f64>) -> Result<CanonicalModel> {
    let mut fixed = model.clone();
    for (&col, &value) in assignments {
        let var = fixed.variables.get_mut(col).ok_or_else(|| Error::ValueOutOfBounds {
            column: col,
            name: "<missing>".into(),
            value,
            lower: f64::NAN,
            upper: f64::NAN,
        })?;
        if var.integer && (value - value.round()).abs() > INTEGRALITY_TOL {
            return Err(Error::NonIntegralValue {
                column: col,
                name: var.name.clone(),
                value,
            });
        }
        let value = if var.integer { value.round() } else { value };
        if value < var.lower - INTEGRALITY_TOL || value > var.upper + INTEGRALITY_TOL {
            return Err(Error::ValueOutOfBounds {
                column: col,
                name: var.name.clone(),
                value,
                lower: var.lower,
                upper: var.upper,
            });
        }
        let value = value.clamp(var.lower, var.upper);
        var.lower = value;
        var.upper = value;
    }
    Ok(fixed)
}

/// Copy of `model` with every integrality flag cleared.
pub fn relax_integrality(model: &CanonicalModel) -> CanonicalModel {
    let mut relaxed = model.clone();
    for v in &mut relaxed.variables {
        v.integer = false;
    }
    relaxed
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    FeasibleWithGap,
    Infeasible,
    Unbounded,
    LimitReached,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleWithGap)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleWithGap => "feasible-with-gap",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::LimitReached => "limit-reached",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// Relative MIP gap, for integer models.
    pub mip_gap: Option<f64>,
    /// Proven lower bound on the optimum (equal to `objective` for LP optima).
    pub dual_bound: Option<f64>,
    /// Row duals, LP solves only.
    pub duals: Option<Vec<f64>>,
    pub wall_time_s: f64,
}

impl SolveResult {
    pub fn no_solution(status: SolveStatus, wall_time_s: f64) -> Self {
        Self {
            status,
            objective: f64::NAN,
            primal: Vec::new(),
            mip_gap: None,
            dual_bound: None,
            duals: None,
            wall_time_s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> CanonicalModel {
        let mut m = CanonicalModel::new();
        let x = m.add_variable("x", 0.0, 10.0, true, 1.0);
        let y = m.add_variable("y", 0.0, f64::INFINITY, false, 2.0);
        let z = m.add_variable("z", -1.0, 1.0, true, 0.0);
        m.add_constraint("r", [(x, 1.0), (y, 1.0), (z, 0.0)], RowSense::Ge, 2.5);
        m
    }

    #[test]
    fn add_constraint_merges_and_drops_zeros() {
        let mut m = toy();
        let r = m.add_constraint("dup", [(1, 1.0), (0, 2.0), (1, 3.0), (2, 0.0)], RowSense::Le, 1.0);
        assert_eq!(m.constraints[r].coeffs, vec![(0, 2.0), (1, 4.0)]);
        assert_eq!(m.constraints[0].coeffs, vec![(0, 1.0), (1, 1.0)]);
    }

    #[test]
    fn relax_clears_integrality_only() {
        let m = toy();
        assert_eq!(m.num_integer(), 2);
        let r = relax_integrality(&m);
        assert_eq!(r.num_integer(), 0);
        assert_eq!(r.constraints, m.constraints);
        assert_eq!(relax_integrality(&r), r);
    }

    #[test]
    fn fix_rejects_fractional_integer() {
        let m = toy();
        let err = fix_variables(&m, &BTreeMap::from([(0, 2.5)])).unwrap_err();
        assert!(matches!(err, Error::NonIntegralValue { column: 0, .. }));
        let err = fix_variables(&m, &BTreeMap::from([(0, 11.0)])).unwrap_err();
        assert!(matches!(err, Error::ValueOutOfBounds { column: 0, .. }));
    }

    #[test]
    fn fix_leaves_original_untouched() {
        let m = toy();
        let f = fix_variables(&m, &BTreeMap::from([(0, 3.0), (1, 0.5)])).unwrap();
        assert_eq!(f.variables[0].lower, 3.0);
        assert_eq!(f.variables[0].upper, 3.0);
        assert_eq!(f.variables[1].upper, 0.5);
        assert_eq!(m, toy());
    }

    #[test]
    fn index_round_trip() {
        let mut idx = VariableIndex::new();
        let a = Coord::Gen {
            bus: 0,
            gen: 1,
            t: 2,
            w: 3,
        };
        let b = Coord::BuildLine { branch: 4 };
        idx.insert(a, 0);
        idx.insert(b, 5);
        assert_eq!(idx.column(&a), Some(0));
        assert_eq!(idx.coord(5), Some(b));
        assert_eq!(idx.coord(3), None);
        assert_eq!(idx.first_stage(), vec![(b, 5)]);
        assert_eq!(a.to_string(), "pG(0,1,2,3)");
    }

    #[test]
    #[should_panic(expected = "mapped twice")]
    fn index_rejects_duplicates() {
        let mut idx = VariableIndex::new();
        idx.insert(Coord::BuildLine { branch: 0 }, 0);
        idx.insert(Coord::BuildLine { branch: 0 }, 1);
    }

    proptest! {
        #[test]
        fn fix_and_relax_commute(values in proptest::collection::vec(0u8..=10, 0..=3)) {
            let m = toy();
            let assignments: BTreeMap<usize, f64> = values
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != 2)
                .map(|(j, &v)| (j, f64::from(v)))
                .collect();
            let a = relax_integrality(&fix_variables(&m, &assignments).unwrap());
            let b = fix_variables(&relax_integrality(&m), &assignments).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
