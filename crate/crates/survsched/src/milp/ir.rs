//! Solver-agnostic MILP intermediate representation.
//!
//! A [`MilpModel`] is a flat registry of named, stage-tagged variables plus a
//! list of sparse linear constraints and a linear minimization objective.
//! Everything downstream (standard-form extraction, LP export, the solve
//! backends) works off this structure, so the builders never talk to a
//! solver directly.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Opaque handle to a registered variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

/// Which block of the two-stage decomposition a variable belongs to.
///
/// The row partition of the standard form is derived from these tags and is
/// never assigned by hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    First,
    Second,
    Uncertainty,
}

#[derive(Debug, Clone)]
pub struct VarDef {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub stage: Stage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sense::Le => write!(f, "<="),
            Sense::Eq => write!(f, "="),
            Sense::Ge => write!(f, ">="),
        }
    }
}

/// One sparse linear constraint. `label` records which equation family of the
/// formulation produced the row; it is part of the diagnostic surface.
#[derive(Debug, Clone)]
pub struct LinearConstraint {
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub label: String,
}

impl LinearConstraint {
    pub fn new(
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
        label: impl Into<String>,
    ) -> Self {
        // Zero coefficients are dropped; duplicate handles are merged.
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        for (v, c) in terms {
            if c == 0.0 {
                continue;
            }
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some((_, acc)) => *acc += c,
                None => merged.push((v, c)),
            }
        }
        merged.retain(|(_, c)| *c != 0.0);
        LinearConstraint {
            terms: merged,
            sense,
            rhs,
            label: label.into(),
        }
    }

    /// Signed violation of the row at the given assignment (0 when satisfied).
    pub fn violation(&self, value_of: impl Fn(VarId) -> f64) -> f64 {
        let lhs: f64 = self.terms.iter().map(|(v, c)| c * value_of(*v)).sum();
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Objective {
    /// Sparse minimization form; accumulated per variable.
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("variable name `{0}` already registered")]
    DuplicateName(String),
    #[error("variable `{name}`: inverted bounds [{lower}, {upper}]")]
    InvertedBounds { name: String, lower: f64, upper: f64 },
    #[error("constraint `{label}` references unregistered variable id {var:?}")]
    UnknownVariable { label: String, var: VarId },
    #[error("constraint `{label}` has no terms but is trivially infeasible (0 {sense} {rhs})")]
    VacuousInfeasible { label: String, sense: Sense, rhs: f64 },
    #[error("constraint `{0}` has an empty provenance label")]
    EmptyLabel(usize),
    #[error("objective places weight {coeff} on uncertainty variable `{name}`")]
    ObjectiveOnUncertainty { name: String, coeff: f64 },
    #[error("constraint `{label}` mixes uncertainty variables with neither first- nor second-stage variables")]
    PureUncertaintyRow { label: String },
    #[error("equality constraint `{label}` touches uncertainty variables; only inequality rows may carry them")]
    UncertainEquality { label: String },
    #[error("second-stage variable `{0}` is binary; the recourse problem must be a pure LP")]
    BinaryRecourse(String),
}

/// A mixed-integer linear program in minimization form.
#[derive(Debug, Clone, Default)]
pub struct MilpModel {
    vars: Vec<VarDef>,
    by_name: HashMap<String, VarId>,
    constraints: Vec<LinearConstraint>,
    pub objective: Objective,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
        stage: Stage,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(ModelError::DuplicateName(name));
        }
        let (lower, upper) = match kind {
            VarKind::Binary => (0.0, 1.0),
            VarKind::Continuous => (lower, upper),
        };
        if lower > upper {
            return Err(ModelError::InvertedBounds { name, lower, upper });
        }
        let id = VarId(self.vars.len() as u32);
        self.by_name.insert(name.clone(), id);
        self.vars.push(VarDef {
            name,
            kind,
            lower,
            upper,
            stage,
        });
        Ok(id)
    }

    /// Convenience for binary variables (bounds are forced to [0, 1]).
    pub fn add_binary(&mut self, name: impl Into<String>, stage: Stage) -> Result<VarId, ModelError> {
        self.add_var(name, VarKind::Binary, 0.0, 1.0, stage)
    }

    pub fn add_constraint(&mut self, con: LinearConstraint) -> Result<usize, ModelError> {
        if con.label.is_empty() {
            return Err(ModelError::EmptyLabel(self.constraints.len()));
        }
        for (v, _) in &con.terms {
            if v.index() >= self.vars.len() {
                return Err(ModelError::UnknownVariable {
                    label: con.label.clone(),
                    var: *v,
                });
            }
        }
        if con.terms.is_empty() {
            let ok = match con.sense {
                Sense::Le => 0.0 <= con.rhs,
                Sense::Ge => 0.0 >= con.rhs,
                Sense::Eq => con.rhs == 0.0,
            };
            if !ok {
                return Err(ModelError::VacuousInfeasible {
                    label: con.label,
                    sense: con.sense,
                    rhs: con.rhs,
                });
            }
        }
        self.constraints.push(con);
        Ok(self.constraints.len() - 1)
    }

    /// Add `coeff` to the objective weight of `var`.
    pub fn add_objective_term(&mut self, var: VarId, coeff: f64) {
        match self.objective.terms.iter_mut().find(|(v, _)| *v == var) {
            Some((_, acc)) => *acc += coeff,
            None => self.objective.terms.push((var, coeff)),
        }
    }

    pub fn var(&self, id: VarId) -> &VarDef {
        &self.vars[id.index()]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn vars(&self) -> &[VarDef] {
        &self.vars
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    /// Overwrite the bounds of an existing variable. Used to pin first-stage
    /// or uncertainty variables when evaluating a fixed schedule or scenario.
    pub fn fix_var(&mut self, id: VarId, value: f64) {
        let def = &mut self.vars[id.index()];
        def.lower = value;
        def.upper = value;
    }

    pub fn set_bounds(&mut self, id: VarId, lower: f64, upper: f64) {
        let def = &mut self.vars[id.index()];
        def.lower = lower;
        def.upper = upper;
    }

    /// Objective value of an assignment.
    pub fn objective_value(&self, value_of: impl Fn(VarId) -> f64) -> f64 {
        self.objective.constant
            + self
                .objective
                .terms
                .iter()
                .map(|(v, c)| c * value_of(*v))
                .sum::<f64>()
    }

    /// Row counts per provenance label, sorted by label.
    pub fn rows_per_label(&self) -> Vec<(String, usize)> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for c in &self.constraints {
            *counts.entry(c.label.as_str()).or_insert(0) += 1;
        }
        let mut out: Vec<(String, usize)> = counts
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        out.sort();
        out
    }

    /// Largest relative constraint violation of an assignment, with the index
    /// of the offending row. Violations are scaled by `1 + |rhs|` so large
    /// right-hand sides do not mask real defects.
    pub fn max_violation(&self, value_of: impl Fn(VarId) -> f64 + Copy) -> (f64, Option<usize>) {
        let mut worst = 0.0;
        let mut at = None;
        for (idx, c) in self.constraints.iter().enumerate() {
            let v = c.violation(value_of) / (1.0 + c.rhs.abs());
            if v > worst {
                worst = v;
                at = Some(idx);
            }
        }
        (worst, at)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_bounds_are_forced() {
        let mut m = MilpModel::new();
        let d = m.add_binary("delta[i=4]", Stage::First).unwrap();
        assert_eq!(m.var(d).lower, 0.0);
        assert_eq!(m.var(d).upper, 1.0);
    }

    #[test]
    fn duplicate_name_rejected() {
        let mut m = MilpModel::new();
        m.add_binary("x[j=1,i=1,t=0]", Stage::First).unwrap();
        let err = m.add_binary("x[j=1,i=1,t=0]", Stage::First).unwrap_err();
        assert!(matches!(err, ModelError::DuplicateName(_)));
    }

    #[test]
    fn inverted_bounds_rejected() {
        let mut m = MilpModel::new();
        let err = m
            .add_var("soc", VarKind::Continuous, 0.9, 0.1, Stage::Second)
            .unwrap_err();
        assert!(matches!(err, ModelError::InvertedBounds { .. }));
    }

    #[test]
    fn continuous_var_keeps_bounds() {
        let mut m = MilpModel::new();
        let s = m
            .add_var("SOC[k=1,t=3]", VarKind::Continuous, 0.1, 0.9, Stage::Second)
            .unwrap();
        assert_eq!(m.var(s).lower, 0.1);
        assert_eq!(m.var(s).upper, 0.9);
        assert_eq!(m.var_by_name("SOC[k=1,t=3]"), Some(s));
    }

    #[test]
    fn vacuous_rows() {
        let mut m = MilpModel::new();
        // 0 = 0 is accepted.
        m.add_constraint(LinearConstraint::new([], Sense::Eq, 0.0, "3a"))
            .unwrap();
        // 0 = 1 is rejected at build time.
        let err = m
            .add_constraint(LinearConstraint::new([], Sense::Eq, 1.0, "3a"))
            .unwrap_err();
        assert!(matches!(err, ModelError::VacuousInfeasible { .. }));
    }

    #[test]
    fn unknown_variable_rejected() {
        let mut m = MilpModel::new();
        let err = m
            .add_constraint(LinearConstraint::new([(VarId(7), 1.0)], Sense::Le, 0.0, "9"))
            .unwrap_err();
        assert!(matches!(err, ModelError::UnknownVariable { .. }));
    }

    #[test]
    fn zero_coefficients_dropped_and_merged() {
        let mut m = MilpModel::new();
        let x = m.add_binary("x", Stage::First).unwrap();
        let v = m.add_binary("v", Stage::First).unwrap();
        let c = LinearConstraint::new([(x, 1.0), (v, 0.0), (x, 2.0)], Sense::Eq, 1.0, "3a");
        assert_eq!(c.terms, vec![(x, 3.0)]);
        m.add_constraint(c).unwrap();
    }
}
