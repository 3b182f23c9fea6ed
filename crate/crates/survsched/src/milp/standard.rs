//! Extraction of the partitioned (y, x, u) standard form.
//!
//! Rows are classified purely by the stage tags of the variables they touch:
//! rows over first-stage variables only form the pure-y blocks, every row
//! touching a second-stage variable lands in the coupled blocks, and
//! uncertainty variables may only appear in coupled inequality rows. The
//! original sense, right-hand side, label and position of every row are kept
//! so the model can be rebuilt from the matrices without loss.

use std::collections::HashMap;

use super::ir::{LinearConstraint, MilpModel, ModelError, Sense, Stage, VarDef, VarId};

/// One sparse row in a block, split by variable stage.
#[derive(Debug, Clone)]
pub struct StdRow {
    /// Coefficients on first-stage columns (the D / A part).
    pub y: Vec<(usize, f64)>,
    /// Coefficients on second-stage columns (the E part).
    pub x: Vec<(usize, f64)>,
    /// Coefficients on uncertainty columns (the F part).
    pub u: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub label: String,
    /// Index of the originating constraint in the source model.
    pub orig: usize,
}

/// The (y, x, u)-partitioned matrix form of the two-stage model.
///
/// `pure_y` holds the rows over first-stage variables only (inequalities and
/// equalities together, distinguished by their sense); `coupled` holds every
/// row that touches second-stage variables, which is where the uncertainty
/// coefficients live. Variable bounds are not materialized into rows here —
/// they stay attached to the columns so a rebuilt model is identical to the
/// source.
#[derive(Debug, Clone)]
pub struct StandardForm {
    pub y_vars: Vec<VarId>,
    pub x_vars: Vec<VarId>,
    pub u_vars: Vec<VarId>,
    /// Definition of every column, cloned from the source model.
    pub y_defs: Vec<VarDef>,
    pub x_defs: Vec<VarDef>,
    pub u_defs: Vec<VarDef>,
    pub pure_y: Vec<StdRow>,
    pub coupled: Vec<StdRow>,
    /// Objective weight per y column (c_out).
    pub c_out: Vec<f64>,
    /// Objective weight per x column (c_in).
    pub c_in: Vec<f64>,
    pub obj_constant: f64,
    col_of: HashMap<VarId, (Stage, usize)>,
}

impl StandardForm {
    pub fn column(&self, var: VarId) -> Option<(Stage, usize)> {
        self.col_of.get(&var).copied()
    }

    pub fn num_rows(&self) -> usize {
        self.pure_y.len() + self.coupled.len()
    }

    /// Labels of coupled rows that carry uncertainty coefficients.
    pub fn labels_with_uncertainty(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .coupled
            .iter()
            .filter(|r| !r.u.is_empty())
            .map(|r| r.label.clone())
            .collect();
        labels.sort();
        labels.dedup();
        labels
    }

    /// Rebuild a model equal to the source: same variables, same rows in the
    /// same order. Used by the round-trip check and by `--dump-models`.
    pub fn rebuild_model(&self) -> Result<MilpModel, ModelError> {
        let mut m = MilpModel::new();
        let mut id_of: HashMap<VarId, VarId> = HashMap::new();
        let mut all: Vec<(&VarId, &VarDef)> = self
            .y_vars
            .iter()
            .zip(&self.y_defs)
            .chain(self.x_vars.iter().zip(&self.x_defs))
            .chain(self.u_vars.iter().zip(&self.u_defs))
            .collect();
        // Register in original id order so fresh ids coincide with old ones.
        all.sort_by_key(|(id, _)| **id);
        for (old, def) in all {
            let new = m.add_var(def.name.clone(), def.kind, def.lower, def.upper, def.stage)?;
            id_of.insert(*old, new);
        }
        let mut rows: Vec<&StdRow> = self.pure_y.iter().chain(self.coupled.iter()).collect();
        rows.sort_by_key(|r| r.orig);
        for row in rows {
            let terms = row
                .y
                .iter()
                .map(|(c, v)| (id_of[&self.y_vars[*c]], *v))
                .chain(row.x.iter().map(|(c, v)| (id_of[&self.x_vars[*c]], *v)))
                .chain(row.u.iter().map(|(c, v)| (id_of[&self.u_vars[*c]], *v)));
            m.add_constraint(LinearConstraint::new(terms, row.sense, row.rhs, row.label.clone()))?;
        }
        for (var, coeff) in &self.objective_terms() {
            m.add_objective_term(id_of[var], *coeff);
        }
        m.objective.constant = self.obj_constant;
        Ok(m)
    }

    fn objective_terms(&self) -> Vec<(VarId, f64)> {
        let mut terms = Vec::new();
        for (i, c) in self.c_out.iter().enumerate() {
            if *c != 0.0 {
                terms.push((self.y_vars[i], *c));
            }
        }
        for (i, c) in self.c_in.iter().enumerate() {
            if *c != 0.0 {
                terms.push((self.x_vars[i], *c));
            }
        }
        terms
    }
}

/// Partition a stage-tagged model into the standard form.
pub fn extract_standard_form(model: &MilpModel) -> Result<StandardForm, ModelError> {
    let mut y_vars = Vec::new();
    let mut x_vars = Vec::new();
    let mut u_vars = Vec::new();
    let mut y_defs = Vec::new();
    let mut x_defs = Vec::new();
    let mut u_defs = Vec::new();
    let mut col_of = HashMap::new();
    for (idx, def) in model.vars().iter().enumerate() {
        let id = VarId(idx as u32);
        match def.stage {
            Stage::First => {
                col_of.insert(id, (Stage::First, y_vars.len()));
                y_vars.push(id);
                y_defs.push(def.clone());
            }
            Stage::Second => {
                col_of.insert(id, (Stage::Second, x_vars.len()));
                x_vars.push(id);
                x_defs.push(def.clone());
            }
            Stage::Uncertainty => {
                col_of.insert(id, (Stage::Uncertainty, u_vars.len()));
                u_vars.push(id);
                u_defs.push(def.clone());
            }
        }
    }

    let mut c_out = vec![0.0; y_vars.len()];
    let mut c_in = vec![0.0; x_vars.len()];
    for (var, coeff) in &model.objective.terms {
        if *coeff == 0.0 {
            continue;
        }
        match col_of[var] {
            (Stage::First, c) => c_out[c] += coeff,
            (Stage::Second, c) => c_in[c] += coeff,
            (Stage::Uncertainty, _) => {
                return Err(ModelError::ObjectiveOnUncertainty {
                    name: model.var(*var).name.clone(),
                    coeff: *coeff,
                })
            }
        }
    }

    let mut pure_y = Vec::new();
    let mut coupled = Vec::new();
    for (orig, con) in model.constraints().iter().enumerate() {
        let mut row = StdRow {
            y: Vec::new(),
            x: Vec::new(),
            u: Vec::new(),
            sense: con.sense,
            rhs: con.rhs,
            label: con.label.clone(),
            orig,
        };
        for (var, coeff) in &con.terms {
            match col_of[var] {
                (Stage::First, c) => row.y.push((c, *coeff)),
                (Stage::Second, c) => row.x.push((c, *coeff)),
                (Stage::Uncertainty, c) => row.u.push((c, *coeff)),
            }
        }
        if !row.u.is_empty() {
            if row.x.is_empty() && row.y.is_empty() {
                return Err(ModelError::PureUncertaintyRow {
                    label: con.label.clone(),
                });
            }
            if con.sense == Sense::Eq {
                return Err(ModelError::UncertainEquality {
                    label: con.label.clone(),
                });
            }
        }
        if row.x.is_empty() && row.u.is_empty() {
            pure_y.push(row);
        } else {
            coupled.push(row);
        }
    }

    Ok(StandardForm {
        y_vars,
        x_vars,
        u_vars,
        y_defs,
        x_defs,
        u_defs,
        pure_y,
        coupled,
        c_out,
        c_in,
        obj_constant: model.objective.constant,
        col_of,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::ir::VarKind;

    fn toy() -> (MilpModel, VarId, VarId, VarId) {
        let mut m = MilpModel::new();
        let y = m.add_binary("y", Stage::First).unwrap();
        let x = m
            .add_var("x", VarKind::Continuous, 0.0, 10.0, Stage::Second)
            .unwrap();
        let u = m.add_binary("u", Stage::Uncertainty).unwrap();
        (m, y, x, u)
    }

    #[test]
    fn first_stage_only_model_has_empty_coupled_blocks() {
        let mut m = MilpModel::new();
        let a = m.add_binary("a", Stage::First).unwrap();
        let b = m.add_binary("b", Stage::First).unwrap();
        m.add_constraint(LinearConstraint::new([(a, 1.0), (b, 1.0)], Sense::Le, 1.0, "3a"))
            .unwrap();
        m.add_constraint(LinearConstraint::new([(a, 1.0)], Sense::Eq, 1.0, "3g"))
            .unwrap();
        let sf = extract_standard_form(&m).unwrap();
        assert!(sf.coupled.is_empty());
        assert_eq!(sf.pure_y.len(), 2);
        assert!(sf.x_vars.is_empty());
    }

    #[test]
    fn mixed_rows_land_in_coupled_blocks() {
        let (mut m, y, x, u) = toy();
        m.add_constraint(LinearConstraint::new(
            [(y, 1.0), (x, 1.0), (u, -0.5)],
            Sense::Le,
            2.0,
            "7b",
        ))
        .unwrap();
        let sf = extract_standard_form(&m).unwrap();
        assert_eq!(sf.coupled.len(), 1);
        assert_eq!(sf.labels_with_uncertainty(), vec!["7b".to_string()]);
    }

    #[test]
    fn objective_on_uncertainty_rejected() {
        let (mut m, _, _, u) = toy();
        m.add_objective_term(u, 1.0);
        assert!(matches!(
            extract_standard_form(&m),
            Err(ModelError::ObjectiveOnUncertainty { .. })
        ));
    }

    #[test]
    fn pure_uncertainty_row_rejected() {
        let (mut m, _, _, u) = toy();
        m.add_constraint(LinearConstraint::new([(u, 1.0)], Sense::Le, 1.0, "17a"))
            .unwrap();
        assert!(matches!(
            extract_standard_form(&m),
            Err(ModelError::PureUncertaintyRow { .. })
        ));
    }

    #[test]
    fn uncertain_equality_rejected() {
        let (mut m, _, x, u) = toy();
        m.add_constraint(LinearConstraint::new(
            [(x, 1.0), (u, 1.0)],
            Sense::Eq,
            1.0,
            "10a",
        ))
        .unwrap();
        assert!(matches!(
            extract_standard_form(&m),
            Err(ModelError::UncertainEquality { .. })
        ));
    }

    #[test]
    fn rebuild_reproduces_rows_in_order() {
        let (mut m, y, x, u) = toy();
        m.add_constraint(LinearConstraint::new([(y, 2.0)], Sense::Le, 1.0, "3a"))
            .unwrap();
        m.add_constraint(LinearConstraint::new(
            [(y, 1.0), (x, -1.0), (u, 0.25)],
            Sense::Ge,
            -1.0,
            "10a",
        ))
        .unwrap();
        m.add_constraint(LinearConstraint::new([(x, 1.0)], Sense::Eq, 3.0, "13"))
            .unwrap();
        m.add_objective_term(y, 0.5);
        m.add_objective_term(x, 1.5);
        let sf = extract_standard_form(&m).unwrap();
        let rebuilt = sf.rebuild_model().unwrap();
        assert_eq!(rebuilt.num_vars(), m.num_vars());
        assert_eq!(rebuilt.constraints().len(), m.constraints().len());
        for (a, b) in m.constraints().iter().zip(rebuilt.constraints()) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.sense, b.sense);
            assert_eq!(a.rhs, b.rhs);
            assert_eq!(a.terms, b.terms);
        }
    }
}
