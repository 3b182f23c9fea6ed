//! HiGHS adapter for the solve contract.

use std::time::Instant;

use highs::{HighsModelStatus, RowProblem, Sense as HighsSense};

use super::backend::{Solution, SolveBackend, SolveError, SolveOptions, SolveStats, SolveStatus};
use super::ir::{MilpModel, Sense, VarKind};

#[derive(Debug, Default, Clone, Copy)]
pub struct HighsBackend;

impl SolveBackend for HighsBackend {
    fn name(&self) -> &str {
        "highs"
    }

    fn solve_raw(&self, model: &MilpModel, opts: &SolveOptions) -> Result<Solution, SolveError> {
        let started = Instant::now();
        let mut pb = RowProblem::default();
        let mut cols = Vec::with_capacity(model.num_vars());
        let mut has_integers = false;
        for def in model.vars() {
            let col = match def.kind {
                VarKind::Binary => {
                    has_integers = true;
                    pb.add_integer_column(0.0, def.lower..=def.upper)
                }
                VarKind::Continuous => pb.add_column(0.0, def.lower..=def.upper),
            };
            cols.push(col);
        }
        for (var, coeff) in &model.objective.terms {
            pb.change_column_cost(cols[var.index()], *coeff);
        }
        for con in model.constraints() {
            let factors: Vec<_> = con
                .terms
                .iter()
                .map(|(v, c)| (cols[v.index()], *c))
                .collect();
            match con.sense {
                Sense::Le => pb.add_row(..=con.rhs, factors),
                Sense::Ge => pb.add_row(con.rhs.., factors),
                Sense::Eq => pb.add_row(con.rhs..=con.rhs, factors),
            };
        }

        let mut highs_model = pb.optimise(HighsSense::Minimise);
        highs_model.make_quiet();
        highs_model.set_option("threads", opts.threads as i32);
        highs_model.set_option("mip_rel_gap", opts.mip_gap);
        // Keep the LP/MIP feasibility tolerances a notch tighter than the
        // IR re-check so a clean solve never trips it.
        highs_model.set_option("primal_feasibility_tolerance", 1e-8);
        highs_model.set_option("mip_feasibility_tolerance", 1e-7);
        if let Some(limit) = opts.time_limit {
            highs_model.set_option("time_limit", limit.as_secs_f64());
        }

        let solved = highs_model
            .try_solve()
            .map_err(|st| SolveError::SolverInternal {
                backend: "highs".into(),
                message: format!("{st:?}"),
            })?;

        let wall = started.elapsed();
        let raw_status = solved.status();
        let status = match raw_status {
            HighsModelStatus::Optimal => SolveStatus::Optimal,
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => {
                SolveStatus::Unbounded
            }
            HighsModelStatus::ReachedTimeLimit => SolveStatus::TimeLimit,
            other => {
                return Err(SolveError::SolverInternal {
                    backend: "highs".into(),
                    message: format!("unexpected model status {other:?}"),
                })
            }
        };

        let mip_gap = if has_integers {
            let g = solved.mip_gap();
            g.is_finite().then_some(g)
        } else {
            None
        };
        let values = match status {
            SolveStatus::Optimal => {
                let sol = solved.get_solution();
                Some(sol.columns().to_vec())
            }
            SolveStatus::TimeLimit => {
                (solved.primal_solution_status() == highs::HighsSolutionStatus::Feasible)
                    .then(|| solved.get_solution().columns().to_vec())
            }
            _ => None,
        };
        let objective = match &values {
            Some(vals) => model.objective_value(|v| vals[v.index()]),
            None => f64::NAN,
        };

        Ok(Solution {
            status,
            objective,
            values,
            stats: SolveStats { wall, mip_gap },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::ir::{LinearConstraint, Stage};

    #[test]
    fn min_x_at_least_three() {
        let mut m = MilpModel::new();
        let x = m
            .add_var("x", VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY, Stage::Second)
            .unwrap();
        m.add_constraint(LinearConstraint::new([(x, 1.0)], Sense::Ge, 3.0, "toy"))
            .unwrap();
        m.add_objective_term(x, 1.0);
        let sol = HighsBackend.solve(&m, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-9);
        assert!((sol.value(x) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_pair_detected() {
        let mut m = MilpModel::new();
        let x = m
            .add_var("x", VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY, Stage::Second)
            .unwrap();
        m.add_constraint(LinearConstraint::new([(x, 1.0)], Sense::Le, 0.0, "a"))
            .unwrap();
        m.add_constraint(LinearConstraint::new([(x, 1.0)], Sense::Ge, 1.0, "b"))
            .unwrap();
        let sol = HighsBackend.solve(&m, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        assert!(sol.values.is_none());
    }

    #[test]
    fn small_milp_with_binaries() {
        // max x1 + x2 over binaries with x1 + x2 <= 1 ~ min -(x1+x2)
        let mut m = MilpModel::new();
        let a = m.add_binary("a", Stage::First).unwrap();
        let b = m.add_binary("b", Stage::First).unwrap();
        m.add_constraint(LinearConstraint::new([(a, 1.0), (b, 1.0)], Sense::Le, 1.0, "c"))
            .unwrap();
        m.add_objective_term(a, -1.0);
        m.add_objective_term(b, -2.0);
        let sol = HighsBackend.solve(&m, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective + 2.0).abs() < 1e-9);
        assert!((sol.value(b) - 1.0).abs() < 1e-9);
    }
}
