//! Solve backend contract and the built-in feasibility re-check.
//!
//! A backend is one function: model + options in, [`Solution`] out. Every
//! solution a backend reports as optimal is re-checked row by row against the
//! IR before it is handed to callers; a violation beyond tolerance is a hard
//! error, not a warning, because it means the backend and the IR disagree
//! about what problem was solved.

use std::time::Duration;

use thiserror::Error;

use super::ir::{MilpModel, VarId};

/// Relative violation accepted from a backend (matches common MILP
/// feasibility tolerances).
pub const FEAS_WARN_TOL: f64 = 1e-6;
/// Relative violation at which a reported-optimal solution is rejected.
pub const FEAS_HARD_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Hit the time limit; values are present when an incumbent exists.
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct SolveStats {
    pub wall: Duration,
    pub mip_gap: Option<f64>,
}

/// Result of a backend run. `values` is indexed by [`VarId`] and present only
/// for optimal solves and time-limited solves with an incumbent.
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: f64,
    pub values: Option<Vec<f64>>,
    pub stats: SolveStats,
}

impl Solution {
    pub fn value(&self, var: VarId) -> f64 {
        self.values
            .as_ref()
            .map(|v| v[var.index()])
            .unwrap_or(f64::NAN)
    }

    pub fn assignment(&self) -> impl Fn(VarId) -> f64 + Copy + '_ {
        let values = self.values.as_deref().unwrap_or(&[]);
        move |v: VarId| values[v.index()]
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub time_limit: Option<Duration>,
    /// Relative MIP gap target.
    pub mip_gap: f64,
    pub threads: u32,
    /// Skip the row-by-row feasibility re-check (used for dual models whose
    /// scaling the caller verifies itself).
    pub skip_recheck: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            time_limit: None,
            mip_gap: 1e-9,
            threads: 1,
            skip_recheck: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("backend `{0}` unavailable: {1}")]
    BackendUnavailable(String, String),
    #[error("solver error from `{backend}`: {message}")]
    SolverInternal { backend: String, message: String },
    #[error(
        "solver/IR mismatch: `{backend}` reported optimal but row {row} (`{label}`) is violated by {violation:.3e} (relative)"
    )]
    SolutionMismatch {
        backend: String,
        row: usize,
        label: String,
        violation: f64,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// The pluggable solve contract.
pub trait SolveBackend {
    fn name(&self) -> &str;
    fn solve_raw(&self, model: &MilpModel, opts: &SolveOptions) -> Result<Solution, SolveError>;

    /// Solve and, for optimal results, re-check every stored constraint
    /// against the returned assignment.
    fn solve(&self, model: &MilpModel, opts: &SolveOptions) -> Result<Solution, SolveError> {
        let sol = self.solve_raw(model, opts)?;
        if !opts.skip_recheck {
            if let (SolveStatus::Optimal, Some(values)) = (sol.status, sol.values.as_ref()) {
                let (viol, row) = model.max_violation(|v| values[v.index()]);
                if viol > FEAS_HARD_TOL {
                    let row = row.unwrap_or(0);
                    return Err(SolveError::SolutionMismatch {
                        backend: self.name().to_string(),
                        row,
                        label: model.constraints()[row].label.clone(),
                        violation: viol,
                    });
                }
            }
        }
        Ok(sol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::ir::{LinearConstraint, Sense, Stage, VarKind};

    struct LyingBackend;

    impl SolveBackend for LyingBackend {
        fn name(&self) -> &str {
            "liar"
        }
        fn solve_raw(&self, model: &MilpModel, _: &SolveOptions) -> Result<Solution, SolveError> {
            Ok(Solution {
                status: SolveStatus::Optimal,
                objective: 0.0,
                values: Some(vec![0.0; model.num_vars()]),
                stats: SolveStats {
                    wall: Duration::ZERO,
                    mip_gap: None,
                },
            })
        }
    }

    #[test]
    fn recheck_catches_violated_optimum() {
        let mut m = MilpModel::new();
        let x = m
            .add_var("x", VarKind::Continuous, 0.0, 10.0, Stage::First)
            .unwrap();
        m.add_constraint(LinearConstraint::new([(x, 1.0)], Sense::Ge, 3.0, "toy"))
            .unwrap();
        let err = LyingBackend.solve(&m, &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, SolveError::SolutionMismatch { .. }));
    }
}
