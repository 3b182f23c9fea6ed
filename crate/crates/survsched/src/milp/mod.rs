//! MILP intermediate representation, standard-form extraction, LP export and
//! solve backends.

mod backend;
mod external;
mod highs_backend;
mod ir;
mod lp_format;
mod standard;

pub use backend::{
    Solution, SolveBackend, SolveError, SolveOptions, SolveStats, SolveStatus, FEAS_HARD_TOL,
    FEAS_WARN_TOL,
};
pub use external::ExternalLpBackend;
pub use highs_backend::HighsBackend;
pub use ir::{
    LinearConstraint, MilpModel, ModelError, Objective, Sense, Stage, VarDef, VarId, VarKind,
};
pub use lp_format::{export_lp, lp_string};
pub use standard::{extract_standard_form, StandardForm, StdRow};
