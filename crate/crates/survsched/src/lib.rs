//! Robust survivability scheduling for isolated distribution feeders.
//!
//! When a distribution feeder is cut off from its normal sources, two levers
//! remain: truck-mounted storage modules that shuttle energy in from stranded
//! external sources, and demand response that reshapes the internal load.
//! This crate builds the joint scheduling problem as a two-stage robust MILP
//! — worst-case load and renewable deviations under per-entity budgets — and
//! solves it by column-and-constraint generation.
//!
//! The pipeline, end to end:
//!
//! ```
//! use survsched::model::parse_case;
//!
//! let case = parse_case(include_str!("../../../cases/desk3.case")).unwrap();
//! assert_eq!(case.nodes.len(), 3);
//! ```
//!
//! - [`model`] loads and validates case files and owns the domain types;
//! - [`milp`] is the solver-agnostic MILP layer (variables, constraints,
//!   standard form, LP export, backends);
//! - [`formulation`] translates a case into MILP rows;
//! - [`robust`] holds the uncertainty sets, dualization and the
//!   column-and-constraint-generation loop;
//! - [`eval`] decodes schedules, evaluates them under fixed scenarios and
//!   computes the reporting metrics.

pub mod eval;
pub mod formulation;
pub mod milp;
pub mod model;
pub mod robust;
