//! Translation of a case into MILP rows.
//!
//! Each builder covers one family of the formulation: the normalized
//! three-term objective, carrier travel logistics, module custody and power,
//! demand response with energy payback, backup generators, and the linearized
//! DistFlow network. Quadratic apparent-power ratings are replaced by
//! polygonal half-plane sets before they reach the IR. Every row carries its
//! equation-family label.

mod bigm;
mod builders;
mod polygon;
mod vars;

use thiserror::Error;

use crate::milp::{MilpModel, ModelError};
use crate::model::{normalization_bounds, CaseData, CaseError, NormBounds};

pub use bigm::BigMTable;
pub use polygon::{polygonize_quadratic, HalfPlaneSet};
pub use vars::VarIndex;

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("polygon needs an even number of sides >= 4, got {0}")]
    PolygonSides(usize),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("carrier `{carrier}` has no travel time between sites {from} and {to}")]
    MissingTravel {
        carrier: String,
        from: String,
        to: String,
    },
}

/// Everything the rest of the pipeline needs about a built model.
pub struct BuiltModel {
    pub model: MilpModel,
    pub vx: VarIndex,
    pub bounds: NormBounds,
    pub big_m: BigMTable,
}

/// Build the full two-stage model for a case: register every variable family,
/// then run the constraint builders in dependency order.
pub fn build_model(case: &CaseData) -> Result<BuiltModel, FormulationError> {
    let bounds = normalization_bounds(case)?;
    let big_m = BigMTable::for_case(case);
    let mut model = MilpModel::new();
    let vx = vars::register_variables(&mut model, case)?;
    builders::build_objective(&mut model, case, &vx, &bounds, &big_m)?;
    builders::build_carrier_logistics(&mut model, case, &vx, &big_m)?;
    builders::build_module_logistics(&mut model, case, &vx)?;
    builders::build_module_power(&mut model, case, &vx)?;
    builders::build_dr(&mut model, case, &vx, &big_m)?;
    builders::build_payback(&mut model, case, &vx, &big_m)?;
    builders::build_ffg(&mut model, case, &vx)?;
    builders::build_network(&mut model, case, &vx, &big_m)?;
    Ok(BuiltModel {
        model,
        vx,
        bounds,
        big_m,
    })
}
