//! Problem instances: domain types, case ingestion and the objective
//! normalization bounds.

mod schema;
mod types;

use thiserror::Error;

pub use schema::{load_case, parse_case, save_case, to_raw, RawCase, REFERENCE_KAPPA};
pub use types::*;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("case file does not parse: {0}")]
    Parse(String),
    #[error("schema violation at {location}: {message}")]
    Schema { location: String, message: String },
    #[error("dangling reference at {location}: `{key}` does not resolve")]
    DanglingRef { location: String, key: String },
    #[error("branch set is not a radial tree: {0}")]
    NonRadial(String),
    #[error("carrier `{carrier}` has no travel time between {from} and {to}")]
    MissingTravel {
        carrier: String,
        from: String,
        to: String,
    },
    #[error("degenerate normalization bound: {0}")]
    DegenerateBound(String),
}

/// Upper estimates used to normalize the three objective terms.
///
/// Fuel assumes every carrier travels and every generator runs at full power
/// for the whole horizon; the DR bound takes the maximum reduction ratio
/// against the forecast; the abandonment bound weighs the entire forecast
/// demand. Each must come out strictly positive for the objective to be well
/// defined.
pub fn normalization_bounds(case: &CaseData) -> Result<NormBounds, CaseError> {
    let dt = case.delta_t();
    let spans = case.spans() as f64;
    let travel_fuel: f64 = case.carriers.iter().map(|c| c.fuel_per_span).sum();
    let gen_fuel: f64 = case.ffgs.iter().map(|f| f.fuel_per_mwh * f.p_max).sum();
    let fuel = spans * dt * (travel_fuel + gen_fuel);

    let mut dr = 0.0;
    for program in &case.dr_programs {
        let node = case.node(program.node);
        let demand: f64 = node.load.iter().sum();
        dr += node.weight * program.tau_max * demand * dt;
    }

    let abandon: f64 = case
        .nodes
        .iter()
        .map(|n| n.weight * n.load.iter().sum::<f64>() * dt)
        .sum();

    if !(fuel > 0.0) {
        return Err(CaseError::DegenerateBound(
            "no fuel consumer: the case has neither traveling carriers nor generators".into(),
        ));
    }
    if !(dr > 0.0) {
        return Err(CaseError::DegenerateBound(
            "no DR potential: no program, or zero weight/ratio/forecast on every DR node".into(),
        ));
    }
    if !(abandon > 0.0) {
        return Err(CaseError::DegenerateBound(
            "zero weighted forecast demand across all nodes".into(),
        ));
    }
    Ok(NormBounds { fuel, dr, abandon })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_case(loads: &[f64]) -> CaseData {
        let text = format!(
            r#"
name = "tiny"
[horizon]
delta_t_h = 1.0
spans = 2

[params]
fuel_available_l = 100.0
v_min_pu = 0.95
v_max_pu = 1.05

[[nodes]]
bus = 1
weight = 1.0
qp_ratio = 0.3
load_kw = [{l0}, {l1}]
smess_site = true
class = "residential"

[[nodes]]
bus = 2
weight = 2.0
qp_ratio = 0.3
load_kw = [{l0}, {l1}]

[[branches]]
from = 1
to = 2
r_pu = 0.01
x_pu = 0.01
s_max_kva = 1000.0

[[carriers]]
id = "carr1"
fuel_l_per_travel_h = 8.0
capacity = 1.0
start = "n1"
travel = []

[[modules]]
id = "mod1"
energy_kwh = 200.0
p_charge_max_kw = 100.0
p_discharge_max_kw = 100.0
s_rating_kva = 120.0
eff_charge = 0.95
eff_discharge = 0.95
soc_min = 0.1
soc_max = 0.9
soc_start = 0.5
start = "n1"

[[dr]]
node = 1
tau_min = 0.2
tau_max = 0.5
dur_max = 2
dur_min = 1
gap_min = 1
total_max = 2
payback_spans = 1
payback_gain = [1.0]
"#,
            l0 = loads[0],
            l1 = loads[1],
        );
        parse_case(&text).expect("tiny case parses")
    }

    #[test]
    fn minimal_case_without_dr_or_ffg_is_valid() {
        let text = r#"
[horizon]
delta_t_h = 1.0
spans = 2
[params]
fuel_available_l = 10.0
v_min_pu = 0.95
v_max_pu = 1.05
[[nodes]]
bus = 1
weight = 1.0
load_kw = [5.0, 5.0]
smess_site = true
[[nodes]]
bus = 2
weight = 1.0
load_kw = [3.0, 3.0]
[[branches]]
from = 1
to = 2
r_pu = 0.01
x_pu = 0.01
s_max_kva = 100.0
[[modules]]
id = "mod1"
energy_kwh = 20.0
p_charge_max_kw = 10.0
p_discharge_max_kw = 10.0
s_rating_kva = 12.0
eff_charge = 1.0
eff_discharge = 1.0
soc_min = 0.0
soc_max = 1.0
soc_start = 0.5
start = "n1"
"#;
        let case = parse_case(text).unwrap();
        assert_eq!(case.nodes.len(), 2);
        assert!(case.dr_programs.is_empty());
        // Degenerate for the objective, but a valid case.
        assert!(matches!(
            normalization_bounds(&case),
            Err(CaseError::DegenerateBound(_))
        ));
    }

    #[test]
    fn soc_start_outside_window_names_module_and_field() {
        let text = r#"
[horizon]
delta_t_h = 1.0
spans = 1
[params]
fuel_available_l = 10.0
v_min_pu = 0.95
v_max_pu = 1.05
[[nodes]]
bus = 1
weight = 1.0
load_kw = [5.0]
smess_site = true
[[branches]]
[[modules]]
id = "mod7"
energy_kwh = 20.0
p_charge_max_kw = 10.0
p_discharge_max_kw = 10.0
s_rating_kva = 12.0
eff_charge = 1.0
eff_discharge = 1.0
soc_min = 0.1
soc_max = 0.9
soc_start = 0.95
start = "n1"
"#
        .replace("[[branches]]\n", "");
        let err = parse_case(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("modules[mod7]"), "got: {msg}");
        assert!(msg.contains("soc_start"), "got: {msg}");
    }

    #[test]
    fn non_radial_branch_set_rejected() {
        let text = r#"
[horizon]
delta_t_h = 1.0
spans = 1
[params]
fuel_available_l = 10.0
v_min_pu = 0.95
v_max_pu = 1.05
[[nodes]]
bus = 1
weight = 1.0
load_kw = [5.0]
[[nodes]]
bus = 2
weight = 1.0
load_kw = [5.0]
[[branches]]
from = 1
to = 2
r_pu = 0.01
x_pu = 0.01
s_max_kva = 100.0
[[branches]]
from = 2
to = 1
r_pu = 0.01
x_pu = 0.01
s_max_kva = 100.0
"#;
        assert!(matches!(parse_case(text), Err(CaseError::NonRadial(_))));
    }

    #[test]
    fn non_integer_budget_rejected() {
        let text = r#"
[horizon]
delta_t_h = 1.0
spans = 1
[params]
fuel_available_l = 10.0
v_min_pu = 0.95
v_max_pu = 1.05
gamma_load_default = 1.5
[[nodes]]
bus = 1
weight = 1.0
load_kw = [5.0]
"#;
        assert!(matches!(parse_case(text), Err(CaseError::Parse(_))));
    }

    #[test]
    fn normalization_matches_reference_arithmetic() {
        // One carrier at 8 L/h plus two 200 kW generators at 0.282 L/kWh for
        // 24 spans comes to 24 * (8 + 2 * 0.282 * 200) = 2899.2 L.
        let mut case = tiny_case(&[10.0, 10.0]);
        case.horizon.spans = 24;
        for n in &mut case.nodes {
            n.load = vec![0.01; 24];
            n.dev_up = vec![0.0; 24];
            n.dev_down = vec![0.0; 24];
        }
        case.ffgs = vec![
            FfgSpec {
                id: "g1".into(),
                node: NodeId(1),
                p_max: 0.2,
                q_max: 0.2,
                s_rating: 0.25,
                fuel_per_mwh: 282.0,
            },
            FfgSpec {
                id: "g2".into(),
                node: NodeId(1),
                p_max: 0.2,
                q_max: 0.2,
                s_rating: 0.25,
                fuel_per_mwh: 282.0,
            },
        ];
        let bounds = normalization_bounds(&case).unwrap();
        assert!((bounds.fuel - 2899.2).abs() < 1e-9, "fuel = {}", bounds.fuel);
    }

    #[test]
    fn zero_forecast_load_is_degenerate() {
        let mut case = tiny_case(&[10.0, 10.0]);
        for n in &mut case.nodes {
            n.load = vec![0.0; 2];
        }
        // The DR bound collapses first (its node has no demand), which is
        // still the degenerate-bound error the contract requires.
        assert!(matches!(
            normalization_bounds(&case),
            Err(CaseError::DegenerateBound(_))
        ));
    }

    #[test]
    fn doubling_weights_scales_dr_and_abandon_only() {
        let case = tiny_case(&[10.0, 20.0]);
        let base = normalization_bounds(&case).unwrap();
        let mut doubled = case.clone();
        for n in &mut doubled.nodes {
            n.weight *= 2.0;
        }
        let bounds = normalization_bounds(&doubled).unwrap();
        assert_eq!(bounds.fuel, base.fuel);
        assert!((bounds.dr - 2.0 * base.dr).abs() < 1e-12);
        assert!((bounds.abandon - 2.0 * base.abandon).abs() < 1e-12);
    }
}
