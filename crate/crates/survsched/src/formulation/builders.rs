//! Constraint builders, one per family of the formulation. Each row carries
//! the label of the equation family it realizes.

use crate::milp::{LinearConstraint, MilpModel, Sense, VarId};
use crate::model::{CarrierId, CaseData, FfgId, ModuleId, NodeId, Place, SiteId, SourceKind, SrcId};

use super::bigm::BigMTable;
use super::polygon::polygonize_quadratic;
use super::vars::VarIndex;
use super::FormulationError;
use crate::model::NormBounds;

type Terms = Vec<(VarId, f64)>;

fn le(model: &mut MilpModel, terms: Terms, rhs: f64, label: &str) -> Result<(), FormulationError> {
    model.add_constraint(LinearConstraint::new(terms, Sense::Le, rhs, label))?;
    Ok(())
}

fn ge(model: &mut MilpModel, terms: Terms, rhs: f64, label: &str) -> Result<(), FormulationError> {
    model.add_constraint(LinearConstraint::new(terms, Sense::Ge, rhs, label))?;
    Ok(())
}

fn eq(model: &mut MilpModel, terms: Terms, rhs: f64, label: &str) -> Result<(), FormulationError> {
    model.add_constraint(LinearConstraint::new(terms, Sense::Eq, rhs, label))?;
    Ok(())
}

/// Objective terms and their defining rows (families 2a-2f). The three
/// normalized terms weigh movement fuel, generation fuel, DR-reduced demand
/// and abandoned demand; the shared fuel stock caps the two fuel terms.
pub fn build_objective(
    model: &mut MilpModel,
    case: &CaseData,
    vx: &VarIndex,
    bounds: &NormBounds,
    big_m: &BigMTable,
) -> Result<(), FormulationError> {
    let dt = case.delta_t();
    let spans = case.spans();

    // (2a) movement fuel
    let mut terms: Terms = vec![(vx.psi11(), 1.0)];
    for (j, carrier) in case.carriers.iter().enumerate() {
        for t in 1..=spans {
            for s in 0..case.sites.len() {
                terms.push((
                    vx.traveling[&(CarrierId(j), SiteId(s), t)],
                    -carrier.fuel_per_span * dt,
                ));
            }
        }
    }
    eq(model, terms, 0.0, "2a")?;

    // (2b) generation fuel
    let mut terms: Terms = vec![(vx.psi12(), 1.0)];
    for (f, ffg) in case.ffgs.iter().enumerate() {
        for t in 1..=spans {
            terms.push((vx.p_ffg[&(FfgId(f), t)], -ffg.fuel_per_mwh * dt));
        }
    }
    eq(model, terms, 0.0, "2b")?;

    // (2c) shared fuel stock
    le(
        model,
        vec![(vx.psi11(), 1.0), (vx.psi12(), 1.0)],
        case.params.fuel_available,
        "2c",
    )?;

    // (2d) DR-reduced demand
    let mut terms: Terms = vec![(vx.psi2(), 1.0)];
    for program in &case.dr_programs {
        let w = case.node(program.node).weight;
        for t in 1..=spans {
            terms.push((vx.p_dr[&(program.node, t)], -w * dt));
        }
    }
    eq(model, terms, 0.0, "2d")?;

    // (2e) abandoned-demand accounting per node
    for (i, _) in case.nodes.iter().enumerate() {
        let i_id = NodeId(i);
        let chi = vx.abandoned[&i_id];
        let delta = vx.picked[&i_id];
        let m = big_m.abandon_for(i_id);
        let mut forecast_sum = 0.0;
        let mut upper: Terms = vec![(chi, 1.0)];
        let mut lower: Terms = vec![(chi, 1.0), (delta, m)];
        for t in 1..=spans {
            let (u_terms, p_bar) = vx.load_tilde(case, i_id, t);
            forecast_sum += p_bar;
            for (u, coeff) in u_terms {
                upper.push((u, -coeff));
                lower.push((u, -coeff));
            }
        }
        // chi <= sum_t realized load; chi = that sum when abandoned.
        le(model, upper, forecast_sum, "2e")?;
        ge(model, lower, forecast_sum, "2e")?;
        // chi vanishes when the node is picked up.
        le(model, vec![(chi, 1.0), (delta, m)], m, "2e")?;
    }

    // (2f) weighted abandonment
    let mut terms: Terms = vec![(vx.psi3(), 1.0)];
    for (i, node) in case.nodes.iter().enumerate() {
        terms.push((vx.abandoned[&NodeId(i)], -node.weight * dt));
    }
    eq(model, terms, 0.0, "2f")?;

    let [k1, k2, k3] = case.params.kappa;
    model.add_objective_term(vx.psi11(), k1 / bounds.fuel);
    model.add_objective_term(vx.psi12(), k1 / bounds.fuel);
    model.add_objective_term(vx.psi2(), k2 / bounds.dr);
    model.add_objective_term(vx.psi3(), k3 / bounds.abandon);
    Ok(())
}

/// Carrier travel logistics (families 3a-3g): one place per span, legal
/// park/travel transitions, travel-time pickup at departure, residual-time
/// countdown, forced continuation and direction holding.
pub fn build_carrier_logistics(
    model: &mut MilpModel,
    case: &CaseData,
    vx: &VarIndex,
    big_m: &BigMTable,
) -> Result<(), FormulationError> {
    let spans = case.spans();
    let n_sites = case.sites.len();
    let eps = case.params.epsilon;

    for (j, carrier) in case.carriers.iter().enumerate() {
        let j_id = CarrierId(j);
        let max_t: f64 = carrier
            .travel
            .iter()
            .flatten()
            .copied()
            .max()
            .unwrap_or(0) as f64;

        // (3a) parked at or traveling to exactly one site
        for t in 0..=spans {
            let mut terms: Terms = Vec::with_capacity(2 * n_sites);
            for s in 0..n_sites {
                terms.push((vx.parked[&(j_id, SiteId(s), t)], 1.0));
                terms.push((vx.traveling[&(j_id, SiteId(s), t)], 1.0));
            }
            eq(model, terms, 1.0, "3a")?;
        }

        // (3b) park/travel transition pattern between consecutive spans
        for t in 1..=spans {
            for s in 0..n_sites {
                let s_id = SiteId(s);
                let x_now = vx.parked[&(j_id, s_id, t)];
                let x_prev = vx.parked[&(j_id, s_id, t - 1)];
                let v_now = vx.traveling[&(j_id, s_id, t)];
                let v_prev = vx.traveling[&(j_id, s_id, t - 1)];
                let mut lower: Terms = vec![
                    (x_now, 1.0),
                    (x_prev, -1.0),
                    (v_prev, -1.2),
                    (v_now, 1.2),
                ];
                let mut upper: Terms = vec![
                    (x_now, 1.0),
                    (x_prev, -1.0),
                    (v_prev, -1.0),
                    (v_now, 1.0),
                ];
                for s2 in 0..n_sites {
                    let v2_prev = vx.traveling[&(j_id, SiteId(s2), t - 1)];
                    let v2_now = vx.traveling[&(j_id, SiteId(s2), t)];
                    lower.push((v2_prev, -0.4));
                    lower.push((v2_now, 0.4));
                    upper.push((v2_prev, 0.5));
                    upper.push((v2_now, -0.5));
                }
                ge(model, lower, -0.8, "3b")?;
                le(model, upper, 0.7, "3b")?;
            }
        }

        // (3c) required travel time recognized at departure. The lower rows
        // are the printed form; the upper rows pin S to the travel matrix so
        // a feasible itinerary cannot pad its travel time.
        for t in 1..=spans {
            let s_var = vx.travel_need[&(j_id, t)];
            for origin in 0..n_sites {
                let sum_t: f64 = (0..n_sites).map(|d| carrier.travel[origin][d] as f64).sum();
                let x_prev = vx.parked[&(j_id, SiteId(origin), t - 1)];
                let mut lower: Terms = vec![(s_var, 1.0), (x_prev, -sum_t)];
                let mut upper: Terms = vec![(s_var, 1.0), (x_prev, sum_t)];
                for dest in 0..n_sites {
                    let tt = carrier.travel[origin][dest] as f64;
                    let v = vx.traveling[&(j_id, SiteId(dest), t)];
                    lower.push((v, -tt));
                    upper.push((v, -tt));
                }
                ge(model, lower, -sum_t, "3c")?;
                le(model, upper, sum_t, "3c")?;
            }
            // S vanishes unless the carrier was parked at t-1 and travels at t.
            let mut parked_cap: Terms = vec![(s_var, 1.0)];
            let mut travel_cap: Terms = vec![(s_var, 1.0)];
            for s in 0..n_sites {
                parked_cap.push((vx.parked[&(j_id, SiteId(s), t - 1)], -max_t));
                travel_cap.push((vx.traveling[&(j_id, SiteId(s), t)], -max_t));
            }
            le(model, parked_cap, 0.0, "3c")?;
            le(model, travel_cap, 0.0, "3c")?;
        }

        // (3d) residual travel time bookkeeping
        for t in 1..=spans {
            let mut terms: Terms = vec![
                (vx.travel_residual[&(j_id, t)], 1.0),
                (vx.travel_residual[&(j_id, t - 1)], -1.0),
                (vx.travel_need[&(j_id, t)], -1.0),
            ];
            for s in 0..n_sites {
                terms.push((vx.traveling[&(j_id, SiteId(s), t - 1)], 1.0));
            }
            eq(model, terms, 0.0, "3d")?;
        }

        // (3e) keep traveling exactly while residual time remains
        for t in 0..=spans {
            let r = vx.travel_residual[&(j_id, t)];
            let mut lower: Terms = vec![(r, -1.0)];
            let mut upper: Terms = vec![(r, -1.0)];
            for s in 0..n_sites {
                let v = vx.traveling[&(j_id, SiteId(s), t)];
                lower.push((v, big_m.travel));
                upper.push((v, 1.0));
            }
            ge(model, lower, 0.0, "3e")?;
            le(model, upper, 0.0, "3e")?;
        }

        // (3f) direction holding while a travel is under way
        for t in 1..=spans {
            let w = vx.direction_hold[&(j_id, t)];
            let mut trigger: Terms = vec![(w, 1.0)];
            for s in 0..n_sites {
                trigger.push((vx.traveling[&(j_id, SiteId(s), t - 1)], -1.0));
                trigger.push((vx.traveling[&(j_id, SiteId(s), t)], -1.0));
            }
            ge(model, trigger, eps - 2.0, "3f")?;
            for s in 0..n_sites {
                let v_now = vx.traveling[&(j_id, SiteId(s), t)];
                let v_prev = vx.traveling[&(j_id, SiteId(s), t - 1)];
                le(model, vec![(v_now, 1.0), (v_prev, -1.0), (w, 1.0)], 1.0, "3f")?;
                ge(model, vec![(v_now, 1.0), (v_prev, -1.0), (w, -1.0)], -1.0, "3f")?;
            }
        }

        // (3g) initial state
        eq(
            model,
            vec![(vx.parked[&(j_id, carrier.start, 0)], 1.0)],
            1.0,
            "3g",
        )?;
        eq(model, vec![(vx.travel_need[&(j_id, 0)], 1.0)], 0.0, "3g")?;
        eq(model, vec![(vx.travel_residual[&(j_id, 0)], 1.0)], 0.0, "3g")?;
        eq(model, vec![(vx.direction_hold[&(j_id, 0)], 1.0)], 0.0, "3g")?;
    }
    Ok(())
}

/// Module custody logistics (families 4a-4i and 5): single custody per span,
/// carrying capacity, pickup on departure, frozen custody while traveling,
/// arrival handover and node dominance over parked carriers.
pub fn build_module_logistics(
    model: &mut MilpModel,
    case: &CaseData,
    vx: &VarIndex,
) -> Result<(), FormulationError> {
    let spans = case.spans();
    let n_sites = case.sites.len();

    for (k, module) in case.modules.iter().enumerate() {
        let k_id = ModuleId(k);

        // (4a) exactly one place: a site or a carrier
        for t in 0..=spans {
            let mut terms: Terms = Vec::new();
            for s in 0..n_sites {
                terms.push((vx.at_site[&(k_id, SiteId(s), t)], 1.0));
            }
            for j in 0..case.carriers.len() {
                terms.push((vx.on_carrier[&(k_id, CarrierId(j), t)], 1.0));
            }
            eq(model, terms, 1.0, "4a")?;
        }

        // (4c) initial site
        eq(
            model,
            vec![(vx.at_site[&(k_id, module.start, 0)], 1.0)],
            1.0,
            "4c",
        )?;
    }

    for (j, carrier) in case.carriers.iter().enumerate() {
        let j_id = CarrierId(j);
        for t in 1..=spans {
            // (4b) carrying capacity
            let mut cap: Terms = Vec::new();
            for (k, module) in case.modules.iter().enumerate() {
                cap.push((vx.on_carrier[&(ModuleId(k), j_id, t)], module.width));
            }
            le(model, cap, carrier.capacity, "4b")?;

            for k in 0..case.modules.len() {
                let k_id = ModuleId(k);
                let g_now = vx.on_carrier[&(k_id, j_id, t)];
                let g_prev = vx.on_carrier[&(k_id, j_id, t - 1)];

                // (4d) a parked carrier owns nothing
                let mut dominate: Terms = vec![(g_now, 1.0)];
                for s in 0..n_sites {
                    dominate.push((vx.parked[&(j_id, SiteId(s), t)], 1.0));
                }
                le(model, dominate, 1.0, "4d")?;

                // (4e) pickup only from the departure site
                for s in 0..n_sites {
                    let s_id = SiteId(s);
                    le(
                        model,
                        vec![
                            (g_now, 1.0),
                            (vx.at_site[&(k_id, s_id, t - 1)], -1.0),
                            (vx.parked[&(j_id, s_id, t)], -1.0),
                            (vx.parked[&(j_id, s_id, t - 1)], 1.0),
                        ],
                        1.0,
                        "4e",
                    )?;
                }

                // (4f) custody frozen while the carrier is traveling
                let mut upper: Terms = vec![(g_now, 1.0), (g_prev, -1.0)];
                let mut lower: Terms = vec![(g_now, 1.0), (g_prev, -1.0)];
                for s in 0..n_sites {
                    let x_prev = vx.parked[&(j_id, SiteId(s), t - 1)];
                    let x_now = vx.parked[&(j_id, SiteId(s), t)];
                    upper.push((x_prev, -1.0));
                    upper.push((x_now, -1.0));
                    lower.push((x_prev, 1.0));
                    lower.push((x_now, 1.0));
                }
                le(model, upper, 0.0, "4f")?;
                ge(model, lower, 0.0, "4f")?;

                // (4g) arrival indicator: not parked before, parked now,
                // module on board during the final travel span
                for s in 0..n_sites {
                    let s_id = SiteId(s);
                    let a = vx.arrival[&(j_id, s_id, k_id, t)];
                    let x_prev = vx.parked[&(j_id, s_id, t - 1)];
                    let x_now = vx.parked[&(j_id, s_id, t)];
                    le(model, vec![(a, 1.0), (x_prev, 1.0)], 1.0, "4g")?;
                    le(model, vec![(a, 1.0), (x_now, -1.0)], 0.0, "4g")?;
                    le(model, vec![(a, 1.0), (g_prev, -1.0)], 0.0, "4g")?;
                    ge(
                        model,
                        vec![(a, 1.0), (x_prev, 1.0), (x_now, -1.0), (g_prev, -1.0)],
                        -1.0,
                        "4g",
                    )?;
                }
            }
        }
    }

    // (4h)/(4i) arrivals hand modules to the hosting site
    for k in 0..case.modules.len() {
        let k_id = ModuleId(k);
        for s in 0..n_sites {
            let s_id = SiteId(s);
            for t in 1..=spans {
                let z_now = vx.at_site[&(k_id, s_id, t)];
                let z_prev = vx.at_site[&(k_id, s_id, t - 1)];
                let mut gain: Terms = vec![(z_now, 1.0)];
                let mut only_by_arrival: Terms = vec![(z_now, 1.0), (z_prev, -1.0)];
                for j in 0..case.carriers.len() {
                    let a = vx.arrival[&(CarrierId(j), s_id, k_id, t)];
                    gain.push((a, -1.0));
                    only_by_arrival.push((a, -1.0));
                }
                ge(model, gain, 0.0, "4h")?;
                le(model, only_by_arrival, 0.0, "4i")?;
            }
        }
    }

    // (5) charge or discharge only while sitting at a site
    for k in 0..case.modules.len() {
        let k_id = ModuleId(k);
        for s in 0..n_sites {
            let s_id = SiteId(s);
            for t in 1..=spans {
                le(
                    model,
                    vec![
                        (vx.chg_flag[&(k_id, s_id, t)], 1.0),
                        (vx.dis_flag[&(k_id, s_id, t)], 1.0),
                        (vx.at_site[&(k_id, s_id, t)], -1.0),
                    ],
                    0.0,
                    "5",
                )?;
            }
        }
    }
    Ok(())
}

/// Module power envelopes and the state-of-charge recursion (families
/// 6a-6d). The apparent rating becomes half-plane rows on the net (P, Q).
pub fn build_module_power(
    model: &mut MilpModel,
    case: &CaseData,
    vx: &VarIndex,
) -> Result<(), FormulationError> {
    let spans = case.spans();
    let n_sites = case.sites.len();
    let dt = case.delta_t();

    for (k, module) in case.modules.iter().enumerate() {
        let k_id = ModuleId(k);
        let planes = polygonize_quadratic(
            module.s_rating,
            case.params.polygon_sides,
            case.params.polygon_mode,
        )?;

        for t in 1..=spans {
            for s in 0..n_sites {
                let s_id = SiteId(s);
                // (6a) gated charge/discharge/reactive envelopes
                le(
                    model,
                    vec![
                        (vx.p_chg[&(k_id, s_id, t)], 1.0),
                        (vx.chg_flag[&(k_id, s_id, t)], -module.p_charge_max),
                    ],
                    0.0,
                    "6a",
                )?;
                le(
                    model,
                    vec![
                        (vx.p_dis[&(k_id, s_id, t)], 1.0),
                        (vx.dis_flag[&(k_id, s_id, t)], -module.p_discharge_max),
                    ],
                    0.0,
                    "6a",
                )?;
                le(
                    model,
                    vec![
                        (vx.q_mod[&(k_id, s_id, t)], 1.0),
                        (vx.at_site[&(k_id, s_id, t)], -module.s_rating),
                    ],
                    0.0,
                    "6a",
                )?;
                ge(
                    model,
                    vec![
                        (vx.q_mod[&(k_id, s_id, t)], 1.0),
                        (vx.at_site[&(k_id, s_id, t)], module.s_rating),
                    ],
                    0.0,
                    "6a",
                )?;
            }

            // (6b) apparent rating on the site-summed net output
            for (a, b, c) in &planes.planes {
                let mut terms: Terms = Vec::new();
                for s in 0..n_sites {
                    let s_id = SiteId(s);
                    terms.push((vx.p_dis[&(k_id, s_id, t)], *a));
                    terms.push((vx.p_chg[&(k_id, s_id, t)], -*a));
                    terms.push((vx.q_mod[&(k_id, s_id, t)], *b));
                }
                le(model, terms, *c, "6b")?;
            }

            // (6c) state-of-charge recursion; the window rides on the bounds
            let mut terms: Terms = vec![
                (vx.soc[&(k_id, t)], 1.0),
                (vx.soc[&(k_id, t - 1)], -1.0),
            ];
            let scale = dt / module.energy;
            for s in 0..n_sites {
                let s_id = SiteId(s);
                terms.push((vx.p_chg[&(k_id, s_id, t)], -module.eff_charge * scale));
                terms.push((vx.p_dis[&(k_id, s_id, t)], scale / module.eff_discharge));
            }
            eq(model, terms, 0.0, "6c")?;
        }

        // (6d) initial state of charge
        eq(
            model,
            vec![(vx.soc[&(k_id, 0)], 1.0)],
            module.soc_start,
            "6d",
        )?;
    }
    Ok(())
}

/// Demand response execution rules (families 7a-7g): pick-up gating, reduction
/// ratio bounds against the realized load, the previous-horizon splice, and
/// the duration / interval / total-budget windows.
pub fn build_dr(
    model: &mut MilpModel,
    case: &CaseData,
    vx: &VarIndex,
    big_m: &BigMTable,
) -> Result<(), FormulationError> {
    let spans = case.spans() as i64;

    for (p, program) in case.dr_programs.iter().enumerate() {
        let i = program.node;
        let delta = vx.picked[&i];
        let m = big_m.dr[p];

        // (7a) execution only at a picked-up node
        for t in 1..=spans {
            le(model, vec![(vx.rho(i, t), 1.0), (delta, -1.0)], 0.0, "7a")?;
        }

        // (7b) reduction window against the realized load
        for t in 1..=spans {
            let rho = vx.rho(i, t);
            let p_dr = vx.p_dr[&(i, t as usize)];
            le(model, vec![(p_dr, 1.0), (rho, -m)], 0.0, "7b")?;

            let (u_terms, p_bar) = vx.load_tilde(case, i, t as usize);
            let mut cap: Terms = vec![(p_dr, 1.0)];
            for (u, coeff) in &u_terms {
                cap.push((*u, -program.tau_max * coeff));
            }
            le(model, cap, program.tau_max * p_bar, "7b")?;

            let mut floor: Terms = vec![(p_dr, -1.0), (rho, m)];
            for (u, coeff) in &u_terms {
                floor.push((*u, program.tau_min * coeff));
            }
            le(model, floor, m - program.tau_min * p_bar, "7b")?;
        }

        // (7c) splice the previous horizon's execution flags
        let hist = program.dur_max.max(program.gap_min) as i64;
        for t in (1 - hist)..=0 {
            let value = program.history.rho[(t - (1 - hist)) as usize] as u8 as f64;
            eq(model, vec![(vx.rho(i, t), 1.0)], value, "7c")?;
        }

        // (7d) longest single execution
        let dur_max = program.dur_max as i64;
        for t in (1 - dur_max)..=(spans - dur_max) {
            let terms: Terms = (0..=dur_max).map(|h| (vx.rho(i, t + h), 1.0)).collect();
            le(model, terms, program.dur_max as f64, "7d")?;
        }

        // (7e) shortest single execution
        let dur_min = program.dur_min as i64;
        for t in (2 - dur_min)..=(spans - dur_min + 1) {
            let mut terms: Terms = (0..dur_min).map(|h| (vx.rho(i, t + h), 1.0)).collect();
            terms.push((vx.rho(i, t), -(program.dur_min as f64)));
            terms.push((vx.rho(i, t - 1), program.dur_min as f64));
            ge(model, terms, 0.0, "7e")?;
        }

        // (7f) minimum interval between executions
        let gap = program.gap_min as i64;
        if gap > 0 {
            for t in (2 - gap)..=(spans - gap + 1) {
                let mut terms: Terms = (0..gap).map(|h| (vx.rho(i, t + h), -1.0)).collect();
                terms.push((vx.rho(i, t - 1), -(program.gap_min as f64)));
                terms.push((vx.rho(i, t), program.gap_min as f64));
                ge(model, terms, -(program.gap_min as f64), "7f")?;
            }
        }

        // (7g) total execution budget
        let terms: Terms = (1..=spans).map(|t| (vx.rho(i, t), 1.0)).collect();
        le(model, terms, program.total_max as f64, "7g")?;
    }
    Ok(())
}

/// Energy payback (families 8a-8d): the in-event accumulator, the release of
/// the accumulated energy at the final span of an event, the previous-horizon
/// splice, and the rebound profile on the load.
pub fn build_payback(
    model: &mut MilpModel,
    case: &CaseData,
    vx: &VarIndex,
    big_m: &BigMTable,
) -> Result<(), FormulationError> {
    let spans = case.spans();

    for (p, program) in case.dr_programs.iter().enumerate() {
        let i = program.node;
        let m = big_m.accum[p];

        // (8a) accumulator: zero outside executions, additive inside
        for t in 1..=spans {
            let c_now = vx.dr_accum[&(i, t)];
            let c_prev = vx.dr_accum[&(i, t - 1)];
            let p_dr = vx.p_dr[&(i, t)];
            let rho = vx.rho(i, t as i64);
            le(model, vec![(c_now, 1.0), (rho, -m)], 0.0, "8a")?;
            le(
                model,
                vec![(c_now, 1.0), (c_prev, -1.0), (p_dr, -1.0)],
                0.0,
                "8a",
            )?;
            ge(
                model,
                vec![(c_now, 1.0), (c_prev, -1.0), (p_dr, -1.0), (rho, -m)],
                -m,
                "8a",
            )?;
        }
        // Boundary: carry the previous horizon's accumulator in, or close the
        // cycle literally when the cyclic reading is requested.
        if case.params.payback_cyclic {
            eq(
                model,
                vec![(vx.dr_accum[&(i, 0)], 1.0), (vx.dr_accum[&(i, spans)], -1.0)],
                0.0,
                "8a",
            )?;
        } else {
            eq(
                model,
                vec![(vx.dr_accum[&(i, 0)], 1.0)],
                program.history.c_last,
                "8a",
            )?;
        }

        // (8b) release the pool exactly at the final span of an execution
        for t in 0..spans {
            let ep = vx.payback_pool[&(i, t as i64)];
            let c = vx.dr_accum[&(i, t)];
            let rho_next = vx.rho(i, t as i64 + 1);
            le(model, vec![(ep, 1.0), (c, -1.0)], 0.0, "8b")?;
            ge(model, vec![(ep, 1.0), (c, -1.0), (rho_next, m)], 0.0, "8b")?;
            le(model, vec![(ep, 1.0), (rho_next, m)], m, "8b")?;
        }

        // (8c) splice the previous horizon's rebound pool
        let pdu = program.payback_spans as i64;
        for t in (1 - pdu)..=(-1) {
            let value = program.history.ep[(t - (1 - pdu)) as usize];
            eq(model, vec![(vx.payback_pool[&(i, t)], 1.0)], value, "8c")?;
        }

        // (8d) rebound profile
        for t in 1..=spans {
            let mut terms: Terms = vec![(vx.p_payback[&(i, t)], 1.0)];
            for (h, gain) in program.payback_gain.iter().enumerate() {
                let idx = t as i64 - (h as i64 + 1);
                terms.push((vx.payback_pool[&(i, idx)], -*gain));
            }
            eq(model, terms, 0.0, "8d")?;
        }
    }
    Ok(())
}

/// Backup generator envelopes (family 9) and their nodal aggregation
/// (families 12a/12b).
pub fn build_ffg(
    model: &mut MilpModel,
    case: &CaseData,
    vx: &VarIndex,
) -> Result<(), FormulationError> {
    let spans = case.spans();

    for (f, ffg) in case.ffgs.iter().enumerate() {
        let f_id = FfgId(f);
        let planes = polygonize_quadratic(
            ffg.s_rating,
            case.params.polygon_sides,
            case.params.polygon_mode,
        )?;
        for t in 1..=spans {
            for (a, b, c) in &planes.planes {
                le(
                    model,
                    vec![(vx.p_ffg[&(f_id, t)], *a), (vx.q_ffg[&(f_id, t)], *b)],
                    *c,
                    "9",
                )?;
            }
        }
    }

    for (i, node) in case.nodes.iter().enumerate() {
        let i_id = NodeId(i);
        for t in 1..=spans {
            let p_in = vx.p_in_gen[&(i_id, t)];
            let q_in = vx.q_in_gen[&(i_id, t)];
            if node.ffgs.is_empty() {
                // (12b) no generator, no injection
                eq(model, vec![(p_in, 1.0)], 0.0, "12b")?;
                eq(model, vec![(q_in, 1.0)], 0.0, "12b")?;
            } else {
                // (12a) nodal aggregation
                let mut p_terms: Terms = vec![(p_in, 1.0)];
                let mut q_terms: Terms = vec![(q_in, 1.0)];
                for f in &node.ffgs {
                    p_terms.push((vx.p_ffg[&(*f, t)], -1.0));
                    q_terms.push((vx.q_ffg[&(*f, t)], -1.0));
                }
                eq(model, p_terms, 0.0, "12a")?;
                eq(model, q_terms, 0.0, "12a")?;
            }
        }
    }
    Ok(())
}

/// Network operation (families 10a-16): served-load gating with DR netting,
/// fixed power factor, storage exchange aggregation and external-source
/// absorption caps, nodal balance, the linearized voltage-drop chain, the
/// voltage window and branch capacity polygons.
pub fn build_network(
    model: &mut MilpModel,
    case: &CaseData,
    vx: &VarIndex,
    big_m: &BigMTable,
) -> Result<(), FormulationError> {
    let spans = case.spans();

    // (10a)/(10b) served load per node
    for (i, node) in case.nodes.iter().enumerate() {
        let i_id = NodeId(i);
        let delta = vx.picked[&i_id];
        let m = big_m.load_for(i_id);
        for t in 1..=spans {
            let pl = vx.p_load[&(i_id, t)];
            let (u_terms, p_bar) = vx.load_tilde(case, i_id, t);

            // Served load tracks the realized (DR-netted) demand when the
            // node is picked up, and vanishes otherwise.
            let mut upper: Terms = vec![(pl, 1.0)];
            let mut lower: Terms = vec![(pl, 1.0), (delta, -m)];
            if node.dr.is_some() {
                upper.push((vx.p_dr[&(i_id, t)], 1.0));
                upper.push((vx.p_payback[&(i_id, t)], -1.0));
                lower.push((vx.p_dr[&(i_id, t)], 1.0));
                lower.push((vx.p_payback[&(i_id, t)], -1.0));
            }
            for (u, coeff) in &u_terms {
                upper.push((*u, -coeff));
                lower.push((*u, -coeff));
            }
            le(model, upper, p_bar, "10a")?;
            ge(model, lower, p_bar - m, "10a")?;
            le(model, vec![(pl, 1.0), (delta, -m)], 0.0, "10a")?;

            // (10b) fixed power factor
            eq(
                model,
                vec![(vx.q_load[&(i_id, t)], 1.0), (pl, -node.qp_ratio)],
                0.0,
                "10b",
            )?;
        }
    }

    // (11a)/(11b) storage exchange aggregation over places
    let site_place = |s: SiteId| case.sites[s.index()];
    for t in 1..=spans {
        for s in 0..case.sites.len() {
            let s_id = SiteId(s);
            let place = site_place(s_id);
            let mut p_terms: Terms = vec![(vx.p_in_storage[&(place, t)], 1.0)];
            let mut q_terms: Terms = vec![(vx.q_in_storage[&(place, t)], 1.0)];
            for k in 0..case.modules.len() {
                let k_id = ModuleId(k);
                p_terms.push((vx.p_dis[&(k_id, s_id, t)], -1.0));
                p_terms.push((vx.p_chg[&(k_id, s_id, t)], 1.0));
                q_terms.push((vx.q_mod[&(k_id, s_id, t)], -1.0));
            }
            eq(model, p_terms, 0.0, "11a")?;
            eq(model, q_terms, 0.0, "11a")?;
        }
        for (i, node) in case.nodes.iter().enumerate() {
            if node.site.is_none() {
                let place = Place::Node(NodeId(i));
                eq(model, vec![(vx.p_in_storage[&(place, t)], 1.0)], 0.0, "11b")?;
                eq(model, vec![(vx.q_in_storage[&(place, t)], 1.0)], 0.0, "11b")?;
            }
        }
    }

    // (11c)/(11d) absorption limits at external sources
    for (s, source) in case.sources.iter().enumerate() {
        let place = Place::Source(SrcId(s));
        for t in 1..=spans {
            let p_in = vx.p_in_storage[&(place, t)];
            match &source.kind {
                SourceKind::Substation { spare } => {
                    ge(model, vec![(p_in, 1.0)], -spare, "11c")?;
                }
                SourceKind::Reg { .. } => {
                    let (u_terms, p_bar) = vx.reg_tilde(case, SrcId(s), t);
                    let mut terms: Terms = vec![(p_in, -1.0)];
                    for (u, coeff) in u_terms {
                        terms.push((u, -coeff));
                    }
                    le(model, terms, p_bar, "11d")?;
                }
            }
        }
    }

    // (13) nodal balance
    for (i, _) in case.nodes.iter().enumerate() {
        let i_id = NodeId(i);
        let place = Place::Node(i_id);
        for t in 1..=spans {
            let mut p_terms: Terms = vec![
                (vx.p_in_storage[&(place, t)], 1.0),
                (vx.p_in_gen[&(i_id, t)], 1.0),
                (vx.p_load[&(i_id, t)], -1.0),
            ];
            let mut q_terms: Terms = vec![
                (vx.q_in_storage[&(place, t)], 1.0),
                (vx.q_in_gen[&(i_id, t)], 1.0),
                (vx.q_load[&(i_id, t)], -1.0),
            ];
            for (b, (parent, child)) in vx.oriented.iter().enumerate() {
                if *child == i_id {
                    p_terms.push((vx.p_flow[&(b, t)], 1.0));
                    q_terms.push((vx.q_flow[&(b, t)], 1.0));
                } else if *parent == i_id {
                    p_terms.push((vx.p_flow[&(b, t)], -1.0));
                    q_terms.push((vx.q_flow[&(b, t)], -1.0));
                }
            }
            eq(model, p_terms, 0.0, "13")?;
            eq(model, q_terms, 0.0, "13")?;
        }
    }

    // (14) voltage drop along each branch
    for (b, (parent, child)) in vx.oriented.iter().enumerate() {
        let spec = &case.branches[b];
        for t in 1..=spans {
            eq(
                model,
                vec![
                    (vx.v_sq[&(*child, t)], 1.0),
                    (vx.v_sq[&(*parent, t)], -1.0),
                    (vx.p_flow[&(b, t)], 2.0 * spec.r),
                    (vx.q_flow[&(b, t)], 2.0 * spec.x),
                ],
                0.0,
                "14",
            )?;
        }
    }

    // (15) voltage window
    let v_min_sq = case.params.v_min * case.params.v_min;
    let v_max_sq = case.params.v_max * case.params.v_max;
    for (i, _) in case.nodes.iter().enumerate() {
        for t in 1..=spans {
            let v = vx.v_sq[&(NodeId(i), t)];
            ge(model, vec![(v, 1.0)], v_min_sq, "15")?;
            le(model, vec![(v, 1.0)], v_max_sq, "15")?;
        }
    }

    // (16) branch capacity polygons
    for (b, _) in vx.oriented.iter().enumerate() {
        let planes = polygonize_quadratic(
            case.branches[b].s_max,
            case.params.polygon_sides,
            case.params.polygon_mode,
        )?;
        for t in 1..=spans {
            for (a, bb, c) in &planes.planes {
                le(
                    model,
                    vec![(vx.p_flow[&(b, t)], *a), (vx.q_flow[&(b, t)], *bb)],
                    *c,
                    "16",
                )?;
            }
        }
    }
    Ok(())
}
