//! On-disk case schema (TOML) and its conversion to [`CaseData`].
//!
//! The file speaks field units (kW, kWh, kVA, liters); the in-memory case
//! speaks MW/MWh/MVA. `load_case` parses, cross-links and validates;
//! `save_case` is its inverse up to formatting. The schema reference lives in
//! `docs/case-format.md`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::types::*;
use super::CaseError;

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawCase {
    #[serde(default)]
    pub name: String,
    pub horizon: RawHorizon,
    pub params: RawParams,
    #[serde(default)]
    pub nodes: Vec<RawNode>,
    #[serde(default)]
    pub branches: Vec<RawBranch>,
    #[serde(default)]
    pub sources: Vec<RawSource>,
    #[serde(default)]
    pub carriers: Vec<RawCarrier>,
    #[serde(default)]
    pub modules: Vec<RawModule>,
    #[serde(default)]
    pub dr: Vec<RawDr>,
    #[serde(default)]
    pub ffgs: Vec<RawFfg>,
    #[serde(default)]
    pub history: Vec<RawHistory>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawHorizon {
    pub delta_t_h: f64,
    pub spans: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawParams {
    /// Objective weights; defaults to the reference preset when omitted.
    pub kappa: Option<[f64; 3]>,
    pub fuel_available_l: f64,
    pub v_min_pu: f64,
    pub v_max_pu: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_polygon_sides")]
    pub polygon_sides: i64,
    #[serde(default = "default_polygon_mode")]
    pub polygon_mode: String,
    #[serde(default)]
    pub gamma_load_default: i64,
    #[serde(default)]
    pub gamma_reg_default: i64,
    #[serde(default)]
    pub payback_cyclic: bool,
    #[serde(default)]
    pub big_m: HashMap<String, f64>,
}

/// Objective weights from the reference parameter table.
pub const REFERENCE_KAPPA: [f64; 3] = [0.1618, 0.0679, 0.7703];

fn default_epsilon() -> f64 {
    0.5
}
fn default_polygon_sides() -> i64 {
    12
}
fn default_polygon_mode() -> String {
    "envelope".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawNode {
    pub bus: i64,
    pub weight: f64,
    #[serde(default)]
    pub qp_ratio: f64,
    #[serde(default)]
    pub load_kw: Vec<f64>,
    #[serde(default)]
    pub dev_up_kw: Vec<f64>,
    #[serde(default)]
    pub dev_down_kw: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub smess_site: bool,
    #[serde(default = "default_class")]
    pub class: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<i64>,
}

fn default_class() -> String {
    "none".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawBranch {
    pub from: i64,
    pub to: i64,
    pub r_pu: f64,
    pub x_pu: f64,
    pub s_max_kva: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawSource {
    pub id: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub output_kw: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dev_up_kw: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dev_down_kw: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spare_kw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawCarrier {
    pub id: String,
    pub fuel_l_per_travel_h: f64,
    pub capacity: f64,
    pub start: String,
    /// `[site_a, site_b, spans]` triples; symmetric unless both directions
    /// are given explicitly.
    pub travel: Vec<(String, String, i64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawModule {
    pub id: String,
    #[serde(default = "one")]
    pub width: f64,
    pub energy_kwh: f64,
    pub p_charge_max_kw: f64,
    pub p_discharge_max_kw: f64,
    pub s_rating_kva: f64,
    pub eff_charge: f64,
    pub eff_discharge: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_start: f64,
    pub start: String,
    #[serde(default, skip_serializing_if = "is_false")]
    pub pinned: bool,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawDr {
    pub node: i64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub dur_max: i64,
    pub dur_min: i64,
    pub gap_min: i64,
    pub total_max: i64,
    pub payback_spans: i64,
    pub payback_gain: Vec<f64>,
    #[serde(default = "yes", skip_serializing_if = "Clone::clone")]
    pub enabled: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawFfg {
    pub id: String,
    pub node: i64,
    pub p_max_kw: f64,
    pub q_max_kvar: f64,
    pub s_rating_kva: f64,
    pub fuel_l_per_kwh: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawHistory {
    pub node: i64,
    #[serde(default)]
    pub rho: Vec<i64>,
    #[serde(default)]
    pub c_last_kw: f64,
    #[serde(default)]
    pub ep_kw: Vec<f64>,
}

const KW: f64 = 1e-3;

fn schema_err(location: impl Into<String>, message: impl Into<String>) -> CaseError {
    CaseError::Schema {
        location: location.into(),
        message: message.into(),
    }
}

fn check_series(
    location: &str,
    field: &str,
    series: &[f64],
    spans: usize,
    allow_empty: bool,
) -> Result<(), CaseError> {
    if series.is_empty() && allow_empty {
        return Ok(());
    }
    if series.len() != spans {
        return Err(schema_err(
            format!("{location}.{field}"),
            format!("series has {} entries, horizon has {} spans", series.len(), spans),
        ));
    }
    if let Some(v) = series.iter().find(|v| **v < 0.0 || !v.is_finite()) {
        return Err(schema_err(
            format!("{location}.{field}"),
            format!("negative or non-finite entry {v}"),
        ));
    }
    Ok(())
}

fn series_mw(series: &[f64], spans: usize) -> Vec<f64> {
    if series.is_empty() {
        vec![0.0; spans]
    } else {
        series.iter().map(|v| v * KW).collect()
    }
}

fn budget(raw: i64, location: &str) -> Result<u32, CaseError> {
    u32::try_from(raw).map_err(|_| schema_err(location, format!("budget {raw} must be a non-negative integer")))
}

impl RawCase {
    /// Cross-link and validate into an immutable [`CaseData`].
    pub fn into_case(self) -> Result<CaseData, CaseError> {
        let raw = self;
        if raw.horizon.spans < 1 {
            return Err(schema_err("horizon.spans", "horizon needs at least one span"));
        }
        if !(raw.horizon.delta_t_h > 0.0) || !raw.horizon.delta_t_h.is_finite() {
            return Err(schema_err("horizon.delta_t_h", "span length must be positive"));
        }
        let horizon = Horizon {
            delta_t: raw.horizon.delta_t_h,
            spans: raw.horizon.spans as usize,
        };
        let spans = horizon.spans;

        // -- params ----------------------------------------------------
        let kappa = raw.params.kappa.unwrap_or(REFERENCE_KAPPA);
        if kappa.iter().any(|k| *k < 0.0 || !k.is_finite()) {
            return Err(schema_err("params.kappa", "weights must be non-negative"));
        }
        let total: f64 = kappa.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(schema_err(
                "params.kappa",
                format!("weights sum to {total}, expected 1"),
            ));
        }
        if raw.params.fuel_available_l < 0.0 || !raw.params.fuel_available_l.is_finite() {
            return Err(schema_err("params.fuel_available_l", "must be non-negative"));
        }
        if !(raw.params.v_min_pu > 0.0 && raw.params.v_min_pu < raw.params.v_max_pu) {
            return Err(schema_err(
                "params.v_min_pu/v_max_pu",
                "need 0 < v_min < v_max",
            ));
        }
        if !(raw.params.epsilon > 0.0 && raw.params.epsilon < 1.0) {
            return Err(schema_err("params.epsilon", "must lie in (0, 1)"));
        }
        let sides = raw.params.polygon_sides;
        if sides < 4 || sides % 2 != 0 {
            return Err(schema_err(
                "params.polygon_sides",
                format!("{sides} is not an even integer >= 4"),
            ));
        }
        let polygon_mode = match raw.params.polygon_mode.as_str() {
            "envelope" => PolygonMode::Envelope,
            "conservative" => PolygonMode::Conservative,
            other => {
                return Err(schema_err(
                    "params.polygon_mode",
                    format!("unknown mode `{other}`"),
                ))
            }
        };
        for (label, m) in &raw.params.big_m {
            if *m <= 0.0 || !m.is_finite() {
                return Err(schema_err(format!("params.big_m.{label}"), "must be positive"));
            }
        }

        // -- nodes -----------------------------------------------------
        let mut bus_index: HashMap<i64, NodeId> = HashMap::new();
        let mut nodes = Vec::with_capacity(raw.nodes.len());
        for (idx, rn) in raw.nodes.iter().enumerate() {
            let loc = format!("nodes[bus={}]", rn.bus);
            if rn.bus < 1 {
                return Err(schema_err(format!("{loc}.bus"), "bus numbers start at 1"));
            }
            if bus_index.insert(rn.bus, NodeId(idx)).is_some() {
                return Err(schema_err(loc, "duplicate bus number"));
            }
            if rn.weight < 0.0 || !rn.weight.is_finite() {
                return Err(schema_err(format!("{loc}.weight"), "must be non-negative"));
            }
            if rn.qp_ratio < 0.0 || !rn.qp_ratio.is_finite() {
                return Err(schema_err(format!("{loc}.qp_ratio"), "must be non-negative"));
            }
            check_series(&loc, "load_kw", &rn.load_kw, spans, true)?;
            check_series(&loc, "dev_up_kw", &rn.dev_up_kw, spans, true)?;
            check_series(&loc, "dev_down_kw", &rn.dev_down_kw, spans, true)?;
            let class = match rn.class.as_str() {
                "commercial" => CustomerClass::Commercial,
                "residential" => CustomerClass::Residential,
                "none" => CustomerClass::None,
                other => {
                    return Err(schema_err(
                        format!("{loc}.class"),
                        format!("unknown customer class `{other}`"),
                    ))
                }
            };
            nodes.push(NodeSpec {
                bus: rn.bus as u32,
                weight: rn.weight,
                qp_ratio: rn.qp_ratio,
                class,
                load: series_mw(&rn.load_kw, spans),
                dev_up: series_mw(&rn.dev_up_kw, spans),
                dev_down: series_mw(&rn.dev_down_kw, spans),
                site: None,
                dr: None,
                ffgs: Vec::new(),
            });
        }

        // -- branches (radial check) ------------------------------------
        let mut branches = Vec::with_capacity(raw.branches.len());
        for rb in &raw.branches {
            let loc = format!("branches[{}-{}]", rb.from, rb.to);
            let from = *bus_index
                .get(&rb.from)
                .ok_or_else(|| CaseError::DanglingRef {
                    location: loc.clone(),
                    key: format!("bus {}", rb.from),
                })?;
            let to = *bus_index.get(&rb.to).ok_or_else(|| CaseError::DanglingRef {
                location: loc.clone(),
                key: format!("bus {}", rb.to),
            })?;
            if from == to {
                return Err(schema_err(loc, "self-loop branch"));
            }
            if rb.r_pu < 0.0 || rb.x_pu < 0.0 || !rb.r_pu.is_finite() || !rb.x_pu.is_finite() {
                return Err(schema_err(format!("{loc}.r_pu/x_pu"), "must be non-negative"));
            }
            if !(rb.s_max_kva > 0.0) || !rb.s_max_kva.is_finite() {
                return Err(schema_err(format!("{loc}.s_max_kva"), "must be positive"));
            }
            branches.push(BranchSpec {
                from,
                to,
                r: rb.r_pu,
                x: rb.x_pu,
                s_max: rb.s_max_kva * KW,
            });
        }
        check_radial(&nodes, &branches)?;

        // -- sites ------------------------------------------------------
        let mut sites = Vec::new();
        let mut site_keys: HashMap<String, SiteId> = HashMap::new();
        for (idx, rn) in raw.nodes.iter().enumerate() {
            if rn.smess_site {
                let site = SiteId(sites.len());
                sites.push(Place::Node(NodeId(idx)));
                site_keys.insert(format!("n{}", rn.bus), site);
                nodes[idx].site = Some(site);
            }
        }

        // -- sources ----------------------------------------------------
        let mut sources = Vec::with_capacity(raw.sources.len());
        for (idx, rs) in raw.sources.iter().enumerate() {
            let loc = format!("sources[{}]", rs.id);
            let site = SiteId(sites.len());
            if site_keys.insert(rs.id.clone(), site).is_some() {
                return Err(schema_err(loc, "duplicate source id or id collides with a node key"));
            }
            sites.push(Place::Source(SrcId(idx)));
            let kind = match rs.kind.as_str() {
                "substation" => {
                    let spare = rs.spare_kw.ok_or_else(|| {
                        schema_err(format!("{loc}.spare_kw"), "substation sources need spare_kw")
                    })?;
                    if !(spare > 0.0) || !spare.is_finite() {
                        return Err(schema_err(format!("{loc}.spare_kw"), "must be positive"));
                    }
                    if !rs.output_kw.is_empty() {
                        return Err(schema_err(
                            format!("{loc}.output_kw"),
                            "substation sources must not carry a forecast series",
                        ));
                    }
                    SourceKind::Substation { spare: spare * KW }
                }
                "reg" => {
                    if rs.spare_kw.is_some() {
                        return Err(schema_err(
                            format!("{loc}.spare_kw"),
                            "REG sources must not carry spare_kw",
                        ));
                    }
                    check_series(&loc, "output_kw", &rs.output_kw, spans, false)?;
                    check_series(&loc, "dev_up_kw", &rs.dev_up_kw, spans, true)?;
                    check_series(&loc, "dev_down_kw", &rs.dev_down_kw, spans, true)?;
                    SourceKind::Reg {
                        output: series_mw(&rs.output_kw, spans),
                        dev_up: series_mw(&rs.dev_up_kw, spans),
                        dev_down: series_mw(&rs.dev_down_kw, spans),
                    }
                }
                other => {
                    return Err(schema_err(
                        format!("{loc}.kind"),
                        format!("unknown source kind `{other}`"),
                    ))
                }
            };
            sources.push(ExternalSource {
                id: rs.id.clone(),
                kind,
                site,
            });
        }

        // -- carriers -----------------------------------------------------
        let mut carriers = Vec::with_capacity(raw.carriers.len());
        let mut carrier_ids = HashMap::new();
        for (idx, rc) in raw.carriers.iter().enumerate() {
            let loc = format!("carriers[{}]", rc.id);
            if carrier_ids.insert(rc.id.clone(), idx).is_some() {
                return Err(schema_err(loc, "duplicate carrier id"));
            }
            if rc.fuel_l_per_travel_h < 0.0 || !rc.fuel_l_per_travel_h.is_finite() {
                return Err(schema_err(format!("{loc}.fuel_l_per_travel_h"), "must be non-negative"));
            }
            if !(rc.capacity > 0.0) || !rc.capacity.is_finite() {
                return Err(schema_err(format!("{loc}.capacity"), "must be positive"));
            }
            let start = *site_keys.get(&rc.start).ok_or_else(|| CaseError::DanglingRef {
                location: format!("{loc}.start"),
                key: rc.start.clone(),
            })?;
            let n = sites.len();
            let mut travel = vec![vec![u32::MAX; n]; n];
            for (i, row) in travel.iter_mut().enumerate() {
                row[i] = 0;
            }
            for (a, b, t) in &rc.travel {
                let pair = format!("{loc}.travel[{a},{b}]");
                let sa = *site_keys.get(a).ok_or_else(|| CaseError::DanglingRef {
                    location: pair.clone(),
                    key: a.clone(),
                })?;
                let sb = *site_keys.get(b).ok_or_else(|| CaseError::DanglingRef {
                    location: pair.clone(),
                    key: b.clone(),
                })?;
                if sa == sb {
                    if *t != 0 {
                        return Err(schema_err(pair, "travel time to the same site must be 0"));
                    }
                    continue;
                }
                if *t < 0 {
                    return Err(schema_err(pair, "travel time must be a non-negative integer"));
                }
                let t = *t as u32;
                travel[sa.index()][sb.index()] = t;
                // Symmetric unless the file gives the reverse direction.
                if travel[sb.index()][sa.index()] == u32::MAX {
                    travel[sb.index()][sa.index()] = t;
                }
            }
            for a in 0..n {
                for b in 0..n {
                    if travel[a][b] == u32::MAX {
                        return Err(CaseError::MissingTravel {
                            carrier: rc.id.clone(),
                            from: site_key_name(&sites, &nodes, &sources, SiteId(a)),
                            to: site_key_name(&sites, &nodes, &sources, SiteId(b)),
                        });
                    }
                }
            }
            carriers.push(CarrierSpec {
                id: rc.id.clone(),
                fuel_per_span: rc.fuel_l_per_travel_h,
                capacity: rc.capacity,
                travel,
                start,
            });
        }

        // -- modules ----------------------------------------------------
        let mut modules = Vec::with_capacity(raw.modules.len());
        let mut module_ids = HashMap::new();
        for (idx, rm) in raw.modules.iter().enumerate() {
            let loc = format!("modules[{}]", rm.id);
            if module_ids.insert(rm.id.clone(), idx).is_some() {
                return Err(schema_err(loc, "duplicate module id"));
            }
            for (field, v, positive) in [
                ("width", rm.width, true),
                ("energy_kwh", rm.energy_kwh, true),
                ("p_charge_max_kw", rm.p_charge_max_kw, true),
                ("p_discharge_max_kw", rm.p_discharge_max_kw, true),
                ("s_rating_kva", rm.s_rating_kva, true),
            ] {
                if !v.is_finite() || (positive && !(v > 0.0)) {
                    return Err(schema_err(format!("{loc}.{field}"), "must be positive"));
                }
            }
            for (field, v) in [("eff_charge", rm.eff_charge), ("eff_discharge", rm.eff_discharge)] {
                if !(v > 0.0 && v <= 1.0) {
                    return Err(schema_err(format!("{loc}.{field}"), "must lie in (0, 1]"));
                }
            }
            if !(0.0 <= rm.soc_min && rm.soc_min <= rm.soc_max && rm.soc_max <= 1.0) {
                return Err(schema_err(
                    format!("{loc}.soc_min/soc_max"),
                    "need 0 <= soc_min <= soc_max <= 1",
                ));
            }
            if !(rm.soc_min <= rm.soc_start && rm.soc_start <= rm.soc_max) {
                return Err(schema_err(
                    format!("{loc}.soc_start"),
                    format!(
                        "initial state of charge {} outside [{}, {}]",
                        rm.soc_start, rm.soc_min, rm.soc_max
                    ),
                ));
            }
            let start = *site_keys.get(&rm.start).ok_or_else(|| CaseError::DanglingRef {
                location: format!("{loc}.start"),
                key: rm.start.clone(),
            })?;
            modules.push(ModuleSpec {
                id: rm.id.clone(),
                width: rm.width,
                energy: rm.energy_kwh * KW,
                p_charge_max: rm.p_charge_max_kw * KW,
                p_discharge_max: rm.p_discharge_max_kw * KW,
                s_rating: rm.s_rating_kva * KW,
                eff_charge: rm.eff_charge,
                eff_discharge: rm.eff_discharge,
                soc_min: rm.soc_min,
                soc_max: rm.soc_max,
                soc_start: rm.soc_start,
                start,
                pinned: rm.pinned,
            });
        }

        // -- ffgs ---------------------------------------------------------
        let mut ffgs = Vec::with_capacity(raw.ffgs.len());
        let mut ffg_ids = HashMap::new();
        for (idx, rf) in raw.ffgs.iter().enumerate() {
            let loc = format!("ffgs[{}]", rf.id);
            if ffg_ids.insert(rf.id.clone(), idx).is_some() {
                return Err(schema_err(loc, "duplicate FFG id"));
            }
            let node = *bus_index.get(&rf.node).ok_or_else(|| CaseError::DanglingRef {
                location: format!("{loc}.node"),
                key: format!("bus {}", rf.node),
            })?;
            for (field, v) in [
                ("p_max_kw", rf.p_max_kw),
                ("q_max_kvar", rf.q_max_kvar),
                ("s_rating_kva", rf.s_rating_kva),
            ] {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(schema_err(format!("{loc}.{field}"), "must be positive"));
                }
            }
            if rf.fuel_l_per_kwh < 0.0 || !rf.fuel_l_per_kwh.is_finite() {
                return Err(schema_err(format!("{loc}.fuel_l_per_kwh"), "must be non-negative"));
            }
            nodes[node.index()].ffgs.push(FfgId(idx));
            ffgs.push(FfgSpec {
                id: rf.id.clone(),
                node,
                p_max: rf.p_max_kw * KW,
                q_max: rf.q_max_kvar * KW,
                s_rating: rf.s_rating_kva * KW,
                fuel_per_mwh: rf.fuel_l_per_kwh / KW,
            });
        }

        // -- demand response ---------------------------------------------
        let mut dr_programs = Vec::with_capacity(raw.dr.len());
        for (p_idx, rd) in raw.dr.iter().enumerate() {
            let loc = format!("dr[node={}]", rd.node);
            let node = *bus_index.get(&rd.node).ok_or_else(|| CaseError::DanglingRef {
                location: format!("{loc}.node"),
                key: format!("bus {}", rd.node),
            })?;
            let spec = &mut nodes[node.index()];
            if spec.dr.is_some() {
                return Err(schema_err(loc, "node already has a DR program"));
            }
            if spec.class == CustomerClass::None {
                return Err(schema_err(
                    format!("{loc}"),
                    "DR nodes need a customer class (commercial or residential)",
                ));
            }
            if spec.load.iter().all(|l| *l == 0.0) {
                return Err(schema_err(loc, "DR node carries no load"));
            }
            if !(0.0 <= rd.tau_min && rd.tau_min <= rd.tau_max && rd.tau_max <= 1.0) {
                return Err(schema_err(
                    format!("{loc}.tau_min/tau_max"),
                    "need 0 <= tau_min <= tau_max <= 1",
                ));
            }
            if rd.dur_min < 1 || rd.dur_min > rd.dur_max {
                return Err(schema_err(
                    format!("{loc}.dur_min/dur_max"),
                    "need 1 <= dur_min <= dur_max",
                ));
            }
            if rd.gap_min < 0 || rd.total_max < 0 {
                return Err(schema_err(
                    format!("{loc}.gap_min/total_max"),
                    "must be non-negative",
                ));
            }
            if rd.payback_spans < 0 || rd.payback_gain.len() != rd.payback_spans as usize {
                return Err(schema_err(
                    format!("{loc}.payback_gain"),
                    format!(
                        "need exactly payback_spans = {} gain entries",
                        rd.payback_spans
                    ),
                ));
            }
            if rd.payback_gain.iter().any(|b| *b < 0.0 || !b.is_finite()) {
                return Err(schema_err(format!("{loc}.payback_gain"), "gains must be non-negative"));
            }
            let total: f64 = rd.payback_gain.iter().sum();
            if total > 1.0 + 1e-9 {
                return Err(schema_err(
                    format!("{loc}.payback_gain"),
                    format!("gains sum to {total}, more energy than was reduced"),
                ));
            }
            spec.dr = Some(p_idx);
            dr_programs.push(DrProgram {
                node,
                tau_min: rd.tau_min,
                tau_max: rd.tau_max,
                dur_max: rd.dur_max as usize,
                dur_min: rd.dur_min as usize,
                gap_min: rd.gap_min as usize,
                total_max: rd.total_max as usize,
                payback_spans: rd.payback_spans as usize,
                payback_gain: rd.payback_gain.clone(),
                history: DrHistory::default(),
                enabled: rd.enabled,
            });
        }

        // -- history splice ------------------------------------------------
        for rh in &raw.history {
            let loc = format!("history[node={}]", rh.node);
            let node = *bus_index.get(&rh.node).ok_or_else(|| CaseError::DanglingRef {
                location: loc.clone(),
                key: format!("bus {}", rh.node),
            })?;
            let p_idx = nodes[node.index()].dr.ok_or_else(|| {
                schema_err(loc.clone(), "history given for a node without a DR program")
            })?;
            let program = &mut dr_programs[p_idx];
            let need_rho = program.dur_max.max(program.gap_min);
            if rh.rho.len() > need_rho {
                return Err(schema_err(
                    format!("{loc}.rho"),
                    format!("window longer than the {need_rho} spans the constraints reach back"),
                ));
            }
            if rh.rho.iter().any(|v| *v != 0 && *v != 1) {
                return Err(schema_err(format!("{loc}.rho"), "entries must be 0 or 1"));
            }
            if rh.rho.len() < need_rho && rh.rho.iter().any(|v| *v == 1) {
                return Err(schema_err(
                    format!("{loc}.rho"),
                    format!(
                        "window has {} spans but an active flag needs the full {need_rho}",
                        rh.rho.len()
                    ),
                ));
            }
            let need_ep = program.payback_spans.saturating_sub(1);
            if rh.ep_kw.len() > need_ep {
                return Err(schema_err(
                    format!("{loc}.ep_kw"),
                    format!("window longer than the {need_ep} spans the payback reaches back"),
                ));
            }
            if rh.ep_kw.len() < need_ep && rh.ep_kw.iter().any(|v| *v != 0.0) {
                return Err(schema_err(
                    format!("{loc}.ep_kw"),
                    format!(
                        "window has {} spans but a nonzero rebound needs the full {need_ep}",
                        rh.ep_kw.len()
                    ),
                ));
            }
            if rh.ep_kw.iter().any(|v| *v < 0.0 || !v.is_finite()) || rh.c_last_kw < 0.0 {
                return Err(schema_err(format!("{loc}"), "energy records must be non-negative"));
            }
            if rh.c_last_kw > 0.0 && rh.rho.last().copied() != Some(1) {
                return Err(schema_err(
                    format!("{loc}.c_last_kw"),
                    "a nonzero accumulator needs an execution in the final recorded span",
                ));
            }
            // Left-pad to the exact window the constraints index.
            let mut rho = vec![false; need_rho];
            for (slot, v) in rho
                .iter_mut()
                .skip(need_rho - rh.rho.len())
                .zip(rh.rho.iter())
            {
                *slot = *v == 1;
            }
            let mut ep = vec![0.0; need_ep];
            for (slot, v) in ep.iter_mut().skip(need_ep - rh.ep_kw.len()).zip(rh.ep_kw.iter()) {
                *slot = v * KW;
            }
            program.history = DrHistory {
                rho,
                c_last: rh.c_last_kw * KW,
                ep,
            };
        }
        // Cold start: size the default windows.
        for program in &mut dr_programs {
            let need_rho = program.dur_max.max(program.gap_min);
            if program.history.rho.len() != need_rho {
                program.history.rho = vec![false; need_rho];
            }
            let need_ep = program.payback_spans.saturating_sub(1);
            if program.history.ep.len() != need_ep {
                program.history.ep = vec![0.0; need_ep];
            }
        }

        // -- budgets -------------------------------------------------------
        let mut gamma_load = Vec::with_capacity(nodes.len());
        for rn in &raw.nodes {
            let loc = format!("nodes[bus={}].gamma", rn.bus);
            gamma_load.push(budget(rn.gamma.unwrap_or(raw.params.gamma_load_default), &loc)?);
        }
        let mut gamma_reg = Vec::with_capacity(sources.len());
        for rs in &raw.sources {
            let loc = format!("sources[{}].gamma", rs.id);
            gamma_reg.push(budget(rs.gamma.unwrap_or(raw.params.gamma_reg_default), &loc)?);
        }
        budget(raw.params.gamma_load_default, "params.gamma_load_default")?;
        budget(raw.params.gamma_reg_default, "params.gamma_reg_default")?;

        let mut big_m_overrides: Vec<(String, f64)> =
            raw.params.big_m.into_iter().collect();
        big_m_overrides.sort_by(|a, b| a.0.cmp(&b.0));

        Ok(CaseData {
            name: raw.name,
            horizon,
            nodes,
            branches,
            sources,
            sites,
            carriers,
            modules,
            dr_programs,
            ffgs,
            params: GlobalParams {
                kappa,
                fuel_available: raw.params.fuel_available_l,
                v_min: raw.params.v_min_pu,
                v_max: raw.params.v_max_pu,
                gamma_load,
                gamma_reg,
                epsilon: raw.params.epsilon,
                polygon_sides: sides as usize,
                polygon_mode,
                payback_cyclic: raw.params.payback_cyclic,
                big_m_overrides,
            },
        })
    }
}

fn site_key_name(
    sites: &[Place],
    nodes: &[NodeSpec],
    sources: &[ExternalSource],
    site: SiteId,
) -> String {
    match sites[site.index()] {
        Place::Node(n) => format!("n{}", nodes[n.index()].bus),
        Place::Source(s) => sources[s.index()].id.clone(),
    }
}

/// Branch set must form a single tree over the nodes.
fn check_radial(nodes: &[NodeSpec], branches: &[BranchSpec]) -> Result<(), CaseError> {
    if nodes.is_empty() {
        return Err(CaseError::NonRadial("case has no nodes".into()));
    }
    if branches.len() != nodes.len() - 1 {
        return Err(CaseError::NonRadial(format!(
            "{} branches cannot form a tree over {} nodes",
            branches.len(),
            nodes.len()
        )));
    }
    // Union-find over node indices.
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for b in branches {
        let (ra, rb) = (find(&mut parent, b.from.index()), find(&mut parent, b.to.index()));
        if ra == rb {
            return Err(CaseError::NonRadial(format!(
                "branch {}-{} closes a loop",
                nodes[b.from.index()].bus,
                nodes[b.to.index()].bus
            )));
        }
        parent[ra] = rb;
    }
    Ok(())
}

/// Inverse of `into_case`: render the in-memory case back into the schema.
pub fn to_raw(case: &CaseData) -> RawCase {
    let site_key = |s: SiteId| case.site_label(s);
    let per = 1.0 / KW;
    RawCase {
        name: case.name.clone(),
        horizon: RawHorizon {
            delta_t_h: case.horizon.delta_t,
            spans: case.horizon.spans as i64,
        },
        params: RawParams {
            kappa: Some(case.params.kappa),
            fuel_available_l: case.params.fuel_available,
            v_min_pu: case.params.v_min,
            v_max_pu: case.params.v_max,
            epsilon: case.params.epsilon,
            polygon_sides: case.params.polygon_sides as i64,
            polygon_mode: match case.params.polygon_mode {
                PolygonMode::Envelope => "envelope".into(),
                PolygonMode::Conservative => "conservative".into(),
            },
            gamma_load_default: 0,
            gamma_reg_default: 0,
            payback_cyclic: case.params.payback_cyclic,
            big_m: case.params.big_m_overrides.iter().cloned().collect(),
        },
        nodes: case
            .nodes
            .iter()
            .enumerate()
            .map(|(idx, n)| RawNode {
                bus: n.bus as i64,
                weight: n.weight,
                qp_ratio: n.qp_ratio,
                load_kw: n.load.iter().map(|v| v * per).collect(),
                dev_up_kw: n.dev_up.iter().map(|v| v * per).collect(),
                dev_down_kw: n.dev_down.iter().map(|v| v * per).collect(),
                smess_site: n.site.is_some(),
                class: match n.class {
                    CustomerClass::Commercial => "commercial".into(),
                    CustomerClass::Residential => "residential".into(),
                    CustomerClass::None => "none".into(),
                },
                gamma: Some(case.params.gamma_load[idx] as i64),
            })
            .collect(),
        branches: case
            .branches
            .iter()
            .map(|b| RawBranch {
                from: case.nodes[b.from.index()].bus as i64,
                to: case.nodes[b.to.index()].bus as i64,
                r_pu: b.r,
                x_pu: b.x,
                s_max_kva: b.s_max * per,
            })
            .collect(),
        sources: case
            .sources
            .iter()
            .enumerate()
            .map(|(idx, s)| match &s.kind {
                SourceKind::Substation { spare } => RawSource {
                    id: s.id.clone(),
                    kind: "substation".into(),
                    output_kw: Vec::new(),
                    dev_up_kw: Vec::new(),
                    dev_down_kw: Vec::new(),
                    spare_kw: Some(spare * per),
                    gamma: Some(case.params.gamma_reg[idx] as i64),
                },
                SourceKind::Reg {
                    output,
                    dev_up,
                    dev_down,
                } => RawSource {
                    id: s.id.clone(),
                    kind: "reg".into(),
                    output_kw: output.iter().map(|v| v * per).collect(),
                    dev_up_kw: dev_up.iter().map(|v| v * per).collect(),
                    dev_down_kw: dev_down.iter().map(|v| v * per).collect(),
                    spare_kw: None,
                    gamma: Some(case.params.gamma_reg[idx] as i64),
                },
            })
            .collect(),
        carriers: case
            .carriers
            .iter()
            .map(|c| {
                let mut travel = Vec::new();
                for a in 0..case.sites.len() {
                    for b in 0..case.sites.len() {
                        if a == b {
                            continue;
                        }
                        let t = c.travel[a][b];
                        // Emit the upper triangle, plus the reverse direction
                        // whenever the matrix is asymmetric.
                        if a < b || c.travel[b][a] != t {
                            travel.push((
                                site_key(SiteId(a)),
                                site_key(SiteId(b)),
                                t as i64,
                            ));
                        }
                    }
                }
                RawCarrier {
                    id: c.id.clone(),
                    fuel_l_per_travel_h: c.fuel_per_span,
                    capacity: c.capacity,
                    start: site_key(c.start),
                    travel,
                }
            })
            .collect(),
        modules: case
            .modules
            .iter()
            .map(|m| RawModule {
                id: m.id.clone(),
                width: m.width,
                energy_kwh: m.energy * per,
                p_charge_max_kw: m.p_charge_max * per,
                p_discharge_max_kw: m.p_discharge_max * per,
                s_rating_kva: m.s_rating * per,
                eff_charge: m.eff_charge,
                eff_discharge: m.eff_discharge,
                soc_min: m.soc_min,
                soc_max: m.soc_max,
                soc_start: m.soc_start,
                start: site_key(m.start),
                pinned: m.pinned,
            })
            .collect(),
        dr: case
            .dr_programs
            .iter()
            .map(|p| RawDr {
                node: case.nodes[p.node.index()].bus as i64,
                tau_min: p.tau_min,
                tau_max: p.tau_max,
                dur_max: p.dur_max as i64,
                dur_min: p.dur_min as i64,
                gap_min: p.gap_min as i64,
                total_max: p.total_max as i64,
                payback_spans: p.payback_spans as i64,
                payback_gain: p.payback_gain.clone(),
                enabled: p.enabled,
            })
            .collect(),
        ffgs: case
            .ffgs
            .iter()
            .map(|f| RawFfg {
                id: f.id.clone(),
                node: case.nodes[f.node.index()].bus as i64,
                p_max_kw: f.p_max * per,
                q_max_kvar: f.q_max * per,
                s_rating_kva: f.s_rating * per,
                fuel_l_per_kwh: f.fuel_per_mwh * KW,
            })
            .collect(),
        history: case
            .dr_programs
            .iter()
            .filter(|p| {
                p.history.rho.iter().any(|v| *v)
                    || p.history.c_last != 0.0
                    || p.history.ep.iter().any(|v| *v != 0.0)
            })
            .map(|p| RawHistory {
                node: case.nodes[p.node.index()].bus as i64,
                rho: p.history.rho.iter().map(|v| *v as i64).collect(),
                c_last_kw: p.history.c_last * per,
                ep_kw: p.history.ep.iter().map(|v| v * per).collect(),
            })
            .collect(),
    }
}

/// Parse a case document from TOML text.
pub fn parse_case(text: &str) -> Result<CaseData, CaseError> {
    let raw: RawCase = toml::from_str(text).map_err(|e| CaseError::Parse(e.to_string()))?;
    raw.into_case()
}

pub fn load_case(path: &Path) -> Result<CaseData, CaseError> {
    let text = std::fs::read_to_string(path).map_err(|e| CaseError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_case(&text)
}

pub fn save_case(case: &CaseData, path: &Path) -> Result<(), CaseError> {
    let raw = to_raw(case);
    let text = toml::to_string_pretty(&raw).map_err(|e| CaseError::Parse(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| CaseError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
