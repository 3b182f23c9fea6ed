//! Variable registry: every decision family of the model, keyed by entity and
//! span, mapped to its [`VarId`].
//!
//! Span indexing: `t = 0` is the initial state, scheduling spans run
//! `1..=D`. The DR execution flags and the payback pool extend to negative
//! spans, which hold the spliced records of the previous horizon; those keys
//! are `i64`.

use std::collections::HashMap;

use crate::milp::{MilpModel, ModelError, Stage, VarId, VarKind};
use crate::model::{CarrierId, CaseData, FfgId, ModuleId, NodeId, Place, SiteId, SourceKind, SrcId};

#[derive(Debug, Default)]
pub struct VarIndex {
    pub spans: usize,
    // First stage: travel, custody, mode flags, pick-up, DR execution.
    pub parked: HashMap<(CarrierId, SiteId, usize), VarId>,
    pub traveling: HashMap<(CarrierId, SiteId, usize), VarId>,
    pub travel_need: HashMap<(CarrierId, usize), VarId>,
    pub travel_residual: HashMap<(CarrierId, usize), VarId>,
    pub direction_hold: HashMap<(CarrierId, usize), VarId>,
    pub at_site: HashMap<(ModuleId, SiteId, usize), VarId>,
    pub on_carrier: HashMap<(ModuleId, CarrierId, usize), VarId>,
    pub arrival: HashMap<(CarrierId, SiteId, ModuleId, usize), VarId>,
    pub chg_flag: HashMap<(ModuleId, SiteId, usize), VarId>,
    pub dis_flag: HashMap<(ModuleId, SiteId, usize), VarId>,
    pub picked: HashMap<NodeId, VarId>,
    pub dr_on: HashMap<(NodeId, i64), VarId>,
    pub fuel_travel: Option<VarId>,
    // Second stage: power, state of charge, loads, flows, voltages.
    pub p_chg: HashMap<(ModuleId, SiteId, usize), VarId>,
    pub p_dis: HashMap<(ModuleId, SiteId, usize), VarId>,
    pub q_mod: HashMap<(ModuleId, SiteId, usize), VarId>,
    pub soc: HashMap<(ModuleId, usize), VarId>,
    pub p_dr: HashMap<(NodeId, usize), VarId>,
    pub dr_accum: HashMap<(NodeId, usize), VarId>,
    pub payback_pool: HashMap<(NodeId, i64), VarId>,
    pub p_payback: HashMap<(NodeId, usize), VarId>,
    pub p_ffg: HashMap<(FfgId, usize), VarId>,
    pub q_ffg: HashMap<(FfgId, usize), VarId>,
    pub p_load: HashMap<(NodeId, usize), VarId>,
    pub q_load: HashMap<(NodeId, usize), VarId>,
    pub p_in_storage: HashMap<(Place, usize), VarId>,
    pub q_in_storage: HashMap<(Place, usize), VarId>,
    pub p_in_gen: HashMap<(NodeId, usize), VarId>,
    pub q_in_gen: HashMap<(NodeId, usize), VarId>,
    pub p_flow: HashMap<(usize, usize), VarId>,
    pub q_flow: HashMap<(usize, usize), VarId>,
    pub v_sq: HashMap<(NodeId, usize), VarId>,
    pub abandoned: HashMap<NodeId, VarId>,
    pub fuel_gen: Option<VarId>,
    pub dr_total: Option<VarId>,
    pub abandon_total: Option<VarId>,
    // Uncertainty: deviation activations per entity and span.
    pub u_load_up: HashMap<(NodeId, usize), VarId>,
    pub u_load_dn: HashMap<(NodeId, usize), VarId>,
    pub u_reg_up: HashMap<(SrcId, usize), VarId>,
    pub u_reg_dn: HashMap<(SrcId, usize), VarId>,
    /// Branches oriented parent -> child with the tree rooted at the first
    /// node; flow variables are positive in that direction.
    pub oriented: Vec<(NodeId, NodeId)>,
}

impl VarIndex {
    pub fn psi11(&self) -> VarId {
        self.fuel_travel.expect("variables registered")
    }
    pub fn psi12(&self) -> VarId {
        self.fuel_gen.expect("variables registered")
    }
    pub fn psi2(&self) -> VarId {
        self.dr_total.expect("variables registered")
    }
    pub fn psi3(&self) -> VarId {
        self.abandon_total.expect("variables registered")
    }

    /// DR execution flag at any splice index (history spans included).
    pub fn rho(&self, node: NodeId, t: i64) -> VarId {
        self.dr_on[&(node, t)]
    }

    /// Affine form of the realized load: forecast constant plus deviation
    /// terms on the uncertainty variables (empty when the node is certain).
    pub fn load_tilde(&self, case: &CaseData, i: NodeId, t: usize) -> (Vec<(VarId, f64)>, f64) {
        let node = case.node(i);
        let mut terms = Vec::new();
        if let Some(up) = self.u_load_up.get(&(i, t)) {
            terms.push((*up, node.dev_up[t - 1]));
        }
        if let Some(dn) = self.u_load_dn.get(&(i, t)) {
            terms.push((*dn, -node.dev_down[t - 1]));
        }
        (terms, node.load[t - 1])
    }

    /// Affine form of the realized REG output.
    pub fn reg_tilde(&self, case: &CaseData, s: SrcId, t: usize) -> (Vec<(VarId, f64)>, f64) {
        let SourceKind::Reg {
            output,
            dev_up,
            dev_down,
        } = &case.sources[s.index()].kind
        else {
            return (Vec::new(), f64::INFINITY);
        };
        let mut terms = Vec::new();
        if let Some(up) = self.u_reg_up.get(&(s, t)) {
            terms.push((*up, dev_up[t - 1]));
        }
        if let Some(dn) = self.u_reg_dn.get(&(s, t)) {
            terms.push((*dn, -dev_down[t - 1]));
        }
        (terms, output[t - 1])
    }
}

/// Orient the radial branch set parent -> child from the first node.
pub fn orient_tree(case: &CaseData) -> Vec<(NodeId, NodeId)> {
    let n = case.nodes.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (b, br) in case.branches.iter().enumerate() {
        adj[br.from.index()].push((br.to.index(), b));
        adj[br.to.index()].push((br.from.index(), b));
    }
    let mut oriented: Vec<(NodeId, NodeId)> = case
        .branches
        .iter()
        .map(|b| (b.from, b.to))
        .collect();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for &(j, b) in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                oriented[b] = (NodeId(i), NodeId(j));
                stack.push(j);
            }
        }
    }
    oriented
}

pub fn register_variables(model: &mut MilpModel, case: &CaseData) -> Result<VarIndex, ModelError> {
    let mut vx = VarIndex {
        spans: case.spans(),
        oriented: orient_tree(case),
        ..Default::default()
    };
    let spans = case.spans();
    let node_key = |i: NodeId| format!("n{}", case.node(i).bus);
    let site_key = |s: SiteId| case.site_label(s);

    // ---- first stage ----------------------------------------------------
    for (j, carrier) in case.carriers.iter().enumerate() {
        let j_id = CarrierId(j);
        let max_t = carrier.travel.iter().flatten().copied().max().unwrap_or(0) as f64;
        for t in 0..=spans {
            for s in 0..case.sites.len() {
                let s_id = SiteId(s);
                let x = model.add_binary(
                    format!("x[j={},i={},t={}]", carrier.id, site_key(s_id), t),
                    Stage::First,
                )?;
                vx.parked.insert((j_id, s_id, t), x);
                let v = model.add_binary(
                    format!("v[j={},i={},t={}]", carrier.id, site_key(s_id), t),
                    Stage::First,
                )?;
                vx.traveling.insert((j_id, s_id, t), v);
            }
            let s_var = model.add_var(
                format!("S[j={},t={}]", carrier.id, t),
                VarKind::Continuous,
                0.0,
                max_t,
                Stage::First,
            )?;
            vx.travel_need.insert((j_id, t), s_var);
            let r_var = model.add_var(
                format!("R[j={},t={}]", carrier.id, t),
                VarKind::Continuous,
                0.0,
                max_t,
                Stage::First,
            )?;
            vx.travel_residual.insert((j_id, t), r_var);
            let w = model.add_binary(format!("omega[j={},t={}]", carrier.id, t), Stage::First)?;
            vx.direction_hold.insert((j_id, t), w);
        }
    }

    for (k, module) in case.modules.iter().enumerate() {
        let k_id = ModuleId(k);
        for t in 0..=spans {
            for s in 0..case.sites.len() {
                let s_id = SiteId(s);
                let z = model.add_binary(
                    format!("zeta[k={},i={},t={}]", module.id, site_key(s_id), t),
                    Stage::First,
                )?;
                if module.pinned {
                    let pin = if s_id == module.start { 1.0 } else { 0.0 };
                    model.fix_var(z, pin);
                }
                vx.at_site.insert((k_id, s_id, t), z);
            }
            for (j, carrier) in case.carriers.iter().enumerate() {
                let g = model.add_binary(
                    format!("gamma[k={},j={},t={}]", module.id, carrier.id, t),
                    Stage::First,
                )?;
                if module.pinned {
                    model.fix_var(g, 0.0);
                }
                vx.on_carrier.insert((k_id, CarrierId(j), t), g);
            }
        }
        for t in 1..=spans {
            for (j, carrier) in case.carriers.iter().enumerate() {
                for s in 0..case.sites.len() {
                    let s_id = SiteId(s);
                    let a = model.add_binary(
                        format!(
                            "alpha[j={},i={},k={},t={}]",
                            carrier.id,
                            site_key(s_id),
                            module.id,
                            t
                        ),
                        Stage::First,
                    )?;
                    vx.arrival.insert((CarrierId(j), s_id, k_id, t), a);
                }
            }
            for s in 0..case.sites.len() {
                let s_id = SiteId(s);
                let c = model.add_binary(
                    format!("chg[k={},i={},t={}]", module.id, site_key(s_id), t),
                    Stage::First,
                )?;
                vx.chg_flag.insert((k_id, s_id, t), c);
                let d = model.add_binary(
                    format!("dis[k={},i={},t={}]", module.id, site_key(s_id), t),
                    Stage::First,
                )?;
                vx.dis_flag.insert((k_id, s_id, t), d);
            }
        }
    }

    for (i, _) in case.nodes.iter().enumerate() {
        let i_id = NodeId(i);
        let d = model.add_binary(format!("delta[i={}]", node_key(i_id)), Stage::First)?;
        vx.picked.insert(i_id, d);
    }

    for program in &case.dr_programs {
        let i = program.node;
        let hist = program.dur_max.max(program.gap_min) as i64;
        for t in (1 - hist)..=(spans as i64) {
            let r = model.add_binary(format!("rho[i={},t={}]", node_key(i), t), Stage::First)?;
            if t >= 1 && !program.enabled {
                model.fix_var(r, 0.0);
            }
            vx.dr_on.insert((i, t), r);
        }
    }

    vx.fuel_travel = Some(model.add_var(
        "psi11",
        VarKind::Continuous,
        0.0,
        f64::INFINITY,
        Stage::First,
    )?);

    // ---- second stage -----------------------------------------------------
    for (k, module) in case.modules.iter().enumerate() {
        let k_id = ModuleId(k);
        for t in 1..=spans {
            for s in 0..case.sites.len() {
                let s_id = SiteId(s);
                let pc = model.add_var(
                    format!("Pc[k={},i={},t={}]", module.id, site_key(s_id), t),
                    VarKind::Continuous,
                    0.0,
                    module.p_charge_max,
                    Stage::Second,
                )?;
                vx.p_chg.insert((k_id, s_id, t), pc);
                let pd = model.add_var(
                    format!("Pd[k={},i={},t={}]", module.id, site_key(s_id), t),
                    VarKind::Continuous,
                    0.0,
                    module.p_discharge_max,
                    Stage::Second,
                )?;
                vx.p_dis.insert((k_id, s_id, t), pd);
                let q = model.add_var(
                    format!("Qs[k={},i={},t={}]", module.id, site_key(s_id), t),
                    VarKind::Continuous,
                    -module.s_rating,
                    module.s_rating,
                    Stage::Second,
                )?;
                vx.q_mod.insert((k_id, s_id, t), q);
            }
        }
        for t in 0..=spans {
            let (lo, hi) = if t == 0 {
                (module.soc_start, module.soc_start)
            } else {
                (module.soc_min, module.soc_max)
            };
            let s = model.add_var(
                format!("soc[k={},t={}]", module.id, t),
                VarKind::Continuous,
                lo,
                hi,
                Stage::Second,
            )?;
            vx.soc.insert((k_id, t), s);
        }
    }

    for program in &case.dr_programs {
        let i = program.node;
        for t in 1..=spans {
            let p = model.add_var(
                format!("Pdr[i={},t={}]", node_key(i), t),
                VarKind::Continuous,
                0.0,
                f64::INFINITY,
                Stage::Second,
            )?;
            vx.p_dr.insert((i, t), p);
            let pep = model.add_var(
                format!("Pep[i={},t={}]", node_key(i), t),
                VarKind::Continuous,
                0.0,
                f64::INFINITY,
                Stage::Second,
            )?;
            vx.p_payback.insert((i, t), pep);
        }
        for t in 0..=spans {
            let c = model.add_var(
                format!("Cacc[i={},t={}]", node_key(i), t),
                VarKind::Continuous,
                0.0,
                f64::INFINITY,
                Stage::Second,
            )?;
            vx.dr_accum.insert((i, t), c);
        }
        let pdu = program.payback_spans as i64;
        for t in (1 - pdu)..=(spans as i64 - 1) {
            let ep = model.add_var(
                format!("EP[i={},t={}]", node_key(i), t),
                VarKind::Continuous,
                0.0,
                f64::INFINITY,
                Stage::Second,
            )?;
            vx.payback_pool.insert((i, t), ep);
        }
    }

    for (f, ffg) in case.ffgs.iter().enumerate() {
        let f_id = FfgId(f);
        for t in 1..=spans {
            let p = model.add_var(
                format!("Pf[f={},t={}]", ffg.id, t),
                VarKind::Continuous,
                0.0,
                ffg.p_max,
                Stage::Second,
            )?;
            vx.p_ffg.insert((f_id, t), p);
            let q = model.add_var(
                format!("Qf[f={},t={}]", ffg.id, t),
                VarKind::Continuous,
                0.0,
                ffg.q_max,
                Stage::Second,
            )?;
            vx.q_ffg.insert((f_id, t), q);
        }
    }

    for (i, _) in case.nodes.iter().enumerate() {
        let i_id = NodeId(i);
        for t in 1..=spans {
            let pl = model.add_var(
                format!("Pl[i={},t={}]", node_key(i_id), t),
                VarKind::Continuous,
                0.0,
                f64::INFINITY,
                Stage::Second,
            )?;
            vx.p_load.insert((i_id, t), pl);
            let ql = model.add_var(
                format!("Ql[i={},t={}]", node_key(i_id), t),
                VarKind::Continuous,
                f64::NEG_INFINITY,
                f64::INFINITY,
                Stage::Second,
            )?;
            vx.q_load.insert((i_id, t), ql);
            let vsq = model.add_var(
                format!("V2[i={},t={}]", node_key(i_id), t),
                VarKind::Continuous,
                0.0,
                f64::INFINITY,
                Stage::Second,
            )?;
            vx.v_sq.insert((i_id, t), vsq);
        }
        let chi = model.add_var(
            format!("chi[i={}]", node_key(i_id)),
            VarKind::Continuous,
            0.0,
            f64::INFINITY,
            Stage::Second,
        )?;
        vx.abandoned.insert(i_id, chi);
    }

    // Storage exchange exists for every place; rows zero it off-site.
    let places: Vec<(Place, String)> = case
        .nodes
        .iter()
        .enumerate()
        .map(|(i, _)| (Place::Node(NodeId(i)), node_key(NodeId(i))))
        .chain(
            case.sources
                .iter()
                .enumerate()
                .map(|(s, src)| (Place::Source(SrcId(s)), src.id.clone())),
        )
        .collect();
    for (place, key) in &places {
        for t in 1..=spans {
            let p = model.add_var(
                format!("PinS[p={key},t={t}]"),
                VarKind::Continuous,
                f64::NEG_INFINITY,
                f64::INFINITY,
                Stage::Second,
            )?;
            vx.p_in_storage.insert((*place, t), p);
            let q = model.add_var(
                format!("QinS[p={key},t={t}]"),
                VarKind::Continuous,
                f64::NEG_INFINITY,
                f64::INFINITY,
                Stage::Second,
            )?;
            vx.q_in_storage.insert((*place, t), q);
        }
    }
    for (i, _) in case.nodes.iter().enumerate() {
        let i_id = NodeId(i);
        for t in 1..=spans {
            let p = model.add_var(
                format!("PinF[i={},t={}]", node_key(i_id), t),
                VarKind::Continuous,
                f64::NEG_INFINITY,
                f64::INFINITY,
                Stage::Second,
            )?;
            vx.p_in_gen.insert((i_id, t), p);
            let q = model.add_var(
                format!("QinF[i={},t={}]", node_key(i_id), t),
                VarKind::Continuous,
                f64::NEG_INFINITY,
                f64::INFINITY,
                Stage::Second,
            )?;
            vx.q_in_gen.insert((i_id, t), q);
        }
    }

    for (b, (parent, child)) in vx.oriented.clone().into_iter().enumerate() {
        let label = format!(
            "l={}-{}",
            case.node(parent).bus,
            case.node(child).bus
        );
        let cap = case.branches[b].s_max;
        for t in 1..=spans {
            let p = model.add_var(
                format!("Pbr[{label},t={t}]"),
                VarKind::Continuous,
                -cap,
                cap,
                Stage::Second,
            )?;
            vx.p_flow.insert((b, t), p);
            let q = model.add_var(
                format!("Qbr[{label},t={t}]"),
                VarKind::Continuous,
                -cap,
                cap,
                Stage::Second,
            )?;
            vx.q_flow.insert((b, t), q);
        }
    }

    vx.fuel_gen = Some(model.add_var(
        "psi12",
        VarKind::Continuous,
        0.0,
        f64::INFINITY,
        Stage::Second,
    )?);
    vx.dr_total = Some(model.add_var(
        "psi2",
        VarKind::Continuous,
        0.0,
        f64::INFINITY,
        Stage::Second,
    )?);
    vx.abandon_total = Some(model.add_var(
        "psi3",
        VarKind::Continuous,
        0.0,
        f64::INFINITY,
        Stage::Second,
    )?);

    // ---- uncertainty -------------------------------------------------------
    for (i, node) in case.nodes.iter().enumerate() {
        let i_id = NodeId(i);
        let uncertain = node.dev_up.iter().any(|d| *d > 0.0)
            || node.dev_down.iter().any(|d| *d > 0.0);
        if !uncertain {
            continue;
        }
        for t in 1..=spans {
            let up = model.add_binary(
                format!("uLup[i={},t={}]", node_key(i_id), t),
                Stage::Uncertainty,
            )?;
            vx.u_load_up.insert((i_id, t), up);
            let dn = model.add_binary(
                format!("uLdn[i={},t={}]", node_key(i_id), t),
                Stage::Uncertainty,
            )?;
            vx.u_load_dn.insert((i_id, t), dn);
        }
    }
    for (s, source) in case.sources.iter().enumerate() {
        let s_id = SrcId(s);
        let SourceKind::Reg {
            dev_up, dev_down, ..
        } = &source.kind
        else {
            continue;
        };
        if dev_up.iter().all(|d| *d == 0.0) && dev_down.iter().all(|d| *d == 0.0) {
            continue;
        }
        for t in 1..=spans {
            let up = model.add_binary(
                format!("uRup[s={},t={}]", source.id, t),
                Stage::Uncertainty,
            )?;
            vx.u_reg_up.insert((s_id, t), up);
            let dn = model.add_binary(
                format!("uRdn[s={},t={}]", source.id, t),
                Stage::Uncertainty,
            )?;
            vx.u_reg_dn.insert((s_id, t), dn);
        }
    }

    Ok(vx)
}
