//! Domain types for a scheduling case.
//!
//! Power quantities are stored in MW and energies in MWh (the case file uses
//! kW/kWh; conversion happens at load). Fuel is in liters, voltages in per
//! unit on the case's base. A loaded [`CaseData`] is immutable and fully
//! cross-linked: every id in it is an index into one of its own vectors.

use serde::{Deserialize, Serialize};

macro_rules! index_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
        )]
        pub struct $name(pub usize);

        impl $name {
            pub fn index(self) -> usize {
                self.0
            }
        }
    };
}

index_newtype!(/// Index into `CaseData::nodes`. NodeId);
index_newtype!(/// Index into `CaseData::branches`. BranchId);
index_newtype!(/// Index into `CaseData::sources`. SrcId);
index_newtype!(/// Index into `CaseData::sites` (storage-capable places). SiteId);
index_newtype!(/// Index into `CaseData::carriers`. CarrierId);
index_newtype!(/// Index into `CaseData::modules`. ModuleId);
index_newtype!(/// Index into `CaseData::ffgs`. FfgId);

/// A place a storage module can sit: a network node or an external source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Place {
    Node(NodeId),
    Source(SrcId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    /// Span length in hours.
    pub delta_t: f64,
    /// Number of spans; spans are indexed 1..=spans, 0 is the initial state.
    pub spans: usize,
}

impl Horizon {
    /// Iterate the scheduling spans 1..=D.
    pub fn spans_iter(&self) -> impl Iterator<Item = usize> {
        1..=self.spans
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CustomerClass {
    Commercial,
    Residential,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    /// External bus number from the case file.
    pub bus: u32,
    /// Priority weight of serving this load.
    pub weight: f64,
    /// Reactive-to-active ratio of the load (fixed power factor).
    pub qp_ratio: f64,
    pub class: CustomerClass,
    /// Forecast active load per span, MW.
    pub load: Vec<f64>,
    /// Maximum upward / downward load deviation per span, MW.
    pub dev_up: Vec<f64>,
    pub dev_down: Vec<f64>,
    /// Site index when the node admits storage connections.
    pub site: Option<SiteId>,
    /// DR program index when the node participates in demand response.
    pub dr: Option<usize>,
    /// FFGs hosted at this node.
    pub ffgs: Vec<FfgId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub from: NodeId,
    pub to: NodeId,
    /// Resistance / reactance, per unit.
    pub r: f64,
    pub x: f64,
    /// Apparent power capacity, MVA.
    pub s_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    /// Substation feeder with fixed spare capacity (MW).
    Substation { spare: f64 },
    /// Stranded renewable generation with a forecast output series (MW).
    Reg {
        output: Vec<f64>,
        dev_up: Vec<f64>,
        dev_down: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSource {
    pub id: String,
    pub kind: SourceKind,
    pub site: SiteId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierSpec {
    pub id: String,
    /// Fuel burned per traveling span, liters.
    pub fuel_per_span: f64,
    /// Carrying capacity in module-width units.
    pub capacity: f64,
    /// Travel time in spans between every pair of sites (dense, zero
    /// diagonal).
    pub travel: Vec<Vec<u32>>,
    pub start: SiteId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleSpec {
    pub id: String,
    /// Carrier capacity consumed when loaded.
    pub width: f64,
    /// Energy capacity, MWh.
    pub energy: f64,
    /// Charge / discharge power limits, MW.
    pub p_charge_max: f64,
    pub p_discharge_max: f64,
    /// Apparent power rating, MVA.
    pub s_rating: f64,
    pub eff_charge: f64,
    pub eff_discharge: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_start: f64,
    pub start: SiteId,
    /// Keep the module at its start site for the whole horizon (used by the
    /// stationary-storage case variants).
    pub pinned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrProgram {
    pub node: NodeId,
    /// Load-reduction ratio window.
    pub tau_min: f64,
    pub tau_max: f64,
    /// Longest / shortest single execution, spans.
    pub dur_max: usize,
    pub dur_min: usize,
    /// Minimum gap between two executions, spans.
    pub gap_min: usize,
    /// Total execution budget over the horizon, spans.
    pub total_max: usize,
    /// Payback duration and per-span gain coefficients.
    pub payback_spans: usize,
    pub payback_gain: Vec<f64>,
    pub history: DrHistory,
    /// When false the program stays in the case (normalization still counts
    /// it) but no execution is allowed; used by the no-DR case variants.
    pub enabled: bool,
}

/// Tail of the previous scheduling horizon, used to splice the duration,
/// interval and payback constraints across horizons. All zeros on cold start.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DrHistory {
    /// Execution flags for the last `max(dur_max, gap_min)` spans, oldest
    /// first; the final entry is the last span of the previous horizon.
    pub rho: Vec<bool>,
    /// Accumulated in-event reduction at the end of the previous horizon, MW
    /// summed over spans.
    pub c_last: f64,
    /// Rebound pool for the last `payback_spans - 1` spans, oldest first.
    pub ep: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfgSpec {
    pub id: String,
    pub node: NodeId,
    /// Active / reactive output limits (MW / MVAr) and apparent rating (MVA).
    pub p_max: f64,
    pub q_max: f64,
    pub s_rating: f64,
    /// Fuel per unit of generated energy, L/MWh.
    pub fuel_per_mwh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolygonMode {
    /// Polygon circumscribes the disc (accepts slightly more than the true
    /// rating, never rejects a feasible point).
    Envelope,
    /// Rating shrunk by cos(pi/n) so no accepted point exceeds the disc.
    Conservative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalParams {
    /// Objective weights for fuel, DR reduction and abandoned demand.
    pub kappa: [f64; 3],
    /// Fuel available at the start of the horizon, liters.
    pub fuel_available: f64,
    /// Voltage magnitude window, per unit (applied to every node).
    pub v_min: f64,
    pub v_max: f64,
    /// Uncertainty budgets per load node / REG source.
    pub gamma_load: Vec<u32>,
    pub gamma_reg: Vec<u32>,
    /// Direction-holding slack in the carrier transition constraints.
    pub epsilon: f64,
    pub polygon_sides: usize,
    pub polygon_mode: PolygonMode,
    /// Literal cyclic reading of the payback accumulator boundary condition.
    pub payback_cyclic: bool,
    /// Per-family big-M overrides keyed by equation label.
    pub big_m_overrides: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseData {
    pub name: String,
    pub horizon: Horizon,
    pub nodes: Vec<NodeSpec>,
    pub branches: Vec<BranchSpec>,
    pub sources: Vec<ExternalSource>,
    /// Storage-capable places: nodes with `smess_site` plus every source.
    pub sites: Vec<Place>,
    pub carriers: Vec<CarrierSpec>,
    pub modules: Vec<ModuleSpec>,
    pub dr_programs: Vec<DrProgram>,
    pub ffgs: Vec<FfgSpec>,
    pub params: GlobalParams,
}

impl CaseData {
    pub fn spans(&self) -> usize {
        self.horizon.spans
    }

    pub fn delta_t(&self) -> f64 {
        self.horizon.delta_t
    }

    pub fn node(&self, id: NodeId) -> &NodeSpec {
        &self.nodes[id.index()]
    }

    pub fn site_label(&self, site: SiteId) -> String {
        match self.sites[site.index()] {
            Place::Node(n) => format!("n{}", self.nodes[n.index()].bus),
            Place::Source(s) => self.sources[s.index()].id.clone(),
        }
    }

    /// Node ids participating in DR, in program order.
    pub fn dr_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.dr_programs.iter().map(|p| p.node)
    }

    /// Forecast load of node `i` during span `t` (1-based), MW.
    pub fn load_at(&self, i: NodeId, t: usize) -> f64 {
        self.nodes[i.index()].load[t - 1]
    }

    pub fn max_travel(&self) -> u32 {
        self.carriers
            .iter()
            .flat_map(|c| c.travel.iter().flatten())
            .copied()
            .max()
            .unwrap_or(0)
    }
}

/// Normalization bounds for the three objective terms: the largest possible
/// fuel burn, DR-reduced demand and abandoned demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    pub fuel: f64,
    pub dr: f64,
    pub abandon: f64,
}
