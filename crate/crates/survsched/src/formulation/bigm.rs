//! Structural big-M values, one per constraint family that needs them.
//!
//! Each value is the tightest bound the case data supports: the abandonment
//! accounting uses the full-horizon load envelope, the DR rows use the peak
//! reducible load, the served-load gating adds the payback headroom on top of
//! the load envelope, and the forced-continuation rows use the longest travel
//! time plus one. `params.big_m` overrides a family wholesale when set.

use crate::model::{CaseData, NodeId};

#[derive(Debug, Clone)]
pub struct BigMTable {
    /// Per node, family 2e: whole-horizon upper load envelope.
    pub abandon: Vec<f64>,
    /// Per DR program, family 7b: peak reducible load.
    pub dr: Vec<f64>,
    /// Per DR program, families 8a/8b: accumulation cap for one horizon.
    pub accum: Vec<f64>,
    /// Per node, family 10a: peak load envelope plus payback headroom.
    pub load: Vec<f64>,
    /// Family 3e: longest travel time plus one.
    pub travel: f64,
}

impl BigMTable {
    pub fn for_case(case: &CaseData) -> Self {
        let override_for = |label: &str| -> Option<f64> {
            case.params
                .big_m_overrides
                .iter()
                .find(|(l, _)| l == label)
                .map(|(_, m)| *m)
        };

        let envelope_sum: Vec<f64> = case
            .nodes
            .iter()
            .map(|n| {
                n.load
                    .iter()
                    .zip(&n.dev_up)
                    .map(|(l, d)| l + d)
                    .sum::<f64>()
            })
            .collect();
        let envelope_peak: Vec<f64> = case
            .nodes
            .iter()
            .map(|n| {
                n.load
                    .iter()
                    .zip(&n.dev_up)
                    .map(|(l, d)| l + d)
                    .fold(0.0, f64::max)
            })
            .collect();

        let abandon = match override_for("2e") {
            Some(m) => vec![m; case.nodes.len()],
            None => envelope_sum.clone(),
        };

        let mut dr = Vec::with_capacity(case.dr_programs.len());
        let mut accum = Vec::with_capacity(case.dr_programs.len());
        for program in &case.dr_programs {
            let i = program.node.index();
            dr.push(
                override_for("7b").unwrap_or(program.tau_max * envelope_peak[i]),
            );
            // An execution can cross the horizon boundary, so the carried-in
            // accumulator and rebound records extend the cap.
            let carried = program
                .history
                .c_last
                .max(program.history.ep.iter().cloned().fold(0.0, f64::max));
            let cap = program.tau_max * envelope_sum[i] + carried;
            accum.push(override_for("8a").unwrap_or(cap));
        }

        let load = case
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                if let Some(m) = override_for("10a") {
                    return m;
                }
                let headroom = n
                    .dr
                    .map(|p| {
                        let program = &case.dr_programs[p];
                        let gain: f64 = program.payback_gain.iter().sum();
                        gain * accum[p]
                    })
                    .unwrap_or(0.0);
                envelope_peak[i] + headroom
            })
            .collect();

        let travel = override_for("3e").unwrap_or(case.max_travel() as f64 + 1.0);

        BigMTable {
            abandon,
            dr,
            accum,
            load,
            travel,
        }
    }

    pub fn abandon_for(&self, node: NodeId) -> f64 {
        self.abandon[node.index()]
    }

    pub fn load_for(&self, node: NodeId) -> f64 {
        self.load[node.index()]
    }

    /// Family -> largest value, for the `inspect` diagnostic output.
    pub fn summary(&self) -> Vec<(&'static str, f64)> {
        let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
        vec![
            ("2e", max(&self.abandon)),
            ("7b", max(&self.dr)),
            ("8a/8b", max(&self.accum)),
            ("10a", max(&self.load)),
            ("3e", self.travel),
        ]
    }
}
