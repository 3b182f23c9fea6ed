//! External-process backend: export the model as an LP file, hand it to a
//! solver command, read the solution back as JSON.
//!
//! The command receives the LP path and `--out <json>`; the JSON document is
//! `{"status": ..., "objective": ..., "values": {lp_name: value}}` keyed by
//! the (mangled) LP identifiers. The repository ships `scripts/lp_solve.py`
//! as the reference command.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use serde::Deserialize;

use super::backend::{Solution, SolveBackend, SolveError, SolveOptions, SolveStats, SolveStatus};
use super::ir::MilpModel;
use super::lp_format;

#[derive(Debug, Clone)]
pub struct ExternalLpBackend {
    /// Command prefix, e.g. `["python3", "scripts/lp_solve.py"]`.
    pub command: Vec<String>,
    /// Where to place the LP and solution files; a temp dir when `None`.
    pub work_dir: Option<PathBuf>,
}

impl ExternalLpBackend {
    pub fn new(command: Vec<String>) -> Self {
        ExternalLpBackend {
            command,
            work_dir: None,
        }
    }
}

#[derive(Deserialize)]
struct WireSolution {
    status: String,
    objective: Option<f64>,
    values: Option<HashMap<String, f64>>,
}

impl SolveBackend for ExternalLpBackend {
    fn name(&self) -> &str {
        "external-lp"
    }

    fn solve_raw(&self, model: &MilpModel, opts: &SolveOptions) -> Result<Solution, SolveError> {
        if self.command.is_empty() {
            return Err(SolveError::BackendUnavailable(
                self.name().into(),
                "empty solver command".into(),
            ));
        }
        let started = Instant::now();
        let tmp;
        let dir = match &self.work_dir {
            Some(d) => d.clone(),
            None => {
                tmp = std::env::temp_dir().join(format!(
                    "survsched-lp-{}-{}",
                    std::process::id(),
                    started.elapsed().as_nanos()
                ));
                tmp.clone()
            }
        };
        std::fs::create_dir_all(&dir)?;
        let lp_path = dir.join("model.lp");
        let sol_path = dir.join("solution.json");
        let (lp_text, renames) = lp_format::lp_string(model);
        std::fs::write(&lp_path, lp_text)?;

        let mut cmd = Command::new(&self.command[0]);
        cmd.args(&self.command[1..])
            .arg(&lp_path)
            .arg("--out")
            .arg(&sol_path)
            .arg("--gap")
            .arg(format!("{}", opts.mip_gap));
        if let Some(limit) = opts.time_limit {
            cmd.arg("--time-limit").arg(format!("{}", limit.as_secs_f64()));
        }
        let output = cmd.output().map_err(|e| {
            SolveError::BackendUnavailable(self.name().into(), format!("{}: {e}", self.command[0]))
        })?;
        if !output.status.success() {
            return Err(SolveError::SolverInternal {
                backend: self.name().into(),
                message: String::from_utf8_lossy(&output.stderr).into_owned(),
            });
        }
        let wire: WireSolution = serde_json::from_slice(&std::fs::read(&sol_path)?)
            .map_err(|e| SolveError::SolverInternal {
                backend: self.name().into(),
                message: format!("malformed solution json: {e}"),
            })?;

        let status = match wire.status.as_str() {
            "optimal" => SolveStatus::Optimal,
            "infeasible" => SolveStatus::Infeasible,
            "unbounded" => SolveStatus::Unbounded,
            "time_limit" => SolveStatus::TimeLimit,
            other => {
                return Err(SolveError::SolverInternal {
                    backend: self.name().into(),
                    message: format!("solver reported `{other}`"),
                })
            }
        };

        // Solution values come back keyed by LP identifier; join on the
        // mangled names to restore VarId order.
        let values = match (&wire.values, status) {
            (Some(map), SolveStatus::Optimal | SolveStatus::TimeLimit) => {
                let orig_to_lp: HashMap<&str, &str> = renames
                    .iter()
                    .map(|(m, orig)| (orig.as_str(), m.as_str()))
                    .collect();
                let mut out = vec![0.0; model.num_vars()];
                for (idx, def) in model.vars().iter().enumerate() {
                    let lp_name = orig_to_lp.get(def.name.as_str()).copied().unwrap_or(&def.name);
                    match map.get(lp_name) {
                        Some(v) => out[idx] = *v,
                        None => out[idx] = def.lower.max(0.0).min(def.upper),
                    }
                }
                Some(out)
            }
            _ => None,
        };
        let objective = match &values {
            Some(vals) => model.objective_value(|v| vals[v.index()]),
            None => wire.objective.unwrap_or(f64::NAN),
        };

        Ok(Solution {
            status,
            objective,
            values,
            stats: SolveStats {
                wall: started.elapsed(),
                mip_gap: None,
            },
        })
    }
}
