//! CPLEX-LP dialect export.
//!
//! Exports are deterministic: variables are emitted in sorted-name order and
//! coefficients use the shortest round-tripping decimal form, so two exports
//! of the same model are byte-identical. Identifiers carry characters the LP
//! grammar forbids (`[ ] =`), so every name passes through a reversible
//! mangler; names longer than the 255-character format limit are replaced by
//! a stable hash and the mapping is written alongside the model.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use super::ir::{MilpModel, Sense, VarKind};

const MAX_NAME: usize = 255;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Rewrite a raw identifier into the LP charset. `[`/`]` become parentheses,
/// `=` becomes `.`, anything else illegal becomes `_`. A leading character
/// the grammar reserves (digits, period, `e`/`E`) gets a `v_` prefix.
fn mangle(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len() + 2);
    for ch in raw.chars() {
        let mapped = match ch {
            '[' => '(',
            ']' => ')',
            '=' => '.',
            'a'..='z' | 'A'..='Z' | '0'..='9' => ch,
            '!' | '"' | '#' | '$' | '%' | '&' | '(' | ')' | ',' | '.' | ';' | '?' | '@' | '_'
            | '\'' | '`' | '{' | '}' | '|' | '~' => ch,
            _ => '_',
        };
        out.push(mapped);
    }
    let needs_prefix = matches!(out.chars().next(), Some('0'..='9') | Some('.') | Some('e') | Some('E') | None);
    if needs_prefix {
        out.insert_str(0, "v_");
    }
    if out.len() > MAX_NAME {
        out = format!("n{:016x}", fnv1a(raw.as_bytes()));
    }
    out
}

fn fmt_coeff(buf: &mut String, coeff: f64, name: &str, first: bool) {
    let mag = coeff.abs();
    if first {
        if coeff < 0.0 {
            let _ = write!(buf, "- ");
        }
    } else if coeff < 0.0 {
        let _ = write!(buf, " - ");
    } else {
        let _ = write!(buf, " + ");
    }
    let _ = write!(buf, "{} {}", mag, name);
}

/// Render the model as LP text; also returns the mangled-name map for any
/// name the mangler had to change.
pub fn lp_string(model: &MilpModel) -> (String, HashMap<String, String>) {
    // Mangled names, disambiguated deterministically on collision.
    let mut mangled: Vec<String> = Vec::with_capacity(model.num_vars());
    let mut used: HashMap<String, usize> = HashMap::new();
    let mut renames: HashMap<String, String> = HashMap::new();
    for def in model.vars() {
        let mut m = mangle(&def.name);
        if let Some(n) = used.get(&m).copied() {
            used.insert(m.clone(), n + 1);
            m = format!("{}__{}", m, n + 1);
        }
        used.entry(m.clone()).or_insert(0);
        if m != def.name {
            renames.insert(m.clone(), def.name.clone());
        }
        mangled.push(m);
    }

    let mut buf = String::new();
    buf.push_str("\\ survsched LP export\n");
    buf.push_str("Minimize\n obj:");
    let mut obj: Vec<(String, f64)> = model
        .objective
        .terms
        .iter()
        .filter(|(_, c)| *c != 0.0)
        .map(|(v, c)| (mangled[v.index()].clone(), *c))
        .collect();
    obj.sort();
    if obj.is_empty() && model.objective.constant == 0.0 {
        buf.push_str(" 0 ");
        buf.push_str(&mangled.first().cloned().unwrap_or_else(|| "x".into()));
    } else {
        let mut first = true;
        let mut line = String::new();
        for (name, c) in &obj {
            fmt_coeff(&mut line, *c, name, first);
            first = false;
        }
        if model.objective.constant != 0.0 {
            let c = model.objective.constant;
            if first {
                let _ = write!(line, "{}", c);
            } else if c < 0.0 {
                let _ = write!(line, " - {}", -c);
            } else {
                let _ = write!(line, " + {}", c);
            }
        }
        buf.push(' ');
        buf.push_str(&line);
    }
    buf.push('\n');

    buf.push_str("Subject To\n");
    for (idx, con) in model.constraints().iter().enumerate() {
        if con.terms.is_empty() {
            continue; // vacuous 0 ? rhs rows have no LP representation
        }
        let mut terms: Vec<(String, f64)> = con
            .terms
            .iter()
            .map(|(v, c)| (mangled[v.index()].clone(), *c))
            .collect();
        terms.sort();
        let _ = write!(buf, " c{}_{}:", idx, mangle(&con.label));
        let mut line = String::new();
        let mut first = true;
        for (name, c) in &terms {
            fmt_coeff(&mut line, *c, name, first);
            first = false;
        }
        let op = match con.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = write!(buf, " {} {} {}\n", line, op, con.rhs);
    }

    buf.push_str("Bounds\n");
    let mut order: Vec<usize> = (0..model.num_vars()).collect();
    order.sort_by(|a, b| mangled[*a].cmp(&mangled[*b]));
    for idx in &order {
        let def = &model.vars()[*idx];
        let name = &mangled[*idx];
        let lb = def.lower;
        let ub = def.upper;
        if lb == ub {
            let _ = write!(buf, " {} = {}\n", name, lb);
        } else if lb.is_infinite() && ub.is_infinite() {
            let _ = write!(buf, " {} free\n", name);
        } else if ub.is_infinite() {
            let _ = write!(buf, " {} >= {}\n", name, lb);
        } else if lb.is_infinite() {
            let _ = write!(buf, " {} <= {}\n", name, ub);
        } else {
            let _ = write!(buf, " {} <= {} <= {}\n", lb, name, ub);
        }
    }

    let binaries: Vec<&str> = order
        .iter()
        .filter(|idx| model.vars()[**idx].kind == VarKind::Binary)
        .map(|idx| mangled[*idx].as_str())
        .collect();
    if !binaries.is_empty() {
        buf.push_str("Binary\n");
        for chunk in binaries.chunks(8) {
            buf.push(' ');
            buf.push_str(&chunk.join(" "));
            buf.push('\n');
        }
    }
    buf.push_str("End\n");
    (buf, renames)
}

/// Write the model to `path` in LP format. When any identifier had to be
/// renamed, the original names are recorded in `<path>.names.json`.
pub fn export_lp(model: &MilpModel, path: &Path) -> io::Result<()> {
    let (text, renames) = lp_string(model);
    fs::write(path, text)?;
    if !renames.is_empty() {
        let sidecar = path.with_extension(format!(
            "{}.names.json",
            path.extension().and_then(|e| e.to_str()).unwrap_or("lp")
        ));
        let map: std::collections::BTreeMap<_, _> = renames.into_iter().collect();
        fs::write(sidecar, serde_json::to_string_pretty(&map)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::ir::{LinearConstraint, MilpModel, Sense, Stage, VarKind};

    fn two_var_model() -> MilpModel {
        let mut m = MilpModel::new();
        let x = m
            .add_var("x[i=1]", VarKind::Continuous, 0.0, f64::INFINITY, Stage::First)
            .unwrap();
        let y = m
            .add_var("y[i=2]", VarKind::Continuous, f64::NEG_INFINITY, 5.0, Stage::First)
            .unwrap();
        m.add_constraint(LinearConstraint::new(
            [(x, 1.0), (y, 2.0)],
            Sense::Ge,
            3.0,
            "toy",
        ))
        .unwrap();
        m.add_objective_term(x, 1.0);
        m.add_objective_term(y, -0.5);
        m
    }

    #[test]
    fn golden_two_var_export() {
        let (text, renames) = lp_string(&two_var_model());
        let expected = "\\ survsched LP export\n\
                        Minimize\n\
                        \u{20}obj: 1 x(i.1) - 0.5 y(i.2)\n\
                        Subject To\n\
                        \u{20}c0_toy: 1 x(i.1) + 2 y(i.2) >= 3\n\
                        Bounds\n\
                        \u{20}x(i.1) >= 0\n\
                        \u{20}y(i.2) <= 5\n\
                        End\n";
        assert_eq!(text, expected);
        assert_eq!(renames.len(), 2);
    }

    #[test]
    fn export_is_deterministic() {
        let a = lp_string(&two_var_model()).0;
        let b = lp_string(&two_var_model()).0;
        assert_eq!(a, b);
    }

    #[test]
    fn long_names_hash_with_mapping() {
        let mut m = MilpModel::new();
        let long = "x".repeat(300);
        m.add_var(long.clone(), VarKind::Continuous, 0.0, 1.0, Stage::First)
            .unwrap();
        let (text, renames) = lp_string(&m);
        assert_eq!(renames.len(), 1);
        let mangled = renames.keys().next().unwrap();
        assert!(mangled.len() <= 255);
        assert!(text.contains(mangled.as_str()));
        assert_eq!(renames[mangled], long);
    }

    #[test]
    fn reserved_leading_chars_get_prefixed() {
        assert_eq!(mangle("eta"), "v_eta");
        assert_eq!(mangle("3a"), "v_3a");
        assert_eq!(mangle("rho[i=4,t=7]"), "rho(i.4,t.7)");
    }
}
