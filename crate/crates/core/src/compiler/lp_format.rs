//! LP interchange text (CPLEX LP format) export and solution import.
//!
//! Variable names are `<kind><object>_e<edge>_<suffix>`, e.g. `b3_e6_H`
//! for input object 3 placed in a SHIFT array on edge 6. The objective is
//! written in femtoseconds so the file round-trips the solver's integer
//! arithmetic exactly. Solutions are consumed as `name value` lines
//! (Gurobi `.sol` style); `#` and `\` lines are comments.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::model::{ConstraintOp, IlpModel};

pub fn write_lp_string(model: &IlpModel) -> String {
    let mut out = String::new();
    out.push_str("\\ layer allocation program; objective unit: femtoseconds saved\n");
    out.push_str("Maximize\n obj:");
    let mut first = true;
    for (i, &c) in model.objective_fs.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let name = model.var_name(i);
        if c >= 0 {
            out.push_str(&format!(" {}{} {}", if first { "" } else { "+ " }, c, name));
        } else {
            out.push_str(&format!(" - {} {}", -c, name));
        }
        first = false;
    }
    if first {
        out.push_str(" 0 dummy");
    }
    out.push_str("\nSubject To\n");
    for (ri, row) in model.constraints.iter().enumerate() {
        out.push_str(&format!(" c{ri}:"));
        let mut lead = true;
        for &(v, k) in &row.terms {
            let name = model.var_name(v);
            if k >= 0 {
                out.push_str(&format!(" {}{} {}", if lead { "" } else { "+ " }, k, name));
            } else {
                out.push_str(&format!(" - {} {}", -k, name));
            }
            lead = false;
        }
        let op = match row.op {
            ConstraintOp::Le => "<=",
            ConstraintOp::Eq => "=",
            ConstraintOp::Ge => ">=",
        };
        out.push_str(&format!(" {op} {}\n", row.rhs));
    }
    out.push_str("Binaries\n");
    for i in 0..model.vars.len() {
        out.push(' ');
        out.push_str(&model.var_name(i));
        if (i + 1) % 8 == 0 {
            out.push('\n');
        }
    }
    if model.vars.len() % 8 != 0 {
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

/// Parses `name value` lines into an assignment. Unknown names error;
/// values are rounded to 0/1 and must be within 1e-4 of integral.
pub fn parse_solution_file(model: &IlpModel, text: &str) -> Result<Vec<bool>> {
    let names: BTreeMap<String, usize> = (0..model.vars.len())
        .map(|i| (model.var_name(i), i))
        .collect();
    let mut values = vec![false; model.vars.len()];
    let mut seen = vec![false; model.vars.len()];
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('\\') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value)) = (parts.next(), parts.next()) else {
            return Err(Error::Solver(format!(
                "solution line {} is not 'name value'",
                ln + 1
            )));
        };
        if name == "obj" || name == "Objective" {
            continue;
        }
        let Some(&vid) = names.get(name) else {
            return Err(Error::Solver(format!("unknown variable '{name}'")));
        };
        let x: f64 = value
            .parse()
            .map_err(|_| Error::Solver(format!("bad value '{value}' for {name}")))?;
        let rounded = x.round();
        if (x - rounded).abs() > 1e-4 || !(rounded == 0.0 || rounded == 1.0) {
            return Err(Error::Solver(format!("non-binary value {x} for {name}")));
        }
        values[vid] = rounded == 1.0;
        seen[vid] = true;
    }
    // Unlisted variables default to zero (solvers often omit them).
    let _ = seen;
    Ok(values)
}
