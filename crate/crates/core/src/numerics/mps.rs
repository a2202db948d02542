//! Free-format MPS dump for cross-checking against external solvers.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::lp::{LpProblem, Relation};
use crate::error::Result;

fn col_name(p: &LpProblem, j: usize) -> String {
    match &p.col_names {
        Some(names) => names[j].clone(),
        None => format!("C{j}"),
    }
}

/// Renders the problem in free MPS. Rows are `R0, R1, …`; the objective is `OBJ`.
pub fn to_mps(p: &LpProblem, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME {name}");
    out.push_str("ROWS\n N OBJ\n");
    for (i, r) in p.rows.iter().enumerate() {
        let tag = match r.rel {
            Relation::Le => 'L',
            Relation::Ge => 'G',
            Relation::Eq => 'E',
        };
        let _ = writeln!(out, " {tag} R{i}");
    }
    // Column-major entries.
    let n = p.num_vars();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, r) in p.rows.iter().enumerate() {
        for (&j, &v) in r.idx.iter().zip(&r.val) {
            cols[j].push((i, v));
        }
    }
    out.push_str("COLUMNS\n");
    for j in 0..n {
        let name = col_name(p, j);
        let c = p.objective[j];
        if c != 0.0 || cols[j].is_empty() {
            let _ = writeln!(out, " {name} OBJ {c:e}");
        }
        for &(i, v) in &cols[j] {
            let _ = writeln!(out, " {name} R{i} {v:e}");
        }
    }
    out.push_str("RHS\n");
    for (i, r) in p.rows.iter().enumerate() {
        if r.rhs != 0.0 {
            let _ = writeln!(out, " RHS R{i} {:e}", r.rhs);
        }
    }
    out.push_str("BOUNDS\n");
    for j in 0..n {
        let name = col_name(p, j);
        let (lo, hi) = (p.lower[j], p.upper[j]);
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " FR BND {name}");
            }
            (true, true) if lo == hi => {
                let _ = writeln!(out, " FX BND {name} {lo:e}");
            }
            (lf, hf) => {
                if !lf {
                    let _ = writeln!(out, " MI BND {name}");
                } else if lo != 0.0 {
                    let _ = writeln!(out, " LO BND {name} {lo:e}");
                }
                if hf {
                    let _ = writeln!(out, " UP BND {name} {hi:e}");
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

pub fn write_mps(p: &LpProblem, name: &str, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(to_mps(p, name).as_bytes())?;
    Ok(())
}
