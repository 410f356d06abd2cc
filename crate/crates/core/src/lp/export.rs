use core::fmt::{self, Write};

use super::{LinearProgram, Sense};

/// Writes `lp` in CPLEX LP text format with columns named `x<j>` and rows
/// `c<i>`, for cross-checking against external solvers.
pub fn write_lp_format<W: Write>(lp: &LinearProgram, out: &mut W) -> fmt::Result {
    writeln!(out, "\\ objective constant {}", lp.cost_constant)?;
    writeln!(out, "Minimize")?;
    write!(out, " obj:")?;
    let mut any = false;
    for (j, &c) in lp.cost.iter().enumerate() {
        if c != 0.0 {
            write_term(out, c, j, !any)?;
            any = true;
        }
    }
    if !any {
        write!(out, " 0 x0")?;
    }
    writeln!(out)?;
    writeln!(out, "Subject To")?;
    for (i, row) in lp.rows.iter().enumerate() {
        write!(out, " c{i}:")?;
        if row.coefs.is_empty() {
            write!(out, " 0 x0")?;
        }
        for (k, &(j, a)) in row.coefs.iter().enumerate() {
            write_term(out, a, j, k == 0)?;
        }
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        writeln!(out, " {op} {}", row.rhs)?;
    }
    writeln!(out, "Bounds")?;
    for j in 0..lp.n_vars() {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => writeln!(out, " x{j} free")?,
            (true, false) => writeln!(out, " x{j} >= {lo}")?,
            (false, true) => writeln!(out, " -inf <= x{j} <= {hi}")?,
            (true, true) if lo == hi => writeln!(out, " x{j} = {lo}")?,
            (true, true) => writeln!(out, " {lo} <= x{j} <= {hi}")?,
        }
    }
    writeln!(out, "End")
}

fn write_term<W: Write>(out: &mut W, a: f64, j: usize, first: bool) -> fmt::Result {
    if a < 0.0 {
        write!(out, " - {} x{j}", -a)
    } else if first {
        write!(out, " {a} x{j}")
    } else {
        write!(out, " + {a} x{j}")
    }
}
