//! Reference linear-programming kernel.
//!
//! Every dispatch model in this crate is a minimization LP with bounded
//! columns and sparse rows. The kernel is a dense-basis revised simplex that
//! reports row duals and reduced costs alongside the primal point, which is
//! what the Benders cut generator needs.

mod export;
mod kkt;
mod simplex;

use alloc::vec::Vec;
use core::fmt;

pub use export::write_lp_format;
pub use kkt::{verify_kkt, KktReport};

/// Row sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// A sparse constraint row `coefs · x (sense) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn new(coefs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Self { coefs, sense, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let ax = self.activity(x);
        match self.sense {
            Sense::Le => (ax - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - ax).max(0.0),
            Sense::Eq => (ax - self.rhs).abs(),
        }
    }
}

/// `minimize cost · x + cost_constant` subject to rows and column bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub cost_constant: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Adds a column and returns its index.
    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.len() - 1
    }

    /// Adds a row and returns its index. Zero coefficients are dropped.
    pub fn add_row(&mut self, mut row: Row) -> usize {
        row.coefs.retain(|&(_, a)| a != 0.0);
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.cost_constant + self.cost.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Checks the structural invariants: indices in range, `lo <= hi`, finite rhs.
    pub fn check(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed("bound vectors do not match column count"));
        }
        for (j, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(LpError::BadBounds { column: j });
            }
            if !self.cost[j].is_finite() {
                return Err(LpError::Malformed("non-finite objective coefficient"));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::BadRow { row: i });
            }
            if row.coefs.iter().any(|&(j, a)| j >= n || !a.is_finite()) {
                return Err(LpError::BadRow { row: i });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpError {
    Malformed(&'static str),
    BadBounds { column: usize },
    BadRow { row: usize },
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::Malformed(what) => write!(f, "malformed LP: {what}"),
            LpError::BadBounds { column } => write!(f, "column {column} has inconsistent bounds"),
            LpError::BadRow { row } => write!(f, "row {row} has an out-of-range index or non-finite value"),
        }
    }
}

impl core::error::Error for LpError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    /// The basis could not be refactorized.
    NumericalFailure,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::IterationLimit => "iteration_limit",
            LpStatus::NumericalFailure => "numerical_failure",
        };
        f.write_str(s)
    }
}

/// Result of a solve. `duals[i]` is the sensitivity of the objective to the
/// right-hand side of row `i`: nonnegative on `>=` rows, nonpositive on `<=`
/// rows, free on equalities.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub(crate) fn failed(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        Self {
            status,
            primal: alloc::vec![0.0; n],
            duals: alloc::vec![0.0; m],
            reduced_costs: alloc::vec![0.0; n],
            objective: f64::NAN,
            iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub max_iters: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degeneracy_streak: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            opt_tol: 1e-8,
            max_iters: 200_000,
            degeneracy_streak: 50,
        }
    }
}

/// Solves `lp` from a slack basis.
pub fn solve_lp(lp: &LinearProgram, opts: &SolveOptions) -> Result<LpSolution, LpError> {
    lp.check()?;
    Ok(simplex::Simplex::new(lp, opts).run())
}

/// Appends `new_rows` to `lp` and returns the optimum of the augmented program.
///
/// When `previous` is optimal and already satisfies every new row it remains
/// optimal (zero duals on the new rows); otherwise the augmented LP is solved
/// again from scratch.
pub fn append_rows_and_resolve(
    lp: &mut LinearProgram,
    previous: &LpSolution,
    new_rows: Vec<Row>,
    opts: &SolveOptions,
) -> Result<LpSolution, LpError> {
    let first_new = lp.rows.len();
    for row in new_rows {
        lp.add_row(row);
    }
    lp.check()?;
    let reusable = previous.is_optimal()
        && previous.primal.len() == lp.n_vars()
        && previous.duals.len() == first_new
        && lp.rows[first_new..]
            .iter()
            .all(|r| r.violation(&previous.primal) <= opts.feas_tol);
    if reusable {
        let mut sol = previous.clone();
        sol.duals.resize(lp.rows.len(), 0.0);
        return Ok(sol);
    }
    Ok(simplex::Simplex::new(lp, opts).run())
}
