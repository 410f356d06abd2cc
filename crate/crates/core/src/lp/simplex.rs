//! Bounded-variable revised simplex with an explicit dense basis inverse.
//!
//! Every row `a_i x (sense) b_i` is rewritten as `a_i x - r_i = 0` where the
//! logical `r_i` carries the row bounds, so the all-logical basis is `-I`.
//! Rows whose logical starts out of bounds get a phase-one artificial.

use alloc::vec;
use alloc::vec::Vec;

use super::{LinearProgram, LpSolution, LpStatus, Sense, SolveOptions};

const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free column resting at zero.
    Free,
    Fixed,
}

enum Step {
    Optimal,
    Unbounded,
    Limit,
    Singular,
}

pub(super) struct Simplex<'a> {
    lp: &'a LinearProgram,
    opts: SolveOptions,
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    art_row: Vec<usize>,
    art_sign: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    cost: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    refactor_interval: usize,
}

impl<'a> Simplex<'a> {
    pub(super) fn new(lp: &'a LinearProgram, opts: &SolveOptions) -> Self {
        let n = lp.n_vars();
        let m = lp.n_rows();

        let mut counts = vec![0usize; n + 1];
        for row in &lp.rows {
            for &(j, _) in &row.coefs {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts;
        let nnz = col_start[n];
        let mut fill = col_start.clone();
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coefs {
                col_row[fill[j]] = i;
                col_val[fill[j]] = a;
                fill[j] += 1;
            }
        }

        let mut lo = Vec::with_capacity(n + 2 * m);
        let mut hi = Vec::with_capacity(n + 2 * m);
        lo.extend_from_slice(&lp.lower);
        hi.extend_from_slice(&lp.upper);
        for row in &lp.rows {
            let (l, h) = match row.sense {
                Sense::Le => (f64::NEG_INFINITY, row.rhs),
                Sense::Ge => (row.rhs, f64::INFINITY),
                Sense::Eq => (row.rhs, row.rhs),
            };
            lo.push(l);
            hi.push(h);
        }

        let mut s = Self {
            lp,
            opts: *opts,
            n,
            m,
            col_start,
            col_row,
            col_val,
            art_row: Vec::new(),
            art_sign: Vec::new(),
            lo,
            hi,
            x: vec![0.0; n + m],
            state: vec![State::Lower; n + m],
            basis: vec![0; m],
            binv: vec![0.0; m * m],
            cost: Vec::new(),
            iterations: 0,
            since_refactor: 0,
            refactor_interval: m.max(100),
        };
        s.initial_basis();
        s
    }

    fn initial_basis(&mut self) {
        let n = self.n;
        for j in 0..n {
            let (l, h) = (self.lo[j], self.hi[j]);
            let (st, v) = if l == h {
                (State::Fixed, l)
            } else if l.is_finite() {
                (State::Lower, l)
            } else if h.is_finite() {
                (State::Upper, h)
            } else {
                (State::Free, 0.0)
            };
            self.state[j] = st;
            self.x[j] = v;
        }
        let mut activity = vec![0.0; self.m];
        for j in 0..n {
            let v = self.x[j];
            if v != 0.0 {
                for k in self.col_start[j]..self.col_start[j + 1] {
                    activity[self.col_row[k]] += self.col_val[k] * v;
                }
            }
        }
        for (i, &r0) in activity.iter().enumerate() {
            let col = n + i;
            let (l, h) = (self.lo[col], self.hi[col]);
            if r0 >= l && r0 <= h {
                self.state[col] = State::Basic;
                self.x[col] = r0;
                self.basis[i] = col;
                self.binv[i * self.m + i] = -1.0;
            } else {
                let (st, v) = if r0 < l {
                    (if l == h { State::Fixed } else { State::Lower }, l)
                } else {
                    (State::Upper, h)
                };
                self.state[col] = st;
                self.x[col] = v;
                let sign = if v > r0 { 1.0 } else { -1.0 };
                let art = n + self.m + self.art_row.len();
                self.art_row.push(i);
                self.art_sign.push(sign);
                self.lo.push(0.0);
                self.hi.push(f64::INFINITY);
                self.x.push((v - r0).abs());
                self.state.push(State::Basic);
                self.basis[i] = art;
                self.binv[i * self.m + i] = sign;
            }
        }
    }

    fn n_cols(&self) -> usize {
        self.n + self.m + self.art_row.len()
    }

    /// Calls `f(row, value)` for every nonzero of column `j`.
    #[inline]
    fn for_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for k in self.col_start[j]..self.col_start[j + 1] {
                f(self.col_row[k], self.col_val[k]);
            }
        } else if j < self.n + self.m {
            f(j - self.n, -1.0);
        } else {
            let k = j - self.n - self.m;
            f(self.art_row[k], self.art_sign[k]);
        }
    }

    pub(super) fn run(mut self) -> LpSolution {
        let total = self.n_cols();
        if !self.art_row.is_empty() {
            let initial: f64 = self.artificial_sum();
            self.cost = vec![0.0; total];
            for c in &mut self.cost[self.n + self.m..] {
                *c = 1.0;
            }
            match self.iterate() {
                Step::Optimal => {}
                Step::Limit => return self.fail(LpStatus::IterationLimit),
                Step::Singular => return self.fail(LpStatus::NumericalFailure),
                // Phase one is bounded below by zero.
                Step::Unbounded => return self.fail(LpStatus::NumericalFailure),
            }
            if self.artificial_sum() > self.opts.feas_tol.max(1e-9) * (1.0 + initial) {
                return self.fail(LpStatus::Infeasible);
            }
            for j in self.n + self.m..total {
                self.lo[j] = 0.0;
                self.hi[j] = 0.0;
                if self.state[j] != State::Basic {
                    self.state[j] = State::Fixed;
                    self.x[j] = 0.0;
                }
            }
        }
        self.cost = vec![0.0; total];
        self.cost[..self.n].copy_from_slice(&self.lp.cost);
        match self.iterate() {
            Step::Optimal => self.finish(),
            Step::Unbounded => self.fail(LpStatus::Unbounded),
            Step::Limit => self.fail(LpStatus::IterationLimit),
            Step::Singular => self.fail(LpStatus::NumericalFailure),
        }
    }

    fn artificial_sum(&self) -> f64 {
        self.x[self.n + self.m..].iter().map(|v| v.max(0.0)).sum()
    }

    fn fail(&self, status: LpStatus) -> LpSolution {
        LpSolution::failed(status, self.n, self.m, self.iterations)
    }

    fn finish(&self) -> LpSolution {
        let y = self.duals();
        let primal = self.x[..self.n].to_vec();
        let reduced_costs = (0..self.n).map(|j| self.reduced_cost(j, &y)).collect();
        LpSolution {
            status: LpStatus::Optimal,
            objective: self.lp.objective_value(&primal),
            primal,
            duals: y,
            reduced_costs,
            iterations: self.iterations,
        }
    }

    /// `y = c_B B^-1`.
    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for r in 0..m {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yk, b) in y.iter_mut().zip(row) {
                    *yk += cb * b;
                }
            }
        }
        y
    }

    #[inline]
    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let mut d = self.cost[j];
        self.for_column(j, |i, a| d -= y[i] * a);
        d
    }

    /// `B^-1 a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        self.for_column(j, |k, a| {
            for (r, out) in alpha.iter_mut().enumerate() {
                *out += self.binv[r * m + k] * a;
            }
        });
        alpha
    }

    fn iterate(&mut self) -> Step {
        let mut streak = 0usize;
        loop {
            let y = self.duals();
            let bland = streak >= self.opts.degeneracy_streak;
            let Some((q, d_q)) = self.price(&y, bland) else {
                if self.since_refactor > 0 {
                    if !self.refactor() {
                        return Step::Singular;
                    }
                    continue;
                }
                return Step::Optimal;
            };
            if self.iterations >= self.opts.max_iters {
                return Step::Limit;
            }
            self.iterations += 1;

            let dir = if d_q < 0.0 { 1.0 } else { -1.0 };
            let alpha = self.ftran(q);
            let Some((theta, leave)) = self.ratio_test(q, dir, &alpha, bland) else {
                return Step::Unbounded;
            };

            if theta <= DEGENERATE_STEP {
                streak += 1;
            } else {
                streak = 0;
            }

            self.x[q] += dir * theta;
            for (r, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    self.x[self.basis[r]] -= dir * a * theta;
                }
            }

            match leave {
                None => {
                    // Bound flip of the entering column.
                    if dir > 0.0 {
                        self.state[q] = State::Upper;
                        self.x[q] = self.hi[q];
                    } else {
                        self.state[q] = State::Lower;
                        self.x[q] = self.lo[q];
                    }
                }
                Some(p) => {
                    let l = self.basis[p];
                    let rate = -dir * alpha[p];
                    if self.lo[l] == self.hi[l] {
                        self.state[l] = State::Fixed;
                        self.x[l] = self.lo[l];
                    } else if rate < 0.0 {
                        self.state[l] = State::Lower;
                        self.x[l] = self.lo[l];
                    } else {
                        self.state[l] = State::Upper;
                        self.x[l] = self.hi[l];
                    }
                    self.state[q] = State::Basic;
                    self.basis[p] = q;
                    self.pivot(p, &alpha);
                    self.since_refactor += 1;
                    if self.since_refactor >= self.refactor_interval && !self.refactor() {
                        return Step::Singular;
                    }
                }
            }
        }
    }

    /// Dantzig pricing with lowest-index tie-break, or Bland's rule.
    fn price(&self, y: &[f64], bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.opt_tol;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.n_cols() {
            let eligible_dir = match self.state[j] {
                State::Basic | State::Fixed => continue,
                State::Lower => -1.0,
                State::Upper => 1.0,
                State::Free => 0.0,
            };
            let d = self.reduced_cost(j, y);
            let eligible = if eligible_dir < 0.0 {
                d < -tol
            } else if eligible_dir > 0.0 {
                d > tol
            } else {
                d.abs() > tol
            };
            if !eligible {
                continue;
            }
            if bland {
                return Some((j, d));
            }
            if best.map_or(true, |(_, bd)| d.abs() > bd.abs()) {
                best = Some((j, d));
            }
        }
        best
    }

    /// Returns the step length and the leaving basis position (`None` for a
    /// bound flip), or `None` when the ray is unbounded.
    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], bland: bool) -> Option<(f64, Option<usize>)> {
        let flip = if self.lo[q].is_finite() && self.hi[q].is_finite() {
            self.hi[q] - self.lo[q]
        } else {
            f64::INFINITY
        };
        let ftol = if bland { 0.0 } else { self.opts.feas_tol };

        // Pass one: the largest step keeping every basic column within its
        // bounds relaxed by the feasibility tolerance.
        let mut bound = f64::INFINITY;
        for (r, &a) in alpha.iter().enumerate() {
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[r];
            let rate = -dir * a;
            let t = if rate < 0.0 {
                if !self.lo[b].is_finite() {
                    continue;
                }
                (self.x[b] - self.lo[b] + ftol) / -rate
            } else {
                if !self.hi[b].is_finite() {
                    continue;
                }
                (self.hi[b] - self.x[b] + ftol) / rate
            };
            bound = bound.min(t.max(0.0));
        }
        if bound == f64::INFINITY && flip == f64::INFINITY {
            return None;
        }
        if flip <= bound {
            return Some((flip, None));
        }

        // Pass two: among rows whose exact ratio fits under the bound pick the
        // largest pivot (Harris), or the lowest column index under Bland.
        let mut chosen: Option<(usize, f64, f64)> = None;
        for (r, &a) in alpha.iter().enumerate() {
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[r];
            let rate = -dir * a;
            let t = if rate < 0.0 {
                if !self.lo[b].is_finite() {
                    continue;
                }
                (self.x[b] - self.lo[b]) / -rate
            } else {
                if !self.hi[b].is_finite() {
                    continue;
                }
                (self.hi[b] - self.x[b]) / rate
            };
            let t = t.max(0.0);
            if t > bound + if bland { 1e-12 } else { 0.0 } {
                continue;
            }
            let better = match chosen {
                None => true,
                Some((cr, ct, ca)) => {
                    if bland {
                        t < ct - 1e-12 || (t <= ct + 1e-12 && b < self.basis[cr])
                    } else {
                        a.abs() > ca || (a.abs() == ca && b < self.basis[cr])
                    }
                }
            };
            if better {
                chosen = Some((r, t, a.abs()));
            }
        }
        let (p, t, _) = chosen?;
        Some((t, Some(p)))
    }

    /// Product-form update of the explicit inverse around pivot `(p, q)`.
    fn pivot(&mut self, p: usize, alpha: &[f64]) {
        let m = self.m;
        let ap = alpha[p];
        let (head, rest) = self.binv.split_at_mut(p * m);
        let (prow, tail) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v /= ap;
        }
        for (r, chunk) in head.chunks_exact_mut(m).enumerate() {
            let f = alpha[r];
            if f != 0.0 {
                for (v, pv) in chunk.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
            }
        }
        for (k, chunk) in tail.chunks_exact_mut(m).enumerate() {
            let f = alpha[p + 1 + k];
            if f != 0.0 {
                for (v, pv) in chunk.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
            }
        }
    }

    /// Rebuilds `B^-1` by Gauss-Jordan elimination and recomputes the basic
    /// values from the nonbasic ones. Returns false on a singular basis.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return true;
        }
        let mut b = vec![0.0; m * m];
        for (pos, &col) in self.basis.iter().enumerate() {
            self.for_column(col, |i, a| b[i * m + pos] = a);
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let mut piv = c;
            let mut best = b[c * m + c].abs();
            for r in c + 1..m {
                let v = b[r * m + c].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-12 {
                return false;
            }
            if piv != c {
                for k in 0..m {
                    b.swap(c * m + k, piv * m + k);
                    inv.swap(c * m + k, piv * m + k);
                }
            }
            let d = b[c * m + c];
            for k in 0..m {
                b[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = b[r * m + c];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    b[r * m + k] -= f * b[c * m + k];
                    inv[r * m + k] -= f * inv[c * m + k];
                }
            }
        }
        // Rows of `inv` correspond to basis positions because `b`'s columns
        // were indexed by position.
        self.binv = inv;

        let mut rhs = vec![0.0; m];
        for j in 0..self.n_cols() {
            if self.state[j] == State::Basic {
                continue;
            }
            let v = self.x[j];
            if v != 0.0 {
                self.for_column(j, |i, a| rhs[i] -= a * v);
            }
        }
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            self.x[self.basis[r]] = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
        }
        true
    }
}
