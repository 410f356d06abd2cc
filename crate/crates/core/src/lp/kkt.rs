use super::{LinearProgram, LpSolution, Sense};

/// Largest residuals of the optimality conditions at a primal/dual pair.
///
/// Complementary slackness is measured as `min(|multiplier|, |slack|)` so
/// that the figure is in the units of whichever side is off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub primal_residual: f64,
    pub primal_row: Option<usize>,
    pub dual_residual: f64,
    pub complementarity: f64,
    pub duality_gap: f64,
    pub pass: bool,
}

/// Checks primal feasibility, dual sign conventions and complementary
/// slackness of `sol` against `lp`. Reduced costs are recomputed from
/// `sol.duals`, not taken from `sol.reduced_costs`.
pub fn verify_kkt(lp: &LinearProgram, sol: &LpSolution, tol: f64) -> KktReport {
    let x = &sol.primal;
    let y = &sol.duals;
    let mut primal_residual = 0.0f64;
    let mut primal_row = None;
    let mut dual_residual = 0.0f64;
    let mut complementarity = 0.0f64;

    let mut reduced = lp.cost.clone();
    let mut dual_obj = lp.cost_constant;
    for (i, row) in lp.rows.iter().enumerate() {
        let v = row.violation(x);
        if v > primal_residual {
            primal_residual = v;
            primal_row = Some(i);
        }
        let yi = y.get(i).copied().unwrap_or(0.0);
        for &(j, a) in &row.coefs {
            reduced[j] -= yi * a;
        }
        let sign_violation = match row.sense {
            Sense::Ge => (-yi).max(0.0),
            Sense::Le => yi.max(0.0),
            Sense::Eq => 0.0,
        };
        dual_residual = dual_residual.max(sign_violation);
        let slack = (row.activity(x) - row.rhs).abs();
        if row.sense != Sense::Eq {
            complementarity = complementarity.max(yi.abs().min(slack));
        }
        dual_obj += yi * row.rhs;
    }

    for (j, &d) in reduced.iter().enumerate() {
        let (lo, hi, v) = (lp.lower[j], lp.upper[j], x[j]);
        let below = lo - v;
        let above = v - hi;
        if below > primal_residual {
            primal_residual = below;
            primal_row = None;
        }
        if above > primal_residual {
            primal_residual = above;
            primal_row = None;
        }
        let dist_lo = if lo.is_finite() { (v - lo).abs() } else { f64::INFINITY };
        let dist_hi = if hi.is_finite() { (hi - v).abs() } else { f64::INFINITY };
        // Sign the reduced cost must have given where the column sits.
        let at_lo = dist_lo <= tol;
        let at_hi = dist_hi <= tol;
        let r = if lo == hi || (at_lo && at_hi) {
            0.0
        } else if at_lo {
            (-d).max(0.0)
        } else if at_hi {
            d.max(0.0)
        } else {
            d.abs()
        };
        dual_residual = dual_residual.max(r);
        complementarity = complementarity.max(d.abs().min(dist_lo.min(dist_hi)));
        if d > 0.0 && lo.is_finite() {
            dual_obj += d * lo;
        } else if d < 0.0 && hi.is_finite() {
            dual_obj += d * hi;
        } else {
            dual_obj += d * v;
        }
    }

    let primal_obj = lp.objective_value(x);
    let duality_gap = (primal_obj - dual_obj).abs() / (1.0 + primal_obj.abs());
    let pass = primal_residual <= tol && dual_residual <= tol && complementarity <= tol;
    KktReport {
        primal_residual,
        primal_row,
        dual_residual,
        complementarity,
        duality_gap,
        pass,
    }
}
