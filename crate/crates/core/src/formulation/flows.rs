use alloc::vec;
use alloc::vec::Vec;

use super::{Family, VarKind, VariableMap};
use crate::lp::{append_rows_and_resolve, solve_lp, LinearProgram, LpError, LpSolution, Row, Sense, SolveOptions};
use crate::model::ValidatedCase;

/// A monitored branch whose flow in one block lies outside its limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowViolation {
    pub branch: usize,
    pub block: usize,
    pub flow: f64,
    /// MW beyond the violated limit.
    pub excess: f64,
    /// True when the upper limit is exceeded.
    pub upper: bool,
}

/// Flow-limit row of `branch` in `block`, written on generator columns:
/// `sum_g sigma pg - df <= hi + sum_i sigma pd` (upper) or
/// `sum_g sigma pg + df >= lo + sum_i sigma pd` (lower).
pub(crate) fn flow_row(vmap: &VariableMap, case: &ValidatedCase, branch: usize, block: usize, upper: bool) -> Row {
    let sigma = &vmap.ptdf[branch];
    let info = &vmap.blocks()[block];
    let base: f64 = sigma.iter().zip(&info.loads).map(|(s, l)| s * l).sum();
    let mut coefs = Vec::with_capacity(vmap.n_gens + 1);
    for g in 0..vmap.n_gens {
        let s = sigma[vmap.gen_bus[g]];
        if s != 0.0 {
            coefs.push((vmap.unit(VarKind::Pg, g, block).expect("pg column"), s));
        }
    }
    let df = vmap
        .unit(VarKind::FlowViolation, branch, block)
        .expect("flow violation column");
    let br = &case.branches[branch];
    if upper {
        coefs.push((df, -1.0));
        Row::new(coefs, Sense::Le, br.limit_hi + base)
    } else {
        coefs.push((df, 1.0));
        Row::new(coefs, Sense::Ge, br.limit_lo + base)
    }
}

/// Net injection at every bus of every block: generation minus load.
pub fn block_injections(vmap: &VariableMap, primal: &[f64]) -> Vec<Vec<f64>> {
    vmap.blocks()
        .iter()
        .enumerate()
        .map(|(b, info)| {
            let mut p: Vec<f64> = info.loads.iter().map(|l| -l).collect();
            for g in 0..vmap.n_gens {
                if let Some(j) = vmap.unit(VarKind::Pg, g, b) {
                    p[vmap.gen_bus[g]] += primal[j];
                }
            }
            p
        })
        .collect()
}

fn flow_relief(vmap: &VariableMap, primal: &[f64]) -> Vec<Vec<f64>> {
    (0..vmap.blocks().len())
        .map(|b| {
            (0..vmap.ptdf.len())
                .map(|e| vmap.unit(VarKind::FlowViolation, e, b).map_or(0.0, |j| primal[j]))
                .collect()
        })
        .collect()
}

/// Monitored branch flows outside their limits by more than the current
/// violation allowance plus `tol`.
///
/// `injections[block][bus]` are net injections; `relief[block][branch]` is the
/// violation already paid for in each block and may be empty.
pub fn lazy_flow_separation(
    case: &ValidatedCase,
    injections: &[Vec<f64>],
    relief: &[Vec<f64>],
    tol: f64,
) -> Vec<FlowViolation> {
    let mut out = Vec::new();
    for (block, p) in injections.iter().enumerate() {
        for (e, br) in case.branches.iter().enumerate() {
            if !br.monitored {
                continue;
            }
            let flow: f64 = case.ptdf()[e].iter().zip(p).map(|(s, v)| s * v).sum();
            let allowance = relief.get(block).and_then(|r| r.get(e)).copied().unwrap_or(0.0);
            if flow > br.limit_hi + allowance + tol {
                out.push(FlowViolation {
                    branch: e,
                    block,
                    flow,
                    excess: flow - br.limit_hi,
                    upper: true,
                });
            } else if flow < br.limit_lo - allowance - tol {
                out.push(FlowViolation {
                    branch: e,
                    block,
                    flow,
                    excess: br.limit_lo - flow,
                    upper: false,
                });
            }
        }
    }
    out
}

/// Solves `lp`, then repeatedly appends the flow rows its solution violates
/// until none remain. Rows added are recorded in `vmap`, so a later call on
/// the same model starts from the grown row set.
pub fn solve_with_lazy_flows(
    lp: &mut LinearProgram,
    vmap: &mut VariableMap,
    case: &ValidatedCase,
    opts: &SolveOptions,
    tol: f64,
) -> Result<LpSolution, LpError> {
    let mut sol = solve_lp(lp, opts)?;
    while sol.is_optimal() {
        let injections = block_injections(vmap, &sol.primal);
        let relief = flow_relief(vmap, &sol.primal);
        let found: Vec<FlowViolation> = lazy_flow_separation(case, &injections, &relief, tol)
            .into_iter()
            .filter(|v| vmap.blocks()[v.block].costed && !vmap.has_flow_row(v.branch, v.block, v.upper))
            .collect();
        if found.is_empty() {
            break;
        }
        let mut rows = vec![];
        for v in &found {
            rows.push(flow_row(vmap, case, v.branch, v.block, v.upper));
            let i = vmap.push_row(Family::FlowLimit);
            vmap.push_flow_row(v.branch, v.block, v.upper, i);
        }
        sol = append_rows_and_resolve(lp, &sol, rows, opts)?;
    }
    Ok(sol)
}
