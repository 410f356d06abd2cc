use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, AddAssign};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::flows::block_injections;
use super::{VarKind, VariableMap};
use crate::lp::{LpSolution, LpStatus};
use crate::model::{ReserveProduct, ReserveQuad, Snapshot, ValidatedCase};

const SLACK_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct UnitDispatch {
    pub pg: f64,
    pub reserves: ReserveQuad,
    /// Output cleared on each bid step; empty for pinned first-stage copies.
    pub segments: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SystemSlack {
    pub surplus: f64,
    pub shortage: f64,
    pub reg: f64,
    pub rspin: f64,
    pub op: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BranchFlow {
    pub flow: f64,
    pub violation: f64,
}

/// Dispatch of one (period, scenario) block.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BlockDispatch {
    pub period: usize,
    pub scenario: usize,
    pub global_period: usize,
    pub prob: f64,
    pub weight: f64,
    pub costed: bool,
    pub loads: Vec<f64>,
    pub units: Vec<UnitDispatch>,
    pub slack: SystemSlack,
    /// One entry per branch; unmonitored branches never carry a violation.
    pub flows: Vec<BranchFlow>,
}

impl BlockDispatch {
    /// First-stage vector of this block: pg then the four reserves, per unit.
    pub fn decision_vector(&self) -> Vec<f64> {
        self.units
            .iter()
            .flat_map(|u| {
                let r = u.reserves;
                [u.pg, r.reg, r.spin, r.supp_on, r.supp_off]
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DispatchSolution {
    pub blocks: Vec<BlockDispatch>,
    pub objective: f64,
}

impl DispatchSolution {
    pub fn block(&self, period: usize, scenario: usize) -> Option<&BlockDispatch> {
        self.blocks
            .iter()
            .find(|b| b.period == period && b.scenario == scenario)
    }

    /// The first-period block of the first scenario, i.e. the binding decisions.
    pub fn binding(&self) -> &BlockDispatch {
        self.block(0, 0).unwrap_or(&self.blocks[0])
    }

    pub fn first_stage(&self) -> Vec<f64> {
        self.binding().decision_vector()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractError {
    NoSolution(LpStatus),
}

impl fmt::Display for ExtractError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtractError::NoSolution(s) => write!(f, "no solution to extract (status {s})"),
        }
    }
}

impl core::error::Error for ExtractError {}

fn clamp_slack(v: f64) -> f64 {
    if v < SLACK_FLOOR {
        0.0
    } else {
        v
    }
}

pub fn extract_dispatch(sol: &LpSolution, vmap: &VariableMap) -> Result<DispatchSolution, ExtractError> {
    if !sol.is_optimal() {
        return Err(ExtractError::NoSolution(sol.status));
    }
    let x = &sol.primal;
    let value = |j: Option<usize>| j.map_or(0.0, |j| x[j]);
    let injections = block_injections(vmap, x);
    let blocks = vmap
        .blocks()
        .iter()
        .enumerate()
        .map(|(b, info)| {
            let units = (0..vmap.n_gens)
                .map(|g| {
                    let r = |p| value(vmap.unit(VarKind::Reserve(p), g, b));
                    let mut segments = Vec::new();
                    while let Some(j) = vmap.unit(VarKind::PgSegment(segments.len()), g, b) {
                        segments.push(x[j]);
                    }
                    UnitDispatch {
                        pg: value(vmap.unit(VarKind::Pg, g, b)),
                        reserves: ReserveQuad {
                            reg: r(ReserveProduct::Regulating),
                            spin: r(ReserveProduct::Spinning),
                            supp_on: r(ReserveProduct::SupplementalOn),
                            supp_off: r(ReserveProduct::SupplementalOff),
                        },
                        segments,
                    }
                })
                .collect();
            let sys = |kind| clamp_slack(value(vmap.system(kind, b)));
            let slack = SystemSlack {
                surplus: sys(VarKind::Surplus),
                shortage: sys(VarKind::Shortage),
                reg: sys(VarKind::RegShortage),
                rspin: sys(VarKind::RspinShortage),
                op: sys(VarKind::OpShortage),
            };
            let flows = vmap
                .ptdf
                .iter()
                .enumerate()
                .map(|(e, sigma)| BranchFlow {
                    flow: sigma.iter().zip(&injections[b]).map(|(s, p)| s * p).sum(),
                    violation: clamp_slack(value(vmap.unit(VarKind::FlowViolation, e, b))),
                })
                .collect();
            BlockDispatch {
                period: info.period,
                scenario: info.scenario,
                global_period: info.global_period,
                prob: info.prob,
                weight: info.weight,
                costed: info.costed,
                loads: info.loads.clone(),
                units,
                slack,
                flows,
            }
        })
        .collect();
    Ok(DispatchSolution {
        blocks,
        objective: sol.objective,
    })
}

/// Cost of a dispatch split by origin, in dollars.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CostBreakdown {
    pub energy: f64,
    pub import: f64,
    pub no_load: f64,
    pub reserves: f64,
    pub penalty_balance: f64,
    pub penalty_reserves: f64,
    pub penalty_flow: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn parts(&self) -> [f64; 7] {
        [
            self.energy,
            self.import,
            self.no_load,
            self.reserves,
            self.penalty_balance,
            self.penalty_reserves,
            self.penalty_flow,
        ]
    }

    fn with_total(mut self) -> Self {
        self.total = self.parts().iter().sum();
        self
    }
}

impl Add for CostBreakdown {
    type Output = CostBreakdown;

    fn add(self, o: CostBreakdown) -> CostBreakdown {
        CostBreakdown {
            energy: self.energy + o.energy,
            import: self.import + o.import,
            no_load: self.no_load + o.no_load,
            reserves: self.reserves + o.reserves,
            penalty_balance: self.penalty_balance + o.penalty_balance,
            penalty_reserves: self.penalty_reserves + o.penalty_reserves,
            penalty_flow: self.penalty_flow + o.penalty_flow,
            total: self.total + o.total,
        }
    }
}

impl AddAssign for CostBreakdown {
    fn add_assign(&mut self, o: CostBreakdown) {
        *self = *self + o;
    }
}

/// Cost of one block at its own weight. Uncosted blocks cost nothing.
pub fn itemize_block(b: &BlockDispatch, case: &ValidatedCase) -> CostBreakdown {
    let mut c = CostBreakdown::default();
    if !b.costed {
        return c;
    }
    let w = b.weight;
    for (gen, u) in case.generators.iter().zip(&b.units) {
        let energy: f64 = gen.segments.iter().zip(&u.segments).map(|(s, v)| s.price * v).sum();
        if gen.is_import {
            c.import += w * energy;
        } else {
            c.energy += w * energy;
        }
        if gen.committed(b.global_period) {
            c.no_load += w * gen.no_load_cost;
        }
        let p = gen.reserve_prices;
        let r = u.reserves;
        c.reserves += w * (p.reg * r.reg + p.spin * r.spin + p.supp_on * r.supp_on + p.supp_off * r.supp_off);
    }
    let pen = case.penalties;
    let s = b.slack;
    c.penalty_balance = w * (pen.shortage * s.shortage + pen.surplus_price() * s.surplus);
    c.penalty_reserves = w * (pen.reg * s.reg + pen.rspin * s.rspin + pen.op * s.op);
    c.penalty_flow = w * case
        .branches
        .iter()
        .zip(&b.flows)
        .map(|(br, f)| br.violation_price * f.violation)
        .fold(0.0, |acc, v| acc + v);
    c.with_total()
}

/// Probability-weighted cost of every costed block.
pub fn itemize_costs(d: &DispatchSolution, case: &ValidatedCase) -> CostBreakdown {
    d.blocks
        .iter()
        .map(|b| itemize_block(b, case))
        .fold(CostBreakdown::default(), Add::add)
        .with_total()
}

/// Prices binding unit decisions against realized conditions: balance,
/// reserve and flow violations are recomputed rather than taken from the solve.
pub fn realize_block(
    case: &ValidatedCase,
    global_period: usize,
    units: Vec<UnitDispatch>,
    actual: &Snapshot,
) -> BlockDispatch {
    let mut injections: Vec<f64> = actual.load.iter().map(|l| -l).collect();
    for (g, u) in units.iter().enumerate() {
        injections[case.gen_bus()[g]] += u.pg;
    }
    let imbalance = actual.total_load() - units.iter().map(|u| u.pg).sum::<f64>();
    let sum = |f: fn(&ReserveQuad) -> f64| units.iter().map(|u| f(&u.reserves)).sum::<f64>();
    let reg = sum(|r| r.reg);
    let spin = sum(|r| r.spin);
    let other = sum(|r| r.supp_on + r.supp_off);
    let req = &case.reserve_req;
    let short = |need: f64, have: f64| clamp_slack(need - have);
    let slack = SystemSlack {
        surplus: clamp_slack(-imbalance),
        shortage: clamp_slack(imbalance),
        reg: short(req.reg.at(global_period), reg),
        rspin: short(req.rspin.at(global_period), reg + spin),
        op: short(req.op.at(global_period), reg + spin + other),
    };
    let flows = case
        .branches
        .iter()
        .zip(case.ptdf())
        .map(|(br, sigma)| {
            let flow: f64 = sigma.iter().zip(&injections).map(|(s, p)| s * p).sum();
            let violation = if br.monitored {
                clamp_slack((flow - br.limit_hi).max(br.limit_lo - flow))
            } else {
                0.0
            };
            BranchFlow { flow, violation }
        })
        .collect();
    BlockDispatch {
        period: 0,
        scenario: 0,
        global_period,
        prob: 1.0,
        weight: case.period_cost_factor(),
        costed: true,
        loads: actual.load.clone(),
        units,
        slack,
        flows,
    }
}
