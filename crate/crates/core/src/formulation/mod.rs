//! Dispatch models as linear programs.
//!
//! Every model is a set of *blocks*, one per (period, scenario) pair, each
//! holding the generator, reserve and slack columns of that period.

mod build;
mod flows;
mod solution;
#[cfg(test)]
mod tests;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::model::ReserveProduct;

pub use build::{
    build_benders_master, build_benders_subproblem, build_lad, build_sced, build_slad_extensive, BuildError, FlowMode,
    ModelBuilder, FIRST_STAGE_PER_UNIT,
};
pub(crate) use flows::flow_row as flow_row_for;
pub use flows::{block_injections, lazy_flow_separation, solve_with_lazy_flows, FlowViolation};
pub use solution::{
    extract_dispatch, itemize_block, itemize_costs, realize_block, BlockDispatch, BranchFlow, CostBreakdown,
    DispatchSolution, ExtractError, SystemSlack, UnitDispatch,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    Pg,
    PgSegment(usize),
    Reserve(ReserveProduct),
    Surplus,
    Shortage,
    RegShortage,
    RspinShortage,
    OpShortage,
    FlowViolation,
    /// Recourse estimate of one scenario in the Benders master.
    Theta,
}

/// Identity of one LP column.
///
/// `owner` is the generator index for unit columns, the branch index for
/// flow violations, the scenario index for `Theta`, and 0 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarKey {
    pub kind: VarKind,
    pub owner: usize,
    pub period: usize,
    pub scenario: usize,
}

impl VarKey {
    pub fn new(kind: VarKind, owner: usize, period: usize, scenario: usize) -> Self {
        Self {
            kind,
            owner,
            period,
            scenario,
        }
    }
}

/// Constraint families of the dispatch model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    SegmentClearing,
    DispatchTarget,
    RegulatingCapacity,
    SpinningCapacity,
    SuppOnCapacity,
    SuppOffCapacity,
    ReserveCapability,
    MinLimit,
    MaxLimit,
    RampUp,
    RampDown,
    RegulatingRamp,
    ContingencyRamp,
    PowerBalance,
    RegRequirement,
    RspinRequirement,
    OpRequirement,
    FlowLimit,
    NonAnticipativity,
    Consensus,
    BendersCut,
}

/// Where a family instance lives: an LP row, or a folded column bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowRef {
    Row(usize),
    Bound(usize),
}

/// Per-block bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockInfo {
    /// Period index within the model, 0 is the first (binding) period.
    pub period: usize,
    pub scenario: usize,
    /// Period index within the day, used for flags and requirements.
    pub global_period: usize,
    pub prob: f64,
    /// Objective multiplier of this block's rates: probability times period length.
    pub weight: f64,
    /// False for pinned first-stage copies in Benders subproblems.
    pub costed: bool,
    pub loads: Vec<f64>,
    pub capacity: Vec<f64>,
}

/// Bidirectional map between model symbols and LP columns and rows.
#[derive(Debug, Clone, Default)]
pub struct VariableMap {
    columns: Vec<VarKey>,
    index: BTreeMap<VarKey, usize>,
    row_family: Vec<Family>,
    bounds: Vec<(Family, usize)>,
    blocks: Vec<BlockInfo>,
    block_index: BTreeMap<(usize, usize), usize>,
    first_stage: Vec<usize>,
    consensus_rows: Vec<usize>,
    flow_rows: BTreeMap<(usize, usize, bool), usize>,
    pub(crate) n_gens: usize,
    pub(crate) gen_bus: Vec<usize>,
    pub(crate) ptdf: Vec<Vec<f64>>,
}

impl VariableMap {
    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.row_family.len()
    }

    pub fn key(&self, column: usize) -> VarKey {
        self.columns[column]
    }

    pub fn column(&self, key: &VarKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn keys(&self) -> &[VarKey] {
        &self.columns
    }

    pub fn row_family(&self, row: usize) -> Family {
        self.row_family[row]
    }

    /// Every row and folded bound that belongs to `family`.
    pub fn family(&self, family: Family) -> Vec<RowRef> {
        let rows = self
            .row_family
            .iter()
            .enumerate()
            .filter(|(_, f)| **f == family)
            .map(|(i, _)| RowRef::Row(i));
        let bounds = self
            .bounds
            .iter()
            .filter(|(f, _)| *f == family)
            .map(|&(_, j)| RowRef::Bound(j));
        rows.chain(bounds).collect()
    }

    pub fn family_count(&self, family: Family) -> usize {
        self.family(family).len()
    }

    pub fn blocks(&self) -> &[BlockInfo] {
        &self.blocks
    }

    pub fn block(&self, period: usize, scenario: usize) -> Option<usize> {
        self.block_index.get(&(period, scenario)).copied()
    }

    /// Columns of the first-stage vector, `FIRST_STAGE_PER_UNIT` per generator
    /// in the order pg, regulating, spinning, supplemental on, supplemental off.
    pub fn first_stage(&self) -> &[usize] {
        &self.first_stage
    }

    /// Rows pinning the first-stage copy of a subproblem, aligned with `first_stage`.
    pub fn consensus_rows(&self) -> &[usize] {
        &self.consensus_rows
    }

    pub fn has_flow_row(&self, branch: usize, block: usize, upper: bool) -> bool {
        self.flow_rows.contains_key(&(branch, block, upper))
    }

    /// `(branch, block)` pairs with at least one flow row, in order.
    pub fn active_flows(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self.flow_rows.keys().map(|&(e, b, _)| (e, b)).collect();
        out.dedup();
        out
    }

    pub fn n_generators(&self) -> usize {
        self.n_gens
    }

    pub(crate) fn push_column(&mut self, key: VarKey) -> usize {
        let j = self.columns.len();
        self.columns.push(key);
        let clash = self.index.insert(key, j);
        debug_assert!(clash.is_none(), "column {key:?} registered twice");
        j
    }

    pub(crate) fn push_row(&mut self, family: Family) -> usize {
        self.row_family.push(family);
        self.row_family.len() - 1
    }

    pub(crate) fn push_bound(&mut self, family: Family, column: usize) {
        self.bounds.push((family, column));
    }

    pub(crate) fn push_block(&mut self, info: BlockInfo) -> usize {
        let b = self.blocks.len();
        self.block_index.insert((info.period, info.scenario), b);
        self.blocks.push(info);
        b
    }

    pub(crate) fn set_first_stage(&mut self, columns: Vec<usize>) {
        self.first_stage = columns;
    }

    pub(crate) fn push_consensus_row(&mut self, row: usize) {
        self.consensus_rows.push(row);
    }

    pub(crate) fn push_flow_row(&mut self, branch: usize, block: usize, upper: bool, row: usize) {
        self.flow_rows.insert((branch, block, upper), row);
    }

    pub(crate) fn register_flow_row(&mut self, branch: usize, block: usize, upper: bool, row: usize) {
        let i = self.push_row(Family::FlowLimit);
        debug_assert_eq!(i, row);
        self.push_flow_row(branch, block, upper, row);
    }

    pub(crate) fn unit(&self, kind: VarKind, g: usize, block: usize) -> Option<usize> {
        let b = &self.blocks[block];
        self.column(&VarKey::new(kind, g, b.period, b.scenario))
    }

    pub(crate) fn system(&self, kind: VarKind, block: usize) -> Option<usize> {
        self.unit(kind, 0, block)
    }
}
