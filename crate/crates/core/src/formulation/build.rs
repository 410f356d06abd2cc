use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::flows::flow_row;
use super::{BlockInfo, Family, VarKey, VarKind, VariableMap};
use crate::benders::CutPool;
use crate::lp::{LinearProgram, Row, Sense};
use crate::model::{ReserveProduct, ScenarioError, ScenarioSet, Snapshot, SystemState, ValidatedCase};

/// Length of each generator's slice of the first-stage vector.
pub const FIRST_STAGE_PER_UNIT: usize = 5;

const FIRST_STAGE_KINDS: [VarKind; FIRST_STAGE_PER_UNIT] = [
    VarKind::Pg,
    VarKind::Reserve(ReserveProduct::Regulating),
    VarKind::Reserve(ReserveProduct::Spinning),
    VarKind::Reserve(ReserveProduct::SupplementalOn),
    VarKind::Reserve(ReserveProduct::SupplementalOff),
];

/// Whether transmission rows are built up front or separated on demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlowMode {
    #[default]
    Full,
    Lazy,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BuildError {
    ScenarioCount { expected: usize, found: usize },
    Scenario(ScenarioError),
    SnapshotShape,
    FirstStageLength { expected: usize, found: usize },
    UnknownScenario(usize),
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::ScenarioCount { expected, found } => {
                write!(f, "expected {expected} scenario(s), found {found}")
            }
            BuildError::Scenario(e) => write!(f, "{e}"),
            BuildError::SnapshotShape => f.write_str("snapshot does not match the case's buses and generators"),
            BuildError::FirstStageLength { expected, found } => {
                write!(f, "first-stage vector has {found} entries, expected {expected}")
            }
            BuildError::UnknownScenario(s) => write!(f, "no scenario {s}"),
        }
    }
}

impl core::error::Error for BuildError {}

impl From<ScenarioError> for BuildError {
    fn from(e: ScenarioError) -> Self {
        BuildError::Scenario(e)
    }
}

pub type Built = (LinearProgram, VariableMap);

/// Builds dispatch models for one clearing.
///
/// `state.wall_clock` is the day period of the model's first period; it
/// selects commitment flags and reserve requirements.
#[derive(Debug, Clone, Copy)]
pub struct ModelBuilder<'a> {
    case: &'a ValidatedCase,
    state: &'a SystemState,
    flows: FlowMode,
}

impl<'a> ModelBuilder<'a> {
    pub fn new(case: &'a ValidatedCase, state: &'a SystemState) -> Self {
        Self {
            case,
            state,
            flows: FlowMode::Full,
        }
    }

    pub fn flows(mut self, mode: FlowMode) -> Self {
        self.flows = mode;
        self
    }

    /// Single-period dispatch against `demand`.
    pub fn sced(&self, demand: &Snapshot) -> Result<Built, BuildError> {
        self.check_snapshot(demand)?;
        let mut asm = self.assembly();
        asm.block(0, 0, 1.0, demand, Prev::State);
        let x = asm.first_stage_of(0, 0);
        asm.vmap.set_first_stage(x);
        Ok(asm.finish())
    }

    /// Multi-period dispatch over a single forecast trajectory.
    pub fn lad(&self, forecast: &ScenarioSet) -> Result<Built, BuildError> {
        if forecast.len() != 1 {
            return Err(BuildError::ScenarioCount {
                expected: 1,
                found: forecast.len(),
            });
        }
        self.slad(forecast)
    }

    /// Extensive form of the two-stage model: every scenario's periods,
    /// with first-period decisions tied across scenarios.
    pub fn slad(&self, scenarios: &ScenarioSet) -> Result<Built, BuildError> {
        scenarios.check_against(self.case)?;
        let mut asm = self.assembly();
        for (s, sc) in scenarios.scenarios().iter().enumerate() {
            let mut prev_pg = Vec::new();
            for (t, snap) in sc.periods.iter().enumerate() {
                let prev = if t == 0 { Prev::State } else { Prev::Columns(&prev_pg) };
                let (_, pg) = asm.block(t, s, sc.prob, snap, prev);
                prev_pg = pg;
            }
        }
        let anchor = asm.first_stage_of(0, 0);
        for s in 1..scenarios.len() {
            let copy = asm.first_stage_of(0, s);
            for (&a, &c) in anchor.iter().zip(&copy) {
                asm.row(
                    Family::NonAnticipativity,
                    Row::new(vec![(c, 1.0), (a, -1.0)], Sense::Eq, 0.0),
                );
            }
        }
        asm.vmap.set_first_stage(anchor);
        Ok(asm.finish())
    }

    /// Relaxed master: first-period model, one recourse column per
    /// probability in `probs` and one row per cut. With no scenarios this is
    /// the single-period model.
    pub fn master(&self, current: &Snapshot, probs: &[f64], cuts: &CutPool) -> Result<Built, BuildError> {
        self.check_snapshot(current)?;
        let mut asm = self.assembly();
        asm.block(0, 0, 1.0, current, Prev::State);
        let x = asm.first_stage_of(0, 0);
        let theta: Vec<usize> = probs
            .iter()
            .enumerate()
            .map(|(s, &p)| {
                asm.col(
                    VarKey::new(VarKind::Theta, s, 0, 0),
                    f64::NEG_INFINITY,
                    f64::INFINITY,
                    p,
                )
            })
            .collect();
        for cut in cuts.cuts() {
            if cut.scenario >= theta.len() {
                return Err(BuildError::UnknownScenario(cut.scenario));
            }
            if cut.coefs.len() != x.len() {
                return Err(BuildError::FirstStageLength {
                    expected: x.len(),
                    found: cut.coefs.len(),
                });
            }
            let mut coefs = vec![(theta[cut.scenario], 1.0)];
            coefs.extend(x.iter().zip(&cut.coefs).map(|(&j, &a)| (j, -a)));
            asm.row(Family::BendersCut, Row::new(coefs, Sense::Ge, cut.rhs_const));
        }
        asm.vmap.set_first_stage(x);
        Ok(asm.finish())
    }

    /// Recourse model of scenario `s`: periods after the first, with the
    /// first-period decisions held at `x1` by equality rows.
    pub fn subproblem(&self, scenarios: &ScenarioSet, s: usize, x1: &[f64]) -> Result<Built, BuildError> {
        scenarios.check_against(self.case)?;
        if s >= scenarios.len() {
            return Err(BuildError::UnknownScenario(s));
        }
        let n = self.case.generators.len() * FIRST_STAGE_PER_UNIT;
        if x1.len() != n {
            return Err(BuildError::FirstStageLength {
                expected: n,
                found: x1.len(),
            });
        }
        let sc = scenarios.scenario(s);
        let mut asm = self.assembly();
        let pinned_pg = asm.pinned_block(s, &sc.periods[0], x1);
        let mut prev_pg = pinned_pg;
        for (t, snap) in sc.periods.iter().enumerate().skip(1) {
            let (_, pg) = asm.block(t, s, 1.0, snap, Prev::Columns(&prev_pg));
            prev_pg = pg;
        }
        Ok(asm.finish())
    }

    fn check_snapshot(&self, snap: &Snapshot) -> Result<(), BuildError> {
        if snap.load.len() != self.case.buses.len() || snap.pmax.len() != self.case.generators.len() {
            return Err(BuildError::SnapshotShape);
        }
        let set = ScenarioSet::deterministic(vec![snap.clone()])?;
        set.check_against(self.case)?;
        Ok(())
    }

    fn assembly(&self) -> Assembly<'a> {
        let case = self.case;
        let vmap = VariableMap {
            n_gens: case.generators.len(),
            gen_bus: case.gen_bus().to_vec(),
            ptdf: case.ptdf().to_vec(),
            ..VariableMap::default()
        };
        Assembly {
            case,
            state: self.state,
            flows: self.flows,
            lp: LinearProgram::new(),
            vmap,
            factor: case.period_cost_factor(),
            step: case.step_minutes,
        }
    }
}

enum Prev<'p> {
    /// Couple to the dispatch carried in the system state.
    State,
    /// Couple to these pg columns of the preceding block.
    Columns(&'p [usize]),
}

struct Assembly<'a> {
    case: &'a ValidatedCase,
    state: &'a SystemState,
    flows: FlowMode,
    lp: LinearProgram,
    vmap: VariableMap,
    factor: f64,
    step: f64,
}

impl Assembly<'_> {
    fn finish(self) -> Built {
        (self.lp, self.vmap)
    }

    fn col(&mut self, key: VarKey, lo: f64, hi: f64, cost: f64) -> usize {
        self.vmap.push_column(key);
        self.lp.add_var(lo, hi, cost)
    }

    fn row(&mut self, family: Family, row: Row) -> usize {
        self.vmap.push_row(family);
        self.lp.add_row(row)
    }

    /// Tightens the upper bound of column `j`; falls back to a row when the
    /// bound would cross the lower bound, so the clash surfaces as infeasibility.
    fn upper(&mut self, family: Family, j: usize, v: f64) {
        if v < self.lp.lower[j] {
            self.row(family, Row::new(vec![(j, 1.0)], Sense::Le, v));
        } else {
            self.lp.upper[j] = self.lp.upper[j].min(v);
            self.vmap.push_bound(family, j);
        }
    }

    fn lower(&mut self, family: Family, j: usize, v: f64) {
        if v > self.lp.upper[j] {
            self.row(family, Row::new(vec![(j, 1.0)], Sense::Ge, v));
        } else {
            self.lp.lower[j] = self.lp.lower[j].max(v);
            self.vmap.push_bound(family, j);
        }
    }

    fn first_stage_of(&self, t: usize, s: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.vmap.n_gens * FIRST_STAGE_PER_UNIT);
        for g in 0..self.vmap.n_gens {
            for kind in FIRST_STAGE_KINDS {
                out.push(
                    self.vmap
                        .column(&VarKey::new(kind, g, t, s))
                        .expect("first-stage column"),
                );
            }
        }
        out
    }

    fn block_info(&self, t: usize, s: usize, prob: f64, snap: &Snapshot, costed: bool) -> BlockInfo {
        let case = self.case;
        BlockInfo {
            period: t,
            scenario: s,
            global_period: self.state.wall_clock + t,
            prob,
            weight: if costed { prob * self.factor } else { 0.0 },
            costed,
            loads: snap.load.clone(),
            capacity: (0..case.generators.len()).map(|g| snap.capacity(case, g)).collect(),
        }
    }

    /// First-stage copy of a subproblem: free columns fixed by consensus rows.
    fn pinned_block(&mut self, s: usize, snap: &Snapshot, x1: &[f64]) -> Vec<usize> {
        let info = self.block_info(0, s, 1.0, snap, false);
        self.vmap.push_block(info);
        let mut pg = Vec::with_capacity(self.vmap.n_gens);
        let mut cols = Vec::with_capacity(x1.len());
        for g in 0..self.vmap.n_gens {
            for kind in FIRST_STAGE_KINDS {
                let j = self.col(VarKey::new(kind, g, 0, s), f64::NEG_INFINITY, f64::INFINITY, 0.0);
                if kind == VarKind::Pg {
                    pg.push(j);
                }
                cols.push(j);
            }
        }
        for (&j, &v) in cols.iter().zip(x1) {
            let r = self.row(Family::Consensus, Row::new(vec![(j, 1.0)], Sense::Eq, v));
            self.vmap.push_consensus_row(r);
        }
        self.vmap.set_first_stage(cols);
        pg
    }

    /// Adds the columns and rows of one (period, scenario) block and returns
    /// the block index and its pg columns.
    fn block(&mut self, t: usize, s: usize, prob: f64, snap: &Snapshot, prev: Prev<'_>) -> (usize, Vec<usize>) {
        let case = self.case;
        let info = self.block_info(t, s, prob, snap, true);
        let gp = info.global_period;
        let w = info.weight;
        let capacity = info.capacity.clone();
        let block = self.vmap.push_block(info);
        let inf = f64::INFINITY;

        let n_g = case.generators.len();
        let mut pg_cols = Vec::with_capacity(n_g);
        let mut reserves: Vec<[usize; 4]> = Vec::with_capacity(n_g);
        for (g, gen) in case.generators.iter().enumerate() {
            let committed = gen.committed(gp);
            let cf = if committed { 1.0 } else { 0.0 };
            let flag = |on: bool| if on { 1.0 } else { 0.0 };
            let headroom = (capacity[g] - gen.pmin).max(0.0);
            let up = gen.ramp_up_rate(self.step);
            let down = gen.ramp_down_rate(self.step);

            let pg = self.col(VarKey::new(VarKind::Pg, g, t, s), 0.0, inf, 0.0);
            let mut target = vec![(pg, 1.0)];
            for (k, seg) in gen.segments.iter().enumerate() {
                let j = self.col(VarKey::new(VarKind::PgSegment(k), g, t, s), 0.0, inf, w * seg.price);
                self.upper(Family::SegmentClearing, j, cf * seg.width);
                target.push((j, -1.0));
            }
            self.row(Family::DispatchTarget, Row::new(target, Sense::Eq, cf * gen.pmin));

            let mut r = [0usize; 4];
            for (slot, product) in ReserveProduct::ALL.into_iter().enumerate() {
                let price = gen.reserve_prices.get(product);
                let j = self.col(VarKey::new(VarKind::Reserve(product), g, t, s), 0.0, inf, w * price);
                let ra = flag(gen.flags.eligible(product, gp));
                match product {
                    ReserveProduct::Regulating => {
                        let rf = flag(gen.flags.regulation.at(gp));
                        self.upper(Family::RegulatingCapacity, j, rf * ra * headroom / 2.0);
                        self.upper(Family::RegulatingRamp, j, 5.0 * up);
                    }
                    ReserveProduct::Spinning => self.upper(Family::SpinningCapacity, j, cf * ra * headroom),
                    ReserveProduct::SupplementalOn => self.upper(Family::SuppOnCapacity, j, cf * ra * headroom),
                    ReserveProduct::SupplementalOff => {
                        self.upper(Family::SuppOffCapacity, j, (1.0 - cf) * ra * gen.reserve_caps.supp_off)
                    }
                }
                self.upper(Family::ReserveCapability, j, gen.reserve_caps.get(product));
                r[slot] = j;
            }
            let [reg, spin, son, _] = r;
            self.row(
                Family::MinLimit,
                Row::new(vec![(pg, 1.0), (reg, -1.0)], Sense::Ge, cf * gen.pmin),
            );
            self.row(
                Family::MaxLimit,
                Row::new(
                    vec![(pg, 1.0), (reg, 1.0), (spin, 1.0), (son, 1.0)],
                    Sense::Le,
                    cf * capacity[g],
                ),
            );
            self.row(
                Family::ContingencyRamp,
                Row::new(vec![(spin, 1.0), (son, 1.0)], Sense::Le, 10.0 * up),
            );

            let was_committed = gp == 0 || gen.committed(gp - 1);
            if committed && was_committed {
                match prev {
                    Prev::State => {
                        let p0 = self.state.prev_dispatch[g];
                        self.upper(Family::RampUp, pg, p0 + self.step * up);
                        self.lower(Family::RampDown, pg, p0 - self.step * down);
                    }
                    Prev::Columns(cols) => {
                        let q = cols[g];
                        self.row(
                            Family::RampUp,
                            Row::new(vec![(pg, 1.0), (q, -1.0)], Sense::Le, self.step * up),
                        );
                        self.row(
                            Family::RampDown,
                            Row::new(vec![(pg, 1.0), (q, -1.0)], Sense::Ge, -self.step * down),
                        );
                    }
                }
            }
            self.lp.cost_constant += w * cf * gen.no_load_cost;
            pg_cols.push(pg);
            reserves.push(r);
        }

        let pen = case.penalties;
        let sys = |kind| VarKey::new(kind, 0, t, s);
        let surplus = self.col(sys(VarKind::Surplus), 0.0, inf, w * pen.surplus_price());
        let shortage = self.col(sys(VarKind::Shortage), 0.0, inf, w * pen.shortage);
        let d_reg = self.col(sys(VarKind::RegShortage), 0.0, inf, w * pen.reg);
        let d_rspin = self.col(sys(VarKind::RspinShortage), 0.0, inf, w * pen.rspin);
        let d_op = self.col(sys(VarKind::OpShortage), 0.0, inf, w * pen.op);

        let mut balance: Vec<(usize, f64)> = pg_cols.iter().map(|&j| (j, 1.0)).collect();
        balance.push((surplus, -1.0));
        balance.push((shortage, 1.0));
        self.row(Family::PowerBalance, Row::new(balance, Sense::Eq, snap.total_load()));

        let req = &case.reserve_req;
        let requirements = [
            (Family::RegRequirement, d_reg, 1, req.reg.at(gp)),
            (Family::RspinRequirement, d_rspin, 2, req.rspin.at(gp)),
            (Family::OpRequirement, d_op, 4, req.op.at(gp)),
        ];
        for (family, slack, products, rhs) in requirements {
            let mut coefs: Vec<(usize, f64)> = reserves
                .iter()
                .flat_map(|r| r[..products].iter().map(|&j| (j, 1.0)))
                .collect();
            coefs.push((slack, 1.0));
            self.row(family, Row::new(coefs, Sense::Ge, rhs));
        }

        for (e, br) in case.branches.iter().enumerate() {
            if !br.monitored {
                continue;
            }
            self.col(
                VarKey::new(VarKind::FlowViolation, e, t, s),
                0.0,
                inf,
                w * br.violation_price,
            );
            if self.flows == FlowMode::Full {
                for upper in [true, false] {
                    let row = flow_row(&self.vmap, case, e, block, upper);
                    let i = self.row(Family::FlowLimit, row);
                    self.vmap.push_flow_row(e, block, upper, i);
                }
            }
        }
        (block, pg_cols)
    }
}

pub fn build_sced(case: &ValidatedCase, state: &SystemState, demand: &Snapshot) -> Result<Built, BuildError> {
    ModelBuilder::new(case, state).sced(demand)
}

pub fn build_lad(case: &ValidatedCase, state: &SystemState, forecast: &ScenarioSet) -> Result<Built, BuildError> {
    ModelBuilder::new(case, state).lad(forecast)
}

pub fn build_slad_extensive(
    case: &ValidatedCase,
    state: &SystemState,
    scenarios: &ScenarioSet,
) -> Result<Built, BuildError> {
    ModelBuilder::new(case, state).slad(scenarios)
}

pub fn build_benders_master(
    case: &ValidatedCase,
    state: &SystemState,
    current: &Snapshot,
    probs: &[f64],
    cuts: &CutPool,
) -> Result<Built, BuildError> {
    ModelBuilder::new(case, state).master(current, probs, cuts)
}

pub fn build_benders_subproblem(
    case: &ValidatedCase,
    state: &SystemState,
    scenarios: &ScenarioSet,
    s: usize,
    x1: &[f64],
) -> Result<Built, BuildError> {
    ModelBuilder::new(case, state).subproblem(scenarios, s, x1)
}
