//! Benders decomposition of the two-stage dispatch with in-out separation.


use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::formulation::{
    extract_dispatch, solve_with_lazy_flows, BuildError, DispatchSolution, FlowMode, ModelBuilder, VarKey, VarKind,
    VariableMap,
};
use crate::lp::{LinearProgram, LpError, LpSolution, LpStatus, SolveOptions};
use crate::model::{ScenarioSet, SystemState, ValidatedCase};

/// Where the subproblems were evaluated when a cut was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum SeedPoint {
    InOut,
    Master,
    Initial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CutOrigin {
    pub iteration: usize,
    pub seed: SeedPoint,
}

/// `theta_s >= rhs_const + coefs . x1`, an affine under-estimator of the
/// recourse cost of one scenario.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Cut {
    pub scenario: usize,
    pub coefs: Vec<f64>,
    pub rhs_const: f64,
    pub origin: CutOrigin,
}

impl Cut {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.rhs_const + self.coefs.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()
    }

    fn same_as(&self, other: &Cut) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
        self.scenario == other.scenario
            && close(self.rhs_const, other.rhs_const)
            && self.coefs.len() == other.coefs.len()
            && self.coefs.iter().zip(&other.coefs).all(|(&a, &b)| close(a, b))
    }
}

/// Cuts of every scenario, with duplicates dropped on insertion.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CutPool {
    cuts: Vec<Cut>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// One `theta_s >= m` cut per scenario over a first stage of `dim` entries.
    pub fn with_initial(scenarios: usize, dim: usize, m: f64) -> Self {
        let cuts = (0..scenarios)
            .map(|s| Cut {
                scenario: s,
                coefs: vec![0.0; dim],
                rhs_const: m,
                origin: CutOrigin {
                    iteration: 0,
                    seed: SeedPoint::Initial,
                },
            })
            .collect();
        Self { cuts }
    }

    /// Adds `cut` unless an equal one is present. Returns whether it was added.
    pub fn add(&mut self, cut: Cut) -> bool {
        if self.cuts.iter().any(|c| c.same_as(&cut)) {
            return false;
        }
        self.cuts.push(cut);
        true
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn for_scenario(&self, s: usize) -> impl Iterator<Item = &Cut> {
        self.cuts.iter().filter(move |c| c.scenario == s)
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BendersConfig {
    /// Relative gap `(ub - lb) / max(1, |ub|)` at which to stop.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Weight of the core point in the separation point.
    pub alpha: f64,
    /// Initial lower bound on every scenario's recourse cost, in dollars.
    pub big_m: f64,
    /// MW a flow may exceed its limit before its row is added.
    pub lazy_flow_tol: f64,
    pub workers: usize,
}

impl Default for BendersConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            max_iter: 100,
            alpha: 0.5,
            big_m: -1e12,
            lazy_flow_tol: 1e-6,
            workers: 1,
        }
    }
}

impl BendersConfig {
    pub fn validate(&self) -> Result<(), BendersError> {
        if !(self.epsilon > 0.0) {
            return Err(BendersError::Config("epsilon must be positive"));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(BendersError::Config("alpha must lie in [0, 1)"));
        }
        if !self.big_m.is_finite() {
            return Err(BendersError::Config("big_m must be finite"));
        }
        if !(self.lazy_flow_tol >= 0.0) {
            return Err(BendersError::Config("lazy_flow_tol must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BendersError {
    Config(&'static str),
    NoScenarios,
    Dimension { expected: usize, found: usize },
    Build(BuildError),
    Lp(LpError),
    Master(LpStatus),
    Subproblem { scenario: usize, status: LpStatus },
}

impl fmt::Display for BendersError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BendersError::Config(m) => write!(f, "invalid configuration: {m}"),
            BendersError::NoScenarios => f.write_str("no scenarios"),
            BendersError::Dimension { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            BendersError::Build(e) => write!(f, "{e}"),
            BendersError::Lp(e) => write!(f, "{e}"),
            BendersError::Master(s) => write!(f, "master problem ended with status {s}"),
            BendersError::Subproblem { scenario, status } => {
                write!(f, "subproblem of scenario {scenario} ended with status {status}")
            }
        }
    }
}

impl core::error::Error for BendersError {}

impl From<BuildError> for BendersError {
    fn from(e: BuildError) -> Self {
        BendersError::Build(e)
    }
}

impl From<LpError> for BendersError {
    fn from(e: LpError) -> Self {
        BendersError::Lp(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum BendersStatus {
    Optimal,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct IterationRecord {
    pub iteration: usize,
    pub lb: f64,
    pub ub: f64,
    pub gap: f64,
    pub cuts_added: usize,
    pub subproblem_ms: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BendersState {
    pub lb: f64,
    pub ub: f64,
    pub pool: CutPool,
    pub x_bar: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub x_tilde: Vec<f64>,
    pub iteration: usize,
    pub history: Vec<IterationRecord>,
    pub status: BendersStatus,
}

impl BendersState {
    pub fn gap(&self) -> f64 {
        relative_gap(self.lb, self.ub)
    }

    /// Best first-stage plus expected recourse cost found.
    pub fn objective(&self) -> f64 {
        self.ub
    }
}

fn relative_gap(lb: f64, ub: f64) -> f64 {
    if !ub.is_finite() || !lb.is_finite() {
        return f64::INFINITY;
    }
    (ub - lb) / ub.abs().max(1.0)
}

/// Runs independent jobs, possibly in parallel, returning results in index order.
pub trait Executor {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync;

    /// Milliseconds on a monotonic clock; executors without one report 0.
    fn now_ms(&self) -> f64 {
        0.0
    }
}

/// Runs every job on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync,
    {
        (0..n).map(f).collect()
    }
}

/// `alpha * x_hat + (1 - alpha) * x_bar`.
pub fn in_out_candidate(x_bar: &[f64], x_hat: &[f64], alpha: f64) -> Result<Vec<f64>, BendersError> {
    if x_bar.len() != x_hat.len() {
        return Err(BendersError::Dimension {
            expected: x_bar.len(),
            found: x_hat.len(),
        });
    }
    Ok(x_bar
        .iter()
        .zip(x_hat)
        .map(|(&b, &h)| alpha * h + (1.0 - alpha) * b)
        .collect())
}

/// Builds the cut of `scenario` from an optimal subproblem solution.
///
/// The slope is the vector of duals on the consensus rows; the constant
/// collects every other row's dual times its right-hand side and every
/// column's reduced cost times the bound it sits against.
pub fn separate_benders_cut(
    lp: &LinearProgram,
    sol: &LpSolution,
    vmap: &VariableMap,
    scenario: usize,
    origin: CutOrigin,
) -> Result<Cut, BendersError> {
    if !sol.is_optimal() {
        return Err(BendersError::Subproblem {
            scenario,
            status: sol.status,
        });
    }
    let consensus = vmap.consensus_rows();
    let mut pinned = vec![false; lp.n_vars()];
    for &j in vmap.first_stage() {
        pinned[j] = true;
    }
    let mut is_consensus = vec![false; lp.n_rows()];
    for &i in consensus {
        is_consensus[i] = true;
    }
    let mut rhs_const = lp.cost_constant;
    for (i, row) in lp.rows.iter().enumerate() {
        if !is_consensus[i] {
            rhs_const += sol.duals[i] * row.rhs;
        }
    }
    for (j, &fixed) in pinned.iter().enumerate() {
        if fixed {
            continue;
        }
        let d = sol.reduced_costs[j];
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        rhs_const += if d > 0.0 && lo.is_finite() {
            d * lo
        } else if d < 0.0 && hi.is_finite() {
            d * hi
        } else {
            d * sol.primal[j]
        };
    }
    let coefs = consensus.iter().map(|&i| sol.duals[i]).collect();
    Ok(Cut {
        scenario,
        coefs,
        rhs_const,
        origin,
    })
}

/// Result of a Benders run: the first-period dispatch of the best incumbent
/// and the final algorithm state.
#[derive(Debug, Clone, PartialEq)]
pub struct BendersOutcome {
    pub dispatch: DispatchSolution,
    pub state: BendersState,
}

struct Recourse {
    value: f64,
    cut: Cut,
}

struct Subproblems<'a> {
    case: &'a ValidatedCase,
    models: Vec<(LinearProgram, VariableMap)>,
    lp_opts: SolveOptions,
    flow_tol: f64,
}

impl Subproblems<'_> {
    fn evaluate<E: Executor>(&mut self, exec: &E, x: &[f64], origin: CutOrigin) -> Result<Vec<Recourse>, BendersError> {
        let models = &self.models;
        let (case, opts, tol) = (self.case, &self.lp_opts, self.flow_tol);
        let solved = exec.map(models.len(), |s| {
            let (mut lp, mut vmap) = models[s].clone();
            for (k, &i) in vmap.consensus_rows().iter().enumerate() {
                lp.rows[i].rhs = x[k];
            }
            let sol = solve_with_lazy_flows(&mut lp, &mut vmap, case, opts, tol);
            (lp, vmap, sol)
        });
        let mut out = Vec::with_capacity(solved.len());
        for (s, (lp, vmap, sol)) in solved.into_iter().enumerate() {
            let sol = sol?;
            let cut = separate_benders_cut(&lp, &sol, &vmap, s, origin)?;
            out.push(Recourse {
                value: sol.objective,
                cut,
            });
            self.models[s] = (lp, vmap);
        }
        Ok(out)
    }
}

fn cut_tolerance(theta: f64) -> f64 {
    1e-7 * theta.abs().max(1.0)
}

/// Solves the two-stage dispatch over `scenarios` by Benders decomposition.
///
/// Every scenario's first period must hold the same current conditions; the
/// master problem uses those of the first scenario.
pub fn run_benders<E: Executor>(
    case: &ValidatedCase,
    state: &SystemState,
    scenarios: &ScenarioSet,
    cfg: &BendersConfig,
    exec: &E,
) -> Result<BendersOutcome, BendersError> {
    cfg.validate()?;
    if scenarios.is_empty() {
        return Err(BendersError::NoScenarios);
    }
    let start = exec.now_ms();
    let n_s = scenarios.len();
    let probs: Vec<f64> = scenarios.probabilities().collect();
    let current = &scenarios.scenario(0).periods[0];
    let builder = ModelBuilder::new(case, state).flows(FlowMode::Lazy);
    let dim = case.generators.len() * crate::formulation::FIRST_STAGE_PER_UNIT;
    let lp_opts = SolveOptions::default();

    let mut subs = Subproblems {
        case,
        models: (0..n_s)
            .map(|s| builder.subproblem(scenarios, s, &vec![0.0; dim]))
            .collect::<Result<_, _>>()?,
        lp_opts,
        flow_tol: cfg.lazy_flow_tol,
    };
    let mut pool = CutPool::with_initial(n_s, dim, cfg.big_m);
    let mut master_flows: Vec<(usize, bool)> = Vec::new();
    let mut lb = f64::NEG_INFINITY;
    let mut ub = f64::INFINITY;
    let mut best: Option<DispatchSolution> = None;
    let mut x_hat: Option<Vec<f64>> = None;
    let mut x_bar = Vec::new();
    let mut x_tilde = Vec::new();
    let mut history = Vec::new();
    let mut status = BendersStatus::IterationLimit;

    for iteration in 1..=cfg.max_iter.max(1) {
        let (mut lp, mut vmap) = builder.master(current, &probs, &pool)?;
        restore_master_flows(&mut lp, &mut vmap, case, &master_flows);
        let sol = solve_with_lazy_flows(&mut lp, &mut vmap, case, &lp_opts, cfg.lazy_flow_tol)?;
        if !sol.is_optimal() {
            return Err(BendersError::Master(sol.status));
        }
        master_flows = vmap
            .active_flows()
            .into_iter()
            .flat_map(|(e, _)| [(e, true), (e, false)])
            .filter(|&(e, upper)| vmap.has_flow_row(e, 0, upper))
            .collect();
        master_flows.dedup();

        x_bar = vmap.first_stage().iter().map(|&j| sol.primal[j]).collect();
        let theta: Vec<f64> = (0..n_s)
            .map(|s| {
                let j = vmap
                    .column(&VarKey::new(VarKind::Theta, s, 0, 0))
                    .expect("theta column");
                sol.primal[j]
            })
            .collect();
        let first_period_cost = sol.objective - probs.iter().zip(&theta).map(|(p, t)| p * t).sum::<f64>();
        lb = lb.max(sol.objective);
        let core = x_hat.get_or_insert_with(|| x_bar.clone());
        x_tilde = in_out_candidate(&x_bar, core, cfg.alpha)?;
        let at_master = x_tilde
            .iter()
            .zip(&x_bar)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + b.abs()));

        let sub_start = exec.now_ms();
        let seed = if at_master { SeedPoint::Master } else { SeedPoint::InOut };
        let first = subs.evaluate(exec, &x_tilde, CutOrigin { iteration, seed })?;
        let mut cuts_added = 0;
        let violated =
            |r: &Recourse| r.cut.value(&x_bar) > theta[r.cut.scenario] + cut_tolerance(theta[r.cut.scenario]);
        let found_at_tilde = first.iter().any(violated);
        for r in first.iter().filter(|r| violated(r)) {
            cuts_added += usize::from(pool.add(r.cut.clone()));
        }
        let (recourse_at_bar, found_at_bar) = if at_master {
            (first.iter().map(|r| r.value).collect::<Vec<_>>(), found_at_tilde)
        } else {
            let second = subs.evaluate(
                exec,
                &x_bar,
                CutOrigin {
                    iteration,
                    seed: SeedPoint::Master,
                },
            )?;
            let found = second.iter().any(violated);
            if !found_at_tilde {
                for r in second.iter().filter(|r| violated(r)) {
                    cuts_added += usize::from(pool.add(r.cut.clone()));
                }
            }
            (second.iter().map(|r| r.value).collect(), found)
        };
        let subproblem_ms = exec.now_ms() - sub_start;

        let candidate = first_period_cost + probs.iter().zip(&recourse_at_bar).map(|(p, q)| p * q).sum::<f64>();
        if candidate < ub {
            ub = candidate;
            best = Some(extract_dispatch(&sol, &vmap).map_err(|_| BendersError::Master(sol.status))?);
        }
        x_hat = Some(if found_at_tilde { x_tilde.clone() } else { x_bar.clone() });

        let gap = relative_gap(lb, ub);
        history.push(IterationRecord {
            iteration,
            lb,
            ub,
            gap,
            cuts_added,
            subproblem_ms,
            wall_ms: exec.now_ms() - start,
        });
        if gap <= cfg.epsilon || !found_at_bar {
            status = BendersStatus::Optimal;
            break;
        }
    }

    let state = BendersState {
        lb,
        ub,
        pool,
        x_bar,
        x_hat: x_hat.unwrap_or_default(),
        x_tilde,
        iteration: history.len(),
        history,
        status,
    };
    Ok(BendersOutcome {
        dispatch: best.expect("at least one iteration records an incumbent"),
        state,
    })
}

fn restore_master_flows(lp: &mut LinearProgram, vmap: &mut VariableMap, case: &ValidatedCase, flows: &[(usize, bool)]) {
    for &(e, upper) in flows {
        let row = crate::formulation::flow_row_for(vmap, case, e, 0, upper);
        let i = lp.add_row(row);
        vmap.register_flow_row(e, 0, upper, i);
    }
}
