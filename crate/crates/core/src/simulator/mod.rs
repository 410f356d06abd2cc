//! Rolling-horizon replay of a day: every period, clear the policy's model,
//! bind its first period, and price that decision against what happened.


use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::benders::{run_benders, BendersConfig, BendersError, BendersState, BendersStatus, Executor};
use crate::forecast::{knn_scenarios, mean_forecast, ForecastError, HistoryStore};
use crate::formulation::{
    extract_dispatch, itemize_block, realize_block, BlockDispatch, BuildError, CostBreakdown, DispatchSolution,
    ModelBuilder,
};
use crate::lp::{solve_lp, LpError, LpStatus, SolveOptions};
use crate::model::{Scenario, ScenarioError, ScenarioSet, Snapshot, SystemState, ValidatedCase};

/// Ramp rate, as a share of capacity per minute, separating slow from fast units.
pub const FAST_RAMP_SHARE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "lowercase"))]
pub enum PolicyKind {
    /// Single-period dispatch on current measurements.
    Sced,
    /// Look-ahead dispatch on the mean forecast.
    Lad,
    /// Two-stage stochastic look-ahead solved by Benders decomposition.
    Slad,
    /// Look-ahead dispatch on the realized future.
    Plad,
    /// One look-ahead over the whole realized day.
    Pd,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Sced => "sced",
            PolicyKind::Lad => "lad",
            PolicyKind::Slad => "slad",
            PolicyKind::Plad => "plad",
            PolicyKind::Pd => "pd",
        }
    }
}

impl core::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sced" => Ok(PolicyKind::Sced),
            "lad" => Ok(PolicyKind::Lad),
            "slad" => Ok(PolicyKind::Slad),
            "plad" => Ok(PolicyKind::Plad),
            "pd" => Ok(PolicyKind::Pd),
            other => Err(format!(
                "unknown policy {other:?} (expected sced, lad, slad, plad or pd)"
            )),
        }
    }
}

/// Where look-ahead policies get their view of the future.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "lowercase"))]
pub enum ScenarioSource {
    /// The day-long scenario set in `ForecastInputs::scenarios`.
    File,
    /// The probability-weighted mean of the scenario file, as one scenario.
    Mean,
    /// The `k` historical days nearest to the observed part of the day.
    /// `window` limits the comparison to the most recent periods.
    Knn { k: usize, window: Option<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PolicySpec {
    pub kind: PolicyKind,
    /// Periods per solve, including the binding one. Ignored by PD.
    pub horizon: usize,
    pub source: ScenarioSource,
    pub benders: BendersConfig,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind, horizon: usize, source: ScenarioSource) -> Self {
        let horizon = match kind {
            PolicyKind::Sced => 1,
            PolicyKind::Pd => usize::MAX,
            _ => horizon,
        };
        Self {
            kind,
            horizon,
            source,
            benders: BendersConfig::default(),
        }
    }

    pub fn sced() -> Self {
        Self::new(PolicyKind::Sced, 1, ScenarioSource::File)
    }

    pub fn pd() -> Self {
        Self::new(PolicyKind::Pd, usize::MAX, ScenarioSource::File)
    }

    pub fn with_benders(mut self, cfg: BendersConfig) -> Self {
        self.benders = cfg;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Policy(msg));
        match self.kind {
            PolicyKind::Sced if self.horizon != 1 => bad(format!("sced has a horizon of 1, got {}", self.horizon)),
            PolicyKind::Lad | PolicyKind::Slad | PolicyKind::Plad if self.horizon == 0 => {
                bad(format!("{} needs a horizon of at least 1", self.kind.name()))
            }
            PolicyKind::Slad => self.benders.validate().map_err(|e| SimError::Policy(format!("{e}"))),
            _ => Ok(()),
        }
    }
}

/// Forecast material available to the look-ahead policies.
#[derive(Debug, Clone, Default)]
pub struct ForecastInputs {
    /// Scenarios covering the whole day, indexed like the realized day.
    pub scenarios: Option<ScenarioSet>,
    pub history: Option<HistoryStore>,
    /// Draw this many scenarios from the file at every step, seeded by the run seed.
    pub sample: Option<usize>,
}

/// Capacity each generator can reach within one period, and its split
/// between slow and fast units.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AvailableCapacity {
    pub per_unit: Vec<f64>,
    pub total: f64,
    pub slow: f64,
    pub fast: f64,
}

/// `min(capacity, previous output + one period of ramp-up)` for every
/// committed generator in `period`, under the conditions of `snapshot`.
pub fn available_capacity(
    state: &SystemState,
    case: &ValidatedCase,
    snapshot: &Snapshot,
    period: usize,
) -> AvailableCapacity {
    let mut out = AvailableCapacity::default();
    for (g, gen) in case.generators.iter().enumerate() {
        let cap = snapshot.capacity(case, g);
        let avail = if gen.committed(period) {
            let reach = state.prev_dispatch[g] + gen.ramp_up_rate(case.step_minutes) * case.step_minutes;
            cap.min(reach).max(0.0)
        } else {
            0.0
        };
        out.per_unit.push(avail);
        out.total += avail;
        if gen.ramp_up_rate(case.step_minutes) < FAST_RAMP_SHARE * gen.pmax {
            out.slow += avail;
        } else {
            out.fast += avail;
        }
    }
    out
}

/// Relative saving of a policy against SCED; positive means cheaper.
pub fn daily_savings(cost_x: f64, cost_sced: f64) -> Result<f64, SimError> {
    if !(cost_sced > 0.0) {
        return Err(SimError::Input(format!("SCED cost must be positive, got {cost_sced}")));
    }
    Ok((cost_sced - cost_x) / cost_sced)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BendersSummary {
    pub iterations: usize,
    pub status: BendersStatus,
    pub lb: f64,
    pub ub: f64,
}

/// One simulated period.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct StepRecord {
    pub period: usize,
    /// Binding decisions, priced against realized conditions.
    pub dispatch: BlockDispatch,
    /// Realized system load, MW.
    pub demand: f64,
    pub cost: CostBreakdown,
    pub available: AvailableCapacity,
    /// Objective of the model solved at this step.
    pub objective: f64,
    pub solve_ms: f64,
    pub benders: Option<BendersSummary>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SimulationLog {
    pub policy: PolicySpec,
    pub steps: Vec<StepRecord>,
    pub totals: CostBreakdown,
}

impl SimulationLog {
    /// Whether any Benders run stopped at its iteration limit.
    pub fn hit_iteration_limit(&self) -> bool {
        self.steps
            .iter()
            .any(|s| s.benders.is_some_and(|b| b.status == BendersStatus::IterationLimit))
    }
}

/// Why a step failed.
#[derive(Debug, Clone, PartialEq)]
pub enum StepFailure {
    Forecast(ForecastError),
    Build(BuildError),
    Lp(LpError),
    Solver(LpStatus),
    Benders(BendersError),
    MissingInput(&'static str),
}

impl fmt::Display for StepFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepFailure::Forecast(e) => write!(f, "forecast: {e}"),
            StepFailure::Build(e) => write!(f, "model: {e}"),
            StepFailure::Lp(e) => write!(f, "lp: {e}"),
            StepFailure::Solver(s) => write!(f, "solver status {s}"),
            StepFailure::Benders(e) => write!(f, "benders: {e}"),
            StepFailure::MissingInput(what) => write!(f, "no {what} given"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    Policy(String),
    Input(String),
    Step { step: usize, failure: StepFailure },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Policy(m) => write!(f, "invalid policy: {m}"),
            SimError::Input(m) => write!(f, "invalid input: {m}"),
            SimError::Step { step, failure } => write!(f, "step {step}: {failure}"),
        }
    }
}

impl core::error::Error for SimError {}

/// The actual day as a list of snapshots.
fn day_of(actuals: &ScenarioSet) -> Result<&[Snapshot], SimError> {
    if actuals.len() != 1 {
        return Err(SimError::Input(format!(
            "the realized day must be a single scenario, got {}",
            actuals.len()
        )));
    }
    Ok(&actuals.scenario(0).periods)
}

fn check_inputs(
    case: &ValidatedCase,
    actuals: &ScenarioSet,
    policy: &PolicySpec,
    inputs: &ForecastInputs,
) -> Result<(), SimError> {
    if matches!(policy.kind, PolicyKind::Lad | PolicyKind::Slad) {
        match policy.source {
            ScenarioSource::File | ScenarioSource::Mean if inputs.scenarios.is_none() => {
                return Err(SimError::Input(format!("{} needs a scenario file", policy.kind.name())));
            }
            ScenarioSource::Knn { .. } if inputs.history.is_none() => {
                return Err(SimError::Input(format!("{} needs a history file", policy.kind.name())));
            }
            _ => {}
        }
    }
    let as_input = |e: ScenarioError| SimError::Input(format!("{e}"));
    actuals.check_against(case).map_err(as_input)?;
    if let Some(set) = &inputs.scenarios {
        set.check_against(case).map_err(as_input)?;
        if set.horizon() < actuals.horizon() {
            return Err(SimError::Input(format!(
                "scenarios cover {} periods, the day has {}",
                set.horizon(),
                actuals.horizon()
            )));
        }
    }
    if let Some(h) = &inputs.history {
        if h.period_count() < actuals.horizon() {
            return Err(SimError::Input(format!(
                "history days have {} periods, the day has {}",
                h.period_count(),
                actuals.horizon()
            )));
        }
    }
    Ok(())
}

/// Scenario set seen by `policy` at `step` of the realized `day`: periods
/// `step..step + horizon`, truncated at the end of the day, with the first
/// period replaced by the measurement.
pub fn outlook(
    policy: &PolicySpec,
    day: &[Snapshot],
    inputs: &ForecastInputs,
    step: usize,
    seed: u64,
) -> Result<ScenarioSet, StepFailure> {
    let len = policy.horizon.min(day.len() - step);
    let set = match policy.kind {
        PolicyKind::Sced => ScenarioSet::deterministic(alloc::vec![day[step].clone()]).map_err(scenario_failure)?,
        PolicyKind::Plad | PolicyKind::Pd => {
            ScenarioSet::deterministic(day[step..step + len].to_vec()).map_err(scenario_failure)?
        }
        PolicyKind::Lad | PolicyKind::Slad => {
            let set = match policy.source {
                ScenarioSource::File | ScenarioSource::Mean => {
                    let full = inputs
                        .scenarios
                        .as_ref()
                        .ok_or(StepFailure::MissingInput("scenario file"))?;
                    let full = match inputs.sample {
                        Some(n) if n < full.len() => sample_scenarios(full, n, seed, step)?,
                        _ => full.clone(),
                    };
                    full.window(step, len)
                }
                ScenarioSource::Knn { k, window } => {
                    let history = inputs.history.as_ref().ok_or(StepFailure::MissingInput("history"))?;
                    let (set, _) = knn_scenarios(history, &day[..=step], k, window).map_err(StepFailure::Forecast)?;
                    set.window(step, len)
                }
            };
            let set = set.with_first_period(&day[step]);
            if policy.kind == PolicyKind::Lad || policy.source == ScenarioSource::Mean {
                mean_forecast(&set).map_err(StepFailure::Forecast)?
            } else {
                set
            }
        }
    };
    Ok(set)
}

fn scenario_failure(e: ScenarioError) -> StepFailure {
    StepFailure::Forecast(ForecastError::Scenario(e))
}

/// `n` scenarios drawn without replacement, probabilities renormalized.
fn sample_scenarios(set: &ScenarioSet, n: usize, seed: u64, step: usize) -> Result<ScenarioSet, StepFailure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step as u64);
    let mut picked = rand::seq::index::sample(&mut rng, set.len(), n.max(1)).into_vec();
    picked.sort_unstable();
    let mass: f64 = picked.iter().map(|&s| set.scenario(s).prob).sum();
    let mut scenarios: Vec<Scenario> = picked
        .iter()
        .map(|&s| Scenario {
            prob: set.scenario(s).prob / mass,
            periods: set.scenario(s).periods.clone(),
        })
        .collect();
    let drift = 1.0 - scenarios.iter().map(|s| s.prob).sum::<f64>();
    scenarios[0].prob += drift;
    ScenarioSet::new(scenarios).map_err(scenario_failure)
}

/// Result of clearing one policy model.
#[derive(Debug, Clone, PartialEq)]
pub struct Clearing {
    pub dispatch: DispatchSolution,
    pub objective: f64,
    /// Final Benders state, for SLAD.
    pub benders: Option<BendersState>,
}

impl Clearing {
    pub fn benders_summary(&self) -> Option<BendersSummary> {
        self.benders.as_ref().map(|b| BendersSummary {
            iterations: b.iteration,
            status: b.status,
            lb: b.lb,
            ub: b.ub,
        })
    }
}

/// Clears `policy`'s model once over `set` from `state`. SCED reads only the
/// first period of the first scenario; LAD and PLAD need a single scenario.
pub fn clear<E: Executor>(
    case: &ValidatedCase,
    state: &SystemState,
    policy: &PolicySpec,
    set: &ScenarioSet,
    exec: &E,
) -> Result<Clearing, StepFailure> {
    if policy.kind == PolicyKind::Slad {
        let out = run_benders(case, state, set, &policy.benders, exec).map_err(StepFailure::Benders)?;
        return Ok(Clearing {
            objective: out.state.objective(),
            dispatch: out.dispatch,
            benders: Some(out.state),
        });
    }
    let builder = ModelBuilder::new(case, state);
    let (lp, vmap) = if policy.kind == PolicyKind::Sced {
        builder.sced(&set.scenario(0).periods[0])
    } else {
        builder.lad(set)
    }
    .map_err(StepFailure::Build)?;
    let sol = solve_lp(&lp, &SolveOptions::default()).map_err(StepFailure::Lp)?;
    if !sol.is_optimal() {
        return Err(StepFailure::Solver(sol.status));
    }
    let dispatch = extract_dispatch(&sol, &vmap).map_err(|_| StepFailure::Solver(sol.status))?;
    Ok(Clearing {
        objective: sol.objective,
        dispatch,
        benders: None,
    })
}

/// Prices the binding block of `solution` against `actual`. Later periods
/// and other scenarios of the solution are never read.
pub fn bind_first_period(
    case: &ValidatedCase,
    global_period: usize,
    solution: &DispatchSolution,
    actual: &Snapshot,
) -> (BlockDispatch, CostBreakdown) {
    let block = realize_block(case, global_period, solution.binding().units.clone(), actual);
    let cost = itemize_block(&block, case);
    (block, cost)
}

fn totals(steps: &[StepRecord]) -> CostBreakdown {
    steps.iter().fold(CostBreakdown::default(), |acc, s| acc + s.cost)
}

/// Replays the realized day under `policy`, starting from the case's initial outputs.
///
/// Look-ahead windows are truncated at the end of the day. The same inputs
/// and seed always give the same log, apart from `solve_ms` when the
/// executor has a clock.
pub fn run_simulation<E: Executor>(
    case: &ValidatedCase,
    actuals: &ScenarioSet,
    policy: &PolicySpec,
    inputs: &ForecastInputs,
    seed: u64,
    exec: &E,
) -> Result<SimulationLog, SimError> {
    policy.validate()?;
    if policy.kind == PolicyKind::Pd {
        return run_perfect_dispatch(case, actuals, exec);
    }
    let day = day_of(actuals)?;
    check_inputs(case, actuals, policy, inputs)?;
    let mut state = SystemState::initial(case);
    let mut steps = Vec::with_capacity(day.len());
    for (t, actual) in day.iter().enumerate() {
        state.wall_clock = t;
        let fail = |failure| SimError::Step { step: t, failure };
        let start = exec.now_ms();
        let set = outlook(policy, day, inputs, t, seed).map_err(fail)?;
        let solved = clear(case, &state, policy, &set, exec).map_err(fail)?;
        let solve_ms = exec.now_ms() - start;
        let available = available_capacity(&state, case, actual, t);
        let (dispatch, cost) = bind_first_period(case, t, &solved.dispatch, actual);
        state.prev_dispatch = dispatch.units.iter().map(|u| u.pg).collect();
        steps.push(StepRecord {
            period: t,
            demand: actual.total_load(),
            dispatch,
            cost,
            available,
            objective: solved.objective,
            solve_ms,
            benders: solved.benders_summary(),
        });
    }
    Ok(SimulationLog {
        policy: *policy,
        totals: totals(&steps),
        steps,
    })
}

/// Clears the whole realized day in one look-ahead solve and reports each
/// period of that solution.
pub fn run_perfect_dispatch<E: Executor>(
    case: &ValidatedCase,
    actuals: &ScenarioSet,
    exec: &E,
) -> Result<SimulationLog, SimError> {
    let day = day_of(actuals)?;
    let policy = PolicySpec::pd();
    check_inputs(case, actuals, &policy, &ForecastInputs::default())?;
    let fail = |failure| SimError::Step { step: 0, failure };
    let state = SystemState::initial(case);
    let whole_day = PolicySpec::new(PolicyKind::Lad, day.len(), ScenarioSource::File);
    let start = exec.now_ms();
    let solved = clear(case, &state, &whole_day, actuals, exec).map_err(fail)?;
    let solve_ms = exec.now_ms() - start;
    let mut prev = state;
    let mut steps = Vec::with_capacity(day.len());
    for (t, actual) in day.iter().enumerate() {
        let planned = solved.dispatch.block(t, 0).expect("one block per period");
        let available = available_capacity(&prev, case, actual, t);
        let dispatch = realize_block(case, t, planned.units.clone(), actual);
        let cost = itemize_block(&dispatch, case);
        prev.prev_dispatch = dispatch.units.iter().map(|u| u.pg).collect();
        steps.push(StepRecord {
            period: t,
            demand: actual.total_load(),
            dispatch,
            cost,
            available,
            objective: solved.objective,
            solve_ms: if t == 0 { solve_ms } else { 0.0 },
            benders: None,
        });
    }
    Ok(SimulationLog {
        policy,
        totals: totals(&steps),
        steps,
    })
}
