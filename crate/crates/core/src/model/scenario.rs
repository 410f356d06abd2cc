use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::SystemCase;

const PROB_TOL: f64 = 1e-9;

/// Exogenous inputs of one period: load per bus and optional capacity
/// overrides per generator (renewables).
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Snapshot {
    pub load: Vec<f64>,
    pub pmax: Vec<Option<f64>>,
}

impl Snapshot {
    /// Load on each bus, no capacity overrides.
    pub fn from_load(load: Vec<f64>, n_gens: usize) -> Self {
        Self {
            load,
            pmax: alloc::vec![None; n_gens],
        }
    }

    pub fn total_load(&self) -> f64 {
        self.load.iter().sum()
    }

    /// Capacity of generator `g` in this period.
    pub fn capacity(&self, case: &SystemCase, g: usize) -> f64 {
        self.pmax.get(g).copied().flatten().unwrap_or(case.generators[g].pmax)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Scenario {
    pub prob: f64,
    pub periods: Vec<Snapshot>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    Empty,
    ProbabilitySum(f64),
    NonPositiveProbability {
        scenario: usize,
        prob: f64,
    },
    Ragged {
        scenario: usize,
        periods: usize,
        expected: usize,
    },
    Shape {
        scenario: usize,
        period: usize,
    },
    NegativeLoad {
        scenario: usize,
        period: usize,
        bus: usize,
    },
    Capacity {
        scenario: usize,
        period: usize,
        generator: usize,
    },
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Empty => f.write_str("scenario set is empty"),
            ScenarioError::ProbabilitySum(s) => write!(f, "probabilities sum to {s}"),
            ScenarioError::NonPositiveProbability { scenario, prob } => {
                write!(f, "scenario {scenario} has probability {prob}, must be positive")
            }
            ScenarioError::Ragged {
                scenario,
                periods,
                expected,
            } => write!(
                f,
                "ragged periods: scenario {scenario} has {periods} periods, expected {expected}"
            ),
            ScenarioError::Shape { scenario, period } => write!(
                f,
                "scenario {scenario} period {period} does not match the case's buses and generators"
            ),
            ScenarioError::NegativeLoad { scenario, period, bus } => write!(
                f,
                "scenario {scenario} period {period}: negative load at bus index {bus}"
            ),
            ScenarioError::Capacity {
                scenario,
                period,
                generator,
            } => write!(
                f,
                "scenario {scenario} period {period}: capacity override of generator index {generator} is below pmin"
            ),
        }
    }
}

impl core::error::Error for ScenarioError {}

/// Scenario trajectories of equal length with probabilities summing to one.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize))]
pub struct ScenarioSet {
    scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self, ScenarioError> {
        let first = scenarios.first().ok_or(ScenarioError::Empty)?;
        let horizon = first.periods.len();
        let width = first.periods.first().map(|p| (p.load.len(), p.pmax.len()));
        let mut sum = 0.0;
        for (s, sc) in scenarios.iter().enumerate() {
            if !(sc.prob.is_finite() && sc.prob > 0.0) {
                return Err(ScenarioError::NonPositiveProbability {
                    scenario: s,
                    prob: sc.prob,
                });
            }
            sum += sc.prob;
            if sc.periods.len() != horizon || horizon == 0 {
                return Err(ScenarioError::Ragged {
                    scenario: s,
                    periods: sc.periods.len(),
                    expected: horizon,
                });
            }
            for (t, snap) in sc.periods.iter().enumerate() {
                if Some((snap.load.len(), snap.pmax.len())) != width {
                    return Err(ScenarioError::Shape { scenario: s, period: t });
                }
                if let Some(bus) = snap.load.iter().position(|&l| !(l.is_finite() && l >= 0.0)) {
                    return Err(ScenarioError::NegativeLoad {
                        scenario: s,
                        period: t,
                        bus,
                    });
                }
            }
        }
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(ScenarioError::ProbabilitySum(sum));
        }
        Ok(Self { scenarios })
    }

    /// One scenario with probability one.
    pub fn deterministic(periods: Vec<Snapshot>) -> Result<Self, ScenarioError> {
        Self::new(alloc::vec![Scenario { prob: 1.0, periods }])
    }

    /// Checks the set's dimensions and capacity overrides against `case`.
    pub fn check_against(&self, case: &SystemCase) -> Result<(), ScenarioError> {
        for (s, sc) in self.scenarios.iter().enumerate() {
            for (t, snap) in sc.periods.iter().enumerate() {
                if snap.load.len() != case.buses.len() || snap.pmax.len() != case.generators.len() {
                    return Err(ScenarioError::Shape { scenario: s, period: t });
                }
                for (g, cap) in snap.pmax.iter().enumerate() {
                    if let Some(c) = cap {
                        if !(c.is_finite() && *c >= case.generators[g].pmin) {
                            return Err(ScenarioError::Capacity {
                                scenario: s,
                                period: t,
                                generator: g,
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.scenarios[0].periods.len()
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn scenario(&self, s: usize) -> &Scenario {
        &self.scenarios[s]
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.scenarios.iter().map(|s| s.prob)
    }

    /// Periods `start..start + len` of every scenario, clipped at the horizon.
    pub fn window(&self, start: usize, len: usize) -> Self {
        let end = (start + len).min(self.horizon());
        assert!(start < end, "empty window");
        Self {
            scenarios: self
                .scenarios
                .iter()
                .map(|sc| Scenario {
                    prob: sc.prob,
                    periods: sc.periods[start..end].to_vec(),
                })
                .collect(),
        }
    }

    /// Replaces the first period of every scenario with `current`.
    pub fn with_first_period(mut self, current: &Snapshot) -> Self {
        for sc in &mut self.scenarios {
            sc.periods[0] = current.clone();
        }
        self
    }

    /// Scales every load by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for sc in &mut out.scenarios {
            for snap in &mut sc.periods {
                snap.load.iter_mut().for_each(|l| *l *= c);
            }
        }
        out
    }
}

/// State carried between consecutive market clearings.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SystemState {
    /// Output of each generator in the previous period, indexed like `case.generators`.
    pub prev_dispatch: Vec<f64>,
    /// Period index within the simulated day.
    pub wall_clock: usize,
}

impl SystemState {
    pub fn initial(case: &SystemCase) -> Self {
        Self {
            prev_dispatch: case.generators.iter().map(|g| g.initial_output).collect(),
            wall_clock: 0,
        }
    }

    pub fn with_dispatch(prev_dispatch: Vec<f64>) -> Self {
        Self {
            prev_dispatch,
            wall_clock: 0,
        }
    }
}
