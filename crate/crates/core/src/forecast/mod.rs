//! Point forecasts and scenario sets from historical analogs.


use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::model::{Scenario, ScenarioError, ScenarioSet, Snapshot};

#[derive(Debug, Clone, PartialEq)]
pub enum ForecastError {
    Empty,
    /// Some scenarios override a generator's capacity in a period and others do not.
    MixedOverrides {
        period: usize,
        generator: usize,
    },
    BadK {
        k: usize,
        days: usize,
    },
    EmptyPrefix,
    PrefixTooLong {
        prefix: usize,
        periods: usize,
    },
    RaggedHistory {
        date: String,
    },
    NegativeValue {
        date: String,
    },
    Scenario(ScenarioError),
}

impl fmt::Display for ForecastError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForecastError::Empty => f.write_str("no scenarios to average"),
            ForecastError::MixedOverrides { period, generator } => write!(
                f,
                "period {period}: capacity of generator index {generator} is overridden in some scenarios only"
            ),
            ForecastError::BadK { k, days } => write!(f, "k = {k} must lie in 1..={days}"),
            ForecastError::EmptyPrefix => f.write_str("observed prefix is empty"),
            ForecastError::PrefixTooLong { prefix, periods } => {
                write!(f, "observed prefix has {prefix} periods, history days have {periods}")
            }
            ForecastError::RaggedHistory { date } => {
                write!(f, "history day {date} has a different shape from the others")
            }
            ForecastError::NegativeValue { date } => write!(f, "history day {date} has a negative value"),
            ForecastError::Scenario(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ForecastError {}

impl From<ScenarioError> for ForecastError {
    fn from(e: ScenarioError) -> Self {
        ForecastError::Scenario(e)
    }
}

/// Probability-weighted mean of every trajectory, as a single scenario.
pub fn mean_forecast(set: &ScenarioSet) -> Result<ScenarioSet, ForecastError> {
    let first = set.scenarios().first().ok_or(ForecastError::Empty)?;
    let mut periods = Vec::with_capacity(set.horizon());
    for (t, template) in first.periods.iter().enumerate() {
        let mut load = vec![0.0; template.load.len()];
        let mut pmax = vec![None; template.pmax.len()];
        for (g, slot) in pmax.iter_mut().enumerate() {
            let overridden = set
                .scenarios()
                .iter()
                .filter(|s| s.periods[t].pmax[g].is_some())
                .count();
            if overridden == set.len() {
                *slot = Some(0.0);
            } else if overridden != 0 {
                return Err(ForecastError::MixedOverrides {
                    period: t,
                    generator: g,
                });
            }
        }
        for sc in set.scenarios() {
            let snap = &sc.periods[t];
            for (acc, v) in load.iter_mut().zip(&snap.load) {
                *acc += sc.prob * v;
            }
            for (acc, v) in pmax.iter_mut().zip(&snap.pmax) {
                if let (Some(a), Some(v)) = (acc.as_mut(), v) {
                    *a += sc.prob * v;
                }
            }
        }
        periods.push(Snapshot { load, pmax });
    }
    Ok(ScenarioSet::deterministic(periods)?)
}

/// One historical day of loads and renewable capacities.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryDay {
    pub date: String,
    pub periods: Vec<Snapshot>,
}

/// Historical days of equal length, kept in date order.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryStore {
    days: Vec<HistoryDay>,
}

impl HistoryStore {
    pub fn new(mut days: Vec<HistoryDay>) -> Result<Self, ForecastError> {
        days.sort_by(|a, b| a.date.cmp(&b.date));
        if let Some(first) = days.first() {
            let shape = |d: &HistoryDay| -> Vec<(usize, Vec<bool>)> {
                d.periods
                    .iter()
                    .map(|p| (p.load.len(), p.pmax.iter().map(Option::is_some).collect()))
                    .collect()
            };
            let reference = shape(first);
            for d in &days {
                if shape(d) != reference || d.periods.is_empty() {
                    return Err(ForecastError::RaggedHistory { date: d.date.clone() });
                }
                let negative = d
                    .periods
                    .iter()
                    .any(|p| p.load.iter().chain(p.pmax.iter().flatten()).any(|v| !(*v >= 0.0)));
                if negative {
                    return Err(ForecastError::NegativeValue { date: d.date.clone() });
                }
            }
        }
        Ok(Self { days })
    }

    pub fn days(&self) -> &[HistoryDay] {
        &self.days
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn period_count(&self) -> usize {
        self.days.first().map_or(0, |d| d.periods.len())
    }
}

/// A selected historical day and its distance to the observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub day: usize,
    pub distance: f64,
}

/// Values of every channel of a snapshot: bus loads, then overridden capacities.
fn channels(s: &Snapshot) -> impl Iterator<Item = Option<f64>> + '_ {
    s.load.iter().map(|&v| Some(v)).chain(s.pmax.iter().copied())
}

/// Standard deviation of each channel over every period of every day, with
/// flat channels mapped to 1.
fn channel_scales(history: &HistoryStore) -> Vec<f64> {
    let template = &history.days[0].periods[0];
    let n = template.load.len() + template.pmax.len();
    let mut sum = vec![0.0; n];
    let mut sq = vec![0.0; n];
    let mut count = vec![0.0; n];
    for day in &history.days {
        for p in &day.periods {
            for (c, v) in channels(p).enumerate() {
                if let Some(v) = v {
                    sum[c] += v;
                    sq[c] += v * v;
                    count[c] += 1.0;
                }
            }
        }
    }
    (0..n)
        .map(|c| {
            if count[c] < 2.0 {
                return 1.0;
            }
            let mean = sum[c] / count[c];
            let var = (sq[c] / count[c] - mean * mean).max(0.0);
            let sd = libm::sqrt(var);
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect()
}

/// Standardized Euclidean distance between the last `window` periods of
/// `observed` and the same periods of `day`.
fn distance(day: &HistoryDay, observed: &[Snapshot], window: usize, scales: &[f64]) -> f64 {
    let start = observed.len() - window;
    let mut total = 0.0;
    for (hist, obs) in day.periods[start..].iter().zip(&observed[start..]) {
        for ((h, o), sd) in channels(hist).zip(channels(obs)).zip(scales) {
            if let (Some(h), Some(o)) = (h, o) {
                let z = (h - o) / sd;
                total += z * z;
            }
        }
    }
    libm::sqrt(total)
}

/// The `k` historical days closest to `observed`, nearest first, as a
/// scenario set of whole days with uniform probabilities.
///
/// `observed[t]` is period `t` of the current day. Only the last `window`
/// observed periods are compared, or all of them when `window` is `None`.
/// Ties go to the earlier date.
pub fn knn_scenarios(
    history: &HistoryStore,
    observed: &[Snapshot],
    k: usize,
    window: Option<usize>,
) -> Result<(ScenarioSet, Vec<Neighbor>), ForecastError> {
    if k == 0 || k > history.len() {
        return Err(ForecastError::BadK { k, days: history.len() });
    }
    if observed.is_empty() {
        return Err(ForecastError::EmptyPrefix);
    }
    if observed.len() > history.period_count() {
        return Err(ForecastError::PrefixTooLong {
            prefix: observed.len(),
            periods: history.period_count(),
        });
    }
    let window = window.unwrap_or(observed.len()).clamp(1, observed.len());
    let scales = channel_scales(history);
    let mut ranked: Vec<Neighbor> = history
        .days
        .iter()
        .enumerate()
        .map(|(day, d)| Neighbor {
            day,
            distance: distance(d, observed, window, &scales),
        })
        .collect();
    ranked.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.day.cmp(&b.day)));
    ranked.truncate(k);
    let p = 1.0 / k as f64;
    let scenarios: Vec<Scenario> = ranked
        .iter()
        .map(|n| Scenario {
            prob: p,
            periods: history.days[n.day].periods.clone(),
        })
        .collect();
    Ok((ScenarioSet::new(scenarios)?, ranked))
}
