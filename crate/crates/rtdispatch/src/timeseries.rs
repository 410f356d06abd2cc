//! Loads and capacities over time as CSV.
//!
//! One row per (scenario, period):
//!
//! ```text
//! period,scenario,prob,load:B1,load:B2,pmax:WIND
//! 0,s1,0.5,60,70,35
//! ```
//!
//! `scenario` and `prob` are optional: without `scenario` the file is one
//! trajectory, and without `prob` (or with empty cells) scenarios are equally
//! likely. Every bus needs a `load:` column; `pmax:` columns override the
//! capacity of a generator, and an empty cell keeps its nameplate value. In
//! history files the `scenario` column holds the date of each day.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rtdispatch_core::forecast::{HistoryDay, HistoryStore};
use rtdispatch_core::model::{Scenario, ScenarioSet, Snapshot, SystemCase};

use crate::Error;

/// One labelled trajectory as read from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub label: String,
    pub prob: Option<f64>,
    pub periods: Vec<Snapshot>,
}

enum Column {
    Period,
    Scenario,
    Prob,
    Load(usize),
    Pmax(usize),
}

fn number(cell: &str, what: &str, line: u64) -> Result<f64, String> {
    cell.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("line {line}: {what} {cell:?} is not a number"))
}

/// Parses a table against `case`, returning trajectories in order of first appearance.
pub fn parse_table<R: Read>(reader: R, case: &SystemCase) -> Result<Vec<Trajectory>, String> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers().map_err(|e| e.to_string())?.clone();
    let mut columns = Vec::with_capacity(headers.len());
    let mut seen_loads = vec![false; case.buses.len()];
    for h in &headers {
        let col = if h == "period" {
            Column::Period
        } else if h == "scenario" {
            Column::Scenario
        } else if h == "prob" {
            Column::Prob
        } else if let Some(bus) = h.strip_prefix("load:") {
            let i = case
                .bus_index(bus)
                .ok_or_else(|| format!("column {h}: unknown bus {bus}"))?;
            seen_loads[i] = true;
            Column::Load(i)
        } else if let Some(gen) = h.strip_prefix("pmax:") {
            Column::Pmax(
                case.generator_index(gen)
                    .ok_or_else(|| format!("column {h}: unknown generator {gen}"))?,
            )
        } else {
            return Err(format!("unexpected column {h}"));
        };
        columns.push(col);
    }
    if !columns.iter().any(|c| matches!(c, Column::Period)) {
        return Err("missing column period".into());
    }
    if let Some(i) = seen_loads.iter().position(|s| !s) {
        return Err(format!("missing column load:{}", case.buses[i].id));
    }

    let mut out: Vec<(Trajectory, Vec<(usize, Snapshot)>)> = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| e.to_string())?;
        let line = record.position().map_or(0, |p| p.line());
        let mut period = 0usize;
        let mut label = String::from("0");
        let mut prob = None;
        let mut snap = Snapshot::from_load(vec![0.0; case.buses.len()], case.generators.len());
        for (cell, col) in record.iter().zip(&columns) {
            match col {
                Column::Period => {
                    period = cell
                        .parse()
                        .map_err(|_| format!("line {line}: period {cell:?} is not an index"))?
                }
                Column::Scenario => label = cell.to_string(),
                Column::Prob if cell.is_empty() => prob = None,
                Column::Prob => prob = Some(number(cell, "prob", line)?),
                Column::Load(b) => snap.load[*b] = number(cell, "load", line)?,
                Column::Pmax(g) if cell.is_empty() => snap.pmax[*g] = None,
                Column::Pmax(g) => snap.pmax[*g] = Some(number(cell, "pmax", line)?),
            }
        }
        let slot = match out.iter().position(|(t, _)| t.label == label) {
            Some(i) => i,
            None => {
                out.push((
                    Trajectory {
                        label: label.clone(),
                        prob,
                        periods: Vec::new(),
                    },
                    Vec::new(),
                ));
                out.len() - 1
            }
        };
        let (traj, rows) = &mut out[slot];
        if traj.prob != prob {
            return Err(format!("line {line}: scenario {label} changes probability"));
        }
        rows.push((period, snap));
    }
    if out.is_empty() {
        return Err("no data rows".into());
    }
    out.into_iter()
        .map(|(mut traj, mut rows)| {
            rows.sort_by_key(|(t, _)| *t);
            for (expected, (t, _)) in rows.iter().enumerate() {
                if *t != expected {
                    return Err(format!(
                        "scenario {}: periods must run 0, 1, 2, ... without gaps or repeats",
                        traj.label
                    ));
                }
            }
            traj.periods = rows.into_iter().map(|(_, s)| s).collect();
            Ok(traj)
        })
        .collect()
}

fn open(path: &Path) -> Result<File, Error> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Trajectories as a scenario set, with uniform probabilities when the file has none.
pub fn to_scenario_set(trajectories: Vec<Trajectory>) -> Result<ScenarioSet, String> {
    let n = trajectories.len() as f64;
    let scenarios = trajectories
        .into_iter()
        .map(|t| Scenario {
            prob: t.prob.unwrap_or(1.0 / n),
            periods: t.periods,
        })
        .collect();
    ScenarioSet::new(scenarios).map_err(|e| e.to_string())
}

pub fn read_scenarios(path: &Path, case: &SystemCase) -> Result<ScenarioSet, Error> {
    let table = parse_table(open(path)?, case).map_err(|m| Error::table(path, m))?;
    let set = to_scenario_set(table).map_err(|m| Error::table(path, m))?;
    set.check_against(case).map_err(|e| Error::table(path, e.to_string()))?;
    Ok(set)
}

/// A single realized trajectory.
pub fn read_day(path: &Path, case: &SystemCase) -> Result<ScenarioSet, Error> {
    let set = read_scenarios(path, case)?;
    if set.len() != 1 {
        return Err(Error::table(
            path,
            format!("expected one trajectory, found {}", set.len()),
        ));
    }
    Ok(set)
}

pub fn read_history(path: &Path, case: &SystemCase) -> Result<HistoryStore, Error> {
    let table = parse_table(open(path)?, case).map_err(|m| Error::table(path, m))?;
    let days = table
        .into_iter()
        .map(|t| HistoryDay {
            date: t.label,
            periods: t.periods,
        })
        .collect();
    HistoryStore::new(days).map_err(|e| Error::table(path, e.to_string()))
}

/// Writes `trajectories` in the format read by `parse_table`.
pub fn write_table<W: Write>(out: W, case: &SystemCase, trajectories: &[Trajectory]) -> csv::Result<()> {
    let overridden: Vec<usize> = (0..case.generators.len())
        .filter(|&g| {
            trajectories
                .iter()
                .any(|t| t.periods.iter().any(|p| p.pmax[g].is_some()))
        })
        .collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["period".to_string(), "scenario".into(), "prob".into()];
    header.extend(case.buses.iter().map(|b| format!("load:{}", b.id)));
    header.extend(overridden.iter().map(|&g| format!("pmax:{}", case.generators[g].id)));
    w.write_record(&header)?;
    for t in trajectories {
        for (i, p) in t.periods.iter().enumerate() {
            let mut row = vec![
                i.to_string(),
                t.label.clone(),
                t.prob.map_or(String::new(), |v| v.to_string()),
            ];
            row.extend(p.load.iter().map(f64::to_string));
            row.extend(
                overridden
                    .iter()
                    .map(|&g| p.pmax[g].map_or(String::new(), |v| v.to_string())),
            );
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Trajectories of a scenario set, labelled by index.
pub fn trajectories_of(set: &ScenarioSet) -> Vec<Trajectory> {
    set.scenarios()
        .iter()
        .enumerate()
        .map(|(s, sc)| Trajectory {
            label: s.to_string(),
            prob: Some(sc.prob),
            periods: sc.periods.clone(),
        })
        .collect()
}

/// Trajectories of a history store, labelled by date.
pub fn trajectories_of_history(history: &HistoryStore) -> Vec<Trajectory> {
    history
        .days()
        .iter()
        .map(|d| Trajectory {
            label: d.date.clone(),
            prob: None,
            periods: d.periods.clone(),
        })
        .collect()
}

pub fn save_table(path: &Path, case: &SystemCase, trajectories: &[Trajectory]) -> Result<(), Error> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_table(file, case, trajectories).map_err(|e| Error::table(path, e.to_string()))
}
