//! JSON and CSV outputs. Every document and every CSV row carries
//! `schema_version`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use rtdispatch_core::benders::IterationRecord;
use rtdispatch_core::formulation::{CostBreakdown, DispatchSolution};
use rtdispatch_core::model::SystemCase;
use rtdispatch_core::simulator::{BendersSummary, SimulationLog, StepRecord};

use crate::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// A simulation log as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFile {
    pub schema_version: u32,
    /// Label of the simulated day, usually the day file's stem.
    pub day: String,
    pub log: SimulationLog,
}

impl LogFile {
    pub fn new(day: impl Into<String>, log: SimulationLog) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            day: day.into(),
            log,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BendersReport {
    #[serde(flatten)]
    pub summary: BendersSummary,
    pub history: Vec<IterationRecord>,
}

/// Output of a single clearing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema_version: u32,
    pub policy: String,
    pub objective: f64,
    pub cost: CostBreakdown,
    pub dispatch: DispatchSolution,
    pub benders: Option<BendersReport>,
}

/// Cost of one policy on one day, and its saving against SCED.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsRow {
    pub schema_version: u32,
    pub day: String,
    pub policy: String,
    pub total_cost: f64,
    /// `None` when the day has no SCED run, or SCED cost nothing.
    pub savings: Option<f64>,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("outputs serialize") + "\n"
}

pub fn read_log(path: &Path) -> Result<LogFile, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: LogFile = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::table(
            path,
            format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                file.schema_version
            ),
        ));
    }
    Ok(file)
}

fn cost_cells(c: &CostBreakdown) -> [String; 8] {
    [
        c.energy,
        c.import,
        c.no_load,
        c.reserves,
        c.penalty_balance,
        c.penalty_reserves,
        c.penalty_flow,
        c.total,
    ]
    .map(|v| v.to_string())
}

const COST_COLUMNS: [&str; 8] = [
    "energy",
    "import",
    "no_load",
    "reserves",
    "penalty_balance",
    "penalty_reserves",
    "penalty_flow",
    "total",
];

/// Column order of the per-step CSV log.
pub fn log_columns(case: &SystemCase) -> Vec<String> {
    let mut cols: Vec<String> = ["schema_version", "day", "policy", "period", "demand"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend(COST_COLUMNS.iter().map(|s| s.to_string()));
    cols.extend(
        [
            "available",
            "available_slow",
            "available_fast",
            "shortage",
            "surplus",
            "objective",
            "solve_ms",
            "benders_iterations",
            "benders_status",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    cols.extend(case.generators.iter().map(|g| format!("pg:{}", g.id)));
    cols
}

fn step_row(file: &LogFile, s: &StepRecord) -> Vec<String> {
    let mut row = vec![
        SCHEMA_VERSION.to_string(),
        file.day.clone(),
        file.log.policy.kind.name().into(),
        s.period.to_string(),
        s.demand.to_string(),
    ];
    row.extend(cost_cells(&s.cost));
    row.extend([
        s.available.total.to_string(),
        s.available.slow.to_string(),
        s.available.fast.to_string(),
        s.dispatch.slack.shortage.to_string(),
        s.dispatch.slack.surplus.to_string(),
        s.objective.to_string(),
        s.solve_ms.to_string(),
        s.benders.map_or(String::new(), |b| b.iterations.to_string()),
        s.benders
            .map_or(String::new(), |b| format!("{:?}", b.status).to_lowercase()),
    ]);
    row.extend(s.dispatch.units.iter().map(|u| u.pg.to_string()));
    row
}

/// One row per step followed by a `total` row.
pub fn write_log_csv<W: Write>(out: W, case: &SystemCase, file: &LogFile) -> csv::Result<()> {
    let cols = log_columns(case);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&cols)?;
    for s in &file.log.steps {
        w.write_record(step_row(file, s))?;
    }
    let mut total = vec![
        SCHEMA_VERSION.to_string(),
        file.day.clone(),
        file.log.policy.kind.name().into(),
        "total".into(),
        file.log.steps.iter().map(|s| s.demand).sum::<f64>().to_string(),
    ];
    total.extend(cost_cells(&file.log.totals));
    total.resize(cols.len(), String::new());
    w.write_record(&total)?;
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(out: W, history: &[IterationRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "schema_version",
        "iteration",
        "lb",
        "ub",
        "gap",
        "cuts_added",
        "subproblem_ms",
        "wall_ms",
    ])?;
    for h in history {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            h.iteration.to_string(),
            h.lb.to_string(),
            h.ub.to_string(),
            h.gap.to_string(),
            h.cuts_added.to_string(),
            h.subproblem_ms.to_string(),
            h.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_savings_csv<W: Write>(out: W, rows: &[SavingsRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (block, unit) of a clearing.
pub fn write_solve_csv<W: Write>(out: W, case: &SystemCase, report: &SolveReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "schema_version",
        "policy",
        "period",
        "scenario",
        "prob",
        "unit",
        "pg",
        "reg",
        "spin",
        "supp_on",
        "supp_off",
        "objective",
    ])?;
    for b in &report.dispatch.blocks {
        for (gen, u) in case.generators.iter().zip(&b.units) {
            let r = u.reserves;
            w.write_record([
                SCHEMA_VERSION.to_string(),
                report.policy.clone(),
                b.period.to_string(),
                b.scenario.to_string(),
                b.prob.to_string(),
                gen.id.clone(),
                u.pg.to_string(),
                r.reg.to_string(),
                r.spin.to_string(),
                r.supp_on.to_string(),
                r.supp_off.to_string(),
                report.objective.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Savings of every log against the SCED log of the same day, in the order given.
pub fn savings_table(logs: &[LogFile]) -> Vec<SavingsRow> {
    logs.iter()
        .map(|f| {
            let sced = logs
                .iter()
                .find(|o| o.day == f.day && o.log.policy.kind == rtdispatch_core::simulator::PolicyKind::Sced)
                .map(|o| o.log.totals.total);
            SavingsRow {
                schema_version: SCHEMA_VERSION,
                day: f.day.clone(),
                policy: f.log.policy.kind.name().into(),
                total_cost: f.log.totals.total,
                savings: sced.and_then(|s| rtdispatch_core::simulator::daily_savings(f.log.totals.total, s).ok()),
            }
        })
        .collect()
}
