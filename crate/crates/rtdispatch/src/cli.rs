//! `rtdispatch solve | simulate | compare | report`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use rtdispatch_core::benders::{BendersConfig, BendersStatus};
use rtdispatch_core::formulation::itemize_costs;
use rtdispatch_core::model::{ScenarioSet, Snapshot, SystemState, ValidatedCase};
use rtdispatch_core::simulator::{
    clear, outlook, run_simulation, ForecastInputs, PolicyKind, PolicySpec, ScenarioSource, SimError,
};

use crate::case_io::load_case;
use crate::exec::Threads;
use crate::export::{
    read_log, savings_table, to_json, write_log_csv, write_savings_csv, write_solve_csv, write_trace_csv,
    BendersReport, Format, LogFile, SavingsRow, SolveReport, SCHEMA_VERSION,
};
use crate::timeseries::{read_day, read_history, read_scenarios};
use crate::Error;

const LOG_HELP: &str = "\
CSV logs hold one row per period and a final `total` row, with columns
schema_version, day, policy, period, demand, energy, import, no_load, reserves,
penalty_balance, penalty_reserves, penalty_flow, total, available,
available_slow, available_fast, shortage, surplus, objective, solve_ms,
benders_iterations, benders_status, then pg:<generator> for every generator.

Exit status: 0 success, 1 bad input data, 2 usage error, 3 a Benders run hit
its iteration limit (outputs are still written).";

#[derive(Debug, Parser)]
#[command(name = "rtdispatch", version, about = "Real-time economic dispatch studies", after_help = LOG_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clear one dispatch model and print the dispatch and its cost.
    Solve(SolveArgs),
    /// Replay a realized day under one policy.
    Simulate(SimulateArgs),
    /// Replay a day under several policies and tabulate savings against SCED.
    Compare(CompareArgs),
    /// Tabulate costs and savings from simulation logs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Day-long scenario CSV used by lad and slad.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    /// Historical days CSV; when given, scenarios come from the k nearest days.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Number of nearest historical days.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// Compare only the last N observed periods when ranking historical days.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub window: Option<u64>,
    /// Collapse the scenario file to its probability-weighted mean.
    #[arg(long)]
    pub mean: bool,
    /// Draw this many scenarios from the file at every step.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub sample: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BendersArgs {
    /// In-out weight of the core point, in [0, 1); 0 disables in-out separation.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Relative optimality gap.
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_iter: u64,
    /// Threads solving subproblems.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: u64,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub case: PathBuf,
    #[arg(long, default_value = "sced")]
    pub policy: PolicyKind,
    /// Current load per bus in MW, comma separated, in case bus order.
    #[arg(long, value_delimiter = ',')]
    pub demand: Option<Vec<f64>>,
    /// Realized day CSV, for current conditions and for plad and pd.
    #[arg(long)]
    pub day: Option<PathBuf>,
    /// Period of the day being cleared.
    #[arg(long, default_value_t = 0)]
    pub period: usize,
    /// Look-ahead periods including the binding one.
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u64).range(1..))]
    pub horizon: u64,
    #[command(flatten)]
    pub forecast: ForecastArgs,
    #[command(flatten)]
    pub benders: BendersArgs,
    /// Write the Benders iteration trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub case: PathBuf,
    /// Realized day CSV.
    #[arg(long)]
    pub day: PathBuf,
    #[arg(long)]
    pub policy: PolicyKind,
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u64).range(1..))]
    pub horizon: u64,
    #[command(flatten)]
    pub forecast: ForecastArgs,
    #[command(flatten)]
    pub benders: BendersArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Record wall-clock solve times; without it they are 0 and output is reproducible byte for byte.
    #[arg(long)]
    pub timings: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub case: PathBuf,
    #[arg(long)]
    pub day: PathBuf,
    /// Policies to run; SCED is always run as the baseline.
    #[arg(long, value_delimiter = ',', default_value = "sced,lad,slad,pd")]
    pub policies: Vec<PolicyKind>,
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u64).range(1..))]
    pub horizon: u64,
    #[command(flatten)]
    pub forecast: ForecastArgs,
    #[command(flatten)]
    pub benders: BendersArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write each policy's log as <dir>/<day>.<policy>.json.
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSON simulation logs.
    #[arg(required = true)]
    pub logs: Vec<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// What a successful command reports besides its output.
struct Done {
    iteration_limit: bool,
}

/// Parses `argv` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return u8::try_from(e.exit_code()).unwrap_or(2);
        }
    };
    match execute(cli.command) {
        Ok(Done { iteration_limit: true }) => {
            eprintln!("warning: a Benders run stopped at its iteration limit");
            3
        }
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<Done, Error> {
    match command {
        Command::Solve(a) => solve(a),
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare(a),
        Command::Report(a) => report(a),
    }
}

fn emit(output: &OutputArgs, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), Error> {
    match &output.out {
        Some(path) => {
            let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            write(&mut file).map_err(|e| Error::io(path, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

fn benders_config(a: &BendersArgs) -> Result<BendersConfig, Error> {
    let cfg = BendersConfig {
        alpha: a.alpha,
        epsilon: a.epsilon,
        max_iter: a.max_iter as usize,
        workers: a.workers as usize,
        ..Default::default()
    };
    cfg.validate().map_err(|e| Error::Usage(e.to_string()))?;
    Ok(cfg)
}

fn source(f: &ForecastArgs) -> ScenarioSource {
    if f.history.is_some() {
        ScenarioSource::Knn {
            k: f.k as usize,
            window: f.window.map(|w| w as usize),
        }
    } else if f.mean {
        ScenarioSource::Mean
    } else {
        ScenarioSource::File
    }
}

fn policy_spec(kind: PolicyKind, horizon: u64, f: &ForecastArgs, b: &BendersArgs) -> Result<PolicySpec, Error> {
    let spec = PolicySpec::new(kind, horizon as usize, source(f)).with_benders(benders_config(b)?);
    spec.validate().map_err(|e| Error::Usage(e.to_string()))?;
    Ok(spec)
}

fn forecast_inputs(case: &ValidatedCase, f: &ForecastArgs) -> Result<ForecastInputs, Error> {
    Ok(ForecastInputs {
        scenarios: f.scenarios.as_deref().map(|p| read_scenarios(p, case)).transpose()?,
        history: f.history.as_deref().map(|p| read_history(p, case)).transpose()?,
        sample: f.sample.map(|n| n as usize),
    })
}

fn executor(b: &BendersArgs, timed: bool) -> Threads {
    let t = Threads::new(b.workers as usize);
    if timed {
        t.timed()
    } else {
        t
    }
}

fn day_label(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "day".into(), |s| s.to_string_lossy().into_owned())
}

fn step_error(step: usize, failure: rtdispatch_core::simulator::StepFailure) -> Error {
    Error::Sim(SimError::Step { step, failure })
}

fn solve(a: SolveArgs) -> Result<Done, Error> {
    let case = load_case(&a.case)?;
    let policy = policy_spec(a.policy, a.horizon, &a.forecast, &a.benders)?;
    let inputs = forecast_inputs(&case, &a.forecast)?;
    let mut day: Vec<Snapshot> = match (&a.day, &inputs.scenarios) {
        (Some(path), _) => read_day(path, &case)?.scenario(0).periods.clone(),
        (None, Some(set)) => set.scenario(0).periods.clone(),
        (None, None) => Vec::new(),
    };
    if let Some(load) = &a.demand {
        if load.len() != case.buses.len() {
            return Err(Error::Data(format!(
                "--demand has {} values, the case has {} buses",
                load.len(),
                case.buses.len()
            )));
        }
        let snap = Snapshot::from_load(load.clone(), case.generators.len());
        if day.is_empty() && a.period == 0 {
            day.push(snap);
        } else if a.period < day.len() {
            day[a.period] = snap;
        }
    }
    if a.period >= day.len() {
        return Err(Error::Usage(
            "current conditions unknown: give --demand, or --day covering --period".into(),
        ));
    }
    ScenarioSet::deterministic(day.clone())
        .and_then(|s| s.check_against(&case))
        .map_err(|e| Error::Data(e.to_string()))?;
    let set = outlook(&policy, &day, &inputs, a.period, a.seed).map_err(|f| step_error(a.period, f))?;
    let state = SystemState {
        wall_clock: a.period,
        ..SystemState::initial(&case)
    };
    let exec = executor(&a.benders, false);
    let cleared = clear(&case, &state, &policy, &set, &exec).map_err(|f| step_error(a.period, f))?;
    let iteration_limit = cleared
        .benders
        .as_ref()
        .is_some_and(|b| b.status == BendersStatus::IterationLimit);
    if let (Some(path), Some(b)) = (&a.trace, &cleared.benders) {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        write_trace_csv(file, &b.history).map_err(|e| Error::io(path, csv_io(e)))?;
    }
    let report = SolveReport {
        schema_version: SCHEMA_VERSION,
        policy: policy.kind.name().into(),
        objective: cleared.objective,
        cost: itemize_costs(&cleared.dispatch, &case),
        benders: cleared.benders.as_ref().map(|b| BendersReport {
            summary: cleared.benders_summary().expect("benders state present"),
            history: b.history.clone(),
        }),
        dispatch: cleared.dispatch,
    };
    emit(&a.output, |w| match a.output.format {
        Format::Json => w.write_all(to_json(&report).as_bytes()),
        Format::Csv => write_solve_csv(w, &case, &report).map_err(csv_io),
    })?;
    Ok(Done { iteration_limit })
}

fn simulate(a: SimulateArgs) -> Result<Done, Error> {
    let case = load_case(&a.case)?;
    let policy = policy_spec(a.policy, a.horizon, &a.forecast, &a.benders)?;
    let inputs = forecast_inputs(&case, &a.forecast)?;
    let day = read_day(&a.day, &case)?;
    let exec = executor(&a.benders, a.timings);
    let log = run_simulation(&case, &day, &policy, &inputs, a.seed, &exec)?;
    let iteration_limit = log.hit_iteration_limit();
    let file = LogFile::new(day_label(&a.day), log);
    emit(&a.output, |w| match a.output.format {
        Format::Json => w.write_all(to_json(&file).as_bytes()),
        Format::Csv => write_log_csv(w, &case, &file).map_err(csv_io),
    })?;
    Ok(Done { iteration_limit })
}

fn write_rows(output: &OutputArgs, rows: &[SavingsRow]) -> Result<(), Error> {
    emit(output, |w| match output.format {
        Format::Json => w.write_all(to_json(&rows).as_bytes()),
        Format::Csv => write_savings_csv(w, rows).map_err(csv_io),
    })
}

fn compare(a: CompareArgs) -> Result<Done, Error> {
    let case = load_case(&a.case)?;
    let inputs = forecast_inputs(&case, &a.forecast)?;
    let day = read_day(&a.day, &case)?;
    let label = day_label(&a.day);
    let mut kinds = vec![PolicyKind::Sced];
    for k in &a.policies {
        if !kinds.contains(k) {
            kinds.push(*k);
        }
    }
    let exec = executor(&a.benders, false);
    let mut logs = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let policy = policy_spec(kind, a.horizon, &a.forecast, &a.benders)?;
        let log = run_simulation(&case, &day, &policy, &inputs, a.seed, &exec)?;
        logs.push(LogFile::new(label.clone(), log));
    }
    if let Some(dir) = &a.log_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for f in &logs {
            let path = dir.join(format!("{}.{}.json", f.day, f.log.policy.kind.name()));
            std::fs::write(&path, to_json(f)).map_err(|e| Error::io(&path, e))?;
        }
    }
    let iteration_limit = logs.iter().any(|f| f.log.hit_iteration_limit());
    let rows: Vec<SavingsRow> = savings_table(&logs)
        .into_iter()
        .filter(|r| a.policies.iter().any(|k| k.name() == r.policy))
        .collect();
    write_rows(&a.output, &rows)?;
    Ok(Done { iteration_limit })
}

/// Per-day rows, then one `all` row per policy over the days that have a SCED run.
fn report(a: ReportArgs) -> Result<Done, Error> {
    let logs = a.logs.iter().map(|p| read_log(p)).collect::<Result<Vec<_>, _>>()?;
    let mut rows = savings_table(&logs);
    let mut policies: Vec<&str> = Vec::new();
    for r in &rows {
        if !policies.contains(&r.policy.as_str()) {
            policies.push(&r.policy);
        }
    }
    let sced_days: Vec<(&str, f64)> = rows
        .iter()
        .filter(|r| r.policy == "sced")
        .map(|r| (r.day.as_str(), r.total_cost))
        .collect();
    let mut summary = Vec::new();
    for p in policies {
        let mine: Vec<&SavingsRow> = rows.iter().filter(|r| r.policy == p).collect();
        let total: f64 = mine.iter().map(|r| r.total_cost).sum();
        let covered: Vec<&&SavingsRow> = mine
            .iter()
            .filter(|r| sced_days.iter().any(|(d, _)| *d == r.day))
            .collect();
        let base: f64 = covered
            .iter()
            .map(|r| sced_days.iter().find(|(d, _)| *d == r.day).map_or(0.0, |(_, c)| *c))
            .sum();
        let cost: f64 = covered.iter().map(|r| r.total_cost).sum();
        summary.push(SavingsRow {
            schema_version: SCHEMA_VERSION,
            day: "all".into(),
            policy: p.into(),
            total_cost: total,
            savings: (!covered.is_empty())
                .then(|| rtdispatch_core::simulator::daily_savings(cost, base).ok())
                .flatten(),
        });
    }
    rows.extend(summary);
    write_rows(&a.output, &rows)?;
    Ok(Done { iteration_limit: false })
}
