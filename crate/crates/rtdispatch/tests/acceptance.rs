//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any of them fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rtdispatch::exec::Threads;
use rtdispatch::export::SavingsRow;
use rtdispatch::timeseries::{save_table, trajectories_of};
use rtdispatch_core::benders::{
    run_benders, separate_benders_cut, BendersConfig, BendersStatus, Cut, CutOrigin, Executor, SeedPoint, Sequential,
};
use rtdispatch_core::fixtures::{
    case3, case3_congested, case3_day, case3_history, case3_scenarios, case3_variant, toy_case, toy_day, toy_forecast,
    toy_scenarios, toy_snapshot, toy_validated,
};
use rtdispatch_core::forecast::mean_forecast;
use rtdispatch_core::formulation::{
    build_benders_subproblem, build_lad, build_sced, build_slad_extensive, extract_dispatch, itemize_block,
    solve_with_lazy_flows, Family, FlowMode, ModelBuilder,
};
use rtdispatch_core::lp::{solve_lp, LpSolution, LpStatus, SolveOptions};
use rtdispatch_core::model::{validate_case, ScenarioSet, Snapshot, SystemCase, SystemState, ValidatedCase};
use rtdispatch_core::simulator::{
    run_perfect_dispatch, run_simulation, ForecastInputs, PolicyKind, PolicySpec, ScenarioSource, SimulationLog,
};

type Outcome = Result<String, String>;

/// Dispatch, shortage and cost of one toy period.
type Cell = ([f64; 2], f64, f64);
type Check = fn() -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn workers() -> Threads {
    Threads::new(std::thread::available_parallelism().map_or(4, |n| n.get()))
}

fn solve(lp: &rtdispatch_core::lp::LinearProgram) -> LpSolution {
    let sol = solve_lp(lp, &SolveOptions::default()).expect("well-formed model");
    assert_eq!(sol.status, LpStatus::Optimal);
    sol
}

fn extensive(case: &ValidatedCase, state: &SystemState, set: &ScenarioSet) -> f64 {
    solve(&build_slad_extensive(case, state, set).unwrap().0).objective
}

fn case3_validated() -> ValidatedCase {
    validate_case(case3()).unwrap()
}

fn toy_state() -> SystemState {
    SystemState::with_dispatch(vec![0.0, 0.0])
}

fn toy_table() -> Outcome {
    let expected: [(&str, PolicySpec, [Cell; 2]); 3] = [
        (
            "SCED",
            PolicySpec::sced(),
            [([10.0, 0.0], 0.0, 100.0), ([20.0, 10.0], 5.0, 5400.0)],
        ),
        (
            "LAD",
            PolicySpec::new(PolicyKind::Lad, 2, ScenarioSource::File),
            [([7.0, 3.0], 0.0, 130.0), ([20.0, 13.0], 2.0, 2460.0)],
        ),
        (
            "SLAD",
            PolicySpec::new(PolicyKind::Slad, 2, ScenarioSource::File),
            [([3.0, 7.0], 0.0, 170.0), ([20.0, 15.0], 0.0, 500.0)],
        ),
    ];
    let start = Instant::now();
    let inputs = ForecastInputs {
        scenarios: Some(toy_scenarios()),
        ..Default::default()
    };
    let case = toy_validated();
    let logs: Vec<SimulationLog> = expected
        .iter()
        .map(|(_, policy, _)| run_simulation(&case, &toy_day(), policy, &inputs, 0, &Sequential).unwrap())
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    for ((name, _, rows), log) in expected.iter().zip(&logs) {
        for (step, (pg, shortage, cost)) in log.steps.iter().zip(rows) {
            let got: Vec<f64> = step.dispatch.units.iter().map(|u| u.pg).collect();
            ensure!(
                got.iter().zip(pg).all(|(a, e)| (a - e).abs() <= 1e-6),
                "{name} period {}: dispatch {got:?}, expected {pg:?}",
                step.period
            );
            ensure!(
                (step.dispatch.slack.shortage - shortage).abs() <= 1e-6,
                "{name} period {}: shortage {}",
                step.period,
                step.dispatch.slack.shortage
            );
            ensure!(
                (step.cost.total - cost).abs() <= 1e-6,
                "{name} period {}: cost {}",
                step.period,
                step.cost.total
            );
        }
    }
    ensure!(elapsed < 1.0, "took {elapsed:.3} s");
    Ok(format!("6 cells matched in {:.1} ms", elapsed * 1e3))
}

fn benders_matches_extensive() -> Outcome {
    let start = Instant::now();
    let mut cases = vec![("toy".to_string(), toy_validated(), toy_state(), toy_scenarios())];
    for seed in 0..5 {
        let case = case3_validated();
        let st = SystemState::initial(&case);
        cases.push((format!("case3 seed {seed}"), case, st, case3_scenarios(seed)));
    }
    let mut worst = 0.0f64;
    for (name, case, st, set) in &cases {
        if name != "toy" {
            ensure!(set.len() == 5 && set.horizon() == 6, "{name}: expected S=5, T=6");
        }
        let out = run_benders(case, st, set, &BendersConfig::default(), &Sequential).map_err(|e| e.to_string())?;
        ensure!(
            out.state.status == BendersStatus::Optimal,
            "{name}: {:?}",
            out.state.status
        );
        let opt = extensive(case, st, set);
        let r = rel(out.state.objective(), opt);
        worst = worst.max(r);
        ensure!(
            r <= 1e-5,
            "{name}: benders {} vs extensive {opt}",
            out.state.objective()
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(elapsed < 30.0, "took {elapsed:.1} s");
    Ok(format!(
        "{} instances, worst relative gap {worst:.2e}, {elapsed:.2} s",
        cases.len()
    ))
}

fn benders_invariants() -> Outcome {
    let results = workers().map(50, |i| -> Result<(bool, usize), String> {
        let seed = 100 + i as u64;
        let case = validate_case(case3_variant(seed)).unwrap();
        let st = SystemState::initial(&case);
        let set = case3_scenarios(seed);
        let out = run_benders(&case, &st, &set, &BendersConfig::default(), &Sequential).map_err(|e| e.to_string())?;
        let h = &out.state.history;
        for w in h.windows(2) {
            ensure!(
                w[1].lb >= w[0].lb,
                "variant {seed}: lb fell at iteration {}",
                w[1].iteration
            );
            ensure!(
                w[1].ub <= w[0].ub,
                "variant {seed}: ub rose at iteration {}",
                w[1].iteration
            );
        }
        for r in h {
            ensure!(
                r.lb <= r.ub + 1e-6 * r.ub.abs().max(1.0),
                "variant {seed}: lb {} > ub {}",
                r.lb,
                r.ub
            );
        }
        let optimal = out.state.status == BendersStatus::Optimal;
        if optimal {
            let opt = extensive(&case, &st, &set);
            ensure!(
                rel(out.state.objective(), opt) <= 1e-5,
                "variant {seed}: {} vs {opt}",
                out.state.objective()
            );
        }
        Ok((optimal, h.len()))
    });
    let mut optimal = 0;
    let mut iterations = 0;
    for r in results {
        let (o, n) = r?;
        optimal += o as usize;
        iterations += n;
    }
    Ok(format!(
        "50 variants, {optimal} declared optimal and confirmed, {iterations} iterations checked"
    ))
}

fn free_ramps(mut raw: SystemCase) -> ValidatedCase {
    for g in &mut raw.generators {
        g.ramp_up = 2.0 * g.pmax / raw.step_minutes;
        g.ramp_down = 2.0 * g.pmax / raw.step_minutes;
    }
    validate_case(raw).unwrap()
}

fn reductions() -> Outcome {
    let c3_forecast = mean_forecast(&case3_scenarios(3)).unwrap();
    let c3_now = case3_scenarios(5).scenario(0).periods[0].clone();
    let fixtures: [(&str, SystemCase, ScenarioSet, Snapshot); 2] = [
        ("toy", toy_case(), toy_forecast(), toy_snapshot(35.0)),
        ("case3", case3(), c3_forecast, c3_now),
    ];
    let mut worst = 0.0f64;
    for (name, raw, forecast, now) in fixtures {
        let case = validate_case(raw.clone()).unwrap();
        let st = SystemState::initial(&case);

        let lad = solve(&build_lad(&case, &st, &forecast).unwrap().0).objective;
        let slad = extensive(&case, &st, &forecast);
        ensure!(rel(slad, lad) <= 1e-8, "{name}: SLAD(S=1) {slad} vs LAD {lad}");
        worst = worst.max(rel(slad, lad));

        let sced = solve(&build_sced(&case, &st, &now).unwrap().0).objective;
        let one = ScenarioSet::deterministic(vec![now.clone()]).unwrap();
        let lad1 = solve(&build_lad(&case, &st, &one).unwrap().0).objective;
        ensure!(rel(lad1, sced) <= 1e-8, "{name}: LAD(T=1) {lad1} vs SCED {sced}");
        worst = worst.max(rel(lad1, sced));

        let free = free_ramps(raw);
        let st = SystemState::initial(&free);
        let built = build_lad(&free, &st, &forecast).unwrap();
        let d = extract_dispatch(&solve(&built.0), &built.1).unwrap();
        let slice = itemize_block(d.block(0, 0).unwrap(), &free).total;
        let sced = solve(&build_sced(&free, &st, &forecast.scenario(0).periods[0]).unwrap().0).objective;
        ensure!(
            rel(slice, sced) <= 1e-8,
            "{name}: free-ramp LAD slice {slice} vs SCED {sced}"
        );
        worst = worst.max(rel(slice, sced));
    }
    Ok(format!("3 identities on toy and case3, worst relative gap {worst:.2e}"))
}

fn lazy_flows() -> Outcome {
    let case = validate_case(case3_congested()).unwrap();
    let st = SystemState::initial(&case);
    let mut worst = 0.0f64;
    let mut summary = Vec::new();
    for seed in [4, 5, 6, 7] {
        let set = case3_scenarios(seed);
        let full = build_slad_extensive(&case, &st, &set).unwrap();
        let full_sol = solve(&full.0);
        let d = extract_dispatch(&full_sol, &full.1).unwrap();
        let congested = d
            .blocks
            .iter()
            .flat_map(|b| b.flows.iter().zip(&case.branches))
            .any(|(f, br)| f.flow >= br.limit_hi - 1e-6 || f.flow <= br.limit_lo + 1e-6);
        ensure!(congested, "seed {seed}: no line at its limit");
        let (mut lp, mut vmap) = ModelBuilder::new(&case, &st).flows(FlowMode::Lazy).slad(&set).unwrap();
        let lazy = solve_with_lazy_flows(&mut lp, &mut vmap, &case, &SolveOptions::default(), 1e-6)
            .map_err(|e| e.to_string())?;
        let r = rel(lazy.objective, full_sol.objective);
        worst = worst.max(r);
        ensure!(
            r <= 1e-8,
            "seed {seed}: lazy {} vs full {}",
            lazy.objective,
            full_sol.objective
        );
        summary.push(format!(
            "{}/{}",
            vmap.family_count(Family::FlowLimit),
            full.1.family_count(Family::FlowLimit)
        ));
    }
    Ok(format!(
        "4 congested instances, worst relative gap {worst:.2e}, flow rows lazy/full {}",
        summary.join(" ")
    ))
}

struct Fixture {
    name: &'static str,
    case: ValidatedCase,
    state: SystemState,
    set: ScenarioSet,
}

fn fixtures() -> Vec<Fixture> {
    let c3 = case3_validated();
    let c3_state = SystemState::initial(&c3);
    vec![
        Fixture {
            name: "toy",
            case: toy_validated(),
            state: toy_state(),
            set: toy_scenarios(),
        },
        Fixture {
            name: "case3",
            case: c3,
            state: c3_state,
            set: case3_scenarios(8),
        },
    ]
}

/// A first-stage vector inside the unit and reserve limits of the first period.
fn random_point(f: &Fixture, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let now = &f.set.scenario(0).periods[0];
    f.case
        .generators
        .iter()
        .enumerate()
        .flat_map(|(g, gen)| {
            let cap = now.capacity(&f.case, g);
            let caps = gen.reserve_caps;
            let reg = rng.gen::<f64>() * 0.5 * caps.reg;
            let spin = rng.gen::<f64>() * 0.5 * caps.spin;
            let son = rng.gen::<f64>() * 0.5 * caps.supp_on;
            let room = (cap - gen.pmin - 2.0 * reg - spin - son).max(0.0);
            let pg = (gen.pmin + reg + rng.gen::<f64>() * room).min(cap);
            [pg, reg, spin, son, 0.0]
        })
        .collect()
}

fn random_points(f: &Fixture, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..100).map(|_| random_point(f, &mut rng)).collect()
}

fn recourse(f: &Fixture, s: usize, x: &[f64]) -> (LpStatus, f64, Option<Cut>) {
    let (lp, vmap) = build_benders_subproblem(&f.case, &f.state, &f.set, s, x).unwrap();
    let sol = solve_lp(&lp, &SolveOptions::default()).unwrap();
    let origin = CutOrigin {
        iteration: 0,
        seed: SeedPoint::Master,
    };
    let cut = sol
        .is_optimal()
        .then(|| separate_benders_cut(&lp, &sol, &vmap, s, origin).unwrap());
    (sol.status, sol.objective, cut)
}

fn cut_validity() -> Outcome {
    let mut report = Vec::new();
    for f in fixtures() {
        let points = random_points(&f, 6);
        let n_s = f.set.len();
        let solved = workers().map(points.len() * n_s, |k| recourse(&f, k % n_s, &points[k / n_s]));
        let mut worst = f64::INFINITY;
        for (k, (status, _, cut)) in solved.iter().enumerate() {
            ensure!(
                *status == LpStatus::Optimal,
                "{} point {} scenario {}: {status:?}",
                f.name,
                k / n_s,
                k % n_s
            );
            let (cut, s) = (cut.as_ref().unwrap(), k % n_s);
            for (j, x) in points.iter().enumerate() {
                let margin = solved[j * n_s + s].1 - cut.value(x);
                worst = worst.min(margin);
                ensure!(
                    margin >= -1e-6,
                    "{}: cut from point {} scenario {s} exceeds Q at point {j} by {}",
                    f.name,
                    k / n_s,
                    -margin
                );
            }
        }
        report.push(format!(
            "{} {} cuts x 100 points, min Q - cut {worst:.2e}",
            f.name,
            solved.len()
        ));
    }
    Ok(report.join("; "))
}

fn recourse_feasibility() -> Outcome {
    let mut report = Vec::new();
    for f in fixtures() {
        let points = random_points(&f, 7);
        let n_s = f.set.len();
        let statuses = workers().map(points.len() * n_s, |k| recourse(&f, k % n_s, &points[k / n_s]).0);
        if let Some(k) = statuses.iter().position(|s| *s != LpStatus::Optimal) {
            return Err(format!(
                "{} point {} scenario {}: {:?}",
                f.name,
                k / n_s,
                k % n_s,
                statuses[k]
            ));
        }
        report.push(format!("{} {} subproblems optimal", f.name, statuses.len()));
    }
    Ok(report.join("; "))
}

fn savings() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = dir.path();
    rtdispatch::case_io::save_case(&p.join("toy.json"), &toy_case()).map_err(|e| e.to_string())?;
    save_table(&p.join("day.csv"), &toy_case(), &trajectories_of(&toy_day())).map_err(|e| e.to_string())?;
    save_table(
        &p.join("scenarios.csv"),
        &toy_case(),
        &trajectories_of(&toy_scenarios()),
    )
    .map_err(|e| e.to_string())?;
    let arg = |n: &str| p.join(n).to_string_lossy().into_owned();
    let out = Command::new(env!("CARGO_BIN_EXE_rtdispatch"))
        .args(["compare", "--case", &arg("toy.json"), "--day", &arg("day.csv")])
        .args([
            "--scenarios",
            &arg("scenarios.csv"),
            "--policies",
            "sced,lad,slad",
            "--horizon",
            "2",
        ])
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "compare failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows: Vec<SavingsRow> = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let slad = rows
        .iter()
        .find(|r| r.policy == "slad")
        .and_then(|r| r.savings)
        .ok_or("no SLAD savings row")?;
    let pct = 100.0 * slad;
    ensure!((pct - 87.82).abs() <= 0.01, "SLAD savings {pct:.4}%");
    Ok(format!("SLAD saves {pct:.4}% against SCED"))
}

fn rolling_kinds() -> [PolicyKind; 4] {
    [PolicyKind::Sced, PolicyKind::Lad, PolicyKind::Slad, PolicyKind::Plad]
}

fn dominated_by(pd: f64, log: &SimulationLog) -> bool {
    pd <= log.totals.total * (1.0 + 1e-6)
}

fn perfect_dispatch_dominates() -> Outcome {
    let toy = toy_validated();
    let pd = run_perfect_dispatch(&toy, &toy_day(), &Sequential)
        .map_err(|e| e.to_string())?
        .totals
        .total;
    let inputs = ForecastInputs {
        scenarios: Some(toy_scenarios()),
        ..Default::default()
    };
    for kind in rolling_kinds() {
        let log = run_simulation(
            &toy,
            &toy_day(),
            &PolicySpec::new(kind, 2, ScenarioSource::File),
            &inputs,
            0,
            &Sequential,
        )
        .map_err(|e| e.to_string())?;
        ensure!(dominated_by(pd, &log), "toy {kind:?}: PD {pd} > {}", log.totals.total);
    }

    let periods = 12;
    let days = workers().map(20, |i| -> Result<f64, String> {
        let seed = 200 + i as u64;
        let case = validate_case(case3_variant(seed)).unwrap();
        let day = ScenarioSet::deterministic(case3_day(seed, periods)).unwrap();
        let inputs = ForecastInputs {
            history: Some(case3_history(seed + 1, 10, periods)),
            ..Default::default()
        };
        let pd = run_perfect_dispatch(&case, &day, &Sequential)
            .map_err(|e| e.to_string())?
            .totals
            .total;
        let mut best_rolling = f64::INFINITY;
        for kind in rolling_kinds() {
            let policy = PolicySpec::new(kind, 4, ScenarioSource::Knn { k: 3, window: None });
            let log = run_simulation(&case, &day, &policy, &inputs, seed, &Sequential).map_err(|e| e.to_string())?;
            ensure!(
                dominated_by(pd, &log),
                "case3 day {seed} {kind:?}: PD {pd} > {}",
                log.totals.total
            );
            best_rolling = best_rolling.min(log.totals.total);
        }
        Ok((best_rolling - pd) / best_rolling.abs().max(1.0))
    });
    let mut margins = Vec::new();
    for d in days {
        margins.push(d?);
    }
    let min = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!(
        "toy day and 20 case3 days, smallest relative margin over the best rolling policy {min:.2e}"
    ))
}

fn in_out_alphas() -> Outcome {
    let case = case3_validated();
    let st = SystemState::initial(&case);
    let mut lines = Vec::new();
    for seed in [2, 9, 13] {
        let set = case3_scenarios(seed);
        let mut objectives = Vec::new();
        let mut iterations = Vec::new();
        for alpha in [0.0, 0.25, 0.5, 0.9] {
            let cfg = BendersConfig {
                alpha,
                ..Default::default()
            };
            let out = run_benders(&case, &st, &set, &cfg, &Sequential).map_err(|e| e.to_string())?;
            ensure!(
                out.state.status == BendersStatus::Optimal,
                "seed {seed} alpha {alpha}: {:?}",
                out.state.status
            );
            objectives.push(out.state.objective());
            iterations.push(format!("{alpha}:{}", out.state.iteration));
        }
        let lo = objectives.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = objectives.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ensure!(rel(hi, lo) <= 1e-5, "seed {seed}: objectives {objectives:?}");
        lines.push(format!("seed {seed} iterations {}", iterations.join(" ")));
    }
    Ok(lines.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("toy day table", toy_table),
        ("benders matches the extensive form", benders_matches_extensive),
        ("benders bound invariants", benders_invariants),
        ("reduction identities", reductions),
        ("lazy flow rows", lazy_flows),
        ("cut validity", cut_validity),
        ("recourse feasibility", recourse_feasibility),
        ("savings metric", savings),
        ("perfect dispatch dominance", perfect_dispatch_dominates),
        ("in-out separation weights", in_out_alphas),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "criterion 11: NOTE year-long savings and solve times on a proprietary 6,000-bus system are not reproducible here; \
         criteria 1 to 10 and the module property suites stand in for them"
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
