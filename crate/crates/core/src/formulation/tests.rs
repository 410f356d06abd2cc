use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::fixtures::{
    case3, case3_congested, case3_scenarios, toy_forecast, toy_scenarios, toy_snapshot, toy_validated,
};
use crate::forecast::mean_forecast;
use crate::lp::{solve_lp, verify_kkt, LinearProgram, LpSolution, LpStatus, SolveOptions};
use crate::model::{validate_case, ScenarioSet, SystemState, ValidatedCase};

fn solve(built: &(LinearProgram, VariableMap)) -> LpSolution {
    let sol = solve_lp(&built.0, &SolveOptions::default()).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    sol
}

fn dispatch(built: &(LinearProgram, VariableMap)) -> DispatchSolution {
    extract_dispatch(&solve(built), &built.1).unwrap()
}

fn pg(d: &DispatchSolution, period: usize, scenario: usize) -> Vec<f64> {
    d.block(period, scenario).unwrap().units.iter().map(|u| u.pg).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn assert_pg(actual: &[f64], expected: &[f64]) {
    for (a, e) in actual.iter().zip(expected) {
        assert!((a - e).abs() < 1e-6, "pg {actual:?} != {expected:?}");
    }
}

fn state(prev: &[f64]) -> SystemState {
    SystemState::with_dispatch(prev.to_vec())
}

fn case3_validated() -> ValidatedCase {
    validate_case(case3()).unwrap()
}

#[test]
fn sced_first_period_of_toy_day() {
    let case = toy_validated();
    let built = build_sced(&case, &state(&[0.0, 0.0]), &toy_snapshot(10.0)).unwrap();
    let d = dispatch(&built);
    assert_pg(&pg(&d, 0, 0), &[10.0, 0.0]);
    assert!((d.objective - 100.0).abs() < 1e-6);
}

#[test]
fn sced_second_period_sheds_five() {
    let case = toy_validated();
    let built = build_sced(&case, &state(&[10.0, 0.0]), &toy_snapshot(35.0)).unwrap();
    let d = dispatch(&built);
    assert_pg(&pg(&d, 0, 0), &[20.0, 10.0]);
    assert!((d.binding().slack.shortage - 5.0).abs() < 1e-6);
    assert!((d.objective - 5400.0).abs() < 1e-6);
    let cost = itemize_costs(&d, &case);
    assert!((cost.energy - 400.0).abs() < 1e-6);
    assert!((cost.penalty_balance - 5000.0).abs() < 1e-6);
    assert!((cost.total - 5400.0).abs() < 1e-6);
}

#[test]
fn sced_zero_demand_costs_nothing() {
    let case = toy_validated();
    let d = dispatch(&build_sced(&case, &state(&[0.0, 0.0]), &toy_snapshot(0.0)).unwrap());
    assert_pg(&pg(&d, 0, 0), &[0.0, 0.0]);
    assert_eq!(d.binding().slack, SystemSlack::default());
    assert_eq!(d.objective, 0.0);
    assert_eq!(itemize_costs(&d, &case).total, 0.0);
}

#[test]
fn lad_keeps_headroom_for_the_ramp() {
    let case = toy_validated();
    let d = dispatch(&build_lad(&case, &state(&[0.0, 0.0]), &toy_forecast()).unwrap());
    assert_pg(&pg(&d, 0, 0), &[7.0, 3.0]);
    let first = itemize_block(d.block(0, 0).unwrap(), &case);
    assert!((first.total - 130.0).abs() < 1e-6);
}

#[test]
fn lad_rejects_multiple_scenarios() {
    let case = toy_validated();
    let err = build_lad(&case, &state(&[0.0, 0.0]), &toy_scenarios()).unwrap_err();
    assert_eq!(err, BuildError::ScenarioCount { expected: 1, found: 2 });
}

#[test]
fn slad_hedges_against_the_high_scenario() {
    let case = toy_validated();
    let d = dispatch(&build_slad_extensive(&case, &state(&[0.0, 0.0]), &toy_scenarios()).unwrap());
    assert_pg(&pg(&d, 0, 0), &[3.0, 7.0]);
    assert_pg(&pg(&d, 0, 1), &[3.0, 7.0]);
    let first = itemize_block(d.block(0, 0).unwrap(), &case).total / 0.5;
    assert!((first - 170.0).abs() < 1e-6);
    // 170 + 0.5 * (20*10 + 9*20) + 0.5 * (20*10 + 17*20)
    let oracle = 170.0 + 0.5 * 380.0 + 0.5 * 540.0;
    assert!((d.objective - oracle).abs() < 1e-6, "{}", d.objective);
}

#[test]
fn slad_with_one_scenario_matches_lad() {
    for (case, set) in [
        (toy_validated(), toy_forecast()),
        (case3_validated(), mean_forecast(&case3_scenarios(3)).unwrap()),
    ] {
        let st = SystemState::initial(&case);
        let lad = solve(&build_lad(&case, &st, &set).unwrap());
        let slad = solve(&build_slad_extensive(&case, &st, &set).unwrap());
        assert!(close(lad.objective, slad.objective, 1e-8));
    }
}

#[test]
fn lad_of_one_period_matches_sced() {
    for (case, snap) in [
        (toy_validated(), toy_snapshot(35.0)),
        (case3_validated(), case3_scenarios(5).scenario(0).periods[0].clone()),
    ] {
        let st = SystemState::initial(&case);
        let sced = solve(&build_sced(&case, &st, &snap).unwrap());
        let one = ScenarioSet::deterministic(vec![snap]).unwrap();
        let lad = solve(&build_lad(&case, &st, &one).unwrap());
        assert!(close(sced.objective, lad.objective, 1e-8));
    }
}

#[test]
fn free_ramping_decouples_periods() {
    let mut raw = crate::fixtures::toy_case();
    for g in &mut raw.generators {
        g.ramp_up = g.pmax / raw.step_minutes;
        g.ramp_down = g.pmax / raw.step_minutes;
    }
    let case = validate_case(raw).unwrap();
    let st = state(&[0.0, 0.0]);
    let lad = dispatch(&build_lad(&case, &st, &toy_forecast()).unwrap());
    let sced = solve(&build_sced(&case, &st, &toy_snapshot(10.0)).unwrap());
    let slice = itemize_block(lad.block(0, 0).unwrap(), &case).total;
    assert!(close(slice, sced.objective, 1e-8));
}

#[test]
fn itemized_total_matches_objective() {
    let case = case3_validated();
    let st = SystemState::initial(&case);
    let built = build_slad_extensive(&case, &st, &case3_scenarios(11)).unwrap();
    let sol = solve(&built);
    let d = extract_dispatch(&sol, &built.1).unwrap();
    let cost = itemize_costs(&d, &case);
    assert!(
        close(cost.total, sol.objective, 1e-6),
        "{} vs {}",
        cost.total,
        sol.objective
    );
    assert!(close(cost.parts().iter().sum::<f64>(), cost.total, 1e-9));
    assert!(cost.no_load > 0.0 && cost.reserves > 0.0);
    let kkt = verify_kkt(&built.0, &sol, 1e-6);
    assert!(kkt.pass, "{kkt:?}");
}

#[test]
fn extract_refuses_unsolved_models() {
    let case = toy_validated();
    let built = build_sced(&case, &state(&[0.0, 0.0]), &toy_snapshot(10.0)).unwrap();
    let mut sol = solve(&built);
    sol.status = LpStatus::Unbounded;
    let err = extract_dispatch(&sol, &built.1).unwrap_err();
    assert_eq!(err, ExtractError::NoSolution(LpStatus::Unbounded));
    assert!(alloc::format!("{err}").contains("no solution to extract"));
}

#[test]
fn all_zero_solution_extracts_to_zero_dispatch() {
    let case = toy_validated();
    let built = build_sced(&case, &state(&[0.0, 0.0]), &toy_snapshot(0.0)).unwrap();
    let sol = LpSolution {
        status: LpStatus::Optimal,
        primal: vec![0.0; built.0.n_vars()],
        duals: vec![0.0; built.0.n_rows()],
        reduced_costs: vec![0.0; built.0.n_vars()],
        objective: 0.0,
        iterations: 0,
    };
    let d = extract_dispatch(&sol, &built.1).unwrap();
    let b = d.binding();
    assert!(b.units.iter().all(|u| u.pg == 0.0 && u.reserves == Default::default()));
    assert_eq!(b.slack, SystemSlack::default());
}

#[test]
fn variable_map_is_a_bijection() {
    let case = case3_validated();
    let st = SystemState::initial(&case);
    let (lp, vmap) = build_slad_extensive(&case, &st, &case3_scenarios(1)).unwrap();
    assert_eq!(vmap.n_columns(), lp.n_vars());
    assert_eq!(vmap.n_rows(), lp.n_rows());
    for (j, key) in vmap.keys().iter().enumerate() {
        assert_eq!(vmap.column(key), Some(j));
    }
}

#[test]
fn every_family_is_present_in_the_extensive_form() {
    let case = case3_validated();
    let st = SystemState::initial(&case);
    let (_, vmap) = build_slad_extensive(&case, &st, &case3_scenarios(1)).unwrap();
    for family in [
        Family::SegmentClearing,
        Family::DispatchTarget,
        Family::RegulatingCapacity,
        Family::SpinningCapacity,
        Family::SuppOnCapacity,
        Family::SuppOffCapacity,
        Family::ReserveCapability,
        Family::MinLimit,
        Family::MaxLimit,
        Family::RampUp,
        Family::RampDown,
        Family::RegulatingRamp,
        Family::ContingencyRamp,
        Family::PowerBalance,
        Family::RegRequirement,
        Family::RspinRequirement,
        Family::OpRequirement,
        Family::FlowLimit,
        Family::NonAnticipativity,
    ] {
        assert!(vmap.family_count(family) > 0, "{family:?} missing");
    }
}

#[test]
fn unmonitoring_a_branch_removes_only_its_flow_rows() {
    let st_case = case3_validated();
    let st = SystemState::initial(&st_case);
    let set = case3_scenarios(2);
    let (_, full) = build_slad_extensive(&st_case, &st, &set).unwrap();
    let mut raw = case3();
    raw.branches[1].monitored = false;
    let reduced_case = validate_case(raw).unwrap();
    let (_, reduced) = build_slad_extensive(&reduced_case, &st, &set).unwrap();
    let blocks = full.blocks().len();
    assert_eq!(
        full.family_count(Family::FlowLimit) - reduced.family_count(Family::FlowLimit),
        2 * blocks
    );
    assert_eq!(full.n_rows() - reduced.n_rows(), 2 * blocks);
}

#[test]
fn decommitting_a_unit_drops_its_ramp_rows() {
    let case = case3_validated();
    let st = SystemState::initial(&case);
    let set = case3_scenarios(2);
    let (_, full) = build_slad_extensive(&case, &st, &set).unwrap();
    let mut raw = case3();
    raw.generators[1].flags.commit = crate::model::Series::PerPeriod(vec![false]);
    raw.generators[1].initial_output = 0.0;
    let off = validate_case(raw).unwrap();
    let (_, reduced) = build_slad_extensive(&off, &SystemState::initial(&off), &set).unwrap();
    let blocks = full.blocks().len();
    assert_eq!(
        full.family_count(Family::RampUp) - reduced.family_count(Family::RampUp),
        blocks
    );
    assert_eq!(
        full.family_count(Family::RampDown) - reduced.family_count(Family::RampDown),
        blocks
    );
    assert_eq!(
        full.family_count(Family::MaxLimit),
        reduced.family_count(Family::MaxLimit)
    );
}

/// A unit whose reserve offers exceed what its ramp rate can deliver.
fn ramp_limited_case() -> ValidatedCase {
    let mut raw = crate::fixtures::toy_case();
    let g = &mut raw.generators[1];
    g.ramp_up = 1.0;
    g.reserve_caps = crate::model::ReserveQuad {
        reg: 30.0,
        spin: 30.0,
        supp_on: 30.0,
        supp_off: 0.0,
    };
    raw.reserve_req = crate::model::ReserveRequirement {
        reg: 20.0.into(),
        rspin: 60.0.into(),
        op: 90.0.into(),
    };
    raw.penalties.reg = 500.0;
    raw.penalties.rspin = 500.0;
    raw.penalties.op = 500.0;
    validate_case(raw).unwrap()
}

#[test]
fn reserve_deployability_limits_bind() {
    let case = ramp_limited_case();
    let d = dispatch(&build_sced(&case, &state(&[0.0, 5.0]), &toy_snapshot(5.0)).unwrap());
    let r = d.binding().units[1].reserves;
    assert!((r.reg - 5.0).abs() < 1e-9, "regulating {}", r.reg);
    assert!(
        (r.spin + r.supp_on - 10.0).abs() < 1e-9,
        "contingency {}",
        r.spin + r.supp_on
    );
}

#[test]
fn lazy_flows_match_the_full_model() {
    let case = validate_case(case3_congested()).unwrap();
    let st = SystemState::initial(&case);
    let set = case3_scenarios(4);
    let full = build_slad_extensive(&case, &st, &set).unwrap();
    let full_sol = solve(&full);
    let (mut lp, mut vmap) = ModelBuilder::new(&case, &st).flows(FlowMode::Lazy).slad(&set).unwrap();
    assert_eq!(vmap.family_count(Family::FlowLimit), 0);
    let lazy = solve_with_lazy_flows(&mut lp, &mut vmap, &case, &SolveOptions::default(), 1e-6).unwrap();
    assert!(vmap.family_count(Family::FlowLimit) > 0);
    assert!(close(full_sol.objective, lazy.objective, 1e-8));
    let d = extract_dispatch(&full_sol, &full.1).unwrap();
    assert!(d
        .blocks
        .iter()
        .any(|b| b.flows.iter().any(|f| f.flow.abs() >= 15.0 - 1e-6)));
}

#[test]
fn separation_reports_overloads() {
    let mut raw = crate::fixtures::toy_case();
    raw.buses.push(crate::model::Bus { id: "B2".into() });
    raw.branches.push(crate::model::Branch {
        id: "L".into(),
        ptdf: [("B1".into(), 0.5), ("B2".into(), -0.5)].into_iter().collect(),
        limit_lo: -5.0,
        limit_hi: 5.0,
        violation_price: 1.0,
        monitored: true,
    });
    let case = validate_case(raw).unwrap();
    let found = lazy_flow_separation(&case, &[vec![10.0, -10.0]], &[], 1e-9);
    assert_eq!(found.len(), 1);
    assert!((found[0].flow - 10.0).abs() < 1e-12);
    assert!((found[0].excess - 5.0).abs() < 1e-12);
    assert!(lazy_flow_separation(&case, &[vec![0.0, 0.0]], &[], 1e-9).is_empty());
}

#[test]
fn subproblem_values_match_hand_computation() {
    let case = toy_validated();
    let st = state(&[0.0, 0.0]);
    let set = toy_scenarios();
    let x = |a: f64, b: f64| vec![a, 0.0, 0.0, 0.0, 0.0, b, 0.0, 0.0, 0.0, 0.0];
    for (s, x1, q) in [
        (1, x(3.0, 7.0), 540.0),
        (1, x(10.0, 0.0), 7400.0),
        (0, x(3.0, 7.0), 380.0),
    ] {
        let sol = solve(&build_benders_subproblem(&case, &st, &set, s, &x1).unwrap());
        assert!((sol.objective - q).abs() < 1e-6, "scenario {s}: {}", sol.objective);
    }
}

#[test]
fn master_without_scenarios_is_sced() {
    let case = toy_validated();
    let st = state(&[0.0, 0.0]);
    let pool = crate::benders::CutPool::new();
    let master = solve(&build_benders_master(&case, &st, &toy_snapshot(10.0), &[], &pool).unwrap());
    let sced = solve(&build_sced(&case, &st, &toy_snapshot(10.0)).unwrap());
    assert_eq!(master.objective, sced.objective);
}

#[test]
fn initialized_master_sits_at_the_bound() {
    let case = toy_validated();
    let st = state(&[0.0, 0.0]);
    let m = -1e9;
    let pool = crate::benders::CutPool::with_initial(2, 10, m);
    let built = build_benders_master(&case, &st, &toy_snapshot(10.0), &[0.5, 0.5], &pool).unwrap();
    let sol = solve(&built);
    assert!((sol.objective - (100.0 + m)).abs() < 1e-6);
    let x: Vec<f64> = built.1.first_stage().iter().map(|&j| sol.primal[j]).collect();
    assert!((x[0] - 10.0).abs() < 1e-9 && x[5].abs() < 1e-9);
}

#[test]
fn realized_pricing_recomputes_shortage() {
    let case = toy_validated();
    let units = vec![
        UnitDispatch {
            pg: 20.0,
            segments: vec![20.0],
            ..Default::default()
        },
        UnitDispatch {
            pg: 15.0,
            segments: vec![15.0],
            ..Default::default()
        },
    ];
    let b = realize_block(&case, 1, units, &toy_snapshot(35.0));
    let c = itemize_block(&b, &case);
    assert_eq!(c.energy, 500.0);
    assert_eq!(c.penalty_balance, 0.0);
    assert_eq!(c.total, 500.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn recourse_is_always_feasible(seed in 0u64..1000, fracs in prop::collection::vec(0.0f64..1.0, 20)) {
        let case = case3_validated();
        let st = SystemState::initial(&case);
        let set = case3_scenarios(seed);
        // Random first stage inside the generator bounds of the first period.
        let x1: Vec<f64> = case
            .generators
            .iter()
            .enumerate()
            .flat_map(|(g, gen)| {
                let f = &fracs[g * 5..g * 5 + 5];
                let cap = set.scenario(0).periods[0].capacity(&case, g);
                let pg = gen.pmin + f[0] * (cap - gen.pmin);
                [pg, f[1] * gen.reserve_caps.reg, f[2] * gen.reserve_caps.spin, f[3] * gen.reserve_caps.supp_on, 0.0]
            })
            .collect();
        for s in 0..set.len() {
            let built = build_benders_subproblem(&case, &st, &set, s, &x1).unwrap();
            let sol = solve_lp(&built.0, &SolveOptions::default()).unwrap();
            prop_assert_eq!(sol.status, LpStatus::Optimal);
        }
    }
}
