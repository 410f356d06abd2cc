use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::fixtures::{case3, toy_case, toy_snapshot};

#[test]
fn reference_cases_validate() {
    let toy = validate_case(toy_case()).unwrap();
    assert_eq!(toy.gen_bus(), &[0, 0]);
    let c3 = validate_case(case3()).unwrap();
    assert_eq!(c3.ptdf().len(), 3);
    assert!((c3.ptdf()[0][0] - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn pmin_above_pmax_is_named() {
    let mut case = toy_case();
    case.generators[0].pmin = 30.0;
    let err = validate_case(case).unwrap_err();
    assert!(err.mentions("G1"));
    assert!(err.mentions("pmin 30 exceeds pmax 20"), "{err}");
}

#[test]
fn non_convex_bids_are_rejected() {
    let mut case = case3();
    case.generators[0].segments[1].price = 10.0;
    let err = validate_case(case).unwrap_err();
    assert!(err.mentions("non-convex bid curve"), "{err}");
    assert!(err.mentions("COAL"));
}

#[test]
fn unknown_bus_and_duplicate_ids() {
    let mut case = toy_case();
    case.generators[1].bus = "B9".into();
    case.generators.push(Generator::simple("G1", "B1", 5.0, 1.0, 1.0));
    let err = validate_case(case).unwrap_err();
    assert!(err.mentions("unknown bus B9"));
    assert!(err.mentions("duplicate id"));
    assert_eq!(err.issues.len(), 2);
}

#[test]
fn segment_widths_must_cover_the_range() {
    let mut case = toy_case();
    case.generators[0].segments[0].width = 15.0;
    assert!(validate_case(case).unwrap_err().mentions("segment widths sum to 15"));
}

#[test]
fn branch_checks() {
    let mut case = case3();
    case.branches[0].limit_lo = 100.0;
    case.branches[1].ptdf.insert("B9".into(), 0.1);
    case.branches[2].ptdf.remove("B3");
    let err = validate_case(case).unwrap_err();
    assert!(err.mentions("limit_lo must not exceed limit_hi"));
    assert!(err.mentions("unknown bus B9 in ptdf"));
    assert!(err.mentions("ptdf has no coefficient for bus B3"));
}

#[test]
fn probabilities_must_sum_to_one() {
    let err = ScenarioSet::new(vec![
        Scenario {
            prob: 0.4,
            periods: vec![toy_snapshot(1.0)],
        },
        Scenario {
            prob: 0.5,
            periods: vec![toy_snapshot(2.0)],
        },
    ])
    .unwrap_err();
    assert_eq!(format!("{err}"), "probabilities sum to 0.9");
}

#[test]
fn scenario_shape_errors() {
    let ragged = ScenarioSet::new(vec![
        Scenario {
            prob: 0.5,
            periods: vec![toy_snapshot(1.0)],
        },
        Scenario {
            prob: 0.5,
            periods: vec![toy_snapshot(1.0), toy_snapshot(2.0)],
        },
    ])
    .unwrap_err();
    assert!(format!("{ragged}").starts_with("ragged periods"));
    assert_eq!(ScenarioSet::new(Vec::new()).unwrap_err(), ScenarioError::Empty);
    let negative = ScenarioSet::deterministic(vec![toy_snapshot(-1.0)]).unwrap_err();
    assert!(matches!(negative, ScenarioError::NegativeLoad { .. }));
    let wide = ScenarioSet::deterministic(vec![Snapshot::from_load(vec![1.0, 2.0], 2)]).unwrap();
    assert!(matches!(
        wide.check_against(&toy_case()),
        Err(ScenarioError::Shape { .. })
    ));
}

#[test]
fn capacity_override_below_pmin_is_rejected() {
    let mut snap = Snapshot::from_load(vec![60.0, 70.0, 110.0], 4);
    snap.pmax[0] = Some(10.0);
    let set = ScenarioSet::deterministic(vec![snap]).unwrap();
    assert!(matches!(
        set.check_against(&case3()),
        Err(ScenarioError::Capacity { generator: 0, .. })
    ));
}

#[test]
fn series_repeats_its_last_entry() {
    let s = Series::PerPeriod(vec![1.0, 2.0]);
    assert_eq!([s.at(0), s.at(1), s.at(7)], [1.0, 2.0, 2.0]);
    assert_eq!(Series::Constant(3.0).at(99), 3.0);
}

#[test]
fn import_without_ramp_limit_reaches_full_output() {
    let c = case3();
    assert_eq!(c.generators[3].ramp_up_rate(c.step_minutes), 200.0);
    assert_eq!(c.generators[0].ramp_up_rate(c.step_minutes), 1.5);
}

#[test]
fn window_and_first_period() {
    let set = crate::fixtures::case3_scenarios(1);
    let w = set.window(4, 10);
    assert_eq!(w.horizon(), 2);
    let cur = toy_snapshot(5.0);
    let replaced = crate::fixtures::toy_scenarios().with_first_period(&cur);
    assert!(replaced.scenarios().iter().all(|s| s.periods[0] == cur));
}

proptest! {
    #[test]
    fn a_single_bad_field_is_reported(g in 0usize..3, field in 0usize..5) {
        let mut case = case3();
        let gen = &mut case.generators[g];
        let needle = match field {
            0 => { gen.pmin = gen.pmax + 1.0; "exceeds pmax" }
            1 => { gen.ramp_up = -1.0; "ramp rates" }
            2 => { gen.initial_output = -5.0; "initial_output" }
            3 => { gen.reserve_caps.spin = -1.0; "reserve capabilities" }
            _ => { gen.segments[0].width += 1.0; "segment widths sum" }
        };
        let id = gen.id.clone();
        let err = validate_case(case).unwrap_err();
        prop_assert!(err.mentions(needle), "{}", err);
        prop_assert!(err.issues.iter().any(|i| i.subject.contains(id.as_str())));
    }
}
