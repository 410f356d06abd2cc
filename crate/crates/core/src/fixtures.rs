//! Reference systems used by examples and test suites.
//!
//! `toy_*` is a two-unit, single-bus system cleared over two periods.
//! `case3_*` is a three-bus meshed system with a slow coal unit, a fast gas
//! unit, a wind farm and an import, two monitored lines and reserve
//! requirements; random variants are drawn from a seed.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::forecast::{HistoryDay, HistoryStore};
use crate::model::{
    validate_case, BidSegment, Branch, Bus, Generator, GeneratorFlags, PenaltyPrices, ReserveQuad, ReserveRequirement,
    Scenario, ScenarioSet, Series, Snapshot, SystemCase, ValidatedCase,
};

/// Two units on one bus: G1 20 MW at $10 ramping 4 MW/min, G2 30 MW at $20
/// ramping 2 MW/min; shortfall priced at $1000. Prices are per MW per period.
pub fn toy_case() -> SystemCase {
    let mut case = SystemCase::new(
        vec![Bus { id: "B1".into() }],
        vec![
            Generator::simple("G1", "B1", 20.0, 10.0, 4.0),
            Generator::simple("G2", "B1", 30.0, 20.0, 2.0),
        ],
    );
    case.penalties = PenaltyPrices {
        shortage: 1000.0,
        surplus: None,
        reg: 0.0,
        rspin: 0.0,
        op: 0.0,
    };
    case.price_basis_minutes = case.step_minutes;
    case
}

pub fn toy_validated() -> ValidatedCase {
    validate_case(toy_case()).expect("toy case is valid")
}

/// One toy period with `load` MW on the single bus.
pub fn toy_snapshot(load: f64) -> Snapshot {
    Snapshot::from_load(vec![load], 2)
}

/// Realized demand of the toy day: 10 MW then 35 MW.
pub fn toy_day() -> ScenarioSet {
    ScenarioSet::deterministic(vec![toy_snapshot(10.0), toy_snapshot(35.0)]).expect("valid day")
}

/// Two equally likely toy scenarios, 29 MW and 37 MW in the second period.
pub fn toy_scenarios() -> ScenarioSet {
    ScenarioSet::new(vec![
        Scenario {
            prob: 0.5,
            periods: vec![toy_snapshot(10.0), toy_snapshot(29.0)],
        },
        Scenario {
            prob: 0.5,
            periods: vec![toy_snapshot(10.0), toy_snapshot(37.0)],
        },
    ])
    .expect("valid scenarios")
}

/// Point forecast of the toy day, the mean of `toy_scenarios`.
pub fn toy_forecast() -> ScenarioSet {
    ScenarioSet::deterministic(vec![toy_snapshot(10.0), toy_snapshot(33.0)]).expect("valid forecast")
}

pub const CASE3_HORIZON: usize = 6;
pub const CASE3_SCENARIOS: usize = 5;
pub const CASE3_WIND: usize = 2;
const CASE3_LOAD: [f64; 3] = [60.0, 70.0, 110.0];
const WIND_PMAX: f64 = 90.0;

fn ptdf(entries: [(&str, f64); 3]) -> BTreeMap<String, f64> {
    entries.iter().map(|&(b, v)| (String::from(b), v)).collect()
}

/// Nominal three-bus system. Lines have equal reactance; shift factors are
/// taken with B3 as the reference bus.
pub fn case3() -> SystemCase {
    let gen = |id: &str, bus: &str, pmin: f64, pmax: f64, init: f64, ramp: f64, segments: Vec<(f64, f64)>| Generator {
        id: id.into(),
        bus: bus.into(),
        pmin,
        pmax,
        initial_output: init,
        ramp_up: ramp,
        ramp_down: ramp,
        segments: segments
            .into_iter()
            .map(|(width, price)| BidSegment { width, price })
            .collect(),
        no_load_cost: 0.0,
        reserve_caps: ReserveQuad::default(),
        reserve_prices: ReserveQuad::default(),
        flags: GeneratorFlags::default(),
        is_import: false,
    };
    let mut coal = gen("COAL", "B1", 40.0, 200.0, 120.0, 1.5, vec![(80.0, 22.0), (80.0, 30.0)]);
    coal.no_load_cost = 300.0;
    coal.reserve_caps = ReserveQuad {
        reg: 6.0,
        spin: 10.0,
        supp_on: 10.0,
        supp_off: 0.0,
    };
    coal.reserve_prices = ReserveQuad {
        reg: 8.0,
        spin: 5.0,
        supp_on: 3.0,
        supp_off: 0.0,
    };
    let mut gas = gen("GAS", "B2", 10.0, 120.0, 50.0, 5.0, vec![(50.0, 38.0), (60.0, 52.0)]);
    gas.no_load_cost = 150.0;
    gas.reserve_caps = ReserveQuad {
        reg: 20.0,
        spin: 40.0,
        supp_on: 40.0,
        supp_off: 0.0,
    };
    gas.reserve_prices = ReserveQuad {
        reg: 10.0,
        spin: 6.0,
        supp_on: 4.0,
        supp_off: 0.0,
    };
    let wind = gen("WIND", "B3", 0.0, WIND_PMAX, 40.0, 20.0, vec![(WIND_PMAX, 0.0)]);
    let mut import = gen("IMPORT", "B3", 0.0, 1000.0, 0.0, 0.0, vec![(1000.0, 1000.0)]);
    import.is_import = true;

    let mut case = SystemCase::new(
        vec![
            Bus { id: "B1".into() },
            Bus { id: "B2".into() },
            Bus { id: "B3".into() },
        ],
        vec![coal, gas, wind, import],
    );
    let third = 1.0 / 3.0;
    case.branches = vec![
        Branch {
            id: "L13".into(),
            ptdf: ptdf([("B1", 2.0 * third), ("B2", third), ("B3", 0.0)]),
            limit_lo: -80.0,
            limit_hi: 80.0,
            violation_price: 2000.0,
            monitored: true,
        },
        Branch {
            id: "L23".into(),
            ptdf: ptdf([("B1", third), ("B2", 2.0 * third), ("B3", 0.0)]),
            limit_lo: -60.0,
            limit_hi: 60.0,
            violation_price: 2000.0,
            monitored: true,
        },
        Branch {
            id: "L12".into(),
            ptdf: ptdf([("B1", third), ("B2", -third), ("B3", 0.0)]),
            limit_lo: -100.0,
            limit_hi: 100.0,
            violation_price: 2000.0,
            monitored: false,
        },
    ];
    case.reserve_req = ReserveRequirement {
        reg: Series::Constant(10.0),
        rspin: Series::Constant(25.0),
        op: Series::Constant(40.0),
    };
    case
}

/// A perturbed copy of `case3`: costs, ramps, initial outputs and line
/// limits drawn around their nominal values.
pub fn case3_variant(seed: u64) -> SystemCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut case = case3();
    for g in case.generators.iter_mut().filter(|g| !g.is_import) {
        let scale = rng.gen_range(0.9..1.1);
        for s in &mut g.segments {
            s.price *= scale;
        }
        if g.id != "WIND" {
            let r = rng.gen_range(0.7..1.3);
            g.ramp_up *= r;
            g.ramp_down *= r;
            g.initial_output = rng.gen_range(g.pmin + 10.0..g.pmax - 20.0);
        }
    }
    for br in case.branches.iter_mut().filter(|b| b.monitored) {
        let f = rng.gen_range(0.6..1.2);
        br.limit_lo *= f;
        br.limit_hi *= f;
    }
    case
}

/// `case3` with both monitored lines narrowed enough to congest.
pub fn case3_congested() -> SystemCase {
    let mut case = case3();
    case.branches[0].limit_lo = -35.0;
    case.branches[0].limit_hi = 35.0;
    case.branches[1].limit_lo = -15.0;
    case.branches[1].limit_hi = 15.0;
    case
}

fn case3_snapshot(load: [f64; 3], wind: f64) -> Snapshot {
    let mut pmax = vec![None; 4];
    pmax[CASE3_WIND] = Some(wind);
    Snapshot {
        load: load.to_vec(),
        pmax,
    }
}

/// `CASE3_SCENARIOS` scenarios of `CASE3_HORIZON` periods sharing their
/// first period, with drifting loads and wind and uneven probabilities.
pub fn case3_scenarios(seed: u64) -> ScenarioSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let level: f64 = rng.gen_range(0.85..1.15);
    let current_wind: f64 = rng.gen_range(20.0..70.0);
    let current = case3_snapshot(CASE3_LOAD.map(|l| l * level), current_wind);
    let weights: Vec<f64> = (0..CASE3_SCENARIOS).map(|_| rng.gen_range(0.5..1.5)).collect();
    let total: f64 = weights.iter().sum();
    let mut scenarios: Vec<Scenario> = weights
        .iter()
        .map(|w| {
            let mut periods = vec![current.clone()];
            let mut lv = level;
            let mut wind = current_wind;
            for _ in 1..CASE3_HORIZON {
                lv *= rng.gen_range(0.96..1.06);
                wind = (wind + rng.gen_range(-18.0..18.0)).clamp(0.0, WIND_PMAX);
                periods.push(case3_snapshot(
                    CASE3_LOAD.map(|l| l * lv * rng.gen_range(0.97..1.03)),
                    wind,
                ));
            }
            Scenario {
                prob: w / total,
                periods,
            }
        })
        .collect();
    let drift: f64 = 1.0 - scenarios.iter().map(|s| s.prob).sum::<f64>();
    scenarios[0].prob += drift;
    ScenarioSet::new(scenarios).expect("valid scenarios")
}

fn profile(t: usize, periods: usize) -> f64 {
    let x = t as f64 / periods.max(1) as f64;
    0.9 + 0.2 * libm::sin(core::f64::consts::PI * x)
}

/// Realized day of `periods` periods for `case3`: a daily load shape with noise
/// and a wind random walk.
pub fn case3_day(seed: u64, periods: usize) -> Vec<Snapshot> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xda7);
    let level: f64 = rng.gen_range(0.85..1.1);
    let mut wind: f64 = rng.gen_range(10.0..80.0);
    (0..periods)
        .map(|t| {
            wind = (wind + rng.gen_range(-15.0..15.0)).clamp(0.0, WIND_PMAX);
            let shape = profile(t, periods) * level;
            case3_snapshot(CASE3_LOAD.map(|l| l * shape * rng.gen_range(0.96..1.04)), wind)
        })
        .collect()
}

/// `days` historical days drawn like `case3_day`, dated in order.
pub fn case3_history(seed: u64, days: usize, periods: usize) -> HistoryStore {
    let days = (0..days)
        .map(|d| HistoryDay {
            date: format!("2024-01-{:02}", d + 1),
            periods: case3_day(seed.wrapping_mul(1000).wrapping_add(d as u64 + 1), periods),
        })
        .collect();
    HistoryStore::new(days).expect("valid history")
}
