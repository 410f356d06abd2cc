//! Static grid description, per-period inputs and scenario sets.

mod scenario;
#[cfg(test)]
mod tests;
mod validate;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub use scenario::{Scenario, ScenarioError, ScenarioSet, Snapshot, SystemState};
pub use validate::{validate_case, CaseError, Issue, ValidatedCase};

/// A value that is either constant over the day or given per period.
///
/// Lookups past the end of a per-period series repeat its last entry.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(untagged))]
pub enum Series<T> {
    Constant(T),
    PerPeriod(Vec<T>),
}

impl<T: Copy> Series<T> {
    pub fn at(&self, period: usize) -> T {
        match self {
            Series::Constant(v) => *v,
            Series::PerPeriod(v) => v[period.min(v.len() - 1)],
        }
    }

    pub(crate) fn values(&self) -> &[T] {
        match self {
            Series::Constant(v) => core::slice::from_ref(v),
            Series::PerPeriod(v) => v,
        }
    }
}

impl<T: Default> Default for Series<T> {
    fn default() -> Self {
        Series::Constant(T::default())
    }
}

impl<T> From<T> for Series<T> {
    fn from(v: T) -> Self {
        Series::Constant(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Bus {
    pub id: String,
}

/// One step of a piecewise-linear convex bid curve above `pmin`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BidSegment {
    /// MW
    pub width: f64,
    /// $/MWh
    pub price: f64,
}

/// Per-product reserve figures. Used both for capabilities (MW) and prices ($/MWh).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct ReserveQuad {
    pub reg: f64,
    pub spin: f64,
    pub supp_on: f64,
    pub supp_off: f64,
}

impl ReserveQuad {
    pub fn get(&self, product: ReserveProduct) -> f64 {
        match product {
            ReserveProduct::Regulating => self.reg,
            ReserveProduct::Spinning => self.spin,
            ReserveProduct::SupplementalOn => self.supp_on,
            ReserveProduct::SupplementalOff => self.supp_off,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum ReserveProduct {
    Regulating,
    Spinning,
    SupplementalOn,
    SupplementalOff,
}

impl ReserveProduct {
    pub const ALL: [ReserveProduct; 4] = [
        ReserveProduct::Regulating,
        ReserveProduct::Spinning,
        ReserveProduct::SupplementalOn,
        ReserveProduct::SupplementalOff,
    ];
}

/// Exogenous commitment and reserve-eligibility flags.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct GeneratorFlags {
    pub commit: Series<bool>,
    pub regulation: Series<bool>,
    pub ra_reg: Series<bool>,
    pub ra_spin: Series<bool>,
    pub ra_s_on: Series<bool>,
    pub ra_s_off: Series<bool>,
}

impl Default for GeneratorFlags {
    fn default() -> Self {
        Self {
            commit: Series::Constant(true),
            regulation: Series::Constant(true),
            ra_reg: Series::Constant(true),
            ra_spin: Series::Constant(true),
            ra_s_on: Series::Constant(true),
            ra_s_off: Series::Constant(true),
        }
    }
}

impl GeneratorFlags {
    pub fn eligible(&self, product: ReserveProduct, period: usize) -> bool {
        match product {
            ReserveProduct::Regulating => self.ra_reg.at(period),
            ReserveProduct::Spinning => self.ra_spin.at(period),
            ReserveProduct::SupplementalOn => self.ra_s_on.at(period),
            ReserveProduct::SupplementalOff => self.ra_s_off.at(period),
        }
    }

    fn series(&self) -> [(&'static str, &Series<bool>); 6] {
        [
            ("commit", &self.commit),
            ("regulation", &self.regulation),
            ("ra_reg", &self.ra_reg),
            ("ra_spin", &self.ra_spin),
            ("ra_s_on", &self.ra_s_on),
            ("ra_s_off", &self.ra_s_off),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Generator {
    pub id: String,
    pub bus: String,
    pub pmin: f64,
    pub pmax: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub initial_output: f64,
    /// MW/min
    pub ramp_up: f64,
    /// MW/min
    pub ramp_down: f64,
    pub segments: Vec<BidSegment>,
    /// $/h while committed
    #[cfg_attr(feature = "serde", serde(default))]
    pub no_load_cost: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub reserve_caps: ReserveQuad,
    #[cfg_attr(feature = "serde", serde(default))]
    pub reserve_prices: ReserveQuad,
    #[cfg_attr(feature = "serde", serde(default))]
    pub flags: GeneratorFlags,
    #[cfg_attr(feature = "serde", serde(default))]
    pub is_import: bool,
}

impl Generator {
    /// A single-segment unit with no reserves, committed all day.
    pub fn simple(id: &str, bus: &str, pmax: f64, price: f64, ramp: f64) -> Self {
        Self {
            id: id.into(),
            bus: bus.into(),
            pmin: 0.0,
            pmax,
            initial_output: 0.0,
            ramp_up: ramp,
            ramp_down: ramp,
            segments: alloc::vec![BidSegment { width: pmax, price }],
            no_load_cost: 0.0,
            reserve_caps: ReserveQuad::default(),
            reserve_prices: ReserveQuad::default(),
            flags: GeneratorFlags::default(),
            is_import: false,
        }
    }

    /// Ramp-up rate used by the models. Imports with no ramp limit get
    /// `pmax / step`, i.e. they can reach full output within one period.
    pub fn ramp_up_rate(&self, step_minutes: f64) -> f64 {
        if self.is_import && self.ramp_up == 0.0 {
            self.pmax / step_minutes
        } else {
            self.ramp_up
        }
    }

    pub fn ramp_down_rate(&self, step_minutes: f64) -> f64 {
        if self.is_import && self.ramp_down == 0.0 {
            self.pmax / step_minutes
        } else {
            self.ramp_down
        }
    }

    pub fn committed(&self, period: usize) -> bool {
        self.flags.commit.at(period)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Branch {
    pub id: String,
    /// Bus id to shift factor.
    pub ptdf: BTreeMap<String, f64>,
    pub limit_lo: f64,
    pub limit_hi: f64,
    /// $/MWh of overload
    pub violation_price: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_true"))]
    pub monitored: bool,
}

#[cfg(feature = "serde")]
fn default_true() -> bool {
    true
}

/// Requirements in MW, each constant or per period. Requirements do not vary by scenario.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(Serialize, Deserialize),
    serde(default, deny_unknown_fields)
)]
pub struct ReserveRequirement {
    pub reg: Series<f64>,
    pub rspin: Series<f64>,
    pub op: Series<f64>,
}

/// Shortage/surplus penalty prices in $/MWh.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PenaltyPrices {
    pub shortage: f64,
    /// Defaults to the shortage price when omitted from a case file.
    #[cfg_attr(feature = "serde", serde(default))]
    pub surplus: Option<f64>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub reg: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub rspin: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub op: f64,
}

impl PenaltyPrices {
    pub fn surplus_price(&self) -> f64 {
        self.surplus.unwrap_or(self.shortage)
    }
}

impl Default for PenaltyPrices {
    fn default() -> Self {
        Self {
            shortage: 100_000.0,
            surplus: None,
            reg: 55_000.0,
            rspin: 50_000.0,
            op: 50_000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SystemCase {
    pub buses: Vec<Bus>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub generators: Vec<Generator>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub branches: Vec<Branch>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub reserve_req: ReserveRequirement,
    #[cfg_attr(feature = "serde", serde(default))]
    pub penalties: PenaltyPrices,
    /// Length of one dispatch interval.
    #[cfg_attr(feature = "serde", serde(default = "default_step"))]
    pub step_minutes: f64,
    /// Time basis of every price in the case: a cost of `price * MW` accrues
    /// per `price_basis_minutes` of operation. 60 means $/MWh.
    #[cfg_attr(feature = "serde", serde(default = "default_basis"))]
    pub price_basis_minutes: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_base_mva"))]
    pub base_mva: f64,
}

#[cfg(feature = "serde")]
fn default_step() -> f64 {
    5.0
}

#[cfg(feature = "serde")]
fn default_basis() -> f64 {
    60.0
}

#[cfg(feature = "serde")]
fn default_base_mva() -> f64 {
    100.0
}

impl SystemCase {
    pub fn new(buses: Vec<Bus>, generators: Vec<Generator>) -> Self {
        Self {
            buses,
            generators,
            branches: Vec::new(),
            reserve_req: ReserveRequirement::default(),
            penalties: PenaltyPrices::default(),
            step_minutes: 5.0,
            price_basis_minutes: 60.0,
            base_mva: 100.0,
        }
    }

    /// Multiplier turning a rate (`$/basis` times MW) into the cost of one period.
    pub fn period_cost_factor(&self) -> f64 {
        self.step_minutes / self.price_basis_minutes
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn generator_index(&self, id: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.id == id)
    }
}
