use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Deref;

use super::SystemCase;

const SUM_TOL: f64 = 1e-6;
const PTDF_TOL: f64 = 1e-6;

/// One violated case invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    /// e.g. `generator G1` or `branch L12`
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseError {
    pub issues: Vec<Issue>,
}

impl CaseError {
    pub fn mentions(&self, needle: &str) -> bool {
        self.issues
            .iter()
            .any(|i| i.message.contains(needle) || i.subject.contains(needle))
    }
}

impl fmt::Display for CaseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, issue) in self.issues.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", issue.subject, issue.message)?;
        }
        Ok(())
    }
}

impl core::error::Error for CaseError {}

/// A case whose invariants have been checked, with bus lookups resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedCase {
    case: SystemCase,
    gen_bus: Vec<usize>,
    ptdf: Vec<Vec<f64>>,
}

impl Deref for ValidatedCase {
    type Target = SystemCase;

    fn deref(&self) -> &SystemCase {
        &self.case
    }
}

impl ValidatedCase {
    pub fn case(&self) -> &SystemCase {
        &self.case
    }

    pub fn into_inner(self) -> SystemCase {
        self.case
    }

    /// Bus index of each generator.
    pub fn gen_bus(&self) -> &[usize] {
        &self.gen_bus
    }

    /// Dense shift-factor matrix, `ptdf()[branch][bus]`.
    pub fn ptdf(&self) -> &[Vec<f64>] {
        &self.ptdf
    }
}

struct Collector(Vec<Issue>);

impl Collector {
    fn push(&mut self, subject: impl Into<String>, message: impl Into<String>) {
        self.0.push(Issue {
            subject: subject.into(),
            message: message.into(),
        });
    }
}

fn finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

pub fn validate_case(case: SystemCase) -> Result<ValidatedCase, CaseError> {
    let mut out = Collector(Vec::new());

    if !(case.step_minutes.is_finite() && case.step_minutes > 0.0) {
        out.push("case", "step_minutes must be positive");
    }
    if !(case.price_basis_minutes.is_finite() && case.price_basis_minutes > 0.0) {
        out.push("case", "price_basis_minutes must be positive");
    }

    let mut seen = BTreeSet::new();
    for bus in &case.buses {
        if !seen.insert(bus.id.as_str()) {
            out.push(format!("bus {}", bus.id), "duplicate id");
        }
    }

    let mut gen_bus = Vec::with_capacity(case.generators.len());
    let mut seen = BTreeSet::new();
    for g in &case.generators {
        let who = format!("generator {}", g.id);
        if !seen.insert(g.id.as_str()) {
            out.push(who.clone(), "duplicate id");
        }
        match case.bus_index(&g.bus) {
            Some(i) => gen_bus.push(i),
            None => {
                out.push(who.clone(), format!("unknown bus {}", g.bus));
                gen_bus.push(usize::MAX);
            }
        }
        if !(g.pmin.is_finite() && g.pmax.is_finite()) || g.pmin > g.pmax {
            out.push(who.clone(), format!("pmin {} exceeds pmax {}", g.pmin, g.pmax));
        }
        if !finite_nonneg(g.pmin) {
            out.push(who.clone(), "pmin must be nonnegative");
        }
        if !finite_nonneg(g.initial_output) {
            out.push(who.clone(), "initial_output must be nonnegative");
        }
        if !finite_nonneg(g.ramp_up) || !finite_nonneg(g.ramp_down) {
            out.push(who.clone(), "ramp rates must be nonnegative");
        }
        if g.segments
            .iter()
            .any(|s| !finite_nonneg(s.width) || !s.price.is_finite())
        {
            out.push(who.clone(), "segment widths must be nonnegative and prices finite");
        }
        if g.segments.windows(2).any(|w| w[1].price < w[0].price) {
            out.push(
                who.clone(),
                "non-convex bid curve: segment prices must be nondecreasing",
            );
        }
        let width: f64 = g.segments.iter().map(|s| s.width).sum();
        if (width - (g.pmax - g.pmin)).abs() > SUM_TOL * (1.0 + g.pmax.abs()) {
            out.push(
                who.clone(),
                format!(
                    "segment widths sum to {width}, expected pmax - pmin = {}",
                    g.pmax - g.pmin
                ),
            );
        }
        let caps = &g.reserve_caps;
        if ![caps.reg, caps.spin, caps.supp_on, caps.supp_off]
            .into_iter()
            .all(finite_nonneg)
        {
            out.push(who.clone(), "reserve capabilities must be nonnegative");
        }
        let prices = &g.reserve_prices;
        if ![prices.reg, prices.spin, prices.supp_on, prices.supp_off]
            .into_iter()
            .all(f64::is_finite)
        {
            out.push(who.clone(), "reserve prices must be finite");
        }
        if !g.no_load_cost.is_finite() {
            out.push(who.clone(), "no_load_cost must be finite");
        }
        for (name, series) in g.flags.series() {
            if series.values().is_empty() {
                out.push(who.clone(), format!("flag series {name} is empty"));
            }
        }
    }

    let mut ptdf = Vec::with_capacity(case.branches.len());
    let mut seen = BTreeSet::new();
    for br in &case.branches {
        let who = format!("branch {}", br.id);
        if !seen.insert(br.id.as_str()) {
            out.push(who.clone(), "duplicate id");
        }
        if !(br.limit_lo.is_finite() && br.limit_hi.is_finite()) || br.limit_lo > br.limit_hi {
            out.push(who.clone(), "limit_lo must not exceed limit_hi");
        }
        if !finite_nonneg(br.violation_price) {
            out.push(who.clone(), "violation_price must be nonnegative");
        }
        let mut row = vec![0.0; case.buses.len()];
        let mut present = vec![false; case.buses.len()];
        for (bus, &coef) in &br.ptdf {
            match case.bus_index(bus) {
                Some(i) => {
                    row[i] = coef;
                    present[i] = true;
                }
                None => out.push(who.clone(), format!("unknown bus {bus} in ptdf")),
            }
            if !coef.is_finite() || coef.abs() > 1.0 + PTDF_TOL {
                out.push(
                    who.clone(),
                    format!("shift factor {coef} for bus {bus} outside [-1, 1]"),
                );
            }
        }
        if let Some(i) = present.iter().position(|p| !p) {
            out.push(
                who.clone(),
                format!("ptdf has no coefficient for bus {}", case.buses[i].id),
            );
        }
        ptdf.push(row);
    }

    let req = &case.reserve_req;
    for (name, series) in [("reg", &req.reg), ("rspin", &req.rspin), ("op", &req.op)] {
        if series.values().is_empty() || !series.values().iter().copied().all(finite_nonneg) {
            out.push("reserve_req", format!("{name} requirements must be nonnegative"));
        }
    }
    let p = &case.penalties;
    if ![p.shortage, p.surplus_price(), p.reg, p.rspin, p.op]
        .into_iter()
        .all(finite_nonneg)
    {
        out.push("penalties", "penalty prices must be nonnegative");
    }

    if out.0.is_empty() {
        Ok(ValidatedCase { case, gen_bus, ptdf })
    } else {
        Err(CaseError { issues: out.0 })
    }
}
