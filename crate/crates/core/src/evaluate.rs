//! Plan scoring: baselines, side-by-side comparisons and BER traces.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bermodel::{BerCurve, DensityRange, SchemeId};
use crate::error::{Error, Result};
use crate::offline::{check_curves, Plan, SchemeCatalog};
use crate::online::{violation_fraction, VIOLATION_STEP};

/// Every scheme for a quarter of the range.
pub fn equal_share_baseline(catalog: &SchemeCatalog, range: &DensityRange, threshold: f64) -> Plan {
    Plan::from_shares([0.25; 4], catalog, threshold, *range).expect("equal shares are valid")
}

/// Published OP+OT reconfiguration result used as a fixed anchor. Only its
/// aggregate metrics are known, so nothing is recomputed.
pub fn prior_work_baseline() -> Entry {
    Entry {
        name: "prior-work".into(),
        shares: None,
        schemes: vec![SchemeId::Op, SchemeId::Ot],
        capacity: 0.8638,
        avg_adder: 61.9,
        violation_fraction: None,
        lifetime_end_density: None,
        external: true,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub name: String,
    pub shares: Option<[f64; 4]>,
    pub schemes: Vec<SchemeId>,
    pub capacity: f64,
    pub avg_adder: f64,
    pub violation_fraction: Option<f64>,
    pub lifetime_end_density: Option<f64>,
    /// Metrics taken from an outside source rather than computed here.
    pub external: bool,
}

impl Entry {
    pub fn from_plan(
        name: &str,
        plan: &Plan,
        truth: &[BerCurve],
        threshold: f64,
        range: &DensityRange,
    ) -> Result<Self> {
        let schemes = SchemeId::ALL
            .into_iter()
            .filter(|s| plan.shares[s.index()] > 0.0)
            .collect();
        Ok(Self {
            name: name.into(),
            shares: Some(plan.shares),
            schemes,
            capacity: plan.capacity,
            avg_adder: plan.avg_adder,
            violation_fraction: Some(violation_fraction(plan, truth, threshold, range)?),
            lifetime_end_density: lifetime_end_density(plan, truth, threshold, range, LIFETIME_SEARCH_CAP)?,
            external: false,
        })
    }
}

/// Differences `a - b`; relative fields are taken against `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub capacity: f64,
    pub avg_adder: f64,
    pub violation_fraction: Option<f64>,
    /// `(b.avg_adder - a.avg_adder) / b.avg_adder`
    pub adder_reduction: f64,
    /// `(b.capacity - a.capacity) / b.capacity`
    pub capacity_loss: f64,
}

pub fn delta(a: &Entry, b: &Entry) -> Delta {
    Delta {
        capacity: a.capacity - b.capacity,
        avg_adder: a.avg_adder - b.avg_adder,
        violation_fraction: a.violation_fraction.zip(b.violation_fraction).map(|(x, y)| x - y),
        adder_reduction: (b.avg_adder - a.avg_adder) / b.avg_adder,
        capacity_loss: (b.capacity - a.capacity) / b.capacity,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Name of the entry deltas are measured against.
    pub reference: String,
    pub entries: Vec<Entry>,
}

impl Comparison {
    pub fn new(reference: &str, entries: Vec<Entry>) -> Result<Self> {
        if !entries.iter().any(|e| e.name == reference) {
            return Err(Error::invalid(format!("reference `{reference}` is not among the entries")));
        }
        Ok(Self { reference: reference.into(), entries })
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn reference_entry(&self) -> &Entry {
        self.get(&self.reference).expect("reference checked at construction")
    }

    /// Each entry against the reference.
    pub fn deltas(&self) -> Vec<(String, Delta)> {
        let r = self.reference_entry();
        self.entries.iter().map(|e| (e.name.clone(), delta(e, r))).collect()
    }

    /// Fixed-width table; shares and capacity to 4 decimals, adder to 2.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>7} {:>7} {:>7} {:>7} {:>9} {:>8} {:>10} {:>9} {:>9}",
            "plan", "x1", "x2", "x3", "x4", "capacity", "adder", "violation", "end", "vs ref"
        );
        let r = self.reference_entry();
        for e in &self.entries {
            let shares = match e.shares {
                Some(x) => x.map(|v| format!("{v:.4}")),
                None => ["-".to_string(), "-".into(), "-".into(), "-".into()],
            };
            let viol = e.violation_fraction.map_or("-".into(), |v| format!("{:.2}%", 100.0 * v));
            let end = e.lifetime_end_density.map_or("-".into(), |d| format!("{d:.4}"));
            let d = delta(e, r);
            let name = if e.external { format!("{}*", e.name) } else { e.name.clone() };
            let _ = writeln!(
                out,
                "{:<16} {:>7} {:>7} {:>7} {:>7} {:>9.4} {:>8.2} {:>10} {:>9} {:>+8.2}%",
                name,
                shares[0],
                shares[1],
                shares[2],
                shares[3],
                e.capacity,
                e.avg_adder,
                viol,
                end,
                -100.0 * d.adder_reduction + 0.0
            );
        }
        if self.entries.iter().any(|e| e.external) {
            out.push_str("* external figures, not recomputed\n");
        }
        out
    }
}

/// Upper limit for lifetime searches past `d1`.
pub const LIFETIME_SEARCH_CAP: f64 = 2.0;

/// First density where the active scheme's BER exceeds `threshold`; the last
/// scheme in use keeps running past `d1` up to `cap`. `None` if the plan
/// holds all the way to `cap`.
pub fn lifetime_end_density(
    plan: &Plan,
    truth: &[BerCurve],
    threshold: f64,
    range: &DensityRange,
    cap: f64,
) -> Result<Option<f64>> {
    check_curves(truth)?;
    let limit = threshold * (1.0 + 1e-6);
    let over = |d: f64| truth[plan.active_scheme(d).index()].eval(d) > limit;
    let n = ((cap - range.d0) / VIOLATION_STEP).ceil() as usize;
    let mut prev = range.d0;
    if over(prev) {
        return Ok(Some(prev));
    }
    for k in 1..=n {
        let d = (range.d0 + k as f64 * VIOLATION_STEP).min(cap);
        if over(d) {
            // refine within the step; the active scheme cannot change inside
            // it unless a switch lies there, in which case the switch is the answer
            let (mut lo, mut hi) = (prev, d);
            while hi - lo > 1e-9 {
                let mid = 0.5 * (lo + hi);
                if over(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(hi));
        }
        prev = d;
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub density: f64,
    pub scheme: SchemeId,
    pub ber: f64,
}

pub const DEFAULT_TRACE_STEP: f64 = 1e-3;

/// Active scheme and its BER at `d0, d0 + step, ...` up to `d1`.
pub fn emit_trace(plan: &Plan, curves: &[BerCurve], range: &DensityRange, step: f64) -> Result<Vec<TraceRow>> {
    check_curves(curves)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("trace step must be positive"));
    }
    let n = (range.width() / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|k| {
            // snap off representation noise so the CSV stays tidy
            let density = ((range.d0 + k as f64 * step) * 1e12).round() / 1e12;
            let scheme = plan.active_scheme(density);
            TraceRow { density, scheme, ber: curves[scheme.index()].eval(density) }
        })
        .collect())
}

/// `density,scheme,ber` CSV.
pub fn write_trace_csv<W: std::io::Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::invalid(format!("writing trace: {e}"));
    w.write_record(["density", "scheme", "ber"]).map_err(io)?;
    for r in rows {
        w.write_record([format!("{}", r.density), r.scheme.to_string(), format!("{:e}", r.ber)])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::invalid(format!("writing trace: {e}")))?;
    Ok(())
}
