//! Fitted BER-versus-density curves and threshold crossings.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;

/// The four LOCO schemes in their fixed reconfiguration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeId {
    #[serde(rename = "OP")]
    Op,
    #[serde(rename = "SP")]
    Sp,
    #[serde(rename = "OT")]
    Ot,
    #[serde(rename = "ST")]
    St,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [SchemeId::Op, SchemeId::Sp, SchemeId::Ot, SchemeId::St];

    /// Zero-based position in the reconfiguration order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::Op => "OP",
            SchemeId::Sp => "SP",
            SchemeId::Ot => "OT",
            SchemeId::St => "ST",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().trim_end_matches("-LOCO") {
            "OP" | "1" => Ok(SchemeId::Op),
            "SP" | "2" => Ok(SchemeId::Sp),
            "OT" | "3" => Ok(SchemeId::Ot),
            "ST" | "4" => Ok(SchemeId::St),
            other => Err(Error::invalid(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Start- and end-of-life densities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRange {
    pub d0: f64,
    pub d1: f64,
}

impl DensityRange {
    pub fn new(d0: f64, d1: f64) -> Result<Self> {
        if !(d0.is_finite() && d1.is_finite()) || d0 >= d1 {
            return Err(Error::invalid(format!("density range needs d0 < d1, got [{d0}, {d1}]")));
        }
        Ok(Self { d0, d1 })
    }

    pub fn width(&self) -> f64 {
        self.d1 - self.d0
    }

    /// Density reached after a cumulative lifetime share.
    pub fn density_at(&self, share: f64) -> f64 {
        self.d0 + share * self.width()
    }

    pub fn share_of(&self, density: f64) -> f64 {
        (density - self.d0) / self.width()
    }
}

impl Default for DensityRange {
    fn default() -> Self {
        Self { d0: 0.8, d1: 1.5 }
    }
}

/// A BER value with a flag telling whether it came from outside the fit domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub extrapolated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub scheme: SchemeId,
    /// Highest power first.
    pub coefficients: Vec<f64>,
    pub domain: (f64, f64),
}

impl BerCurve {
    pub fn new(scheme: SchemeId, coefficients: Vec<f64>, domain: (f64, f64)) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::invalid("curve needs at least one coefficient"));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("curve coefficients must be finite"));
        }
        if !(domain.0 < domain.1) {
            return Err(Error::invalid(format!(
                "curve domain needs lo < hi, got [{}, {}]",
                domain.0, domain.1
            )));
        }
        Ok(Self {
            scheme,
            coefficients,
            domain,
        })
    }

    /// A curve with a single constant value.
    pub fn constant(scheme: SchemeId, value: f64, domain: (f64, f64)) -> Self {
        Self {
            scheme,
            coefficients: vec![value],
            domain,
        }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, density: f64) -> f64 {
        poly::horner(&self.coefficients, density)
    }

    pub fn eval_checked(&self, density: f64) -> Evaluation {
        Evaluation {
            value: self.eval(density),
            extrapolated: !self.in_domain(density),
        }
    }

    pub fn in_domain(&self, density: f64) -> bool {
        density >= self.domain.0 && density <= self.domain.1
    }

    pub fn derivative(&self, density: f64) -> f64 {
        poly::horner(&poly::derivative(&self.coefficients), density)
    }

    /// Derivative with respect to a normalized share: `(d1 - d0) * f'(density)`.
    pub fn eval_g(&self, density: f64, range: &DensityRange) -> f64 {
        range.width() * self.derivative(density)
    }

    pub fn threshold_crossing(&self, threshold: f64, lo: f64, hi: f64) -> Option<f64> {
        threshold_crossing(self, threshold, lo, hi, &CrossingOptions::default())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossingOptions {
    /// Pre-scan grid spacing in density units.
    pub scan_step: f64,
    /// Bisection stops once the bracket is this narrow.
    pub tolerance: f64,
}

impl Default for CrossingOptions {
    fn default() -> Self {
        Self {
            scan_step: 1e-4,
            tolerance: 1e-9,
        }
    }
}

/// First upward crossing of `threshold` on `[lo, hi]`.
///
/// Returns `lo` when the curve already sits at or above the threshold there,
/// `None` when every scanned point stays below it. Fitted polynomials can
/// wiggle back under the threshold after crossing; only the first crossing
/// counts.
pub fn threshold_crossing(
    curve: &BerCurve,
    threshold: f64,
    lo: f64,
    hi: f64,
    opts: &CrossingOptions,
) -> Option<f64> {
    let above = |x: f64| curve.eval(x) >= threshold;
    if above(lo) {
        return Some(lo);
    }
    if hi <= lo {
        return None;
    }
    let steps = ((hi - lo) / opts.scan_step).ceil() as usize;
    let mut prev = lo;
    for k in 1..=steps {
        let x = (lo + k as f64 * opts.scan_step).min(hi);
        if above(x) {
            let (mut below_x, mut above_x) = (prev, x);
            while above_x - below_x > opts.tolerance {
                let mid = 0.5 * (below_x + above_x);
                if above(mid) {
                    above_x = mid;
                } else {
                    below_x = mid;
                }
            }
            return Some(above_x);
        }
        prev = x;
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extension {
    pub density: f64,
    /// False when the search hit the cap without reaching the threshold.
    pub reached: bool,
    pub extrapolated: bool,
}

impl Extension {
    /// Lifetime gain relative to `d1`.
    pub fn relative_gain(&self, d1: f64) -> f64 {
        (self.density - d1) / d1
    }
}

/// How far past `d1` the curve stays under `threshold`, capped at `search_cap`.
pub fn lifetime_extension(
    curve: &BerCurve,
    threshold: f64,
    d1: f64,
    search_cap: f64,
) -> Result<Extension> {
    if curve.eval(d1) >= threshold {
        return Err(Error::invalid(format!(
            "{} is already at or above {threshold:e} at density {d1}",
            curve.scheme
        )));
    }
    if search_cap <= d1 {
        return Err(Error::invalid("search cap must exceed d1"));
    }
    let opts = CrossingOptions::default();
    let (density, reached) = match threshold_crossing(curve, threshold, d1, search_cap, &opts) {
        Some(d) => (d, true),
        None => (search_cap, false),
    };
    Ok(Extension {
        density,
        reached,
        extrapolated: !curve.in_domain(density),
    })
}

#[derive(Serialize, Deserialize)]
struct CurveFile {
    curve: Vec<CurveRecord>,
}

/// One `[[curve]]` entry of a curve document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub scheme: SchemeId,
    pub degree: usize,
    pub coefficients: Vec<f64>,
    pub domain: [f64; 2],
}

impl From<&BerCurve> for CurveRecord {
    fn from(c: &BerCurve) -> Self {
        Self {
            scheme: c.scheme,
            degree: c.degree(),
            coefficients: c.coefficients.clone(),
            domain: [c.domain.0, c.domain.1],
        }
    }
}

impl CurveRecord {
    pub fn to_curve(&self) -> Result<BerCurve> {
        if self.coefficients.len() != self.degree + 1 {
            return Err(Error::invalid(format!(
                "{}: degree {} needs {} coefficients, found {}",
                self.scheme,
                self.degree,
                self.degree + 1,
                self.coefficients.len()
            )));
        }
        BerCurve::new(self.scheme, self.coefficients.clone(), (self.domain[0], self.domain[1]))
    }
}

/// Renders curves as a TOML document (`[[curve]]` tables).
pub fn curves_to_toml(curves: &[BerCurve]) -> String {
    let doc = CurveFile {
        curve: curves.iter().map(CurveRecord::from).collect(),
    };
    toml::to_string(&doc).expect("curve documents always serialize")
}

pub fn curves_from_toml(text: &str) -> Result<Vec<BerCurve>> {
    let doc: CurveFile = toml::from_str(text).map_err(|e| Error::invalid(e.to_string()))?;
    doc.curve.iter().map(CurveRecord::to_curve).collect()
}

pub fn read_curves(path: &Path) -> Result<Vec<BerCurve>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    curves_from_toml(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
