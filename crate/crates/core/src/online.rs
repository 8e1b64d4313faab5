//! Online switching: sample a short training region per scheme, fit, and
//! place each switch where the fitted curve reaches the threshold.
//!
//! Decisions are sequential: switch i uses only the samples from region i.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bermodel::{threshold_crossing, BerCurve, CrossingOptions, DensityRange, SchemeId};
use crate::curvefit::{fit_points, FitReport};
use crate::error::{Error, Result};
use crate::offline::{check_curves, Plan, SchemeCatalog};

/// Grid step (in density units) for violation measurements.
pub const VIOLATION_STEP: f64 = 1e-4;

/// Source of BER observations.
pub trait BerOracle {
    fn query(&self, scheme: SchemeId, density: f64) -> Result<f64>;
}

/// Ground-truth curves, optionally with multiplicative log-normal noise.
#[derive(Clone, Debug)]
pub struct CurveOracle {
    curves: Vec<BerCurve>,
    sigma: f64,
    seed: u64,
}

impl CurveOracle {
    pub fn new(curves: Vec<BerCurve>) -> Self {
        Self { curves, sigma: 0.0, seed: 0 }
    }

    /// Each observation is scaled by `exp(sigma * N(0, 1))`; the draw depends
    /// only on `(seed, scheme, density)`, so repeated queries agree.
    pub fn with_noise(mut self, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("noise sigma must be finite and nonnegative"));
        }
        self.sigma = sigma;
        self.seed = seed;
        Ok(self)
    }

    fn noise(&self, scheme: SchemeId, density: f64) -> f64 {
        if self.sigma == 0.0 {
            return 1.0;
        }
        let key = self.seed ^ (scheme.index() as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ density.to_bits().rotate_left(17);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let z: f64 = StandardNormal.sample(&mut rng);
        (self.sigma * z).exp()
    }
}

impl BerOracle for CurveOracle {
    fn query(&self, scheme: SchemeId, density: f64) -> Result<f64> {
        let curve = self
            .curves
            .iter()
            .find(|c| c.scheme == scheme)
            .ok_or_else(|| Error::invalid(format!("oracle has no curve for {scheme}")))?;
        Ok(curve.eval(density) * self.noise(scheme, density))
    }
}

/// Recorded device logs (`scheme,density,ber`), linearly interpolated.
#[derive(Clone, Debug, Default)]
pub struct LogOracle {
    points: BTreeMap<SchemeId, Vec<(f64, f64)>>,
}

#[derive(Deserialize)]
struct LogRow {
    scheme: String,
    density: f64,
    ber: f64,
}

impl LogOracle {
    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::invalid(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["scheme", "density", "ber"] {
            return Err(Error::invalid("oracle log header must be `scheme,density,ber`"));
        }
        let mut points: BTreeMap<SchemeId, Vec<(f64, f64)>> = BTreeMap::new();
        for (line, row) in rdr.deserialize::<LogRow>().enumerate() {
            let row = row.map_err(|e| Error::invalid(format!("row {}: {e}", line + 2)))?;
            let scheme: SchemeId = row.scheme.parse()?;
            if !row.density.is_finite() || !(0.0..=1.0).contains(&row.ber) {
                return Err(Error::invalid(format!("row {}: bad density or ber", line + 2)));
            }
            points.entry(scheme).or_default().push((row.density, row.ber));
        }
        for v in points.values_mut() {
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v.dedup_by(|a, b| a.0 == b.0);
        }
        Ok(Self { points })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(file).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

impl BerOracle for LogOracle {
    fn query(&self, scheme: SchemeId, density: f64) -> Result<f64> {
        let pts = self
            .points
            .get(&scheme)
            .ok_or_else(|| Error::invalid(format!("log has no rows for {scheme}")))?;
        let (first, last) = (pts[0], pts[pts.len() - 1]);
        let eps = 1e-12;
        if density < first.0 - eps || density > last.0 + eps {
            return Err(Error::invalid(format!(
                "{scheme} log covers [{}, {}], queried at {density}",
                first.0, last.0
            )));
        }
        let i = pts.partition_point(|p| p.0 < density);
        if i == 0 {
            return Ok(first.1);
        }
        if i == pts.len() {
            return Ok(last.1);
        }
        let (x0, y0) = pts[i - 1];
        let (x1, y1) = pts[i];
        Ok(y0 + (y1 - y0) * (density - x0) / (x1 - x0))
    }
}

/// Region placement rule and fit settings. Lengths are fractions of the
/// density range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineSetup {
    pub setup_id: u8,
    /// Training region width.
    pub width: f64,
    /// Setups 1-3: distance of each region end before the offline switch.
    pub offset: f64,
    /// Setup 4: main region widths per scheme.
    pub main_fractions: [f64; 4],
    /// Setup 4: region ends are drawn uniformly from this span before each main-region end.
    pub jitter: f64,
    pub sample_count: usize,
    pub degree: usize,
    pub seed: u64,
}

impl OnlineSetup {
    pub fn standard(setup_id: u8, seed: u64) -> Result<Self> {
        let (width, offset) = match setup_id {
            1 => (0.05, 0.0),
            2 => (0.05, 0.05),
            3 => (0.10, 0.05),
            4 => (0.10, 0.0),
            _ => return Err(Error::invalid(format!("setup id must be 1-4, got {setup_id}"))),
        };
        Ok(Self {
            setup_id,
            width,
            offset,
            main_fractions: [0.25, 0.15, 0.45, 0.15],
            jitter: 0.20,
            sample_count: 6,
            degree: 5,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.setup_id) {
            return Err(Error::invalid(format!("setup id must be 1-4, got {}", self.setup_id)));
        }
        if !(self.width > 0.0) {
            return Err(Error::invalid("training region width must be positive"));
        }
        if !(self.offset >= 0.0 && self.jitter >= 0.0) {
            return Err(Error::invalid("offsets must be nonnegative"));
        }
        if self.sample_count < 2 {
            return Err(Error::invalid("need at least two samples per region"));
        }
        if self.setup_id == 4 {
            let sum: f64 = self.main_fractions.iter().sum();
            if self.main_fractions.iter().any(|&f| !(f > 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("main region fractions must be positive and sum to 1"));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("setup serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| Error::invalid(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Main-region end densities (setup 4).
    pub fn main_ends(&self, range: &DensityRange) -> [f64; 4] {
        let mut acc = 0.0;
        self.main_fractions.map(|f| {
            acc += f;
            range.density_at(acc)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRegion {
    pub scheme: SchemeId,
    pub start: f64,
    pub end: f64,
    pub sample_count: usize,
}

impl TrainingRegion {
    /// Equally spaced densities, both endpoints included.
    pub fn sample_densities(&self) -> Vec<f64> {
        let n = self.sample_count;
        let step = (self.end - self.start) / (n - 1) as f64;
        (0..n).map(|k| if k == n - 1 { self.end } else { self.start + k as f64 * step }).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionSet {
    pub regions: Vec<TrainingRegion>,
    pub diagnostics: Vec<String>,
}

fn clipped(scheme: SchemeId, start: f64, end: f64, n: usize, range: &DensityRange, diag: &mut Vec<String>) -> TrainingRegion {
    let (s, e) = (start.max(range.d0), end.min(range.d1));
    if s != start || e != end {
        diag.push(format!(
            "{scheme} region [{start:.6}, {end:.6}] clipped to [{s:.6}, {e:.6}]"
        ));
    }
    TrainingRegion { scheme, start: s, end: e, sample_count: n }
}

/// Training regions: three for setups 1-3 (placed against the offline
/// switches), four for setup 4 (placed randomly inside the main regions).
pub fn make_regions(setup: &OnlineSetup, offline_switches: &[f64; 3], range: &DensityRange) -> Result<RegionSet> {
    setup.validate()?;
    let w = range.width();
    let mut diagnostics = Vec::new();
    let regions = if setup.setup_id == 4 {
        let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
        setup
            .main_ends(range)
            .iter()
            .zip(SchemeId::ALL)
            .map(|(&main_end, scheme)| {
                let span = setup.jitter * w;
                let end = if span > 0.0 { rng.random_range(main_end - span..=main_end) } else { main_end };
                clipped(scheme, end - setup.width * w, end, setup.sample_count, range, &mut diagnostics)
            })
            .collect::<Vec<_>>()
    } else {
        for &s in offline_switches {
            if !(s > range.d0 && s < range.d1) {
                return Err(Error::invalid(format!(
                    "offline switch {s} is not strictly inside [{}, {}]",
                    range.d0, range.d1
                )));
            }
        }
        offline_switches
            .iter()
            .zip(SchemeId::ALL)
            .map(|(&s, scheme)| {
                let end = s - setup.offset * w;
                clipped(scheme, end - setup.width * w, end, setup.sample_count, range, &mut diagnostics)
            })
            .collect()
    };
    for r in &regions {
        if !(r.end > r.start) {
            return Err(Error::invalid(format!("{} training region is empty after clipping", r.scheme)));
        }
    }
    Ok(RegionSet { regions, diagnostics })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeFit {
    pub region: TrainingRegion,
    pub report: FitReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineResult {
    pub plan: Plan,
    pub fits: Vec<SchemeFit>,
    /// Switch densities as found, before ordering was enforced.
    pub raw_switches: [f64; 3],
    pub never_crossed: [bool; 3],
    pub clamped: [bool; 3],
    pub diagnostics: Vec<String>,
}

/// Forces switches nondecreasing; returns which were raised.
fn enforce_order(switches: &mut [f64; 3], diagnostics: &mut Vec<String>) -> [bool; 3] {
    let mut clamped = [false; 3];
    for i in 1..3 {
        if switches[i] < switches[i - 1] {
            diagnostics.push(format!(
                "switch {} at {:.6} precedes switch {} at {:.6}; raised",
                i + 1,
                switches[i],
                i,
                switches[i - 1]
            ));
            switches[i] = switches[i - 1];
            clamped[i] = true;
        }
    }
    clamped
}

pub fn run_online(
    setup: &OnlineSetup,
    offline_switches: &[f64; 3],
    oracle: &dyn BerOracle,
    catalog: &SchemeCatalog,
    threshold: f64,
    range: &DensityRange,
) -> Result<OnlineResult> {
    let RegionSet { regions, mut diagnostics } = make_regions(setup, offline_switches, range)?;
    let opts = CrossingOptions::default();
    let mut fits = Vec::with_capacity(regions.len());
    let mut raw = [range.d1; 3];
    let mut never_crossed = [false; 3];
    for region in regions {
        let xs = region.sample_densities();
        let ys = xs
            .iter()
            .map(|&d| oracle.query(region.scheme, d))
            .collect::<Result<Vec<_>>>()?;
        let report = fit_points(&xs, &ys, setup.degree)?;
        let i = region.scheme.index();
        if i < 3 {
            let curve = BerCurve::new(region.scheme, report.coefficients.clone(), (region.start, region.end))?;
            match threshold_crossing(&curve, threshold, region.start, range.d1, &opts) {
                Some(d) => raw[i] = d,
                None => {
                    diagnostics.push(format!("{} fit never reaches the threshold; kept to d1", region.scheme));
                    never_crossed[i] = true;
                }
            }
        }
        fits.push(SchemeFit { region, report });
    }
    let mut switches = raw;
    let clamped = enforce_order(&mut switches, &mut diagnostics);
    let plan = Plan::from_switch_densities(switches, catalog, threshold, *range)?;
    Ok(OnlineResult {
        plan,
        fits,
        raw_switches: raw,
        never_crossed,
        clamped,
        diagnostics,
    })
}

/// Switch densities from already fitted OP, SP, OT curves, skipping the
/// sampling step. Each search starts at the previous switch.
pub fn plan_from_fits(
    fits: &[BerCurve],
    catalog: &SchemeCatalog,
    threshold: f64,
    range: &DensityRange,
) -> Result<Plan> {
    if fits.len() != 3 || fits.iter().zip(SchemeId::ALL).any(|(c, s)| c.scheme != s) {
        return Err(Error::invalid("expected fitted curves for OP, SP, OT in order"));
    }
    let opts = CrossingOptions::default();
    let mut switches = [range.d1; 3];
    let mut from = range.d0;
    for (i, curve) in fits.iter().enumerate() {
        switches[i] = threshold_crossing(curve, threshold, from, range.d1, &opts).unwrap_or(range.d1);
        from = switches[i];
    }
    Plan::from_switch_densities(switches, catalog, threshold, *range)
}

/// Fraction of the range where the active scheme's true BER exceeds `threshold`.
pub fn violation_fraction(plan: &Plan, truth: &[BerCurve], threshold: f64, range: &DensityRange) -> Result<f64> {
    check_curves(truth)?;
    let n = (range.width() / VIOLATION_STEP).round().max(1.0) as usize;
    let indicator = |k: usize| {
        let d = if k == n { range.d1 } else { range.d0 + range.width() * k as f64 / n as f64 };
        let s = plan.active_scheme(d);
        if truth[s.index()].eval(d) > threshold { 1.0 } else { 0.0 }
    };
    let mut prev = indicator(0);
    let mut acc = 0.0;
    for k in 1..=n {
        let cur = indicator(k);
        acc += 0.5 * (prev + cur);
        prev = cur;
    }
    Ok(acc / n as f64)
}
