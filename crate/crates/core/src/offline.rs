//! Offline planning: share polytopes from BER curves and the three
//! capacity/complexity problems, all solved on the same vertex-enumeration LP.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bermodel::{BerCurve, DensityRange, SchemeId};
use crate::error::{Error, Result};
use crate::lp::{self, LpSolution, Polytope, Sense};

pub const SUM_TOLERANCE: f64 = 1e-9;

/// Per-scheme rates and adder sizes in OP, SP, OT, ST order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeCatalog {
    pub rates: [f64; 4],
    pub adder_sizes: [f64; 4],
}

impl SchemeCatalog {
    pub fn new(rates: [f64; 4], adder_sizes: [f64; 4]) -> Result<Self> {
        if rates.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
            return Err(Error::invalid("rates must lie in [0, 1]"));
        }
        if adder_sizes.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
            return Err(Error::invalid("adder sizes must be positive"));
        }
        Ok(Self { rates, adder_sizes })
    }

    /// LOCO codes of length 23.
    pub fn length23() -> Self {
        Self {
            rates: [0.9306, 0.8800, 0.8267, 0.7436],
            adder_sizes: [67.0, 17.0, 59.0, 30.0],
        }
    }

    pub fn capacity(&self, shares: &[f64; 4]) -> f64 {
        dot(&self.rates, shares)
    }

    pub fn avg_adder(&self, shares: &[f64; 4]) -> f64 {
        dot(&self.adder_sizes, shares)
    }

    /// Capacity/complexity trade-off weights `r - b/c`.
    pub fn k_vector(&self, c: f64) -> [f64; 4] {
        std::array::from_fn(|i| self.rates[i] - self.adder_sizes[i] / c)
    }
}

impl Default for SchemeCatalog {
    fn default() -> Self {
        Self::length23()
    }
}

pub(crate) fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cumulative(shares: &[f64; 4]) -> [f64; 3] {
    [shares[0], shares[0] + shares[1], shares[0] + shares[1] + shares[2]]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub shares: [f64; 4],
    pub switch_densities: [f64; 3],
    pub capacity: f64,
    pub avg_adder: f64,
    pub threshold: f64,
    pub range: DensityRange,
}

impl Plan {
    pub fn from_shares(
        shares: [f64; 4],
        catalog: &SchemeCatalog,
        threshold: f64,
        range: DensityRange,
    ) -> Result<Self> {
        if shares.iter().any(|&x| x < -SUM_TOLERANCE || !x.is_finite()) {
            return Err(Error::invalid(format!("shares must be nonnegative: {shares:?}")));
        }
        let sum: f64 = shares.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("shares sum to {sum}, not 1")));
        }
        let shares = shares.map(|x| x.max(0.0));
        let switch_densities = cumulative(&shares).map(|c| range.density_at(c.min(1.0)));
        Ok(Self {
            shares,
            switch_densities,
            capacity: catalog.capacity(&shares),
            avg_adder: catalog.avg_adder(&shares),
            threshold,
            range,
        })
    }

    /// Shares implied by three nondecreasing switch densities in the range.
    pub fn from_switch_densities(
        switches: [f64; 3],
        catalog: &SchemeCatalog,
        threshold: f64,
        range: DensityRange,
    ) -> Result<Self> {
        let mut prev = range.d0;
        let mut shares = [0.0; 4];
        for (i, &s) in switches.iter().enumerate() {
            if s < prev - 1e-12 || s > range.d1 + 1e-12 {
                return Err(Error::invalid(format!(
                    "switch densities must be nondecreasing inside the range: {switches:?}"
                )));
            }
            let s = s.clamp(prev, range.d1);
            shares[i] = (s - prev) / range.width();
            prev = s;
        }
        shares[3] = (range.d1 - prev) / range.width();
        let mut plan = Self::from_shares(shares, catalog, threshold, range)?;
        plan.switch_densities = switches.map(|s| s.clamp(range.d0, range.d1));
        Ok(plan)
    }

    /// Scheme in use at `density`. A switch at `d1` never happens, and the
    /// scheme in use at `d1` keeps running past it.
    pub fn active_scheme(&self, density: f64) -> SchemeId {
        let end = self.range.d1 - 1e-12;
        let idx = self
            .switch_densities
            .iter()
            .filter(|&&s| s < end && density >= s)
            .count();
        SchemeId::ALL[idx]
    }
}

/// Upper bounds on cumulative shares, `x1 <= u1`, `x1+x2 <= u2`, `x1+x2+x3 <= u3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShareBounds {
    pub u: [f64; 3],
    pub diagnostics: Vec<String>,
}

/// The four curves must be in OP, SP, OT, ST order.
pub fn check_curves(curves: &[BerCurve]) -> Result<()> {
    if curves.len() != 4 {
        return Err(Error::invalid(format!("expected 4 curves, got {}", curves.len())));
    }
    for (c, s) in curves.iter().zip(SchemeId::ALL) {
        if c.scheme != s {
            return Err(Error::invalid(format!(
                "curve for {} found where {s} was expected",
                c.scheme
            )));
        }
    }
    Ok(())
}

pub fn share_bounds(curves: &[BerCurve], threshold: f64, range: &DensityRange) -> Result<ShareBounds> {
    check_curves(curves)?;
    if !(threshold > 0.0) {
        return Err(Error::invalid("threshold must be positive"));
    }
    let last = &curves[3];
    if last.eval(range.d1) > threshold {
        return Err(Error::EndOfLife {
            last_compliant: last
                .threshold_crossing(threshold, range.d0, range.d1)
                .filter(|&d| d > range.d0 || last.eval(range.d0) <= threshold),
        });
    }

    let mut diagnostics = Vec::new();
    let mut u = [1.0; 3];
    for i in 0..3 {
        let curve = &curves[i];
        u[i] = match curve.threshold_crossing(threshold, range.d0, range.d1) {
            None => {
                diagnostics.push(format!("{} stays below the threshold on the whole range", curve.scheme));
                1.0
            }
            Some(d) if d <= range.d0 => {
                diagnostics.push(format!("{} already exceeds the threshold at d0", curve.scheme));
                0.0
            }
            Some(d) => range.share_of(d).clamp(0.0, 1.0),
        };
    }
    for i in (0..2).rev() {
        if u[i] > u[i + 1] {
            diagnostics.push(format!(
                "bound for {} clamped from {:.6} to {:.6} (later scheme fails first)",
                SchemeId::ALL[i],
                u[i],
                u[i + 1]
            ));
            u[i] = u[i + 1];
        }
    }
    Ok(ShareBounds { u, diagnostics })
}

/// Simplex constraints plus the cumulative bounds.
pub fn bounds_polytope(u: &[f64; 3]) -> Polytope {
    let rows = vec![
        (vec![-1.0, 0.0, 0.0, 0.0], 0.0),
        (vec![0.0, -1.0, 0.0, 0.0], 0.0),
        (vec![0.0, 0.0, -1.0, 0.0], 0.0),
        (vec![0.0, 0.0, 0.0, -1.0], 0.0),
        (vec![1.0, 0.0, 0.0, 0.0], u[0]),
        (vec![1.0, 1.0, 0.0, 0.0], u[1]),
        (vec![1.0, 1.0, 1.0, 0.0], u[2]),
    ];
    Polytope::from_rows(4, &rows, &[(vec![1.0; 4], 1.0)]).expect("fixed dimensions")
}

pub fn build_polytope(
    curves: &[BerCurve],
    threshold: f64,
    range: &DensityRange,
) -> Result<(Polytope, ShareBounds)> {
    let bounds = share_bounds(curves, threshold, range)?;
    Ok((bounds_polytope(&bounds.u), bounds))
}

#[derive(Clone, Debug, PartialEq)]
pub struct OfflineSolution {
    pub plan: Plan,
    pub bounds: ShareBounds,
    pub lp: LpSolution,
}

fn shares_of(lp: &LpSolution) -> [f64; 4] {
    let x = &lp.optimal.x;
    [x[0], x[1], x[2], x[3]]
}

/// Maximum capacity subject to the BER threshold.
pub fn solve_problem1(
    catalog: &SchemeCatalog,
    curves: &[BerCurve],
    threshold: f64,
    range: &DensityRange,
) -> Result<OfflineSolution> {
    let (polytope, bounds) = build_polytope(curves, threshold, range)?;
    let lp = lp::solve_lp(&polytope, &catalog.rates, Sense::Maximize)?;
    let plan = Plan::from_shares(shares_of(&lp), catalog, threshold, *range)?;
    Ok(OfflineSolution { plan, bounds, lp })
}

/// Which schemes the `k = r - b/c` ordering rules out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CRegion {
    /// k1 >= k2 and k3 >= k4: every scheme may be used.
    AllSchemes,
    /// k1 < k2: OP is never worth using.
    SkipOp,
    /// k3 < k4: OT is never worth using.
    SkipOt,
    SkipOpAndOt,
}

impl CRegion {
    pub fn classify(k: &[f64; 4]) -> Self {
        match (k[0] < k[1], k[2] < k[3]) {
            (false, false) => CRegion::AllSchemes,
            (true, false) => CRegion::SkipOp,
            (false, true) => CRegion::SkipOt,
            (true, true) => CRegion::SkipOpAndOt,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CRegion::AllSchemes => "all-schemes",
            CRegion::SkipOp => "skip-op",
            CRegion::SkipOt => "skip-ot",
            CRegion::SkipOpAndOt => "skip-op-ot",
        }
    }
}

impl fmt::Display for CRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The `c` values where `k1 = k2` and `k3 = k4`.
pub fn c_region_boundaries(catalog: &SchemeCatalog) -> Result<(f64, f64)> {
    let (r, b) = (&catalog.rates, &catalog.adder_sizes);
    let boundary = |i: usize, j: usize| {
        let dr = r[i] - r[j];
        if dr == 0.0 {
            Err(Error::invalid(format!(
                "rates of {} and {} tie; no c boundary exists",
                SchemeId::ALL[i],
                SchemeId::ALL[j]
            )))
        } else {
            Ok((b[i] - b[j]) / dr)
        }
    };
    Ok((boundary(0, 1)?, boundary(2, 3)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Problem2Solution {
    pub solution: OfflineSolution,
    pub k: [f64; 4],
    pub region: CRegion,
}

/// Maximum `k . x` with `k = r - b/c`; the plan still reports capacity `r . x`.
pub fn solve_problem2(
    catalog: &SchemeCatalog,
    curves: &[BerCurve],
    threshold: f64,
    range: &DensityRange,
    c: f64,
) -> Result<Problem2Solution> {
    if !(c > 0.0) {
        return Err(Error::invalid(format!("c must be positive, got {c}")));
    }
    let (polytope, bounds) = build_polytope(curves, threshold, range)?;
    let k = catalog.k_vector(c);
    let lp = lp::solve_lp(&polytope, &k, Sense::Maximize)?;
    let plan = Plan::from_shares(shares_of(&lp), catalog, threshold, *range)?;
    Ok(Problem2Solution {
        solution: OfflineSolution { plan, bounds, lp },
        k,
        region: CRegion::classify(&k),
    })
}

/// Breakpoints of the best capacity as a function of the adder budget `z`.
///
/// The best capacity is the upper concave envelope of the (adder, capacity)
/// pairs of the unconstrained polytope's vertices; `points` are its corners
/// from the cheapest feasible plan to the Problem-1 optimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZBreakpoints {
    pub points: Vec<(f64, f64)>,
}

impl ZBreakpoints {
    pub fn from_polytope(polytope: &Polytope, catalog: &SchemeCatalog) -> Self {
        let mut pts: Vec<(f64, f64)> = lp::enumerate_vertices(polytope)
            .iter()
            .map(|v| {
                let x = [v.x[0], v.x[1], v.x[2], v.x[3]];
                (catalog.avg_adder(&x), catalog.capacity(&x))
            })
            .collect();
        // cheapest first; at equal cost keep the best capacity first
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
        let mut hull: Vec<(f64, f64)> = Vec::new();
        for p in pts {
            if let Some(&(_, cap)) = hull.last() {
                if p.1 <= cap + 1e-12 {
                    continue;
                }
            }
            while hull.len() >= 2 {
                let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
                if cross >= -1e-12 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        Self { points: hull }
    }

    pub fn z_min(&self) -> f64 {
        self.points[0].0
    }

    pub fn z_nonbinding(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    pub fn classify(&self, z: f64) -> ZRegion {
        const EPS: f64 = 1e-9;
        if z < self.z_min() - EPS {
            return ZRegion::Infeasible;
        }
        if z >= self.z_nonbinding() - EPS {
            return ZRegion::Nonbinding;
        }
        let count = self.points.len() - 1;
        let index = self
            .points
            .windows(2)
            .position(|w| z <= w[1].0 + EPS)
            .unwrap_or(count - 1);
        ZRegion::Piece { index, count }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZRegion {
    Infeasible,
    /// Segment `index` of `count` linear pieces between the minimum budget and the
    /// nonbinding budget.
    Piece { index: usize, count: usize },
    Nonbinding,
}

impl fmt::Display for ZRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ZRegion::Infeasible => f.write_str("infeasible"),
            ZRegion::Nonbinding => f.write_str("nonbinding"),
            ZRegion::Piece { index: 0, count: 2 } => f.write_str("lower-piece"),
            ZRegion::Piece { index: 1, count: 2 } => f.write_str("upper-piece"),
            ZRegion::Piece { index, count } => write!(f, "piece-{}-of-{}", index + 1, count),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Problem3Solution {
    pub solution: OfflineSolution,
    pub region: ZRegion,
    pub breakpoints: ZBreakpoints,
}

/// Maximum capacity with the average adder size capped at `z`.
pub fn solve_problem3(
    catalog: &SchemeCatalog,
    curves: &[BerCurve],
    threshold: f64,
    range: &DensityRange,
    z: f64,
) -> Result<Problem3Solution> {
    if !z.is_finite() {
        return Err(Error::invalid("z must be finite"));
    }
    let (polytope, bounds) = build_polytope(curves, threshold, range)?;
    let breakpoints = ZBreakpoints::from_polytope(&polytope, catalog);
    let region = breakpoints.classify(z);
    let constrained = polytope.with_inequality(&catalog.adder_sizes, z)?;
    let lp = lp::solve_lp(&constrained, &catalog.rates, Sense::Maximize).map_err(|e| match e {
        Error::Infeasible(_) => Error::Infeasible(format!(
            "no plan has average adder size <= {z} (minimum is {:.4})",
            breakpoints.z_min()
        )),
        other => other,
    })?;
    let plan = Plan::from_shares(shares_of(&lp), catalog, threshold, *range)?;
    Ok(Problem3Solution {
        solution: OfflineSolution { plan, bounds, lp },
        region,
        breakpoints,
    })
}
