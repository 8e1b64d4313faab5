//! Least-squares polynomial fitting of BER samples.
//!
//! Fits are solved through a singular value decomposition of the raw
//! Vandermonde matrix. Densities cluster around 1, so degree-7 systems are
//! badly conditioned and normal equations would lose most of their digits.
//! When the system is rank deficient (fewer samples than coefficients) the
//! pseudo-inverse gives the minimum-norm coefficient vector.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;

/// Condition numbers above this mark a fit as ill-conditioned.
pub const CONDITION_LIMIT: f64 = 1e12;

/// MSE values closer than this (relative to the mean squared BER) rank as ties.
const MSE_TIE_RELATIVE: f64 = 1e-20;

/// One BER observation at a TD density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub density: f64,
    pub ber: f64,
}

impl Sample {
    pub fn new(density: f64, ber: f64) -> Result<Self> {
        if !density.is_finite() || !ber.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite sample ({density}, {ber})"
            )));
        }
        if density <= 0.0 {
            return Err(Error::invalid(format!("density must be positive, got {density}")));
        }
        if !(0.0..=1.0).contains(&ber) {
            return Err(Error::invalid(format!("ber must lie in [0, 1], got {ber}")));
        }
        Ok(Self { density, ber })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub degree: usize,
    /// Highest power first.
    pub coefficients: Vec<f64>,
    pub mse: f64,
    /// Rank-deficient or ill-conditioned system.
    pub condition_flag: bool,
}

impl FitReport {
    pub fn eval(&self, x: f64) -> f64 {
        poly::horner(&self.coefficients, x)
    }
}

/// Fits a polynomial of `degree` to the samples.
pub fn fit_polynomial(samples: &[Sample], degree: usize) -> Result<FitReport> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = samples.iter().map(|s| (s.density, s.ber)).unzip();
    fit_points(&xs, &ys, degree)
}

/// Fits arbitrary `(x, y)` pairs; the BER range invariant is not enforced here.
pub fn fit_points(xs: &[f64], ys: &[f64], degree: usize) -> Result<FitReport> {
    if xs.is_empty() {
        return Err(Error::invalid("cannot fit an empty sample list"));
    }
    if xs.len() != ys.len() {
        return Err(Error::invalid("x and y lengths differ"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples contain non-finite values"));
    }

    let rows = xs.len();
    let cols = degree + 1;
    let vander = DMatrix::from_fn(rows, cols, |i, j| xs[i].powi((degree - j) as i32));
    let rhs = DVector::from_column_slice(ys);

    let svd = vander.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let cutoff = sigma_max * rows.max(cols) as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let sigma_min = svd
        .singular_values
        .iter()
        .copied()
        .filter(|&s| s > cutoff)
        .fold(f64::INFINITY, f64::min);
    let ill_conditioned = rank == 0 || sigma_max / sigma_min > CONDITION_LIMIT;

    let coefficients = svd
        .solve(&rhs, cutoff)
        .map_err(|e| Error::invalid(format!("least squares failed: {e}")))?;
    let coefficients: Vec<f64> = coefficients.iter().copied().collect();

    let residuals = &vander * DVector::from_column_slice(&coefficients) - &rhs;
    let mse = residuals.norm_squared() / rows as f64;

    Ok(FitReport {
        degree,
        coefficients,
        mse,
        condition_flag: rank < cols || ill_conditioned,
    })
}

/// Fits every requested degree and sorts ascending by MSE (ties: lower degree first).
pub fn rank_degrees(samples: &[Sample], degrees: &[usize]) -> Result<Vec<FitReport>> {
    if degrees.is_empty() {
        return Err(Error::invalid("no candidate degrees given"));
    }
    let mut reports = degrees
        .iter()
        .map(|&d| fit_polynomial(samples, d))
        .collect::<Result<Vec<_>>>()?;

    let energy = samples.iter().map(|s| s.ber * s.ber).sum::<f64>() / samples.len() as f64;
    let tie = MSE_TIE_RELATIVE * energy.max(f64::MIN_POSITIVE);
    reports.sort_by(|a, b| {
        if (a.mse - b.mse).abs() <= tie {
            a.degree.cmp(&b.degree)
        } else {
            a.mse.total_cmp(&b.mse)
        }
    });
    Ok(reports)
}

#[derive(Deserialize)]
struct SampleRow {
    density: f64,
    ber: f64,
}

/// Reads a `density,ber` CSV file.
pub fn read_samples_csv(path: &Path) -> Result<Vec<Sample>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_samples(file).map_err(|e| match e {
        Error::InvalidInput(message) => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn read_samples<R: std::io::Read>(reader: R) -> Result<Vec<Sample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::invalid(e.to_string()))?
        .clone();
    if headers.len() != 2 || &headers[0] != "density" || &headers[1] != "ber" {
        return Err(Error::invalid("expected header `density,ber`"));
    }
    rdr.deserialize::<SampleRow>()
        .map(|row| {
            let row = row.map_err(|e| Error::invalid(e.to_string()))?;
            Sample::new(row.density, row.ber)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(xs: &[f64], f: impl Fn(f64) -> f64) -> Vec<Sample> {
        xs.iter().map(|&x| Sample { density: x, ber: f(x) }).collect()
    }

    fn six() -> Vec<f64> {
        (0..6).map(|i| 0.1 + 0.15 * i as f64).collect()
    }

    #[test]
    fn exact_quadratic() {
        let s = samples(&six(), |x| x * x);
        let r = fit_polynomial(&s, 2).unwrap();
        assert_eq!(r.coefficients.len(), 3);
        assert!((r.coefficients[0] - 1.0).abs() < 1e-12);
        assert!(r.coefficients[1].abs() < 1e-12);
        assert!(r.coefficients[2].abs() < 1e-12);
        assert!(r.mse < 1e-28);
        assert!(!r.condition_flag);
    }

    #[test]
    fn square_system_interpolates() {
        let s = samples(&six(), |x| (3.0 * x).sin().abs() * 0.1);
        let r = fit_polynomial(&s, 5).unwrap();
        assert!(r.mse < 1e-24, "mse {}", r.mse);
    }

    #[test]
    fn underdetermined_is_flagged_and_interpolates() {
        let s = samples(&six(), |x| 0.01 * x.powi(3));
        let r = fit_polynomial(&s, 7).unwrap();
        assert!(r.condition_flag);
        assert_eq!(r.coefficients.len(), 8);
        assert!(r.mse < 1e-26);
    }

    #[test]
    fn minimum_norm_solution() {
        // two points, degree 1 fits exactly; degree 2 must choose the smallest-norm exact fit
        let xs = [1.0, 2.0];
        let ys = [1.0, 2.0];
        let r = fit_points(&xs, &ys, 2).unwrap();
        assert!(r.condition_flag);
        // any exact solution is c + t*n with n the null vector of [[1,1,1],[4,2,1]]
        let n = [1.0, -3.0, 2.0];
        let dot: f64 = r.coefficients.iter().zip(n).map(|(c, v)| c * v).sum();
        assert!(dot.abs() < 1e-12, "solution not orthogonal to null space");
        assert!(r.mse < 1e-28);
    }

    #[test]
    fn empty_and_non_finite_rejected() {
        assert!(matches!(fit_polynomial(&[], 2), Err(Error::InvalidInput(_))));
        assert!(fit_points(&[1.0, f64::NAN], &[0.0, 0.0], 1).is_err());
        assert!(Sample::new(f64::INFINITY, 0.1).is_err());
        assert!(Sample::new(1.0, 1.5).is_err());
        assert!(Sample::new(-1.0, 0.1).is_err());
    }

    #[test]
    fn ranking_prefers_lower_degree_on_ties() {
        let s = samples(&six(), |x| 0.01 * (x * x * x - x + 0.5));
        let ranked = rank_degrees(&s, &[4, 3]).unwrap();
        assert_eq!(ranked[0].degree, 3);
        assert!(ranked[0].mse < 1e-28);
        let single = rank_degrees(&s, &[2]).unwrap();
        assert_eq!(single.len(), 1);
        assert!(rank_degrees(&s, &[]).is_err());
    }

    #[test]
    fn csv_round() {
        let data = "density,ber\n0.8,1e-4\n0.9, 2.5e-4\n";
        let s = read_samples(data.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].ber, 2.5e-4);
        assert!(read_samples("d,b\n1,2\n".as_bytes()).is_err());
        assert!(read_samples("density,ber\n0.8,abc\n".as_bytes()).is_err());
    }
}
