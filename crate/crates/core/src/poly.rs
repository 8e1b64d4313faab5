//! Dense polynomials stored highest power first.

pub fn horner(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().fold(0.0, |acc, &c| acc * x + c)
}

/// Coefficients of the derivative, highest power first. A constant maps to `[0.0]`.
pub fn derivative(coefficients: &[f64]) -> Vec<f64> {
    let degree = coefficients.len().saturating_sub(1);
    if degree == 0 {
        return vec![0.0];
    }
    coefficients[..degree]
        .iter()
        .enumerate()
        .map(|(j, &c)| c * (degree - j) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_and_derivative() {
        let p = [2.0, -3.0, 0.0, 5.0]; // 2x^3 - 3x^2 + 5
        assert_eq!(horner(&p, 2.0), 9.0);
        assert_eq!(derivative(&p), vec![6.0, -6.0, 0.0]);
        assert_eq!(derivative(&[4.0]), vec![0.0]);
        assert_eq!(horner(&[], 3.0), 0.0);
    }
}
