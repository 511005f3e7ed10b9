use crate::error::{Error, Result};

/// Largest coordinate count the oracle accepts.
pub const MAX_COORDINATES: usize = 5000;

/// Central finite-difference gradient of `f` at `point`.
///
/// Each coordinate costs two evaluations of `f`; a non-finite evaluation is
/// an oracle error.
pub fn finite_diff_grad<F>(mut f: F, point: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(eps > 0.0) {
        return Err(Error::Oracle(format!("step {eps} must be positive")));
    }
    if point.len() > MAX_COORDINATES {
        return Err(Error::Oracle(format!(
            "{} coordinates exceeds the oracle limit of {MAX_COORDINATES}",
            point.len()
        )));
    }
    let mut x = point.to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let up = f(&x)?;
        x[i] = orig - eps;
        let down = f(&x)?;
        x[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Oracle(format!(
                "non-finite objective while perturbing coordinate {i}"
            )));
        }
        grad.push((up - down) / (2.0 * eps));
    }
    Ok(grad)
}

/// Denominator floor for [`relative_error`]; below this magnitude the
/// comparison is effectively absolute.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, RELATIVE_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

/// Largest [`relative_error`] between two gradient vectors.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// `|a - b|_2 / max(|a|_2, |b|_2, RELATIVE_FLOOR)` over whole vectors.
///
/// Preferred over the coordinate-wise maximum when some coordinates are
/// tiny: there the central-difference roundoff (about `1e-16 * |f| / eps`)
/// dominates the ratio without saying anything about the backward pass.
pub fn norm_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, b)| a - b));
    let scale = norm(&mut analytic.iter().copied())
        .max(norm(&mut numeric.iter().copied()))
        .max(RELATIVE_FLOOR);
    diff / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_relative_error_examples() {
        assert_eq!(norm_relative_error(&[3.0, 4.0], &[3.0, 4.0]), 0.0);
        assert!((norm_relative_error(&[3.0, 4.0], &[0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((norm_relative_error(&[1e-9], &[2e-9]) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn square_derivative() {
        let g = finite_diff_grad(|w| Ok(w[0] * w[0]), &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let g = finite_diff_grad(|_| Ok(4.2), &[1.0, -2.0], 1e-5).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn non_finite_is_an_oracle_error() {
        let r = finite_diff_grad(|w| Ok(w[0].ln()), &[0.0], 1e-5);
        assert!(matches!(r, Err(Error::Oracle(_))));
        assert!(finite_diff_grad(|w| Ok(w[0]), &[0.0], 0.0).is_err());
    }
}
