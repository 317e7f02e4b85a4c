//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

/// Evaluation budget per call.
const MAX_EVALS: usize = 2_000_000;

/// `int_a^b f` to absolute tolerance `tol` by adaptive Simpson with
/// Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::QuadratureFailure(format!(
            "non-finite interval [{a}, {b}]"
        )));
    }
    if b <= a {
        return Ok(0.0);
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut evals = 3;
    let v = recurse(&f, a, b, fa, fm, fb, whole, tol, 50, &mut evals)?;
    if !v.is_finite() {
        return Err(Error::QuadratureFailure("non-finite integrand".into()));
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &mut usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    *evals += 2;
    if *evals > MAX_EVALS {
        return Err(Error::QuadratureFailure(format!(
            "evaluation budget exhausted near [{a}, {b}]"
        )));
    }
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, evals)?
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, evals)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomials_and_exponentials() {
        let v = adaptive_simpson(|x| x * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 4.0, epsilon = 1e-12);
        let v = adaptive_simpson(|x: f64| (-x).exp(), 0.0, 30.0, 1e-10).unwrap();
        assert_abs_diff_eq!(v, 1.0 - (-30f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn kinks_are_resolved() {
        let v = adaptive_simpson(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-10).unwrap();
        assert_abs_diff_eq!(v, 0.5 * (0.09 + 0.49), epsilon = 1e-9);
    }

    #[test]
    fn empty_and_bad_intervals() {
        assert_eq!(adaptive_simpson(|x| x, 1.0, 1.0, 1e-9).unwrap(), 0.0);
        assert!(adaptive_simpson(|x| x, 0.0, f64::INFINITY, 1e-9).is_err());
    }
}
