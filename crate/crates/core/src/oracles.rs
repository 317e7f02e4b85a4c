//! Closed-form references for `mu = gamma = N(0, 1)`.
//!
//! The optimal coupling is jointly Gaussian with correlation `rho`, for which
//! `E[YZ] = rho` and `I(Y; Z) = -ln(1 - rho^2) / 2`.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianF {
    pub rho: f64,
    pub f: f64,
}

/// Regularized value `sup_rho { rho + (beta/2) ln(1 - rho^2) }`.
///
/// Stationarity gives `rho^2 + beta rho - 1 = 0`.
pub fn gaussian_f(beta: f64) -> GaussianF {
    assert!(beta > 0.0, "beta must be positive");
    // (sqrt(beta^2 + 4) - beta) / 2, written without cancellation for large beta
    let rho = 2.0 / ((beta * beta + 4.0).sqrt() + beta);
    let f = rho + 0.5 * beta * (-rho * rho).ln_1p();
    GaussianF { rho, f }
}

/// Mutual information of the optimizer of [`gaussian_f`].
pub fn gaussian_f_mutual_info(beta: f64) -> f64 {
    let rho = gaussian_f(beta).rho;
    -0.5 * (-rho * rho).ln_1p()
}

/// Constrained value `sqrt(1 - e^{-2R})`.
pub fn gaussian_w(rate: f64) -> f64 {
    assert!(rate >= 0.0, "rate must be nonnegative");
    (-(-2.0 * rate).exp_m1()).sqrt()
}

/// Classical `max(0, ln(variance / D) / 2)`.
pub fn gaussian_rate_distortion(variance: f64, distortion: f64) -> f64 {
    assert!(
        variance > 0.0 && distortion > 0.0,
        "arguments must be positive"
    );
    (0.5 * (variance / distortion).ln()).max(0.0)
}

/// Regularized value for `N(0, diag(variances))` against `N(0, I)`, summed
/// over axes after rescaling each axis to unit variance.
///
/// Scaling one marginal by `s` turns `f(beta)` into `s f(beta / s)`.
pub fn gaussian_f_diagonal(variances: &[f64], beta: f64) -> f64 {
    variances
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let s = v.sqrt();
            s * gaussian_f(beta / s).f
        })
        .sum()
}
