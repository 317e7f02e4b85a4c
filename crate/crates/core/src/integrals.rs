//! Integral functionals of a rate-distortion curve and the two-sided
//! comparisons built from them.
//!
//! Curves are piecewise linear, so most quantities below are computed per
//! segment in closed form. Infinite tails in `alpha` are exact: once the
//! minimizer of `curve(x) + x^2 / alpha^2` sits at `support_end` it stays
//! there for every larger `alpha`, and the remaining integral is
//! `support_end^2 / alpha`.

use serde::Serialize;

use crate::eot::{self, EotOptions};
use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, MonotoneCurve, Segment};
use crate::quad::adaptive_simpson;
use crate::rate_distortion::{self, RdCurve, RdOptions};

/// Absolute tolerance for quadrature in `alpha`.
const QUAD_TOL: f64 = 1e-10;

/// `int_0^inf sqrt(min(R, curve(sigma))) d sigma`, exactly.
pub fn truncated_rd_integral(curve: &MonotoneCurve, rate: f64) -> f64 {
    if !(rate > 0.0) {
        return 0.0;
    }
    curve
        .segments()
        .iter()
        .map(|seg| capped_sqrt_integral(seg, rate))
        .sum()
}

fn capped_sqrt_integral(seg: &Segment, cap: f64) -> f64 {
    let len = seg.x1 - seg.x0;
    if len <= 0.0 {
        return 0.0;
    }
    let s = seg.slope();
    // v is nonincreasing; split where it crosses the cap
    let split = if seg.v0 <= cap {
        seg.x0
    } else if seg.v1 >= cap {
        seg.x1
    } else {
        seg.x0 + (cap - seg.v0) / s
    };
    let capped = cap.sqrt() * (split - seg.x0);
    let (va, vb) = (seg.at(split).clamp(0.0, cap), seg.v1.max(0.0));
    let rest = if seg.x1 <= split {
        0.0
    } else if s == 0.0 {
        va.sqrt() * (seg.x1 - split)
    } else {
        // int sqrt(v) dx with v linear = (2 / 3s) (vb^{3/2} - va^{3/2})
        2.0 / (3.0 * s) * (vb.powf(1.5) - va.powf(1.5))
    };
    capped + rest
}

/// Minimizer and value of `v(x)^p + x^2 / alpha^2` over one segment, with
/// `p` either 1 or 2.
fn segment_min(seg: &Segment, alpha: f64, power: i32) -> f64 {
    let s = seg.slope();
    let inv = 1.0 / (alpha * alpha);
    let x = match power {
        1 => -0.5 * s * alpha * alpha,
        _ => {
            let c = seg.v0 - s * seg.x0;
            -s * c / (s * s + inv)
        }
    }
    .clamp(seg.x0, seg.x1);
    let v = seg.at(x).max(0.0);
    let vp = if power == 1 { v } else { v * v };
    vp + x * x * inv
}

fn infimal(curve: &MonotoneCurve, alpha: f64, power: i32) -> f64 {
    let lead = if power == 1 {
        curve.left_limit()
    } else {
        curve.left_limit().powi(2)
    };
    if curve.is_zero() || curve.support_end() <= 0.0 {
        return 0.0;
    }
    if alpha <= 0.0 {
        return lead;
    }
    let se = curve.support_end();
    curve
        .segments()
        .iter()
        .map(|seg| segment_min(seg, alpha, power))
        .fold(se * se / (alpha * alpha), f64::min)
}

/// True when `support_end` minimizes `curve(x)^p + x^2 / alpha^2`.
fn tail_regime(curve: &MonotoneCurve, alpha: f64, power: i32) -> bool {
    let se = curve.support_end();
    infimal(curve, alpha, power) >= se * se / (alpha * alpha)
}

/// `phi(alpha) = inf_{sigma > 0} { curve(sigma) + sigma^2 / alpha^2 }`.
pub fn phi(curve: &MonotoneCurve, alpha: f64) -> f64 {
    infimal(curve, alpha, 1)
}

/// First doubling of `from` past which the tail is exact, if any within
/// `doublings` steps.
fn tail_start(curve: &MonotoneCurve, from: f64, doublings: usize, power: i32) -> Option<f64> {
    let mut a = from.max(f64::MIN_POSITIVE);
    for _ in 0..=doublings {
        if tail_regime(curve, a, power) {
            return Some(a);
        }
        a *= 2.0;
    }
    None
}

/// `int_threshold^inf` of `alpha -> infimal(curve, alpha, power)`.
///
/// Quadrature up to the tail regime plus the exact tail. When the regime
/// starts too far out, the remainder is integrated in `u = 1 / alpha`, where
/// the integrand `infimal(1 / u) / u^2` is bounded by `support_end^2`.
fn infimal_tail_integral(curve: &MonotoneCurve, threshold: f64, power: i32) -> Result<f64> {
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} must be finite and >= 0"
        )));
    }
    if curve.is_zero() || curve.support_end() <= 0.0 {
        return Ok(0.0);
    }
    let se = curve.support_end();
    let lead = curve.left_limit().powi(power).max(1.0);
    let f = |x: f64| infimal(curve, x, power);
    if let Some(a) = tail_start(curve, threshold.max(se), 12, power) {
        let body = adaptive_simpson(f, threshold, a, QUAD_TOL * lead * a)?;
        return Ok(body + se * se / a);
    }
    let cut = threshold.max(se);
    let body = adaptive_simpson(f, threshold, cut, QUAD_TOL * lead * cut)?;
    let g = |u: f64| {
        if u <= 0.0 {
            se * se
        } else {
            infimal(curve, 1.0 / u, power) / (u * u)
        }
    };
    let tail = adaptive_simpson(g, 0.0, 1.0 / cut, QUAD_TOL * se * se / cut)?;
    Ok(body + tail)
}

/// `int_threshold^inf phi(alpha) d alpha`.
pub fn phi_tail_integral(curve: &MonotoneCurve, threshold: f64) -> Result<f64> {
    infimal_tail_integral(curve, threshold, 1)
}

/// `int_0^inf min(phi(alpha), cap) d alpha`.
///
/// Together with [`phi_tail_integral`] this gives the Legendre pair
/// `tail(t) = sup_R { capped(R) - t R }`, attained at `R = phi(t)`.
pub fn phi_capped_integral(curve: &MonotoneCurve, cap: f64) -> Result<f64> {
    if !(cap > 0.0) || curve.is_zero() {
        return Ok(0.0);
    }
    if cap >= curve.left_limit() {
        return phi_tail_integral(curve, 0.0);
    }
    // phi is nonincreasing, so min(phi, cap) = cap up to the crossing
    let (mut lo, mut hi) = (0.0, curve.support_end());
    while phi(curve, hi) > cap {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(curve, mid) > cap {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(cap * hi + phi_tail_integral(curve, hi)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquiReport {
    /// `int_0^inf y(x) dx`.
    pub lhs: f64,
    /// `int_0^inf min_x { x^2 / alpha^2 + y(x)^2 } d alpha`.
    pub mid: f64,
    pub ratio: f64,
    /// Whether `ratio` lies in `[2 - 1e-2, 4 + 1e-2]`.
    pub within_bracket: bool,
}

/// Compares `int y` with the integral of its quadratic infimal convolution.
pub fn equi_check(y: &MonotoneCurve) -> Result<EquiReport> {
    let lhs: f64 = y
        .segments()
        .iter()
        .map(|s| 0.5 * (s.v0 + s.v1) * (s.x1 - s.x0))
        .sum();
    if !(lhs > 0.0) {
        return Err(Error::QuadratureFailure(
            "y must be positive on an initial interval".into(),
        ));
    }
    let mid = infimal_tail_integral(y, 0.0, 2)?;
    let ratio = mid / lhs;
    Ok(EquiReport {
        lhs,
        mid,
        ratio,
        within_bracket: (2.0 - 1e-2..=4.0 + 1e-2).contains(&ratio),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParameterKind {
    Rate,
    Beta,
}

impl ParameterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParameterKind::Rate => "rate",
            ParameterKind::Beta => "beta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsGaps {
    /// Certified gap of the transport side.
    pub transport: f64,
    /// Certified gap of the rate-distortion curve feeding the integral.
    pub curve: f64,
}

/// Transport value against its integral counterpart at one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsReport {
    pub parameter_kind: ParameterKind,
    pub parameter: f64,
    pub transport_value: f64,
    pub integral_value: f64,
    /// `None` when either side vanishes.
    pub ratio: Option<f64>,
    pub gaps: BoundsGaps,
}

impl BoundsReport {
    pub fn is_degenerate(&self) -> bool {
        self.ratio.is_none()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BoundsOptions {
    pub eot: EotOptions,
    pub rd: RdOptions,
}

fn report(
    kind: ParameterKind,
    parameter: f64,
    transport_value: f64,
    transport_gap: f64,
    integral_value: f64,
    curve: &RdCurve,
) -> BoundsReport {
    // sides within solver noise of zero count as zero
    let t = if transport_value.abs() <= 1e-9 {
        0.0
    } else {
        transport_value
    };
    let ratio = (t > 0.0 && integral_value > 0.0).then(|| t / integral_value);
    BoundsReport {
        parameter_kind: kind,
        parameter,
        transport_value: t.max(0.0),
        integral_value,
        ratio,
        gaps: BoundsGaps {
            transport: transport_gap,
            curve: curve.max_gap,
        },
    }
}

fn curve_of(mu: &DiscreteMeasure, opts: &BoundsOptions) -> Result<RdCurve> {
    rate_distortion::i_mu_curve(mu, &rate_distortion::default_multiplier_grid(mu), &opts.rd)
}

/// `w(gamma, mu, R)` against `int sqrt(min(R, i_mu(sigma))) d sigma`.
pub fn bounds_report_rate(
    gamma: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    rate: f64,
    opts: &BoundsOptions,
) -> Result<BoundsReport> {
    Ok(bounds_reports(gamma, mu, ParameterKind::Rate, &[rate], opts)?[0])
}

/// `f(gamma, mu, beta)` against `int_beta^inf phi(alpha) d alpha`.
pub fn bounds_report_beta(
    gamma: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    beta: f64,
    opts: &BoundsOptions,
) -> Result<BoundsReport> {
    Ok(bounds_reports(gamma, mu, ParameterKind::Beta, &[beta], opts)?[0])
}

/// Reports over a parameter grid sharing one `i_mu` curve.
pub fn bounds_reports(
    gamma: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    kind: ParameterKind,
    parameters: &[f64],
    opts: &BoundsOptions,
) -> Result<Vec<BoundsReport>> {
    if gamma.dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            index: 0,
            expected: gamma.dim(),
            found: mu.dim(),
        });
    }
    let curve = curve_of(mu, opts)?;
    // grid points share the pool; each solve runs sequentially inside
    let inner = EotOptions {
        exec: crate::exec::Exec::Sequential,
        ..opts.eot
    };
    opts.eot.exec.try_map(parameters, |&p| match kind {
        ParameterKind::Rate => {
            let w = eot::w_constrained(gamma, mu, p, &inner)?;
            let integral = truncated_rd_integral(&curve.curve, p);
            Ok(report(
                kind,
                p,
                w.value,
                w.value - w.primal_lower,
                integral,
                &curve,
            ))
        }
        ParameterKind::Beta => {
            if !(p > 0.0) {
                return Err(Error::InvalidArgument(format!("beta {p} must be > 0")));
            }
            let sol = eot::sinkhorn_f(gamma, mu, p, &inner)?;
            let integral = phi_tail_integral(&curve.curve, p)?;
            Ok(report(
                kind,
                p,
                sol.f_value,
                sol.diagnostics.dual_gap,
                integral,
                &curve,
            ))
        }
    })
}
