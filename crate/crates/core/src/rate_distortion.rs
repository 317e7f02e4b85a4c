//! Rate-distortion curves with squared Euclidean distortion.
//!
//! * `r(sigma)`: classical `min I(U; Z)` subject to `E|U - Z|^2 <= sigma^2`,
//!   by Blahut–Arimoto with `U` restricted to a finite reproduction alphabet.
//! * `i(sigma)`: the same minimum over couplings whose *both* marginals are
//!   `mu`. For fixed marginals the Lagrangian `I + lambda E d^2` is exactly
//!   entropic transport with cost `d^2` and regularization `1 / lambda`, so it
//!   is swept with Sinkhorn and the constrained curve is recovered as the
//!   lower convex envelope in the distortion variable.
//!
//! Both solvers keep a certificate: every Lagrangian solve yields an
//! achievable point and a supporting line below the (convex) curve, and
//! refinement continues until chord and supporting lines agree to `tol`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::measure::{sq_dist, DiscreteMeasure, MonotoneCurve};
use crate::sinkhorn::{self, SinkhornOptions};

#[derive(Debug, Clone, Copy)]
pub struct RdOptions {
    /// Target certified gap on rates (nats). The Sinkhorn tolerance only
    /// affects speed here: curve gaps are certified from dual values.
    pub tol: f64,
    /// Blahut–Arimoto iterations per multiplier.
    pub max_iter: usize,
    /// Multiplier refinements per budget (`r`) or per curve (`i`).
    pub max_refinements: usize,
    pub sinkhorn: SinkhornOptions,
    pub exec: Exec,
}

impl Default for RdOptions {
    fn default() -> Self {
        RdOptions {
            tol: 1e-3,
            max_iter: 200_000,
            max_refinements: 400,
            sinkhorn: SinkhornOptions {
                tol: 1e-6,
                ..SinkhornOptions::default()
            },
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RdSolveDiagnostics {
    pub iterations: usize,
    /// Certified upper-minus-lower gap of the returned rate (nats).
    pub final_gap: f64,
    /// Slope multiplier of the supporting line at the budget.
    pub lagrange_multiplier: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateResult {
    /// Achievable (upper) value; the optimum lies within `final_gap` below.
    pub rate: f64,
    pub diagnostics: RdSolveDiagnostics,
}

/// One Lagrangian solve: an achievable `(distortion, rate)` pair and the
/// supporting line `rate >= intercept - lambda * distortion`.
#[derive(Debug, Clone)]
struct LagrangePoint {
    lambda: f64,
    distortion: f64,
    rate: f64,
    intercept: f64,
    iterations: usize,
    state: Vec<f64>,
}

impl LagrangePoint {
    fn tangent(&self, d: f64) -> f64 {
        if self.lambda.is_infinite() {
            return f64::NEG_INFINITY;
        }
        self.intercept - self.lambda * d
    }
}

/// `sup(mu)` plus the barycenter when it is not already a support point.
pub fn default_reproduction(mu: &DiscreteMeasure) -> Vec<Vec<f64>> {
    let mut pts = mu.points().to_vec();
    let bary = mu.mean();
    if !pts.contains(&bary) {
        pts.push(bary);
    }
    pts
}

fn distortion_matrix(mu: &DiscreteMeasure, reproduction: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(mu.len() * reproduction.len());
    for x in mu.points() {
        for (index, u) in reproduction.iter().enumerate() {
            if u.len() != mu.dim() {
                return Err(Error::DimensionMismatch {
                    index,
                    expected: mu.dim(),
                    found: u.len(),
                });
            }
            out.push(sq_dist(x, u));
        }
    }
    Ok(out)
}

/// Blahut–Arimoto at a fixed slope.
///
/// Kernel rows are shifted by their minimum distortion so every row keeps an
/// entry equal to one; `state` carries the reproduction law `q`.
fn ba_point(
    p: &[f64],
    dist: &[f64],
    k: usize,
    lambda: f64,
    inner_tol: f64,
    max_iter: usize,
    warm: Option<&[f64]>,
) -> Result<LagrangePoint> {
    let m = p.len();
    let mut shift = vec![0.0; m];
    let mut kernel = vec![0.0; m * k];
    for i in 0..m {
        let row = &dist[i * k..(i + 1) * k];
        shift[i] = row.iter().copied().fold(f64::INFINITY, f64::min);
        for j in 0..k {
            kernel[i * k + j] = (-lambda * (row[j] - shift[i])).exp();
        }
    }
    let mut q: Vec<f64> = match warm {
        Some(q) => q.to_vec(),
        None => vec![1.0 / k as f64; k],
    };
    let mut z = vec![0.0; m];
    let mut c = vec![0.0; k];
    let mut iterations = 0;
    let mut gap;
    loop {
        iterations += 1;
        for i in 0..m {
            let row = &kernel[i * k..(i + 1) * k];
            z[i] = row.iter().zip(&q).map(|(kk, qq)| kk * qq).sum();
            if p[i] > 0.0 && !(z[i] > 0.0) {
                return Err(Error::NumericalUnderflow);
            }
        }
        c.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..m {
            if p[i] == 0.0 {
                continue;
            }
            let w = p[i] / z[i];
            let row = &kernel[i * k..(i + 1) * k];
            for (cj, kk) in c.iter_mut().zip(row) {
                *cj += w * kk;
            }
        }
        gap = c
            .iter()
            .zip(&q)
            .filter(|(_, qq)| **qq > 0.0)
            .map(|(cc, _)| *cc)
            .fold(f64::NEG_INFINITY, f64::max)
            .ln()
            .max(0.0);
        if gap <= inner_tol || iterations >= max_iter {
            break;
        }
        for (qq, cc) in q.iter_mut().zip(&c) {
            *qq *= cc;
        }
        let s: f64 = q.iter().sum();
        q.iter_mut().for_each(|x| *x /= s);
    }
    // an unconverged q still yields an achievable channel and a valid
    // supporting line; the outer certificate absorbs the looser intercept
    // channel Q(j|i) = q_j K_ij / Z_i with output law q_j c_j
    let mut distortion = 0.0;
    let mut rate = 0.0;
    for i in 0..m {
        if p[i] == 0.0 {
            continue;
        }
        for j in 0..k {
            let qij = q[j] * kernel[i * k + j] / z[i];
            if qij > 0.0 {
                distortion += p[i] * qij * dist[i * k + j];
                rate += p[i] * qij * (kernel[i * k + j] / (z[i] * c[j])).ln();
            }
        }
    }
    // F(q) = -sum_i p_i ln sum_j q_j exp(-lambda d_ij)
    let f_value: f64 = -(0..m)
        .filter(|&i| p[i] > 0.0)
        .map(|i| p[i] * (z[i].ln() - lambda * shift[i]))
        .sum::<f64>();
    Ok(LagrangePoint {
        lambda,
        distortion,
        rate: rate.max(0.0),
        intercept: f_value - gap,
        iterations,
        state: q,
    })
}

/// Chord-minus-supporting-line gap on `[a.distortion, b.distortion]`.
fn segment_gap(a: &LagrangePoint, b: &LagrangePoint) -> f64 {
    let (d0, d1) = (a.distortion, b.distortion);
    let chord = |d: f64| {
        if d1 > d0 {
            a.rate + (b.rate - a.rate) * (d - d0) / (d1 - d0)
        } else {
            a.rate.min(b.rate)
        }
    };
    let lower = |d: f64| a.tangent(d).max(b.tangent(d)).max(0.0);
    let mut probes = vec![d0, d1];
    if a.lambda.is_finite() && a.lambda != b.lambda {
        let x = (a.intercept - b.intercept) / (a.lambda - b.lambda);
        if x > d0 && x < d1 {
            probes.push(x);
        }
    }
    probes
        .into_iter()
        .map(|d| chord(d) - lower(d))
        .fold(0.0, f64::max)
}

fn between(a: f64, b: f64) -> f64 {
    // a > b are the multipliers of the low- and high-distortion neighbours
    match (a.is_infinite(), b == 0.0) {
        (true, true) => 1.0,
        (true, false) => b * 10.0,
        (false, true) => a / 10.0,
        (false, false) => (a * b).sqrt(),
    }
}

/// `R(budget)` with `U` restricted to `reproduction`, by Blahut–Arimoto.
///
/// The returned rate is achievable on the restricted alphabet and within
/// `opts.tol` of its optimum. It is exactly zero once a single reproduction
/// point meets the budget.
pub fn ba_rate(
    mu: &DiscreteMeasure,
    budget: f64,
    reproduction: &[Vec<f64>],
    opts: &RdOptions,
) -> Result<RateResult> {
    if reproduction.is_empty() {
        return Err(Error::EmptyReproduction);
    }
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} must be >= 0"
        )));
    }
    if !(opts.tol > 0.0 && opts.tol <= 1e-2) {
        return Err(Error::InvalidArgument("tol must lie in (0, 1e-2]".into()));
    }
    let k = reproduction.len();
    let dist = distortion_matrix(mu, reproduction)?;
    let p = mu.weights();
    let d_max = (0..k)
        .map(|j| (0..p.len()).map(|i| p[i] * dist[i * k + j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    if budget >= d_max {
        return Ok(RateResult {
            rate: 0.0,
            diagnostics: RdSolveDiagnostics {
                iterations: 1,
                final_gap: 0.0,
                lagrange_multiplier: 0.0,
            },
        });
    }
    let d_min: f64 = (0..p.len())
        .map(|i| {
            p[i] * (0..k)
                .map(|j| dist[i * k + j])
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    if budget < d_min * (1.0 - 1e-12) {
        return Err(Error::InfeasibleDistortion {
            budget,
            minimum: d_min,
        });
    }

    let inner_tol = opts.tol / 4.0;
    let mut iterations = 0;
    // the zero-rate point with the trivial supporting line rate >= 0
    let mut hi_d = LagrangePoint {
        lambda: 0.0,
        distortion: d_max,
        rate: 0.0,
        intercept: 0.0,
        iterations: 0,
        state: Vec::new(),
    };
    let mut lambda = 1.0 / d_max;
    let mut lo_d = loop {
        let warm = (!hi_d.state.is_empty()).then_some(hi_d.state.as_slice());
        let pt = ba_point(p, &dist, k, lambda, inner_tol, opts.max_iter, warm)?;
        iterations += pt.iterations;
        if pt.distortion <= budget {
            break pt;
        }
        hi_d = pt;
        lambda *= 4.0;
        if lambda > 1e30 / d_max {
            return Err(Error::NoConvergence {
                max_iters: iterations,
                residual: hi_d.distortion - budget,
            });
        }
    };

    let mut refinements = 0;
    loop {
        let chord = if hi_d.distortion > lo_d.distortion {
            lo_d.rate
                + (hi_d.rate - lo_d.rate) * (budget - lo_d.distortion)
                    / (hi_d.distortion - lo_d.distortion)
        } else {
            lo_d.rate
        };
        let (t_lo, t_hi) = (lo_d.tangent(budget), hi_d.tangent(budget));
        let lower = t_lo.max(t_hi).max(0.0);
        let gap = (chord - lower).max(0.0);
        if gap <= opts.tol {
            let slope = if t_lo >= t_hi {
                lo_d.lambda
            } else {
                hi_d.lambda
            };
            return Ok(RateResult {
                rate: chord.max(0.0),
                diagnostics: RdSolveDiagnostics {
                    iterations: iterations.max(1),
                    final_gap: gap,
                    lagrange_multiplier: slope,
                },
            });
        }
        refinements += 1;
        if refinements > opts.max_refinements {
            return Err(Error::NoConvergence {
                max_iters: iterations,
                residual: gap,
            });
        }
        let lambda = between(lo_d.lambda, hi_d.lambda);
        let warm = if lo_d.state.is_empty() {
            &hi_d.state
        } else {
            &lo_d.state
        };
        let warm = (!warm.is_empty()).then_some(warm.as_slice());
        let pt = ba_point(p, &dist, k, lambda, inner_tol, opts.max_iter, warm)?;
        iterations += pt.iterations;
        if pt.distortion <= budget {
            lo_d = pt;
        } else {
            hi_d = pt;
        }
    }
}

/// `r(sigma) = R(sigma^2)` on the default reproduction alphabet.
pub fn r_mu(mu: &DiscreteMeasure, sigma: f64, opts: &RdOptions) -> Result<RateResult> {
    ba_rate(mu, sigma * sigma, &default_reproduction(mu), opts)
}

/// [`ba_rate`] over a grid of `sigma` values, fanned out per `opts.exec`.
pub fn r_curve(
    mu: &DiscreteMeasure,
    sigmas: &[f64],
    reproduction: &[Vec<f64>],
    opts: &RdOptions,
) -> Result<Vec<RateResult>> {
    opts.exec
        .try_map(sigmas, |&s| ba_rate(mu, s * s, reproduction, opts))
}

/// One solved point of the double-marginal curve, for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSample {
    pub sigma: f64,
    pub value: f64,
    pub multiplier: f64,
    /// `lambda * |primal - dual|` of the Sinkhorn solve (nats).
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct RdCurve {
    pub curve: MonotoneCurve,
    pub samples: Vec<CurveSample>,
    /// Largest chord-versus-supporting-line gap over the final envelope.
    pub max_gap: f64,
}

/// 40 multipliers log-spaced over `[1e-2, 1e4] / Var(mu)`.
pub fn default_multiplier_grid(mu: &DiscreteMeasure) -> Vec<f64> {
    let var = 0.5 * mu.independent_distortion();
    let scale = if var > 0.0 { 1.0 / var } else { 1.0 };
    log_grid(1e-2 * scale, 1e4 * scale, 40)
}

/// `n` points log-spaced over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|t| (a + (b - a) * t as f64 / (n - 1) as f64).exp())
        .collect()
}

/// The double-marginal curve `sigma -> i(sigma)` by a Lagrangian sweep.
///
/// Starts from `multipliers` and inserts further multipliers wherever the
/// envelope is not yet certified to `opts.tol`. The result has
/// `left_limit = H(mu)` and `support_end = sqrt(E_{mu x mu} d^2)`.
pub fn i_mu_curve(mu: &DiscreteMeasure, multipliers: &[f64], opts: &RdOptions) -> Result<RdCurve> {
    if multipliers.is_empty() {
        return Err(Error::InvalidArgument("empty multiplier grid".into()));
    }
    if multipliers.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::InvalidArgument(
            "multipliers must be positive".into(),
        ));
    }
    if multipliers.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(
            "multiplier grid must be sorted".into(),
        ));
    }
    if mu.len() == 1 {
        return Ok(RdCurve {
            curve: MonotoneCurve::zero(),
            samples: Vec::new(),
            max_gap: 0.0,
        });
    }
    let w = mu.weights();
    let m = mu.len();
    let mut cost = Vec::with_capacity(m * m);
    for x in mu.points() {
        for y in mu.points() {
            cost.push(sq_dist(x, y));
        }
    }
    let entropy = mu.entropy();
    let d_ind = mu.independent_distortion();

    let solve = |lambda: &f64| -> Result<(LagrangePoint, f64)> {
        let sol = sinkhorn::solve(w, w, &cost, 1.0 / lambda, &opts.sinkhorn, None)?;
        let distortion = sol.transport_cost.clamp(0.0, d_ind);
        Ok((
            LagrangePoint {
                lambda: *lambda,
                distortion,
                rate: sol.mutual_info.min(entropy),
                intercept: lambda * sol.dual_value,
                iterations: sol.iterations,
                state: Vec::new(),
            },
            lambda * sol.dual_gap,
        ))
    };

    let mut solved: Vec<(LagrangePoint, f64)> = opts.exec.try_map(multipliers, solve)?;
    if solved.len() >= 2 {
        let d0 = solved[0].0.distortion;
        if solved
            .iter()
            .all(|(p, _)| (p.distortion - d0).abs() <= 1e-14 * d_ind)
        {
            return Err(Error::DegenerateGrid);
        }
    }

    let left = LagrangePoint {
        lambda: f64::INFINITY,
        distortion: 0.0,
        rate: entropy,
        intercept: entropy,
        iterations: 0,
        state: Vec::new(),
    };
    let right = LagrangePoint {
        lambda: 0.0,
        distortion: d_ind,
        rate: 0.0,
        intercept: 0.0,
        iterations: 0,
        state: Vec::new(),
    };

    let mut refinements = 0;
    let max_gap = loop {
        // decreasing lambda = increasing distortion
        solved.sort_by(|a, b| b.0.lambda.total_cmp(&a.0.lambda));
        solved.dedup_by(|a, b| a.0.lambda == b.0.lambda);
        let mut chain: Vec<&LagrangePoint> = Vec::with_capacity(solved.len() + 2);
        chain.push(&left);
        chain.extend(solved.iter().map(|(p, _)| p));
        chain.push(&right);
        let mut worst: f64 = 0.0;
        let mut todo = Vec::new();
        for pair in chain.windows(2) {
            let g = segment_gap(pair[0], pair[1]);
            worst = worst.max(g);
            if g > opts.tol {
                let l = between(pair[0].lambda, pair[1].lambda);
                if l != pair[0].lambda && l != pair[1].lambda {
                    todo.push(l);
                }
            }
        }
        if todo.is_empty() {
            break worst;
        }
        refinements += todo.len();
        if refinements > opts.max_refinements {
            return Err(Error::NoConvergence {
                max_iters: refinements,
                residual: worst,
            });
        }
        solved.extend(opts.exec.try_map(&todo, solve)?);
    };

    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(solved.len() + 2);
    pts.push((0.0, entropy));
    pts.extend(solved.iter().map(|(p, _)| (p.distortion, p.rate)));
    pts.push((d_ind, 0.0));
    let hull = lower_hull(pts);
    let curve = densify(&hull, entropy, d_ind.sqrt())?;

    let mut samples: Vec<CurveSample> = solved
        .iter()
        .map(|(p, gap)| CurveSample {
            sigma: p.distortion.sqrt(),
            value: p.rate,
            multiplier: p.lambda,
            gap: *gap,
        })
        .collect();
    samples.sort_by(|a, b| a.sigma.total_cmp(&b.sigma));
    Ok(RdCurve {
        curve,
        samples,
        max_gap,
    })
}

/// Lower convex hull of points sorted into increasing `x`, keeping the two
/// extreme points.
fn lower_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup_by(|a, b| a.0 == b.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Resamples a hull that is piecewise linear in `D = sigma^2` onto knots in
/// `sigma`, so that linear interpolation in `sigma` tracks the hull.
fn densify(hull: &[(f64, f64)], left_limit: f64, support_end: f64) -> Result<MonotoneCurve> {
    const SUBDIVISIONS: usize = 8;
    const FIRST_SUBDIVISIONS: usize = 64;
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    let mut running = left_limit;
    for (seg, pair) in hull.windows(2).enumerate() {
        let ((d0, v0), (d1, v1)) = (pair[0], pair[1]);
        let (s0, s1) = (d0.sqrt(), d1.sqrt());
        let n = if seg == 0 {
            FIRST_SUBDIVISIONS
        } else {
            SUBDIVISIONS
        };
        for t in 1..=n {
            let s = if t == n {
                s1
            } else {
                s0 + (s1 - s0) * t as f64 / n as f64
            };
            if s <= xs.last().copied().unwrap_or(0.0) {
                continue;
            }
            let d = s * s;
            let v = if d1 > d0 {
                v0 + (v1 - v0) * (d - d0) / (d1 - d0)
            } else {
                v1
            };
            running = running.min(v.max(0.0));
            let v = if s >= support_end { 0.0 } else { running };
            xs.push(s);
            vs.push(v);
        }
    }
    MonotoneCurve::new(xs, vs, left_limit, support_end)
}
