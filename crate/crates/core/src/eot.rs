//! Information-regularized and information-constrained transport with the
//! inner-product objective:
//!
//! ```text
//! f(beta) = sup_{P in Pi(gamma, mu)} E<Y, Z> - beta I(Y; Z)
//! w(R)    = sup_{P in Pi(gamma, mu), I(Y;Z) <= R} E<Y, Z>
//! ```
//!
//! `f` is solved directly by Sinkhorn on the cost `-<y, z>`; `w` by bisection
//! on `beta` using `w(R) = inf_beta { f(beta) + beta R }`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::measure::{dot, CouplingMatrix, DiscreteMeasure};
use crate::sinkhorn::{self, SinkhornOptions, SinkhornSolution};

#[derive(Debug, Clone, Copy)]
pub struct EotOptions {
    pub sinkhorn: SinkhornOptions,
    /// Target width of the `w` duality bracket.
    pub value_tol: f64,
    pub max_bisections: usize,
    pub exec: Exec,
}

impl Default for EotOptions {
    fn default() -> Self {
        EotOptions {
            sinkhorn: SinkhornOptions::default(),
            value_tol: 1e-6,
            max_bisections: 200,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EotDiagnostics {
    pub iterations: usize,
    pub marginal_violation: f64,
    pub dual_gap: f64,
}

#[derive(Debug, Clone)]
pub struct EotSolution {
    pub plan: CouplingMatrix,
    /// `E<Y, Z>`.
    pub inner_product: f64,
    /// `I(Y; Z)` in nats.
    pub mutual_info: f64,
    /// `inner_product - beta * mutual_info`.
    pub f_value: f64,
    pub beta: f64,
    pub diagnostics: EotDiagnostics,
    potentials: (Vec<f64>, Vec<f64>),
}

/// Result of [`w_constrained`].
#[derive(Debug, Clone, Serialize)]
pub struct WSolution {
    /// `min f(beta) + beta R` over the multipliers visited (the feasible
    /// primal value when the constraint is slack at the smallest multiplier).
    pub value: f64,
    /// Best feasible primal value found (`I <= R`); `value - primal_lower` is
    /// the certified gap.
    pub primal_lower: f64,
    /// Multiplier achieving `value`; `None` for `R = 0` (product coupling),
    /// `Some(0.0)` when the constraint cannot bind.
    pub beta: Option<f64>,
    /// Mutual information of the plan at the achieving multiplier.
    pub mutual_info: f64,
    pub bisections: usize,
}

fn inner_product_cost(gamma: &DiscreteMeasure, mu: &DiscreteMeasure) -> Result<Vec<f64>> {
    if gamma.dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            index: 0,
            expected: gamma.dim(),
            found: mu.dim(),
        });
    }
    let mut cost = Vec::with_capacity(gamma.len() * mu.len());
    for y in gamma.points() {
        for z in mu.points() {
            cost.push(-dot(y, z));
        }
    }
    Ok(cost)
}

fn assemble(
    gamma: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    beta: f64,
    sol: SinkhornSolution,
) -> Result<EotSolution> {
    let inner_product = -sol.transport_cost;
    let mutual_info = sol.mutual_info;
    let diagnostics = EotDiagnostics {
        iterations: sol.iterations,
        marginal_violation: sol.marginal_violation,
        dual_gap: sol.dual_gap,
    };
    let plan = CouplingMatrix::new(gamma.clone(), mu.clone(), sol.plan)?;
    Ok(EotSolution {
        plan,
        inner_product,
        mutual_info,
        f_value: inner_product - beta * mutual_info,
        beta,
        diagnostics,
        potentials: (sol.f, sol.g),
    })
}

fn solve_with(
    gamma: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    cost: &[f64],
    beta: f64,
    opts: &SinkhornOptions,
    warm: Option<&EotSolution>,
) -> Result<EotSolution> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta {beta} must be > 0")));
    }
    let warm = warm.map(|s| (s.potentials.0.as_slice(), s.potentials.1.as_slice()));
    let sol = sinkhorn::solve(gamma.weights(), mu.weights(), cost, beta, opts, warm)?;
    assemble(gamma, mu, beta, sol)
}

/// Regularized value `f(gamma, mu, beta)` by log-domain Sinkhorn.
pub fn sinkhorn_f(
    gamma: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    beta: f64,
    opts: &EotOptions,
) -> Result<EotSolution> {
    let cost = inner_product_cost(gamma, mu)?;
    solve_with(gamma, mu, &cost, beta, &opts.sinkhorn, None)
}

/// [`sinkhorn_f`] over a grid of multipliers, fanned out per `opts.exec`.
pub fn f_curve(
    gamma: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    betas: &[f64],
    opts: &EotOptions,
) -> Result<Vec<EotSolution>> {
    if betas.is_empty() {
        return Err(Error::InvalidArgument("empty beta grid".into()));
    }
    if betas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("beta grid must be sorted".into()));
    }
    let cost = inner_product_cost(gamma, mu)?;
    opts.exec.try_map(betas, |&b| {
        solve_with(gamma, mu, &cost, b, &opts.sinkhorn, None)
    })
}

/// Constrained value `w(gamma, mu, R)`.
///
/// Bisects `ln beta` inside `[1e-4, 1e4] * sqrt(m2(gamma) m2(mu))` for the
/// multiplier whose optimizer has `I = R`, keeping the dual upper bound
/// `f(beta) + beta R` and the best feasible primal value as a certificate.
/// When `R >= min(H(gamma), H(mu))` the constraint cannot bind; in one
/// dimension that case is solved exactly by the comonotone coupling.
pub fn w_constrained(
    gamma: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    rate: f64,
    opts: &EotOptions,
) -> Result<WSolution> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::InvalidArgument(format!("rate {rate} must be >= 0")));
    }
    let cost = inner_product_cost(gamma, mu)?;
    let independent = dot(&gamma.mean(), &mu.mean());
    let product_point = WSolution {
        value: independent,
        primal_lower: independent,
        beta: None,
        mutual_info: 0.0,
        bisections: 0,
    };
    if rate == 0.0 || gamma.len() == 1 || mu.len() == 1 {
        return Ok(product_point);
    }
    let max_info = gamma.entropy().min(mu.entropy());
    if rate >= max_info && gamma.dim() == 1 {
        let v = comonotone_inner_product(gamma, mu);
        return Ok(WSolution {
            value: v,
            primal_lower: v,
            beta: Some(0.0),
            mutual_info: f64::NAN,
            bisections: 0,
        });
    }

    let scale = (gamma.second_moment() * mu.second_moment()).sqrt();
    let (lo, hi) = (1e-4 * scale, 1e4 * scale);
    let sk = &opts.sinkhorn;

    let mut bounds = DualBracket::new(rate, independent);
    let solve_at =
        |beta: f64, warm: Option<&EotSolution>| solve_with(gamma, mu, &cost, beta, sk, warm);

    // expand by decades from beta = scale until I(beta) straddles R; the
    // infeasible side (I > R) sits at small beta
    let first = solve_at(scale, None)?;
    bounds.record(&first);
    let (mut infeasible, mut feasible) = if first.mutual_info > rate {
        let mut infeasible = first;
        let mut feasible = None;
        while infeasible.beta < hi {
            let s = solve_at(infeasible.beta * 10.0, Some(&infeasible))?;
            bounds.record(&s);
            if s.mutual_info <= rate {
                feasible = Some(s);
                break;
            }
            infeasible = s;
        }
        (infeasible, feasible)
    } else {
        let mut feasible = first;
        loop {
            if feasible.beta <= lo {
                // slack even at the smallest multiplier: the dual bound is
                // loose by lo * (R - I), so report the feasible primal value
                return Ok(WSolution {
                    value: bounds.lower,
                    primal_lower: bounds.lower,
                    beta: Some(feasible.beta),
                    mutual_info: feasible.mutual_info,
                    bisections: bounds.solves,
                });
            }
            let s = solve_at(feasible.beta / 10.0, Some(&feasible))?;
            bounds.record(&s);
            if s.mutual_info > rate {
                break (s, Some(feasible));
            }
            feasible = s;
        }
    };

    loop {
        if bounds.upper - bounds.lower <= opts.value_tol {
            break;
        }
        if bounds.solves >= opts.max_bisections {
            return Err(Error::BisectionStall {
                iterations: bounds.solves,
            });
        }
        let b_hi = feasible.as_ref().map_or(hi * 1e4, |s| s.beta);
        let b_lo = infeasible.beta;
        if b_hi / b_lo - 1.0 < 1e-12 {
            break;
        }
        let beta = (b_lo * b_hi).sqrt();
        let warm = match &feasible {
            Some(f) if (f.beta / beta) < (beta / b_lo) => f,
            _ => &infeasible,
        };
        let s = solve_at(beta, Some(warm))?;
        bounds.record(&s);
        if s.mutual_info <= rate {
            feasible = Some(s);
        } else {
            infeasible = s;
        }
    }
    Ok(WSolution {
        value: bounds.upper,
        primal_lower: bounds.lower,
        beta: bounds.beta,
        mutual_info: bounds.info,
        bisections: bounds.solves,
    })
}

/// Running duality bracket for `w(R)`: the smallest `f(beta) + beta R` seen
/// and the largest feasible `E<Y, Z>`.
struct DualBracket {
    rate: f64,
    upper: f64,
    lower: f64,
    beta: Option<f64>,
    info: f64,
    solves: usize,
}

impl DualBracket {
    fn new(rate: f64, independent: f64) -> Self {
        DualBracket {
            rate,
            upper: f64::INFINITY,
            lower: independent,
            beta: None,
            info: 0.0,
            solves: 0,
        }
    }

    fn record(&mut self, s: &EotSolution) {
        self.solves += 1;
        let dual = s.f_value + s.beta * self.rate;
        if dual < self.upper {
            self.upper = dual;
            self.beta = Some(s.beta);
            self.info = s.mutual_info;
        }
        if s.mutual_info <= self.rate {
            self.lower = self.lower.max(s.inner_product);
        }
    }
}

/// `sup E[YZ]` over all couplings of two measures on the line: the quantile
/// coupling of the sorted supports.
pub fn comonotone_inner_product(gamma: &DiscreteMeasure, mu: &DiscreteMeasure) -> f64 {
    let sorted = |m: &DiscreteMeasure| {
        let mut v: Vec<(f64, f64)> = m
            .points()
            .iter()
            .zip(m.weights())
            .map(|(p, &w)| (p[0], w))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let (ys, zs) = (sorted(gamma), sorted(mu));
    let (mut i, mut j) = (0, 0);
    let (mut ry, mut rz) = (ys[0].1, zs[0].1);
    let mut acc = 0.0;
    while i < ys.len() && j < zs.len() {
        let t = ry.min(rz);
        acc += t * ys[i].0 * zs[j].0;
        ry -= t;
        rz -= t;
        if ry <= 0.0 {
            i += 1;
            if i < ys.len() {
                ry = ys[i].1;
            }
        }
        if rz <= 0.0 {
            j += 1;
            if j < zs.len() {
                rz = zs[j].1;
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::quantize_gaussian;
    use crate::oracles::{gaussian_f, gaussian_w};
    use approx::assert_abs_diff_eq;

    fn uniform01() -> DiscreteMeasure {
        DiscreteMeasure::uniform(vec![vec![0.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn huge_beta_gives_product() {
        let g = quantize_gaussian(1, 16).unwrap();
        let s = sinkhorn_f(&g, &g, 1e6, &EotOptions::default()).unwrap();
        assert!(s.inner_product.abs() < 1e-5);
        assert!(s.f_value.abs() < 1e-5);
        assert!(s.f_value >= -1e-9);
    }

    #[test]
    fn point_mass_mu() {
        let g = quantize_gaussian(1, 8).unwrap();
        let mu = DiscreteMeasure::point_mass(vec![2.5]).unwrap();
        let s = sinkhorn_f(&g, &mu, 0.5, &EotOptions::default()).unwrap();
        assert_abs_diff_eq!(s.f_value, 0.0, epsilon = 1e-12);
        assert!(s.mutual_info < 1e-12);
        let w = w_constrained(&g, &mu, 1.0, &EotOptions::default()).unwrap();
        assert_abs_diff_eq!(w.value, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn solution_invariants() {
        let g = quantize_gaussian(1, 32).unwrap();
        let s = sinkhorn_f(&g, &uniform01(), 0.3, &EotOptions::default()).unwrap();
        assert!(s.mutual_info >= 0.0);
        assert_abs_diff_eq!(
            s.f_value,
            s.inner_product - 0.3 * s.mutual_info,
            epsilon = 1e-12
        );
        assert!(s.f_value >= -1e-9);
        assert!(s.plan.marginal_violation() <= 1e-10);
        assert_abs_diff_eq!(s.plan.mutual_information(), s.mutual_info, epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let g = quantize_gaussian(2, 2).unwrap();
        assert!(matches!(
            sinkhorn_f(&g, &uniform01(), 1.0, &EotOptions::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rate_zero_is_product() {
        let g = quantize_gaussian(1, 16).unwrap();
        let w = w_constrained(&g, &g, 0.0, &EotOptions::default()).unwrap();
        assert_abs_diff_eq!(w.value, 0.0, epsilon = 1e-15);
        assert_eq!(w.beta, None);
    }

    #[test]
    fn unconstrained_rate_uses_comonotone_coupling() {
        let g = quantize_gaussian(1, 256).unwrap();
        let w = w_constrained(&g, &g, 1e3, &EotOptions::default()).unwrap();
        assert_abs_diff_eq!(w.value, g.second_moment(), epsilon = 1e-12);
        assert!((w.value - 1.0).abs() < 0.01);
    }

    #[test]
    fn w_matches_gaussian_oracle_at_half_ln2() {
        let g = quantize_gaussian(1, 64).unwrap();
        let r = 0.5 * 2f64.ln();
        let w = w_constrained(&g, &g, r, &EotOptions::default()).unwrap();
        assert!(w.value - w.primal_lower <= 1e-6);
        assert!((w.value - gaussian_w(r)).abs() < 0.01, "{}", w.value);
    }

    #[test]
    fn f_curve_small_grid() {
        let g = quantize_gaussian(1, 64).unwrap();
        let sols = f_curve(&g, &g, &[0.5, 1.0, 2.0], &EotOptions::default()).unwrap();
        for s in &sols {
            let o = gaussian_f(s.beta).f;
            assert!(
                (s.f_value / o - 1.0).abs() < 0.02,
                "beta {}: {} vs {o}",
                s.beta,
                s.f_value
            );
        }
        assert!(sols.windows(2).all(|w| w[1].f_value <= w[0].f_value));
        let one = f_curve(&g, &g, &[0.7], &EotOptions::default()).unwrap();
        assert_eq!(one.len(), 1);
        assert!(f_curve(&g, &g, &[1.0, 0.5], &EotOptions::default()).is_err());
    }
}
