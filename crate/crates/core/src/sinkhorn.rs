//! Log-domain Sinkhorn iteration for
//!
//! ```text
//! min_{P in Pi(a, b)}  <C, P> + eps * KL(P || a x b)
//! ```
//!
//! With fixed marginals `KL(P || a x b)` is exactly the mutual information of
//! `P`, so one solver serves both the regularized transport value and the
//! Lagrangian form of the double-marginal rate-distortion curve.
//!
//! The plan is parameterized as `P_ij = a_i b_j exp((f_i + g_j - C_ij) / eps)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    /// Stop once the L1 row-marginal violation is at most this.
    pub tol: f64,
    pub max_iter: usize,
    /// Over-relaxation factor in `[1, 2)`; `1` is plain Sinkhorn.
    pub relaxation: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        SinkhornOptions {
            tol: 1e-9,
            max_iter: 200_000,
            relaxation: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornSolution {
    /// Row-major `m x k` plan, rounded onto the exact marginals.
    pub plan: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub iterations: usize,
    /// L1 row violation of the unrounded iterate when the loop stopped.
    pub marginal_violation: f64,
    /// `<C, P>`.
    pub transport_cost: f64,
    /// `KL(P || a x b)` of the rounded plan.
    pub mutual_info: f64,
    /// Dual objective `<a, f> + <b, g>`; a lower bound on the optimum up to
    /// the marginal violation.
    pub dual_value: f64,
    /// `|primal - dual|` measured on the unrounded iterate.
    pub dual_gap: f64,
}

impl SinkhornSolution {
    pub fn primal_value(&self, eps: f64) -> f64 {
        self.transport_cost + eps * self.mutual_info
    }
}

/// Runs Sinkhorn on a row-major cost matrix.
///
/// `warm` optionally seeds the potentials `(f, g)` from a nearby solve.
pub fn solve(
    a: &[f64],
    b: &[f64],
    cost: &[f64],
    eps: f64,
    opts: &SinkhornOptions,
    warm: Option<(&[f64], &[f64])>,
) -> Result<SinkhornSolution> {
    let (m, k) = (a.len(), b.len());
    if m == 0 || k == 0 {
        return Err(Error::EmptySupport);
    }
    if cost.len() != m * k {
        return Err(Error::InvalidArgument(format!(
            "cost has {} entries, expected {m}x{k}",
            cost.len()
        )));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "regularization {eps} must be > 0"
        )));
    }
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let (mut f, mut g) = match warm {
        Some((f0, g0)) if f0.len() == m && g0.len() == k => (f0.to_vec(), g0.to_vec()),
        _ => (vec![0.0; m], vec![0.0; k]),
    };
    let inv_eps = 1.0 / eps;
    let mut scratch = vec![0.0; m.max(k)];
    let mut new_f = vec![0.0; m];

    let mut violation = f64::INFINITY;
    let mut iterations = 0;
    // columns first so the first row check is meaningful
    update_g(&log_a, cost, &f, &mut g, eps, inv_eps, k, &mut scratch);
    while iterations < opts.max_iter {
        iterations += 1;
        violation = 0.0;
        for i in 0..m {
            let row = &cost[i * k..(i + 1) * k];
            let lse = log_sum_exp(
                (0..k).map(|j| log_b[j] + (g[j] - row[j]) * inv_eps),
                &mut scratch,
            );
            new_f[i] = -eps * lse;
            if a[i] > 0.0 {
                // row sum under the current (f, g) is a_i exp((f_i - new_f_i) / eps)
                violation += a[i] * ((f[i] - new_f[i]) * inv_eps).exp_m1().abs();
            }
        }
        if !violation.is_finite() || new_f.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalUnderflow);
        }
        if violation <= opts.tol {
            break;
        }
        let w = opts.relaxation;
        if w == 1.0 {
            std::mem::swap(&mut f, &mut new_f);
            update_g(&log_a, cost, &f, &mut g, eps, inv_eps, k, &mut scratch);
        } else {
            for (fi, nf) in f.iter_mut().zip(&new_f) {
                *fi = (1.0 - w) * *fi + w * nf;
            }
            let old_g = g.clone();
            update_g(&log_a, cost, &f, &mut g, eps, inv_eps, k, &mut scratch);
            for (gj, og) in g.iter_mut().zip(&old_g) {
                *gj = (1.0 - w) * og + w * *gj;
            }
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalUnderflow);
        }
    }
    if violation > opts.tol {
        return Err(Error::NoConvergence {
            max_iters: opts.max_iter,
            residual: violation,
        });
    }

    let mut plan = vec![0.0; m * k];
    let mut transport_cost = 0.0;
    let mut kl = 0.0;
    let mut mass = 0.0;
    for i in 0..m {
        if a[i] == 0.0 {
            continue;
        }
        for j in 0..k {
            if b[j] == 0.0 {
                continue;
            }
            let c = cost[i * k + j];
            let log_ratio = (f[i] + g[j] - c) * inv_eps;
            let p = a[i] * b[j] * log_ratio.exp();
            plan[i * k + j] = p;
            transport_cost += p * c;
            kl += p * log_ratio;
            mass += p;
        }
    }
    let dual_value: f64 = dot(a, &f) + dot(b, &g);
    let dual_gap = (transport_cost + eps * kl - dual_value - eps * (mass - 1.0)).abs();

    round_to_marginals(&mut plan, a, b);
    let mut transport_cost = 0.0;
    let mut mutual_info = 0.0;
    for i in 0..m {
        for j in 0..k {
            let p = plan[i * k + j];
            if p > 0.0 {
                transport_cost += p * cost[i * k + j];
                mutual_info += p * (p / (a[i] * b[j])).ln();
            }
        }
    }

    Ok(SinkhornSolution {
        plan,
        f,
        g,
        iterations,
        marginal_violation: violation,
        transport_cost,
        mutual_info: mutual_info.max(0.0),
        dual_value,
        dual_gap,
    })
}

#[allow(clippy::too_many_arguments)]
fn update_g(
    log_a: &[f64],
    cost: &[f64],
    f: &[f64],
    g: &mut [f64],
    eps: f64,
    inv_eps: f64,
    k: usize,
    scratch: &mut [f64],
) {
    let m = log_a.len();
    for (j, gj) in g.iter_mut().enumerate() {
        let lse = log_sum_exp(
            (0..m).map(|i| log_a[i] + (f[i] - cost[i * k + j]) * inv_eps),
            scratch,
        );
        *gj = -eps * lse;
    }
}

/// `ln sum exp(x)` over the iterator, skipping `-inf` terms.
fn log_sum_exp<I: Iterator<Item = f64>>(xs: I, scratch: &mut [f64]) -> f64 {
    let mut n = 0;
    let mut max = f64::NEG_INFINITY;
    for x in xs {
        scratch[n] = x;
        n += 1;
        if x > max {
            max = x;
        }
    }
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: f64 = scratch[..n].iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, v)| w * v)
        .sum()
}

/// Projects a nonnegative plan onto `Pi(a, b)` by scaling down overfull rows
/// and columns and then adding a rank-one correction (Altschuler, Weed and
/// Rigollet). The change is bounded by the marginal violation.
pub fn round_to_marginals(plan: &mut [f64], a: &[f64], b: &[f64]) {
    let (m, k) = (a.len(), b.len());
    for i in 0..m {
        let row = &mut plan[i * k..(i + 1) * k];
        let s: f64 = row.iter().sum();
        if s > a[i] && s > 0.0 {
            let scale = a[i] / s;
            row.iter_mut().for_each(|p| *p *= scale);
        }
    }
    let mut col = vec![0.0; k];
    for i in 0..m {
        for j in 0..k {
            col[j] += plan[i * k + j];
        }
    }
    for j in 0..k {
        if col[j] > b[j] && col[j] > 0.0 {
            let scale = b[j] / col[j];
            for i in 0..m {
                plan[i * k + j] *= scale;
            }
        }
    }
    let mut err_r = vec![0.0; m];
    let mut err_c = b.to_vec();
    for i in 0..m {
        let mut s = 0.0;
        for j in 0..k {
            let p = plan[i * k + j];
            s += p;
            err_c[j] -= p;
        }
        err_r[i] = (a[i] - s).max(0.0);
    }
    err_c.iter_mut().for_each(|e| *e = e.max(0.0));
    let total: f64 = err_r.iter().sum();
    if total > 0.0 {
        for i in 0..m {
            if err_r[i] == 0.0 {
                continue;
            }
            for j in 0..k {
                plan[i * k + j] += err_r[i] * err_c[j] / total;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn marginals(plan: &[f64], m: usize, k: usize) -> (Vec<f64>, Vec<f64>) {
        let mut r = vec![0.0; m];
        let mut c = vec![0.0; k];
        for i in 0..m {
            for j in 0..k {
                r[i] += plan[i * k + j];
                c[j] += plan[i * k + j];
            }
        }
        (r, c)
    }

    #[test]
    fn zero_cost_gives_product() {
        let a = [0.2, 0.8];
        let b = [0.5, 0.3, 0.2];
        let sol = solve(&a, &b, &[0.0; 6], 1.0, &SinkhornOptions::default(), None).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert_abs_diff_eq!(sol.plan[i * 3 + j], a[i] * b[j], epsilon = 1e-12);
            }
        }
        assert!(sol.mutual_info < 1e-12);
    }

    #[test]
    fn two_by_two_matches_scalar_optimum() {
        // uniform marginals, cost 1 off the diagonal: plan [[q,1/2-q],[1/2-q,q]]/...
        // objective 2(1/2-q) + eps * (ln2 - H_b(2q)), stationary at 2q = 1/(1+e^{-1/eps})
        let eps = 0.7;
        let a = [0.5, 0.5];
        let sol = solve(
            &a,
            &a,
            &[0.0, 1.0, 1.0, 0.0],
            eps,
            &SinkhornOptions::default(),
            None,
        )
        .unwrap();
        let s = 1.0 / (1.0 + (-1.0 / eps).exp());
        assert_abs_diff_eq!(sol.plan[0] * 2.0, s, epsilon = 1e-9);
        assert!(sol.dual_gap < 1e-8);
    }

    #[test]
    fn rounding_restores_exact_marginals() {
        let a = [0.3, 0.7];
        let b = [0.6, 0.4];
        let mut plan = vec![0.2, 0.15, 0.35, 0.3];
        round_to_marginals(&mut plan, &a, &b);
        let (r, c) = marginals(&plan, 2, 2);
        for (x, y) in r.iter().zip(&a) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
        for (x, y) in c.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
        assert!(plan.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn zero_weight_atoms_are_ignored() {
        let a = [0.0, 1.0];
        let b = [0.5, 0.5];
        let sol = solve(
            &a,
            &b,
            &[0.0, 1.0, 1.0, 0.0],
            0.3,
            &SinkhornOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(sol.plan[0], 0.0);
        assert_eq!(sol.plan[1], 0.0);
        assert_abs_diff_eq!(sol.plan[2], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let a = [0.5, 0.5];
        let opts = SinkhornOptions {
            tol: 1e-15,
            max_iter: 1,
            ..SinkhornOptions::default()
        };
        let r = solve(&[0.3, 0.7], &a, &[0.0, 1.0, 1.0, 0.0], 0.1, &opts, None);
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }
}
