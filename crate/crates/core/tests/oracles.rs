//! Cross-checks against independent oracles: brute-force scans, closed
//! forms and exhaustive enumeration.

use approx::assert_abs_diff_eq;
use rdot_core::eot::{self, EotOptions};
use rdot_core::integrals;
use rdot_core::measure::{product_measure, quantize_gaussian};
use rdot_core::oracles::{gaussian_f, gaussian_w};
use rdot_core::rate_distortion::{self, RdOptions};
use rdot_core::types::{self, TypeSpec, DEFAULT_L_CAP};
use rdot_core::{DiscreteMeasure, Exec};

fn line(pts: &[f64], w: &[f64]) -> DiscreteMeasure {
    DiscreteMeasure::new(pts.iter().map(|&x| vec![x]).collect(), w.to_vec()).unwrap()
}

fn h_b(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
    }
}

fn uniform01() -> DiscreteMeasure {
    line(&[0.0, 1.0], &[0.5, 0.5])
}

/// `I(X; U)` and `E d^2` of a channel given row-wise as `P(U = u_1 | x)`.
fn binary_channel(p: &[f64], xs: &[f64], us: [f64; 2], t: &[f64]) -> (f64, f64) {
    let q1: f64 = p.iter().zip(t).map(|(pi, ti)| pi * ti).sum();
    let q = [1.0 - q1, q1];
    let (mut info, mut dist) = (0.0, 0.0);
    for ((&pi, &ti), &x) in p.iter().zip(t).zip(xs) {
        for (k, c) in [1.0 - ti, ti].into_iter().enumerate() {
            if c > 0.0 {
                info += pi * c * (c / q[k]).ln();
                dist += pi * c * (x - us[k]).powi(2);
            }
        }
    }
    (info, dist)
}

#[test]
fn blahut_arimoto_matches_exhaustive_channel_scan() {
    let xs = [0.0, 1.0, 2.5];
    let p = [0.3, 0.45, 0.25];
    let us = [0.2, 2.0];
    let mu = line(&xs, &p);
    let rep = vec![vec![us[0]], vec![us[1]]];
    for budget in [0.45, 0.7, 1.0] {
        // grid over the three free transition probabilities, then a local
        // pattern search from the best grid point
        let steps = 100;
        let mut best = (f64::INFINITY, [0.0; 3]);
        for a in 0..=steps {
            for b in 0..=steps {
                for c in 0..=steps {
                    let t = [
                        a as f64 / steps as f64,
                        b as f64 / steps as f64,
                        c as f64 / steps as f64,
                    ];
                    let (i, d) = binary_channel(&p, &xs, us, &t);
                    if d <= budget && i < best.0 {
                        best = (i, t);
                    }
                }
            }
        }
        let mut h = 0.01;
        while h > 1e-7 {
            let mut improved = false;
            for k in 0..3 {
                for sgn in [-1.0, 1.0] {
                    let mut t = best.1;
                    t[k] = (t[k] + sgn * h).clamp(0.0, 1.0);
                    let (i, d) = binary_channel(&p, &xs, us, &t);
                    if d <= budget && i < best.0 {
                        best = (i, t);
                        improved = true;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        let opts = RdOptions {
            tol: 1e-4,
            ..RdOptions::default()
        };
        let ba = rate_distortion::ba_rate(&mu, budget, &rep, &opts)
            .unwrap()
            .rate;
        assert!(
            (ba - best.0).abs() <= 5e-3,
            "budget {budget}: BA {ba} vs scan {}",
            best.0
        );
        assert!(ba <= best.0 + 1e-4);
    }
}

#[test]
fn binary_double_marginal_value_from_coupling_scan() {
    // couplings of uniform{0,1} with itself: off-diagonal mass t, distortion t
    let scan = |sigma: f64| {
        (0..=100_000)
            .map(|k| k as f64 / 100_000.0)
            .filter(|&t| t <= sigma * sigma)
            .map(|t| 2f64.ln() - h_b(t))
            .fold(f64::INFINITY, f64::min)
    };
    let pinned = 0.130812;
    assert_abs_diff_eq!(scan(0.5), pinned, epsilon = 1e-6);
    let c = rate_distortion::i_mu_curve(
        &uniform01(),
        &rate_distortion::default_multiplier_grid(&uniform01()),
        &RdOptions::default(),
    )
    .unwrap();
    assert!((c.curve.eval(0.5) - pinned).abs() < 2e-3);
    assert!(c.curve.eval(0.5) >= 0.130812 - 1e-4 && c.curve.eval(0.5) <= 0.55452);
    assert_abs_diff_eq!(c.curve.left_limit(), 2f64.ln(), epsilon = 1e-6);
    assert_eq!(c.curve.eval(0.5f64.sqrt()), 0.0);
}

#[test]
fn binary_integral_functionals() {
    let c = rate_distortion::i_mu_curve(
        &uniform01(),
        &rate_distortion::default_multiplier_grid(&uniform01()),
        &RdOptions::default(),
    )
    .unwrap()
    .curve;
    // high-precision quadrature of sqrt(ln2 - H_b(s^2)) over (0, 1/sqrt2)
    assert!((integrals::truncated_rd_integral(&c, 10.0) - 0.3652358).abs() < 2e-3);
    // phi(1): minimizer D = 1 / (1 + e)
    assert!((integrals::phi(&c, 1.0) - 0.3798855).abs() < 1e-3);
    let cap = integrals::truncated_rd_integral(&c, 2f64.ln());
    assert_abs_diff_eq!(
        cap,
        integrals::truncated_rd_integral(&c, 10.0),
        epsilon = 1e-12
    );
}

#[test]
fn quantized_gaussian_approaches_oracle_from_below() {
    let opts = EotOptions::default();
    let mut prev = f64::NEG_INFINITY;
    for bins in [16, 64, 256] {
        let g = quantize_gaussian(1, bins).unwrap();
        let f = eot::sinkhorn_f(&g, &g, 1.0, &opts).unwrap();
        assert!(f.f_value > prev, "{bins} bins");
        assert!(f.f_value < gaussian_f(1.0).f);
        prev = f.f_value;
    }
    assert!((prev / gaussian_f(1.0).f - 1.0).abs() < 2e-3);
    let g = quantize_gaussian(1, 256).unwrap();
    let f = eot::sinkhorn_f(&g, &g, 1.0, &opts).unwrap();
    assert!((f.inner_product - 0.61803).abs() < 5e-3);
    assert!((f.mutual_info - 0.24061).abs() < 5e-3);
}

#[test]
fn gaussian_oracle_duality_closure() {
    // f(beta) = sup_R { w(R) - beta R } by a golden-section search in R
    for beta in [0.1, 0.5, 1.0, 3.0] {
        let g = |r: f64| gaussian_w(r) - beta * r;
        let (mut a, mut b) = (0.0, 20.0);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let (c, d) = (b - phi * (b - a), a + phi * (b - a));
            if g(c) > g(d) {
                b = d;
            } else {
                a = c;
            }
        }
        assert_abs_diff_eq!(g(0.5 * (a + b)), gaussian_f(beta).f, epsilon = 1e-8);
    }
}

#[test]
fn product_of_quantized_gaussians_tensorizes() {
    let g = quantize_gaussian(1, 16).unwrap();
    let gg = product_measure(&g, &g).unwrap();
    let opts = EotOptions::default();
    for beta in [0.5, 2.0] {
        let one = eot::sinkhorn_f(&g, &g, beta, &opts).unwrap().f_value;
        let two = eot::sinkhorn_f(&gg, &gg, beta, &opts).unwrap().f_value;
        assert_abs_diff_eq!(two, 2.0 * one, epsilon = 1e-6);
    }
}

#[test]
fn legendre_inequality_between_f_and_w() {
    let g = quantize_gaussian(1, 32).unwrap();
    let mu = line(&[-1.0, 0.5, 2.0], &[0.25, 0.5, 0.25]);
    let opts = EotOptions::default();
    let betas = [0.3, 1.0, 3.0];
    let rates = [0.05, 0.2, 0.6];
    let fs = eot::f_curve(&g, &mu, &betas, &opts).unwrap();
    let ws: Vec<f64> = rates
        .iter()
        .map(|&r| eot::w_constrained(&g, &mu, r, &opts).unwrap().value)
        .collect();
    for (f, b) in fs.iter().zip(betas) {
        for (w, r) in ws.iter().zip(rates) {
            assert!(f.f_value >= w - b * r - 1e-6, "beta {b}, R {r}");
        }
        // equality at the optimizer's own rate
        let w_at = eot::w_constrained(&g, &mu, f.mutual_info, &opts)
            .unwrap()
            .value;
        assert!((f.f_value - (w_at - b * f.mutual_info)).abs() < 1e-5);
    }
    // w nondecreasing and concave along the rate grid
    let dense: Vec<f64> = (0..8)
        .map(|k| {
            eot::w_constrained(&g, &mu, 0.1 * k as f64, &opts)
                .unwrap()
                .value
        })
        .collect();
    for w in dense.windows(3) {
        assert!(w[1] >= w[0] - 1e-6 && w[2] >= w[1] - 1e-6);
        assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-5);
    }
}

#[test]
fn gaussian_phi_tail_is_finite_and_comparable_to_f() {
    let g = quantize_gaussian(1, 16).unwrap();
    let c = rate_distortion::i_mu_curve(
        &g,
        &rate_distortion::default_multiplier_grid(&g),
        &RdOptions::default(),
    )
    .unwrap();
    let tail = integrals::phi_tail_integral(&c.curve, 0.0).unwrap();
    assert!(tail.is_finite() && tail > 0.0);
    let f = eot::sinkhorn_f(&g, &g, 1e-1, &EotOptions::default()).unwrap();
    let ratio = f.f_value / tail;
    assert!((0.05..20.0).contains(&ratio), "ratio {ratio}");
    // far beyond the support the tail is the exact envelope
    let t = 1e3;
    let se = c.curve.support_end();
    assert_abs_diff_eq!(
        integrals::phi_tail_integral(&c.curve, t).unwrap(),
        se * se / t,
        epsilon = 1e-12
    );
}

#[test]
fn equi_closed_forms() {
    // y = e^{-x}: a^2 = x e^{2x} parametrizes the minimizer, giving 2 sqrt(pi)
    let xs: Vec<f64> = (1..=8000).map(|k| k as f64 * 0.005).collect();
    let exp = rdot_core::MonotoneCurve::from_fn(
        xs,
        |x| if x >= 40.0 { 0.0 } else { (-x).exp() },
        1.0,
        40.0,
    )
    .unwrap();
    let r = integrals::equi_check(&exp).unwrap();
    assert!(
        (r.ratio - 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-3,
        "{r:?}"
    );
    // y = (1 - x)_+: the infimal value is 1 / (1 + a^2), giving pi
    let tri =
        rdot_core::MonotoneCurve::new(vec![1e-12, 0.5], vec![1.0 - 1e-12, 0.5], 1.0, 1.0).unwrap();
    let r = integrals::equi_check(&tri).unwrap();
    assert!((r.ratio - std::f64::consts::PI).abs() < 1e-6, "{r:?}");
}

#[test]
fn lifting_at_zero_rate_matches_product_expectation() {
    let g = TypeSpec::new(vec![vec![-1.0], vec![2.0]], vec![6, 4]).unwrap();
    let mu = TypeSpec::new(vec![vec![0.5], vec![3.0]], vec![5, 5]).unwrap();
    let e =
        types::simulate_lifting(&g, &mu, 0.0, 4000, 11, DEFAULT_L_CAP, Exec::default()).unwrap();
    assert_eq!(e.l, 1);
    let expected = g.mean()[0] * mu.mean()[0];
    assert!(
        (e.mean - expected).abs() <= 3.0 * e.std_error,
        "{e:?} vs {expected}"
    );
}

#[test]
fn lifting_is_invariant_under_alphabet_order() {
    let a = TypeSpec::new(vec![vec![-1.0], vec![0.5], vec![1.0]], vec![3, 3, 4]).unwrap();
    let b = TypeSpec::new(vec![vec![1.0], vec![-1.0], vec![0.5]], vec![4, 3, 3]).unwrap();
    let x = types::simulate_lifting(&a, &a, 0.2, 3000, 5, DEFAULT_L_CAP, Exec::default()).unwrap();
    let y = types::simulate_lifting(&b, &b, 0.2, 3000, 5, DEFAULT_L_CAP, Exec::default()).unwrap();
    let se = (x.std_error.powi(2) + y.std_error.powi(2)).sqrt();
    assert!((x.mean - y.mean).abs() <= 3.0 * se);
}

#[test]
fn two_symbol_sequences_are_balanced() {
    let t = TypeSpec::new(vec![vec![0.0], vec![1.0]], vec![1, 1]).unwrap();
    let draws = 10_000;
    let first_zero = (0..draws)
        .filter(|&s| types::sample_type_sequence(&t, s as u64)[0] == 0)
        .count() as f64;
    let sd = (draws as f64 * 0.25).sqrt();
    assert!((first_zero - 0.5 * draws as f64).abs() <= 3.0 * sd);
}

#[test]
fn cycle_round_two_by_two_is_an_exhaustive_optimum() {
    // all integer tables with margins (1, 1) / (1, 1)
    let q = types::cycle_round(&[0.25; 4], 2, 2, 2).unwrap();
    let valid = [[1u64, 0, 0, 1], [0, 1, 1, 0]];
    assert!(valid.iter().any(|v| q.counts() == v));
    for (c, p) in q.counts().iter().zip([0.25; 4]) {
        assert!((*c as f64 / 2.0 - p).abs() <= 0.5);
    }
    let same = types::cycle_round(&[0.5, 0.0, 0.25, 0.25], 2, 2, 4).unwrap();
    assert_eq!(same.counts(), &[2, 0, 1, 1]);
}
