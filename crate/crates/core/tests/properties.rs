//! Property-based invariants.

use proptest::prelude::*;
use rdot_core::eot::{self, EotOptions};
use rdot_core::integrals;
use rdot_core::measure::quantize_gaussian;
use rdot_core::rate_distortion::{self, RdOptions};
use rdot_core::types::{self, JointTypeSpec, TypeSpec};
use rdot_core::{DiscreteMeasure, MonotoneCurve};

fn measure_1d(max: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((-2.0f64..2.0, 0.05f64..1.0), 1..=max).prop_filter_map(
        "duplicate points",
        |pairs| {
            let s: f64 = pairs.iter().map(|p| p.1).sum();
            DiscreteMeasure::new(
                pairs.iter().map(|p| vec![p.0]).collect(),
                pairs.iter().map(|p| p.1 / s).collect(),
            )
            .ok()
        },
    )
}

fn curve() -> impl Strategy<Value = MonotoneCurve> {
    (
        prop::collection::vec((0.01f64..1.0, 0.0f64..1.0), 1..8),
        0.1f64..3.0,
    )
        .prop_map(|(steps, top)| {
            let mut x = 0.0;
            let mut v = top;
            let mut xs = Vec::new();
            let mut vs = Vec::new();
            for (dx, frac) in steps {
                x += dx;
                v *= frac;
                xs.push(x);
                vs.push(v);
            }
            let se = x + 0.5;
            MonotoneCurve::new(xs, vs, top, se).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn measure_json_roundtrip(mu in measure_1d(6)) {
        let s = serde_json::to_string(&mu).unwrap();
        let back: DiscreteMeasure = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, mu);
    }

    #[test]
    fn curve_eval_is_nonincreasing(c in curve(), xs in prop::collection::vec(0.0f64..5.0, 2..20)) {
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        for w in xs.windows(2) {
            prop_assert!(c.eval(w[1]) <= c.eval(w[0]) + 1e-15);
        }
        prop_assert_eq!(c.eval(c.support_end()), 0.0);
    }

    #[test]
    fn eot_solution_invariants(mu in measure_1d(5), beta in 0.2f64..5.0) {
        let g = quantize_gaussian(1, 8).unwrap();
        let s = eot::sinkhorn_f(&g, &mu, beta, &EotOptions::default()).unwrap();
        prop_assert!(s.mutual_info >= 0.0);
        prop_assert!(s.plan.marginal_violation() <= 1e-9);
        prop_assert!((s.f_value - (s.inner_product - beta * s.mutual_info)).abs() <= 1e-9);
        // f >= value of the product coupling, which is <mean(gamma), mean(mu)> = 0 here
        prop_assert!(s.f_value >= -1e-9);
    }

    #[test]
    fn f_is_nonincreasing_and_convex(mu in measure_1d(4)) {
        let g = quantize_gaussian(1, 8).unwrap();
        let betas = rate_distortion::log_grid(0.2, 5.0, 9);
        let fs = eot::f_curve(&g, &mu, &betas, &EotOptions::default()).unwrap();
        for w in fs.windows(2) {
            prop_assert!(w[1].f_value <= w[0].f_value + 1e-9);
        }
        for k in 1..betas.len() - 1 {
            // convexity on a nonuniform grid: the middle value lies below the chord
            let (b0, b1, b2) = (betas[k - 1], betas[k], betas[k + 1]);
            let t = (b1 - b0) / (b2 - b0);
            let chord = (1.0 - t) * fs[k - 1].f_value + t * fs[k + 1].f_value;
            prop_assert!(fs[k].f_value <= chord + 1e-6);
        }
    }

    #[test]
    fn ba_rate_nonincreasing_in_budget(mu in measure_1d(4)) {
        let rep = rate_distortion::default_reproduction(&mu);
        let opts = RdOptions::default();
        let mut prev = f64::INFINITY;
        for k in 0..12 {
            let r = rate_distortion::ba_rate(&mu, 0.1 * k as f64, &rep, &opts).unwrap().rate;
            prop_assert!(r <= prev + opts.tol);
            prev = r;
        }
    }

    #[test]
    fn truncated_integral_monotone_and_concave_in_rate(c in curve()) {
        let rs: Vec<f64> = (0..30).map(|k| 0.1 * k as f64).collect();
        let vals: Vec<f64> = rs.iter().map(|&r| integrals::truncated_rd_integral(&c, r)).collect();
        for w in vals.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
        for w in vals.windows(3) {
            prop_assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-6);
        }
        let top = c.left_limit();
        let a = integrals::truncated_rd_integral(&c, top);
        let b = integrals::truncated_rd_integral(&c, top * 3.0);
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn phi_nonincreasing_in_alpha(c in curve()) {
        let alphas = rate_distortion::log_grid(0.05, 50.0, 40);
        let vals: Vec<f64> = alphas.iter().map(|&a| integrals::phi(&c, a)).collect();
        for w in vals.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        prop_assert!(vals[0] <= c.left_limit());
    }

    #[test]
    fn equi_bracket_holds(c in curve()) {
        let r = integrals::equi_check(&c).unwrap();
        prop_assert!(r.within_bracket, "{:?}", r);
    }

    #[test]
    fn sampled_sequences_keep_their_type(
        counts in prop::collection::vec(0u64..6, 1..5).prop_filter("N > 0", |c| c.iter().sum::<u64>() > 0),
        seed in any::<u64>(),
    ) {
        let t = TypeSpec::new((0..counts.len()).map(|i| vec![i as f64]).collect(), counts.clone()).unwrap();
        let seq = types::sample_type_sequence(&t, seed);
        let mut seen = vec![0u64; counts.len()];
        seq.iter().for_each(|&x| seen[x] += 1);
        prop_assert_eq!(seen, counts);
    }

    #[test]
    fn conditional_count_brackets(counts in prop::collection::vec(0u64..6, 9).prop_filter("N > 0", |c| c.iter().sum::<u64>() > 0)) {
        let j = JointTypeSpec::new(3, 3, counts).unwrap();
        let rows = j.row_counts();
        let x: Vec<usize> = rows.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat_n(i, c as usize)).collect();
        let c = types::conditional_type_count(&j, &x).unwrap();
        prop_assert!(c.lower_holds && c.upper_holds, "{:?}", c);
    }

    #[test]
    fn cycle_round_postconditions(
        cells in prop::collection::vec(0u32..5, 9),
        moves in prop::collection::vec((0usize..3, 0usize..3, 0usize..3, 0usize..3, 1u32..256), 0..6),
    ) {
        let n: u32 = cells.iter().sum();
        prop_assume!(n > 0);
        let mut t: Vec<f64> = cells.iter().map(|&c| c as f64).collect();
        for (i, k, j, l, x) in moves {
            if i == k || j == l { continue; }
            let x = (x as f64 / 256.0).min(t[i * 3 + l]).min(t[k * 3 + j]);
            t[i * 3 + j] += x; t[k * 3 + l] += x;
            t[i * 3 + l] -= x; t[k * 3 + j] -= x;
        }
        let p: Vec<f64> = t.iter().map(|v| v / n as f64).collect();
        let q = types::cycle_round(&p, 3, 3, n as u64).unwrap();
        for i in 0..3 {
            let row: f64 = (0..3).map(|j| t[i * 3 + j]).sum();
            prop_assert_eq!(q.row_counts()[i], row.round() as u64);
            let col: f64 = (0..3).map(|r| t[r * 3 + i]).sum();
            prop_assert_eq!(q.col_counts()[i], col.round() as u64);
        }
        for (qc, tv) in q.counts().iter().zip(&t) {
            prop_assert!((*qc as f64 - tv).abs() <= 1.0);
        }
    }

    #[test]
    fn chernoff_dominates_binomial_tail(p in 0.01f64..0.99, l in 1u64..60, frac in 0.01f64..1.0) {
        let t = frac * l as f64;
        let mu = p * l as f64;
        // binomial pmf by the recurrence, in f64
        let mut pmf = vec![0.0; l as usize + 1];
        pmf[0] = (1.0 - p).powi(l as i32);
        for k in 1..=l as usize {
            pmf[k] = pmf[k - 1] * (l as f64 - k as f64 + 1.0) / k as f64 * p / (1.0 - p);
        }
        let tail: f64 = if t >= mu {
            pmf.iter().enumerate().filter(|(k, _)| *k as f64 >= t).map(|(_, v)| v).sum()
        } else {
            pmf.iter().enumerate().filter(|(k, _)| *k as f64 <= t).map(|(_, v)| v).sum()
        };
        prop_assert!(tail <= types::chernoff_binomial_bound(p, l, t) * (1.0 + 1e-9) + 1e-300);
    }
}
