use proptest::prelude::*;

use proxnag_core::certificates::{compute_params, contraction_violations, CChoice};

/// `(a, μ̂, L, μ)` with `μ̂ ≥ L ≥ μ > 0`.
fn regime() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.01..0.99f64, 1.0..3.0f64, 0.1..10.0f64, 0.001..1.0f64)
        .prop_map(|(a, over, l, frac)| (a, over * l, l, frac * l))
}

proptest! {
    #[test]
    fn interior_c_gives_theta_below_one((a, mu_hat, l, mu) in regime(), t in 0.01..0.99f64) {
        let mid = compute_params(a, mu_hat, l, mu, mu, CChoice::Midpoint).unwrap();
        prop_assert!(mid.c_upper > mid.c_lower);
        let c = mid.c_lower + t * (mid.c_upper - mid.c_lower);
        let p = compute_params(a, mu_hat, l, mu, mu, CChoice::Explicit(c)).unwrap();
        prop_assert!(p.theta < 1.0, "theta = {}", p.theta);
        prop_assert!(p.theta > 0.0);
    }

    #[test]
    fn interval_width_matches_closed_form((a, mu_hat, l, mu) in regime(), extra in 0.0..1.0f64) {
        let mu_big = mu + extra;
        let p = compute_params(a, mu_hat, l, mu, mu_big, CChoice::Midpoint).unwrap();
        // Width (μ̂ + μ_F)/(2a) − β − β(1−a)/a with β = (μ̂ − μ_f)/2.
        let beta = (mu_hat - mu) / 2.0;
        let width = (mu_hat + mu_big) / (2.0 * a) - beta - beta * (1.0 - a) / a;
        prop_assert!(((p.c_upper - p.c_lower) - width).abs() <= 1e-9 * width.abs().max(1.0));
        prop_assert!(((p.c_upper - p.c_lower) - (mu + mu_big) / (2.0 * a)).abs() <= 1e-9 * width.abs().max(1.0));
    }

    #[test]
    fn geometric_sequences_never_violate(theta in 0.05..0.999f64, l0 in 1e-6..1e6f64, n in 2usize..200) {
        let lyap: Vec<f64> = (0..n).map(|k| l0 * theta.powi(k as i32)).collect();
        let check = contraction_violations(&lyap, theta, 1e-10).unwrap();
        prop_assert!(check.violations.is_empty());
    }

    #[test]
    fn growth_is_always_flagged(theta in 0.05..0.999f64, l0 in 1.0..1e3f64) {
        let check = contraction_violations(&[l0, l0 * 1.01], theta, 1e-10).unwrap();
        prop_assert!(!check.violations.is_empty());
    }
}
