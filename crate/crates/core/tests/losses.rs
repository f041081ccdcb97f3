use kronkge::loss::{bce, label_relaxation, smooth_targets};
use proptest::prelude::*;

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Relaxation loss of one positive entity predicted with probability `p`.
fn lr_at(p: f64, alpha: f64) -> f64 {
    label_relaxation(&[logit(p)], &[1.0], alpha).unwrap().0
}

fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize) -> f64 {
    let h = 1e-5;
    let mut up = x.to_vec();
    let mut down = x.to_vec();
    up[i] += h;
    down[i] -= h;
    (f(&up) - f(&down)) / (2.0 * h)
}

proptest! {
    #[test]
    fn bce_gradient_matches_finite_differences(
        (z, y) in (1usize..12).prop_flat_map(|n| (prop::collection::vec(-6.0f64..6.0, n), prop::collection::vec(0.0f64..=1.0, n)))
    ) {
        let (_, grad) = bce(&z, &y).unwrap();
        for (i, &g) in grad.iter().enumerate() {
            let numeric = central_difference(|x| bce(x, &y).unwrap().0, &z, i);
            let scale = g.abs().max(numeric.abs()).max(1e-3);
            prop_assert!((g - numeric).abs() / scale < 1e-6, "{} vs {}", g, numeric);
        }
    }

    #[test]
    fn relaxation_gradient_matches_finite_differences(
        (z, y) in (1usize..12).prop_flat_map(|n| (prop::collection::vec(-6.0f64..6.0, n), prop::collection::vec(prop::bool::ANY, n))),
        alpha in 0.05f64..0.5,
    ) {
        let y: Vec<f64> = y.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect();
        let observed = |zi: f64, yi: f64| 1.0 / (1.0 + (if yi == 1.0 { -zi } else { zi }).exp());
        // Skip draws sitting on the kink of the credal boundary.
        prop_assume!(z.iter().zip(&y).all(|(&zi, &yi)| (observed(zi, yi) - (1.0 - alpha)).abs() > 1e-4));
        let (loss, grad) = label_relaxation(&z, &y, alpha).unwrap();
        prop_assert!(loss >= 0.0);
        for (i, &g) in grad.iter().enumerate() {
            let numeric = central_difference(|x| label_relaxation(x, &y, alpha).unwrap().0, &z, i);
            let scale = g.abs().max(numeric.abs()).max(1e-3);
            prop_assert!((g - numeric).abs() / scale < 1e-6);
        }
    }

    #[test]
    fn relaxation_is_zero_exactly_on_the_credal_set(p in 0.01f64..0.99, alpha in 0.05f64..0.6) {
        let loss = lr_at(p, alpha);
        if p >= 1.0 - alpha + 1e-12 {
            prop_assert_eq!(loss, 0.0);
        } else if p < 1.0 - alpha - 1e-9 {
            prop_assert!(loss > 0.0);
        }
    }

    #[test]
    fn relaxation_decreases_in_alpha_outside_the_set(p in 0.01f64..0.5, a1 in 0.05f64..0.45, gap in 0.001f64..0.05) {
        let a2 = a1 + gap;
        prop_assume!(p < 1.0 - a2);
        prop_assert!(lr_at(p, a2) < lr_at(p, a1));
    }

    #[test]
    fn smoothing_keeps_order_and_bounds(bits in prop::collection::vec(prop::bool::ANY, 1..20), alpha in 0.01f64..0.99) {
        let t: Vec<f64> = bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let s = smooth_targets(&t, alpha);
        prop_assert_eq!(s.len(), t.len());
        for i in 0..t.len() {
            for j in 0..t.len() {
                if t[i] < t[j] {
                    prop_assert!(s[i] < s[j]);
                }
            }
            let want = if bits[i] { 1.0 - alpha / 2.0 } else { alpha / 2.0 };
            prop_assert!((s[i] - want).abs() < 1e-15);
        }
    }
}

#[test]
fn relaxation_is_convex_in_probability_outside_the_set() {
    for alpha in [0.1, 0.2, 0.4] {
        let h = 1e-3;
        let mut p = 0.02;
        while p + h < 1.0 - alpha {
            let second = lr_at(p - h, alpha) - 2.0 * lr_at(p, alpha) + lr_at(p + h, alpha);
            assert!(second > 0.0, "alpha {alpha}, p {p}: {second}");
            p += 0.01;
        }
    }
}

#[test]
fn relaxation_hand_value() {
    let want = 0.9 * (0.9f64 / 0.8).ln() + 0.1 * (0.1f64 / 0.2).ln();
    assert!((lr_at(0.8, 0.1) - want).abs() < 1e-12);
    assert!((want - 0.036690).abs() < 5e-7);
}
