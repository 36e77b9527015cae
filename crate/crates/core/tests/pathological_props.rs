use hcoarea::curve::{dyadic_approx, CurveSource, DEFAULT_LEVEL_CAP};
use hcoarea::pathological::{alpha_exact, dyadic_alpha, gamma_stage, holder_profile, theta_k, PathParams, Theta};
use hcoarea::Dyadic;
use proptest::prelude::*;

/// Linear interpolation of `α` between the level-`k` grid points around `t`.
fn interpolate_alpha(k: u32, t: Dyadic) -> Dyadic {
    let j = t.scale_pow2(k as i32).floor();
    let n = 1i128 << k;
    let j = j.min(n - 1);
    let (c0, c1) = (Dyadic::grid(j, k), Dyadic::grid(j + 1, k));
    let (a0, a1) = (alpha_exact(c0).unwrap(), alpha_exact(c1).unwrap());
    a0 + (t - c0).scale_pow2(k as i32) * (a1 - a0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5_000))]

    #[test]
    fn dyadic_alpha_is_the_generic_interpolant(k in 0u32..=24, e in 0u32..=40, m in any::<u64>()) {
        let t = Dyadic::grid((m as i128) % ((1i128 << e) + 1), e);
        prop_assert_eq!(dyadic_alpha(k, t).unwrap(), interpolate_alpha(k, t));
    }

    #[test]
    fn stages_are_affine_on_their_cells(stage in 0usize..=2, m in any::<u64>()) {
        let p = PathParams::demo();
        let r = p.r()[stage];
        let j = (m as i128) % (1i128 << r);
        let a = gamma_stage(&p, stage, Dyadic::grid(j, r)).unwrap();
        let b = gamma_stage(&p, stage, Dyadic::grid(j + 1, r)).unwrap();
        let mid = gamma_stage(&p, stage, Dyadic::grid(2 * j + 1, r + 1)).unwrap();
        for c in 0..2 {
            prop_assert!((mid[c] - 0.5 * (a[c] + b[c])).abs() <= 1e-12);
        }
    }
}

#[test]
fn dyadic_alpha_slopes_are_bounded() {
    for k in 0..=14u32 {
        let n = 1i128 << k;
        let mut prev = dyadic_alpha(k, Dyadic::ZERO).unwrap();
        for j in 1..=n {
            let cur = dyadic_alpha(k, Dyadic::grid(j, k)).unwrap();
            // slope = 2^k·|Δ| ≤ 2^k
            assert!((cur - prev).abs() <= Dyadic::ONE, "k = {k}, cell {j}");
            prev = cur;
        }
    }
}

#[test]
fn theta_closes_and_has_no_dyadic_area() {
    for k in 1..=4u32 {
        assert_eq!(theta_k(k, Dyadic::ZERO).unwrap(), [0.0, 0.0]);
        assert_eq!(theta_k(k, Dyadic::ONE).unwrap(), [0.0, 0.0]);
        let th = Theta::new(k).unwrap();
        for j in 0..=18 {
            let a = dyadic_approx(&th, j, DEFAULT_LEVEL_CAP).unwrap().closed().signed_area();
            assert!(a.abs() <= 1e-12, "k = {k}, level {j}: {a}");
        }
        assert_eq!(th.eval(Dyadic::grid(1, 1)), theta_k(k, Dyadic::grid(1, 1)).unwrap().to_vec());
    }
}

#[test]
fn holder_envelope_has_no_counterexample() {
    let p = PathParams::new(vec![0, 18, 36], vec![1, 1]).unwrap();
    let h = holder_profile(&p, 100_000, 11);
    assert!(h.constant.is_finite() && h.constant > 0.0);
    assert!(h.validation_max <= h.constant * 1.5, "{h:?}");
    // The per-scale maxima stay under the fitted constant at every scale.
    assert!(h.envelope.iter().all(|&(_, v)| v <= 1.5 * h.constant));
}
