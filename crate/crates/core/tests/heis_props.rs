use hcoarea::vertical::discrete_z_identity;
use hcoarea::{in_vcone, ConeSign, HeisPoint, VConeSpec};
use proptest::prelude::*;

/// Group law written out coordinate by coordinate, independent of the library.
fn product(a: &[f64], b: &[f64]) -> Vec<f64> {
    let d = a.len() - 1;
    let mut out: Vec<f64> = (0..d).map(|i| a[i] + b[i]).collect();
    let mut w = 0.0;
    for i in (0..d).step_by(2) {
        w += a[i] * b[i + 1] - a[i + 1] * b[i];
    }
    out.push(a[d] + b[d] + w / 2.0);
    out
}

fn point(c: &[f64]) -> HeisPoint {
    HeisPoint::new(c[..c.len() - 1].to_vec(), c[c.len() - 1]).unwrap()
}

/// Coordinates that are multiples of 1/16 below 4 in magnitude, so every
/// product and sum in the group law is exact in binary floating point.
fn dyadic_coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-64i32..=64).prop_map(|k| k as f64 / 16.0), 2 * n + 1)
}

fn real_coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 2 * n + 1)
}

fn triple<S: Strategy<Value = Vec<f64>>>(s: impl Fn(usize) -> S) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..=3).prop_flat_map(move |n| (s(n), s(n), s(n)))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn group_axioms_exact_on_dyadic_rationals((a, b, c) in triple(dyadic_coords)) {
        let (p, q, r) = (point(&a), point(&b), point(&c));
        prop_assert_eq!(p.mul(&q).unwrap().coords(), product(&a, &b));
        prop_assert_eq!(p.mul(&q).unwrap().mul(&r).unwrap(), p.mul(&q.mul(&r).unwrap()).unwrap());
        let e = HeisPoint::identity(p.n());
        prop_assert_eq!(p.mul(&e).unwrap(), p.clone());
        prop_assert_eq!(e.mul(&p).unwrap(), p.clone());
        prop_assert_eq!(p.mul(&p.inv()).unwrap(), e.clone());
        prop_assert_eq!(p.inv().mul(&p).unwrap(), e);
    }

    #[test]
    fn koranyi_distance_is_a_metric((a, b, c) in triple(real_coords)) {
        let (p, q, r) = (point(&a), point(&b), point(&c));
        let pq = p.kor_dist(&q).unwrap();
        prop_assert!(pq >= 0.0);
        prop_assert_eq!(pq, q.kor_dist(&p).unwrap());
        prop_assert_eq!(p.kor_dist(&p).unwrap(), 0.0);
        if p != q {
            prop_assert!(pq > 0.0);
        }
        let pr = p.kor_dist(&r).unwrap();
        let rq = r.kor_dist(&q).unwrap();
        prop_assert!(pq <= pr + rq + 1e-12 * (1.0 + pr + rq));
    }

    #[test]
    fn left_invariance_and_homogeneity((a, b, c) in triple(real_coords), r in 0.05f64..20.0) {
        let (p, q, g) = (point(&a), point(&b), point(&c));
        let d = p.kor_dist(&q).unwrap();
        let moved = g.mul(&p).unwrap().kor_dist(&g.mul(&q).unwrap()).unwrap();
        prop_assert!(close(moved, d, 1e-12), "{} vs {}", moved, d);
        let scaled = p.dilate(r).unwrap().kor_dist(&q.dilate(r).unwrap()).unwrap();
        prop_assert!(close(scaled, r * d, 1e-12), "{} vs {}", scaled, r * d);
    }

    #[test]
    fn cc_bound_is_comparable((a, _, _) in triple(real_coords)) {
        let p = point(&a);
        let k = p.kor_norm();
        let cc = p.cc_upper_bound();
        prop_assert!(k <= cc * (1.0 + 1e-12));
        prop_assert!(cc <= 3.0 * k * (1.0 + 1e-12));
    }

    #[test]
    fn cones_are_dilation_invariant((a, _, _) in triple(dyadic_coords), k in -4i32..=4, lambda in 1u32..8) {
        let q = point(&a);
        let r = 2f64.powi(k);
        for sign in [ConeSign::Both, ConeSign::Plus, ConeSign::Minus] {
            let cone = VConeSpec::new(lambda as f64 / 4.0, sign).unwrap();
            let e = HeisPoint::identity(q.n());
            prop_assert_eq!(in_vcone(&e, &q, &cone).unwrap(), in_vcone(&e, &q.dilate(r).unwrap(), &cone).unwrap());
        }
    }

    #[test]
    fn z_identity_on_random_words(incs in (1usize..=2).prop_flat_map(|n| prop::collection::vec(real_coords(n), 1..=50))) {
        let pts: Vec<HeisPoint> = incs.iter().map(|c| point(c)).collect();
        let id = discrete_z_identity(&pts).unwrap();
        // Oracle: fold the explicit product and compare with the library's
        // area decomposition.
        let mut acc = incs[0].clone();
        for c in &incs[1..] {
            acc = product(&acc, c);
        }
        let z = *acc.last().unwrap();
        let scale = 1.0 + incs.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>()).sum::<f64>();
        prop_assert!((id.lhs - z).abs() <= 1e-12 * scale);
        prop_assert!(id.error() <= 1e-10 * id.lhs.abs().max(1.0), "{:?}", id);
    }
}
