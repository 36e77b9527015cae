use hcoarea::vertical::{
    approx_from_curve, build_patchwork, fiber_area_config_for, fiber_measure, sigma_patchwork, validate_patchwork,
    CheckMode, PatchworkConfig, VerticalSamples,
};
use hcoarea::HeisPoint;
use proptest::prelude::*;

const LAMBDA: f64 = 2.0;

/// `t ↦ (ε·Σ c_k sin(πkt + φ_k), ε·Σ d_k cos(πkt + ψ_k), t)`, with ε small
/// enough that the horizontal speed stays below 0.3 and the curve is
/// 2-vertical.
fn wiggle(coef: &[f64], count: usize) -> VerticalSamples {
    let eps = 0.3 / (std::f64::consts::PI * 6.0);
    VerticalSamples::from_fn(count, LAMBDA, |t| {
        let mut x = 0.0;
        let mut y = 0.0;
        for k in 0..3 {
            let w = std::f64::consts::PI * (k + 1) as f64;
            x += coef[4 * k] * (w * t + coef[4 * k + 1]).sin();
            y += coef[4 * k + 2] * (w * t + coef[4 * k + 3]).cos();
        }
        HeisPoint::h1(eps * x / 3.0, eps * y / 3.0, t)
    })
    .unwrap()
    .validated(CheckMode::Pairwise)
    .unwrap()
}

fn coefs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 12)
}

fn measure(s: &VerticalSamples) -> f64 {
    fiber_measure(s, &fiber_area_config_for(s.len())).unwrap().value().unwrap()
}

/// `Λ` on `g_i` as an explicit interpolation, independent of the library's
/// polyline type.
fn g_at(knots: &[f64], vals: &[Vec<f64>], t: f64) -> Vec<f64> {
    let k = knots.partition_point(|&s| s <= t).clamp(1, knots.len() - 1);
    let (a, b) = (knots[k - 1], knots[k]);
    let u = if b > a { (t - a) / (b - a) } else { 0.0 };
    (0..vals[0].len()).map(|c| vals[k - 1][c] + u * (vals[k][c] - vals[k - 1][c])).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn diameters_are_comparable_to_heights(c in coefs()) {
        let s = wiggle(&c, 200);
        let pts = s.points();
        let hi = (16.0 + LAMBDA.powi(-2)).powf(0.25);
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                let z = pts[a].delta(&pts[b]).unwrap().z();
                let d = pts[a].kor_dist(&pts[b]).unwrap();
                prop_assert!(z > 0.0);
                prop_assert!(2.0 * z.sqrt() <= d * (1.0 + 1e-12));
                prop_assert!(d <= hi * z.sqrt() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn fiber_measure_is_left_invariant_and_homogeneous(c in coefs(), q in prop::collection::vec(-2.0f64..2.0, 3), r in 0.25f64..4.0) {
        let s = wiggle(&c, 400);
        let m = measure(&s);
        let g = HeisPoint::h1(q[0], q[1], q[2]);
        let moved = measure(&s.translate(&g).unwrap());
        prop_assert!((moved - m).abs() <= 1e-9 * (1.0 + m), "{} vs {}", moved, m);
        let scaled = measure(&s.dilate(r).unwrap());
        prop_assert!((scaled - r * r * m).abs() <= 1e-9 * (1.0 + r * r * m), "{} vs {}", scaled, r * r * m);
    }

    #[test]
    fn patchworks_pass_the_validator(c in coefs(), count in 100usize..600) {
        let s = wiggle(&c, count);
        let pw = build_patchwork(&s, &PatchworkConfig::default()).unwrap();
        let v = validate_patchwork(&s, &pw, 64.0);
        prop_assert!(v.ok, "{:?}", v.errors);
        prop_assert!(v.mu <= 64.0);
    }

    #[test]
    fn sigma_of_approximating_points(c in coefs()) {
        let s = wiggle(&c, 300);
        let pw = build_patchwork(&s, &PatchworkConfig::default()).unwrap();
        let lam = approx_from_curve(&s, &pw);
        let depth = pw.depth().min(6);
        let sig = sigma_patchwork(&s, &pw, &lam, depth).unwrap();

        // Oracle: sample both polylines densely on each J_v.
        let mut oracle = 0.0;
        for i in 0..depth {
            let curve = |gen: usize| {
                let lv = pw.level(gen);
                let mut knots = vec![0.0];
                let mut vals = vec![lam.value(lv[0]).to_vec()];
                for &id in lv {
                    knots.push(pw.midpoint(&s, id));
                    vals.push(lam.value(id).to_vec());
                }
                knots.push(1.0);
                vals.push(lam.value(*lv.last().unwrap()).to_vec());
                (knots, vals)
            };
            let (k0, v0) = curve(i);
            let (k1, v1) = curve(i + 1);
            for &id in pw.level(i) {
                let (a, b) = pw.interval(&s, id);
                let mut pts = Vec::new();
                for j in 0..=400 {
                    let t = a + (b - a) * j as f64 / 400.0;
                    pts.push(g_at(&k0, &v0, t));
                    pts.push(g_at(&k1, &v1, t));
                }
                // Knots inside J_v are vertices of the polylines.
                for (k, v) in [(&k0, &v0), (&k1, &v1)] {
                    for (t, p) in k.iter().zip(v.iter()) {
                        if *t > a && *t < b {
                            pts.push(p.clone());
                        }
                    }
                }
                let mut d = 0.0f64;
                for x in 0..pts.len() {
                    for y in x + 1..pts.len() {
                        d = d.max(((pts[x][0] - pts[y][0]).powi(2) + (pts[x][1] - pts[y][1]).powi(2)).sqrt());
                    }
                }
                oracle += d * d;
            }
        }
        prop_assert!((sig - oracle).abs() <= 1e-9 * (1.0 + oracle), "{} vs {}", sig, oracle);

        // Dilating by 2 keeps the tree and doubles every Λ.
        let big = s.dilate(2.0).unwrap();
        let pw2 = build_patchwork(&big, &PatchworkConfig::default()).unwrap();
        prop_assert_eq!(pw2.nodes().len(), pw.nodes().len());
        let sig2 = sigma_patchwork(&big, &pw2, &approx_from_curve(&big, &pw2), depth).unwrap();
        prop_assert!((sig2 - 4.0 * sig).abs() <= 1e-9 * (1.0 + sig2), "{} vs {}", sig2, 4.0 * sig);
    }
}

#[test]
fn segment_measure_is_density_independent() {
    for count in [2, 3, 17, 1000] {
        let s = VerticalSamples::segment(2, -0.5, 1.5, count).unwrap();
        assert_eq!(measure(&s), 2.0, "{count} samples");
    }
}
