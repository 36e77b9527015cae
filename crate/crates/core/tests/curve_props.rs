use hcoarea::curve::{sigma, sigma_pl_exact, winding_integral, CurveSource, FnCurve, PolyCurve, DEFAULT_LEVEL_CAP};
use hcoarea::Dyadic;
use proptest::prelude::*;

/// Planar vertices on the 1/16 grid: every area term is exact.
fn grid_vertices(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec((-64i32..=64).prop_map(|k| k as f64 / 16.0), 2), len)
}

fn real_vertices(dim: usize, len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, dim), len)
}

fn closed(mut v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    v.push(v[0].clone());
    v
}

/// Piecewise-linear interpolation of `values` on the level-`p` grid.
fn pl_curve(values: Vec<Vec<f64>>, p: u32) -> FnCurve {
    let cells = 1usize << p;
    assert_eq!(values.len(), cells + 1);
    let dim = values[0].len();
    FnCurve::new(dim, move |t| {
        let s = (t * cells as f64).clamp(0.0, cells as f64);
        let j = (s.floor() as usize).min(cells - 1);
        let u = s - j as f64;
        (0..dim).map(|c| values[j][c] + u * (values[j + 1][c] - values[j][c])).collect()
    })
}

/// Brute-force σ through level `deep`, written without the library.
fn brute_sigma<C: CurveSource>(c: &C, deep: u32) -> Vec<f64> {
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    (0..=deep)
        .map(|i| {
            let n = 1i128 << i;
            (0..n)
                .map(|j| {
                    let a = c.eval(Dyadic::grid(j, i));
                    let m = c.eval(Dyadic::grid(2 * j + 1, i + 1));
                    let b = c.eval(Dyadic::grid(j + 1, i));
                    let diam = d(&a, &m).max(d(&m, &b)).max(d(&a, &b));
                    diam * diam
                })
                .sum()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn area_is_additive_under_concatenation(a in grid_vertices(2..=40), b in grid_vertices(1..=40)) {
        let c1 = PolyCurve::new(&a).unwrap();
        let mut tail = vec![a.last().unwrap().clone()];
        tail.extend(b);
        let c2 = PolyCurve::new(&tail).unwrap();
        let joined = c1.concat(&c2).unwrap();
        prop_assert_eq!(joined.signed_area(), c1.signed_area() + c2.signed_area());
    }

    #[test]
    fn area_ignores_knots(v in real_vertices(4, 2..=30), gaps in prop::collection::vec(0.01f64..1.0, 29)) {
        let c = PolyCurve::new(&v).unwrap();
        let mut knots = vec![0.0];
        for g in gaps.iter().take(v.len() - 1) {
            knots.push(knots.last().unwrap() + g);
        }
        let total = *knots.last().unwrap();
        let knots: Vec<f64> = knots.iter().map(|k| k / total).collect();
        let with = c.clone().with_knots(knots).unwrap();
        prop_assert_eq!(with.signed_area(), c.signed_area());
    }

    #[test]
    fn closed_area_is_translation_invariant(v in real_vertices(2, 3..=30), shift in prop::collection::vec(-100.0f64..100.0, 2)) {
        let c = PolyCurve::new(&closed(v)).unwrap();
        let a = c.signed_area();
        let moved = c.translate(&shift).signed_area();
        let scale = 1.0 + c.length() * (c.length() + shift.iter().map(|s| s.abs()).sum::<f64>());
        prop_assert!((moved - a).abs() <= 1e-10 * scale, "{} vs {}", moved, a);
    }

    #[test]
    fn closed_area_is_bounded_by_length_squared(v in real_vertices(4, 2..=30)) {
        let c = PolyCurve::new(&closed(v)).unwrap();
        prop_assert!(c.signed_area().abs() <= c.length().powi(2));
    }

    #[test]
    fn sigma_partial_sums_are_nondecreasing(v in real_vertices(2, 9..=9), level in 2u32..10) {
        let c = pl_curve(v, 3);
        let a = sigma(&c, level, None, DEFAULT_LEVEL_CAP).unwrap();
        let b = sigma(&c, level + 1, None, DEFAULT_LEVEL_CAP).unwrap();
        prop_assert!(b.value >= a.value);
        prop_assert!(a.levels.iter().all(|&l| l >= 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pl_tail_bound_holds(v in real_vertices(2, 17..=17), level in 0u32..6) {
        // A PL curve on the level-4 grid; its Lipschitz constant is the
        // largest slope.
        let lip = v.windows(2).map(|w| 16.0 * ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt()).fold(0.0, f64::max);
        let c = pl_curve(v, 4);
        let brute = brute_sigma(&c, 16);
        // Beyond the PL level each level sum halves; the remainder of the
        // series equals the last computed level sum.
        let total: f64 = brute.iter().sum::<f64>() + brute[16];
        let bps: Vec<Dyadic> = (0..=16).map(|j| Dyadic::grid(j, 4)).collect();
        let exact = sigma_pl_exact(&c, &bps).unwrap();
        prop_assert!((exact - total).abs() <= 1e-9 * (1.0 + total), "{} vs {}", exact, total);
        let r = sigma(&c, level, Some(lip), DEFAULT_LEVEL_CAP).unwrap();
        prop_assert!(r.value <= total * (1.0 + 1e-12));
        prop_assert!(r.upper_bound().unwrap() >= total * (1.0 - 1e-12), "{:?} vs {}", r.upper_bound(), total);
    }

    #[test]
    fn winding_integral_matches_area(v in real_vertices(2, 3..=12)) {
        let c = PolyCurve::new(&closed(v)).unwrap();
        let (lo, hi) = c.bbox();
        let diam = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();
        let step = diam / 400.0;
        let w = winding_integral(&c, step).unwrap();
        // Cells cut by the curve are the only ones that can be wrong; each
        // side of length ℓ meets at most ℓ/step + 2 cells per row and column.
        let bound = step * step * (2.0 * c.length() / step + 4.0 * c.len() as f64);
        prop_assert!((w - c.signed_area()).abs() <= bound, "{} vs {} (bound {})", w, c.signed_area(), bound);
    }
}
