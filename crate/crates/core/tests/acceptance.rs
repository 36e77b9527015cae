//! Acceptance criteria 1 to 10. Prints one line per criterion and exits
//! nonzero when any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use hcoarea::coarea::{run_experiment, CoareaExperiment};
use hcoarea::curve::{
    dyadic_approx, estimate_area, sigma, sigma_pl_exact, winding_integral, AreaConfig, Circle, CurveSource, FnCurve,
    PolyCurve, Segment, Verdict, DEFAULT_LEVEL_CAP,
};
use hcoarea::fields::{
    affine_fit, beta_number, builtin_field, t_sum, trace_components, Ball, BallSampler, CoordBox, FnField, MapField,
    NetFamily, TraceConfig, DEFAULT_LATTICE_CAP,
};
use hcoarea::pathological::{refined_area, sigma_certificates, PathParams, PathologicalCurve, DEFAULT_POINT_CAP};
use hcoarea::vertical::{
    build_patchwork, discrete_z_identity, fiber_area_config_for, fiber_measure, halving_scales, hausdorff2_boxcount,
    validate_patchwork, CheckMode, PatchworkConfig, VerticalSamples,
};
use hcoarea::{Dyadic, HeisPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(elapsed: Duration, limit_s: u64) -> Outcome {
    ensure!(elapsed <= Duration::from_secs(limit_s), "took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64());
    Ok(String::new())
}

fn pathological() -> Outcome {
    let t0 = Instant::now();
    let p = PathParams::new(vec![0, 18, 36], vec![1, 1]).map_err(|e| e.to_string())?;
    let curve = PathologicalCurve::limit(p.clone());
    let mut worst = 0.0f64;
    for j in 0..=20 {
        let a = dyadic_approx(&curve, j, DEFAULT_LEVEL_CAP).map_err(|e| e.to_string())?.closed().signed_area();
        worst = worst.max(a.abs());
    }
    ensure!(worst <= 1e-12, "max |A(D_j)| = {worst:e}");
    let mut refined = Vec::new();
    for stage in [0, 1] {
        let a = refined_area(&p, stage, DEFAULT_POINT_CAP).map_err(|e| e.to_string())?;
        ensure!((a - 1.0).abs() <= 1e-9, "stage {stage}: refined area {a}");
        refined.push(a);
    }
    within(t0.elapsed(), 120)?;
    Ok(format!("max dyadic |A| {worst:.1e}, refined areas {refined:?}"))
}

fn sigma_bounds() -> Outcome {
    let t0 = Instant::now();
    let cert = sigma_certificates(&PathParams::demo(), &[1, 2, 4, 8], 18).map_err(|e| e.to_string())?;
    for c in &cert.theta {
        ensure!(c.sigma <= 128.0 / c.index as f64, "theta_{}: {} > {}", c.index, c.sigma, c.bound);
    }
    let alpha: Vec<_> = cert.alpha.iter().filter(|c| c.index <= 10).collect();
    ensure!(alpha.len() == 11, "alpha checks cover i <= {}", alpha.len() as i64 - 1);
    for c in &alpha {
        ensure!(c.sigma <= 32.0 * c.index as f64 * (1.0 + 1e-12), "alpha i = {}: {} > {}", c.index, c.sigma, c.bound);
    }
    within(t0.elapsed(), 60)?;
    let th: Vec<f64> = cert.theta.iter().map(|c| c.sigma).collect();
    Ok(format!("sigma(theta_k) = {th:?}"))
}

fn smooth_suite() -> Vec<(&'static str, Box<dyn CurveSource>, f64)> {
    let ellipse = FnCurve::new(2, |t| vec![2.0 * (2.0 * PI * t).cos(), 0.5 * (2.0 * PI * t).sin()]).with_lipschitz(4.0 * PI);
    let lemniscate = FnCurve::new(2, |t| {
        let s = 2.0 * PI * t;
        vec![s.sin(), s.sin() * s.cos()]
    })
    .with_lipschitz(2.0 * PI * 2.0);
    vec![
        ("circle", Box::new(Circle::unit()), PI),
        ("segment", Box::new(Segment::new(vec![0.0, 0.0], vec![1.0, 2.0])), 0.0),
        ("ellipse", Box::new(ellipse), PI),
        // The two lobes have opposite orientation.
        ("figure eight", Box::new(lemniscate), 0.0),
    ]
}

fn signed_area_convergence() -> Outcome {
    let cfg = AreaConfig::default();
    let mut worst_probe = 0.0f64;
    for (name, c, exact) in smooth_suite() {
        let r = estimate_area(c.as_ref(), &cfg);
        ensure!(r.verdict == Verdict::Converged, "{name}: {:?}", r.verdict);
        let lim = r.limit.unwrap_or(f64::NAN);
        ensure!((lim - exact).abs() <= 1e-6, "{name}: limit {lim} vs {exact}");
        // The limit is taken as the mesh goes to zero, so the finest probe
        // level is the one compared.
        let finest = r.probes.iter().map(|p| p.level).max().ok_or(format!("{name}: no probes"))?;
        let d = r.probes.iter().filter(|p| p.level == finest).map(|p| (p.value - lim).abs()).fold(0.0, f64::max);
        ensure!(d <= 1e-6, "{name}: probe at level {finest} off the dyadic limit by {d:e}");
        worst_probe = worst_probe.max(d);
    }
    let seg = Segment::new(vec![0.0, 0.0], vec![1.0, 0.0]);
    let s = sigma_pl_exact(&seg, &[Dyadic::ZERO, Dyadic::ONE]).map_err(|e| e.to_string())?;
    ensure!(s == 2.0, "sigma(line) = {s}");
    let lip = seg.lipschitz().unwrap_or(f64::NAN);
    ensure!(s == 2.0 * lip * lip, "2 Lip^2 = {}", 2.0 * lip * lip);
    let partial = sigma(&seg, 20, Some(lip), DEFAULT_LEVEL_CAP).map_err(|e| e.to_string())?;
    ensure!(partial.value <= 2.0 && partial.upper_bound().is_some_and(|u| u >= 2.0), "{partial:?}");
    Ok(format!("4 smooth curves converged, max probe gap {worst_probe:.1e}, sigma(line) = {s}"))
}

fn star_polygon(rng: &mut ChaCha8Rng) -> PolyCurve {
    let n = rng.gen_range(3..=16);
    let mut ang: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    ang.sort_by(f64::total_cmp);
    let mut v: Vec<Vec<f64>> = ang
        .iter()
        .map(|a| {
            let r = rng.gen_range(0.3..1.5);
            vec![r * a.cos(), r * a.sin()]
        })
        .collect();
    v.push(v[0].clone());
    PolyCurve::new(&v).unwrap()
}

fn scribble(rng: &mut ChaCha8Rng) -> PolyCurve {
    let n = rng.gen_range(4..=16);
    let mut v: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    v.push(v[0].clone());
    PolyCurve::new(&v).unwrap()
}

fn winding() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let c = if k % 2 == 0 { star_polygon(&mut rng) } else { scribble(&mut rng) };
        let diam = c.diameter();
        let w = winding_integral(&c, diam / 500.0).map_err(|e| e.to_string())?;
        let a = c.signed_area();
        let rel = (w - a).abs() / (1.0 + a.abs());
        ensure!(rel <= 0.02, "polygon {k}: winding {w} vs area {a}");
        worst = worst.max(rel);
    }
    Ok(format!("20 polygons, worst relative gap {worst:.1e}"))
}

fn coords(rng: &mut ChaCha8Rng, n: usize, dyadic: bool) -> Vec<f64> {
    (0..2 * n + 1).map(|_| if dyadic { rng.gen_range(-64i32..=64) as f64 / 16.0 } else { rng.gen_range(-3.0..3.0) }).collect()
}

fn point(c: &[f64]) -> HeisPoint {
    HeisPoint::new(c[..c.len() - 1].to_vec(), c[c.len() - 1]).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

fn group_metric() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..10_000 {
        let n = 1 + case % 3;
        // Group axioms on coordinates where every operation is exact.
        let (p, q, r) = (point(&coords(&mut rng, n, true)), point(&coords(&mut rng, n, true)), point(&coords(&mut rng, n, true)));
        let e = HeisPoint::identity(n);
        ensure!(p.mul(&q).unwrap().mul(&r).unwrap() == p.mul(&q.mul(&r).unwrap()).unwrap(), "associativity, case {case}");
        ensure!(p.mul(&e).unwrap() == p && e.mul(&p).unwrap() == p, "identity, case {case}");
        ensure!(p.mul(&p.inv()).unwrap() == e && p.inv().mul(&p).unwrap() == e, "inverse, case {case}");

        let (p, q, g) = (point(&coords(&mut rng, n, false)), point(&coords(&mut rng, n, false)), point(&coords(&mut rng, n, false)));
        let pq = p.kor_dist(&q).unwrap();
        ensure!(pq > 0.0 && pq == q.kor_dist(&p).unwrap() && p.kor_dist(&p).unwrap() == 0.0, "metric, case {case}");
        let (pg, gq) = (p.kor_dist(&g).unwrap(), g.kor_dist(&q).unwrap());
        ensure!(pq <= (pg + gq) * (1.0 + 1e-12), "triangle inequality, case {case}");
        let moved = g.mul(&p).unwrap().kor_dist(&g.mul(&q).unwrap()).unwrap();
        ensure!(close(moved, pq), "left invariance, case {case}: {moved} vs {pq}");
        let r = rng.gen_range(0.05..20.0);
        let scaled = p.dilate(r).unwrap().kor_dist(&q.dilate(r).unwrap()).unwrap();
        ensure!(close(scaled, r * pq), "homogeneity, case {case}: {scaled} vs {}", r * pq);
        let (k, cc) = (p.kor_norm(), p.cc_upper_bound());
        ensure!(k <= cc * (1.0 + 1e-12) && cc <= 3.0 * k * (1.0 + 1e-12), "cc bound, case {case}");
    }
    within(t0.elapsed(), 10)?;
    Ok(format!("10^4 cases in {:.2} s", t0.elapsed().as_secs_f64()))
}

fn z_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for case in 0..10_000 {
        let n = 1 + case % 2;
        let len = rng.gen_range(1..=50);
        let pts: Vec<HeisPoint> = (0..len).map(|_| point(&coords(&mut rng, n, false))).collect();
        let id = discrete_z_identity(&pts).map_err(|e| e.to_string())?;
        let rel = id.error() / id.lhs.abs().max(1.0);
        ensure!(rel <= 1e-10, "case {case}: {id:?}");
        worst = worst.max(rel);
    }
    Ok(format!("10^4 words, worst relative error {worst:.1e}"))
}

fn traced_fiber(field: &str, a: f64, b: f64) -> Result<VerticalSamples, String> {
    let f = builtin_field(field, 1, a, b).map_err(|e| e.to_string())?;
    let cfg = TraceConfig { step: 1e-4, ..TraceConfig::default() };
    let comps = trace_components(&f, &[0.5, 0.5], &CoordBox::unit(1), 8, &cfg).map_err(|e| e.to_string())?;
    comps.into_iter().next().map(|c| c.samples).ok_or_else(|| format!("{field}: no fiber"))
}

fn formula_vs_boxcount(s: &VerticalSamples) -> Result<(f64, f64), String> {
    let m = fiber_measure(s, &fiber_area_config_for(s.len())).and_then(|m| m.value()).map_err(|e| e.to_string())?;
    let b = hausdorff2_boxcount(s.points(), &halving_scales(0.4 * s.diameter(), 3)).map_err(|e| e.to_string())?;
    Ok((m, b.estimate))
}

fn fiber_formula() -> Outcome {
    let t0 = Instant::now();
    let seg = VerticalSamples::segment(1, 0.0, 1.0, 4001).map_err(|e| e.to_string())?;
    let (m, b) = formula_vs_boxcount(&seg)?;
    ensure!(m == 1.0, "segment measure {m}");
    ensure!((b - 1.0).abs() <= 0.05, "segment box count {b}");
    let mut line = format!("segment {m} / {b:.4}");
    for (field, a, bb) in [("shear", 0.1, 0.0), ("parabolic", 0.1, 0.1)] {
        let s = traced_fiber(field, a, bb)?;
        let (m, b) = formula_vs_boxcount(&s)?;
        ensure!((m - b).abs() <= 0.1 * m, "{field}: formula {m} vs box count {b}");
        line += &format!(", {field} {m:.6} / {b:.6}");
    }
    within(t0.elapsed(), 120)?;
    Ok(line)
}

fn wiggle(rng: &mut ChaCha8Rng) -> Result<VerticalSamples, String> {
    let c: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let count = rng.gen_range(100..600);
    let eps = 0.1 / PI;
    VerticalSamples::from_fn(count, 2.0, |t| {
        let (mut x, mut y) = (0.0, 0.0);
        for k in 0..3 {
            let w = PI * (k + 1) as f64;
            x += c[4 * k] * (w * t + c[4 * k + 1]).sin();
            y += c[4 * k + 2] * (w * t + c[4 * k + 3]).cos();
        }
        HeisPoint::h1(eps * x / 3.0, eps * y / 3.0, t)
    })
    .and_then(|s| s.validated(CheckMode::Pairwise))
    .map_err(|e| e.to_string())
}

fn patchworks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mu = 0.0f64;
    for k in 0..50 {
        let s = wiggle(&mut rng)?;
        let pw = build_patchwork(&s, &PatchworkConfig::default()).map_err(|e| e.to_string())?;
        let v = validate_patchwork(&s, &pw, 64.0);
        ensure!(v.ok, "curve {k}: {:?}", v.errors);
        mu = mu.max(v.mu);
    }
    ensure!(mu <= 64.0, "mu {mu}");
    Ok(format!("50 curves valid, max mu {mu:.2}"))
}

fn coarea() -> Outcome {
    let t0 = Instant::now();
    let runs = [
        ("projection", 0.0, 0.0),
        ("translated", 0.3, -0.2),
        ("shear", 0.05, 0.0),
        ("shear", 0.1, 0.0),
        ("shear", 0.2, 0.0),
        ("parabolic", 0.1, 0.1),
        ("zpert", 0.1, 0.0),
        ("degenerate", 0.0, 0.0),
    ];
    let mut summary = Vec::new();
    for (field, a, b) in runs {
        let e = CoareaExperiment { field: field.into(), a, b, ..CoareaExperiment::default() };
        let r = run_experiment(&e).map_err(|e| e.to_string())?;
        if field == "degenerate" {
            ensure!(r.lhs.value == 0.0 && r.magnani.holds.is_none(), "degenerate run asserted something");
            continue;
        }
        ensure!(r.magnani.rhs <= r.lhs.value * (1.0 + 1e-3), "{field} {a}: rhs {} > lhs {}", r.magnani.rhs, r.lhs.value);
        let rel = r.identity.as_ref().map(|i| i.rel_error).ok_or(format!("{field}: rhs undefined"))?;
        match field {
            "projection" => ensure!(rel <= 1e-9 && r.lhs.error_estimate <= 1e-12, "projection: rel error {rel:e}"),
            _ => ensure!(rel <= 0.02, "{field} {a}: rel error {rel}"),
        }
        summary.push(format!("{field} {a}: {rel:.1e}"));
    }
    within(t0.elapsed(), 600)?;
    Ok(summary.join(", "))
}

fn beta_suite() -> Outcome {
    let lin = builtin_field("linear", 1, 0.5, -0.25).map_err(|e| e.to_string())?;
    let ball = Ball::new(HeisPoint::h1(0.1, 0.2, 0.3), 0.5).map_err(|e| e.to_string())?;
    let fit = affine_fit(&lin, &ball, &BallSampler::new(100_000, 1)).map_err(|e| e.to_string())?;
    ensure!(fit.residual <= 1e-6, "affine beta {}", fit.residual);

    let r = 3.0;
    let f = builtin_field("parabolic", 1, 0.3, 0.2).map_err(|e| e.to_string())?;
    let g = builtin_field("parabolic", 1, 0.3, 0.2).map_err(|e| e.to_string())?;
    let fr = FnField::new(1, move |p| g.eval(&p.dilate(r).unwrap()).iter().map(|v| v / r).collect());
    let c = HeisPoint::h1(0.2, -0.1, 0.4);
    let s = BallSampler::new(2000, 9);
    let small = beta_number(&fr, &Ball::new(c.clone(), 0.3).unwrap(), &s).map_err(|e| e.to_string())?;
    let big = beta_number(&f, &Ball::new(c.dilate(r).unwrap(), r * 0.3).unwrap(), &s).map_err(|e| e.to_string())?;
    // Independent samples give the Monte Carlo spread.
    let other = beta_number(&f, &Ball::new(c.dilate(r).unwrap(), r * 0.3).unwrap(), &BallSampler::new(2000, 10))
        .map_err(|e| e.to_string())?;
    let mc = (big - other).abs().max(1e-3 * big);
    ensure!((small - big).abs() <= mc, "scale invariance: {small} vs {big} (MC spread {mc:e})");

    let nets = NetFamily::build(&CoordBox::unit(1), -1..=2, 3, DEFAULT_LATTICE_CAP).map_err(|e| e.to_string())?;
    let single = t_sum(&[HeisPoint::h1(0.5, 0.5, 0.5)], &f, &nets, 3.0, 2, &BallSampler::new(200, 2)).map_err(|e| e.to_string())?;
    ensure!(single.total == 0.0, "singleton T = {}", single.total);
    Ok(format!("affine beta {:.1e}, beta {small:.6} vs {big:.6}, singleton T = 0", fit.residual))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("pathological curve", pathological),
        ("sigma certificates", sigma_bounds),
        ("signed-area convergence", signed_area_convergence),
        ("winding identity", winding),
        ("group and metric", group_metric),
        ("discrete z-identity", z_identity),
        ("fiber formula", fiber_formula),
        ("patchwork validity", patchworks),
        ("coarea lab", coarea),
        ("beta numbers", beta_suite),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let label = format!("{} {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {label}: PASS ({secs:.1} s) {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {label}: FAIL ({secs:.1} s) {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
