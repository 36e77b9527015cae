use std::fs::File;
use std::io::BufReader;

use anyhow::{Context, Result};
use hcoarea::coarea::{run_experiment, CoareaExperiment};
use hcoarea::curve::{
    dyadic_approx, estimate_area, sigma, sigma_pl_exact, AreaConfig, Circle, ConvergenceReport, CurveSource, Segment,
    DEFAULT_LEVEL_CAP,
};
use hcoarea::fields::{
    affine_fit, bilip_check, builtin_field, default_a, t_sum, trace_components, Ball, BallSampler, CoordBox, NetFamily,
    TraceConfig, DEFAULT_LATTICE_CAP,
};
use hcoarea::io::{read_curve_csv, read_vertical_csv, write_coarea_rows_csv, write_curve_csv, write_terms_csv, write_vertical_csv};
use hcoarea::pathological::{area_report, refined_area, sigma_certificates, AlphaEven, PathParams, PathologicalCurve, Theta};
use hcoarea::vertical::{
    build_patchwork, fiber_area_config_for, fiber_measure, halving_scales, hausdorff2_boxcount, validate_patchwork,
    PatchworkConfig, VerticalSamples,
};
use hcoarea::{Dyadic, Error, HeisPoint};
use serde_json::json;

use crate::output::{num, opt, Artifacts};
use crate::{AreaArgs, AreaBuiltin, BetaArgs, CoareaAction, CoareaArgs, Command, FiberArgs, PathAction, SigmaArgs, SigmaBuiltin};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Area(a) => area(a),
        Command::Sigma(a) => sigma_cmd(a),
        Command::Pathological { action } => pathological(action),
        Command::Fiber(a) => fiber(a),
        Command::Coarea { action } => coarea(action),
        Command::Beta(a) => beta(a),
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Check(msg()).into())
    }
}

fn open(path: &std::path::Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("--{name} must be positive, got {v}")).into())
    }
}

fn print_report(r: &ConvergenceReport) {
    println!("verdict: {:?}", r.verdict);
    opt("limit", r.limit);
    if let Some(t) = r.terms.last() {
        num(&format!("dyadic area at level {}", t.level), t.value);
    }
    opt("tail bound", r.tail_bound);
    num("max probe discrepancy", r.max_discrepancy());
    for n in &r.notes {
        println!("note: {n}");
    }
}

fn area(a: AreaArgs) -> Result<()> {
    positive("tol", a.tol)?;
    let cfg = AreaConfig { tolerance: a.tol, level_cap: a.level_cap, seed: a.seed, ..AreaConfig::default() };
    let report = match (a.builtin, &a.csv) {
        (_, Some(path)) => estimate_area(&read_curve_csv(open(path)?)?, &cfg),
        (Some(AreaBuiltin::Circle), _) => estimate_area(&Circle::unit(), &cfg),
        (Some(AreaBuiltin::Line), _) => estimate_area(&Segment::new(vec![0.0, 0.0], vec![1.0, 0.0]), &cfg),
        (Some(AreaBuiltin::Theta), _) => estimate_area(&Theta::new(a.k.first().copied().unwrap_or(1))?, &cfg),
        (Some(AreaBuiltin::Pathological), _) => area_report(&PathParams::new(a.r.clone(), a.k.clone())?, a.stage_cap, &cfg)?,
        (None, None) => unreachable!("clap requires a source"),
    };
    print_report(&report);
    let out = Artifacts::new(a.out.as_deref())?;
    out.json("area.json", &report)?;
    out.file("area_levels.csv", |w| write_terms_csv(w, &report))?;
    Ok(())
}

fn sigma_cmd(a: SigmaArgs) -> Result<()> {
    let out = Artifacts::new(a.out.as_deref())?;
    let mut failures = Vec::new();
    let value = match (a.builtin, &a.csv) {
        (_, Some(path)) => {
            let c = read_curve_csv(open(path)?)?;
            let r = sigma(&c, a.max_level, None, DEFAULT_LEVEL_CAP)?;
            num("partial sum", r.value);
            out.json("sigma.json", &r)?;
            r.value
        }
        (Some(SigmaBuiltin::Theta), _) => {
            let mut rows = Vec::new();
            let mut last = 0.0;
            for &k in &a.k {
                let th = Theta::new(k)?;
                let s = sigma_pl_exact(&th, &th.breakpoints().expect("theta is piecewise linear"))?;
                let bound = 128.0 / k as f64;
                num(&format!("sigma(theta_{k})"), s);
                num(&format!("bound 128/{k}"), bound);
                if s > bound {
                    failures.push(format!("sigma(theta_{k}) = {s} exceeds {bound}"));
                }
                rows.push(json!({"k": k, "sigma": s, "bound": bound, "ok": s <= bound}));
                last = s;
            }
            out.json("sigma.json", &rows)?;
            last
        }
        (Some(SigmaBuiltin::Alpha), _) => {
            let c = AlphaEven::new(a.i)?;
            let s = sigma_pl_exact(&c, &c.breakpoints().expect("alpha is piecewise linear"))?;
            let bound = 32.0 * a.i as f64;
            num(&format!("sigma(D_{}alpha)", 2 * a.i), s);
            num("bound 32 i", bound);
            if s > bound * (1.0 + 1e-12) {
                failures.push(format!("sigma = {s} exceeds {bound}"));
            }
            out.json("sigma.json", &json!({"i": a.i, "sigma": s, "bound": bound}))?;
            s
        }
        (Some(SigmaBuiltin::Line), _) => {
            let seg = Segment::new(vec![0.0, 0.0], vec![1.0, 0.0]);
            let s = sigma_pl_exact(&seg, &[Dyadic::ZERO, Dyadic::ONE])?;
            let lip = seg.lipschitz().unwrap_or(1.0);
            num("sigma", s);
            num("bound 2 Lip^2", 2.0 * lip * lip);
            if s > 2.0 * lip * lip {
                failures.push(format!("sigma = {s} exceeds 2 Lip^2"));
            }
            out.json("sigma.json", &json!({"sigma": s, "bound": 2.0 * lip * lip}))?;
            s
        }
        (Some(SigmaBuiltin::Circle), _) => {
            let r = sigma(&Circle::unit(), a.max_level, None, DEFAULT_LEVEL_CAP)?;
            num("partial sum", r.value);
            opt("upper bound", r.upper_bound());
            out.json("sigma.json", &r)?;
            r.value
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    num("value", value);
    check(failures.is_empty(), || failures.join("; "))
}

fn pathological(action: PathAction) -> Result<()> {
    match action {
        PathAction::Verify { params, stage, dyadic_levels, point_cap, out } => {
            let p = PathParams::new(params.r, params.k)?;
            let curve = PathologicalCurve::limit(p.clone());
            let mut failures = Vec::new();
            let mut dyadic = Vec::new();
            let mut worst = 0.0f64;
            for j in 0..=dyadic_levels {
                let v = dyadic_approx(&curve, j, DEFAULT_LEVEL_CAP)?.closed().signed_area();
                worst = worst.max(v.abs());
                dyadic.push(json!({"level": j, "area": v}));
            }
            num(&format!("max |A(D_j gamma)|, j <= {dyadic_levels}"), worst);
            if worst > 1e-12 {
                failures.push(format!("dyadic area {worst:e} above 1e-12"));
            }
            let mut refined = Vec::new();
            for &s in &stage {
                let v = refined_area(&p, s, point_cap as u128)?;
                num(&format!("A_P'{s}"), v);
                if (v - 1.0).abs() > 1e-9 {
                    failures.push(format!("stage {s}: refined area {v} differs from 1"));
                }
                refined.push(json!({"stage": s, "area": v}));
            }
            Artifacts::new(out.as_deref())?.json(
                "pathological.json",
                &json!({"r": p.r(), "k": p.k(), "dyadic": dyadic, "refined": refined, "ok": failures.is_empty()}),
            )?;
            check(failures.is_empty(), || failures.join("; "))
        }
        PathAction::Generate { params, stage, level, out } => {
            let p = PathParams::new(params.r, params.k)?;
            let curve = match stage {
                Some(s) => PathologicalCurve::new(p, s)?,
                None => PathologicalCurve::limit(p),
            };
            let n = 1i128 << level;
            let ts: Vec<f64> = (0..=n).map(|j| Dyadic::grid(j, level).to_f64()).collect();
            let values: Vec<Vec<f64>> = (0..=n).map(|j| curve.eval(Dyadic::grid(j, level))).collect();
            match out {
                Some(path) => {
                    write_curve_csv(hcoarea::io::create(&path)?, &ts, &values)?;
                    println!("wrote {}", path.display());
                }
                None => write_curve_csv(std::io::stdout().lock(), &ts, &values)?,
            }
            Ok(())
        }
        PathAction::Certify { params, theta_k, level_cap, out } => {
            let p = PathParams::new(params.r, params.k)?;
            let cert = sigma_certificates(&p, &theta_k, level_cap)?;
            for c in &cert.theta {
                println!("theta_{}: {} <= {} {}", c.index, hcoarea::io::fmt17(c.sigma), c.bound, if c.ok { "ok" } else { "FAIL" });
            }
            let worst_alpha = cert.alpha.iter().filter(|c| c.index > 0).map(|c| c.sigma / c.bound).fold(0.0, f64::max);
            num("max sigma(D_2i alpha) / 32i", worst_alpha);
            for (s, g) in cert.gamma.iter().enumerate() {
                num(&format!("sigma(gamma_{s})"), *g);
            }
            opt("ratio to sum 1/k", cert.ratio);
            for n in &cert.notes {
                println!("note: {n}");
            }
            Artifacts::new(out.as_deref())?.json("certificates.json", &cert)?;
            check(cert.all_ok(), || "a sigma bound failed".into())
        }
    }
}

fn fiber(a: FiberArgs) -> Result<()> {
    positive("lambda", a.lambda)?;
    let out = Artifacts::new(a.out.as_deref())?;
    let mut extra = serde_json::Map::new();
    let samples: VerticalSamples = match (&a.csv, &a.w) {
        (Some(path), _) => read_vertical_csv(open(path)?, a.lambda)?,
        (None, Some(w)) => {
            positive("step", a.step)?;
            let f = builtin_field(&a.field.field, a.field.n as usize, a.field.a, a.field.b)?;
            let cfg = TraceConfig { step: a.step, lambda: a.lambda, ..TraceConfig::default() };
            let comps = trace_components(&f, w, &CoordBox::unit(f_n(&a)), 8, &cfg)?;
            let first = comps.into_iter().next().ok_or_else(|| Error::Undefined(format!("fiber over {w:?} misses the unit box")))?;
            num("max residual", first.max_residual);
            extra.insert("max_residual".into(), json!(first.max_residual));
            first.samples
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    out.file("fiber_samples.csv", |w| write_vertical_csv(w, &samples))?;
    println!("samples: {}", samples.len());
    let fm = fiber_measure(&samples, &fiber_area_config_for(samples.len()))?;
    num("height", fm.height);
    num("S", fm.s_hat);
    opt("measure", fm.measure);
    let diam = samples.diameter();
    let scales = halving_scales(0.4 * diam, a.box_scales.max(1));
    let boxcount = match hausdorff2_boxcount(samples.points(), &scales) {
        Ok(b) => {
            num("box count", b.estimate);
            Some(b)
        }
        Err(e) => {
            println!("box count skipped: {e}");
            None
        }
    };
    let pw = build_patchwork(&samples, &PatchworkConfig { mu_hint: a.mu, ..PatchworkConfig::default() })?;
    let v = validate_patchwork(&samples, &pw, a.mu);
    println!("patchwork: depth {}, mu {}, {}", pw.depth(), hcoarea::io::fmt17(v.mu), if v.ok { "valid" } else { "INVALID" });
    extra.insert("measure".into(), json!(fm));
    extra.insert("box_count".into(), json!(boxcount));
    extra.insert("patchwork".into(), json!({"depth": pw.depth(), "nodes": pw.nodes().len(), "validation": v}));
    out.json("fiber.json", &extra)?;
    fm.value()?;
    check(v.ok, || format!("patchwork invalid: {}", v.errors.join("; ")))
}

fn f_n(a: &FiberArgs) -> usize {
    a.field.n as usize
}

fn experiment(a: &CoareaArgs) -> Result<CoareaExperiment> {
    let mut exp = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            CoareaExperiment::parse(&text)?
        }
        None => CoareaExperiment::default(),
    };
    if let Some(v) = &a.field {
        exp.field = v.clone();
    }
    if let Some(n) = a.n {
        if n != exp.n {
            exp.n = n;
            exp.domain = CoordBox::unit(n);
        }
    }
    macro_rules! set {
        ($($f:ident),*) => {$(if let Some(v) = a.$f { exp.$f = v; })*};
    }
    set!(a, b, w_cells, w_refine, refine_tol, lhs_cells, trace_step, seeds, identity_tol);
    exp.validate()?;
    Ok(exp)
}

fn coarea(action: CoareaAction) -> Result<()> {
    match action {
        CoareaAction::Config(a) => {
            print!("{}", experiment(&a)?.to_config());
            Ok(())
        }
        CoareaAction::Run(a) => {
            let exp = experiment(&a)?;
            let report = run_experiment(&exp)?;
            num("lhs", report.lhs.value);
            num("lhs error estimate", report.lhs.error_estimate);
            opt("rhs", report.rhs);
            if let Some(id) = &report.identity {
                num("relative error", id.rel_error);
            }
            match report.magnani.holds {
                Some(h) => println!("inequality rhs <= lhs(1+{}): {}", report.magnani.tol, if h { "holds" } else { "FAILS" }),
                None => println!("inequality: not asserted"),
            }
            for n in &report.notes {
                println!("note: {n}");
            }
            let out = Artifacts::new(a.out.as_deref())?;
            out.json("coarea.json", &report)?;
            out.file("coarea_rows.csv", |w| write_coarea_rows_csv(w, &report.rows))?;
            check(report.passed(), || "coarea checks failed".into())
        }
    }
}

fn beta(a: BetaArgs) -> Result<()> {
    positive("radius", a.radius)?;
    let n = a.field.n as usize;
    let f = builtin_field(&a.field.field, n, a.field.a, a.field.b)?;
    let center = match &a.center {
        Some(c) if c.len() == 2 * n + 1 => HeisPoint::new(c[..2 * n].to_vec(), c[2 * n])?,
        Some(c) => return Err(Error::DimensionMismatch { expected: 2 * n + 1, got: c.len() }.into()),
        None => HeisPoint::identity(n),
    };
    let ball = Ball::new(center, a.radius)?;
    let sampler = BallSampler::new(a.samples, a.seed);
    let fit = affine_fit(&f, &ball, &sampler)?;
    num("beta", fit.residual);
    println!("M: {:?}", fit.m.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>());
    let bl = bilip_check(&f, &ball, a.c, &sampler)?;
    num("sampled |D_H f - id| on 5D", bl.sampled_deviation);
    println!("bilipschitz: {}", bl.verdict);
    let mut report = json!({
        "beta": fit.residual,
        "m": fit.m.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
        "b": fit.b.iter().copied().collect::<Vec<_>>(),
        "samples": fit.samples,
        "bilip": bl,
    });
    if let Some(w) = &a.fiber_w {
        let domain = CoordBox::unit(n);
        let comps = trace_components(&f, w, &domain, 8, &TraceConfig::default())?;
        let gamma: Vec<HeisPoint> = match comps.first() {
            Some(c) => {
                let pts = c.samples.points();
                let stride = pts.len().div_ceil(500).max(1);
                pts.iter().step_by(stride).cloned().collect()
            }
            None => return Err(Error::Undefined(format!("fiber over {w:?} misses the unit box")).into()),
        };
        let nets = NetFamily::build(&domain, -1..=a.depth, a.seed, DEFAULT_LATTICE_CAP)?;
        let ts = t_sum(&gamma, &f, &nets, a.ball_factor.unwrap_or(default_a(64.0)), a.depth, &BallSampler::new(a.samples.min(2000), a.seed))?;
        num("T", ts.total);
        report["t_sum"] = json!(ts);
    }
    Artifacts::new(a.out.as_deref())?.json("beta.json", &report)?;
    check(bl.passed() != Some(false), || format!("bilipschitz check failed: {}", bl.verdict))
}
