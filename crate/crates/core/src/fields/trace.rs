//! Continuation of fibers `f^{-1}(w)`.
//!
//! Fibers of maps close to `π` are vertical curves, so `z` serves as the
//! continuation parameter. The tangent at `p` is `(v, 1)` in the frame
//! `(X, Y, Z)` with `D_H f_p v + Zf(p) = 0`; predicted points are corrected
//! by Newton steps `p ← p·(δ, 0)` with `D_H f_p δ = w − f(p)`.

use serde::{Deserialize, Serialize};

use super::{eval_checked, horizontal_jacobian, z_derivative, CoordBox, MapField};
use crate::error::{Error, Result};
use crate::heis::HeisPoint;
use crate::vertical::{CheckMode, VerticalSamples, DEFAULT_LAMBDA};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    /// Largest `z` increment between samples.
    pub step: f64,
    pub corrector_tol: f64,
    pub max_newton: usize,
    /// Steps needing more corrector iterations than this are retried at half size.
    pub target_iters: usize,
    pub min_jh: f64,
    pub max_samples: usize,
    pub lambda: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            step: 0.01,
            corrector_tol: 1e-12,
            max_newton: 12,
            target_iters: 3,
            min_jh: 1e-6,
            max_samples: 1 << 20,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual<F: MapField + ?Sized>(f: &F, p: &HeisPoint, w: &[f64]) -> Result<(Vec<f64>, f64)> {
    let v = eval_checked(f, p)?;
    let r: Vec<f64> = v.iter().zip(w).map(|(a, b)| a - b).collect();
    let n = norm(&r);
    Ok((r, n))
}

fn tracer_err(reason: impl Into<String>, p: &HeisPoint) -> Error {
    Error::Tracer { reason: reason.into(), last_good: p.coords() }
}

/// Damped Newton in the horizontal directions. Returns the corrected point
/// and the number of iterations used.
pub fn correct<F: MapField + ?Sized>(f: &F, p: &HeisPoint, w: &[f64], cfg: &TraceConfig) -> Result<(HeisPoint, usize)> {
    let tol = cfg.corrector_tol * (1.0 + norm(w));
    let mut p = p.clone();
    let (mut r, mut rn) = residual(f, &p, w)?;
    for k in 0..cfg.max_newton {
        if rn <= tol {
            return Ok((p, k));
        }
        let j = horizontal_jacobian(f, &p)?;
        let det = j.determinant();
        if !(det.abs() >= cfg.min_jh) {
            return Err(tracer_err(format!("J_H = {det:e} below threshold {:e}", cfg.min_jh), &p));
        }
        let delta = j
            .lu()
            .solve(&super::to_dvector(&r))
            .ok_or_else(|| tracer_err("singular horizontal Jacobian", &p))?;
        let mut scale = 1.0;
        loop {
            let step: Vec<f64> = delta.iter().map(|d| -scale * d).collect();
            let q = p.mul(&HeisPoint::new(step, 0.0)?)?;
            let (rq, qn) = residual(f, &q, w)?;
            if qn < rn || scale < 1.0 / 64.0 {
                p = q;
                r = rq;
                rn = qn;
                break;
            }
            scale /= 2.0;
        }
    }
    if rn <= tol {
        Ok((p, cfg.max_newton))
    } else {
        Err(tracer_err(format!("corrector did not converge (|f − w| = {rn:e})"), &p))
    }
}

fn tangent<F: MapField + ?Sized>(f: &F, p: &HeisPoint) -> Result<Vec<f64>> {
    let j = horizontal_jacobian(f, p)?;
    let zf = z_derivative(f, p)?;
    let v = j.lu().solve(&super::to_dvector(&zf)).ok_or_else(|| tracer_err("singular horizontal Jacobian", p))?;
    Ok(v.iter().map(|x| -x).collect())
}

fn predict(p: &HeisPoint, v: &[f64], s: f64) -> Result<HeisPoint> {
    p.mul(&HeisPoint::new(v.iter().map(|x| s * x).collect(), s)?)
}

#[derive(Debug, Default)]
struct Walk {
    pts: Vec<HeisPoint>,
    rejected: usize,
}

fn walk<F: MapField + ?Sized>(
    f: &F,
    w: &[f64],
    start: &HeisPoint,
    dir: f64,
    domain: &CoordBox,
    cfg: &TraceConfig,
) -> Result<Walk> {
    let mut out = Walk::default();
    let mut p = start.clone();
    let mut s = cfg.step;
    let min_step = cfg.step * 1e-7;
    loop {
        if out.pts.len() >= cfg.max_samples {
            return Err(Error::ResourceCap {
                what: "fiber samples".into(),
                requested: out.pts.len() as u128 + 1,
                cap: cfg.max_samples as u128,
            });
        }
        let v = tangent(f, &p)?;
        let attempt = |s: f64| -> Option<(HeisPoint, usize)> {
            let q = predict(&p, &v, dir * s).ok()?;
            correct(f, &q, w, cfg).ok()
        };
        match attempt(s) {
            Some((q, it)) if it <= cfg.target_iters => {
                if domain.contains(&q) {
                    out.pts.push(q.clone());
                    p = q;
                    if it <= 1 {
                        s = (1.5 * s).min(cfg.step);
                    }
                    continue;
                }
                // Bisect for the exit parameter.
                let (mut lo, mut hi) = (0.0, s);
                let mut last = None;
                while hi - lo > 1e-15 * cfg.step.max(1.0) {
                    let mid = 0.5 * (lo + hi);
                    match attempt(mid) {
                        Some((q, _)) if domain.contains(&q) => {
                            lo = mid;
                            last = Some(q);
                        }
                        _ => hi = mid,
                    }
                }
                if let Some(q) = last {
                    if q.kor_dist_unchecked(&p) > 1e-12 {
                        out.pts.push(q);
                    }
                }
                return Ok(out);
            }
            _ => {
                out.rejected += 1;
                s /= 2.0;
                if s < min_step {
                    return Err(tracer_err("step size underflow", &p));
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Traced {
    pub samples: VerticalSamples,
    /// Largest `|f − w|` over the samples.
    pub max_residual: f64,
    pub rejected_steps: usize,
}

/// Traces the component of `f^{-1}(w) ∩ domain` through the corrected
/// seed, in both directions until the box boundary. The output is ordered
/// by increasing height and validated as a `λ`-vertical curve.
pub fn trace_fiber<F: MapField + ?Sized>(
    f: &F,
    w: &[f64],
    seed: &HeisPoint,
    domain: &CoordBox,
    cfg: &TraceConfig,
) -> Result<Traced> {
    let n = f.n();
    if w.len() != 2 * n {
        return Err(Error::DimensionMismatch { expected: 2 * n, got: w.len() });
    }
    if seed.n() != n || domain.n() != n {
        return Err(Error::DimensionMismatch { expected: 2 * n + 1, got: 2 * seed.n() + 1 });
    }
    if !(cfg.step > 0.0) || !(cfg.corrector_tol > 0.0) {
        return Err(Error::invalid("tracer step and tolerance must be positive"));
    }
    let (p0, _) = correct(f, seed, w, cfg)?;
    if !domain.contains(&p0) {
        return Err(Error::invalid(format!("corrected seed {:?} lies outside the box", p0.coords())));
    }
    let down = walk(f, w, &p0, -1.0, domain, cfg)?;
    let up = walk(f, w, &p0, 1.0, domain, cfg)?;
    let mut pts: Vec<HeisPoint> = down.pts.into_iter().rev().collect();
    pts.push(p0);
    pts.extend(up.pts);
    if pts.len() < 2 {
        return Err(Error::Degenerate("fiber component is a single point".into()));
    }
    let mut max_residual = 0.0f64;
    for p in &pts {
        max_residual = max_residual.max(residual(f, p, w)?.1);
    }
    let last = pts[pts.len() - 1].clone();
    let mode = if pts.len() <= 4000 { CheckMode::Pairwise } else { CheckMode::Consecutive };
    let samples = VerticalSamples::from_points(pts, cfg.lambda)?.validated(mode).map_err(|e| match e {
        Error::NotVertical { a, b, reason } => {
            tracer_err(format!("traced samples {a} and {b} are not {}-vertical: {reason}", cfg.lambda), &last)
        }
        other => other,
    })?;
    Ok(Traced { samples, max_residual, rejected_steps: down.rejected + up.rejected })
}

/// Traces every component found from `seeds` seeds stratified in `z`,
/// skipping seeds that land on a component already traced.
pub fn trace_components<F: MapField + ?Sized>(
    f: &F,
    w: &[f64],
    domain: &CoordBox,
    seeds: usize,
    cfg: &TraceConfig,
) -> Result<Vec<Traced>> {
    let n = f.n();
    let zlo = domain.lo()[2 * n];
    let zhi = domain.hi()[2 * n];
    let mut found: Vec<(Traced, f64)> = Vec::new();
    for j in 0..seeds.max(1) {
        let z = zlo + (j as f64 + 0.5) / seeds.max(1) as f64 * (zhi - zlo);
        let guess = HeisPoint::new(w.to_vec(), z)?;
        let Ok((p, _)) = correct(f, &guess, w, cfg) else { continue };
        if !domain.contains(&p) {
            continue;
        }
        let pc = p.coords();
        let seen = found.iter().any(|(t, gap)| {
            t.samples.points().iter().any(|q| {
                let qc = q.coords();
                pc.iter().zip(&qc).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= *gap
            })
        });
        if seen {
            continue;
        }
        let t = trace_fiber(f, w, &p, domain, cfg)?;
        let gap = t
            .samples
            .points()
            .windows(2)
            .map(|s| {
                let (a, b) = (s[0].coords(), s[1].coords());
                a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
            * 1.01
            + 1e-12;
        found.push((t, gap));
    }
    Ok(found.into_iter().map(|(t, _)| t).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCheck {
    /// Largest `|(f−π)(x) − (f−π)(y)| / d(x,y)` over checked pairs.
    pub max_ratio: f64,
    pub bound: f64,
    pub pairs: usize,
    pub ok: bool,
}

/// Checks `|(f(x)−π(x)) − (f(y)−π(y))| ≤ 3c·d(x,y)` on pairs of points,
/// using at most about `max_points` of them.
pub fn control_check<F: MapField + ?Sized>(f: &F, pts: &[HeisPoint], c: f64, max_points: usize) -> Result<ControlCheck> {
    let stride = pts.len().div_ceil(max_points.max(2)).max(1);
    let chosen: Vec<&HeisPoint> = pts.iter().step_by(stride).collect();
    let g: Vec<Vec<f64>> = chosen
        .iter()
        .map(|p| Ok(eval_checked(f, p)?.iter().zip(p.h()).map(|(a, b)| a - b).collect()))
        .collect::<Result<_>>()?;
    let mut max_ratio = 0.0f64;
    let mut pairs = 0;
    for i in 0..chosen.len() {
        for j in i + 1..chosen.len() {
            let d = chosen[i].kor_dist(chosen[j])?;
            if d == 0.0 {
                continue;
            }
            let diff: Vec<f64> = g[i].iter().zip(&g[j]).map(|(a, b)| a - b).collect();
            max_ratio = max_ratio.max(norm(&diff) / d);
            pairs += 1;
        }
    }
    let bound = 3.0 * c;
    Ok(ControlCheck { max_ratio, bound, pairs, ok: max_ratio <= bound })
}
