//! Vertical curves in `H_n` and the measure of their pieces.
//!
//! A finite sample `p_0, …, p_K` is λ-vertical when every pair satisfies
//! `|z(p_a⁻¹p_b)| ≥ λ|π(p_a⁻¹p_b)|²` and the samples increase in the order
//! `p ≺ q ⇔ z(p⁻¹q) > 0`. For such curves
//! `H²(K) = z(p_0⁻¹p_K) − S(γ̂)`, where `γ̂` is the projection closed up by a
//! segment.

pub mod boxcount;
pub mod patchwork;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{estimate_area, AreaConfig, ConvergenceReport, PolyCurve, SampledCurve, Verdict};
use crate::error::{Error, Result};
use crate::heis::{omega_unchecked, HeisPoint};

pub use boxcount::{halving_scales, hausdorff2_boxcount, BoxCount};
pub use patchwork::{
    approx_from_curve, build_patchwork, g_curve, sigma_patchwork, validate_patchwork, ApproxPoints, PatchNode,
    Patchwork, PatchworkConfig, PatchworkValidation,
};

/// Verticality parameter used for fibers of maps close to `π`.
pub const DEFAULT_LAMBDA: f64 = 2.0;

/// Ordered samples of a vertical curve with parameters `0 = t_0 < … < t_K = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalSamples {
    ts: Vec<f64>,
    pts: Vec<HeisPoint>,
    lambda: f64,
}

impl VerticalSamples {
    /// Structural checks only; parameters are rescaled affinely onto `[0,1]`.
    /// Use [`VerticalSamples::validated`] to also check verticality.
    pub fn new(ts: Vec<f64>, pts: Vec<HeisPoint>, lambda: f64) -> Result<VerticalSamples> {
        if pts.len() < 2 || ts.len() != pts.len() {
            return Err(Error::invalid("vertical curve needs at least two (t, point) samples"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        let n = pts[0].n();
        if let Some(p) = pts.iter().find(|p| p.n() != n) {
            return Err(Error::DimensionMismatch { expected: 2 * n + 1, got: 2 * p.n() + 1 });
        }
        if let Some(k) = ts.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(format!("parameters not increasing at row {}", k + 1)));
        }
        let (t0, t1) = (ts[0], ts[ts.len() - 1]);
        let last = ts.len() - 1;
        let ts = ts
            .iter()
            .enumerate()
            .map(|(i, &t)| match i {
                0 => 0.0,
                i if i == last => 1.0,
                _ => (t - t0) / (t1 - t0),
            })
            .collect();
        Ok(VerticalSamples { ts, pts, lambda })
    }

    /// Samples with evenly spaced parameters.
    pub fn from_points(pts: Vec<HeisPoint>, lambda: f64) -> Result<VerticalSamples> {
        let k = pts.len().max(2) - 1;
        let ts = (0..pts.len()).map(|i| i as f64 / k as f64).collect();
        VerticalSamples::new(ts, pts, lambda)
    }

    /// `count` samples of `t ↦ f(t)` at `t = j/(count − 1)`.
    pub fn from_fn(count: usize, lambda: f64, f: impl Fn(f64) -> HeisPoint) -> Result<VerticalSamples> {
        if count < 2 {
            return Err(Error::invalid("need at least two samples"));
        }
        let pts = (0..count).map(|j| f(j as f64 / (count - 1) as f64)).collect();
        VerticalSamples::from_points(pts, lambda)
    }

    /// The vertical segment `{Z^a : a ∈ [z0, z1]}` in `H_n`.
    pub fn segment(n: usize, z0: f64, z1: f64, count: usize) -> Result<VerticalSamples> {
        VerticalSamples::from_fn(count, DEFAULT_LAMBDA, |t| HeisPoint::vertical(n, z0 + t * (z1 - z0)))
    }

    /// Fails with [`Error::NotVertical`] at the first violating pair.
    pub fn validated(self, mode: CheckMode) -> Result<VerticalSamples> {
        let c = check_vertical(&self.pts, self.lambda, mode)?;
        match c.violation {
            None => Ok(self),
            Some(v) => Err(Error::NotVertical { a: v.a, b: v.b, reason: v.reason }),
        }
    }

    pub fn ts(&self) -> &[f64] {
        &self.ts
    }

    pub fn points(&self) -> &[HeisPoint] {
        &self.pts
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n(&self) -> usize {
        self.pts[0].n()
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Projected polyline `π(p_0), …, π(p_K)` with the sample parameters as
    /// knots.
    pub fn projection(&self) -> PolyCurve {
        let verts: Vec<Vec<f64>> = self.pts.iter().map(|p| p.h().to_vec()).collect();
        PolyCurve::new(&verts).and_then(|c| c.with_knots(self.ts.clone())).expect("validated samples")
    }

    /// Left translation `p ↦ q·p` of every sample.
    pub fn translate(&self, q: &HeisPoint) -> Result<VerticalSamples> {
        let pts = self.pts.iter().map(|p| q.mul(p)).collect::<Result<Vec<_>>>()?;
        Ok(VerticalSamples { ts: self.ts.clone(), pts, lambda: self.lambda })
    }

    pub fn dilate(&self, r: f64) -> Result<VerticalSamples> {
        let pts = self.pts.iter().map(|p| p.dilate(r)).collect::<Result<Vec<_>>>()?;
        Ok(VerticalSamples { ts: self.ts.clone(), pts, lambda: self.lambda })
    }

    /// Korányi diameter of the sample set.
    pub fn diameter(&self) -> f64 {
        range_diameter(&self.pts, 0, self.pts.len() - 1)
    }
}

/// Korányi diameter of `pts[lo..=hi]`.
pub(crate) fn range_diameter(pts: &[HeisPoint], lo: usize, hi: usize) -> f64 {
    let body = |a: usize| (a + 1..=hi).map(|b| pts[a].kor_dist_unchecked(&pts[b])).fold(0.0, f64::max);
    if hi - lo > 256 {
        (lo..=hi).into_par_iter().map(body).reduce(|| 0.0, f64::max)
    } else {
        (lo..=hi).map(body).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckMode {
    /// Every pair of samples.
    Pairwise,
    /// Consecutive samples only. This is weaker: the cone condition is not
    /// transitive.
    Consecutive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub a: usize,
    pub b: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalCheck {
    pub ok: bool,
    pub mode: CheckMode,
    /// The first violating pair in lexicographic order.
    pub violation: Option<Violation>,
}

fn pair_violation(pts: &[HeisPoint], a: usize, b: usize, lambda: f64) -> Option<String> {
    let (r2, z) = pts[a].delta_parts(&pts[b]);
    if !(z > 0.0) {
        Some(format!("order fails: z(p_a^-1 p_b) = {z:e} is not positive"))
    } else if z < lambda * r2 {
        Some(format!("cone fails: z = {z:e} < lambda |pi|^2 = {:e}", lambda * r2))
    } else {
        None
    }
}

/// Checks the order and the cone condition; see [`CheckMode`].
pub fn check_vertical(pts: &[HeisPoint], lambda: f64, mode: CheckMode) -> Result<VerticalCheck> {
    if pts.len() < 2 {
        return Err(Error::invalid("vertical check needs at least two points"));
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let n = pts[0].n();
    if let Some(p) = pts.iter().find(|p| p.n() != n) {
        return Err(Error::DimensionMismatch { expected: 2 * n + 1, got: 2 * p.n() + 1 });
    }
    let violation = match mode {
        CheckMode::Consecutive => (0..pts.len() - 1)
            .find_map(|a| pair_violation(pts, a, a + 1, lambda).map(|reason| Violation { a, b: a + 1, reason })),
        CheckMode::Pairwise => (0..pts.len() - 1)
            .into_par_iter()
            .filter_map(|a| {
                (a + 1..pts.len()).find_map(|b| pair_violation(pts, a, b, lambda).map(|reason| Violation { a, b, reason }))
            })
            .min_by_key(|v| (v.a, v.b)),
    };
    Ok(VerticalCheck { ok: violation.is_none(), mode, violation })
}

/// `z(p_first⁻¹·p_last)`, positive for increasing samples.
pub fn height(pts: &[HeisPoint]) -> Result<f64> {
    if pts.len() < 2 {
        return Err(Error::invalid("height needs at least two points"));
    }
    let (first, last) = (&pts[0], &pts[pts.len() - 1]);
    let z = first.delta(last)?.z();
    if !(z > 0.0) {
        return Err(Error::NotVertical { a: 0, b: pts.len() - 1, reason: format!("height {z:e} is not positive") });
    }
    Ok(z)
}

/// Extremes of `d(p_a, p_b)/√z(p_a⁻¹p_b)` over all pairs `a < b`. For
/// λ-vertical samples they lie in `[2, (16 + λ^{-2})^{1/4}]`.
pub fn diameter_ratio_range(pts: &[HeisPoint]) -> (f64, f64) {
    (0..pts.len())
        .into_par_iter()
        .map(|a| {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for b in a + 1..pts.len() {
                let (r2, z) = pts[a].delta_parts(&pts[b]);
                let d = (r2 * r2 + 16.0 * z * z).sqrt().sqrt();
                let q = d / z.sqrt();
                lo = lo.min(q);
                hi = hi.max(q);
            }
            (lo, hi)
        })
        .reduce(|| (f64::INFINITY, 0.0), |x, y| (x.0.min(y.0), x.1.max(y.1)))
}

/// `S(γ̂)` for the closed projected polyline.
pub fn closed_projection_area(samples: &VerticalSamples) -> f64 {
    samples.projection().closed().signed_area()
}

/// Area estimator settings used for fiber projections.
pub fn fiber_area_config() -> AreaConfig {
    AreaConfig { level_cap: 12, probe_refine: 3, probe_limit: 14, ..AreaConfig::default() }
}

/// As [`fiber_area_config`], with the finest level three above the number
/// of samples (between 8 and 14).
pub fn fiber_area_config_for(samples: usize) -> AreaConfig {
    let level = (usize::BITS - samples.max(2).leading_zeros() + 3).clamp(8, 14);
    AreaConfig { level_cap: level, probe_limit: level + 2, ..fiber_area_config() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberMeasure {
    pub height: f64,
    /// `S(γ̂)` of the closed polyline through all projected samples.
    pub s_hat: f64,
    /// `height − s_hat`; absent when the area estimate did not converge.
    pub measure: Option<f64>,
    /// Area estimate of the projection, interpolated linearly between
    /// samples, as a convergence certificate for `s_hat`.
    pub report: ConvergenceReport,
}

impl FiberMeasure {
    pub fn value(&self) -> Result<f64> {
        self.measure.ok_or_else(|| {
            Error::Undefined(format!("fiber area estimate is {:?}; measure not reported", self.report.verdict))
        })
    }
}

/// `H²` of the sampled vertical curve by the fiber area formula.
pub fn fiber_measure(samples: &VerticalSamples, cfg: &AreaConfig) -> Result<FiberMeasure> {
    let pts = samples.points();
    let height = height(pts)?;
    let s_hat = closed_projection_area(samples);
    let proj = SampledCurve::new(samples.ts().to_vec(), pts.iter().map(|p| p.h().to_vec()).collect())?;
    let mut report = estimate_area(&proj, cfg);
    // The estimator sums open polylines; closing adds ω(γ(1), γ(0))/2.
    let closing = 0.5 * omega_unchecked(pts[pts.len() - 1].h(), pts[0].h());
    let mut measure = None;
    if report.verdict == Verdict::Converged {
        let est = report.limit.expect("converged report has a limit") + closing;
        let gap = (est - s_hat).abs();
        if gap <= report.tolerance.max(1e-12 * s_hat.abs()) {
            measure = Some(height - s_hat);
        } else {
            report.notes.push(format!("estimated S = {est} differs from the sample polyline value {s_hat} by {gap:e}"));
        }
    }
    Ok(FiberMeasure { height, s_hat, measure, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZIdentity {
    /// `z(v_1⋯v_k)`.
    pub lhs: f64,
    /// `S(π(w_1), …, π(w_k)) + Σ z(v_i)` with `w_i = v_1⋯v_i`.
    pub rhs: f64,
}

impl ZIdentity {
    pub fn error(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

pub fn discrete_z_identity(vs: &[HeisPoint]) -> Result<ZIdentity> {
    let first = vs.first().ok_or_else(|| Error::invalid("need at least one increment"))?;
    let mut w = first.clone();
    let mut proj = vec![w.h().to_vec()];
    for v in &vs[1..] {
        w = w.mul(v)?;
        proj.push(w.h().to_vec());
    }
    let s = PolyCurve::new(&proj)?.signed_area();
    let zsum = crate::numeric::compensated_sum(vs.iter().map(|v| v.z()));
    Ok(ZIdentity { lhs: w.z(), rhs: s + zsum })
}
