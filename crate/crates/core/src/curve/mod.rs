//! Curves `[0,1] → R^{2n}`, their inscribed polylines, and signed areas.
//!
//! For a polyline `v_1,…,v_k` the symplectic area is
//! `S = ½ Σ_i ω(v_i, v_{i+1})`; in the plane this is the usual shoelace sum.
//! Dyadic approximations `D_iγ` sample the curve on `2^{-i}ℤ ∩ [0,1]`.

pub mod estimate;
pub mod grid;
pub mod shapes;
pub mod sigma;
pub mod winding;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::heis::omega_unchecked;
use crate::numeric::{ordered_sum, Compensated};

pub use estimate::{estimate_area, AreaConfig, ConvergenceReport, ProbeRecord, Term, Verdict};
pub use grid::{area_from_grid, ApproxGrid, GridAreaReport};
pub use shapes::{Circle, Constant, FnCurve, Segment, SampledCurve};
pub use sigma::{sigma, sigma_pl_exact, SigmaReport};
pub use winding::{winding, winding_integral};

/// Default cap on the dyadic level of any materialized grid (`2^24` cells).
pub const DEFAULT_LEVEL_CAP: u32 = 24;

/// Hölder metadata `|γ(s) − γ(t)| ≤ L|s − t|^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Holder {
    pub exponent: f64,
    pub constant: f64,
}

/// An evaluable curve on `[0,1]`. Evaluation must be total and
/// deterministic.
pub trait CurveSource: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, t: Dyadic) -> Vec<f64>;

    /// Evaluation at a real parameter; the default goes through the exact
    /// dyadic value of the double.
    fn eval_real(&self, t: f64) -> Vec<f64> {
        let d = Dyadic::from_f64(t).unwrap_or_else(|_| Dyadic::grid((t * 2f64.powi(90)).round() as i128, 90));
        self.eval(d)
    }

    fn holder(&self) -> Option<Holder> {
        None
    }

    /// A Lipschitz constant, when known.
    fn lipschitz(&self) -> Option<f64> {
        self.holder().filter(|h| h.exponent == 1.0).map(|h| h.constant)
    }

    /// `Some(p)` when the curve is affine on every cell of `2^{-p}ℤ`.
    fn pl_level(&self) -> Option<u32> {
        None
    }

    /// Sorted breakpoints of a piecewise-linear curve (including 0 and 1).
    fn breakpoints(&self) -> Option<Vec<Dyadic>> {
        None
    }
}

impl<T: CurveSource + ?Sized> CurveSource for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, t: Dyadic) -> Vec<f64> {
        (**self).eval(t)
    }
    fn eval_real(&self, t: f64) -> Vec<f64> {
        (**self).eval_real(t)
    }
    fn holder(&self) -> Option<Holder> {
        (**self).holder()
    }
    fn lipschitz(&self) -> Option<f64> {
        (**self).lipschitz()
    }
    fn pl_level(&self) -> Option<u32> {
        (**self).pl_level()
    }
    fn breakpoints(&self) -> Option<Vec<Dyadic>> {
        (**self).breakpoints()
    }
}

/// A strictly increasing list of parameters from exactly 0 to exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    points: Vec<Dyadic>,
}

impl Partition {
    pub fn new(points: Vec<Dyadic>) -> Result<Partition> {
        if points.len() < 2 {
            return Err(Error::invalid("partition needs at least two points"));
        }
        if points[0] != Dyadic::ZERO || *points.last().unwrap() != Dyadic::ONE {
            return Err(Error::invalid("partition must start at 0 and end at 1"));
        }
        if let Some(w) = points.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!("partition not strictly increasing at index {w}")));
        }
        Ok(Partition { points })
    }

    /// Partition from doubles; each value is converted exactly.
    pub fn from_reals(ts: &[f64]) -> Result<Partition> {
        let pts = ts.iter().map(|&t| Dyadic::from_f64(t)).collect::<Result<Vec<_>>>()?;
        Partition::new(pts)
    }

    /// `k` equal intervals (exact when `k` is a power of two, otherwise the
    /// nearest doubles).
    pub fn uniform(k: usize) -> Result<Partition> {
        if k == 0 {
            return Err(Error::invalid("uniform partition needs k ≥ 1"));
        }
        let ts: Vec<f64> = (0..=k).map(|j| j as f64 / k as f64).collect();
        Partition::from_reals(&ts)
    }

    pub fn dyadic(level: u32) -> Partition {
        let n = 1i128 << level;
        Partition { points: (0..=n).map(|j| Dyadic::grid(j, level)).collect() }
    }

    pub fn points(&self) -> &[Dyadic] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mesh(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).to_f64()).fold(0.0, f64::max)
    }
}

/// A polyline in `R^dim`, stored as a flat coordinate array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyCurve {
    dim: usize,
    coords: Vec<f64>,
    knots: Option<Vec<f64>>,
}

impl PolyCurve {
    pub fn new(vertices: &[Vec<f64>]) -> Result<PolyCurve> {
        let first = vertices.first().ok_or_else(|| Error::invalid("polyline needs a vertex"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::invalid("zero-dimensional vertex"));
        }
        let mut coords = Vec::with_capacity(dim * vertices.len());
        for v in vertices {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
            }
            coords.extend_from_slice(v);
        }
        Ok(PolyCurve { dim, coords, knots: None })
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<PolyCurve> {
        if dim == 0 || coords.is_empty() || coords.len() % dim != 0 {
            return Err(Error::invalid("flat coordinate array does not match dimension"));
        }
        Ok(PolyCurve { dim, coords, knots: None })
    }

    pub fn with_knots(mut self, knots: Vec<f64>) -> Result<PolyCurve> {
        if knots.len() != self.len() {
            return Err(Error::invalid("one knot per vertex required"));
        }
        if knots.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("knots must be nondecreasing"));
        }
        self.knots = Some(knots);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn knots(&self) -> Option<&[f64]> {
        self.knots.as_deref()
    }

    pub fn first(&self) -> &[f64] {
        self.vertex(0)
    }

    pub fn last(&self) -> &[f64] {
        self.vertex(self.len() - 1)
    }

    pub fn is_closed(&self) -> bool {
        self.first() == self.last()
    }

    /// Symplectic area `½ Σ ω(v_i, v_{i+1})`; the signed area `A_P` when
    /// `dim = 2`.
    pub fn signed_area(&self) -> f64 {
        assert!(self.dim % 2 == 0, "signed area needs an even dimension");
        let k = self.len();
        if k < 2 {
            return 0.0;
        }
        0.5 * ordered_sum(k - 1, |i| {
            let a = self.vertex(i);
            let b = self.vertex(i + 1);
            let mut s = 0.0;
            for c in (0..self.dim).step_by(2) {
                // ω(a, b) = ω(a, b − a), which keeps terms small for fine polylines.
                s += a[c] * (b[c + 1] - a[c + 1]) - a[c + 1] * (b[c] - a[c]);
            }
            s
        })
    }

    /// The closure `γ̂`: appends the first vertex unless already closed.
    pub fn closed(&self) -> PolyCurve {
        if self.is_closed() {
            return self.clone();
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(self.first());
        let knots = self.knots.as_ref().map(|k| {
            let mut k = k.clone();
            k.push(*k.last().unwrap());
            k
        });
        PolyCurve { dim: self.dim, coords, knots }
    }

    /// Concatenation; the last vertex of `self` must equal the first of
    /// `other` exactly.
    pub fn concat(&self, other: &PolyCurve) -> Result<PolyCurve> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        if self.last() != other.first() {
            return Err(Error::invalid("concatenation requires matching endpoints"));
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords[self.dim..]);
        Ok(PolyCurve { dim: self.dim, coords, knots: None })
    }

    pub fn translate(&self, v: &[f64]) -> PolyCurve {
        let coords = self.coords.chunks_exact(self.dim).flat_map(|p| p.iter().zip(v).map(|(a, b)| a + b)).collect();
        PolyCurve { dim: self.dim, coords, knots: self.knots.clone() }
    }

    pub fn length(&self) -> f64 {
        let mut acc = Compensated::new();
        for i in 1..self.len() {
            acc.add(dist(self.vertex(i - 1), self.vertex(i)));
        }
        acc.value()
    }

    /// Sum of squared segment lengths.
    pub fn sq_variation(&self) -> f64 {
        let mut acc = Compensated::new();
        for i in 1..self.len() {
            acc.add(dist2(self.vertex(i - 1), self.vertex(i)));
        }
        acc.value()
    }

    /// Euclidean diameter of the vertex set.
    pub fn diameter(&self) -> f64 {
        diameter(self.vertices())
    }

    /// Axis-aligned bounding box as `(min, max)` per coordinate.
    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.first().to_vec();
        let mut hi = lo.clone();
        for v in self.vertices() {
            for c in 0..self.dim {
                lo[c] = lo[c].min(v[c]);
                hi[c] = hi[c].max(v[c]);
            }
        }
        (lo, hi)
    }

    /// Evaluates the polyline at `t` using its knots (uniform knots if none).
    pub fn eval_at(&self, t: f64) -> Vec<f64> {
        let k = self.len();
        if k == 1 {
            return self.first().to_vec();
        }
        let idx_t = |i: usize| match &self.knots {
            Some(kn) => kn[i],
            None => i as f64 / (k - 1) as f64,
        };
        if t <= idx_t(0) {
            return self.first().to_vec();
        }
        if t >= idx_t(k - 1) {
            return self.last().to_vec();
        }
        let (mut lo, mut hi) = (0usize, k - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if idx_t(mid) <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (t0, t1) = (idx_t(lo), idx_t(hi));
        let s = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        lerp(self.vertex(lo), self.vertex(hi), s)
    }
}

pub(crate) fn lerp(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

pub(crate) fn diameter<'a, I: Iterator<Item = &'a [f64]>>(pts: I) -> f64 {
    let pts: Vec<&[f64]> = pts.collect();
    let mut d2 = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d2 = d2.max(dist2(pts[i], pts[j]));
        }
    }
    d2.sqrt()
}

/// Half the symplectic form, the area increment of one polyline step.
#[inline]
pub(crate) fn half_omega(a: &[f64], b: &[f64]) -> f64 {
    0.5 * omega_unchecked(a, b)
}

pub(crate) fn check_level(level: u32, cap: u32) -> Result<()> {
    if level > cap || level >= 62 {
        return Err(Error::ResourceCap {
            what: "dyadic level".into(),
            requested: level as u128,
            cap: cap.min(61) as u128,
        });
    }
    Ok(())
}

/// Evaluates `γ` on a partition.
pub fn poly_from_partition<C: CurveSource + ?Sized>(gamma: &C, p: &Partition) -> Result<PolyCurve> {
    let pts = p.points();
    let dim = gamma.dim();
    let vals: Vec<Vec<f64>> = pts.par_iter().map(|&t| gamma.eval(t)).collect();
    let mut coords = Vec::with_capacity(dim * vals.len());
    for v in &vals {
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
        }
        coords.extend_from_slice(v);
    }
    PolyCurve::from_flat(dim, coords)?.with_knots(pts.iter().map(|d| d.to_f64()).collect())
}

/// Samples `γ(j2^{-level})` for `j = 0..=2^level` as a flat array.
pub(crate) fn sample_grid<C: CurveSource + ?Sized>(gamma: &C, level: u32) -> Vec<f64> {
    let n = 1i128 << level;
    let vals: Vec<Vec<f64>> = (0..=n).into_par_iter().map(|j| gamma.eval(Dyadic::grid(j, level))).collect();
    vals.concat()
}

/// The dyadic approximation `D_iγ` through `γ(j2^{-i})`.
pub fn dyadic_approx<C: CurveSource + ?Sized>(gamma: &C, level: u32, cap: u32) -> Result<PolyCurve> {
    check_level(level, cap)?;
    let coords = sample_grid(gamma, level);
    let n = 1usize << level;
    PolyCurve::from_flat(gamma.dim(), coords)?.with_knots((0..=n).map(|j| j as f64 / n as f64).collect())
}

/// `δ_{i,j}`: diameter of `γ` at the endpoints and midpoint of the `j`-th
/// level-`i` cell.
pub fn delta_ij<C: CurveSource + ?Sized>(gamma: &C, level: u32, j: i128) -> Result<f64> {
    if j < 0 || j >= (1i128 << level) {
        return Err(Error::invalid(format!("cell index {j} out of range at level {level}")));
    }
    let a = gamma.eval(Dyadic::grid(j, level));
    let m = gamma.eval(Dyadic::grid(2 * j + 1, level + 1));
    let b = gamma.eval(Dyadic::grid(j + 1, level));
    Ok(diam3(&a, &m, &b))
}

#[inline]
pub(crate) fn diam3(a: &[f64], m: &[f64], b: &[f64]) -> f64 {
    dist2(a, m).max(dist2(m, b)).max(dist2(a, b)).sqrt()
}

/// `Σ_j |γ(t_{j+1}) − γ(t_j)|²` over a partition.
pub fn sq_variation<C: CurveSource + ?Sized>(gamma: &C, p: &Partition) -> Result<f64> {
    Ok(poly_from_partition(gamma, p)?.sq_variation())
}
