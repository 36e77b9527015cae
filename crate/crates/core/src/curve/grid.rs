//! Areas from approximating-point grids `Λ_{i,j}`, with `|Λ_{i,j} − γ(j2^{-i})|`
//! of order `L·2^{-i/2}`. Level `i` yields the polyline `h_i` through
//! `Λ_{i,0},…,Λ_{i,2^i}`; the grid's square sum uses five-point diameters
//! linking consecutive levels.

use serde::{Deserialize, Serialize};

use super::estimate::{ConvergenceReport, Term};
use super::{dist2, CurveSource, PolyCurve};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::numeric::Compensated;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxGrid {
    levels: Vec<Vec<Vec<f64>>>,
    l: f64,
}

impl ApproxGrid {
    pub fn new(levels: Vec<Vec<Vec<f64>>>, l: f64) -> Result<ApproxGrid> {
        let dim = levels.first().and_then(|lv| lv.first()).map(|v| v.len()).ok_or_else(|| Error::invalid("empty grid"))?;
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::invalid("grid points must have even positive dimension"));
        }
        for (i, lv) in levels.iter().enumerate() {
            if lv.len() != (1usize << i) + 1 {
                return Err(Error::invalid(format!("level {i} has {} entries, expected {}", lv.len(), (1usize << i) + 1)));
            }
            if lv.iter().any(|v| v.len() != dim) {
                return Err(Error::DimensionMismatch { expected: dim, got: lv.iter().find(|v| v.len() != dim).unwrap().len() });
            }
        }
        Ok(ApproxGrid { levels, l })
    }

    /// `Λ_{i,j} = γ(j2^{-i})` for `i = 0..=top`.
    pub fn from_curve<C: CurveSource + ?Sized>(gamma: &C, top: u32, l: f64) -> Result<ApproxGrid> {
        super::check_level(top, super::DEFAULT_LEVEL_CAP)?;
        let levels = (0..=top)
            .map(|i| (0..=(1i128 << i)).map(|j| gamma.eval(Dyadic::grid(j, i))).collect())
            .collect();
        ApproxGrid::new(levels, l)
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, i: usize) -> &[Vec<f64>] {
        &self.levels[i]
    }

    pub fn constant_l(&self) -> f64 {
        self.l
    }

    /// Largest `|Λ_{i,j} − γ(j2^{-i})| / 2^{-i/2}` against a reference curve.
    pub fn deviation_constant<C: CurveSource + ?Sized>(&self, gamma: &C) -> f64 {
        let mut worst = 0.0f64;
        for (i, lv) in self.levels.iter().enumerate() {
            for (j, v) in lv.iter().enumerate() {
                let g = gamma.eval(Dyadic::grid(j as i128, i as u32));
                worst = worst.max(dist2(v, &g).sqrt() * (i as f64 / 2.0).exp2());
            }
        }
        worst
    }

    pub fn polyline(&self, i: usize) -> PolyCurve {
        PolyCurve::new(&self.levels[i]).expect("validated grid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAreaReport {
    pub report: ConvergenceReport,
    pub sigma: f64,
    /// `|S| / (σ·max{1, log(L²/σ)})` for the last level; the bound relating
    /// the two has an unspecified constant, so only the ratio is reported.
    pub bound_ratio: Option<f64>,
}

fn diam_sq(pts: &[&[f64]]) -> f64 {
    let mut d = 0.0f64;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            d = d.max(dist2(pts[a], pts[b]));
        }
    }
    d
}

/// `S(ĥ_i)` for every level, plus `σ = Σ δ_{i,j}²` over the levels that have
/// a successor.
pub fn area_from_grid(g: &ApproxGrid, tolerance: f64) -> GridAreaReport {
    let terms: Vec<Term> = (0..g.depth())
        .map(|i| Term { level: i as u32, value: g.polyline(i).closed().signed_area() })
        .collect();
    let mut acc = Compensated::new();
    for i in 0..g.depth().saturating_sub(1) {
        let (cur, next) = (&g.levels[i], &g.levels[i + 1]);
        for j in 0..(1usize << i) {
            let pts = [&cur[j][..], &cur[j + 1], &next[2 * j], &next[2 * j + 1], &next[2 * j + 2]];
            acc.add(diam_sq(&pts));
        }
    }
    let sigma = acc.value();
    let s_last = terms.last().map(|t| t.value).unwrap_or(0.0);
    let bound_ratio = (sigma > 0.0).then(|| {
        let lg = (g.l * g.l / sigma).ln().max(1.0);
        s_last.abs() / (sigma * lg)
    });
    GridAreaReport { report: ConvergenceReport::from_sequence(terms, tolerance), sigma, bound_ratio }
}
