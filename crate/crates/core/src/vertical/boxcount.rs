//! Covering estimate of `H²` for sampled vertical curves.
//!
//! At scale `s` the samples are grouped into consecutive runs of Korányi
//! diameter at most `s`, neighbouring runs sharing an endpoint, and the cover
//! contributes `Σ diam²/4`. A vertical subsegment of height `h` has diameter
//! `2√h`, so the factor `1/4` makes the unit vertical segment measure 1. The
//! sums are extrapolated to `s → 0` linearly in `s²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heis::HeisPoint;
use crate::numeric::Compensated;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCount {
    pub scales: Vec<f64>,
    pub sums: Vec<f64>,
    pub pieces: Vec<usize>,
    pub estimate: f64,
}

fn chain_sum(pts: &[HeisPoint], scale: f64) -> (f64, usize) {
    let mut acc = Compensated::new();
    let mut pieces = 0;
    let mut start = 0;
    let mut d = 0.0f64;
    let mut j = 1;
    while j < pts.len() {
        let mut dj = d;
        for s in start..j {
            dj = dj.max(pts[s].kor_dist_unchecked(&pts[j]));
        }
        if dj > scale && j > start + 1 {
            // Close the run at j − 1 and restart from there.
            acc.add(d * d / 4.0);
            pieces += 1;
            start = j - 1;
            d = 0.0;
            continue;
        }
        d = dj;
        j += 1;
    }
    acc.add(d * d / 4.0);
    (acc.value(), pieces + 1)
}

/// Chain-cover sums at each scale and their extrapolation. Every
/// consecutive gap must be at most half the smallest scale.
pub fn hausdorff2_boxcount(pts: &[HeisPoint], scales: &[f64]) -> Result<BoxCount> {
    if pts.len() < 2 {
        return Err(Error::invalid("box count needs at least two points"));
    }
    if scales.is_empty() || scales.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::invalid("scales must be positive"));
    }
    let n = pts[0].n();
    if let Some(p) = pts.iter().find(|p| p.n() != n) {
        return Err(Error::DimensionMismatch { expected: 2 * n + 1, got: 2 * p.n() + 1 });
    }
    let gap = pts.windows(2).map(|w| w[0].kor_dist_unchecked(&w[1])).fold(0.0, f64::max);
    let finest = scales.iter().copied().fold(f64::INFINITY, f64::min);
    if gap > 0.5 * finest {
        return Err(Error::invalid(format!(
            "samples too sparse: largest gap {gap:e} exceeds half the finest scale {finest:e}"
        )));
    }
    let mut order: Vec<f64> = scales.to_vec();
    order.sort_by(|a, b| b.total_cmp(a));
    let (sums, pieces): (Vec<f64>, Vec<usize>) = order.iter().map(|&s| chain_sum(pts, s)).unzip();
    let k = order.len();
    let estimate = if k >= 2 {
        let (s1, s2) = (order[k - 2].powi(2), order[k - 1].powi(2));
        let (v1, v2) = (sums[k - 2], sums[k - 1]);
        (s1 * v2 - s2 * v1) / (s1 - s2)
    } else {
        sums[0]
    };
    Ok(BoxCount { scales: order, sums, pieces, estimate })
}

/// `count` scales halving from `coarse`.
pub fn halving_scales(coarse: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| coarse * (-(i as f64)).exp2()).collect()
}
