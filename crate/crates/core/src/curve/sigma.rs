//! The dyadic square sum `σ(γ) = Σ_i Σ_j δ_{i,j}(γ)²`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_level, diam3, dist2, sample_grid, CurveSource};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::numeric::{ordered_sum, Compensated};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaReport {
    /// Partial sum over levels `0..=max_level`.
    pub value: f64,
    /// Level sums `Σ_j δ_{i,j}²`.
    pub levels: Vec<f64>,
    /// `2·Lip²·2^{-max_level}` when a Lipschitz constant is known.
    pub tail_bound: Option<f64>,
    /// Exact total for curves that are affine on every cell of level
    /// `p ≤ max_level`: beyond level `p` each level sum halves, so the tail
    /// equals the last level sum.
    pub certified_total: Option<f64>,
}

impl SigmaReport {
    /// Best available upper bound for the full sum, if any.
    pub fn upper_bound(&self) -> Option<f64> {
        self.certified_total.or(self.tail_bound.map(|t| self.value + t))
    }
}

/// Partial sums of `σ` up to `max_level`.
pub fn sigma<C: CurveSource + ?Sized>(gamma: &C, max_level: u32, lip: Option<f64>, cap: u32) -> Result<SigmaReport> {
    check_level(max_level + 1, cap)?;
    let fine = max_level + 1;
    let dim = gamma.dim();
    let samples = sample_grid(gamma, fine);
    let at = |k: usize| &samples[k * dim..(k + 1) * dim];
    let levels: Vec<f64> = (0..=max_level)
        .map(|i| {
            let stride = 1usize << (fine - i);
            ordered_sum(1usize << i, |j| {
                let a = at(j * stride);
                let m = at(j * stride + stride / 2);
                let b = at((j + 1) * stride);
                let d = diam3(a, m, b);
                d * d
            })
        })
        .collect();
    let mut acc = Compensated::new();
    for &l in &levels {
        acc.add(l);
    }
    let value = acc.value();
    let tail_bound = lip.or_else(|| gamma.lipschitz()).map(|l| 2.0 * l * l * (-(max_level as f64)).exp2());
    let certified_total = gamma.pl_level().filter(|&p| p <= max_level).map(|_| value + levels[max_level as usize]);
    Ok(SigmaReport { value, levels, tail_bound, certified_total })
}

/// Exact `σ` of a piecewise-linear curve with the given breakpoints.
///
/// A dyadic cell with no breakpoint in its interior carries an affine piece
/// with increment `Δ`; its whole subtree contributes `Σ_k 2^k (2^{-k}|Δ|)² =
/// 2|Δ|²`. Only cells that straddle a breakpoint are refined, so the
/// recursion depth is bounded by the largest breakpoint exponent.
pub fn sigma_pl_exact<C: CurveSource + ?Sized>(gamma: &C, breakpoints: &[Dyadic]) -> Result<f64> {
    if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("breakpoints must be strictly increasing"));
    }
    let max_exp = breakpoints.iter().map(|b| b.exponent()).max().unwrap_or(0);
    // Collect the refined cells level by level, then sum in a fixed order.
    let mut frontier: Vec<(Dyadic, Dyadic)> = vec![(Dyadic::ZERO, Dyadic::ONE)];
    let mut acc = Compensated::new();
    let mut level = 0u32;
    while !frontier.is_empty() {
        if level > max_exp + 1 {
            return Err(Error::Check("breakpoint recursion did not terminate".into()));
        }
        let contributions: Vec<(f64, Option<[(Dyadic, Dyadic); 2]>)> = frontier
            .par_iter()
            .map(|&(a, b)| {
                let fa = gamma.eval(a);
                let fb = gamma.eval(b);
                let lo = breakpoints.partition_point(|&t| t <= a);
                let inside = lo < breakpoints.len() && breakpoints[lo] < b;
                if inside {
                    let m = (a + b).scale_pow2(-1);
                    let fm = gamma.eval(m);
                    let d = diam3(&fa, &fm, &fb);
                    (d * d, Some([(a, m), (m, b)]))
                } else {
                    (2.0 * dist2(&fa, &fb), None)
                }
            })
            .collect();
        let mut next = Vec::new();
        for (v, kids) in contributions {
            acc.add(v);
            if let Some(k) = kids {
                next.extend_from_slice(&k);
            }
        }
        frontier = next;
        level += 1;
    }
    Ok(acc.value())
}
