//! Convergence of inscribed areas `A_P(γ)` as the mesh of `P` shrinks.
//!
//! Dyadic partitions alone can converge for curves whose area does not
//! exist, so the estimator also evaluates probe partitions at each level `ℓ`
//! from the point where the dyadic values have settled:
//!
//! * extremal probes: inside every level-`ℓ` cell, the sub-polyline through a
//!   subset of the `2^L` finer grid points that maximizes (or minimizes) the
//!   area, found by dynamic programming over ordered subsets;
//! * jittered probes: every interior grid point moved by a random offset of
//!   less than half a cell.
//!
//! All probe partitions have mesh at most `2^{1-ℓ}`. If any of them lands
//! farther than the tolerance from the dyadic limit, the verdict is
//! `diverging`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{half_omega, sample_grid, CurveSource, DEFAULT_LEVEL_CAP};
use crate::numeric::{ordered_sum, Compensated};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub level: u32,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converged,
    Diverging,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub level: u32,
    pub kind: String,
    pub value: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub terms: Vec<Term>,
    pub increments: Vec<f64>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<ProbeRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Geometric extrapolation of the remaining change of a sequence from its
/// last two increments. `None` when the increments are not shrinking.
pub fn tail_estimate(values: &[f64]) -> Option<f64> {
    tail_estimate_with_floor(values, 0.0)
}

/// As [`tail_estimate`], but increments at or below `floor` count as
/// settled: once both are that small the tail is reported as `floor`.
/// This keeps rounding noise in an already settled sequence from hiding
/// convergence.
pub fn tail_estimate_with_floor(values: &[f64], floor: f64) -> Option<f64> {
    let n = values.len();
    if n < 3 {
        return None;
    }
    let i1 = (values[n - 1] - values[n - 2]).abs();
    let i0 = (values[n - 2] - values[n - 3]).abs();
    if i1 == 0.0 {
        return Some(0.0);
    }
    let rho = i1 / i0;
    if rho < 0.75 {
        return Some(i1 * rho / (1.0 - rho));
    }
    (i0 <= floor && i1 <= floor).then_some(floor)
}

impl ConvergenceReport {
    /// Report for a plain sequence of approximations (no probe partitions).
    pub fn from_sequence(terms: Vec<Term>, tolerance: f64) -> ConvergenceReport {
        let values: Vec<f64> = terms.iter().map(|t| t.value).collect();
        let increments: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        let tail = tail_estimate(&values);
        let verdict = match tail {
            Some(t) if t < tolerance => Verdict::Converged,
            _ => {
                let k = increments.len();
                let growing = k >= 3
                    && increments[k - 3..].windows(2).all(|w| w[1].abs() >= w[0].abs())
                    && increments[k - 1].abs() >= tolerance;
                if growing {
                    Verdict::Diverging
                } else {
                    Verdict::Inconclusive
                }
            }
        };
        let limit = (verdict == Verdict::Converged).then(|| *values.last().unwrap());
        ConvergenceReport {
            terms,
            increments,
            verdict,
            limit,
            tolerance,
            tail_bound: tail,
            probes: Vec::new(),
            notes: vec!["sequence only, no probe partitions".into()],
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.value).collect()
    }

    pub fn max_discrepancy(&self) -> f64 {
        self.probes.iter().map(|p| p.discrepancy).fold(0.0, f64::max)
    }
}

/// Increments below this fraction of the tolerance are treated as rounding.
pub const NOISE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaConfig {
    pub tolerance: f64,
    /// Finest dyadic level requested.
    pub level_cap: u32,
    /// Largest level the process is allowed to materialize.
    pub resource_cap: u32,
    /// Probe refinement `L`: candidate points per cell are `2^L + 1`.
    pub probe_refine: u32,
    /// Number of jittered probe partitions per level.
    pub probe_jitter: usize,
    /// Probes at level `ℓ` are evaluated only while `ℓ + L` stays at or
    /// below this level.
    pub probe_limit: u32,
    pub seed: u64,
}

impl Default for AreaConfig {
    fn default() -> Self {
        AreaConfig {
            tolerance: 1e-6,
            level_cap: 20,
            resource_cap: DEFAULT_LEVEL_CAP,
            probe_refine: 6,
            probe_jitter: 4,
            probe_limit: 21,
            seed: 0x5eed,
        }
    }
}

fn stride_area(samples: &[f64], dim: usize, stride: usize, cells: usize) -> f64 {
    let at = |k: usize| &samples[k * dim..(k + 1) * dim];
    0.5 * ordered_sum(cells, |j| {
        let a = at(j * stride);
        let b = at((j + 1) * stride);
        let mut s = 0.0;
        for c in (0..dim).step_by(2) {
            s += a[c] * (b[c + 1] - a[c + 1]) - a[c + 1] * (b[c] - a[c]);
        }
        s
    })
}

/// Largest and smallest area of a sub-polyline from the first to the last
/// of `pts` through an ordered subset of the interior points.
fn extremal_loops(pts: &[&[f64]]) -> (f64, f64) {
    let m = pts.len();
    let mut hi = vec![f64::NEG_INFINITY; m];
    let mut lo = vec![f64::INFINITY; m];
    hi[0] = 0.0;
    lo[0] = 0.0;
    for b in 1..m {
        for a in 0..b {
            let w = half_omega(pts[a], pts[b]);
            hi[b] = hi[b].max(hi[a] + w);
            lo[b] = lo[b].min(lo[a] + w);
        }
    }
    (hi[m - 1], lo[m - 1])
}

/// Estimates `A(γ)` from dyadic and probe partitions.
pub fn estimate_area<C: CurveSource + ?Sized>(gamma: &C, cfg: &AreaConfig) -> ConvergenceReport {
    let dim = gamma.dim();
    let mut notes = Vec::new();
    let capped = cfg.level_cap > cfg.resource_cap;
    let cap = cfg.level_cap.min(cfg.resource_cap).min(30);
    if capped {
        notes.push(format!("level cap {} exceeds resource cap {}; truncated", cfg.level_cap, cfg.resource_cap));
    }
    let samples = sample_grid(gamma, cap);
    let terms: Vec<Term> = (0..=cap)
        .map(|l| Term { level: l, value: stride_area(&samples, dim, 1 << (cap - l), 1 << l) })
        .collect();
    let values: Vec<f64> = terms.iter().map(|t| t.value).collect();
    let last = *values.last().unwrap();
    let increments: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let tail = tail_estimate_with_floor(&values, NOISE_FLOOR * cfg.tolerance);

    // First level from which every dyadic value sits within tol/4 of the last.
    let settled = (0..=cap as usize)
        .rev()
        .take_while(|&l| (values[l] - last).abs() <= cfg.tolerance / 4.0)
        .last()
        .map(|l| l as u32);

    let mut probes = Vec::new();
    if let Some(start) = settled {
        let refine = cfg.probe_refine.max(1);
        for level in start..=cap {
            let fine = level + refine;
            if fine > cfg.probe_limit {
                break;
            }
            let fresh;
            let (fine_samples, fine_stride) = if fine <= cap {
                (&samples[..], 1usize << (cap - fine))
            } else {
                fresh = sample_grid(gamma, fine);
                (&fresh[..], 1usize)
            };
            let at = |k: usize| &fine_samples[k * fine_stride * dim..(k * fine_stride + 1) * dim];
            let per_cell = 1usize << refine;
            let loops: Vec<(f64, f64)> = (0..1usize << level)
                .into_par_iter()
                .map(|c| {
                    let pts: Vec<&[f64]> = (0..=per_cell).map(|s| at(c * per_cell + s)).collect();
                    extremal_loops(&pts)
                })
                .collect();
            let (mut hi, mut lo) = (Compensated::new(), Compensated::new());
            for (h, l) in &loops {
                hi.add(*h);
                lo.add(*l);
            }
            for (kind, v) in [("max-loop", hi.value()), ("min-loop", lo.value())] {
                probes.push(ProbeRecord { level, kind: kind.into(), value: v, discrepancy: (v - last).abs() });
            }
            let half = (per_cell / 2) as i64;
            for r in 0..cfg.probe_jitter {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((level as u64) << 32) ^ r as u64);
                let cells = 1usize << level;
                let mut idx = Vec::with_capacity(cells + 1);
                idx.push(0usize);
                for j in 1..cells {
                    let off = rng.gen_range(-(half - 1)..=(half - 1));
                    idx.push((j as i64 * per_cell as i64 + off) as usize);
                }
                idx.push(cells * per_cell);
                let mut acc = Compensated::new();
                for w in idx.windows(2) {
                    acc.add(half_omega(at(w[0]), at(w[1])));
                }
                let v = acc.value();
                probes.push(ProbeRecord { level, kind: format!("jitter-{r}"), value: v, discrepancy: (v - last).abs() });
            }
        }
    } else {
        notes.push("dyadic values never settled within tolerance/4".into());
    }

    // Only the finest probed mesh speaks to the limit; coarse partitions may
    // legitimately pick out a single lobe of a cancelling curve.
    let finest = probes.iter().map(|p| p.level).max();
    let off = |p: &&ProbeRecord| p.discrepancy > cfg.tolerance;
    if let Some(p) = probes.iter().filter(off).filter(|p| Some(p.level) != finest).last() {
        notes.push(format!("coarse probes exceed the tolerance up to level {}", p.level));
    }
    let verdict = if let Some(p) = probes.iter().filter(|p| Some(p.level) == finest).find(off) {
        notes.push(format!(
            "probe {} at level {} gives {} against dyadic value {} (partitions of mesh ≤ 2^{{1-{}}})",
            p.kind, p.level, p.value, last, p.level
        ));
        Verdict::Diverging
    } else if capped {
        Verdict::Inconclusive
    } else if probes.is_empty() {
        notes.push("no probe level fits within the probe budget".into());
        Verdict::Inconclusive
    } else if tail.is_some_and(|t| t < cfg.tolerance) {
        Verdict::Converged
    } else {
        Verdict::Inconclusive
    };
    notes.push(format!(
        "probe family: extremal sub-polylines at refinement {} plus {} jittered partitions per level",
        cfg.probe_refine, cfg.probe_jitter
    ));
    ConvergenceReport {
        terms,
        increments,
        verdict,
        limit: (verdict == Verdict::Converged).then_some(last),
        tolerance: cfg.tolerance,
        tail_bound: tail,
        probes,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{Circle, Constant, Segment};
    use std::f64::consts::PI;

    #[test]
    fn circle_area_converges_to_pi() {
        let r = estimate_area(&Circle::unit(), &AreaConfig::default());
        assert_eq!(r.verdict, Verdict::Converged, "{:?}", r.notes);
        assert!((r.limit.unwrap() - PI).abs() < 1e-6);
        assert!(r.max_discrepancy() < 1e-6);
        // Inscribed regular 2^i-gons: A = 2^{i-1} sin(2π/2^i).
        for t in &r.terms[2..] {
            let n = (1u64 << t.level) as f64;
            assert!((t.value - 0.5 * n * (2.0 * PI / n).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_curve_converges_to_zero() {
        let cfg = AreaConfig { level_cap: 8, ..AreaConfig::default() };
        let r = estimate_area(&Constant::new(vec![0.5, -1.0]), &cfg);
        assert_eq!(r.verdict, Verdict::Converged);
        assert_eq!(r.limit, Some(0.0));
    }

    #[test]
    fn resource_cap_gives_inconclusive() {
        let cfg = AreaConfig { level_cap: 40, resource_cap: 10, ..AreaConfig::default() };
        let r = estimate_area(&Segment::new(vec![0., 0.], vec![1., 1.]), &cfg);
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert_eq!(r.terms.len(), 11);
    }

    #[test]
    fn extremal_loop_finds_square() {
        let pts: Vec<Vec<f64>> = vec![vec![0., 0.], vec![1., 0.], vec![1., 1.], vec![0., 1.], vec![0., 0.]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let (hi, lo) = extremal_loops(&refs);
        assert_eq!(hi, 1.0);
        assert_eq!(lo, 0.0);
    }

    #[test]
    fn sequence_report_verdicts() {
        let conv: Vec<Term> = (0..12).map(|l| Term { level: l, value: 1.0 - 4f64.powi(-(l as i32)) }).collect();
        let r = ConvergenceReport::from_sequence(conv, 1e-6);
        assert_eq!(r.verdict, Verdict::Converged);
        let div: Vec<Term> = (0..8).map(|l| Term { level: l, value: 2f64.powi(l as i32) }).collect();
        assert_eq!(ConvergenceReport::from_sequence(div, 1e-6).verdict, Verdict::Diverging);
    }
}
