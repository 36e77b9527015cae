use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{deviation_from_identity, eval_checked, Ball, BallSampler, MapField};
use crate::error::{Error, Result};
use crate::heis::HeisPoint;

/// Least-squares affine approximation `w ↦ M·w + b` of `f` on a ball,
/// composed with `π`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFit {
    pub m: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Root mean square of `|f − (M·π + b)|` over the samples.
    pub rms: f64,
    /// `rms / rad(D)`.
    pub residual: f64,
    pub samples: usize,
}

impl AffineFit {
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        (&self.m * DVector::from_column_slice(w) + &self.b).iter().copied().collect()
    }
}

fn eval_all<F: MapField + ?Sized>(f: &F, pts: &[HeisPoint]) -> Result<Vec<Vec<f64>>> {
    pts.par_iter().map(|p| eval_checked(f, p)).collect()
}

/// Fit on the given samples. Coordinates are centered at `π(c)` and scaled
/// by `1/r` so the normal equations stay well conditioned at every scale.
pub(crate) fn fit_samples(pts: &[HeisPoint], values: &[Vec<f64>], ball: &Ball) -> Result<AffineFit> {
    let d = 2 * ball.n();
    if pts.len() < d + 1 {
        return Err(Error::invalid(format!("affine fit needs at least {} samples, got {}", d + 1, pts.len())));
    }
    let c = ball.center().h();
    let r = ball.radius();
    let mut g = DMatrix::<f64>::zeros(d + 1, d + 1);
    let mut rhs = DMatrix::<f64>::zeros(d + 1, d);
    let mut row = vec![0.0; d + 1];
    for (p, y) in pts.iter().zip(values) {
        for j in 0..d {
            row[j] = (p.h()[j] - c[j]) / r;
        }
        row[d] = 1.0;
        for a in 0..=d {
            for b in 0..=d {
                g[(a, b)] += row[a] * row[b];
            }
            for i in 0..d {
                rhs[(a, i)] += row[a] * y[i];
            }
        }
    }
    let eig = g.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 1e-12 * hi) {
        return Err(Error::Degenerate(format!("normal equations are rank deficient (eigenvalues {lo:e}..{hi:e})")));
    }
    let coef = g
        .cholesky()
        .ok_or_else(|| Error::Degenerate("normal equations are not positive definite".into()))?
        .solve(&rhs);
    let mut m = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = coef[(j, i)] / r;
        }
    }
    let pc = DVector::from_column_slice(c);
    let b = DVector::from_iterator(d, (0..d).map(|i| coef[(d, i)])) - &m * pc;
    let mut sq = 0.0;
    for (p, y) in pts.iter().zip(values) {
        let pred = &m * DVector::from_column_slice(p.h()) + &b;
        sq += y.iter().zip(pred.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    let rms = (sq / pts.len() as f64).sqrt();
    Ok(AffineFit { m, b, rms, residual: rms / r, samples: pts.len() })
}

/// The affine map `α_{f,D}` minimizing the normalized `L²(D)` error.
pub fn affine_fit<F: MapField + ?Sized>(f: &F, ball: &Ball, sampler: &BallSampler) -> Result<AffineFit> {
    if ball.n() != f.n() {
        return Err(Error::DimensionMismatch { expected: 2 * f.n() + 1, got: 2 * ball.n() + 1 });
    }
    let pts = sampler.points(ball)?;
    let values = eval_all(f, &pts)?;
    fit_samples(&pts, &values, ball)
}

/// `β_f(D) = ‖f − α_{f,D}∘π‖ / rad(D)` with the normalized `L²` norm.
pub fn beta_number<F: MapField + ?Sized>(f: &F, ball: &Ball, sampler: &BallSampler) -> Result<f64> {
    Ok(affine_fit(f, ball, sampler)?.residual)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilipReport {
    pub c: f64,
    /// Largest sampled `‖D_H f − id‖_op` on `5D`.
    pub sampled_deviation: f64,
    pub hypothesis_met: bool,
    pub singular_values: Vec<f64>,
    pub within_bounds: bool,
    pub verdict: String,
}

impl BilipReport {
    /// `None` when the hypothesis failed and nothing was asserted.
    pub fn passed(&self) -> Option<bool> {
        self.hypothesis_met.then_some(self.within_bounds)
    }
}

/// Checks that `α_{f,D}` is 2-bilipschitz when `‖D_H f − id‖ < c` on `5D`.
/// The hypothesis is tested on samples of `5D`.
pub fn bilip_check<F: MapField + ?Sized>(f: &F, ball: &Ball, c: f64, sampler: &BallSampler) -> Result<BilipReport> {
    if !(c > 0.0) {
        return Err(Error::invalid("c must be positive"));
    }
    let outer = ball.scaled(5.0)?;
    let probe = BallSampler::new(sampler.count.min(4096), sampler.seed ^ 0x5eed);
    let pts = probe.points(&outer)?;
    let devs: Vec<f64> = pts.par_iter().map(|p| deviation_from_identity(f, p)).collect::<Result<_>>()?;
    let dev = devs.iter().copied().fold(0.0, f64::max);
    let fit = affine_fit(f, ball, sampler)?;
    let mut sv: Vec<f64> = fit.m.clone().singular_values().iter().copied().collect();
    sv.sort_by(f64::total_cmp);
    let within = sv.iter().all(|&s| (0.5..=2.0).contains(&s));
    let met = dev < c;
    let verdict = match (met, within) {
        (false, _) => "hypothesis not met".to_string(),
        (true, true) => "singular values within [1/2, 2]".to_string(),
        (true, false) => "singular values outside [1/2, 2]".to_string(),
    };
    Ok(BilipReport { c, sampled_deviation: dev, hypothesis_met: met, singular_values: sv, within_bounds: within, verdict })
}
