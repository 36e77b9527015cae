use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heis::HeisPoint;
use crate::numeric::{halton, PRIMES};

/// Open Korányi ball `B_r(c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    center: HeisPoint,
    radius: f64,
}

impl Ball {
    pub fn new(center: HeisPoint, radius: f64) -> Result<Ball> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Ball { center, radius })
    }

    pub fn center(&self) -> &HeisPoint {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn n(&self) -> usize {
        self.center.n()
    }

    /// `ρB`: same center, radius `ρ·rad(B)`.
    pub fn scaled(&self, rho: f64) -> Result<Ball> {
        Ball::new(self.center.clone(), rho * self.radius)
    }

    pub fn contains(&self, p: &HeisPoint) -> bool {
        p.n() == self.n() && self.center.kor_dist_unchecked(p) < self.radius
    }
}

/// Axis-aligned box in exponential coordinates `(x1,y1,…,z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl CoordBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<CoordBox> {
        if lo.len() != hi.len() || lo.len() < 3 || lo.len() % 2 == 0 {
            return Err(Error::invalid(format!("box needs 2n+1 coordinates, got {} and {}", lo.len(), hi.len())));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::invalid(format!("degenerate box side [{a}, {b}]")));
            }
        }
        Ok(CoordBox { lo, hi })
    }

    /// `[0,1]^{2n+1}`.
    pub fn unit(n: usize) -> CoordBox {
        CoordBox { lo: vec![0.0; 2 * n + 1], hi: vec![1.0; 2 * n + 1] }
    }

    pub fn n(&self) -> usize {
        self.lo.len() / 2
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// Closed-box membership.
    pub fn contains(&self, p: &HeisPoint) -> bool {
        if p.n() != self.n() {
            return false;
        }
        let d = self.lo.len();
        p.h().iter().enumerate().all(|(i, &v)| self.lo[i] <= v && v <= self.hi[i])
            && self.lo[d - 1] <= p.z()
            && p.z() <= self.hi[d - 1]
    }

    /// Smallest box containing the given coordinate vectors.
    pub fn bounding(points: &[Vec<f64>]) -> Result<CoordBox> {
        let first = points.first().ok_or_else(|| Error::invalid("no points"))?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in points {
            for (i, &v) in p.iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        Ok(CoordBox { lo, hi })
    }

    pub fn inflate(&self, by: f64) -> CoordBox {
        CoordBox {
            lo: self.lo.iter().map(|v| v - by).collect(),
            hi: self.hi.iter().map(|v| v + by).collect(),
        }
    }
}

/// Quasi-random uniform samples on Korányi balls.
///
/// Points of a Halton sequence with a seeded Cranley–Patterson shift are
/// drawn in `[-1,1]^{2n} × [-¼,¼]` and kept when `|h|⁴ + 16z² < 1`; a kept
/// point `u` maps to `c·δ_r(u)`. Left translation and dilation carry
/// Lebesgue measure to multiples of itself, so the law is uniform on the
/// ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSampler {
    pub count: usize,
    pub seed: u64,
}

impl BallSampler {
    pub fn new(count: usize, seed: u64) -> BallSampler {
        BallSampler { count, seed }
    }

    fn shift(&self, dim: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..dim).map(|_| rng.gen::<f64>()).collect()
    }

    /// Samples of the unit ball at the origin.
    pub fn unit_points(&self, n: usize) -> Result<Vec<HeisPoint>> {
        let dim = 2 * n + 1;
        if dim > PRIMES.len() {
            return Err(Error::invalid(format!("ball sampling supports n ≤ {}", (PRIMES.len() - 1) / 2)));
        }
        if self.count == 0 {
            return Err(Error::invalid("sample count must be positive"));
        }
        let shift = self.shift(dim);
        let mut u = vec![0.0; dim];
        let mut out = Vec::with_capacity(self.count);
        let mut index = 0u64;
        // The acceptance rate exceeds 1/200 for n ≤ 5.
        let max_index = 400 * self.count as u64 + 1000;
        while out.len() < self.count {
            if index >= max_index {
                return Err(Error::ResourceCap {
                    what: "ball rejection sampling".into(),
                    requested: index as u128,
                    cap: max_index as u128,
                });
            }
            halton(index, &shift, &mut u);
            index += 1;
            let h: Vec<f64> = u[..2 * n].iter().map(|v| 2.0 * v - 1.0).collect();
            let z = 0.5 * u[2 * n] - 0.25;
            let r2: f64 = h.iter().map(|v| v * v).sum();
            if r2 * r2 + 16.0 * z * z < 1.0 {
                out.push(HeisPoint::new(h, z)?);
            }
        }
        Ok(out)
    }

    pub fn points(&self, ball: &Ball) -> Result<Vec<HeisPoint>> {
        let c = ball.center();
        let r = ball.radius();
        self.unit_points(ball.n())?.iter().map(|u| c.mul(&u.dilate_unchecked(r))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_lie_in_the_ball() {
        let ball = Ball::new(HeisPoint::h1(0.5, -1.0, 2.0), 0.3).unwrap();
        let pts = BallSampler::new(2000, 7).points(&ball).unwrap();
        assert_eq!(pts.len(), 2000);
        assert!(pts.iter().all(|p| ball.contains(p)));
    }

    #[test]
    fn unit_ball_moments_match_symmetry() {
        // E[x] = E[z] = 0 and E[x²] = E[y²] by symmetry of the ball.
        let pts = BallSampler::new(20000, 1).unit_points(1).unwrap();
        let m = |g: &dyn Fn(&HeisPoint) -> f64| pts.iter().map(g).sum::<f64>() / pts.len() as f64;
        assert!(m(&|p| p.h()[0]).abs() < 5e-3);
        assert!(m(&|p| p.z()).abs() < 2e-3);
        let (xx, yy) = (m(&|p| p.h()[0].powi(2)), m(&|p| p.h()[1].powi(2)));
        assert!((xx - yy).abs() < 5e-3, "{xx} {yy}");
    }

    #[test]
    fn seeds_change_realization_only() {
        let a = BallSampler::new(10, 1).unit_points(1).unwrap();
        let b = BallSampler::new(10, 2).unit_points(1).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, BallSampler::new(10, 1).unit_points(1).unwrap());
    }

    #[test]
    fn invalid_shapes() {
        assert!(Ball::new(HeisPoint::identity(1), 0.0).is_err());
        assert!(CoordBox::new(vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 1.0]).is_err());
        assert!(CoordBox::new(vec![0.0; 2], vec![1.0; 2]).is_err());
        assert!(BallSampler::new(10, 0).unit_points(6).is_err());
    }

    #[test]
    fn box_membership() {
        let b = CoordBox::unit(1);
        assert!(b.contains(&HeisPoint::h1(0.0, 1.0, 0.5)));
        assert!(!b.contains(&HeisPoint::h1(0.0, 1.0, 1.5)));
        assert_eq!(b.volume(), 1.0);
    }
}
