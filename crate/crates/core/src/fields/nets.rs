use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{beta_number, Ball, BallSampler, CoordBox, MapField};
use crate::error::{Error, Result};
use crate::heis::HeisPoint;

/// Default cap on reference-lattice points per level.
pub const DEFAULT_LATTICE_CAP: usize = 1 << 23;

/// Hash grid for Korányi-radius queries. Within distance `r` the
/// horizontal coordinates differ by at most `r`, and the `z` coordinates by
/// at most `r²/4 + H·r/2` where `H` bounds `|π|` of the stored points.
#[derive(Debug, Clone)]
struct Grid {
    hcell: f64,
    zcell: f64,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl Grid {
    fn new(r: f64, hbound: f64) -> Grid {
        Grid { hcell: r, zcell: r * r / 4.0 + hbound * r / 2.0, cells: HashMap::new() }
    }

    fn key(&self, p: &HeisPoint) -> Vec<i64> {
        let mut k: Vec<i64> = p.h().iter().map(|v| (v / self.hcell).floor() as i64).collect();
        k.push((p.z() / self.zcell).floor() as i64);
        k
    }

    fn insert(&mut self, p: &HeisPoint, idx: usize) {
        self.cells.entry(self.key(p)).or_default().push(idx);
    }

    /// Calls `visit` on every stored index in the neighbouring cells.
    fn neighbours(&self, p: &HeisPoint, mut visit: impl FnMut(usize) -> bool) -> bool {
        let base = self.key(p);
        let d = base.len();
        let mut off = vec![-1i64; d];
        loop {
            let key: Vec<i64> = base.iter().zip(&off).map(|(a, b)| a + b).collect();
            if let Some(ids) = self.cells.get(&key) {
                for &i in ids {
                    if !visit(i) {
                        return false;
                    }
                }
            }
            let mut j = 0;
            loop {
                if j == d {
                    return true;
                }
                off[j] += 1;
                if off[j] <= 1 {
                    break;
                }
                off[j] = -1;
                j += 1;
            }
        }
    }
}

/// One maximal `2^{-i}`-separated set.
#[derive(Debug, Clone)]
pub struct NetLevel {
    pub level: i32,
    pub radius: f64,
    pub points: Vec<HeisPoint>,
    pub lattice_size: usize,
    grid: Grid,
}

impl NetLevel {
    /// Indices of net points `v` with `d(p, v) < radius`.
    pub fn near(&self, p: &HeisPoint, out: &mut Vec<usize>) {
        self.grid.neighbours(p, |i| {
            if self.points[i].kor_dist_unchecked(p) < self.radius {
                out.push(i);
            }
            true
        });
    }

    /// Smallest pairwise distance, by brute force.
    pub fn min_separation(&self) -> f64 {
        let mut m = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                m = m.min(p.kor_dist_unchecked(q));
            }
        }
        m
    }
}

/// Maximal nets `N_i` for a range of levels inside a working box.
///
/// Each level is built by greedy insertion over a shuffled reference
/// lattice (spacing `2^{-i}/2` horizontally, `4^{-i}/8` in `z`): a lattice
/// point joins when it is farther than `2^{-i}` from every point already
/// chosen. After the pass no lattice point can be added.
#[derive(Debug, Clone)]
pub struct NetFamily {
    domain: CoordBox,
    seed: u64,
    levels: BTreeMap<i32, NetLevel>,
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let k = ((hi - lo) / step).ceil() as usize;
    (0..=k).map(|j| (lo + j as f64 * step).min(hi)).collect()
}

impl NetFamily {
    pub fn build(domain: &CoordBox, levels: std::ops::RangeInclusive<i32>, seed: u64, lattice_cap: usize) -> Result<NetFamily> {
        if levels.is_empty() {
            return Err(Error::invalid("empty level range"));
        }
        let built: Vec<NetLevel> =
            levels.clone().map(|i| build_level(domain, i, seed, lattice_cap)).collect::<Result<_>>()?;
        Ok(NetFamily { domain: domain.clone(), seed, levels: built.into_iter().map(|l| (l.level, l)).collect() })
    }

    pub fn level(&self, i: i32) -> Option<&NetLevel> {
        self.levels.get(&i)
    }

    pub fn levels(&self) -> impl Iterator<Item = &NetLevel> {
        self.levels.values()
    }

    pub fn domain(&self) -> &CoordBox {
        &self.domain
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Whether `p` is farther than `2^{-i}` from every net point.
    pub fn addable(&self, i: i32, p: &HeisPoint) -> Result<bool> {
        let l = self.level(i).ok_or_else(|| Error::invalid(format!("net level {i} missing")))?;
        let mut near = Vec::new();
        let r = l.radius;
        l.grid.neighbours(p, |j| {
            if l.points[j].kor_dist_unchecked(p) <= r {
                near.push(j);
                return false;
            }
            true
        });
        Ok(near.is_empty())
    }
}

fn lattice(domain: &CoordBox, r: f64, cap: usize) -> Result<Vec<Vec<f64>>> {
    let (lo, hi) = (domain.lo(), domain.hi());
    let d = lo.len();
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|k| if k + 1 < d { axis(lo[k], hi[k], r / 2.0) } else { axis(lo[k], hi[k], r * r / 8.0) })
        .collect();
    let total = axes.iter().try_fold(1u128, |acc, a| acc.checked_mul(a.len() as u128)).unwrap_or(u128::MAX);
    if total > cap as u128 {
        return Err(Error::ResourceCap { what: format!("net lattice at radius {r}"), requested: total, cap: cap as u128 });
    }
    let mut pts = vec![Vec::with_capacity(d)];
    for a in &axes {
        let mut next = Vec::with_capacity(pts.len() * a.len());
        for p in &pts {
            for &v in a {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        pts = next;
    }
    Ok(pts)
}

fn build_level(domain: &CoordBox, i: i32, seed: u64, cap: usize) -> Result<NetLevel> {
    let r = (-(i as f64)).exp2();
    let mut lat = lattice(domain, r, cap)?;
    let lattice_size = lat.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as i64 as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    lat.shuffle(&mut rng);
    let d = domain.lo().len();
    let hbound = (0..d - 1).map(|k| domain.lo()[k].abs().max(domain.hi()[k].abs()).powi(2)).sum::<f64>().sqrt();
    let mut grid = Grid::new(r, hbound);
    let mut points: Vec<HeisPoint> = Vec::new();
    for c in lat {
        let z = c[d - 1];
        let p = HeisPoint::new(c[..d - 1].to_vec(), z)?;
        let free = grid.neighbours(&p, |j| points[j].kor_dist_unchecked(&p) > r);
        if free {
            grid.insert(&p, points.len());
            points.push(p);
        }
    }
    Ok(NetLevel { level: i, radius: r, points, lattice_size, grid })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TLevel {
    pub level: i32,
    /// `|Q_{Γ,i}|`.
    pub balls: usize,
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TSum {
    pub total: f64,
    pub diameter: f64,
    pub a: f64,
    pub levels: Vec<TLevel>,
    /// Points of `Γ` not within `2^{-i}` of any net point, summed over levels.
    pub uncovered: usize,
}

/// `A = 10μ + 1`.
pub fn default_a(mu: f64) -> f64 {
    10.0 * mu + 1.0
}

/// Truncated `T(Γ; f) = Σ_{i ≥ −⌊log₂ diam Γ⌋}^{depth} Σ_{q ∈ Q_{Γ,i}} 4^{-i} β_f(q, A·2^{-i})²`.
pub fn t_sum<F: MapField + ?Sized>(
    gamma: &[HeisPoint],
    f: &F,
    nets: &NetFamily,
    a: f64,
    depth: i32,
    sampler: &BallSampler,
) -> Result<TSum> {
    if gamma.is_empty() {
        return Err(Error::invalid("Γ must be nonempty"));
    }
    if !(a > 0.0) {
        return Err(Error::invalid("A must be positive"));
    }
    let mut diam = 0.0f64;
    for (i, p) in gamma.iter().enumerate() {
        for q in &gamma[i + 1..] {
            diam = diam.max(p.kor_dist(q)?);
        }
    }
    if diam == 0.0 {
        return Ok(TSum { total: 0.0, diameter: 0.0, a, levels: Vec::new(), uncovered: 0 });
    }
    let i0 = -(diam.log2().floor() as i32);
    let mut levels = Vec::new();
    let mut uncovered = 0;
    let mut total = 0.0;
    for i in i0..=depth {
        let net = nets.level(i).ok_or_else(|| Error::invalid(format!("net level {i} missing")))?;
        let mut q: Vec<usize> = Vec::new();
        let mut buf = Vec::new();
        for p in gamma {
            buf.clear();
            net.near(p, &mut buf);
            if buf.is_empty() {
                uncovered += 1;
            }
            q.extend_from_slice(&buf);
        }
        q.sort_unstable();
        q.dedup();
        let rad = a * net.radius;
        let betas: Vec<f64> = q
            .par_iter()
            .map(|&j| beta_number(f, &Ball::new(net.points[j].clone(), rad)?, sampler))
            .collect::<Result<_>>()?;
        let w = net.radius * net.radius;
        let sum = crate::numeric::compensated_sum(betas.iter().map(|b| w * b * b));
        total += sum;
        levels.push(TLevel { level: i, balls: q.len(), sum });
    }
    Ok(TSum { total, diameter: diam, a, levels, uncovered })
}
