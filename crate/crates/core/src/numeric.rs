//! Summation and low-discrepancy helpers shared by the geometry modules.

use rayon::prelude::*;

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: Compensated) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = Compensated::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Block size of the fixed reduction tree used by [`ordered_sum`].
pub const BLOCK: usize = 4096;

/// Sums `f(0) + … + f(n-1)` in parallel. Blocks of [`BLOCK`] terms are
/// accumulated independently and merged in index order, so the result does
/// not depend on the number of worker threads.
pub fn ordered_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let partials: Vec<Compensated> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = Compensated::new();
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                acc.add(f(i));
            }
            acc
        })
        .collect();
    let mut total = Compensated::new();
    for p in partials {
        total.merge(p);
    }
    total.value()
}

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(base: u32, mut index: u64) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    r
}

pub const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Halton point `index` in `dim` dimensions, shifted modulo 1 by `shift`
/// (a Cranley–Patterson rotation, which keeps the sequence low-discrepancy
/// while letting a seed pick the realization).
pub fn halton(index: u64, shift: &[f64], out: &mut [f64]) {
    for (d, o) in out.iter_mut().enumerate() {
        let v = radical_inverse(PRIMES[d], index + 1) + shift[d];
        *o = v - v.floor();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_recovers_cancelled_mass() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn ordered_sum_is_thread_independent() {
        let f = |i: usize| ((i as f64) * 0.37).sin() * 1e-3;
        let a = ordered_sum(100_000, f);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| ordered_sum(100_000, f));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(2, 1), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(2, 3), 0.75);
        assert_eq!(radical_inverse(3, 1), 1.0 / 3.0);
    }
}
