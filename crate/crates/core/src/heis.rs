//! The Heisenberg group `H_n` in exponential coordinates `(x1,y1,…,xn,yn,z)`.
//!
//! The group law is `a·b = (h_a + h_b, z_a + z_b + ω(h_a,h_b)/2)` with
//! `ω(u,v) = Σ x_i ȳ_i − x̄_i y_i`. Distances use the Korányi gauge
//! `(|h|⁴ + 16z²)^{1/4}`, normalized so that `‖Z‖ = 2`.

use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeisPoint {
    h: Vec<f64>,
    z: f64,
}

impl HeisPoint {
    /// Builds a point from horizontal coordinates `(x1,y1,…)` and `z`.
    pub fn new(h: Vec<f64>, z: f64) -> Result<HeisPoint> {
        if h.is_empty() || h.len() % 2 != 0 {
            return Err(Error::invalid(format!("horizontal part must have even positive length, got {}", h.len())));
        }
        if !z.is_finite() || h.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite coordinate"));
        }
        Ok(HeisPoint { h, z })
    }

    /// Convenience constructor for `H_1`.
    pub fn h1(x: f64, y: f64, z: f64) -> HeisPoint {
        HeisPoint { h: vec![x, y], z }
    }

    pub fn identity(n: usize) -> HeisPoint {
        HeisPoint { h: vec![0.0; 2 * n], z: 0.0 }
    }

    /// The point `Z^t = (0, t)`.
    pub fn vertical(n: usize, t: f64) -> HeisPoint {
        HeisPoint { h: vec![0.0; 2 * n], z: t }
    }

    /// `exp(t·X_i)` for frame index `k` (even `k` is `X_{k/2}`, odd is `Y`).
    pub fn frame(n: usize, k: usize, t: f64) -> HeisPoint {
        let mut h = vec![0.0; 2 * n];
        h[k] = t;
        HeisPoint { h, z: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.h.len() / 2
    }

    /// The projection `π(p)`.
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn into_parts(self) -> (Vec<f64>, f64) {
        (self.h, self.z)
    }

    /// Coordinates as one flat vector `(x1,y1,…,z)`.
    pub fn coords(&self) -> Vec<f64> {
        let mut c = self.h.clone();
        c.push(self.z);
        c
    }

    fn check_n(&self, other: &HeisPoint) -> Result<()> {
        if self.h.len() != other.h.len() {
            return Err(Error::DimensionMismatch { expected: self.h.len() + 1, got: other.h.len() + 1 });
        }
        Ok(())
    }

    pub fn mul(&self, other: &HeisPoint) -> Result<HeisPoint> {
        self.check_n(other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &HeisPoint) -> HeisPoint {
        let h = self.h.iter().zip(&other.h).map(|(a, b)| a + b).collect();
        let z = self.z + other.z + 0.5 * omega_unchecked(&self.h, &other.h);
        HeisPoint { h, z }
    }

    pub fn inv(&self) -> HeisPoint {
        HeisPoint { h: self.h.iter().map(|v| -v).collect(), z: -self.z }
    }

    /// `self⁻¹·other`, computed without the intermediate inverse.
    pub fn delta(&self, other: &HeisPoint) -> Result<HeisPoint> {
        self.check_n(other)?;
        let h = other.h.iter().zip(&self.h).map(|(b, a)| b - a).collect();
        let z = other.z - self.z - 0.5 * omega_unchecked(&self.h, &other.h);
        Ok(HeisPoint { h, z })
    }

    pub fn kor_norm(&self) -> f64 {
        let r2: f64 = self.h.iter().map(|v| v * v).sum();
        (r2 * r2 + 16.0 * self.z * self.z).sqrt().sqrt()
    }

    pub fn kor_dist(&self, other: &HeisPoint) -> Result<f64> {
        Ok(self.delta(other)?.kor_norm())
    }

    /// `(|π(Δ)|², z(Δ))` for `Δ = self⁻¹·other`, without allocating. Both
    /// points must have the same `n`.
    pub(crate) fn delta_parts(&self, other: &HeisPoint) -> (f64, f64) {
        let mut r2 = 0.0;
        for (a, b) in self.h.iter().zip(&other.h) {
            r2 += (b - a) * (b - a);
        }
        (r2, other.z - self.z - 0.5 * omega_unchecked(&self.h, &other.h))
    }

    pub(crate) fn kor_dist_unchecked(&self, other: &HeisPoint) -> f64 {
        let (r2, z) = self.delta_parts(other);
        (r2 * r2 + 16.0 * z * z).sqrt().sqrt()
    }

    /// The dilation `S_r`.
    pub fn dilate(&self, r: f64) -> Result<HeisPoint> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::invalid(format!("dilation factor must be positive, got {r}")));
        }
        Ok(self.dilate_unchecked(r))
    }

    pub(crate) fn dilate_unchecked(&self, r: f64) -> HeisPoint {
        HeisPoint { h: self.h.iter().map(|v| r * v).collect(), z: r * r * self.z }
    }

    /// Length `|π(p)| + 4√|z|` of an explicit horizontal path from `0` to `p`,
    /// hence an upper bound for the Carnot–Carathéodory distance. It lies
    /// between `‖p‖` and `3‖p‖`.
    pub fn cc_upper_bound(&self) -> f64 {
        let r: f64 = self.h.iter().map(|v| v * v).sum::<f64>().sqrt();
        r + 4.0 * self.z.abs().sqrt()
    }

    pub fn horizontal_norm(&self) -> f64 {
        self.h.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Mul for &HeisPoint {
    type Output = HeisPoint;

    /// Panics on mismatched `n`; use [`HeisPoint::mul`] for a checked product.
    fn mul(self, rhs: &HeisPoint) -> HeisPoint {
        self.check_n(rhs).expect("Heisenberg product of points with different n");
        self.mul_unchecked(rhs)
    }
}

/// The standard symplectic form on `R^{2n}`.
pub fn omega(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() || u.len() % 2 != 0 {
        return Err(Error::DimensionMismatch { expected: u.len(), got: v.len() });
    }
    Ok(omega_unchecked(u, v))
}

#[inline]
pub(crate) fn omega_unchecked(u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in (0..u.len()).step_by(2) {
        s += u[i] * v[i + 1] - v[i] * u[i + 1];
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeSign {
    Both,
    Plus,
    Minus,
}

/// The vertical cone `{ |z| ≥ λ|π|² }`, optionally restricted by the sign of `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VConeSpec {
    lambda: f64,
    sign: ConeSign,
}

impl VConeSpec {
    pub fn new(lambda: f64, sign: ConeSign) -> Result<VConeSpec> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("cone parameter must be positive, got {lambda}")));
        }
        Ok(VConeSpec { lambda, sign })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sign(&self) -> ConeSign {
        self.sign
    }

    /// Membership of a group element `g` (the cone at the identity).
    pub fn contains(&self, g: &HeisPoint) -> bool {
        let r2: f64 = g.h.iter().map(|v| v * v).sum();
        let z = g.z;
        if z.abs() < self.lambda * r2 {
            return false;
        }
        match self.sign {
            ConeSign::Both => true,
            ConeSign::Plus => z > 0.0 || (z == 0.0 && r2 == 0.0),
            ConeSign::Minus => z < 0.0 || (z == 0.0 && r2 == 0.0),
        }
    }
}

/// Whether `q` lies in the cone translated to `base`.
pub fn in_vcone(base: &HeisPoint, q: &HeisPoint, cone: &VConeSpec) -> Result<bool> {
    Ok(cone.contains(&base.delta(q)?))
}

/// The order `g ≺ h  ⇔  z(g⁻¹h) > 0`.
pub fn precedes(g: &HeisPoint, h: &HeisPoint) -> Result<bool> {
    Ok(g.delta(h)?.z > 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> HeisPoint {
        HeisPoint::h1(x, y, z)
    }

    #[test]
    fn group_law_examples() {
        assert_eq!(&p(1., 0., 0.) * &p(0., 1., 0.), p(1., 1., 0.5));
        assert_eq!(&p(0., 1., 0.) * &p(1., 0., 0.), p(1., 1., -0.5));
        let a = p(0.3, -2.0, 1.5);
        assert_eq!(&a * &HeisPoint::identity(1), a);
    }

    #[test]
    fn inverse_examples() {
        let a = p(1., 2., 3.);
        assert_eq!(a.inv(), p(-1., -2., -3.));
        assert_eq!(&a.inv() * &a, HeisPoint::identity(1));
        assert_eq!(HeisPoint::identity(1).inv(), HeisPoint::identity(1));
    }

    #[test]
    fn delta_matches_inverse_product() {
        let a = p(0.25, -1.5, 2.0);
        let b = p(-3.0, 0.5, 0.125);
        assert_eq!(a.delta(&b).unwrap(), &a.inv() * &b);
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega(&[1., 0.], &[0., 1.]).unwrap(), 1.0);
        assert_eq!(omega(&[3., 4.], &[3., 4.]).unwrap(), 0.0);
        assert_eq!(omega(&[1., 2., 3., 4.], &[5., 6., 7., 8.]).unwrap(), -8.0);
        assert!(omega(&[1., 2.], &[1., 2., 3., 4.]).is_err());
    }

    #[test]
    fn korányi_examples() {
        assert_eq!(p(0., 0., 1.).kor_norm(), 2.0);
        assert_eq!(p(1., 0., 0.).kor_norm(), 1.0);
        assert!((p(1., 1., 0.5).kor_norm() - 8f64.powf(0.25)).abs() < 1e-15);
        let z = HeisPoint::vertical(1, 1.0);
        assert_eq!(HeisPoint::identity(1).kor_dist(&z).unwrap(), 2.0);
        assert_eq!(z.kor_dist(&z).unwrap(), 0.0);
    }

    #[test]
    fn dilation_examples() {
        assert_eq!(p(1., 1., 1.).dilate(2.0).unwrap(), p(2., 2., 4.));
        assert_eq!(p(0.3, 0.1, -1.).dilate(1.0).unwrap(), p(0.3, 0.1, -1.));
        assert!(p(1., 1., 1.).dilate(0.0).is_err());
    }

    #[test]
    fn cc_bound_examples() {
        assert_eq!(p(0., 0., 1.).cc_upper_bound(), 4.0);
        assert_eq!(p(1., 0., 0.).cc_upper_bound(), 1.0);
    }

    #[test]
    fn cone_examples() {
        let o = HeisPoint::identity(1);
        let c = VConeSpec::new(2.0, ConeSign::Both).unwrap();
        assert!(in_vcone(&o, &p(0., 0., 1.), &c).unwrap());
        assert!(!in_vcone(&o, &p(1., 0., 1.), &c).unwrap());
        assert!(in_vcone(&o, &p(0.5, 0., 1.), &c).unwrap());
        let minus = VConeSpec::new(2.0, ConeSign::Minus).unwrap();
        assert!(!in_vcone(&o, &p(0., 0., 1.), &minus).unwrap());
        assert!(in_vcone(&o, &p(0., 0., -1.), &minus).unwrap());
        assert!(VConeSpec::new(0.0, ConeSign::Both).is_err());
    }

    #[test]
    fn order_examples() {
        let o = HeisPoint::identity(1);
        let z = HeisPoint::vertical(1, 1.0);
        assert!(precedes(&o, &z).unwrap());
        assert!(!precedes(&z, &o).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = HeisPoint::identity(1);
        let b = HeisPoint::identity(2);
        assert!(matches!(a.mul(&b), Err(Error::DimensionMismatch { .. })));
        assert!(a.kor_dist(&b).is_err());
        assert!(HeisPoint::new(vec![1.0], 0.0).is_err());
        assert!(HeisPoint::new(vec![1.0, f64::NAN], 0.0).is_err());
    }
}
