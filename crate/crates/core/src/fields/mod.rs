//! Maps `H_n → R^{2n}` with horizontal derivatives.
//!
//! `D_H f_p` is the `2n × 2n` matrix whose columns are `d/dt f(p·X_k^t)` at
//! `t = 0` for the left-invariant frame `X_1, Y_1, …, X_n, Y_n`, where
//! `X = ∂x − (y/2)∂z` and `Y = ∂y + (x/2)∂z`. Fields may supply it
//! analytically; otherwise it is taken by central differences along the
//! one-parameter subgroups.

mod ball;
mod beta;
mod nets;
mod trace;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heis::HeisPoint;

pub use ball::{Ball, BallSampler, CoordBox};
pub use beta::{affine_fit, beta_number, bilip_check, AffineFit, BilipReport};
pub use nets::{default_a, t_sum, NetFamily, NetLevel, TLevel, TSum, DEFAULT_LATTICE_CAP};
pub use trace::{control_check, correct, trace_components, trace_fiber, ControlCheck, TraceConfig, Traced};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// A deterministic map `H_n → R^{2n}`.
pub trait MapField: Send + Sync {
    fn n(&self) -> usize;

    fn eval(&self, p: &HeisPoint) -> Vec<f64>;

    /// Analytic `D_H f_p`, if known.
    fn hgrad(&self, _p: &HeisPoint) -> Option<DMatrix<f64>> {
        None
    }

    /// Analytic `Zf(p)`, if known.
    fn zgrad(&self, _p: &HeisPoint) -> Option<Vec<f64>> {
        None
    }

    fn fd_step(&self) -> f64 {
        DEFAULT_FD_STEP
    }
}

impl<F: MapField + ?Sized> MapField for Arc<F> {
    fn n(&self) -> usize {
        (**self).n()
    }
    fn eval(&self, p: &HeisPoint) -> Vec<f64> {
        (**self).eval(p)
    }
    fn hgrad(&self, p: &HeisPoint) -> Option<DMatrix<f64>> {
        (**self).hgrad(p)
    }
    fn zgrad(&self, p: &HeisPoint) -> Option<Vec<f64>> {
        (**self).zgrad(p)
    }
    fn fd_step(&self) -> f64 {
        (**self).fd_step()
    }
}

impl<F: MapField + ?Sized> MapField for Box<F> {
    fn n(&self) -> usize {
        (**self).n()
    }
    fn eval(&self, p: &HeisPoint) -> Vec<f64> {
        (**self).eval(p)
    }
    fn hgrad(&self, p: &HeisPoint) -> Option<DMatrix<f64>> {
        (**self).hgrad(p)
    }
    fn zgrad(&self, p: &HeisPoint) -> Option<Vec<f64>> {
        (**self).zgrad(p)
    }
    fn fd_step(&self) -> f64 {
        (**self).fd_step()
    }
}

type EvalFn = dyn Fn(&HeisPoint) -> Vec<f64> + Send + Sync;
type GradFn = dyn Fn(&HeisPoint) -> DMatrix<f64> + Send + Sync;

/// A field given by closures, for ad-hoc maps in tests and experiments.
#[derive(Clone)]
pub struct FnField {
    n: usize,
    f: Arc<EvalFn>,
    grad: Option<Arc<GradFn>>,
    fd_step: f64,
}

impl FnField {
    pub fn new(n: usize, f: impl Fn(&HeisPoint) -> Vec<f64> + Send + Sync + 'static) -> FnField {
        FnField { n, f: Arc::new(f), grad: None, fd_step: DEFAULT_FD_STEP }
    }

    pub fn with_hgrad(mut self, g: impl Fn(&HeisPoint) -> DMatrix<f64> + Send + Sync + 'static) -> FnField {
        self.grad = Some(Arc::new(g));
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> FnField {
        self.fd_step = h;
        self
    }
}

impl std::fmt::Debug for FnField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnField").field("n", &self.n).field("analytic", &self.grad.is_some()).finish()
    }
}

impl MapField for FnField {
    fn n(&self) -> usize {
        self.n
    }
    fn eval(&self, p: &HeisPoint) -> Vec<f64> {
        (self.f)(p)
    }
    fn hgrad(&self, p: &HeisPoint) -> Option<DMatrix<f64>> {
        self.grad.as_ref().map(|g| g(p))
    }
    fn fd_step(&self) -> f64 {
        self.fd_step
    }
}

/// Named analytic test fields. Perturbations act on the first coordinate
/// pair `(x1, y1)`; the remaining coordinates pass through `π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    /// `π`.
    Projection,
    /// `A·π` for a `2n × 2n` matrix stored row-major.
    Linear { matrix: Vec<f64> },
    /// `π + a z² e_1`.
    Shear { a: f64 },
    /// `π + a z² e_1 + b z e_2`.
    Parabolic { a: f64, b: f64 },
    /// `π + a z e_1`.
    ZPerturb { a: f64 },
    /// `π(q⁻¹p)`.
    Translated { h: Vec<f64>, z: f64 },
    /// `π` with the `y1` component set to 0, so `J_H ≡ 0`.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuiltinField {
    n: usize,
    kind: FieldKind,
}

/// Names accepted by [`builtin_field`].
pub const FIELD_NAMES: [&str; 7] = ["projection", "linear", "shear", "parabolic", "zpert", "translated", "degenerate"];

/// Registry lookup. Parameters `a` and `b` are interpreted per field:
/// `linear` uses `[[1+a, b], [0, 1]]` on the first pair, `translated` uses
/// `q = (a, b, 0, …; 0)`.
pub fn builtin_field(name: &str, n: usize, a: f64, b: f64) -> Result<BuiltinField> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid("field parameters must be finite"));
    }
    let kind = match name {
        "projection" | "identity" => FieldKind::Projection,
        "linear" => {
            let d = 2 * n;
            let mut m = vec![0.0; d * d];
            for i in 0..d {
                m[i * d + i] = 1.0;
            }
            m[0] = 1.0 + a;
            if d > 1 {
                m[1] = b;
            }
            FieldKind::Linear { matrix: m }
        }
        "shear" => FieldKind::Shear { a },
        "parabolic" => FieldKind::Parabolic { a, b },
        "zpert" => FieldKind::ZPerturb { a },
        "translated" => {
            let mut h = vec![0.0; 2 * n];
            h[0] = a;
            h[1] = b;
            FieldKind::Translated { h, z: 0.0 }
        }
        "degenerate" => FieldKind::Degenerate,
        other => {
            return Err(Error::invalid(format!("unknown field {other:?}; known: {}", FIELD_NAMES.join(", "))))
        }
    };
    BuiltinField::new(n, kind)
}

impl BuiltinField {
    pub fn new(n: usize, kind: FieldKind) -> Result<BuiltinField> {
        if n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        match &kind {
            FieldKind::Linear { matrix } if matrix.len() != 4 * n * n => {
                return Err(Error::DimensionMismatch { expected: 4 * n * n, got: matrix.len() })
            }
            FieldKind::Translated { h, .. } if h.len() != 2 * n => {
                return Err(Error::DimensionMismatch { expected: 2 * n, got: h.len() })
            }
            _ => {}
        }
        Ok(BuiltinField { n, kind })
    }

    pub fn projection(n: usize) -> BuiltinField {
        BuiltinField { n, kind: FieldKind::Projection }
    }

    pub fn shear(a: f64) -> BuiltinField {
        BuiltinField { n: 1, kind: FieldKind::Shear { a } }
    }

    pub fn parabolic(a: f64, b: f64) -> BuiltinField {
        BuiltinField { n: 1, kind: FieldKind::Parabolic { a, b } }
    }

    pub fn linear(n: usize, matrix: &DMatrix<f64>) -> Result<BuiltinField> {
        if matrix.nrows() != 2 * n || matrix.ncols() != 2 * n {
            return Err(Error::DimensionMismatch { expected: 2 * n, got: matrix.nrows() });
        }
        let m = matrix.transpose().as_slice().to_vec();
        BuiltinField::new(n, FieldKind::Linear { matrix: m })
    }

    pub fn translated(q: &HeisPoint) -> BuiltinField {
        BuiltinField { n: q.n(), kind: FieldKind::Translated { h: q.h().to_vec(), z: q.z() } }
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    /// True when `J_H` vanishes identically.
    pub fn is_degenerate(&self) -> bool {
        match &self.kind {
            FieldKind::Degenerate => true,
            FieldKind::Linear { matrix } => {
                let d = 2 * self.n;
                DMatrix::from_row_slice(d, d, matrix).determinant() == 0.0
            }
            _ => false,
        }
    }
}

impl MapField for BuiltinField {
    fn n(&self) -> usize {
        self.n
    }

    fn eval(&self, p: &HeisPoint) -> Vec<f64> {
        let h = p.h();
        let z = p.z();
        let mut v = h.to_vec();
        match &self.kind {
            FieldKind::Projection => {}
            FieldKind::Linear { matrix } => {
                let d = 2 * self.n;
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi = (0..d).map(|j| matrix[i * d + j] * h[j]).sum();
                }
            }
            FieldKind::Shear { a } => v[0] += a * z * z,
            FieldKind::Parabolic { a, b } => {
                v[0] += a * z * z;
                v[1] += b * z;
            }
            FieldKind::ZPerturb { a } => v[0] += a * z,
            FieldKind::Translated { h: q, .. } => {
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= qi;
                }
            }
            FieldKind::Degenerate => v[1] = 0.0,
        }
        v
    }

    fn hgrad(&self, p: &HeisPoint) -> Option<DMatrix<f64>> {
        let d = 2 * self.n;
        let (x, y, z) = (p.h()[0], p.h()[1], p.z());
        let mut m = DMatrix::identity(d, d);
        match &self.kind {
            FieldKind::Projection | FieldKind::Translated { .. } => {}
            FieldKind::Linear { matrix } => m = DMatrix::from_row_slice(d, d, matrix),
            FieldKind::Shear { a } => {
                m[(0, 0)] = 1.0 - a * z * y;
                m[(0, 1)] = a * z * x;
            }
            FieldKind::Parabolic { a, b } => {
                m[(0, 0)] = 1.0 - a * z * y;
                m[(0, 1)] = a * z * x;
                m[(1, 0)] = -b * y / 2.0;
                m[(1, 1)] = 1.0 + b * x / 2.0;
            }
            FieldKind::ZPerturb { a } => {
                m[(0, 0)] = 1.0 - a * y / 2.0;
                m[(0, 1)] = a * x / 2.0;
            }
            FieldKind::Degenerate => m[(1, 1)] = 0.0,
        }
        Some(m)
    }

    fn zgrad(&self, p: &HeisPoint) -> Option<Vec<f64>> {
        let z = p.z();
        let mut g = vec![0.0; 2 * self.n];
        match &self.kind {
            FieldKind::Shear { a } => g[0] = 2.0 * a * z,
            FieldKind::Parabolic { a, b } => {
                g[0] = 2.0 * a * z;
                g[1] = *b;
            }
            FieldKind::ZPerturb { a } => g[0] = *a,
            _ => {}
        }
        Some(g)
    }
}

fn check_point<F: MapField + ?Sized>(f: &F, p: &HeisPoint) -> Result<()> {
    if p.n() != f.n() {
        return Err(Error::DimensionMismatch { expected: 2 * f.n() + 1, got: 2 * p.n() + 1 });
    }
    Ok(())
}

pub(crate) fn eval_checked<F: MapField + ?Sized>(f: &F, p: &HeisPoint) -> Result<Vec<f64>> {
    let v = f.eval(p);
    if v.len() != 2 * f.n() {
        return Err(Error::DimensionMismatch { expected: 2 * f.n(), got: v.len() });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Degenerate(format!("field is not finite at {:?}", p.coords())));
    }
    Ok(v)
}

/// Central-difference `D_H f_p` with step `h·max(1, ‖p‖)`.
pub fn fd_jacobian<F: MapField + ?Sized>(f: &F, p: &HeisPoint, h: f64) -> Result<DMatrix<f64>> {
    check_point(f, p)?;
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let n = f.n();
    let d = 2 * n;
    let step = h * p.kor_norm().max(1.0);
    let mut m = DMatrix::zeros(d, d);
    for k in 0..d {
        let fp = eval_checked(f, &p.mul(&HeisPoint::frame(n, k, step))?)?;
        let fm = eval_checked(f, &p.mul(&HeisPoint::frame(n, k, -step))?)?;
        for i in 0..d {
            m[(i, k)] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite derivative".into()));
    }
    Ok(m)
}

/// `D_H f_p`: analytic when the field provides it, else finite differences.
pub fn horizontal_jacobian<F: MapField + ?Sized>(f: &F, p: &HeisPoint) -> Result<DMatrix<f64>> {
    check_point(f, p)?;
    match f.hgrad(p) {
        Some(m) => {
            let d = 2 * f.n();
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: m.nrows() });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Degenerate("non-finite derivative".into()));
            }
            Ok(m)
        }
        None => fd_jacobian(f, p, f.fd_step()),
    }
}

/// `J_H f(p) = det D_H f_p`.
pub fn jh<F: MapField + ?Sized>(f: &F, p: &HeisPoint) -> Result<f64> {
    Ok(horizontal_jacobian(f, p)?.determinant())
}

/// `Zf(p)`, the derivative along the center.
pub fn z_derivative<F: MapField + ?Sized>(f: &F, p: &HeisPoint) -> Result<Vec<f64>> {
    check_point(f, p)?;
    if let Some(g) = f.zgrad(p) {
        return Ok(g);
    }
    let n = f.n();
    let step = f.fd_step() * p.kor_norm().max(1.0);
    let fp = eval_checked(f, &p.mul(&HeisPoint::vertical(n, step))?)?;
    let fm = eval_checked(f, &p.mul(&HeisPoint::vertical(n, -step))?)?;
    Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * step)).collect())
}

/// `‖D_H f_p − id‖_op`.
pub fn deviation_from_identity<F: MapField + ?Sized>(f: &F, p: &HeisPoint) -> Result<f64> {
    let m = horizontal_jacobian(f, p)?;
    let d = m.nrows();
    let dev = m - DMatrix::<f64>::identity(d, d);
    Ok(dev.singular_values().max())
}

pub(crate) fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn projection_has_identity_jacobian() {
        let f = BuiltinField::projection(2);
        let p = HeisPoint::new(vec![0.3, -0.2, 1.0, 0.5], 0.7).unwrap();
        assert_eq!(horizontal_jacobian(&f, &p).unwrap(), DMatrix::identity(4, 4));
        assert_relative_eq!(fd_jacobian(&f, &p, 1e-5).unwrap(), DMatrix::identity(4, 4), epsilon = 1e-9);
        assert_eq!(jh(&f, &p).unwrap(), 1.0);
    }

    #[test]
    fn diagonal_map() {
        let f = FnField::new(1, |p| vec![2.0 * p.h()[0], p.h()[1]]);
        let m = horizontal_jacobian(&f, &HeisPoint::h1(0.4, 0.1, -2.0)).unwrap();
        assert_relative_eq!(m, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]), epsilon = 1e-9);
    }

    #[test]
    fn shear_matches_symbolic_derivative() {
        // X = ∂x − (y/2)∂z and Y = ∂y + (x/2)∂z applied to x + a z².
        let a = 0.3;
        let (x, y, z) = (0.7, -0.4, 1.3);
        let expect = DMatrix::from_row_slice(2, 2, &[1.0 - a * z * y, a * z * x, 0.0, 1.0]);
        let f = BuiltinField::shear(a);
        let p = HeisPoint::h1(x, y, z);
        assert_relative_eq!(horizontal_jacobian(&f, &p).unwrap(), expect, epsilon = 1e-15);
        let plain = FnField::new(1, move |q| vec![q.h()[0] + a * q.z() * q.z(), q.h()[1]]);
        assert_relative_eq!(horizontal_jacobian(&plain, &p).unwrap(), expect, epsilon = 1e-8);
        assert_relative_eq!(jh(&f, &p).unwrap(), 1.0 - a * z * y, epsilon = 1e-15);
    }

    #[test]
    fn analytic_gradients_agree_with_differences() {
        let p = HeisPoint::h1(0.2, 0.9, -0.6);
        for name in FIELD_NAMES {
            let f = builtin_field(name, 1, 0.15, -0.25).unwrap();
            let exact = horizontal_jacobian(&f, &p).unwrap();
            let fd = fd_jacobian(&f, &p, 1e-4).unwrap();
            assert_relative_eq!(exact, fd, epsilon = 1e-7);
            let zg = f.zgrad(&p).unwrap();
            let plain = FnField::new(1, {
                let f = f.clone();
                move |q| f.eval(q)
            });
            let zfd = z_derivative(&plain, &p).unwrap();
            for (a, b) in zg.iter().zip(&zfd) {
                assert!((a - b).abs() < 1e-8, "{name}: {zg:?} vs {zfd:?}");
            }
        }
    }

    #[test]
    fn linear_determinant() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 3.0]);
        let f = BuiltinField::linear(1, &m).unwrap();
        assert_relative_eq!(jh(&f, &HeisPoint::h1(1.0, 2.0, 3.0)).unwrap(), 5.5, epsilon = 1e-14);
        assert_relative_eq!(f.eval(&HeisPoint::h1(1.0, 2.0, 3.0))[1], 6.5);
    }

    #[test]
    fn degenerate_and_unknown() {
        let f = builtin_field("degenerate", 1, 0.0, 0.0).unwrap();
        assert!(f.is_degenerate());
        assert_eq!(jh(&f, &HeisPoint::h1(0.1, 0.2, 0.3)).unwrap(), 0.0);
        assert!(builtin_field("nope", 1, 0.0, 0.0).is_err());
        assert!(builtin_field("shear", 1, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn non_finite_values_are_errors() {
        let f = FnField::new(1, |p| vec![p.h()[0].ln(), 0.0]);
        assert!(fd_jacobian(&f, &HeisPoint::h1(0.0, 0.0, 0.0), 1e-5).is_err());
    }
}
