//! Concrete curves: circles, segments, closures, and sampled data.

use std::f64::consts::PI;
use std::sync::Arc;

use super::{lerp, CurveSource, Holder};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Circle {
    pub fn unit() -> Circle {
        Circle { center: [0.0, 0.0], radius: 1.0 }
    }
}

impl CurveSource for Circle {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, t: Dyadic) -> Vec<f64> {
        self.eval_real(t.to_f64())
    }

    fn eval_real(&self, t: f64) -> Vec<f64> {
        let a = 2.0 * PI * (t - t.floor());
        vec![self.center[0] + self.radius * a.cos(), self.center[1] + self.radius * a.sin()]
    }

    fn holder(&self) -> Option<Holder> {
        Some(Holder { exponent: 1.0, constant: 2.0 * PI * self.radius })
    }
}

/// The affine segment `a + t(b − a)`.
#[derive(Debug, Clone)]
pub struct Segment {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Segment {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Segment {
        assert_eq!(a.len(), b.len(), "segment endpoints differ in dimension");
        Segment { a, b }
    }
}

impl CurveSource for Segment {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn eval(&self, t: Dyadic) -> Vec<f64> {
        self.eval_real(t.to_f64())
    }

    fn eval_real(&self, t: f64) -> Vec<f64> {
        lerp(&self.a, &self.b, t)
    }

    fn holder(&self) -> Option<Holder> {
        Some(Holder { exponent: 1.0, constant: super::dist(&self.a, &self.b) })
    }

    fn pl_level(&self) -> Option<u32> {
        Some(0)
    }

    fn breakpoints(&self) -> Option<Vec<Dyadic>> {
        Some(vec![Dyadic::ZERO, Dyadic::ONE])
    }
}

#[derive(Debug, Clone)]
pub struct Constant {
    value: Vec<f64>,
}

impl Constant {
    pub fn new(value: Vec<f64>) -> Constant {
        Constant { value }
    }
}

impl CurveSource for Constant {
    fn dim(&self) -> usize {
        self.value.len()
    }

    fn eval(&self, _t: Dyadic) -> Vec<f64> {
        self.value.clone()
    }

    fn holder(&self) -> Option<Holder> {
        Some(Holder { exponent: 1.0, constant: 0.0 })
    }

    fn pl_level(&self) -> Option<u32> {
        Some(0)
    }

    fn breakpoints(&self) -> Option<Vec<Dyadic>> {
        Some(vec![Dyadic::ZERO, Dyadic::ONE])
    }
}

type CurveFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// A curve given by a closure of the real parameter.
#[derive(Clone)]
pub struct FnCurve {
    dim: usize,
    f: Arc<CurveFn>,
    holder: Option<Holder>,
}

impl FnCurve {
    pub fn new(dim: usize, f: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> FnCurve {
        FnCurve { dim, f: Arc::new(f), holder: None }
    }

    pub fn with_lipschitz(mut self, lip: f64) -> FnCurve {
        self.holder = Some(Holder { exponent: 1.0, constant: lip });
        self
    }

    pub fn with_holder(mut self, holder: Holder) -> FnCurve {
        self.holder = Some(holder);
        self
    }
}

impl CurveSource for FnCurve {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: Dyadic) -> Vec<f64> {
        (self.f)(t.to_f64())
    }

    fn eval_real(&self, t: f64) -> Vec<f64> {
        (self.f)(t)
    }

    fn holder(&self) -> Option<Holder> {
        self.holder
    }
}

/// Piecewise-linear interpolation of samples `(t_k, v_k)` with
/// `t_0 = 0 < … < t_K = 1`.
#[derive(Debug, Clone)]
pub struct SampledCurve {
    ts: Vec<f64>,
    dim: usize,
    values: Vec<f64>,
}

impl SampledCurve {
    pub fn new(ts: Vec<f64>, values: Vec<Vec<f64>>) -> Result<SampledCurve> {
        if ts.len() < 2 || ts.len() != values.len() {
            return Err(Error::invalid("sampled curve needs at least two (t, value) rows"));
        }
        if ts[0] != 0.0 || *ts.last().unwrap() != 1.0 {
            return Err(Error::invalid("sample parameters must run from 0 to 1"));
        }
        if let Some(k) = ts.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!("sample parameters not increasing at row {}", k + 1)));
        }
        let dim = values[0].len();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::invalid("sample dimension must be even and positive"));
        }
        let mut flat = Vec::with_capacity(dim * values.len());
        for v in &values {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
            }
            flat.extend_from_slice(v);
        }
        Ok(SampledCurve { ts, dim, values: flat })
    }

    pub fn ts(&self) -> &[f64] {
        &self.ts
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl CurveSource for SampledCurve {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: Dyadic) -> Vec<f64> {
        self.eval_real(t.to_f64())
    }

    fn eval_real(&self, t: f64) -> Vec<f64> {
        let k = self.ts.partition_point(|&s| s <= t);
        if k == 0 {
            return self.value(0).to_vec();
        }
        if k >= self.ts.len() {
            return self.value(self.ts.len() - 1).to_vec();
        }
        let (t0, t1) = (self.ts[k - 1], self.ts[k]);
        lerp(self.value(k - 1), self.value(k), (t - t0) / (t1 - t0))
    }

    fn holder(&self) -> Option<Holder> {
        let lip = (1..self.ts.len())
            .map(|k| super::dist(self.value(k - 1), self.value(k)) / (self.ts[k] - self.ts[k - 1]))
            .fold(0.0, f64::max);
        Some(Holder { exponent: 1.0, constant: lip })
    }
}
