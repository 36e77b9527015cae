//! Exact dyadic rationals `m·2^{-e}`.
//!
//! Parameters of the dyadic constructions (grid points, square-vertex times,
//! partition points at exponent 36 and beyond) are kept in this form so that
//! comparisons and grid membership are exact. Mantissas are `i128`; the
//! exponent is capped at [`MAX_EXPONENT`] so that aligned mantissas of values
//! of moderate size never overflow.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest exponent a [`Dyadic`] may carry.
pub const MAX_EXPONENT: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dyadic {
    mantissa: i128,
    exponent: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { mantissa: 0, exponent: 0 };
    pub const ONE: Dyadic = Dyadic { mantissa: 1, exponent: 0 };
    pub const HALF: Dyadic = Dyadic { mantissa: 1, exponent: 1 };

    /// `mantissa·2^{-exponent}` in canonical form. Panics if the exponent is
    /// still above the cap after reduction.
    pub fn new(mantissa: i128, exponent: u32) -> Dyadic {
        Self::try_new(mantissa, exponent).expect("dyadic exponent above cap")
    }

    pub fn try_new(mut mantissa: i128, mut exponent: u32) -> Result<Dyadic> {
        if mantissa == 0 {
            return Ok(Dyadic::ZERO);
        }
        let tz = mantissa.trailing_zeros().min(exponent);
        mantissa >>= tz;
        exponent -= tz;
        if exponent > MAX_EXPONENT {
            return Err(Error::ResourceCap {
                what: "dyadic exponent".into(),
                requested: exponent as u128,
                cap: MAX_EXPONENT as u128,
            });
        }
        Ok(Dyadic { mantissa, exponent })
    }

    pub fn from_int(k: i64) -> Dyadic {
        Dyadic::new(k as i128, 0)
    }

    /// The grid point `j·2^{-level}`.
    pub fn grid(j: i128, level: u32) -> Dyadic {
        Dyadic::new(j, level)
    }

    pub fn mantissa(&self) -> i128 {
        self.mantissa
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0
    }

    /// True when the value lies on the grid `2^{-level}ℤ`.
    pub fn on_grid(&self, level: u32) -> bool {
        self.exponent <= level
    }

    pub fn to_f64(&self) -> f64 {
        // Exact whenever |mantissa| < 2^53.
        (self.mantissa as f64) * (-(self.exponent as f64)).exp2()
    }

    /// Exact conversion of a finite double. Fails when the value needs an
    /// exponent above the cap.
    pub fn from_f64(x: f64) -> Result<Dyadic> {
        if !x.is_finite() {
            return Err(Error::invalid("non-finite parameter"));
        }
        if x == 0.0 {
            return Ok(Dyadic::ZERO);
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1i128 } else { 1 };
        let raw_exp = ((bits >> 52) & 0x7ff) as i32;
        let frac = (bits & ((1u64 << 52) - 1)) as i128;
        let (mant, exp2) = if raw_exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1i128 << 52), raw_exp - 1075)
        };
        // value = sign · mant · 2^{exp2}
        if exp2 >= 0 {
            let m = mant
                .checked_shl(exp2 as u32)
                .filter(|v| v >> (exp2 as u32) == mant)
                .ok_or_else(|| Error::invalid("parameter too large for dyadic"))?;
            Dyadic::try_new(sign * m, 0)
        } else {
            let e = (-exp2) as u32;
            let tz = mant.trailing_zeros().min(e);
            Dyadic::try_new(sign * (mant >> tz), e - tz)
        }
    }

    fn align(a: &Dyadic, b: &Dyadic) -> (i128, i128, u32) {
        let e = a.exponent.max(b.exponent);
        let sa = e - a.exponent;
        let sb = e - b.exponent;
        let ma = shl_checked(a.mantissa, sa);
        let mb = shl_checked(b.mantissa, sb);
        (ma, mb, e)
    }

    /// Multiplies by `2^k`.
    pub fn scale_pow2(&self, k: i32) -> Dyadic {
        if self.is_zero() {
            return *self;
        }
        if k >= 0 {
            let k = k as u32;
            if self.exponent >= k {
                Dyadic::new(self.mantissa, self.exponent - k)
            } else {
                Dyadic::new(shl_checked(self.mantissa, k - self.exponent), 0)
            }
        } else {
            Dyadic::new(self.mantissa, self.exponent + k.unsigned_abs())
        }
    }

    /// Largest integer not above the value.
    pub fn floor(&self) -> i128 {
        self.mantissa >> self.exponent
    }

    pub fn abs(&self) -> Dyadic {
        Dyadic { mantissa: self.mantissa.abs(), exponent: self.exponent }
    }

    pub fn min(self, other: Dyadic) -> Dyadic {
        if self <= other { self } else { other }
    }

    pub fn max(self, other: Dyadic) -> Dyadic {
        if self >= other { self } else { other }
    }
}

fn shl_checked(m: i128, s: u32) -> i128 {
    if m == 0 {
        return 0;
    }
    let r = m.checked_shl(s).expect("dyadic shift overflow");
    assert!(r >> s == m, "dyadic mantissa overflow");
    r
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        let (a, b, e) = Dyadic::align(&self, &rhs);
        Dyadic::new(a.checked_add(b).expect("dyadic add overflow"), e)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        let (a, b, e) = Dyadic::align(&self, &rhs);
        Dyadic::new(a.checked_sub(b).expect("dyadic sub overflow"), e)
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        let m = self.mantissa.checked_mul(rhs.mantissa).expect("dyadic mul overflow");
        Dyadic::new(m, self.exponent + rhs.exponent)
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { mantissa: -self.mantissa, exponent: self.exponent }
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = Dyadic::align(self, other);
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent == 0 {
            write!(f, "{}", self.mantissa)
        } else {
            write!(f, "{}/2^{}", self.mantissa, self.exponent)
        }
    }
}

impl From<i64> for Dyadic {
    fn from(k: i64) -> Self {
        Dyadic::from_int(k)
    }
}
