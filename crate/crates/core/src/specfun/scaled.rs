//! Sign–mantissa–exponent reals for quantities far outside the f64 range.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// `mantissa · 2^exponent` with `|mantissa| ∈ [1, 2)`, or exactly zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledReal {
    mantissa: f64,
    exponent: i64,
}

const LN_2: f64 = std::f64::consts::LN_2;

/// Splits a finite nonzero f64 into `(m, e)` with `|m| ∈ [1, 2)`.
fn frexp(v: f64) -> (f64, i64) {
    debug_assert!(v.is_finite() && v != 0.0);
    let (v, bias) = if v.abs() < f64::MIN_POSITIVE {
        (v * 2f64.powi(64), -64)
    } else {
        (v, 0)
    };
    let bits = v.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1023u64 << 52));
    (m, raw_exp - 1023 + bias)
}

/// `v · 2^e` without intermediate overflow.
fn ldexp(mut v: f64, mut e: i64) -> f64 {
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
        if v.is_infinite() {
            return v;
        }
    }
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
        if v == 0.0 {
            return v;
        }
    }
    v * 2f64.powi(e as i32)
}

impl ScaledReal {
    pub const ZERO: ScaledReal = ScaledReal {
        mantissa: 0.0,
        exponent: 0,
    };
    pub const ONE: ScaledReal = ScaledReal {
        mantissa: 1.0,
        exponent: 0,
    };

    /// Normalizes `m · 2^e`. Panics on non-finite `m`.
    pub fn from_parts(m: f64, e: i64) -> Self {
        assert!(m.is_finite(), "non-finite mantissa {m}");
        if m == 0.0 {
            return Self::ZERO;
        }
        let (mm, me) = frexp(m);
        Self {
            mantissa: mm,
            exponent: e + me,
        }
    }

    pub fn from_f64(v: f64) -> Self {
        Self::from_parts(v, 0)
    }

    /// `sign · exp(ln_abs)`; `ln_abs = -inf` gives zero.
    pub fn from_ln(ln_abs: f64, sign: f64) -> Self {
        if ln_abs == f64::NEG_INFINITY || sign == 0.0 {
            return Self::ZERO;
        }
        assert!(ln_abs.is_finite(), "non-finite log {ln_abs}");
        let log2 = ln_abs / LN_2;
        let e = log2.floor();
        let frac = (ln_abs - e * LN_2).exp();
        Self::from_parts(sign.signum() * frac, e as i64)
    }

    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    /// -1, 0 or 1.
    pub fn signum(&self) -> f64 {
        if self.mantissa == 0.0 {
            0.0
        } else {
            self.mantissa.signum()
        }
    }

    pub fn abs(&self) -> Self {
        Self {
            mantissa: self.mantissa.abs(),
            exponent: self.exponent,
        }
    }

    /// Natural log of the magnitude (`-inf` for zero).
    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.mantissa.abs().ln() + self.exponent as f64 * LN_2
        }
    }

    /// Nearest f64; saturates to ±inf or 0 outside the f64 range.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            ldexp(self.mantissa, self.exponent)
        }
    }

    /// Integer power by repeated squaring.
    pub fn powi(self, mut k: u64) -> Self {
        let mut base = self;
        let mut acc = Self::ONE;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }

    /// Ratio as an f64, for quotients known to be moderate.
    pub fn ratio(self, other: Self) -> f64 {
        (self / other).to_f64()
    }
}

impl From<f64> for ScaledReal {
    fn from(v: f64) -> Self {
        Self::from_f64(v)
    }
}

impl Mul for ScaledReal {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        Self::from_parts(self.mantissa * rhs.mantissa, self.exponent + rhs.exponent)
    }
}

impl Div for ScaledReal {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        assert!(!rhs.is_zero(), "division by zero ScaledReal");
        if self.is_zero() {
            return Self::ZERO;
        }
        Self::from_parts(self.mantissa / rhs.mantissa, self.exponent - rhs.exponent)
    }
}

impl Add for ScaledReal {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (hi, lo) = if self.exponent >= rhs.exponent {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let shift = hi.exponent - lo.exponent;
        if shift > 60 {
            return hi;
        }
        Self::from_parts(hi.mantissa + ldexp(lo.mantissa, -shift), hi.exponent)
    }
}

impl Neg for ScaledReal {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            mantissa: -self.mantissa,
            exponent: self.exponent,
        }
    }
}

impl Sub for ScaledReal {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl PartialOrd for ScaledReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let d = *self - *other;
        d.mantissa.partial_cmp(&0.0)
    }
}

impl fmt::Display for ScaledReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_f64();
        if v.is_finite() && (v == 0.0 || v.abs() > 1e-300) {
            write!(f, "{v:e}")
        } else {
            let log10 = self.ln_abs() / std::f64::consts::LN_10;
            let e10 = log10.floor();
            write!(f, "{}e{}", self.signum() * 10f64.powf(log10 - e10), e10)
        }
    }
}
