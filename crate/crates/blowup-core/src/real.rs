//! Scalar types used by the time stepper.
//!
//! The shooting search resolves the unstable direction to roughly
//! `e^{-horizon}` relative precision, which is below `f64` resolution for the
//! default horizon. [`Dd`] is an unevaluated sum of two doubles carrying about
//! 32 significant digits; the stepper is generic over [`Real`] so the same code
//! runs in either precision.

use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

/// Arithmetic needed by the stepper.
pub trait Real:
    Copy
    + fmt::Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    /// Product with a plain double.
    fn scale(self, w: f64) -> Self;
    /// Signed power `|x|^{r-1} x`.
    fn spow(self, r: f64) -> Self;
    /// Rounds a double-double value to this precision.
    fn from_dd(x: Dd) -> Self;
    fn is_finite(self) -> bool {
        self.to_f64().is_finite()
    }
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
}

/// Signed power `|x|^{r-1} x` with `|0|^r = 0`.
pub fn spow(x: f64, r: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x > 0.0 {
        libm::pow(x, r)
    } else {
        -libm::pow(-x, r)
    }
}

fn integer_exponent(r: f64) -> Option<u32> {
    if r >= 1.0 && r <= 16.0 && libm::floor(r) == r {
        Some(r as u32)
    } else {
        None
    }
}

impl Real for f64 {
    #[inline]
    fn from_dd(x: Dd) -> Self {
        x.hi + x.lo
    }
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn scale(self, w: f64) -> Self {
        self * w
    }
    #[inline]
    fn spow(self, r: f64) -> Self {
        match integer_exponent(r) {
            Some(k) => powi_signed(self, k),
            None => spow(self, r),
        }
    }
}

fn powi_signed<T: Real>(x: T, k: u32) -> T {
    // x^k with sign handling: |x|^{k-1} x
    let mut acc = x;
    for _ in 1..k {
        acc = acc * x;
    }
    if k % 2 == 0 && x.to_f64() < 0.0 {
        -acc
    } else {
        acc
    }
}

/// Double-double number `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    let t = 134_217_729.0 * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

impl Dd {
    pub const fn new(hi: f64, lo: f64) -> Self {
        Dd { hi, lo }
    }
}

impl fmt::Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dd({:e} + {:e})", self.hi, self.lo)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(core::cmp::Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * b.lo + self.lo * b.hi));
        Dd { hi, lo }
    }
}

impl Real for Dd {
    #[inline]
    fn from_dd(x: Dd) -> Self {
        x
    }
    #[inline]
    fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
    #[inline]
    fn scale(self, w: f64) -> Self {
        let (p, e) = two_prod(self.hi, w);
        let (hi, lo) = quick_two_sum(p, e + self.lo * w);
        Dd { hi, lo }
    }
    /// Exact to double-double precision for integer exponents; other
    /// exponents are only accurate to `f64` precision.
    fn spow(self, r: f64) -> Self {
        match integer_exponent(r) {
            Some(k) => powi_signed(self, k),
            None => Dd::from_f64(spow(self.to_f64(), r)),
        }
    }
}

impl Dd {
    /// Midpoint of two values, exact up to double-double rounding.
    pub fn midpoint(a: Dd, b: Dd) -> Dd {
        (a + b).scale(0.5)
    }
}
