//! Complex scalar abstraction.
//!
//! Every numerical routine in this crate is generic over [`Scalar`], a complex
//! field element with a fixed significand width. Two implementations are
//! provided: plain [`Complex64`] (53-bit significand) and [`MpComplex`], a
//! pair of `astro-float` numbers whose width is chosen at construction.
//!
//! Constants are created with [`Scalar::lift`], which produces a value at the
//! same precision as the receiver, so generic code never needs a global
//! precision setting.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use astro_float::{BigFloat, RoundingMode, Sign};
pub use num_complex::Complex64;

/// A complex number type the evaluators can compute with.
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A constant with the precision of `self`.
    fn lift(&self, z: Complex64) -> Self;

    /// Nearest double-precision value.
    fn to_c64(&self) -> Complex64;

    /// Absolute value, rounded to double precision.
    fn modulus(&self) -> f64;

    fn is_zero(&self) -> bool;

    /// False for NaN or infinite components.
    fn finite(&self) -> bool;

    /// Relative rounding error of a single operation at this precision.
    fn unit_roundoff(&self) -> f64;

    fn lift_real(&self, v: f64) -> Self {
        self.lift(Complex64::new(v, 0.0))
    }

    fn one(&self) -> Self {
        self.lift_real(1.0)
    }

    fn zero(&self) -> Self {
        self.lift_real(0.0)
    }

    fn recip(&self) -> Self {
        self.one() / self.clone()
    }

    /// Multiplies by a real double.
    fn scale(&self, s: f64) -> Self {
        self.clone() * self.lift_real(s)
    }

    /// Integer power by binary exponentiation; negative exponents invert.
    fn pow_int(&self, e: i64) -> Self {
        let mut base = if e < 0 { self.recip() } else { self.clone() };
        let mut n = e.unsigned_abs();
        let mut acc = self.one();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base.clone();
            }
            n >>= 1;
            if n > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }

    /// `z / |z|`, or 1 for zero.
    fn phase(&self) -> Self {
        let m = self.modulus();
        if m == 0.0 {
            self.one()
        } else {
            self.scale(1.0 / m)
        }
    }
}

impl Scalar for Complex64 {
    fn lift(&self, z: Complex64) -> Self {
        z
    }

    fn to_c64(&self) -> Complex64 {
        *self
    }

    fn modulus(&self) -> f64 {
        self.norm()
    }

    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }

    fn finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    fn unit_roundoff(&self) -> f64 {
        f64::EPSILON / 2.0
    }
}

const RM: RoundingMode = RoundingMode::ToEven;

/// Complex number with a configurable binary significand width.
///
/// The width is rounded up by the backend to a multiple of 64 bits. Binary
/// operations run at the larger width of the two operands.
#[derive(Clone, Debug)]
pub struct MpComplex {
    re: BigFloat,
    im: BigFloat,
    bits: usize,
}

impl MpComplex {
    pub fn new(z: Complex64, bits: usize) -> Self {
        let bits = bits.max(64);
        MpComplex {
            re: BigFloat::from_f64(z.re, bits),
            im: BigFloat::from_f64(z.im, bits),
            bits,
        }
    }

    /// The constant 1 at the given width; used as a precision template.
    pub fn unit(bits: usize) -> Self {
        Self::new(Complex64::new(1.0, 0.0), bits)
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    fn parts(re: BigFloat, im: BigFloat, bits: usize) -> Self {
        MpComplex { re, im, bits }
    }
}

fn big_to_f64(v: &BigFloat) -> f64 {
    if v.is_nan() {
        return f64::NAN;
    }
    if v.is_inf_pos() {
        return f64::INFINITY;
    }
    if v.is_inf_neg() {
        return f64::NEG_INFINITY;
    }
    if v.is_zero() {
        return 0.0;
    }
    let Some((words, _, sign, exp, _)) = v.as_raw_parts() else {
        return f64::NAN;
    };
    let len = words.len();
    // mantissa is normalized: value = 0.m * 2^exp, most significant word last
    let mut frac = words[len - 1] as f64 * 2f64.powi(-64);
    if len > 1 {
        frac += words[len - 2] as f64 * 2f64.powi(-128);
    }
    let e = exp as i64;
    let mag = if e > 1100 {
        f64::INFINITY
    } else if e < -1200 {
        0.0
    } else {
        let half = (e / 2) as i32;
        frac * 2f64.powi(half) * 2f64.powi(e as i32 - half)
    };
    match sign {
        Sign::Neg => -mag,
        Sign::Pos => mag,
    }
}

impl Add for MpComplex {
    type Output = MpComplex;
    fn add(self, rhs: MpComplex) -> MpComplex {
        let p = self.bits.max(rhs.bits);
        MpComplex::parts(self.re.add(&rhs.re, p, RM), self.im.add(&rhs.im, p, RM), p)
    }
}

impl Sub for MpComplex {
    type Output = MpComplex;
    fn sub(self, rhs: MpComplex) -> MpComplex {
        let p = self.bits.max(rhs.bits);
        MpComplex::parts(self.re.sub(&rhs.re, p, RM), self.im.sub(&rhs.im, p, RM), p)
    }
}

impl Mul for MpComplex {
    type Output = MpComplex;
    fn mul(self, rhs: MpComplex) -> MpComplex {
        let p = self.bits.max(rhs.bits);
        let rr = self.re.mul(&rhs.re, p, RM);
        let ii = self.im.mul(&rhs.im, p, RM);
        let ri = self.re.mul(&rhs.im, p, RM);
        let ir = self.im.mul(&rhs.re, p, RM);
        MpComplex::parts(rr.sub(&ii, p, RM), ri.add(&ir, p, RM), p)
    }
}

impl Div for MpComplex {
    type Output = MpComplex;
    fn div(self, rhs: MpComplex) -> MpComplex {
        let p = self.bits.max(rhs.bits);
        let den = rhs.re.mul(&rhs.re, p, RM).add(&rhs.im.mul(&rhs.im, p, RM), p, RM);
        let re = self
            .re
            .mul(&rhs.re, p, RM)
            .add(&self.im.mul(&rhs.im, p, RM), p, RM);
        let im = self
            .im
            .mul(&rhs.re, p, RM)
            .sub(&self.re.mul(&rhs.im, p, RM), p, RM);
        MpComplex::parts(re.div(&den, p, RM), im.div(&den, p, RM), p)
    }
}

impl Neg for MpComplex {
    type Output = MpComplex;
    fn neg(self) -> MpComplex {
        MpComplex::parts(self.re.neg(), self.im.neg(), self.bits)
    }
}

impl Scalar for MpComplex {
    fn lift(&self, z: Complex64) -> Self {
        MpComplex::new(z, self.bits)
    }

    fn to_c64(&self) -> Complex64 {
        Complex64::new(big_to_f64(&self.re), big_to_f64(&self.im))
    }

    fn modulus(&self) -> f64 {
        let z = self.to_c64();
        z.re.hypot(z.im)
    }

    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn finite(&self) -> bool {
        !(self.re.is_nan() || self.im.is_nan() || self.re.is_inf() || self.im.is_inf())
    }

    fn unit_roundoff(&self) -> f64 {
        2f64.powi(-(self.bits as i32))
    }

    fn scale(&self, s: f64) -> Self {
        let f = BigFloat::from_f64(s, self.bits);
        MpComplex::parts(
            self.re.mul(&f, self.bits, RM),
            self.im.mul(&f, self.bits, RM),
            self.bits,
        )
    }
}

/// `|lhs - rhs| / max(1, |lhs|, |rhs|)`.
pub fn relative_residual<S: Scalar>(lhs: &S, rhs: &S) -> f64 {
    let diff = (lhs.clone() - rhs.clone()).modulus();
    diff / 1f64.max(lhs.modulus()).max(rhs.modulus())
}

/// Entries below this fraction of the largest entry count as structural zeros
/// in [`coefficientwise_residual`].
pub const STRUCTURAL_ZERO: f64 = 1e-14;

/// Largest per-entry discrepancy `|f - g| / max(|f|, |g|)` between two
/// coefficient lists; the shorter list is padded with zeros.
///
/// Pairs where both entries are below `STRUCTURAL_ZERO` times the largest
/// entry of either list are skipped.
pub fn coefficientwise_residual(lhs: &[Complex64], rhs: &[Complex64]) -> f64 {
    let len = lhs.len().max(rhs.len());
    let get = |v: &[Complex64], k: usize| v.get(k).copied().unwrap_or_default();
    let rowmax = lhs.iter().chain(rhs).map(|z| z.norm()).fold(0.0, f64::max);
    let floor = STRUCTURAL_ZERO * rowmax;
    let mut worst: f64 = 0.0;
    for k in 0..len {
        let (f, g) = (get(lhs, k), get(rhs, k));
        let scale = f.norm().max(g.norm());
        if scale <= floor || scale == 0.0 {
            continue;
        }
        let r = (f - g).norm() / scale;
        worst = if r.is_nan() { f64::NAN } else { worst.max(r) };
    }
    if !rowmax.is_finite() {
        return f64::NAN;
    }
    worst
}

/// `max_k |f_k - g_k| / max(1, max_k |f_k|, max_k |g_k|)`.
pub fn normwise_residual(lhs: &[Complex64], rhs: &[Complex64]) -> f64 {
    let len = lhs.len().max(rhs.len());
    let get = |v: &[Complex64], k: usize| v.get(k).copied().unwrap_or_default();
    if lhs.iter().chain(rhs).any(|z| !z.is_finite()) {
        return f64::NAN;
    }
    let scale = lhs.iter().chain(rhs).map(|z| z.norm()).fold(1.0, f64::max);
    (0..len).map(|k| (get(lhs, k) - get(rhs, k)).norm()).fold(0.0, f64::max) / scale
}

/// Lifts an unsigned integer exactly (up to the target precision).
pub fn lift_u128<S: Scalar>(unit: &S, v: u128) -> S {
    let lo = (v & ((1u128 << 52) - 1)) as f64;
    let hi = (v >> 52) as f64;
    if hi == 0.0 {
        unit.lift_real(lo)
    } else {
        unit.lift_real(hi) * unit.lift_real(2f64.powi(52)) + unit.lift_real(lo)
    }
}
