//! q-shifted factorials, the modified Jacobi theta function and friends.
//!
//! All functions are pure and generic over the scalar type. The nome `p = 0`
//! is treated exactly: `theta(x; 0) = 1 - x` and theta-shifted factorials
//! fall back to the q-shifted factorial, so basic-case evaluation never goes
//! through a limit.

use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Complex64, Scalar};

/// Default margin used by [`check_genericity`].
pub const DEFAULT_GUARD: f64 = 1e-6;

/// Iteration ceiling for infinite products; reached only for |q| within
/// roughly 1e-5 of the unit circle.
const MAX_PRODUCT_TERMS: usize = 4_000_000;

/// Truncation sizes `(m, n)` of a Chaundy-Bullard type identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IdentitySize {
    pub m: usize,
    pub n: usize,
}

impl IdentitySize {
    pub fn new(m: usize, n: usize) -> Self {
        IdentitySize { m, n }
    }

    pub fn transposed(self) -> Self {
        IdentitySize { m: self.n, n: self.m }
    }
}

/// Integer exponents of a substitution `a -> a q^a, b -> b q^b, c -> c q^c`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Shift {
    pub a: i32,
    pub b: i32,
    pub c: i32,
}

impl Shift {
    pub const ZERO: Shift = Shift { a: 0, b: 0, c: 0 };

    pub fn new(a: i32, b: i32, c: i32) -> Self {
        Shift { a, b, c }
    }

    pub fn times(self, k: i32) -> Self {
        Shift {
            a: self.a * k,
            b: self.b * k,
            c: self.c * k,
        }
    }
}

impl Add for Shift {
    type Output = Shift;
    fn add(self, rhs: Shift) -> Shift {
        Shift {
            a: self.a + rhs.a,
            b: self.b + rhs.b,
            c: self.c + rhs.c,
        }
    }
}

/// One point `(x, a, b, c, q, p)` at which formulas are evaluated.
#[derive(Debug, Clone)]
pub struct ParamPoint<S> {
    pub x: S,
    pub a: S,
    pub b: S,
    pub c: S,
    pub q: S,
    pub p: S,
    generic: bool,
}

impl<S: Scalar> ParamPoint<S> {
    /// Validates `x, a, b, c, q != 0` and `|p| < 1`.
    pub fn new(x: S, a: S, b: S, c: S, q: S, p: S) -> Result<Self> {
        for (name, v) in [("x", &x), ("a", &a), ("b", &b), ("c", &c), ("q", &q)] {
            if v.is_zero() {
                return Err(Error::InvalidParameter(format!("{name} must be nonzero")));
            }
        }
        if p.modulus() >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "nome must satisfy |p| < 1, got {}",
                p.modulus()
            )));
        }
        Ok(Self::unchecked(x, a, b, c, q, p))
    }

    /// Builds a point without validation. Evaluators still report zero
    /// arguments through their own errors.
    pub fn unchecked(x: S, a: S, b: S, c: S, q: S, p: S) -> Self {
        ParamPoint {
            x,
            a,
            b,
            c,
            q,
            p,
            generic: false,
        }
    }

    /// True for the basic (`p = 0`) case.
    pub fn is_basic(&self) -> bool {
        self.p.is_zero()
    }

    /// Set only by a successful [`ParamPoint::certify`].
    pub fn is_generic(&self) -> bool {
        self.generic
    }

    /// Runs [`check_genericity`] and records the verdict.
    pub fn certify(&mut self, size: IdentitySize, guard: f64) -> bool {
        self.generic = check_genericity(self, size, guard);
        self.generic
    }

    pub fn one(&self) -> S {
        self.q.one()
    }

    pub fn with_x(&self, x: S) -> Self {
        Self::unchecked(x, self.a.clone(), self.b.clone(), self.c.clone(), self.q.clone(), self.p.clone())
    }

    pub fn with_abc(&self, a: S, b: S, c: S) -> Self {
        Self::unchecked(self.x.clone(), a, b, c, self.q.clone(), self.p.clone())
    }

    pub fn with_q(&self, q: S) -> Self {
        Self::unchecked(self.x.clone(), self.a.clone(), self.b.clone(), self.c.clone(), q, self.p.clone())
    }

    pub fn with_p(&self, p: S) -> Self {
        Self::unchecked(self.x.clone(), self.a.clone(), self.b.clone(), self.c.clone(), self.q.clone(), p)
    }

    /// Exchanges the roles of `a` and `b`.
    pub fn swap_ab(&self) -> Self {
        self.with_abc(self.b.clone(), self.a.clone(), self.c.clone())
    }

    /// Applies `a -> a q^s.a`, `b -> b q^s.b`, `c -> c q^s.c`.
    pub fn shifted(&self, s: Shift) -> Self {
        if s == Shift::ZERO {
            let mut out = self.clone();
            out.generic = false;
            return out;
        }
        let q = &self.q;
        self.with_abc(
            self.a.clone() * q.pow_int(s.a as i64),
            self.b.clone() * q.pow_int(s.b as i64),
            self.c.clone() * q.pow_int(s.c as i64),
        )
    }

    /// Parameter values as double precision numbers, in `x, a, b, c, q, p` order.
    pub fn to_c64(&self) -> [Complex64; 6] {
        [
            self.x.to_c64(),
            self.a.to_c64(),
            self.b.to_c64(),
            self.c.to_c64(),
            self.q.to_c64(),
            self.p.to_c64(),
        ]
    }
}

impl ParamPoint<Complex64> {
    /// Re-expresses the point at the precision of `unit`.
    pub fn lift_to<S: Scalar>(&self, unit: &S) -> ParamPoint<S> {
        ParamPoint {
            x: unit.lift(self.x),
            a: unit.lift(self.a),
            b: unit.lift(self.b),
            c: unit.lift(self.c),
            q: unit.lift(self.q),
            p: unit.lift(self.p),
            generic: self.generic,
        }
    }
}

/// `num / den`, failing on a vanishing or non-finite denominator.
pub(crate) fn checked_ratio<S: Scalar>(num: S, den: S, what: &'static str) -> Result<S> {
    if den.is_zero() || !den.finite() {
        return Err(Error::Degenerate(what));
    }
    let r = num / den;
    if r.finite() {
        Ok(r)
    } else {
        Err(Error::Degenerate(what))
    }
}

/// The q-shifted factorial `(x; q)_k = prod_{l<k} (1 - x q^l)`.
pub fn qpoch<S: Scalar>(x: &S, q: &S, k: usize) -> S {
    let one = x.one();
    let mut acc = one.clone();
    let mut term = x.clone();
    for l in 0..k {
        acc = acc * (one.clone() - term.clone());
        if l + 1 < k {
            term = term * q.clone();
        }
    }
    acc
}

/// Product of several q-shifted factorials with common base and length.
pub fn qpoch_many<S: Scalar>(xs: &[S], q: &S, k: usize) -> S {
    xs.iter()
        .fold(q.one(), |acc, x| acc * qpoch(x, q, k))
}

/// `(x; q)_inf` truncated once the remaining tail changes the product by
/// less than `tol` in relative terms.
pub fn qpoch_inf_tol<S: Scalar>(x: &S, q: &S, tol: f64) -> Result<S> {
    let qm = q.modulus();
    if qm >= 1.0 {
        return Err(Error::Divergent(qm));
    }
    let one = x.one();
    let mut acc = one.clone();
    let mut term = x.clone();
    let mut mag = x.modulus();
    let tail = tol * (1.0 - qm);
    if mag == 0.0 {
        return Ok(acc);
    }
    for _ in 0..MAX_PRODUCT_TERMS {
        if mag <= tail {
            return Ok(acc);
        }
        acc = acc * (one.clone() - term.clone());
        term = term * q.clone();
        mag *= qm;
    }
    Err(Error::Divergent(qm))
}

/// `(x; q)_inf` at the working precision of `x`.
pub fn qpoch_inf<S: Scalar>(x: &S, q: &S) -> Result<S> {
    qpoch_inf_tol(x, q, x.unit_roundoff())
}

/// Modified Jacobi theta function `theta(x; p) = (x, p/x; p)_inf`.
pub fn theta_tol<S: Scalar>(x: &S, p: &S, tol: f64) -> Result<S> {
    if x.is_zero() {
        return Err(Error::ZeroArgument);
    }
    if p.is_zero() {
        return Ok(x.one() - x.clone());
    }
    let pm = p.modulus();
    if pm >= 1.0 {
        return Err(Error::Divergent(pm));
    }
    if tol < SERIES_ROUNDOFF {
        return theta_series(x, p, tol);
    }
    let first = qpoch_inf_tol(x, p, tol)?;
    let second = qpoch_inf_tol(&(p.clone() / x.clone()), p, tol)?;
    Ok(first * second)
}

/// Below this tolerance theta is summed from the triple product series,
/// whose terms decay like `|p|^{k^2/2}` instead of `|p|^k`.
const SERIES_ROUNDOFF: f64 = 1e-20;

/// `theta(x; p) (p; p)_inf = sum_k (-1)^k p^{k(k-1)/2} x^k`, after moving `x`
/// into `|p| < |w| <= 1` with `theta(p^s w) = (-1)^s p^{-s(s-1)/2} w^{-s} theta(w)`.
fn theta_series<S: Scalar>(x: &S, p: &S, tol: f64) -> Result<S> {
    let lp = p.modulus().ln();
    let s = (x.modulus().ln() / lp).floor() as i64;
    let w = x.clone() * p.pow_int(-s);
    // both halves of the series are bounded by |p|^{j(j-1)/2}
    let target = (tol / 8.0).ln();
    let mut jmax = 2usize;
    while ((jmax * (jmax - 1)) as f64 / 2.0) * lp > target {
        jmax += 1;
    }
    jmax += 2;
    let one = x.one();
    let mut sum = one.clone();
    let mut t = one.clone();
    let mut pk = one.clone();
    for _ in 0..jmax {
        t = -(t * pk.clone() * w.clone());
        pk = pk * p.clone();
        sum = sum + t.clone();
    }
    let winv = w.recip();
    let mut t = one.clone();
    let mut pk = p.clone();
    for _ in 0..jmax {
        t = -(t * pk.clone() * winv.clone());
        pk = pk * p.clone();
        sum = sum + t.clone();
    }
    // Euler's pentagonal series for (p; p)_inf; exponents k(3k-1)/2 step by 3k+1
    let mut euler = one.clone();
    let p3 = p.clone() * p.clone() * p.clone();
    let mut lead = p.clone();
    let mut pk = p.clone();
    let mut step = p3.clone() * p.clone();
    let mut k = 1i64;
    while ((k * (3 * k - 1) / 2) as f64) * lp >= target {
        let pair = lead.clone() + lead.clone() * pk.clone();
        euler = if k % 2 == 1 { euler - pair } else { euler + pair };
        lead = lead * step.clone();
        step = step * p3.clone();
        pk = pk * p.clone();
        k += 1;
    }
    let mut mult = p.pow_int(-s * (s - 1) / 2) * w.pow_int(-s);
    if s.rem_euclid(2) == 1 {
        mult = -mult;
    }
    checked_ratio(sum * mult, euler, "(p; p)_inf")
}

pub fn theta<S: Scalar>(x: &S, p: &S) -> Result<S> {
    theta_tol(x, p, x.unit_roundoff())
}

/// `mant * 2^exp`: keeps long theta products inside the exponent range of
/// `f64` until they are divided by each other.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaled<S> {
    mant: S,
    exp: i64,
}

fn scale_pow2<S: Scalar>(v: &S, mut e: i64) -> S {
    let mut out = v.clone();
    while e != 0 {
        let step = e.clamp(-1000, 1000);
        out = out.scale(f64::powi(2.0, step as i32));
        e -= step;
    }
    out
}

impl<S: Scalar> Scaled<S> {
    pub fn new(v: S) -> Self {
        let mut s = Scaled { mant: v, exp: 0 };
        s.normalize();
        s
    }

    fn normalize(&mut self) {
        let m = self.mant.modulus();
        if m.is_finite() && m > 0.0 {
            let e = m.log2().floor() as i64;
            if e.abs() > 64 {
                self.mant = scale_pow2(&self.mant, -e);
                self.exp += e;
            }
        }
    }

    pub fn mul(mut self, v: &S) -> Self {
        self.mant = self.mant * v.clone();
        self.normalize();
        self
    }

    pub fn mul_scaled(mut self, o: &Scaled<S>) -> Self {
        self.mant = self.mant * o.mant.clone();
        self.exp += o.exp;
        self.normalize();
        self
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    /// The plain value; may overflow.
    pub fn value(&self) -> S {
        scale_pow2(&self.mant, self.exp)
    }
}

impl<S: Scalar> std::ops::Mul for Scaled<S> {
    type Output = Scaled<S>;

    fn mul(self, o: Scaled<S>) -> Scaled<S> {
        self.mul_scaled(&o)
    }
}

/// `num / den` of scaled products, failing on a vanishing or non-finite
/// denominator or a non-finite result.
pub fn scaled_ratio<S: Scalar>(num: &Scaled<S>, den: &Scaled<S>, what: &'static str) -> Result<S> {
    let r = checked_ratio(num.mant.clone(), den.mant.clone(), what)?;
    let v = scale_pow2(&r, num.exp - den.exp);
    if v.finite() {
        Ok(v)
    } else {
        Err(Error::Degenerate(what))
    }
}

/// `theta(x_1, ..., x_s; p)`, the product of theta values.
pub fn theta_prod<S: Scalar>(xs: &[S], p: &S) -> Result<S> {
    Ok(theta_prod_scaled(xs, p)?.value())
}

pub fn theta_prod_scaled<S: Scalar>(xs: &[S], p: &S) -> Result<Scaled<S>> {
    let mut acc = Scaled::new(p.one());
    for x in xs {
        acc = acc.mul(&theta(x, p)?);
    }
    Ok(acc)
}

/// Theta-shifted factorial `(x; q, p)_k = prod_{l<k} theta(x q^l; p)`.
///
/// At `p = 0` this is exactly [`qpoch`].
pub fn theta_fact<S: Scalar>(x: &S, q: &S, p: &S, k: usize) -> Result<S> {
    Ok(theta_fact_scaled(x, q, p, k)?.value())
}

pub fn theta_fact_scaled<S: Scalar>(x: &S, q: &S, p: &S, k: usize) -> Result<Scaled<S>> {
    if k == 0 {
        return Ok(Scaled::new(x.one()));
    }
    if x.is_zero() || (k > 1 && q.is_zero()) {
        return Err(Error::ZeroArgument);
    }
    if p.is_zero() {
        return Ok(Scaled::new(qpoch(x, q, k)));
    }
    let mut acc = Scaled::new(x.one());
    let mut term = x.clone();
    for l in 0..k {
        acc = acc.mul(&theta(&term, p)?);
        if l + 1 < k {
            term = term * q.clone();
        }
    }
    Ok(acc)
}

/// Product of theta-shifted factorials with common base and length.
pub fn theta_fact_many<S: Scalar>(xs: &[S], q: &S, p: &S, k: usize) -> Result<S> {
    Ok(theta_fact_many_scaled(xs, q, p, k)?.value())
}

pub fn theta_fact_many_scaled<S: Scalar>(xs: &[S], q: &S, p: &S, k: usize) -> Result<Scaled<S>> {
    let mut acc = Scaled::new(q.one());
    for x in xs {
        acc = acc.mul_scaled(&theta_fact_scaled(x, q, p, k)?);
    }
    Ok(acc)
}

fn root_of_unity_check<S: Scalar>(q: &S, order: usize) -> Result<S> {
    let f = q.one() - q.pow_int(order as i64);
    let mag = f.modulus();
    if mag <= 64.0 * q.unit_roundoff() {
        return Err(Error::RootOfUnity { order, magnitude: mag });
    }
    Ok(f)
}

/// Gaussian binomial `[n, k]_q`; zero outside `0 <= k <= n`.
pub fn qbinom<S: Scalar>(n: usize, k: i64, q: &S) -> Result<S> {
    if k < 0 || k as usize > n {
        return Ok(q.zero());
    }
    let k = k as usize;
    let k = k.min(n - k);
    let mut acc = q.one();
    for j in 1..=k {
        let den = root_of_unity_check(q, j)?;
        let num = q.one() - q.pow_int((n - k + j) as i64);
        acc = acc * num / den;
    }
    Ok(acc)
}

/// Normalized residual of the Weierstrass-Riemann addition formula
/// `theta(xy, x/y, uv, u/v) - theta(xv, x/v, uy, u/y) = (u/y) theta(yv, y/v, xu, x/u)`.
pub fn addition_formula_residual<S: Scalar>(x: &S, y: &S, u: &S, v: &S, p: &S) -> Result<f64> {
    let t1 = theta_prod(
        &[
            x.clone() * y.clone(),
            x.clone() / y.clone(),
            u.clone() * v.clone(),
            u.clone() / v.clone(),
        ],
        p,
    )?;
    let t2 = theta_prod(
        &[
            x.clone() * v.clone(),
            x.clone() / v.clone(),
            u.clone() * y.clone(),
            u.clone() / y.clone(),
        ],
        p,
    )?;
    let t3 = (u.clone() / y.clone())
        * theta_prod(
            &[
                y.clone() * v.clone(),
                y.clone() / v.clone(),
                x.clone() * u.clone(),
                x.clone() / u.clone(),
            ],
            p,
        )?;
    let scale = t1.modulus().max(t2.modulus()).max(t3.modulus());
    let diff = (t1 - t2 - t3).modulus();
    if scale == 0.0 {
        return Ok(diff);
    }
    Ok(diff / scale)
}

/// Distance-like magnitude of `theta(z; p)` from its zero set `p^Z`.
///
/// The argument is moved into the annulus `|p| < |z| <= 1` with
/// quasi-periodicity before evaluation, so the value is comparable across
/// scales. For `p = 0` this is `|1 - z|`.
pub fn theta_zero_margin<S: Scalar>(z: &S, p: &S) -> f64 {
    if z.is_zero() {
        return 0.0;
    }
    if p.is_zero() {
        return (z.one() - z.clone()).modulus();
    }
    let pm = p.modulus();
    let mut w = z.clone();
    let mut guard = 0;
    while w.modulus() > 1.0 && guard < 10_000 {
        w = w * p.clone();
        guard += 1;
    }
    while w.modulus() <= pm && guard < 10_000 {
        w = w / p.clone();
        guard += 1;
    }
    theta(&w, p).map(|t| t.modulus()).unwrap_or(0.0)
}

/// True iff no theta or q-factorial denominator of the in-scope formulas up
/// to size `(m, n)` comes within `guard` of a zero, and the h-condition holds
/// with that margin.
///
/// Scans `|1 - q^j|`, and the zero margin of every monomial
/// `z q^e` for `z` in `a, b, c, x, ab, a/b, ac, c/a, bc, c/b, ax, a/x, bx,
/// b/x, cx, c/x` and `|e| <= 2(m + n) + 6`.
pub fn check_genericity<S: Scalar>(pp: &ParamPoint<S>, size: IdentitySize, guard: f64) -> bool {
    let (x, a, b, c, q, p) = (&pp.x, &pp.a, &pp.b, &pp.c, &pp.q, &pp.p);
    for v in [x, a, b, c, q] {
        if v.is_zero() || !v.finite() {
            return false;
        }
    }
    if p.modulus() >= 1.0 {
        return false;
    }
    let span = 2 * (size.m + size.n) as i64 + 6;
    for j in 1..=span {
        let qj = q.pow_int(j);
        if (q.one() - qj.clone()).modulus() <= guard {
            return false;
        }
        if !p.is_zero() && theta_zero_margin(&qj, p) <= guard {
            return false;
        }
    }
    let monomials = [
        a.clone(),
        b.clone(),
        c.clone(),
        x.clone(),
        a.clone() * b.clone(),
        a.clone() / b.clone(),
        a.clone() * c.clone(),
        c.clone() / a.clone(),
        b.clone() * c.clone(),
        c.clone() / b.clone(),
        a.clone() * x.clone(),
        a.clone() / x.clone(),
        b.clone() * x.clone(),
        b.clone() / x.clone(),
        c.clone() * x.clone(),
        c.clone() / x.clone(),
    ];
    let qinv = q.recip();
    for z in &monomials {
        // walk z q^e outward from e = 0 in both directions
        let mut up = z.clone();
        let mut down = z.clone();
        if theta_zero_margin(z, p) <= guard {
            return false;
        }
        for _ in 0..span {
            up = up * q.clone();
            down = down * qinv.clone();
            if theta_zero_margin(&up, p) <= guard || theta_zero_margin(&down, p) <= guard {
                return false;
            }
        }
    }
    true
}
