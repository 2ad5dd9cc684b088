//! Basic Chaundy-Bullard identities as Bezout identities
//! `1 = P1 Q1 + P2 Q2` with `deg Q1 <= m`, `deg Q2 <= n`.

use crate::error::{Error, Result};
use crate::scalar::{coefficientwise_residual, normwise_residual, relative_residual, Complex64, MpComplex, Scalar};
use crate::special_fn::{qbinom, qpoch};

fn c1() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Dense polynomial, lowest coefficient first.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(c0());
        }
        Poly { coeffs }
    }

    pub fn constant(v: Complex64) -> Self {
        Poly::new(vec![v])
    }

    pub fn one() -> Self {
        Poly::constant(c1())
    }

    /// `x^k`.
    pub fn monomial(k: usize) -> Self {
        let mut v = vec![c0(); k + 1];
        v[k] = c1();
        Poly::new(v)
    }

    /// `u + v x`.
    pub fn linear(u: Complex64, v: Complex64) -> Self {
        Poly::new(vec![u, v])
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or_else(c0)
    }

    /// Index of the last nonzero coefficient; zero for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| *c != c0()).unwrap_or(0)
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs[self.degree()]
    }

    /// `p(s x)`.
    pub fn rescaled(&self, s: f64) -> Poly {
        let mut f = 1.0;
        Poly::new(
            self.coeffs
                .iter()
                .map(|c| {
                    let v = c * f;
                    f *= s;
                    v
                })
                .collect(),
        )
    }

    /// Drops coefficients beyond the degree.
    pub fn trimmed(&self) -> Poly {
        Poly::new(self.coeffs[..=self.degree()].to_vec())
    }

    /// Keeps the coefficients of `x^0 .. x^{len-1}`.
    pub fn truncate(&self, len: usize) -> Poly {
        Poly::new(self.coeffs.iter().take(len.max(1)).copied().collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let len = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..len).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let len = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..len).map(|k| self.coeff(k) - other.coeff(k)).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![c0(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn scale(&self, s: Complex64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(c0(), |acc, c| acc * x + c)
    }

    /// Remainder of division by `d`.
    pub fn rem(&self, d: &Poly) -> Result<Poly> {
        let dd = d.degree();
        let lead = d.leading();
        if lead == c0() {
            return Err(Error::Singular);
        }
        let mut r = self.trimmed().coeffs;
        while r.len() > dd && !(r.len() == 1 && dd == 0 && r[0] == c0()) {
            let top = r.len() - 1;
            let f = r[top] / lead;
            for k in 0..=dd {
                r[top - dd + k] -= f * d.coeffs[k];
            }
            r.pop();
            if r.is_empty() {
                break;
            }
        }
        Ok(Poly::new(r))
    }

    /// `(p(x) - p(t)) / (x - t)` by synthetic division.
    pub fn divided_difference(&self, t: Complex64) -> Poly {
        let n = self.coeffs.len();
        if n <= 1 {
            return Poly::constant(c0());
        }
        let mut out = vec![c0(); n - 1];
        let mut acc = c0();
        for k in (1..n).rev() {
            acc = acc * t + self.coeffs[k];
            out[k - 1] = acc;
        }
        Poly::new(out)
    }
}

/// `(a x; q)_k` as a polynomial in `x`.
pub fn qpoch_poly(a: Complex64, q: Complex64, k: usize) -> Poly {
    let mut out = Poly::one();
    let mut t = a;
    for _ in 0..k {
        out = out.mul(&Poly::linear(c1(), -t));
        t *= q;
    }
    out
}

/// `(a x, a/x; q)_k = prod_l (1 + a^2 q^{2l} - a q^l y)` as a polynomial in
/// `y = x + 1/x`.
pub fn askey_wilson_poly(a: Complex64, q: Complex64, k: usize) -> Poly {
    let mut out = Poly::one();
    let mut t = a;
    for _ in 0..k {
        out = out.mul(&Poly::linear(c1() + t * t, -t));
        t *= q;
    }
    out
}

/// Taylor coefficients of `1 / (x; q)_{n+1}` up to `x^m`: `[n+k, k]_q`.
pub fn series_inv_qpoch(n: usize, q: Complex64, m: usize) -> Result<Poly> {
    let coeffs = (0..=m)
        .map(|k| qbinom(n + k, k as i64, &q))
        .collect::<Result<Vec<_>>>()?;
    Ok(Poly::new(coeffs))
}

/// Pivot ratio below which the two moduli are taken to share a root.
pub const COMMON_ROOT_PIVOT_RATIO: f64 = 1e-13;

/// Solves `a z = rhs` by Gaussian elimination with partial pivoting.
/// Returns the solution and the ratio of smallest to largest pivot.
pub fn solve_linear(mut a: Vec<Vec<Complex64>>, mut rhs: Vec<Complex64>) -> Result<(Vec<Complex64>, f64)> {
    let n = rhs.len();
    let mut pmin = f64::INFINITY;
    let mut pmax: f64 = 0.0;
    for col in 0..n {
        let (piv, mag) = (col..n)
            .map(|r| (r, a[r][col].norm()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if mag == 0.0 || !mag.is_finite() {
            return Err(Error::Singular);
        }
        pmin = pmin.min(mag);
        pmax = pmax.max(mag);
        a.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == c0() {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[r][k] -= f * v;
            }
            let v = rhs[col];
            rhs[r] -= f * v;
        }
    }
    let mut z = vec![c0(); n];
    for r in (0..n).rev() {
        let s = (r + 1..n).fold(rhs[r], |acc, k| acc - a[r][k] * z[k]);
        z[r] = s / a[r][r];
    }
    Ok((z, if n == 0 { 1.0 } else { pmin / pmax }))
}

/// The unique `(Q1, Q2)` with `deg Q1 <= m`, `deg Q2 <= n` and
/// `P1 Q1 + P2 Q2 = 1`, for `deg P1 <= n + 1` and `deg P2 <= m + 1`.
pub fn bezout_solve(p1: &Poly, p2: &Poly, m: usize, n: usize) -> Result<(Poly, Poly)> {
    if p1.degree() > n + 1 || p2.degree() > m + 1 {
        return Err(Error::InvalidParameter(format!(
            "degrees ({}, {}) exceed ({}, {})",
            p1.degree(),
            p2.degree(),
            n + 1,
            m + 1
        )));
    }
    // Solve in t = y / s, with s a power of two near the geometric mean of
    // the root moduli, so that the Sylvester rows are of comparable size.
    let s = root_scale(&[p1, p2]);
    let (r1, r2) = (p1.rescaled(s), p2.rescaled(s));
    let size = m + n + 2;
    let mut mat = vec![vec![c0(); size]; size];
    for j in 0..=m {
        for (i, c) in r1.coeffs.iter().enumerate().take(n + 2) {
            mat[i + j][j] = *c;
        }
    }
    for j in 0..=n {
        for (i, c) in r2.coeffs.iter().enumerate().take(m + 2) {
            mat[i + j][m + 1 + j] = *c;
        }
    }
    let mut rhs = vec![c0(); size];
    rhs[0] = c1();
    let (mut z, ratio) = solve_linear(mat.clone(), rhs.clone())?;
    if ratio < COMMON_ROOT_PIVOT_RATIO {
        return Err(Error::CommonRoot(ratio));
    }
    for _ in 0..REFINE_STEPS {
        let r = wide_residual(&mat, &z, &rhs);
        let (d, _) = solve_linear(mat.clone(), r)?;
        for (zi, di) in z.iter_mut().zip(d) {
            *zi += di;
        }
    }
    let inv = 1.0 / s;
    Ok((
        Poly::new(z[..=m].to_vec()).rescaled(inv),
        Poly::new(z[m + 1..].to_vec()).rescaled(inv),
    ))
}

/// Rounds of iterative refinement applied to Bezout solutions.
const REFINE_STEPS: usize = 2;

/// `rhs - a z`, accumulated at 128 bits and rounded once.
fn wide_residual(a: &[Vec<Complex64>], z: &[Complex64], rhs: &[Complex64]) -> Vec<Complex64> {
    let unit = MpComplex::unit(128);
    a.iter()
        .zip(rhs)
        .map(|(row, b)| {
            row.iter()
                .zip(z)
                .fold(unit.lift(*b), |acc, (aij, zj)| acc - unit.lift(*aij) * unit.lift(*zj))
                .to_c64()
        })
        .collect()
}

/// Power of two close to `|c_0 / c_top|^{1/deg}` of the product of `polys`.
fn root_scale(polys: &[&Poly]) -> f64 {
    let (mut log, mut deg) = (0.0f64, 0usize);
    for p in polys {
        let d = p.degree();
        let (lo, hi) = (p.coeff(0).norm(), p.coeff(d).norm());
        if d == 0 || lo == 0.0 || hi == 0.0 {
            continue;
        }
        log += (lo / hi).log2();
        deg += d;
    }
    if deg == 0 {
        return 1.0;
    }
    2f64.powi((log / deg as f64).round().clamp(-200.0, 200.0) as i32)
}

/// Coordinates of `p` in a triangular basis with `deg basis[k] = k`.
pub fn to_basis(p: &Poly, basis: &[Poly]) -> Result<Vec<Complex64>> {
    let top = basis.len();
    let mut rest = p.clone();
    let mut out = vec![c0(); top];
    for k in (0..top).rev() {
        let lead = basis[k].coeff(k);
        if lead == c0() {
            return Err(Error::Singular);
        }
        let d = rest.coeff(k) / lead;
        out[k] = d;
        rest = rest.sub(&basis[k].scale(d));
    }
    Ok(out)
}

/// The basic identities that are Bezout identities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BezoutFamily {
    /// `P1 = (1-x)^{n+1}`, `P2 = x^{m+1}`.
    Classical,
    /// `P1 = (x; q)_{n+1}`, `P2 = x^{m+1}`.
    Qcb,
    /// `P1 = (bx; q)_{n+1}`, `P2 = (ax; q)_{m+1}`.
    FirstKind,
    /// `P1 = (bx, b/x; q)_{n+1}`, `P2 = (ax, a/x; q)_{m+1}` in `y = x + 1/x`.
    SecondKind,
}

impl BezoutFamily {
    pub const ALL: [BezoutFamily; 4] = [
        BezoutFamily::Classical,
        BezoutFamily::Qcb,
        BezoutFamily::FirstKind,
        BezoutFamily::SecondKind,
    ];
}

/// `(P1, P2)` for the family.
pub fn bezout_moduli(fam: BezoutFamily, a: Complex64, b: Complex64, q: Complex64, m: usize, n: usize) -> (Poly, Poly) {
    match fam {
        BezoutFamily::Classical => (qpoch_poly(c1(), c1(), n + 1), Poly::monomial(m + 1)),
        BezoutFamily::Qcb => (qpoch_poly(c1(), q, n + 1), Poly::monomial(m + 1)),
        BezoutFamily::FirstKind => (qpoch_poly(b, q, n + 1), qpoch_poly(a, q, m + 1)),
        BezoutFamily::SecondKind => (askey_wilson_poly(b, q, n + 1), askey_wilson_poly(a, q, m + 1)),
    }
}

fn binom_f64(n: usize, k: usize) -> f64 {
    crate::identities::binomial_u128(n, k) as f64
}

/// Coefficients `d_k` of the closed-form first-kind `Q1` in the basis
/// `(ax; q)_k`: `(q^{n+1}; q)_k q^k / ((b/a; q)_{n+1} (q, aq/b; q)_k)`.
fn first_kind_coords(a: Complex64, b: Complex64, q: Complex64, m: usize, n: usize) -> Result<Vec<Complex64>> {
    let pre = qpoch(&(b / a), &q, n + 1);
    let qn1 = q.powi(n as i32 + 1);
    (0..=m)
        .map(|k| {
            let den = pre * qpoch(&q, &q, k) * qpoch(&(a * q / b), &q, k);
            if den == c0() {
                return Err(Error::Degenerate("first-kind cofactor"));
            }
            Ok(qpoch(&qn1, &q, k) * q.powi(k as i32) / den)
        })
        .collect()
}

/// Same for the second kind in the basis `(ax, a/x; q)_k`.
fn second_kind_coords(a: Complex64, b: Complex64, q: Complex64, m: usize, n: usize) -> Result<Vec<Complex64>> {
    let pre = qpoch(&(a * b), &q, n + 1) * qpoch(&(b / a), &q, n + 1);
    let qn1 = q.powi(n as i32 + 1);
    (0..=m)
        .map(|k| {
            let den = pre * qpoch(&q, &q, k) * qpoch(&(a * q / b), &q, k) * qpoch(&(a * b * qn1), &q, k);
            if den == c0() {
                return Err(Error::Degenerate("second-kind cofactor"));
            }
            Ok(qpoch(&qn1, &q, k) * q.powi(k as i32) / den)
        })
        .collect()
}

fn combine(coords: &[Complex64], basis: impl Fn(usize) -> Poly) -> Poly {
    coords
        .iter()
        .enumerate()
        .fold(Poly::constant(c0()), |acc, (k, d)| acc.add(&basis(k).scale(*d)))
}

/// Closed-form cofactors as polynomials in the family's variable.
pub fn closed_cofactors(fam: BezoutFamily, a: Complex64, b: Complex64, q: Complex64, m: usize, n: usize) -> Result<(Poly, Poly)> {
    Ok(match fam {
        BezoutFamily::Classical => {
            let q1 = Poly::new((0..=m).map(|k| Complex64::new(binom_f64(n + k, k), 0.0)).collect());
            let q2 = combine(
                &(0..=n).map(|k| Complex64::new(binom_f64(m + k, k), 0.0)).collect::<Vec<_>>(),
                |k| qpoch_poly(c1(), c1(), k),
            );
            (q1, q2)
        }
        BezoutFamily::Qcb => {
            let q1 = series_inv_qpoch(n, q, m)?;
            let d = (0..=n)
                .map(|k| Ok(qbinom(m + k, k as i64, &q)? * q.powi(k as i32)))
                .collect::<Result<Vec<_>>>()?;
            (q1, combine(&d, |k| qpoch_poly(c1(), q, k)))
        }
        BezoutFamily::FirstKind => (
            combine(&first_kind_coords(a, b, q, m, n)?, |k| qpoch_poly(a, q, k)),
            combine(&first_kind_coords(b, a, q, n, m)?, |k| qpoch_poly(b, q, k)),
        ),
        BezoutFamily::SecondKind => (
            combine(&second_kind_coords(a, b, q, m, n)?, |k| askey_wilson_poly(a, q, k)),
            combine(&second_kind_coords(b, a, q, n, m)?, |k| askey_wilson_poly(b, q, k)),
        ),
    })
}

/// Symmetric sample points `x, 1/x` away from the unit circle.
fn symmetric_points(count: usize) -> Vec<Complex64> {
    (0..count / 2)
        .flat_map(|j| {
            let x = Complex64::from_polar(1.25 + 0.05 * j as f64, 0.7 + 1.3 * j as f64);
            [x, c1() / x]
        })
        .collect()
}

/// Largest coefficientwise discrepancy between the linear-algebra cofactors
/// and the closed forms.
///
/// The second kind is compared in its native bases `(ax, a/x; q)_k`,
/// `(bx, b/x; q)_k`, and the solved identity is additionally evaluated in
/// `x` at `2(m+n)+4` points closed under `x -> 1/x`.
pub fn bezout_closed_form_residual(fam: BezoutFamily, a: Complex64, b: Complex64, q: Complex64, m: usize, n: usize) -> Result<f64> {
    let (p1, p2) = bezout_moduli(fam, a, b, q, m, n);
    let (s1, s2) = bezout_solve(&p1, &p2, m, n)?;
    if fam != BezoutFamily::SecondKind {
        let (c1_, c2_) = closed_cofactors(fam, a, b, q, m, n)?;
        return Ok(coefficientwise_residual(s1.coeffs(), c1_.truncate(m + 1).coeffs())
            .max(coefficientwise_residual(s2.coeffs(), c2_.truncate(n + 1).coeffs())));
    }
    let basis_a: Vec<Poly> = (0..=m).map(|k| askey_wilson_poly(a, q, k)).collect();
    let basis_b: Vec<Poly> = (0..=n).map(|k| askey_wilson_poly(b, q, k)).collect();
    let native = coefficientwise_residual(&to_basis(&s1, &basis_a)?, &second_kind_coords(a, b, q, m, n)?)
        .max(coefficientwise_residual(&to_basis(&s2, &basis_b)?, &second_kind_coords(b, a, q, n, m)?));
    let mut eval: f64 = 0.0;
    for x in symmetric_points(2 * (m + n) + 4) {
        let y = x + c1() / x;
        let pa = qpoch(&(a * x), &q, m + 1) * qpoch(&(a / x), &q, m + 1);
        let pb = qpoch(&(b * x), &q, n + 1) * qpoch(&(b / x), &q, n + 1);
        let (t1, t2) = (pb * s1.eval(y), pa * s2.eval(y));
        // the two terms may be far larger than their sum
        let scale = t1.norm().max(t2.norm()).max(1.0);
        eval = eval.max((t1 + t2 - c1()).norm() / scale);
    }
    Ok(native.max(eval))
}

/// `|| Q1_{m,n}(a, b) - Q2_{n,m}(b, a) ||` for the solver output of the first
/// or second kind.
pub fn cofactor_symmetry_residual(fam: BezoutFamily, a: Complex64, b: Complex64, q: Complex64, m: usize, n: usize) -> Result<f64> {
    let (p1, p2) = bezout_moduli(fam, a, b, q, m, n);
    let (q1, _) = bezout_solve(&p1, &p2, m, n)?;
    let (r1, r2) = bezout_moduli(fam, b, a, q, n, m);
    let (_, q2) = bezout_solve(&r1, &r2, n, m)?;
    Ok(coefficientwise_residual(q1.coeffs(), q2.coeffs()))
}

/// `f_{nk}(q) = [n, k]_q (-1)^k q^{C(k,2)}`, the monomial coefficients of `(x; q)_n`.
pub fn f_entry(n: usize, k: usize, q: Complex64) -> Result<Complex64> {
    f_entry_in(n, k, &q)
}

/// [`f_entry`] over any scalar type.
pub fn f_entry_in<S: Scalar>(n: usize, k: usize, q: &S) -> Result<S> {
    let v = qbinom(n, k as i64, q)? * q.pow_int((k * k.saturating_sub(1) / 2) as i64);
    Ok(if k % 2 == 0 { v } else { -v })
}

/// `g_{nk}(q) = [n, k]_q (-1)^k q^{C(k,2) + k(1-n)}`.
pub fn g_entry(n: usize, k: usize, q: Complex64) -> Result<Complex64> {
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let e = (k * k.saturating_sub(1) / 2) as i64 + k as i64 * (1 - n as i64);
    Ok(qbinom(n, k as i64, &q)? * q.powi(e as i32) * sign)
}

fn lower_matrix(size: usize, q: Complex64, entry: fn(usize, usize, Complex64) -> Result<Complex64>) -> Result<Vec<Vec<Complex64>>> {
    (0..=size)
        .map(|n| (0..=size).map(|k| if k > n { Ok(c0()) } else { entry(n, k, q) }).collect())
        .collect()
}

pub fn f_matrix(size: usize, q: Complex64) -> Result<Vec<Vec<Complex64>>> {
    lower_matrix(size, q, f_entry)
}

pub fn g_matrix(size: usize, q: Complex64) -> Result<Vec<Vec<Complex64>>> {
    lower_matrix(size, q, g_entry)
}

/// `max |F(q) G(q) - I|` over `(size+1) x (size+1)`.
pub fn matrix_pair_check(size: usize, q: Complex64) -> Result<f64> {
    let f = f_matrix(size, q)?;
    let g = g_matrix(size, q)?;
    let mut worst: f64 = 0.0;
    for i in 0..=size {
        for j in 0..=size {
            let v: Complex64 = (0..=size).map(|k| f[i][k] * g[k][j]).sum();
            let target = if i == j { c1() } else { c0() };
            worst = worst.max((v - target).norm());
        }
    }
    Ok(worst)
}

/// `max |g_{nk}(q) - f_{nk}(1/q)|`.
pub fn inverse_base_check(size: usize, q: Complex64) -> Result<f64> {
    let g = g_matrix(size, q)?;
    let f = f_matrix(size, c1() / q)?;
    let mut worst: f64 = 0.0;
    for i in 0..=size {
        for j in 0..=i {
            worst = worst.max((g[i][j] - f[i][j]).norm());
        }
    }
    Ok(worst)
}

/// A polynomial whose coefficients depend on `q`, kept as its monomial
/// coefficients read at `q` and at `1/q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualQPoly {
    pub q: Complex64,
    pub at_q: Poly,
    pub at_qinv: Poly,
}

impl DualQPoly {
    /// Coefficients free of `q`: both views coincide.
    pub fn constant_coeffs(p: Poly, q: Complex64) -> Self {
        DualQPoly {
            q,
            at_q: p.clone(),
            at_qinv: p,
        }
    }

    /// Builds both views from a coefficient rule `base -> polynomial`.
    pub fn from_rule(q: Complex64, rule: impl Fn(Complex64) -> Result<Poly>) -> Result<Self> {
        Ok(DualQPoly {
            q,
            at_q: rule(q)?,
            at_qinv: rule(c1() / q)?,
        })
    }
}

/// `T sum c_k(q) x^k = sum c_k(1/q) (x; q)_k`, re-expanded in monomials.
pub fn t_involution(p: &DualQPoly) -> Result<DualQPoly> {
    let (at_q, at_qinv) = t_involution_coeffs(&p.q, p.at_q.coeffs(), p.at_qinv.coeffs())?;
    Ok(DualQPoly {
        q: p.q,
        at_q: Poly::new(at_q),
        at_qinv: Poly::new(at_qinv),
    })
}

/// [`t_involution`] on raw coefficient views over any scalar type; returns
/// the views at `q` and at `1/q`.
pub fn t_involution_coeffs<S: Scalar>(q: &S, at_q: &[S], at_qinv: &[S]) -> Result<(Vec<S>, Vec<S>)> {
    let qi = q.recip();
    let deg = at_q.len().max(at_qinv.len()).max(1) - 1;
    let get = |v: &[S], k: usize| v.get(k).cloned().unwrap_or_else(|| q.zero());
    let mut out_q = vec![q.zero(); deg + 1];
    let mut out_qinv = vec![q.zero(); deg + 1];
    for k in 0..=deg {
        let (ck, ck_inv) = (get(at_q, k), get(at_qinv, k));
        for j in 0..=k {
            out_q[j] = out_q[j].clone() + ck_inv.clone() * f_entry_in(k, j, q)?;
            out_qinv[j] = out_qinv[j].clone() + ck.clone() * f_entry_in(k, j, &qi)?;
        }
    }
    Ok((out_q, out_qinv))
}

/// `T((x; q)_{n+1} sum_{k<=m} [n+k, k]_q x^k)` against
/// `x^{n+1} sum_{k<=m} [n+k, k]_q q^k (x; q)_k`.
pub fn t_transfer_residual(q: Complex64, m: usize, n: usize) -> Result<f64> {
    let input = DualQPoly::from_rule(q, |b| Ok(qpoch_poly(c1(), b, n + 1).mul(&series_inv_qpoch(n, b, m)?)))?;
    let out = t_involution(&input)?;
    let d = (0..=m)
        .map(|k| Ok(qbinom(n + k, k as i64, &q)? * q.powi(k as i32)))
        .collect::<Result<Vec<_>>>()?;
    let want = Poly::monomial(n + 1).mul(&combine(&d, |k| qpoch_poly(c1(), q, k)));
    // the low coefficients vanish only after cancellation of terms of size |1/q|^deg
    Ok(normwise_residual(out.at_q.coeffs(), want.truncate(out.at_q.coeffs().len()).coeffs()))
}

/// `f_{nk}(a, b; q) = (b/a; q)_n (q^{-n}; q)_k q^k / (q, a q^{1-n} / b; q)_k`.
pub fn connection_first<S: Scalar>(n: usize, k: usize, a: S, b: S, q: S) -> Result<S> {
    if k > n {
        return Ok(q.zero());
    }
    let qn = q.pow_int(-(n as i64));
    let den = qpoch(&q, &q, k) * qpoch(&(a.clone() * q.clone() * qn.clone() / b.clone()), &q, k);
    if den.is_zero() {
        return Err(Error::Degenerate("connection coefficient denominator"));
    }
    Ok(qpoch(&(b / a), &q, n) * qpoch(&qn, &q, k) * q.pow_int(k as i64) / den)
}

/// `f~_{nk}(a, b; q) = (ab, b/a; q)_n (q^{-n}; q)_k q^k / (q, ab, a q^{1-n} / b; q)_k`.
pub fn connection_second<S: Scalar>(n: usize, k: usize, a: S, b: S, q: S) -> Result<S> {
    if k > n {
        return Ok(q.zero());
    }
    let qn = q.pow_int(-(n as i64));
    let ab = a.clone() * b.clone();
    let den = qpoch(&q, &q, k) * qpoch(&ab, &q, k) * qpoch(&(a.clone() * q.clone() * qn.clone() / b.clone()), &q, k);
    if den.is_zero() {
        return Err(Error::Degenerate("connection coefficient denominator"));
    }
    Ok(qpoch(&ab, &q, n) * qpoch(&(b / a), &q, n) * qpoch(&qn, &q, k) * q.pow_int(k as i64) / den)
}

/// Residual of `sum_k f_{nk} (ax; q)_k = (bx; q)_n` at `x`.
pub fn connection_first_residual<S: Scalar>(n: usize, a: S, b: S, q: S, x: S) -> Result<f64> {
    let mut lhs = q.zero();
    for k in 0..=n {
        lhs = lhs + connection_first(n, k, a.clone(), b.clone(), q.clone())? * qpoch(&(a.clone() * x.clone()), &q, k);
    }
    Ok(relative_residual(&lhs, &qpoch(&(b * x), &q, n)))
}

/// Residual of `sum_k f~_{nk} (ax, a/x; q)_k = (bx, b/x; q)_n` at `x`.
pub fn connection_second_residual<S: Scalar>(n: usize, a: S, b: S, q: S, x: S) -> Result<f64> {
    let mut lhs = q.zero();
    for k in 0..=n {
        lhs = lhs
            + connection_second(n, k, a.clone(), b.clone(), q.clone())?
                * qpoch(&(a.clone() * x.clone()), &q, k)
                * qpoch(&(a.clone() / x.clone()), &q, k);
    }
    let rhs = qpoch(&(b.clone() * x.clone()), &q, n) * qpoch(&(b / x), &q, n);
    Ok(relative_residual(&lhs, &rhs))
}

/// Which modulus [`mod_reduction_check`] reduces by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectionKind {
    First,
    Second,
}

/// Evaluates `1 - P1 Q1` with the closed-form `Q1` at the roots of the
/// modulus `P2`; divisibility makes every value vanish.
pub fn mod_reduction_check(kind: ConnectionKind, a: Complex64, b: Complex64, q: Complex64, m: usize, n: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    match kind {
        ConnectionKind::First => {
            let d = first_kind_coords(a, b, q, m, n)?;
            for i in 0..=m {
                let x = q.powi(-(i as i32)) / a;
                let q1: Complex64 = d.iter().enumerate().map(|(k, v)| v * qpoch(&(a * x), &q, k)).sum();
                worst = worst.max((c1() - qpoch(&(b * x), &q, n + 1) * q1).norm());
            }
        }
        ConnectionKind::Second => {
            let d = second_kind_coords(a, b, q, m, n)?;
            for i in 0..=m {
                for x in [q.powi(-(i as i32)) / a, a * q.powi(i as i32)] {
                    let q1: Complex64 = d
                        .iter()
                        .enumerate()
                        .map(|(k, v)| v * qpoch(&(a * x), &q, k) * qpoch(&(a / x), &q, k))
                        .sum();
                    let p1 = qpoch(&(b * x), &q, n + 1) * qpoch(&(b / x), &q, n + 1);
                    worst = worst.max((c1() - p1 * q1).norm());
                }
            }
        }
    }
    Ok(worst)
}
