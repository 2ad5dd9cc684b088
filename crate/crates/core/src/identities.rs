//! The Chaundy-Bullard identity and its basic and elliptic extensions.
//!
//! Every member of the family states `1 = termA + termB`, where `termB` is
//! `termA` with `m <-> n` and `a <-> b` exchanged. Each member has its own
//! direct evaluator; limits between members are only taken in
//! [`degeneration_consistency`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lift_u128, relative_residual, Scalar};
use crate::special_fn::{
    checked_ratio, qbinom, qpoch, scaled_ratio, theta, theta_fact_scaled, IdentitySize, ParamPoint, Scaled,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Theta functions in all of `x, a, b, c` with nome `p`.
    Elliptic,
    /// `(a, b, c; q)`: the elliptic identity at `p = 0`.
    Abcq,
    /// `(a, b; q)` of the second kind: additionally `c = 0`.
    Abq2,
    /// `(a, b; q)` of the first kind.
    Abq1,
    /// The q-extension.
    Qcb,
    /// The original identity.
    Classical,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Elliptic,
        Family::Abcq,
        Family::Abq2,
        Family::Abq1,
        Family::Qcb,
        Family::Classical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Elliptic => "elliptic",
            Family::Abcq => "abcq",
            Family::Abq2 => "abq2",
            Family::Abq1 => "abq1",
            Family::Qcb => "qcb",
            Family::Classical => "classical",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

/// How a factor `z` enters a product: `theta(z; p)` or `1 - z`.
enum Factor<'a, S> {
    Theta(&'a S),
    Linear,
}

impl<S: Scalar> Factor<'_, S> {
    fn at(&self, z: &S) -> Result<S> {
        match self {
            Factor::Theta(p) => theta(z, p),
            Factor::Linear => Ok(z.one() - z.clone()),
        }
    }

    fn fact(&self, xs: &[S], q: &S, len: usize) -> Result<Scaled<S>> {
        let mut acc = Scaled::new(q.one());
        for x in xs {
            acc = match self {
                Factor::Theta(p) => acc * theta_fact_scaled(x, q, p, len)?,
                Factor::Linear => acc.mul(&qpoch(x, q, len)),
            };
        }
        Ok(acc)
    }

    /// `fact(num; len) / fact(den; len)`.
    fn fact_ratio(&self, num: &[S], den: &[S], q: &S, len: usize) -> Result<S> {
        scaled_ratio(&self.fact(num, q, len)?, &self.fact(den, q, len)?, "prefactor")
    }
}

/// `sum_{k<=m} [vwp(k)] (num)_k / (den)_k q^k`, with the optional very-well-poised
/// factor `f(w q^{2k}) / f(w)`. Terms are built by successive ratios.
fn series<S: Scalar>(
    f: &Factor<'_, S>,
    m: usize,
    num: &[S],
    den: &[S],
    q: &S,
    wp: Option<&S>,
) -> Result<S> {
    let mut cur_num = num.to_vec();
    let mut cur_den = den.to_vec();
    let mut term = q.one();
    let mut sum = q.one();
    let (wp0, mut wpk, q2) = match wp {
        Some(w) => (Some(f.at(w)?), w.clone(), q.clone() * q.clone()),
        None => (None, q.one(), q.one()),
    };
    for _ in 1..=m {
        let mut top = Scaled::new(q.clone());
        let mut bottom = Scaled::new(q.one());
        for z in cur_num.iter_mut() {
            top = top.mul(&f.at(z)?);
            *z = z.clone() * q.clone();
        }
        for z in cur_den.iter_mut() {
            bottom = bottom.mul(&f.at(z)?);
            *z = z.clone() * q.clone();
        }
        term = term * scaled_ratio(&top, &bottom, "series denominator")?;
        match &wp0 {
            Some(w0) => {
                wpk = wpk * q2.clone();
                sum = sum + term.clone() * checked_ratio(f.at(&wpk)?, w0.clone(), "well-poised factor")?;
            }
            None => sum = sum + term.clone(),
        }
    }
    Ok(sum)
}

/// Shared shape of the elliptic and `(a, b, c; q)` first terms.
fn pmn_with<S: Scalar>(f: &Factor<'_, S>, pp: &ParamPoint<S>, m: usize, n: usize) -> Result<S> {
    let ParamPoint { x, a, b, c, q, .. } = pp;
    let qn = q.pow_int(n as i64);
    let qn1 = qn.clone() * q.clone();
    let ac = a.clone() * c.clone();
    let pre = f.fact_ratio(
        &[ac.clone(), c.clone() / a.clone(), b.clone() * x.clone(), b.clone() / x.clone()],
        &[
            a.clone() * b.clone(),
            b.clone() / a.clone(),
            c.clone() * x.clone(),
            c.clone() / x.clone(),
        ],
        q,
        n + 1,
    )?;
    let w = ac.clone() * qn.clone();
    let num = [
        w.clone(),
        b.clone() * c.clone() * qn.clone(),
        c.clone() / b.clone(),
        qn1.clone(),
        a.clone() * x.clone(),
        a.clone() / x.clone(),
    ];
    let den = [
        q.clone(),
        a.clone() * q.clone() / b.clone(),
        a.clone() * b.clone() * qn1.clone(),
        ac,
        c.clone() * qn1.clone() / x.clone(),
        c.clone() * x.clone() * qn1,
    ];
    Ok(pre * series(f, m, &num, &den, q, Some(&w))?)
}

/// `p_{m,n}(x; a, b, c; q, p)` of the elliptic identity.
pub fn pmn_elliptic<S: Scalar>(pp: &ParamPoint<S>, m: usize, n: usize) -> Result<S> {
    pmn_with(&Factor::Theta(&pp.p), pp, m, n)
}

/// `p_{m,n}(x; a, b, c; q, 0)`, with `1 - z` in place of every theta value.
pub fn pmn_abcq<S: Scalar>(pp: &ParamPoint<S>, m: usize, n: usize) -> Result<S> {
    pmn_with(&Factor::Linear, pp, m, n)
}

/// `p_{m,n}(x; a, b, 0; q, 0)`.
pub fn pmn_abq2<S: Scalar>(pp: &ParamPoint<S>, m: usize, n: usize) -> Result<S> {
    let ParamPoint { x, a, b, q, .. } = pp;
    let f = Factor::Linear;
    let qn1 = q.pow_int(n as i64 + 1);
    let pre = f.fact_ratio(
        &[b.clone() * x.clone(), b.clone() / x.clone()],
        &[a.clone() * b.clone(), b.clone() / a.clone()],
        q,
        n + 1,
    )?;
    let num = [qn1.clone(), a.clone() * x.clone(), a.clone() / x.clone()];
    let den = [q.clone(), a.clone() * q.clone() / b.clone(), a.clone() * b.clone() * qn1];
    Ok(pre * series(&f, m, &num, &den, q, None)?)
}

/// The first-kind term `(bx)_{n+1} / (b/a)_{n+1} sum (q^{n+1}, ax)_k / (q, aq/b)_k q^k`.
pub fn pmn_abq1<S: Scalar>(pp: &ParamPoint<S>, m: usize, n: usize) -> Result<S> {
    let ParamPoint { x, a, b, q, .. } = pp;
    let f = Factor::Linear;
    let qn1 = q.pow_int(n as i64 + 1);
    let pre = f.fact_ratio(&[b.clone() * x.clone()], &[b.clone() / a.clone()], q, n + 1)?;
    let num = [qn1, a.clone() * x.clone()];
    let den = [q.clone(), a.clone() * q.clone() / b.clone()];
    Ok(pre * series(&f, m, &num, &den, q, None)?)
}

/// `(x; q)_{n+1} sum_{k<=m} [n+k, k]_q x^k`.
pub fn qcb_first<S: Scalar>(x: &S, q: &S, m: usize, n: usize) -> Result<S> {
    let mut sum = x.zero();
    let mut xk = x.one();
    for k in 0..=m {
        sum = sum + qbinom(n + k, k as i64, q)? * xk.clone();
        xk = xk * x.clone();
    }
    Ok(qpoch(x, q, n + 1) * sum)
}

/// `x^{m+1} sum_{k<=n} [m+k, k]_q q^k (x; q)_k`.
pub fn qcb_second<S: Scalar>(x: &S, q: &S, m: usize, n: usize) -> Result<S> {
    let mut sum = x.zero();
    let mut qk = x.one();
    let mut poch = x.one();
    for k in 0..=n {
        sum = sum + qbinom(m + k, k as i64, q)? * qk.clone() * poch.clone();
        poch = poch * (x.one() - x.clone() * qk.clone());
        qk = qk * q.clone();
    }
    Ok(x.pow_int(m as i64 + 1) * sum)
}

/// Exact `C(n, k)`.
pub fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// `(1 - x)^{n+1} sum_{k<=m} C(n+k, k) x^k`.
pub fn classical_first<S: Scalar>(x: &S, m: usize, n: usize) -> S {
    let mut sum = x.zero();
    let mut xk = x.one();
    for k in 0..=m {
        sum = sum + lift_u128(x, binomial_u128(n + k, k)) * xk.clone();
        xk = xk * x.clone();
    }
    (x.one() - x.clone()).pow_int(n as i64 + 1) * sum
}

/// `x^{m+1} sum_{k<=n} C(m+k, k) (1 - x)^k`.
pub fn classical_second<S: Scalar>(x: &S, m: usize, n: usize) -> S {
    let y = x.one() - x.clone();
    let mut sum = x.zero();
    let mut yk = x.one();
    for k in 0..=n {
        sum = sum + lift_u128(x, binomial_u128(m + k, k)) * yk.clone();
        yk = yk * y.clone();
    }
    x.pow_int(m as i64 + 1) * sum
}

/// The two terms `(termA, termB)` of the named identity, which add up to 1.
pub fn family_terms<S: Scalar>(family: Family, pp: &ParamPoint<S>, size: IdentitySize) -> Result<(S, S)> {
    let (m, n) = (size.m, size.n);
    let sw = pp.swap_ab();
    Ok(match family {
        Family::Elliptic => (pmn_elliptic(pp, m, n)?, pmn_elliptic(&sw, n, m)?),
        Family::Abcq => (pmn_abcq(pp, m, n)?, pmn_abcq(&sw, n, m)?),
        Family::Abq2 => (pmn_abq2(pp, m, n)?, pmn_abq2(&sw, n, m)?),
        Family::Abq1 => (pmn_abq1(pp, m, n)?, pmn_abq1(&sw, n, m)?),
        Family::Qcb => (qcb_first(&pp.x, &pp.q, m, n)?, qcb_second(&pp.x, &pp.q, m, n)?),
        Family::Classical => (classical_first(&pp.x, m, n), classical_second(&pp.x, m, n)),
    })
}

/// `|1 - termA - termB|`, relative to `max(1, |termA + termB|)`.
pub fn cb_residual<S: Scalar>(family: Family, pp: &ParamPoint<S>, size: IdentitySize) -> Result<f64> {
    let (t1, t2) = family_terms(family, pp, size)?;
    Ok(relative_residual(&(t1 + t2), &pp.one()))
}

/// Residual of
/// `(1-x)^{m+n+1} = sum_{k<=m} C(n+k,k) (-1)^k x^k (1-x)^{m-k}
///                  + (-1)^{m+1} x^{m+1} sum_{k<=n} C(m+k,k) (1-x)^{n-k}`.
pub fn cb_variant_residual<S: Scalar>(x: &S, m: usize, n: usize) -> f64 {
    let y = x.one() - x.clone();
    let lhs = y.pow_int((m + n + 1) as i64);
    let mut first = x.zero();
    for k in 0..=m {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        first = first
            + lift_u128(x, binomial_u128(n + k, k)).scale(sign)
                * x.pow_int(k as i64)
                * y.pow_int((m - k) as i64);
    }
    let mut second = x.zero();
    for k in 0..=n {
        second = second + lift_u128(x, binomial_u128(m + k, k)) * y.pow_int((n - k) as i64);
    }
    let sign = if (m + 1) % 2 == 0 { 1.0 } else { -1.0 };
    let rhs = first + second * x.pow_int(m as i64 + 1).scale(sign);
    relative_residual(&lhs, &rhs)
}

/// Residual of
/// `(x+y)^{m+n+1} = y^{n+1} sum_{k<=m} C(n+k,k) x^k (x+y)^{m-k}
///                  + x^{m+1} sum_{k<=n} C(m+k,k) y^k (x+y)^{n-k}`.
pub fn cb_homogeneous_residual<S: Scalar>(x: &S, y: &S, m: usize, n: usize) -> f64 {
    let s = x.clone() + y.clone();
    let lhs = s.pow_int((m + n + 1) as i64);
    let mut first = x.zero();
    for k in 0..=m {
        first = first
            + lift_u128(x, binomial_u128(n + k, k)) * x.pow_int(k as i64) * s.pow_int((m - k) as i64);
    }
    let mut second = x.zero();
    for k in 0..=n {
        second = second
            + lift_u128(x, binomial_u128(m + k, k)) * y.pow_int(k as i64) * s.pow_int((n - k) as i64);
    }
    let rhs = y.pow_int(n as i64 + 1) * first + x.pow_int(m as i64 + 1) * second;
    relative_residual(&lhs, &rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Outcome of one check at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: String,
    pub m: usize,
    pub n: usize,
    /// `x, a, b, c, q, p` as `[re, im]` pairs.
    pub params: [[f64; 2]; 6],
    pub residual: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl IdentityReport {
    pub fn new<S: Scalar>(identity: &str, pp: &ParamPoint<S>, size: IdentitySize, residual: f64, tolerance: f64) -> Self {
        let params = pp.to_c64().map(|z| [z.re, z.im]);
        // NaN residuals fail
        let verdict = if residual <= tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        IdentityReport {
            identity: identity.to_string(),
            m: size.m,
            n: size.n,
            params,
            residual,
            tolerance,
            verdict,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// One arrow of the degeneration chain, probed at `eps, eps/2, eps/4, eps/8`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrowReport {
    pub arrow: String,
    pub eps: Vec<f64>,
    /// `|termA(source near the limit) - termA(target)| / max(1, |termA(target)|)`.
    pub differences: Vec<f64>,
    /// Ratios of consecutive differences.
    pub decay: Vec<f64>,
}

impl ArrowReport {
    /// Minimum decay ratio; infinite when every difference is already zero.
    pub fn min_decay(&self) -> f64 {
        self.decay.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn converges(&self, min_ratio: f64) -> bool {
        self.differences.iter().all(|d| d.is_finite())
            && self.decay.iter().all(|r| *r >= min_ratio)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerationReport {
    pub m: usize,
    pub n: usize,
    pub arrows: Vec<ArrowReport>,
}

impl DegenerationReport {
    pub fn converges(&self, min_ratio: f64) -> bool {
        self.arrows.iter().all(|a| a.converges(min_ratio))
    }
}

pub const ARROWS: [&str; 5] = [
    "elliptic->abcq",
    "abcq->abq2",
    "abq2->abq1",
    "abq1->qcb",
    "qcb->classical",
];

fn difference<S: Scalar>(near: &S, limit: &S) -> f64 {
    (near.clone() - limit.clone()).modulus() / 1f64.max(limit.modulus())
}

/// Difference between the first term of the arrow's source identity near the
/// limit and the first term of its target.
pub fn arrow_difference<S: Scalar>(arrow: usize, pp: &ParamPoint<S>, size: IdentitySize, eps: f64) -> Result<f64> {
    let (m, n) = (size.m, size.n);
    let e = pp.q.lift_real(eps);
    match arrow {
        0 => {
            let near = pmn_elliptic(&pp.with_p(pp.p.phase() * e), m, n)?;
            Ok(difference(&near, &pmn_abcq(pp, m, n)?))
        }
        1 => {
            let moved = pp.with_abc(pp.a.clone(), pp.b.clone(), pp.c.phase() * e);
            Ok(difference(&pmn_abcq(&moved, m, n)?, &pmn_abq2(pp, m, n)?))
        }
        2 => {
            let moved = ParamPoint::unchecked(
                pp.x.clone() / e.clone(),
                pp.a.clone() * e.clone(),
                pp.b.clone() * e,
                pp.c.clone(),
                pp.q.clone(),
                pp.p.clone(),
            );
            Ok(difference(&pmn_abq2(&moved, m, n)?, &pmn_abq1(pp, m, n)?))
        }
        3 => {
            let b = pp.b.phase() * e;
            let moved = ParamPoint::unchecked(
                pp.x.clone() / b.clone(),
                pp.a.clone(),
                b,
                pp.c.clone(),
                pp.q.clone(),
                pp.p.clone(),
            );
            Ok(difference(&pmn_abq1(&moved, m, n)?, &qcb_first(&pp.x, &pp.q, m, n)?))
        }
        4 => {
            let q = pp.q.one() - e;
            Ok(difference(&qcb_first(&pp.x, &q, m, n)?, &classical_first(&pp.x, m, n)))
        }
        _ => Err(Error::InvalidParameter(format!("no arrow with index {arrow}"))),
    }
}

/// Probes each arrow of the chain at `eps` and three successive halvings.
pub fn degeneration_consistency<S: Scalar>(pp: &ParamPoint<S>, size: IdentitySize, eps: f64) -> Result<DegenerationReport> {
    let mut arrows = Vec::new();
    for (idx, name) in ARROWS.iter().enumerate() {
        arrows.push(probe_arrow(name, |e| arrow_difference(idx, pp, size, e), eps)?);
    }
    Ok(DegenerationReport {
        m: size.m,
        n: size.n,
        arrows,
    })
}

fn probe_arrow(name: &str, f: impl Fn(f64) -> Result<f64>, eps: f64) -> Result<ArrowReport> {
    let epss: Vec<f64> = (0..4).map(|i| eps / f64::powi(2.0, i)).collect();
    let differences = epss.iter().map(|&e| f(e)).collect::<Result<Vec<_>>>()?;
    let decay = differences
        .windows(2)
        .map(|w| if w[1] == 0.0 { f64::INFINITY } else { w[0] / w[1] })
        .collect();
    Ok(ArrowReport {
        arrow: name.to_string(),
        eps: epss,
        differences,
        decay,
    })
}

/// The `q -> 1` limit of the first-kind identity, where the first term tends
/// to the classical first term at `x' = (1 - ax) / (1 - a/b)`.
pub fn abq1_q_limit_difference<S: Scalar>(pp: &ParamPoint<S>, size: IdentitySize, eps: f64) -> Result<f64> {
    let one = pp.one();
    let near = pmn_abq1(&pp.with_q(one.clone() - one.lift_real(eps)), size.m, size.n)?;
    let xs = checked_ratio(
        one.clone() - pp.a.clone() * pp.x.clone(),
        one - pp.a.clone() / pp.b.clone(),
        "1 - a/b",
    )?;
    Ok(difference(&near, &classical_first(&xs, size.m, size.n)))
}

/// Halving probe of [`abq1_q_limit_difference`].
pub fn abq1_q_limit_report<S: Scalar>(pp: &ParamPoint<S>, size: IdentitySize, eps: f64) -> Result<ArrowReport> {
    probe_arrow("abq1->classical(substituted)", |e| abq1_q_limit_difference(pp, size, e), eps)
}

/// Default arrow step sizes: differences are first order and must stay far
/// above rounding.
pub const DEFAULT_ARROW_EPS: f64 = 1e-3;
