//! Normal forms `sum f_{kl} X^k Y^l` in three algebras of commuting-up-to-a-
//! weight variables:
//!
//! * `Qcomm`: `YX = q XY`, scalar coefficients.
//! * `WAlg`: `YX = W(1,1) XY`, `X f(a,b) = f(aq, bq^2) X`, `Y f(a,b) = f(aq^2, bq) Y`.
//! * `HAlg`: `YX = H(0,1) XY`, `X f(a,b,c) = f(aq, b, cq) X`, `Y f(a,b,c) = f(a, bq, cq) Y`.
//!
//! Coefficients are symbolic products of atoms, each tagged with the integer
//! shift of `(a, b, c)` accumulated while commuting past `X` and `Y`. Atoms
//! are only evaluated at the end, with memoization per `(atom, shift)`.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identities::IdentityReport;
use crate::lattice::b_closed;
use crate::scalar::{coefficientwise_residual, relative_residual, Complex64, Scalar};
use crate::special_fn::{
    checked_ratio, qbinom, scaled_ratio, Scaled, theta, theta_fact_many_scaled, theta_zero_margin, IdentitySize, ParamPoint, Shift,
};
use crate::weights::{binomial_weight, lattice_weight, normalized_weight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algebra {
    Qcomm,
    WAlg,
    HAlg,
}

impl Algebra {
    pub const ALL: [Algebra; 3] = [Algebra::Qcomm, Algebra::WAlg, Algebra::HAlg];

    pub fn name(self) -> &'static str {
        match self {
            Algebra::Qcomm => "QCOMM",
            Algebra::WAlg => "W_ALG",
            Algebra::HAlg => "H_ALG",
        }
    }

    /// Substitution applied to a coefficient moved to the left of `X`.
    pub fn x_shift(self) -> Shift {
        match self {
            Algebra::Qcomm => Shift::ZERO,
            Algebra::WAlg => Shift::new(1, 2, 0),
            Algebra::HAlg => Shift::new(1, 0, 1),
        }
    }

    pub fn y_shift(self) -> Shift {
        match self {
            Algebra::Qcomm => Shift::ZERO,
            Algebra::WAlg => Shift::new(2, 1, 0),
            Algebra::HAlg => Shift::new(0, 1, 1),
        }
    }

    /// Shift accumulated by passing `X^k Y^l`.
    pub fn shift_of(self, k: usize, l: usize) -> Shift {
        self.x_shift().times(k as i32) + self.y_shift().times(l as i32)
    }
}

/// Elementary factors of a coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    /// `q^e`.
    QPow(i32),
    /// `[n, k]_q`, or `[n, k]_{1/q}` when `inverse`.
    QBinomial { n: u32, k: u32, inverse: bool },
    /// The weight in the algebra's `YX = w XY`.
    Commutator(Algebra),
    /// `W_{a,b;q,p}(s, t)`.
    WWeight { s: u32, t: u32 },
    /// `[n, k]_{a,b;q,p}`.
    WBinomial { n: u32, k: u32 },
    /// `h(i, j)`, or `h_{x;b,a,c}(i, j)` when `mirrored`.
    LatticeWeight { i: u32, j: u32, mirrored: bool },
    /// `H(i, j)`, or `H_{x;b,a,c}(i, j)` when `mirrored`.
    RowWeight { i: u32, j: u32, mirrored: bool },
    /// `[n, k]_{x;a,b,c;q,p}`.
    HBinomial { n: u32, k: u32 },
}

impl Atom {
    fn shift_free(self) -> bool {
        matches!(self, Atom::QPow(_) | Atom::QBinomial { .. } | Atom::Commutator(Algebra::Qcomm))
    }

    /// Value at the point `pp` already carrying the atom's shift.
    fn eval(self, pp: &ParamPoint<Complex64>) -> Result<Complex64> {
        let (a, b, q, p) = (&pp.a, &pp.b, &pp.q, &pp.p);
        match self {
            Atom::QPow(e) => Ok(q.pow_int(e as i64)),
            Atom::QBinomial { n, k, inverse } => {
                let base = if inverse { q.recip() } else { *q };
                qbinom(n as usize, k as i64, &base)
            }
            Atom::Commutator(Algebra::Qcomm) => Ok(*q),
            Atom::Commutator(Algebra::WAlg) => binomial_weight(a, b, q, p, 1, 1),
            Atom::Commutator(Algebra::HAlg) => normalized_weight(pp, 0, 1),
            Atom::WWeight { s, t } => binomial_weight(a, b, q, p, s as usize, t as usize),
            Atom::WBinomial { n, k } => w_binomial(a, b, q, p, n as usize, k as i64),
            Atom::LatticeWeight { i, j, mirrored } => {
                let pt = if mirrored { pp.swap_ab() } else { pp.clone() };
                lattice_weight(&pt, i as usize, j as usize)
            }
            Atom::RowWeight { i, j, mirrored } => {
                let pt = if mirrored { pp.swap_ab() } else { pp.clone() };
                normalized_weight(&pt, i as usize, j as usize)
            }
            Atom::HBinomial { n, k } => h_binomial(pp, n as usize, k as i64),
        }
    }
}

type Monomial = Vec<(Atom, Shift)>;

/// Finite sum of `factor * prod atoms`, kept canonical: atoms sorted, powers
/// of `q` merged, equal products combined.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Coefficient {
    terms: BTreeMap<Monomial, Complex64>,
}

fn canonical(mut atoms: Monomial) -> Monomial {
    let mut qexp = 0i32;
    atoms.retain(|(a, _)| {
        if let Atom::QPow(e) = a {
            qexp += e;
            false
        } else {
            true
        }
    });
    for (a, s) in atoms.iter_mut() {
        if a.shift_free() {
            *s = Shift::ZERO;
        }
    }
    if qexp != 0 {
        atoms.push((Atom::QPow(qexp), Shift::ZERO));
    }
    atoms.sort();
    atoms
}

impl Coefficient {
    pub fn zero() -> Self {
        Coefficient::default()
    }

    pub fn scalar(v: Complex64) -> Self {
        let mut c = Coefficient::zero();
        if v != Complex64::new(0.0, 0.0) {
            c.terms.insert(Vec::new(), v);
        }
        c
    }

    pub fn one() -> Self {
        Coefficient::scalar(Complex64::new(1.0, 0.0))
    }

    pub fn atom(a: Atom) -> Self {
        Coefficient::product(&[a])
    }

    /// Product of unshifted atoms.
    pub fn product(atoms: &[Atom]) -> Self {
        let mut c = Coefficient::zero();
        c.terms.insert(
            canonical(atoms.iter().map(|a| (*a, Shift::ZERO)).collect()),
            Complex64::new(1.0, 0.0),
        );
        c
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn insert(&mut self, mono: Monomial, v: Complex64) {
        let e = self.terms.entry(mono).or_insert(Complex64::new(0.0, 0.0));
        *e += v;
        if *e == Complex64::new(0.0, 0.0) {
            let key: Vec<_> = self
                .terms
                .iter()
                .find(|(_, v)| **v == Complex64::new(0.0, 0.0))
                .map(|(k, _)| k.clone())
                .into_iter()
                .collect();
            for k in key {
                self.terms.remove(&k);
            }
        }
    }

    pub fn add(&self, other: &Coefficient) -> Coefficient {
        let mut out = self.clone();
        for (m, v) in &other.terms {
            out.insert(m.clone(), *v);
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Coefficient {
        let mut out = Coefficient::zero();
        for (m, v) in &self.terms {
            out.insert(m.clone(), v * s);
        }
        out
    }

    pub fn mul(&self, other: &Coefficient) -> Coefficient {
        let mut out = Coefficient::zero();
        for (m1, v1) in &self.terms {
            for (m2, v2) in &other.terms {
                let mut atoms = m1.clone();
                atoms.extend(m2.iter().cloned());
                out.insert(canonical(atoms), v1 * v2);
            }
        }
        out
    }

    /// The coefficient with `(a, b, c)` replaced by `(a q^s.a, b q^s.b, c q^s.c)`.
    pub fn shifted(&self, s: Shift) -> Coefficient {
        if s == Shift::ZERO {
            return self.clone();
        }
        let mut out = Coefficient::zero();
        for (m, v) in &self.terms {
            let moved = m
                .iter()
                .map(|(a, sh)| if a.shift_free() { (*a, *sh) } else { (*a, *sh + s) })
                .collect();
            out.insert(canonical(moved), *v);
        }
        out
    }
}

/// `sum f_{kl} X^k Y^l` in one of the algebras.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormElement {
    pub algebra: Algebra,
    terms: BTreeMap<(usize, usize), Coefficient>,
}

impl NormalFormElement {
    pub fn zero(algebra: Algebra) -> Self {
        NormalFormElement {
            algebra,
            terms: BTreeMap::new(),
        }
    }

    pub fn unit(algebra: Algebra) -> Self {
        Self::monomial(algebra, 0, 0, Coefficient::one())
    }

    /// `f X^k Y^l`.
    pub fn monomial(algebra: Algebra, k: usize, l: usize, f: Coefficient) -> Self {
        let mut e = Self::zero(algebra);
        if !f.is_zero() {
            e.terms.insert((k, l), f);
        }
        e
    }

    pub fn x(algebra: Algebra) -> Self {
        Self::monomial(algebra, 1, 0, Coefficient::one())
    }

    pub fn y(algebra: Algebra) -> Self {
        Self::monomial(algebra, 0, 1, Coefficient::one())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(usize, usize), &Coefficient)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, k: usize, l: usize) -> Option<&Coefficient> {
        self.terms.get(&(k, l))
    }

    fn add_term(&mut self, key: (usize, usize), f: Coefficient) {
        let merged = match self.terms.remove(&key) {
            Some(old) => old.add(&f),
            None => f,
        };
        if !merged.is_zero() {
            self.terms.insert(key, merged);
        }
    }

    pub fn add(&self, other: &NormalFormElement) -> Result<NormalFormElement> {
        if self.algebra != other.algebra {
            return Err(Error::TagMismatch(self.algebra.name(), other.algebra.name()));
        }
        let mut out = self.clone();
        for (k, f) in &other.terms {
            out.add_term(*k, f.clone());
        }
        Ok(out)
    }

    /// `c * self` with `c` on the left.
    pub fn left_scale(&self, c: &Coefficient) -> NormalFormElement {
        let mut out = Self::zero(self.algebra);
        for (k, f) in &self.terms {
            out.add_term(*k, c.mul(f));
        }
        out
    }
}

/// `c_{l,r}` with `Y^l X^r = c_{l,r} X^r Y^l`: the product of the commutator
/// weight over shifts `i X + j Y`, `i < r`, `j < l`.
fn reorder_coefficient(algebra: Algebra, l: usize, r: usize) -> Coefficient {
    if l == 0 || r == 0 {
        return Coefficient::one();
    }
    if algebra == Algebra::Qcomm {
        return Coefficient::atom(Atom::QPow((l * r) as i32));
    }
    let mut atoms = Vec::with_capacity(l * r);
    for i in 0..r {
        for j in 0..l {
            atoms.push((Atom::Commutator(algebra), algebra.shift_of(i, j)));
        }
    }
    let mut c = Coefficient::zero();
    c.terms.insert(canonical(atoms), Complex64::new(1.0, 0.0));
    c
}

/// Normal form of `e1 * e2`:
/// `(f X^k Y^l)(g X^r Y^s) = f g^{(kX + lY)} c_{l,r}^{(kX)} X^{k+r} Y^{l+s}`.
pub fn nf_mul(e1: &NormalFormElement, e2: &NormalFormElement) -> Result<NormalFormElement> {
    if e1.algebra != e2.algebra {
        return Err(Error::TagMismatch(e1.algebra.name(), e2.algebra.name()));
    }
    let alg = e1.algebra;
    let mut out = NormalFormElement::zero(alg);
    let mut reorder: HashMap<(usize, usize, usize), Coefficient> = HashMap::new();
    for (&(k, l), f) in &e1.terms {
        let sigma = alg.shift_of(k, l);
        for (&(r, s), g) in &e2.terms {
            let c = reorder
                .entry((k, l, r))
                .or_insert_with(|| reorder_coefficient(alg, l, r).shifted(alg.shift_of(k, 0)))
                .clone();
            let coef = f.mul(&g.shifted(sigma)).mul(&c);
            out.add_term((k + r, l + s), coef);
        }
    }
    Ok(out)
}

pub fn nf_pow(e: &NormalFormElement, n: usize) -> Result<NormalFormElement> {
    let mut acc = NormalFormElement::unit(e.algebra);
    for _ in 0..n {
        acc = nf_mul(&acc, e)?;
    }
    Ok(acc)
}

/// `X + Y`, or `X + h_{x;b,a,c}(0,0) Y` in `HAlg`.
pub fn binomial_base(algebra: Algebra) -> NormalFormElement {
    let w = match algebra {
        Algebra::HAlg => Coefficient::atom(Atom::LatticeWeight {
            i: 0,
            j: 0,
            mirrored: true,
        }),
        _ => Coefficient::one(),
    };
    let mut e = NormalFormElement::x(algebra);
    e.add_term((0, 1), w);
    e
}

/// Normal form of the binomial power `binomial_base(algebra)^n`.
pub fn binomial_power(algebra: Algebra, n: usize) -> Result<NormalFormElement> {
    nf_pow(&binomial_base(algebra), n)
}

/// Evaluates coefficients at one parameter point with an atom cache.
pub struct Evaluator<'a> {
    pp: &'a ParamPoint<Complex64>,
    cache: RefCell<HashMap<(Atom, Shift), Complex64>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(pp: &'a ParamPoint<Complex64>) -> Self {
        Evaluator {
            pp,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn point(&self) -> &ParamPoint<Complex64> {
        self.pp
    }

    pub fn atom(&self, a: Atom, s: Shift) -> Result<Complex64> {
        if let Some(v) = self.cache.borrow().get(&(a, s)) {
            return Ok(*v);
        }
        let v = a.eval(&self.pp.shifted(s))?;
        self.cache.borrow_mut().insert((a, s), v);
        Ok(v)
    }

    pub fn coefficient(&self, c: &Coefficient) -> Result<Complex64> {
        let mut sum = Complex64::new(0.0, 0.0);
        for (mono, v) in &c.terms {
            let mut t = *v;
            for (a, s) in mono {
                t *= self.atom(*a, *s)?;
            }
            sum += t;
        }
        Ok(sum)
    }

    pub fn element(&self, e: &NormalFormElement) -> Result<BTreeMap<(usize, usize), Complex64>> {
        e.terms
            .iter()
            .map(|(k, c)| Ok((*k, self.coefficient(c)?)))
            .collect()
    }
}

/// Coefficientwise residual between two evaluated normal forms.
pub fn compare_values(
    lhs: &BTreeMap<(usize, usize), Complex64>,
    rhs: &BTreeMap<(usize, usize), Complex64>,
) -> f64 {
    let keys: BTreeSet<_> = lhs.keys().chain(rhs.keys()).collect();
    let zero = Complex64::new(0.0, 0.0);
    let l: Vec<_> = keys.iter().map(|k| lhs.get(k).copied().unwrap_or(zero)).collect();
    let r: Vec<_> = keys.iter().map(|k| rhs.get(k).copied().unwrap_or(zero)).collect();
    coefficientwise_residual(&l, &r)
}

pub fn compare_elements(ev: &Evaluator<'_>, e1: &NormalFormElement, e2: &NormalFormElement) -> Result<f64> {
    Ok(compare_values(&ev.element(e1)?, &ev.element(e2)?))
}

/// `[n, k]_{a,b;q,p} = (q^{1+k}, aq^{1+k}, bq^{1+k}, aq^{1-k}/b)_{n-k} /
/// (q, aq, bq^{1+2k}, aq/b)_{n-k}`; zero outside `0 <= k <= n`.
pub fn w_binomial<S: Scalar>(a: &S, b: &S, q: &S, p: &S, n: usize, k: i64) -> Result<S> {
    if k < 0 || k as usize > n {
        return Ok(q.zero());
    }
    let len = n - k as usize;
    if len == 0 {
        return Ok(q.one());
    }
    let qk1 = q.pow_int(k + 1);
    let num = theta_fact_many_scaled(
        &[
            qk1.clone(),
            a.clone() * qk1.clone(),
            b.clone() * qk1,
            a.clone() * q.pow_int(1 - k) / b.clone(),
        ],
        q,
        p,
        len,
    )?;
    let den = theta_fact_many_scaled(
        &[
            q.clone(),
            a.clone() * q.clone(),
            b.clone() * q.pow_int(1 + 2 * k),
            a.clone() * q.clone() / b.clone(),
        ],
        q,
        p,
        len,
    )?;
    scaled_ratio(&num, &den, "denominator of the W-binomial")
}

/// `[n, k]_{x;a,b,c;q,p} = B(k, n-k)`; zero outside `0 <= k <= n`.
pub fn h_binomial<S: Scalar>(pp: &ParamPoint<S>, n: usize, k: i64) -> Result<S> {
    if k < 0 || k as usize > n {
        return Ok(pp.q.zero());
    }
    b_closed(pp, k as usize, n - k as usize)
}

/// Residual of `[n+1, k] = [n, k] + [n, k-1] W(k, n+1-k)`.
pub fn w_binomial_recursion_residual(a: Complex64, b: Complex64, q: Complex64, p: Complex64, n: usize, k: usize) -> Result<f64> {
    let lhs = w_binomial(&a, &b, &q, &p, n + 1, k as i64)?;
    let mut rhs = w_binomial(&a, &b, &q, &p, n, k as i64)?;
    if k >= 1 && k <= n + 1 {
        rhs += w_binomial(&a, &b, &q, &p, n, k as i64 - 1)? * binomial_weight(&a, &b, &q, &p, k, n + 1 - k)?;
    }
    Ok(relative_residual(&lhs, &rhs))
}

/// Residual of `[n+1, k] = [n, k-1] H(k-1, n+1-k) + [n, k] H_{x;b,a,c}(n-k, k)`.
pub fn h_binomial_recursion_residual(pp: &ParamPoint<Complex64>, n: usize, k: usize) -> Result<f64> {
    let lhs = h_binomial(pp, n + 1, k as i64)?;
    let mut rhs = Complex64::new(0.0, 0.0);
    if k >= 1 {
        rhs += h_binomial(pp, n, k as i64 - 1)? * normalized_weight(pp, k - 1, n + 1 - k)?;
    }
    if k <= n {
        rhs += h_binomial(pp, n, k as i64)? * normalized_weight(&pp.swap_ab(), n - k, k)?;
    }
    Ok(relative_residual(&lhs, &rhs))
}

/// Weighted count of paths `(0,0) -> (k, l)` with east weight `H(i, j)` and
/// north weight `H_{x;b,a,c}(j, i)`.
pub fn h_path_sum(pp: &ParamPoint<Complex64>, k: usize, l: usize) -> Result<Complex64> {
    let sw = pp.swap_ab();
    let mut row = vec![Complex64::new(0.0, 0.0); l + 1];
    for i in 0..=k {
        for j in 0..=l {
            if i == 0 && j == 0 {
                row[0] = Complex64::new(1.0, 0.0);
                continue;
            }
            let mut v = Complex64::new(0.0, 0.0);
            if i > 0 {
                // row[j] still holds the value at (i-1, j)
                v += row[j] * normalized_weight(pp, i - 1, j)?;
            }
            if j > 0 {
                v += row[j - 1] * normalized_weight(&sw, j - 1, i)?;
            }
            row[j] = v;
        }
    }
    Ok(row[l])
}

/// Brute-force version of [`h_path_sum`] over explicit paths.
pub fn h_path_sum_brute(pp: &ParamPoint<Complex64>, k: usize, l: usize) -> Result<Complex64> {
    let sw = pp.swap_ab();
    let mut total = Complex64::new(0.0, 0.0);
    for bits in 0u64..(1 << (k + l)) {
        if bits.count_ones() as usize != k {
            continue;
        }
        let (mut i, mut j) = (0, 0);
        let mut w = Complex64::new(1.0, 0.0);
        for t in 0..k + l {
            if bits >> t & 1 == 1 {
                w *= normalized_weight(pp, i, j)?;
                i += 1;
            } else {
                w *= normalized_weight(&sw, j, i)?;
                j += 1;
            }
        }
        total += w;
    }
    Ok(total)
}

fn prod_mirrored_row(len: usize, i0: usize, j: usize) -> Vec<Atom> {
    (0..len)
        .map(|s| Atom::LatticeWeight {
            i: (s + i0) as u32,
            j: j as u32,
            mirrored: true,
        })
        .collect()
}

/// Closed-form normal form of the binomial power.
pub fn binomial_closed(algebra: Algebra, n: usize) -> NormalFormElement {
    let mut e = NormalFormElement::zero(algebra);
    for k in 0..=n {
        let (nn, kk) = (n as u32, k as u32);
        let c = match algebra {
            Algebra::Qcomm => Coefficient::atom(Atom::QBinomial {
                n: nn,
                k: kk,
                inverse: false,
            }),
            Algebra::WAlg => Coefficient::atom(Atom::WBinomial { n: nn, k: kk }),
            Algebra::HAlg => {
                let mut atoms = prod_mirrored_row(n - k, 0, 0);
                atoms.push(Atom::HBinomial { n: nn, k: kk });
                Coefficient::product(&atoms)
            }
        };
        e.add_term((k, n - k), c);
    }
    e
}

/// Residual of one binomial theorem at one `n`.
pub fn binomial_theorem_residual(algebra: Algebra, pp: &ParamPoint<Complex64>, n: usize) -> Result<f64> {
    let ev = Evaluator::new(pp);
    compare_elements(&ev, &binomial_power(algebra, n)?, &binomial_closed(algebra, n))
}

/// Checks the three binomial theorems for all `n <= n_max`.
pub fn verify_binomial_theorems(pp: &ParamPoint<Complex64>, n_max: usize, tol: f64) -> Result<Vec<IdentityReport>> {
    let ev = Evaluator::new(pp);
    let mut out = Vec::new();
    for alg in Algebra::ALL {
        let base = binomial_base(alg);
        let mut power = NormalFormElement::unit(alg);
        for n in 0..=n_max {
            if n > 0 {
                power = nf_mul(&power, &base)?;
            }
            let res = compare_elements(&ev, &power, &binomial_closed(alg, n))?;
            out.push(IdentityReport::new(
                binomial_identity_name(alg),
                pp,
                IdentitySize::new(n, 0),
                res,
                tol,
            ));
        }
    }
    Ok(out)
}

pub fn binomial_identity_name(alg: Algebra) -> &'static str {
    match alg {
        Algebra::Qcomm => "qcomm_binomial",
        Algebra::WAlg => "w_binomial_theorem",
        Algebra::HAlg => "h_binomial_theorem",
    }
}

pub fn homogeneous_identity_name(alg: Algebra) -> &'static str {
    match alg {
        Algebra::Qcomm => "qcomm_homogeneous_cb",
        Algebra::WAlg => "w_homogeneous_cb",
        Algebra::HAlg => "h_homogeneous_cb",
    }
}

/// Right-hand side of the homogeneous identity in the q-commuting algebra,
/// built from generators `gx`, `gy` and base `q` (or `1/q` when `inv`):
/// `gy^{n+1} sum_k [n+k,k] q^{-(n+1)k} gx^k (gx+gy)^{m-k}
///  + gx^{m+1} sum_k [m+k,k]_{1/q} q^{(m+1)k} gy^k (gx+gy)^{n-k}`.
fn qcomm_homogeneous_rhs(
    gx: &NormalFormElement,
    gy: &NormalFormElement,
    inv: bool,
    m: usize,
    n: usize,
) -> Result<NormalFormElement> {
    let sum = gx.add(gy)?;
    let sign = if inv { -1 } else { 1 };
    let mut out = NormalFormElement::zero(gx.algebra);
    let ypow = nf_pow(gy, n + 1)?;
    for k in 0..=m {
        let c = Coefficient::product(&[
            Atom::QBinomial {
                n: (n + k) as u32,
                k: k as u32,
                inverse: inv,
            },
            Atom::QPow(-sign * ((n + 1) * k) as i32),
        ]);
        let t = nf_mul(&nf_mul(&ypow, &nf_pow(gx, k)?)?, &nf_pow(&sum, m - k)?)?.left_scale(&c);
        out = out.add(&t)?;
    }
    let xpow = nf_pow(gx, m + 1)?;
    for k in 0..=n {
        let c = Coefficient::product(&[
            Atom::QBinomial {
                n: (m + k) as u32,
                k: k as u32,
                inverse: !inv,
            },
            Atom::QPow(sign * ((m + 1) * k) as i32),
        ]);
        let t = nf_mul(&nf_mul(&xpow, &nf_pow(gy, k)?)?, &nf_pow(&sum, n - k)?)?.left_scale(&c);
        out = out.add(&t)?;
    }
    Ok(out)
}

/// Both sides of the homogeneous Chaundy-Bullard identity in `algebra`.
pub fn homogeneous_sides(algebra: Algebra, m: usize, n: usize) -> Result<(NormalFormElement, NormalFormElement)> {
    homogeneous_sides_with(algebra, m, n, true)
}

fn homogeneous_sides_with(
    algebra: Algebra,
    m: usize,
    n: usize,
    row_factor: bool,
) -> Result<(NormalFormElement, NormalFormElement)> {
    let base = binomial_base(algebra);
    let lhs = nf_pow(&base, m + n + 1)?;
    let mut rhs = NormalFormElement::zero(algebra);
    match algebra {
        Algebra::Qcomm => {
            rhs = qcomm_homogeneous_rhs(&NormalFormElement::x(algebra), &NormalFormElement::y(algebra), false, m, n)?;
        }
        Algebra::WAlg => {
            for k in 0..=m {
                let c = Coefficient::atom(Atom::WBinomial {
                    n: (n + k) as u32,
                    k: k as u32,
                });
                let t = nf_mul(&NormalFormElement::monomial(algebra, k, n + 1, c), &nf_pow(&base, m - k)?)?;
                rhs = rhs.add(&t)?;
            }
            for k in 0..=n {
                let c = Coefficient::product(&[
                    Atom::WBinomial {
                        n: (m + k) as u32,
                        k: m as u32,
                    },
                    Atom::WWeight {
                        s: (m + 1) as u32,
                        t: k as u32,
                    },
                ]);
                let t = nf_mul(&NormalFormElement::monomial(algebra, m + 1, k, c), &nf_pow(&base, n - k)?)?;
                rhs = rhs.add(&t)?;
            }
        }
        Algebra::HAlg => {
            for k in 0..=m {
                let mut atoms = prod_mirrored_row(n, 0, 0);
                atoms.push(Atom::LatticeWeight {
                    i: n as u32,
                    j: k as u32,
                    mirrored: true,
                });
                atoms.push(Atom::HBinomial {
                    n: (n + k) as u32,
                    k: k as u32,
                });
                let t = nf_mul(
                    &NormalFormElement::monomial(algebra, k, n + 1, Coefficient::product(&atoms)),
                    &nf_pow(&base, m - k)?,
                )?;
                rhs = rhs.add(&t)?;
            }
            for k in 0..=n {
                let mut atoms = prod_mirrored_row(k, 0, 0);
                atoms.push(Atom::HBinomial {
                    n: (m + k) as u32,
                    k: m as u32,
                });
                // last step X past Y^k after X^m
                if row_factor {
                    atoms.push(Atom::RowWeight {
                        i: m as u32,
                        j: k as u32,
                        mirrored: false,
                    });
                }
                let t = nf_mul(
                    &NormalFormElement::monomial(algebra, m + 1, k, Coefficient::product(&atoms)),
                    &nf_pow(&base, n - k)?,
                )?;
                rhs = rhs.add(&t)?;
            }
        }
    }
    Ok((lhs, rhs))
}

/// Expands both sides of the homogeneous identity and compares all
/// coefficients. In the q-commuting algebra the right-hand side is also
/// rebuilt with `(X, Y, q, m, n) -> (Y, X, 1/q, n, m)` and compared.
pub fn verify_homogeneous_cb(algebra: Algebra, pp: &ParamPoint<Complex64>, size: IdentitySize, tol: f64) -> Result<IdentityReport> {
    let (m, n) = (size.m, size.n);
    let ev = Evaluator::new(pp);
    let (lhs, rhs) = homogeneous_sides(algebra, m, n)?;
    let lv = ev.element(&lhs)?;
    let mut res = compare_values(&lv, &ev.element(&rhs)?);
    if algebra == Algebra::Qcomm {
        let gx = NormalFormElement::x(algebra);
        let gy = NormalFormElement::y(algebra);
        let swapped = qcomm_homogeneous_rhs(&gy, &gx, true, n, m)?;
        let swapped_lhs = nf_pow(&gy.add(&gx)?, m + n + 1)?;
        res = res
            .max(compare_values(&lv, &ev.element(&swapped)?))
            .max(compare_values(&lv, &ev.element(&swapped_lhs)?));
    }
    Ok(IdentityReport::new(homogeneous_identity_name(algebra), pp, size, res, tol))
}

/// Residual of the H-algebra homogeneous identity with the factor `H(m, k)`
/// dropped from the second sum. Nonzero for generic points once `m, n >= 1`.
pub fn h_homogeneous_without_row_factor_residual(pp: &ParamPoint<Complex64>, size: IdentitySize) -> Result<f64> {
    let ev = Evaluator::new(pp);
    let (lhs, rhs) = homogeneous_sides_with(Algebra::HAlg, size.m, size.n, false)?;
    compare_elements(&ev, &lhs, &rhs)
}

/// Residual of the elliptic binomial convolution
/// `[n+m, k] prod_{j<n+m-k} h'(j,0) = sum_j [n,j] [m,k-j]_{shifted} ...`,
/// with `h' = h_{x;b,a,c}` and the inner binomial at `(a q^j, b q^{n-j}, c q^n)`.
pub fn convolution_residual(pp: &ParamPoint<Complex64>, n: usize, m: usize, k: usize) -> Result<f64> {
    let (lhs, rhs) = convolution_sides(pp, n, m, k)?;
    Ok(relative_residual(&lhs, &rhs))
}

/// The two sides of the convolution, and the summands of the right side.
pub fn convolution_sides(pp: &ParamPoint<Complex64>, n: usize, m: usize, k: usize) -> Result<(Complex64, Complex64)> {
    let terms = convolution_terms(pp, n, m, k)?;
    let sw = pp.swap_ab();
    let mut lhs = h_binomial(pp, n + m, k as i64)?;
    for j in 0..(n + m).saturating_sub(k) {
        lhs *= lattice_weight(&sw, j, 0)?;
    }
    Ok((lhs, terms.iter().sum()))
}

/// Summands `j = 0..=k` of the convolution's right side.
pub fn convolution_terms(pp: &ParamPoint<Complex64>, n: usize, m: usize, k: usize) -> Result<Vec<Complex64>> {
    let sw = pp.swap_ab();
    let mut terms = Vec::with_capacity(k + 1);
    for j in 0..=k {
        if j > n || k - j > m {
            terms.push(Complex64::new(0.0, 0.0));
            continue;
        }
        let inner_pt = pp.shifted(Shift::new(j as i32, (n - j) as i32, n as i32));
        let mut t = h_binomial(pp, n, j as i64)? * h_binomial(&inner_pt, m, (k - j) as i64)?;
        for l in 0..n - j {
            t *= lattice_weight(&sw, l, 0)?;
        }
        for s in 0..(m + j - k) {
            t *= lattice_weight(&sw, s + n - j, j)?;
        }
        for i in 0..k - j {
            t *= normalized_weight(pp, i + j, n - j)?;
        }
        terms.push(t);
    }
    Ok(terms)
}

/// Coefficient of `X^k Y^{n+m-k}` in `(X + hY)^n (X + hY)^m`, computed by
/// normal-form multiplication, against the left side of the convolution.
pub fn convolution_cross_check(pp: &ParamPoint<Complex64>, n: usize, m: usize) -> Result<f64> {
    let prod = nf_mul(&binomial_power(Algebra::HAlg, n)?, &binomial_power(Algebra::HAlg, m)?)?;
    let ev = Evaluator::new(pp);
    let vals = ev.element(&prod)?;
    let mut worst: f64 = 0.0;
    for k in 0..=n + m {
        let got = vals.get(&(k, n + m - k)).copied().unwrap_or_default();
        let (lhs, _) = convolution_sides(pp, n, m, k)?;
        worst = worst.max(relative_residual(&got, &lhs));
    }
    Ok(worst)
}

/// Summands of the terminating very-well-poised sum
/// `sum_k theta(a q^{2k})/theta(a) (a,b,c,d,e,q^{-n})_k / (q, aq/b, aq/c, aq/d, aq/e, aq^{n+1})_k q^k`
/// with `e = a^2 q^{n+1} / (bcd)`.
pub fn frenkel_turaev_terms(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
    n: usize,
    q: Complex64,
    p: Complex64,
) -> Result<Vec<Complex64>> {
    let e = a * a * q.powi(n as i32 + 1) / (b * c * d);
    let num = [a, b, c, d, e, q.powi(-(n as i32))];
    let den = [q, a * q / b, a * q / c, a * q / d, a * q / e, a * q.powi(n as i32 + 1)];
    let th_a = theta(&a, &p)?;
    let mut out = Vec::with_capacity(n + 1);
    let mut ratio = Complex64::new(1.0, 0.0);
    for k in 0..=n {
        if k > 0 {
            let mut top = Scaled::new(q);
            let mut bottom = Scaled::new(Complex64::new(1.0, 0.0));
            for z in &num {
                top = top.mul(&theta(&(z * q.powi(k as i32 - 1)), &p)?);
            }
            for z in &den {
                bottom = bottom.mul(&theta(&(z * q.powi(k as i32 - 1)), &p)?);
            }
            ratio *= scaled_ratio(&top, &bottom, "denominator of the 10V9 sum")?;
        }
        let wp = checked_ratio(theta(&(a * q.powi(2 * k as i32)), &p)?, th_a, "theta(a)")?;
        out.push(wp * ratio);
    }
    Ok(out)
}

/// `(lhs, rhs)` of the Frenkel-Turaev summation, balancing enforced.
pub fn frenkel_turaev(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
    n: usize,
    q: Complex64,
    p: Complex64,
) -> Result<(Complex64, Complex64)> {
    let lhs: Complex64 = frenkel_turaev_terms(a, b, c, d, n, q, p)?.iter().sum();
    let aq = a * q;
    let num = theta_fact_many_scaled(&[aq, aq / (b * c), aq / (b * d), aq / (c * d)], &q, &p, n)?;
    let den = theta_fact_many_scaled(&[aq / b, aq / c, aq / d, aq / (b * c * d)], &q, &p, n)?;
    Ok((lhs, scaled_ratio(&num, &den, "product side of the 10V9 sum")?))
}

/// True if no denominator theta value of [`frenkel_turaev`] is within
/// `guard` of a zero of theta.
#[allow(clippy::too_many_arguments)]
pub fn frenkel_turaev_generic(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
    n: usize,
    q: Complex64,
    p: Complex64,
    guard: f64,
) -> bool {
    let e = a * a * q.powi(n as i32 + 1) / (b * c * d);
    let aq = a * q;
    let bases = [
        q,
        aq / b,
        aq / c,
        aq / d,
        aq / e,
        aq * q.powi(n as i32),
        aq / (b * c * d),
    ];
    bases
        .iter()
        .all(|z| (0..n as i32).all(|l| theta_zero_margin(&(z * q.powi(l)), &p) > guard))
        && theta_zero_margin(&a, &p) > guard
}

/// Outcome of matching the convolution's right-hand sum to the 10V9 sum
/// under the substituted parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubstitutionReport {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    /// Largest relative mismatch of consecutive-term ratios, summation
    /// index aligned directly.
    pub ratio_mismatch: f64,
    /// Same with the summation index reversed.
    pub reversed_ratio_mismatch: f64,
    /// `|sum_conv - (t_0 / u_0) sum_10V9|` relative, for the better alignment.
    pub sum_mismatch: f64,
    /// True if the sum itself (not only its term ratios) closes.
    pub summation_closes: bool,
}

/// Substitutes `(a, b, c, d, e, n) -> (a q^{-n}/b, a c q^{n+m}, q^{1-n}/(bc),
/// a q^{k-n-m}/b, q^{-n}, k)` into the 10V9 sum and compares its terms with
/// those of the convolution sum.
pub fn ft_substitution(pp: &ParamPoint<Complex64>, n: usize, m: usize, k: usize) -> Result<SubstitutionReport> {
    let (a, b, c, q, p) = (pp.a, pp.b, pp.c, pp.q, pp.p);
    let ni = n as i32;
    let mi = m as i32;
    let ki = k as i32;
    let fa = a * q.powi(-ni) / b;
    let fb = a * c * q.powi(ni + mi);
    let fc = q.powi(1 - ni) / (b * c);
    let fd = a * q.powi(ki - ni - mi) / b;
    let ft = frenkel_turaev_terms(fa, fb, fc, fd, k, q, p)?;
    let conv = convolution_terms(pp, n, m, k)?;
    let ratios = |v: &[Complex64]| -> Vec<Option<Complex64>> {
        v.windows(2)
            .map(|w| if w[0].norm() == 0.0 { None } else { Some(w[1] / w[0]) })
            .collect()
    };
    let mismatch = |x: &[Option<Complex64>], y: &[Option<Complex64>]| -> f64 {
        x.iter()
            .zip(y)
            .map(|(u, v)| match (u, v) {
                (Some(u), Some(v)) => relative_residual(u, v),
                (None, None) => 0.0,
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    };
    let rc = ratios(&conv);
    let direct = mismatch(&rc, &ratios(&ft));
    let rev: Vec<_> = ft.iter().rev().copied().collect();
    let reversed = mismatch(&rc, &ratios(&rev));
    let aligned = if direct <= reversed { &ft } else { &rev };
    let conv_sum: Complex64 = conv.iter().sum();
    let (sum_mismatch, closes) = match (conv.first(), aligned.first()) {
        (Some(t0), Some(u0)) if u0.norm() > 0.0 => {
            let (_, ft_rhs) = frenkel_turaev(fa, fb, fc, fd, k, q, p)?;
            let scaled = t0 / u0 * ft_rhs;
            let summed: Complex64 = aligned.iter().sum::<Complex64>() * (t0 / u0);
            (relative_residual(&conv_sum, &summed), relative_residual(&conv_sum, &scaled) < 1e-8)
        }
        _ => (f64::INFINITY, false),
    };
    Ok(SubstitutionReport {
        n,
        m,
        k,
        ratio_mismatch: direct,
        reversed_ratio_mismatch: reversed,
        sum_mismatch,
        summation_closes: closes,
    })
}
