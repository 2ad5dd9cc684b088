//! Weighted lattice paths in the rectangle `[0, m+1] x [0, n+1]`.
//!
//! Paths are bit strings read from the least significant bit, a set bit
//! being an east step. `A(k, l)` is the weighted count of paths from the
//! origin to `(k, l)` and `B(k, l) = A(k, l) / (A(k, 0) A(0, l))`.

use crate::error::{Error, Result};
use crate::scalar::{relative_residual, Scalar};
use crate::special_fn::{
    checked_ratio, scaled_ratio, theta_fact_many_scaled, theta_prod, theta_prod_scaled, IdentitySize,
    ParamPoint,
};
use crate::weights::{lattice_weight, lattice_weight_complement, step_weight, StepKind, StepWeightSpec};

/// Largest `m + n` accepted by the brute-force enumerators.
pub const DEFAULT_PATH_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePath {
    bits: u64,
    len: u8,
}

impl LatticePath {
    /// Builds a path from explicit steps.
    pub fn from_steps(steps: &[StepKind]) -> Self {
        assert!(steps.len() <= 64);
        let bits = steps
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == StepKind::East)
            .fold(0u64, |acc, (t, _)| acc | (1 << t));
        LatticePath {
            bits,
            len: steps.len() as u8,
        }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn east_steps(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn north_steps(&self) -> usize {
        self.len() - self.east_steps()
    }

    pub fn step(&self, t: usize) -> StepKind {
        if self.bits >> t & 1 == 1 {
            StepKind::East
        } else {
            StepKind::North
        }
    }

    /// Point reached after the first `t` steps.
    pub fn point_after(&self, t: usize) -> (usize, usize) {
        let mask = if t >= 64 { u64::MAX } else { (1u64 << t) - 1 };
        let e = (self.bits & mask).count_ones() as usize;
        (e, t - e)
    }

    /// Steps together with their starting points.
    pub fn steps(&self) -> impl Iterator<Item = StepWeightSpec> + '_ {
        let mut pos = (0, 0);
        (0..self.len()).map(move |t| {
            let (i, j) = pos;
            match self.step(t) {
                StepKind::East => {
                    pos.0 += 1;
                    StepWeightSpec::east(i, j)
                }
                StepKind::North => {
                    pos.1 += 1;
                    StepWeightSpec::north(i, j)
                }
            }
        })
    }

    /// True if the path runs from the origin to `(m+1, n+1)`.
    pub fn is_valid_for(&self, size: IdentitySize) -> bool {
        self.east_steps() == size.m + 1 && self.north_steps() == size.n + 1
    }
}

/// All monotone paths with the given numbers of east and north steps, in
/// increasing bit order.
fn paths_with(east: usize, north: usize) -> Vec<LatticePath> {
    let len = east + north;
    assert!(len < 64);
    if east == 0 {
        return vec![LatticePath { bits: 0, len: len as u8 }];
    }
    let mut out = Vec::new();
    let mut v: u64 = (1 << east) - 1;
    let limit = 1u64 << len;
    while v < limit {
        out.push(LatticePath { bits: v, len: len as u8 });
        // next integer with the same popcount
        let t = v | (v - 1);
        v = (t + 1) | (((!t & (t + 1)) - 1) >> (v.trailing_zeros() + 1));
    }
    out
}

pub fn enumerate_paths_capped(size: IdentitySize, cap: usize) -> Result<Vec<LatticePath>> {
    if size.m + size.n > cap {
        return Err(Error::CapExceeded {
            size: size.m + size.n,
            cap,
        });
    }
    Ok(paths_with(size.m + 1, size.n + 1))
}

/// All `C(m+n+2, m+1)` paths from the origin to `(m+1, n+1)`.
pub fn enumerate_paths(size: IdentitySize) -> Result<Vec<LatticePath>> {
    enumerate_paths_capped(size, DEFAULT_PATH_CAP)
}

/// Product of the step weights along `path`.
pub fn path_weight<S: Scalar>(pp: &ParamPoint<S>, size: IdentitySize, path: &LatticePath) -> Result<S> {
    let mut acc = pp.one();
    for spec in path.steps() {
        acc = acc * step_weight(pp, size, spec)?;
    }
    Ok(acc)
}

/// Precomputed `h(i, j)` and `1 - h(i, j)` for `i < rows`, `j < cols`.
#[derive(Debug, Clone)]
pub struct HTable<S> {
    rows: usize,
    cols: usize,
    h: Vec<S>,
    hc: Vec<S>,
}

impl<S: Scalar> HTable<S> {
    pub fn new(pp: &ParamPoint<S>, rows: usize, cols: usize) -> Result<Self> {
        let mut h = Vec::with_capacity(rows * cols);
        let mut hc = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                h.push(lattice_weight(pp, i, j)?);
                hc.push(lattice_weight_complement(pp, i, j)?);
            }
        }
        Ok(HTable { rows, cols, h, hc })
    }

    /// The leading `rows x cols` block. Steps outside the block weigh 1 in
    /// path products, so the block must match the region exactly.
    pub fn restricted(&self, rows: usize, cols: usize) -> HTable<S> {
        assert!(rows <= self.rows && cols <= self.cols);
        if rows == self.rows && cols == self.cols {
            return self.clone();
        }
        let pick = |v: &[S]| {
            (0..rows)
                .flat_map(|i| (0..cols).map(move |j| i * self.cols + j))
                .map(|t| v[t].clone())
                .collect()
        };
        HTable {
            rows,
            cols,
            h: pick(&self.h),
            hc: pick(&self.hc),
        }
    }

    pub fn h(&self, i: usize, j: usize) -> &S {
        debug_assert!(i < self.rows && j < self.cols);
        &self.h[i * self.cols + j]
    }

    pub fn hc(&self, i: usize, j: usize) -> &S {
        debug_assert!(i < self.rows && j < self.cols);
        &self.hc[i * self.cols + j]
    }
}

/// Path weight with `h` read from a table; steps on the far boundary weigh 1.
fn table_path_weight<S: Scalar>(t: &HTable<S>, one: &S, path: &LatticePath) -> S {
    let mut acc = one.clone();
    for s in path.steps() {
        match s.kind {
            StepKind::East if s.j < t.cols => acc = acc * t.h(s.i, s.j).clone(),
            StepKind::North if s.i < t.rows => acc = acc * t.hc(s.i, s.j).clone(),
            _ => {}
        }
    }
    acc
}

/// Sum of all path weights to `(m+1, n+1)`; equals 1 identically.
pub fn total_weight<S: Scalar>(pp: &ParamPoint<S>, size: IdentitySize) -> Result<S> {
    let table = HTable::new(pp, size.m + 1, size.n + 1)?;
    total_weight_in(&table, &pp.one(), size)
}

/// [`total_weight`] with `h` read from `table`, which must cover the region.
pub fn total_weight_in<S: Scalar>(table: &HTable<S>, one: &S, size: IdentitySize) -> Result<S> {
    let t = table.restricted(size.m + 1, size.n + 1);
    Ok(enumerate_paths(size)?
        .iter()
        .fold(one.zero(), |acc, path| acc + table_path_weight(&t, one, path)))
}

/// Brute-force `A(k, l)`: the weighted count of paths from the origin to
/// `(k, l)` with east weight `h(i, j)` and north weight `1 - h(i, j)`.
pub fn path_sum_to<S: Scalar>(pp: &ParamPoint<S>, k: usize, l: usize) -> Result<S> {
    if k + l > DEFAULT_PATH_CAP + 2 {
        return Err(Error::CapExceeded {
            size: k + l,
            cap: DEFAULT_PATH_CAP + 2,
        });
    }
    let table = HTable::new(pp, k + 1, l + 1)?;
    Ok(path_sum_in(&table, &pp.one(), k, l))
}

/// [`path_sum_to`] with `h` read from `table`.
pub fn path_sum_in<S: Scalar>(table: &HTable<S>, one: &S, k: usize, l: usize) -> S {
    let t = table.restricted(k + 1, l + 1);
    paths_with(k, l)
        .iter()
        .fold(one.zero(), |acc, path| acc + table_path_weight(&t, one, path))
}

/// `A(k, l)` and `B(k, l)` over `0 <= k <= m`, `0 <= l <= n`.
#[derive(Debug, Clone)]
pub struct WeightTable<S> {
    pub size: IdentitySize,
    a: Vec<S>,
    b: Vec<S>,
}

impl<S: Scalar> WeightTable<S> {
    fn idx(&self, k: usize, l: usize) -> usize {
        assert!(k <= self.size.m && l <= self.size.n);
        k * (self.size.n + 1) + l
    }

    pub fn a(&self, k: usize, l: usize) -> &S {
        &self.a[self.idx(k, l)]
    }

    pub fn b(&self, k: usize, l: usize) -> &S {
        &self.b[self.idx(k, l)]
    }
}

/// Fills `A` row by row from the recurrence
/// `A(k, l) = h(k-1, l) A(k-1, l) + (1 - h(k, l-1)) A(k, l-1)`.
pub fn a_table_dp<S: Scalar>(pp: &ParamPoint<S>, size: IdentitySize) -> Result<WeightTable<S>> {
    let t = HTable::new(pp, size.m + 1, size.n + 1)?;
    a_table_dp_in(&t, &pp.one(), size)
}

/// [`a_table_dp`] with `h` read from `table`.
pub fn a_table_dp_in<S: Scalar>(table: &HTable<S>, one: &S, size: IdentitySize) -> Result<WeightTable<S>> {
    let (rows, cols) = (size.m + 1, size.n + 1);
    let t = table.restricted(rows, cols);
    let mut a: Vec<S> = Vec::with_capacity(rows * cols);
    for k in 0..rows {
        for l in 0..cols {
            let v = match (k, l) {
                (0, 0) => one.clone(),
                (0, _) => a[l - 1].clone() * t.hc(0, l - 1).clone(),
                (_, 0) => a[(k - 1) * cols].clone() * t.h(k - 1, 0).clone(),
                _ => {
                    t.h(k - 1, l).clone() * a[(k - 1) * cols + l].clone()
                        + t.hc(k, l - 1).clone() * a[k * cols + l - 1].clone()
                }
            };
            a.push(v);
        }
    }
    let mut b = Vec::with_capacity(rows * cols);
    for k in 0..rows {
        for l in 0..cols {
            if k == 0 || l == 0 {
                b.push(one.clone());
            } else {
                let den = a[k * cols].clone() * a[l].clone();
                b.push(checked_ratio(a[k * cols + l].clone(), den, "boundary product A(k,0)A(0,l)")?);
            }
        }
    }
    Ok(WeightTable { size, a, b })
}

/// Closed form of `B(k, l)`; exactly 1 on the boundary.
pub fn b_closed<S: Scalar>(pp: &ParamPoint<S>, k: usize, l: usize) -> Result<S> {
    if k == 0 || l == 0 {
        return Ok(pp.one());
    }
    let ParamPoint { x, a, b, c, q, p, .. } = pp;
    let (ki, li) = (k as i64, l as i64);
    let ab = a.clone() / b.clone();
    let ba = b.clone() / a.clone();
    let qk = q.pow_int(ki);
    let num = theta_prod_scaled(&[ab.clone() * q.pow_int(ki - li), ba.clone()], p)?
        * theta_fact_many_scaled(&[b.clone() * c.clone() * q.pow_int(li)], q, p, k)?
        * theta_fact_many_scaled(
            &[
                a.clone() * c.clone() * qk.clone(),
                a.clone() * b.clone(),
                c.clone() * x.clone(),
                c.clone() / x.clone(),
                qk.clone() * q.clone(),
            ],
            q,
            p,
            l,
        )?;
    let den = theta_prod_scaled(&[ab * qk.clone(), ba * q.pow_int(li)], p)?
        * theta_fact_many_scaled(&[b.clone() * c.clone()], q, p, k)?
        * theta_fact_many_scaled(
            &[
                a.clone() * c.clone(),
                a.clone() * b.clone() * qk.clone(),
                c.clone() * x.clone() * qk.clone(),
                c.clone() / x.clone() * qk,
                q.clone(),
            ],
            q,
            p,
            l,
        )?;
    Ok(scaled_ratio(&num, &den, "denominator of B")? * q.pow_int(li))
}

/// The two fully factorized forms of `A(k, l)`; they differ by a theta
/// inversion and the exchange `a <-> b`, `k <-> l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AVariant {
    First,
    Second,
}

pub fn a_closed<S: Scalar>(pp: &ParamPoint<S>, k: usize, l: usize, variant: AVariant) -> Result<S> {
    match variant {
        AVariant::First => a_closed_first(pp, k, l),
        AVariant::Second => a_closed_first(&pp.swap_ab(), l, k),
    }
}

fn a_closed_first<S: Scalar>(pp: &ParamPoint<S>, k: usize, l: usize) -> Result<S> {
    let ParamPoint { x, a, b, c, q, p, .. } = pp;
    let (ki, li) = (k as i64, l as i64);
    let ab = a.clone() / b.clone();
    let num = theta_prod_scaled(&[ab.clone() * q.pow_int(ki - li)], p)?
        * theta_fact_many_scaled(
            &[
                b.clone() * c.clone() * q.pow_int(li),
                c.clone() / b.clone(),
                a.clone() * x.clone(),
                a.clone() / x.clone(),
            ],
            q,
            p,
            k,
        )?
        * theta_fact_many_scaled(
            &[
                q.pow_int(ki + 1),
                a.clone() * c.clone() * q.pow_int(ki),
                c.clone() / a.clone(),
                b.clone() * x.clone(),
                b.clone() / x.clone(),
            ],
            q,
            p,
            l,
        )?;
    let den = theta_fact_many_scaled(&[ab], q, p, k + 1)?
        * theta_fact_many_scaled(&[q.clone(), q.clone() * b.clone() / a.clone()], q, p, l)?
        * theta_fact_many_scaled(
            &[a.clone() * b.clone(), c.clone() * x.clone(), c.clone() / x.clone()],
            q,
            p,
            k + l,
        )?;
    Ok(scaled_ratio(&num, &den, "denominator of A")? * q.pow_int(li))
}

/// Residual of the explicit difference system for `B` at an interior point,
/// with `B` taken from [`b_closed`].
pub fn b_system_residual<S: Scalar>(pp: &ParamPoint<S>, k: usize, l: usize) -> Result<f64> {
    if k == 0 || l == 0 {
        return Ok(0.0);
    }
    let ParamPoint { x, a, b, c, q, p, .. } = pp;
    let (ki, li) = (k as i64, l as i64);
    let qe = |e: i64| q.pow_int(e);
    let ab = a.clone() / b.clone();
    let ba = b.clone() / a.clone();
    let abp = a.clone() * b.clone();
    let cx = c.clone() * x.clone();
    let cpx = c.clone() / x.clone();
    let bc = b.clone() * c.clone();
    let ac = a.clone() * c.clone();
    let c1 = checked_ratio(
        theta_prod(
            &[
                bc.clone() * qe(ki + 2 * li - 1),
                abp.clone() * qe(ki - 1),
                ab.clone() * qe(ki - 1),
                cx.clone() * qe(ki - 1),
                cpx.clone() * qe(ki - 1),
            ],
            p,
        )?,
        theta_prod(
            &[
                abp.clone() * qe(ki + li - 1),
                ab * qe(ki - li - 1),
                cx.clone() * qe(ki + li - 1),
                cpx.clone() * qe(ki + li - 1),
                bc * qe(ki - 1),
            ],
            p,
        )?,
        "first coefficient of the B system",
    )?;
    let c2 = checked_ratio(
        theta_prod(
            &[
                ac.clone() * qe(2 * ki + li - 1),
                abp.clone() * qe(li - 1),
                ba.clone() * qe(li - 1),
                cx.clone() * qe(li - 1),
                cpx.clone() * qe(li - 1),
            ],
            p,
        )?,
        theta_prod(
            &[
                abp * qe(ki + li - 1),
                ba * qe(li - ki - 1),
                cx * qe(ki + li - 1),
                cpx * qe(ki + li - 1),
                ac * qe(li - 1),
            ],
            p,
        )?,
        "second coefficient of the B system",
    )?;
    let lhs = c1 * b_closed(pp, k - 1, l)? + c2 * b_closed(pp, k, l - 1)?;
    Ok(relative_residual(&lhs, &b_closed(pp, k, l)?))
}

/// `A(0, l), ..., A(kmax, l)` from the first closed form, each value after the
/// first obtained from its predecessor by a ratio of theta values.
pub fn a_closed_run<S: Scalar>(pp: &ParamPoint<S>, l: usize, kmax: usize) -> Result<Vec<S>> {
    let ParamPoint { x, a, b, c, q, p, .. } = pp;
    let li = l as i64;
    let ab = a.clone() / b.clone();
    let abp = a.clone() * b.clone();
    let (bc, ac) = (b.clone() * c.clone(), a.clone() * c.clone());
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(a_closed_first(pp, 0, l)?);
    for k in 1..=kmax as i64 {
        let lo = q.pow_int(k - 1);
        let hi = q.pow_int(k + li - 1);
        let num = theta_prod_scaled(
            &[
                ab.clone() * q.pow_int(k - li),
                bc.clone() * hi.clone(),
                c.clone() / b.clone() * lo.clone(),
                a.clone() * x.clone() * lo.clone(),
                a.clone() / x.clone() * lo.clone(),
                q.clone() * hi.clone(),
                ac.clone() * hi.clone(),
            ],
            p,
        )?;
        let den = theta_prod_scaled(
            &[
                ab.clone() * q.pow_int(k - li - 1),
                q.clone() * lo.clone(),
                ac.clone() * lo.clone(),
                ab.clone() * q.clone() * lo,
                abp.clone() * hi.clone(),
                c.clone() * x.clone() * hi.clone(),
                c.clone() / x.clone() * hi,
            ],
            p,
        )?;
        let step = scaled_ratio(&num, &den, "denominator of A")?;
        let next = out[out.len() - 1].clone() * step;
        out.push(next);
    }
    Ok(out)
}

/// The two sums `sum_k (1 - h(k, n)) A(k, n)` and `sum_l h(m, l) A(m, l)`,
/// with `A` from the first and second closed forms respectively.
pub fn master_equality_sums<S: Scalar>(pp: &ParamPoint<S>, size: IdentitySize) -> Result<(S, S)> {
    let (m, n) = (size.m, size.n);
    let mut first = pp.q.zero();
    for (k, a) in a_closed_run(pp, n, m)?.into_iter().enumerate() {
        first = first + lattice_weight_complement(pp, k, n)? * a;
    }
    let mut second = pp.q.zero();
    for (l, a) in a_closed_run(&pp.swap_ab(), m, n)?.into_iter().enumerate() {
        second = second + lattice_weight(pp, m, l)? * a;
    }
    Ok((first, second))
}

/// Relative residual of `1 = sum_k (1 - h(k, n)) A(k, n) + sum_l h(m, l) A(m, l)`.
pub fn master_equality_residual<S: Scalar>(pp: &ParamPoint<S>, size: IdentitySize) -> Result<f64> {
    let (s1, s2) = master_equality_sums(pp, size)?;
    Ok(relative_residual(&(s1 + s2), &pp.one()))
}
