//! Step weights of the elliptic lattice-path model and the two derived
//! weights used by the elliptic commuting algebras.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special_fn::{scaled_ratio, theta_prod_scaled, IdentitySize, ParamPoint};

/// The elliptic weight `h_{x;a,b,c;q,p}(i, j)`.
///
/// Evaluated from the eight-theta closed form
/// `theta(bc q^{i+2j}, (c/b) q^i, ax q^i, (a/x) q^i) /
///  theta(ab q^{i+j}, (a/b) q^{i-j}, cx q^{i+j}, (c/x) q^{i+j})`.
pub fn lattice_weight<S: Scalar>(pp: &ParamPoint<S>, i: usize, j: usize) -> Result<S> {
    lattice_weight_signed(pp, i as i64, j as i64)
}

pub(crate) fn lattice_weight_signed<S: Scalar>(pp: &ParamPoint<S>, i: i64, j: i64) -> Result<S> {
    let ParamPoint { x, a, b, c, q, p, .. } = pp;
    let qi = q.pow_int(i);
    let qij = q.pow_int(i + j);
    let num = theta_prod_scaled(
        &[
            b.clone() * c.clone() * q.pow_int(i + 2 * j),
            c.clone() / b.clone() * qi.clone(),
            a.clone() * x.clone() * qi.clone(),
            a.clone() / x.clone() * qi,
        ],
        p,
    )?;
    let den = theta_prod_scaled(
        &[
            a.clone() * b.clone() * qij.clone(),
            a.clone() / b.clone() * q.pow_int(i - j),
            c.clone() * x.clone() * qij.clone(),
            c.clone() / x.clone() * qij,
        ],
        p,
    )?;
    scaled_ratio(&num, &den, "denominator of h")
}

/// `1 - h(i, j)`, computed as `h` with `a` and `b` exchanged at `(j, i)`.
pub fn lattice_weight_complement<S: Scalar>(pp: &ParamPoint<S>, i: usize, j: usize) -> Result<S> {
    lattice_weight(&pp.swap_ab(), j, i)
}

/// The row-normalized weight `H(i, j) = h(i, j) / h(i, 0)`.
pub fn normalized_weight<S: Scalar>(pp: &ParamPoint<S>, i: usize, j: usize) -> Result<S> {
    let base = lattice_weight(pp, i, 0)?;
    if j == 0 {
        return Ok(pp.one());
    }
    if base.is_zero() || !base.finite() {
        return Err(Error::HCondition(format!("h({i}, 0) vanishes")));
    }
    let top = lattice_weight(pp, i, j)?;
    Ok(top / base)
}

/// The elliptic binomial weight `W_{a,b;q,p}(s, t)`; identically 1 at `t = 0`.
pub fn binomial_weight<S: Scalar>(a: &S, b: &S, q: &S, p: &S, s: usize, t: usize) -> Result<S> {
    if t == 0 {
        return Ok(q.one());
    }
    let (s, t) = (s as i64, t as i64);
    let ab = a.clone() / b.clone();
    let num = theta_prod_scaled(
        &[
            a.clone() * q.pow_int(s + 2 * t),
            b.clone() * q.pow_int(2 * s),
            b.clone() * q.pow_int(2 * s - 1),
            ab.clone() * q.pow_int(1 - s),
            ab.clone() * q.pow_int(-s),
        ],
        p,
    )?;
    let den = theta_prod_scaled(
        &[
            a.clone() * q.pow_int(s),
            b.clone() * q.pow_int(2 * s + t),
            b.clone() * q.pow_int(2 * s + t - 1),
            ab.clone() * q.pow_int(1 + t - s),
            ab * q.pow_int(t - s),
        ],
        p,
    )?;
    Ok(scaled_ratio(&num, &den, "denominator of W")? * q.pow_int(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    East,
    North,
}

/// A unit step starting at `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StepWeightSpec {
    pub kind: StepKind,
    pub i: usize,
    pub j: usize,
}

impl StepWeightSpec {
    pub fn east(i: usize, j: usize) -> Self {
        StepWeightSpec { kind: StepKind::East, i, j }
    }

    pub fn north(i: usize, j: usize) -> Self {
        StepWeightSpec { kind: StepKind::North, i, j }
    }

    /// True if the step stays inside the rectangle `[0, m+1] x [0, n+1]`.
    pub fn inside(&self, size: IdentitySize) -> bool {
        match self.kind {
            StepKind::East => self.i <= size.m && self.j <= size.n + 1,
            StepKind::North => self.i <= size.m + 1 && self.j <= size.n,
        }
    }
}

/// Weight of a single step for paths ending at `(m+1, n+1)`.
pub fn step_weight<S: Scalar>(pp: &ParamPoint<S>, size: IdentitySize, spec: StepWeightSpec) -> Result<S> {
    if !spec.inside(size) {
        return Err(Error::OutOfRegion {
            i: spec.i,
            j: spec.j,
            m: size.m,
            n: size.n,
        });
    }
    match spec.kind {
        StepKind::East if spec.j == size.n + 1 => Ok(pp.one()),
        StepKind::East => lattice_weight(pp, spec.i, spec.j),
        StepKind::North if spec.i == size.m + 1 => Ok(pp.one()),
        StepKind::North => lattice_weight_complement(pp, spec.i, spec.j),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{relative_residual, Complex64};
    use crate::special_fn::{theta, Shift};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn point() -> ParamPoint<Complex64> {
        ParamPoint::new(
            c(0.9, 0.4),
            c(0.5, -0.6),
            c(1.3, 0.2),
            c(-0.4, 0.7),
            c(0.55, 0.25),
            c(0.2, -0.1),
        )
        .unwrap()
    }

    #[test]
    fn h_at_origin_is_theta_ratio() {
        let pp = point();
        let th = |z: Complex64| theta(&z, &pp.p).unwrap();
        let (x, a, b, cc) = (pp.x, pp.a, pp.b, pp.c);
        let want = th(b * cc) * th(cc / b) * th(a * x) * th(a / x)
            / (th(a * b) * th(a / b) * th(cc * x) * th(cc / x));
        let got = lattice_weight(&pp, 0, 0).unwrap();
        assert!(relative_residual(&got, &want) < 1e-14);
    }

    #[test]
    fn complement_symmetry() {
        let pp = point();
        for i in 0..4 {
            for j in 0..4 {
                let h = lattice_weight(&pp, i, j).unwrap();
                let hc = lattice_weight_complement(&pp, i, j).unwrap();
                assert!(relative_residual(&(c(1.0, 0.0) - h), &hc) < 1e-10, "{i} {j}");
            }
        }
    }

    #[test]
    fn motivating_substitution() {
        let pp = point();
        for (i, j) in [(0, 0), (1, 2), (3, 1)] {
            let direct = lattice_weight(&pp, i, j).unwrap();
            let moved = pp.shifted(Shift::new(i as i32, j as i32, (i + j) as i32));
            let via = lattice_weight(&moved, 0, 0).unwrap();
            assert!(relative_residual(&direct, &via) < 1e-12);
        }
    }

    #[test]
    fn ellipticity_in_x() {
        let pp = point();
        let moved = pp.with_x(pp.x * pp.p);
        for (i, j) in [(0, 0), (2, 1)] {
            let h0 = lattice_weight(&pp, i, j).unwrap();
            let h1 = lattice_weight(&moved, i, j).unwrap();
            assert!(relative_residual(&h0, &h1) < 1e-10);
            let n0 = normalized_weight(&pp, i, j).unwrap();
            let n1 = normalized_weight(&moved, i, j).unwrap();
            assert!(relative_residual(&n0, &n1) < 1e-10);
        }
    }

    #[test]
    fn normalized_weight_cases() {
        let pp = point();
        assert_eq!(normalized_weight(&pp, 2, 0).unwrap(), c(1.0, 0.0));
        let want = lattice_weight(&pp, 1, 2).unwrap() / lattice_weight(&pp, 1, 0).unwrap();
        assert!(relative_residual(&normalized_weight(&pp, 1, 2).unwrap(), &want) < 1e-15);
        // a x = 1 kills h(0, 0)
        let bad = pp.with_x(c(1.0, 0.0) / pp.a);
        assert!(matches!(normalized_weight(&bad, 0, 1), Err(Error::HCondition(_))));
    }

    #[test]
    fn w_weight_cases() {
        let (a, b, q, p) = (c(0.4, 0.3), c(0.7, -0.2), c(0.6, 0.1), c(0.15, 0.05));
        assert_eq!(binomial_weight(&a, &b, &q, &p, 3, 0).unwrap(), c(1.0, 0.0));
        let th = |z: Complex64| theta(&z, &p).unwrap();
        let want = th(a * q.powi(3)) * th(b * q * q) * th(b * q) * th(a / b) * th(a / (b * q))
            / (th(a * q) * th(b * q.powi(3)) * th(b * q * q) * th(a * q / b) * th(a / b))
            * q;
        let got = binomial_weight(&a, &b, &q, &p, 1, 1).unwrap();
        assert!(relative_residual(&got, &want) < 1e-13);
    }

    #[test]
    fn w_weight_degenerates_to_q_power() {
        let q = c(0.6, 0.3);
        let zero = c(0.0, 0.0);
        for (s, t) in [(0, 1), (1, 1), (2, 3)] {
            let got = binomial_weight(&c(1e-16, 0.0), &c(1e-8, 0.0), &q, &zero, s, t).unwrap();
            assert!((got - q.powi(t as i32)).norm() < 1e-6);
        }
    }

    #[test]
    fn step_weight_cases() {
        let pp = point();
        let size = IdentitySize::new(2, 1);
        assert_eq!(step_weight(&pp, size, StepWeightSpec::east(0, 2)).unwrap(), c(1.0, 0.0));
        assert_eq!(step_weight(&pp, size, StepWeightSpec::north(3, 0)).unwrap(), c(1.0, 0.0));
        assert_eq!(
            step_weight(&pp, size, StepWeightSpec::east(0, 0)).unwrap(),
            lattice_weight(&pp, 0, 0).unwrap()
        );
        assert!(matches!(
            step_weight(&pp, size, StepWeightSpec::east(3, 0)),
            Err(Error::OutOfRegion { .. })
        ));
        assert!(step_weight(&pp, size, StepWeightSpec::north(0, 2)).is_err());
    }
}
