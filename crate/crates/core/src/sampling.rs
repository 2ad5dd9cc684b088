//! Seeded sampling of generic parameter points.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Complex64;
use crate::special_fn::{check_genericity, IdentitySize, ParamPoint};

/// Attempts before [`sample_generic`] gives up.
pub const MAX_ATTEMPTS: usize = 100;

/// Magnitude ranges; arguments are uniform on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingDomain {
    /// Log-uniform magnitude range for `x`, `a`, `b`, `c`.
    pub xabc: (f64, f64),
    /// Uniform magnitude range for `q`.
    pub q: (f64, f64),
    /// Uniform magnitude range for `p`.
    pub p: (f64, f64),
}

impl Default for SamplingDomain {
    fn default() -> Self {
        SamplingDomain {
            xabc: (0.2, 2.0),
            q: (0.3, 0.9),
            p: (0.05, 0.5),
        }
    }
}

impl SamplingDomain {
    pub fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi;
        if !ok(self.xabc) || !ok(self.q) || !(ok(self.p) || self.p == (0.0, 0.0)) {
            return Err(Error::InvalidParameter("empty or nonpositive sampling range".into()));
        }
        if self.p.1 >= 1.0 {
            return Err(Error::InvalidParameter("nome range must lie below 1".into()));
        }
        Ok(())
    }
}

fn polar(rng: &mut ChaCha8Rng, modulus: f64) -> Complex64 {
    Complex64::from_polar(modulus, rng.gen_range(0.0..TAU))
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    uniform(rng, (lo.ln(), hi.ln())).exp()
}

/// One unconditioned draw; `p` is zero when `basic` is set.
pub fn draw(rng: &mut ChaCha8Rng, domain: &SamplingDomain, basic: bool) -> ParamPoint<Complex64> {
    let mut v = [Complex64::new(0.0, 0.0); 4];
    for z in v.iter_mut() {
        let r = log_uniform(rng, domain.xabc);
        *z = polar(rng, r);
    }
    let qm = uniform(rng, domain.q);
    let q = polar(rng, qm);
    let p = if basic {
        Complex64::new(0.0, 0.0)
    } else {
        let pm = uniform(rng, domain.p);
        polar(rng, pm)
    };
    ParamPoint::unchecked(v[0], v[1], v[2], v[3], q, p)
}

/// Draws until a point passes [`check_genericity`] and `accept`.
pub fn sample_generic(
    rng: &mut ChaCha8Rng,
    domain: &SamplingDomain,
    basic: bool,
    size: IdentitySize,
    guard: f64,
    mut accept: impl FnMut(&ParamPoint<Complex64>) -> bool,
) -> Result<ParamPoint<Complex64>> {
    for _ in 0..MAX_ATTEMPTS {
        let mut pp = draw(rng, domain, basic);
        if check_genericity(&pp, size, guard) && accept(&pp) {
            pp.certify(size, guard);
            return Ok(pp);
        }
    }
    Err(Error::Exhausted(MAX_ATTEMPTS))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ *b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Independent generator for one trial, fixed by `(seed, identity, m, n, trial)`.
pub fn trial_rng(seed: u64, identity: &str, m: usize, n: usize, trial: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a(identity.as_bytes()).to_le_bytes());
    key[16..20].copy_from_slice(&(m as u32).to_le_bytes());
    key[20..24].copy_from_slice(&(n as u32).to_le_bytes());
    key[24..].copy_from_slice(&(trial as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_fn::DEFAULT_GUARD;

    #[test]
    fn draws_respect_domain() {
        let d = SamplingDomain::default();
        let mut rng = trial_rng(7, "t", 1, 1, 0);
        for _ in 0..200 {
            let pp = draw(&mut rng, &d, false);
            for z in [pp.x, pp.a, pp.b, pp.c] {
                assert!(z.norm() >= 0.2 - 1e-12 && z.norm() <= 2.0 + 1e-12);
            }
            assert!(pp.q.norm() >= 0.3 && pp.q.norm() <= 0.9);
            assert!(pp.p.norm() >= 0.05 && pp.p.norm() <= 0.5);
        }
        let basic = draw(&mut rng, &d, true);
        assert!(basic.is_basic());
    }

    #[test]
    fn rng_is_keyed() {
        let a: u64 = trial_rng(1, "elliptic_cb", 2, 3, 4).gen();
        let b: u64 = trial_rng(1, "elliptic_cb", 2, 3, 4).gen();
        let c: u64 = trial_rng(1, "elliptic_cb", 2, 3, 5).gen();
        let d: u64 = trial_rng(1, "abq1_cb", 2, 3, 4).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn generic_samples_certified() {
        let mut rng = trial_rng(3, "x", 0, 0, 0);
        let size = IdentitySize::new(4, 4);
        let pp = sample_generic(&mut rng, &SamplingDomain::default(), false, size, DEFAULT_GUARD, |_| true).unwrap();
        assert!(pp.is_generic());
        let err = sample_generic(&mut rng, &SamplingDomain::default(), false, size, DEFAULT_GUARD, |_| false);
        assert_eq!(err.unwrap_err(), Error::Exhausted(MAX_ATTEMPTS));
        assert!(SamplingDomain { q: (0.5, 0.2), ..Default::default() }.validate().is_err());
    }
}
