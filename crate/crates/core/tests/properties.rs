//! Randomized invariants across the crate.

use chaundy_bullard::bezout::{
    bezout_moduli, bezout_solve, cofactor_symmetry_residual, t_involution, t_involution_coeffs, BezoutFamily,
    DualQPoly, Poly,
};
use chaundy_bullard::campaign::{run_campaign, CampaignConfig};
use chaundy_bullard::identities::{cb_residual, family_terms, Family};
use chaundy_bullard::lattice::{b_system_residual, master_equality_residual};
use chaundy_bullard::noncomm::{
    compare_elements, frenkel_turaev, frenkel_turaev_generic, h_binomial, nf_mul, nf_pow, w_binomial, Algebra, Atom,
    Coefficient, Evaluator, NormalFormElement,
};
use chaundy_bullard::sampling::{sample_generic, trial_rng, SamplingDomain};
use chaundy_bullard::scalar::{coefficientwise_residual, relative_residual, Scalar};
use chaundy_bullard::special_fn::{
    addition_formula_residual, qbinom, qpoch, theta, theta_fact, DEFAULT_GUARD,
};
use chaundy_bullard::weights::{binomial_weight, lattice_weight, lattice_weight_complement, normalized_weight};
use chaundy_bullard::{Complex64, IdentitySize, MpComplex, ParamPoint};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn point(seed: u64, size: IdentitySize, basic: bool) -> ParamPoint<Complex64> {
    let mut rng = trial_rng(seed, "properties", size.m, size.n, 0);
    sample_generic(&mut rng, &SamplingDomain::default(), basic, size, DEFAULT_GUARD, |_| true).unwrap()
}

/// Complex number with modulus in `range` and arbitrary argument.
fn polar(range: std::ops::Range<f64>) -> impl Strategy<Value = Complex64> {
    (range, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

fn scale_by(pp: &ParamPoint<Complex64>, which: usize) -> ParamPoint<Complex64> {
    let p = pp.p;
    let mut v = [pp.x, pp.a, pp.b, pp.c];
    v[which] *= p;
    ParamPoint::unchecked(v[0], v[1], v[2], v[3], pp.q, pp.p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn theta_functional_equations(x in polar(0.1..3.0), p in polar(0.01..0.5)) {
        let t = theta(&x, &p).unwrap();
        let one = c(1.0, 0.0);
        prop_assert!(relative_residual(&theta(&(p / x), &p).unwrap(), &t) < 1e-12);
        prop_assert!(relative_residual(&theta(&(one / x), &p).unwrap(), &(-t / x)) < 1e-12);
        prop_assert!(relative_residual(&theta(&(p * x), &p).unwrap(), &(-t / x)) < 1e-12);
    }

    #[test]
    fn addition_formula(
        x in polar(0.1..3.0), y in polar(0.1..3.0), u in polar(0.1..3.0), v in polar(0.1..3.0), p in polar(0.0..0.5),
    ) {
        prop_assert!(addition_formula_residual(&x, &y, &u, &v, &p).unwrap() < 1e-10);
    }

    #[test]
    fn theta_fact_at_zero_nome_is_qpoch(x in polar(0.1..3.0), q in polar(0.1..0.95), k in 0usize..12) {
        prop_assert_eq!(theta_fact(&x, &q, &c(0.0, 0.0), k).unwrap(), qpoch(&x, &q, k));
    }

    #[test]
    fn qbinom_pascal(q in polar(0.1..0.95), n in 0usize..15, k in 1i64..15) {
        let lhs = qbinom(n + 1, k, &q).unwrap();
        let rhs = qbinom(n, k, &q).unwrap() + q.pow_int(n as i64 + 1 - k) * qbinom(n, k - 1, &q).unwrap();
        prop_assert!(relative_residual(&lhs, &rhs) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weight_complement_symmetry(seed in any::<u64>(), i in 0usize..=6, j in 0usize..=6) {
        let pp = point(seed, IdentitySize::new(6, 6), false);
        let h = lattice_weight(&pp, i, j).unwrap();
        let mirrored = lattice_weight(&pp.swap_ab(), j, i).unwrap();
        prop_assert!(relative_residual(&(pp.one() - h), &mirrored) < 1e-10);
        prop_assert_eq!(lattice_weight_complement(&pp, i, j).unwrap(), mirrored);
    }

    #[test]
    fn weights_are_elliptic(seed in any::<u64>(), i in 0usize..=4, j in 0usize..=4, which in 0usize..4) {
        let pp = point(seed, IdentitySize::new(4, 4), false);
        let moved = scale_by(&pp, which);
        let pairs = [
            (lattice_weight(&pp, i, j).unwrap(), lattice_weight(&moved, i, j).unwrap()),
            (normalized_weight(&pp, i, j).unwrap(), normalized_weight(&moved, i, j).unwrap()),
            (h_binomial(&pp, i + j, i as i64).unwrap(), h_binomial(&moved, i + j, i as i64).unwrap()),
        ];
        for (u, v) in pairs {
            prop_assert!(relative_residual(&u, &v) < 1e-9);
        }
        if which == 1 || which == 2 {
            let (a, b) = (pp.a, pp.b);
            let w0 = w_binomial(&a, &b, &pp.q, &pp.p, i + j, i as i64).unwrap();
            let w1 = w_binomial(&moved.a, &moved.b, &pp.q, &pp.p, i + j, i as i64).unwrap();
            prop_assert!(relative_residual(&w0, &w1) < 1e-9);
            let s0 = binomial_weight(&a, &b, &pp.q, &pp.p, i, j).unwrap();
            let s1 = binomial_weight(&moved.a, &moved.b, &pp.q, &pp.p, i, j).unwrap();
            prop_assert!(relative_residual(&s0, &s1) < 1e-9);
        }
    }

    #[test]
    fn weight_motivation_identity(seed in any::<u64>(), i in 0usize..=5, j in 0usize..=5) {
        let pp = point(seed, IdentitySize::new(5, 5), false);
        let q = pp.q;
        let moved = ParamPoint::unchecked(
            pp.x,
            pp.a * q.pow_int(i as i64),
            pp.b * q.pow_int(j as i64),
            pp.c * q.pow_int((i + j) as i64),
            q,
            pp.p,
        );
        let lhs = lattice_weight(&pp, i, j).unwrap();
        prop_assert!(relative_residual(&lhs, &lattice_weight(&moved, 0, 0).unwrap()) < 1e-12);
    }

    #[test]
    fn binomial_weight_first_column_is_one(seed in any::<u64>(), s in 0usize..10) {
        let pp = point(seed, IdentitySize::new(4, 4), false);
        prop_assert_eq!(binomial_weight(&pp.a, &pp.b, &pp.q, &pp.p, s, 0).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn b_difference_system(seed in any::<u64>(), k in 1usize..=4, l in 1usize..=4) {
        let pp = point(seed, IdentitySize::new(4, 4), false);
        prop_assert!(b_system_residual(&pp, k, l).unwrap() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Large sizes cancel heavily, so a miss in double precision is re-checked
    /// at 128 bits.
    #[test]
    fn master_equality(seed in any::<u64>(), m in 0usize..=8, n in 0usize..=8) {
        let size = IdentitySize::new(m, n);
        let pp = point(seed, size, false);
        let mut r = master_equality_residual(&pp, size).unwrap();
        if r >= 1e-8 {
            r = master_equality_residual(&pp.lift_to(&MpComplex::unit(128)), size).unwrap();
        }
        prop_assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn elliptic_identity(seed in any::<u64>(), m in 0usize..=8, n in 0usize..=8) {
        let size = IdentitySize::new(m, n);
        let pp = point(seed, size, false);
        let mut r = cb_residual(Family::Elliptic, &pp, size).unwrap();
        if r >= 1e-8 {
            r = cb_residual(Family::Elliptic, &pp.lift_to(&MpComplex::unit(128)), size).unwrap();
        }
        prop_assert!(r < 1e-8, "{r}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mirror_symmetry(seed in any::<u64>(), m in 0usize..=4, n in 0usize..=4, f in 0usize..6) {
        let fam = Family::ALL[f];
        let pp = point(seed, IdentitySize::new(m.max(n), m.max(n)), fam != Family::Elliptic);
        let (a0, b0) = family_terms(fam, &pp, IdentitySize::new(m, n)).unwrap();
        let (a1, b1) = family_terms(fam, &pp.swap_ab(), IdentitySize::new(n, m)).unwrap();
        let r0 = cb_residual(fam, &pp, IdentitySize::new(m, n)).unwrap();
        let r1 = cb_residual(fam, &pp.swap_ab(), IdentitySize::new(n, m)).unwrap();
        prop_assert!((r0 - r1).abs() < 1e-12, "{r0} {r1}");
        if matches!(fam, Family::Elliptic | Family::Abcq | Family::Abq2) {
            prop_assert!(relative_residual(&a0, &b1) < 1e-12);
            prop_assert!(relative_residual(&b0, &a1) < 1e-12);
        }
    }

    #[test]
    fn b_redundant_in_first_kind(seed in any::<u64>(), m in 0usize..=5, n in 0usize..=5) {
        let size = IdentitySize::new(m, n);
        let pp = point(seed, size, true);
        let b = pp.b;
        let moved = ParamPoint::unchecked(pp.x * b, pp.a / b, c(1.0, 0.0), pp.c, pp.q, pp.p);
        let r0 = cb_residual(Family::Abq1, &pp, size).unwrap();
        let r1 = cb_residual(Family::Abq1, &moved, size).unwrap();
        prop_assert!((r0 - r1).abs() < 1e-12, "{r0} {r1}");
    }

    #[test]
    fn classical_large_sizes(x in polar(0.05..2.0), m in 0usize..=20, n in 0usize..=20) {
        let pp = ParamPoint::unchecked(x, c(0.5, 0.0), c(0.7, 0.0), c(0.9, 0.0), c(0.5, 0.0), c(0.0, 0.0));
        let r = cb_residual(Family::Classical, &pp.lift_to(&MpComplex::unit(192)), IdentitySize::new(m, n)).unwrap();
        prop_assert!(r < 1e-13, "{r}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bezout_solve_is_deterministic(seed in any::<u64>(), m in 0usize..=5, n in 0usize..=5, f in 0usize..4) {
        let pp = point(seed, IdentitySize::new(m, n), true);
        let (p1, p2) = bezout_moduli(BezoutFamily::ALL[f], pp.a, pp.b, pp.q, m, n);
        let first = bezout_solve(&p1, &p2, m, n).unwrap();
        let second = bezout_solve(&p1, &p2, m, n).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn cofactor_symmetry(seed in any::<u64>(), m in 0usize..=5, n in 0usize..=5, second in any::<bool>()) {
        let pp = point(seed, IdentitySize::new(m, n), true);
        let fam = if second { BezoutFamily::SecondKind } else { BezoutFamily::FirstKind };
        prop_assert!(cofactor_symmetry_residual(fam, pp.a, pp.b, pp.q, m, n).unwrap() < 1e-10);
    }

    /// The coefficients of `T p` grow like `|q|^{-k^2/2}`, so the round trip
    /// runs with 128-bit intermediates.
    #[test]
    fn t_is_an_involution(q in polar(0.3..0.9), coeffs in prop::collection::vec(polar(0.2..2.0), 1..=9)) {
        let unit = MpComplex::unit(128);
        let wide: Vec<MpComplex> = coeffs.iter().map(|z| unit.lift(*z)).collect();
        let qm = unit.lift(q);
        let (once_q, once_qinv) = t_involution_coeffs(&qm, &wide, &wide).unwrap();
        let (back, _) = t_involution_coeffs(&qm, &once_q, &once_qinv).unwrap();
        let back: Vec<Complex64> = back.iter().map(|z| z.to_c64()).collect();
        prop_assert!(coefficientwise_residual(&back, &coeffs) < 1e-11);
        let once = t_involution(&DualQPoly::constant_coeffs(Poly::new(coeffs.clone()), q)).unwrap();
        prop_assert_eq!(once.at_q.degree(), Poly::new(coeffs).degree());
    }
}

fn random_element(alg: Algebra, s: &[f64; 3]) -> NormalFormElement {
    let terms = [
        NormalFormElement::monomial(alg, 1, 0, Coefficient::scalar(c(s[0], 0.3))),
        NormalFormElement::monomial(alg, 0, 2, Coefficient::atom(Atom::LatticeWeight { i: 1, j: 0, mirrored: false })),
        NormalFormElement::monomial(alg, 2, 1, Coefficient::atom(Atom::QPow(2)).scale(c(s[1], s[2]))),
    ];
    terms[1..].iter().fold(terms[0].clone(), |acc, t| acc.add(t).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn nf_mul_is_associative(seed in any::<u64>(), s in prop::array::uniform9(-1.5f64..1.5), a in 0usize..3) {
        let alg = Algebra::ALL[a];
        let pp = point(seed, IdentitySize::new(6, 6), false);
        let ev = Evaluator::new(&pp);
        let e1 = random_element(alg, &[s[0], s[1], s[2]]);
        let e2 = random_element(alg, &[s[3], s[4], s[5]]);
        let e3 = random_element(alg, &[s[6], s[7], s[8]]);
        let left = nf_mul(&nf_mul(&e1, &e2).unwrap(), &e3).unwrap();
        let right = nf_mul(&e1, &nf_mul(&e2, &e3).unwrap()).unwrap();
        prop_assert!(compare_elements(&ev, &left, &right).unwrap() < 1e-10);
    }

    #[test]
    fn ys_xr_rule(seed in any::<u64>(), r in 0usize..=4, s in 0usize..=4) {
        let pp = point(seed, IdentitySize::new(5, 5), false);
        let ev = Evaluator::new(&pp);
        let alg = Algebra::HAlg;
        let e = nf_mul(
            &nf_pow(&NormalFormElement::y(alg), s).unwrap(),
            &nf_pow(&NormalFormElement::x(alg), r).unwrap(),
        )
        .unwrap();
        let got = ev.element(&e).unwrap()[&(r, s)];
        let want: Complex64 = (0..r).map(|i| normalized_weight(&pp, i, s).unwrap()).product();
        prop_assert!(relative_residual(&got, &want) < 1e-10);
    }

    #[test]
    fn binomials_vanish_outside_range(seed in any::<u64>(), n in 0usize..8, off in 1i64..5) {
        let pp = point(seed, IdentitySize::new(4, 4), false);
        let zero = c(0.0, 0.0);
        for k in [-off, n as i64 + off] {
            prop_assert_eq!(w_binomial(&pp.a, &pp.b, &pp.q, &pp.p, n, k).unwrap(), zero);
            prop_assert_eq!(h_binomial(&pp, n, k).unwrap(), zero);
        }
    }

    #[test]
    fn frenkel_turaev_summation(seed in any::<u64>(), n in 0usize..=6) {
        let mut rng = trial_rng(seed, "frenkel-turaev", n, 0, 0);
        let pp = sample_generic(&mut rng, &SamplingDomain::default(), false, IdentitySize::new(n, n), DEFAULT_GUARD, |pp| {
            frenkel_turaev_generic(pp.x, pp.a, pp.b, pp.c, n, pp.q, pp.p, DEFAULT_GUARD)
        })
        .unwrap();
        let (lhs, rhs) = frenkel_turaev(pp.x, pp.a, pp.b, pp.c, n, pp.q, pp.p).unwrap();
        prop_assert!(relative_residual(&lhs, &rhs) < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn campaigns_are_reproducible(seed in any::<u64>(), trials in 1usize..4) {
        let mut config = CampaignConfig::default();
        config.set("identities", "classical_cb,qcb,elliptic_cb,bezout_first_kind").unwrap();
        config.set("m_max", "2").unwrap();
        config.set("n_max", "1").unwrap();
        config.set("trials", &trials.to_string()).unwrap();
        config.set("seed", &seed.to_string()).unwrap();
        // f64 elliptic sums can cancel 1e13-sized terms at valid points
        config.set("precision", "128").unwrap();
        config.validate().unwrap();
        let first = run_campaign(&config).unwrap();
        let second = run_campaign(&config).unwrap();
        prop_assert_eq!(first.to_jsonl(), second.to_jsonl());
        // 4 identities over 3 x 2 sizes, whatever resampling happened
        prop_assert_eq!(first.summary.records, 4 * 6 * trials);
        prop_assert_eq!(first.summary.failures, 0);
    }
}
