mod common;

use common::{bessel_k_half_integer, quadrature_moment, QuadratureCdf};
use ngmm::samplers::chain_rng;
use ngmm::special::bessel_k_log;
use ngmm::GigParams;
use proptest::prelude::*;

#[test]
fn half_integer_bessel_closed_forms() {
    for n in 0..5 {
        for &x in &[1e-3, 0.1, 0.7, 1.0, 3.3, 25.0, 300.0] {
            let want = bessel_k_half_integer(n, x).ln();
            let got = bessel_k_log(n as f64 + 0.5, x).unwrap();
            assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "n={n} x={x}: {got} vs {want}");
        }
    }
}

#[test]
fn mean_for_unit_shape_and_half_rate() {
    // c = 1, d = 1/2, λ₀β² = 1: GIG(½, 1, 1), mean K_{3/2}(1)/K_{1/2}(1) = 2
    let g = GigParams::new(0.5, 1.0, 1.0).unwrap();
    assert!((g.moment(1.0) - 2.0).abs() < 1e-12);
}

#[test]
fn moment_formula_matches_quadrature() {
    for &(z, xi, psi) in &[(0.3, 1.0, 2.0), (-1.7, 0.4, 5.0), (2.5, 3.0, 0.2), (-0.1, 2.0, 0.01), (0.0, 1.0, 1.0)] {
        let g = GigParams::new(z, xi, psi).unwrap();
        for &k in &[1.0, -1.0, -0.2, 2.0] {
            let want = quadrature_moment(z, xi, psi, k);
            let got = g.moment(k);
            assert!((got - want).abs() <= 1e-7 * want, "{g:?} order {k}: {got} vs {want}");
        }
    }
}

#[test]
fn sampler_matches_quadrature_cdf() {
    let mut rng = chain_rng(5, 0);
    for &(z, xi, psi) in &[(3.5, 1.0, 2.0), (0.8, 1.0, 0.5), (0.1, 0.1, 0.05), (-0.1, 2.0, 0.01)] {
        let g = GigParams::new(z, xi, psi).unwrap();
        let mut draws: Vec<f64> = (0..50_000).map(|_| g.sample(&mut rng).unwrap()).collect();
        let ks = QuadratureCdf::new(z, xi, psi).ks_distance(&mut draws);
        assert!(ks < 0.01, "{g:?}: KS {ks}");
    }
}

#[test]
fn sampling_is_seed_reproducible() {
    let g = GigParams::new(-0.1, 2.0, 0.3).unwrap();
    let a: Vec<f64> = {
        let mut rng = chain_rng(9, 3);
        (0..100).map(|_| g.sample(&mut rng).unwrap()).collect()
    };
    let mut rng = chain_rng(9, 3);
    let b: Vec<f64> = (0..100).map(|_| g.sample(&mut rng).unwrap()).collect();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    // X ~ GIG(−ζ, ξ, ψ)  ⇔  1/X ~ GIG(ζ, ψ, ξ)
    #[test]
    fn reciprocal_symmetry(z in -3.0f64..3.0, lxi in -3.0f64..3.0, lpsi in -3.0f64..3.0, k in -2.0f64..2.0) {
        let (xi, psi) = (10f64.powf(lxi), 10f64.powf(lpsi));
        let a = GigParams::new(-z, xi, psi).unwrap().moment(k);
        let b = GigParams::new(z, psi, xi).unwrap().moment(-k);
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()));
    }

    #[test]
    fn draws_are_positive_and_finite(z in -4.0f64..4.0, lxi in -4.0f64..4.0, lpsi in -4.0f64..4.0, seed in any::<u64>()) {
        let g = GigParams::new(z, 10f64.powf(lxi), 10f64.powf(lpsi)).unwrap();
        let mut rng = chain_rng(seed, 0);
        for _ in 0..20 {
            let x = g.sample(&mut rng).unwrap();
            prop_assert!(x > 0.0 && x.is_finite());
        }
    }

    #[test]
    fn jensen_on_inverse_moment(z in -3.0f64..3.0, lxi in -2.0f64..2.0, lpsi in -2.0f64..2.0) {
        let g = GigParams::new(z, 10f64.powf(lxi), 10f64.powf(lpsi)).unwrap();
        prop_assert!(g.moment(1.0) * g.moment(-1.0) >= 1.0 - 1e-10);
    }
}
