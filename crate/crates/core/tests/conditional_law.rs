mod common;

use common::{direct_theta_moments, rel_err_mat, rel_err_vec};
use ngmm::bounds::random_instance;
use ngmm::conditionals::{build_operators, lambda_conditional, tau_conditional, theta_moments};
use ngmm::linalg::{Matrix, Vector};
use ngmm::{Hyperparameters, MixedModelData, TauVector};
use proptest::prelude::*;

#[test]
fn block_formulas_match_direct_inverse() {
    for k in 0..60 {
        let inst = random_instance(11, k).unwrap();
        let ops = build_operators(&inst.model, &inst.tau, &inst.lambda).unwrap();
        let mom = theta_moments(&inst.model, &ops).unwrap();
        let (mean, cov) = direct_theta_moments(&inst.model, &inst.tau, &inst.lambda);
        assert!(rel_err_mat(&mom.cov, &cov) < 1e-8, "instance {k}: cov");
        assert!(rel_err_vec(&mom.mean, &mean) < 1e-8, "instance {k}: mean");
    }
}

#[test]
fn lambda_rates_by_hand() {
    // n = 2, p = 1, X = 0, Z = I: residual = ‖y − u‖²
    let model = MixedModelData::new(
        Vector::from_column_slice(&[1.0, 3.0]),
        Matrix::zeros(2, 1),
        vec![Matrix::identity(2, 2)],
    )
    .unwrap();
    let hyper = Hyperparameters::new(vec![2.0, 3.0], vec![0.5, 1.5], 1.0, 1.0).unwrap();
    let beta = Vector::from_column_slice(&[2.0]);
    let u = Vector::from_column_slice(&[1.0, 1.0]);
    let tau = TauVector::from_slice(&[4.0]).unwrap();
    let g = lambda_conditional(&model, &hyper, &beta, &u, &tau);
    // shape n/2 + p/2 + a₀ = 1 + 0.5 + 2; rate ‖y − u‖²/2 + β²/(2τ) + b₀ = 2 + 0.5 + 0.5
    assert_eq!(g[0].shape, 3.5);
    assert_eq!(g[0].rate, 3.0);
    // shape q/2 + a₁ = 4; rate ‖u‖²/2 + b₁ = 2.5
    assert_eq!(g[1].shape, 4.0);
    assert_eq!(g[1].rate, 2.5);
}

#[test]
fn tau_conditional_parameters() {
    let hyper = Hyperparameters::new(vec![1.0, 1.0], vec![1.0, 1.0], 0.7, 2.0).unwrap();
    let beta = Vector::from_column_slice(&[0.5, -2.0]);
    let g = tau_conditional(&hyper, &beta, 3.0).unwrap();
    assert!((g[0].zeta - 0.2).abs() < 1e-15);
    assert_eq!(g[0].xi, 4.0);
    assert_eq!(g[0].psi, 0.75);
    assert_eq!(g[1].psi, 12.0);
}

fn small_model() -> impl Strategy<Value = (MixedModelData, TauVector, Vector)> {
    (2usize..6, 1usize..4, any::<u64>()).prop_map(|(n, p, seed)| {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |r, c| Matrix::from_fn(r, c, |_, _| rng.random_range(-2.0..2.0));
        let x = draw(n, p);
        let z = draw(n, 2);
        let y = Vector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let tau = TauVector::new(Vector::from_fn(p, |_, _| 10f64.powf(rng.random_range(-2.0..2.0)))).unwrap();
        let lambda = Vector::from_fn(2, |_, _| 10f64.powf(rng.random_range(-2.0..2.0)));
        (MixedModelData::new(y, x, vec![z]).unwrap(), tau, lambda)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_is_symmetric_positive_definite((model, tau, lambda) in small_model()) {
        let ops = build_operators(&model, &tau, &lambda).unwrap();
        let mom = theta_moments(&model, &ops).unwrap();
        prop_assert!((&mom.cov - mom.cov.transpose()).norm() <= 1e-12 * mom.cov.norm());
        prop_assert!(ngmm::linalg::min_eigenvalue(&mom.cov) > 0.0);
    }

    #[test]
    fn mean_solves_normal_equations((model, tau, lambda) in small_model()) {
        let ops = build_operators(&model, &tau, &lambda).unwrap();
        let mom = theta_moments(&model, &ops).unwrap();
        let (_, cov) = direct_theta_moments(&model, &tau, &lambda);
        let prec = cov.try_inverse().unwrap();
        let rhs = model.w().transpose() * model.y() * lambda[0];
        prop_assert!(rel_err_vec(&(prec * &mom.mean), &rhs) < 1e-7);
    }

    #[test]
    fn m_is_a_contraction((model, tau, lambda) in small_model()) {
        let ops = build_operators(&model, &tau, &lambda).unwrap();
        let ev = ngmm::linalg::sym_eigenvalues(ops.m());
        prop_assert!(ev.iter().all(|e| *e > -1e-12 && *e <= 1.0 + 1e-12));
    }
}
