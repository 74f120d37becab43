use ngmm::diagnostics::{effective_sample_size, geweke_joint_test, summarize, summarize_series, tiny_model};
use ngmm::io::{read_chain_csv, write_chain_csv};
use ngmm::samplers::{chain_rng, default_init, run_chain};
use ngmm::{Kernel, SamplerConfig, SamplerKind};
use rand::Rng;
use rand_distr::StandardNormal;

fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = chain_rng(seed, 0);
    let mut x = 0.0;
    let scale = (1.0 - phi * phi).sqrt();
    (0..n)
        .map(|_| {
            let e: f64 = rng.sample(StandardNormal);
            x = phi * x + scale * e;
            x
        })
        .collect()
}

#[test]
fn iid_chain_has_nearly_full_ess() {
    let x = ar1(0.0, 10_000, 1);
    let ess = effective_sample_size(&x);
    assert!((8_000.0..=12_000.0).contains(&ess), "{ess}");
}

#[test]
fn ar1_ess_and_autocorrelation() {
    let n = 100_000;
    let phi = 0.5;
    let x = ar1(phi, n, 2);
    let ess = effective_sample_size(&x);
    let want = n as f64 * (1.0 - phi) / (1.0 + phi);
    assert!((ess / want - 1.0).abs() < 0.2, "{ess} vs {want}");
    let s = summarize_series("x", &x).unwrap();
    assert_eq!(s.acf[0], 1.0);
    for k in 1..=3 {
        assert!((s.acf[k] / phi.powi(k as i32) - 1.0).abs() < 0.2, "lag {k}: {}", s.acf[k]);
    }
    assert!(s.ess <= n as f64);
}

#[test]
fn quantiles_of_normal_chain() {
    let x = ar1(0.0, 50_000, 3);
    let s = summarize_series("x", &x).unwrap();
    assert!((s.q50).abs() < 0.03);
    assert!((s.q95 - 1.6449).abs() < 0.05 && (s.q05 + 1.6449).abs() < 0.05);
}

fn tiny_config(kind: SamplerKind, store_tau: bool) -> SamplerConfig {
    SamplerConfig {
        kind,
        r: Some(0.5),
        iterations: 300,
        burnin: 10,
        thin: 2,
        seed: 99,
        scan_probs: None,
        store_tau,
    }
}

#[test]
fn chain_summary_and_csv_round_trip() {
    let (model, hyper) = tiny_model();
    let init = default_init(&model, &hyper, &mut chain_rng(1, 0));
    let chain = run_chain(&model, &hyper, init, &tiny_config(SamplerKind::Hybrid, true)).unwrap();
    assert_eq!(chain.states.len(), 150);
    let stats = summarize(&chain).unwrap();
    assert_eq!(stats.coordinates.len(), 3 + 2 + 2 + 3);
    assert!(stats.coordinates.iter().all(|c| c.ess <= 150.0 && c.ess >= 1.0));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.csv");
    write_chain_csv(&path, &chain).unwrap();
    let table = read_chain_csv(&path).unwrap();
    assert_eq!(table.values.nrows(), 150);
    for (r, s) in chain.states.iter().enumerate() {
        assert_eq!(table.values[(r, 0)], s.beta()[0]);
        assert_eq!(table.values[(r, 6)], s.lambda()[1]);
    }
}

#[test]
fn geweke_is_seed_reproducible() {
    let (model, hyper) = tiny_model();
    let k = Kernel::hybrid(0.5).unwrap();
    let a = geweke_joint_test(&model, &hyper, &k, 2_000, 5).unwrap();
    let b = geweke_joint_test(&model, &hyper, &k, 2_000, 5).unwrap();
    assert_eq!(a.table(), b.table());
    assert_eq!(a.functions.len(), 8);
    assert!(a.functions.iter().all(|f| f.z.is_finite()));
}

#[test]
fn geweke_rejects_tiny_sample() {
    let (model, hyper) = tiny_model();
    assert!(geweke_joint_test(&model, &hyper, &Kernel::gibbs(), 3, 1).is_err());
}
