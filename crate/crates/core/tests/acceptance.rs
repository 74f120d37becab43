//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion, with
//! indented detail underneath. Exits nonzero only when a criterion that can
//! be met fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{bessel_k_half_integer, direct_theta_moments, rel_err_mat, rel_err_vec, QuadratureCdf};
use ngmm::bounds::{random_instance, run_suite, SuiteConfig};
use ngmm::conditionals::{build_operators, theta_moments};
use ngmm::diagnostics::{geweke_joint_test, tiny_model};
use ngmm::drift::{
    a0_threshold, derive_certificate, drift_v, estimate_drift_expectation, nu, random_state, resolve_constants,
};
use ngmm::samplers::{chain_rng, default_init, Branch, Fault, Kernel};
use ngmm::special::bessel_k_log;
use ngmm::{run_chain, GigParams, SamplerConfig, SamplerKind, TauVector};
use rand::Rng;
use rayon::prelude::*;

struct Outcome {
    name: &'static str,
    passed: bool,
    /// A failure that could in principle be fixed.
    hard_failure: bool,
    /// Why the remaining failures cannot be met.
    unattainable: Option<String>,
    elapsed: Duration,
    limit: Duration,
    detail: Vec<String>,
}

impl Outcome {
    fn new(name: &'static str, limit_secs: u64) -> Self {
        Self {
            name,
            passed: true,
            hard_failure: false,
            unattainable: None,
            elapsed: Duration::ZERO,
            limit: Duration::from_secs(limit_secs),
            detail: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.hard_failure |= !ok;
        self.detail.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    fn check_unattainable(&mut self, ok: bool, line: String, why: &str) {
        self.passed &= ok;
        if !ok {
            self.unattainable = Some(why.to_string());
        }
        self.detail.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, line: String) {
        self.detail.push(format!("     {line}"));
    }
}

fn timed(mut o: Outcome, start: Instant) -> Outcome {
    o.elapsed = start.elapsed();
    let ok = o.elapsed < o.limit;
    o.check(ok, format!("runtime {:.2?} (limit {:?})", o.elapsed, o.limit));
    o
}

fn conditional_law() -> Outcome {
    let mut o = Outcome::new("conditional law: block formulas vs direct inverse, 200 instances, rel <= 1e-8", 10);
    let t = Instant::now();
    let mut worst_cov = 0.0f64;
    let mut worst_mean = 0.0f64;
    for k in 0..200 {
        let inst = random_instance(101, k).expect("instance");
        let ops = build_operators(&inst.model, &inst.tau, &inst.lambda).expect("operators");
        let mom = theta_moments(&inst.model, &ops).expect("moments");
        let (mean, cov) = direct_theta_moments(&inst.model, &inst.tau, &inst.lambda);
        worst_cov = worst_cov.max(rel_err_mat(&mom.cov, &cov));
        worst_mean = worst_mean.max(rel_err_vec(&mom.mean, &mean));
    }
    o.check(worst_cov <= 1e-8, format!("max relative error in covariance {worst_cov:.2e}"));
    o.check(worst_mean <= 1e-8, format!("max relative error in mean {worst_mean:.2e}"));
    timed(o, t)
}

/// Twenty τ-conditional laws GIG(c − ½, 2d, λ₀β²).
fn gig_triples() -> Vec<(f64, GigParams)> {
    let mut rng = chain_rng(2, 0);
    (0..20)
        .map(|_| {
            let c = rng.random_range(0.1..1.5);
            let d = 10f64.powf(rng.random_range(-0.3..0.3));
            let s = 10f64.powf(rng.random_range(-2.0..2.0));
            (c, GigParams::new(c - 0.5, 2.0 * d, s).expect("triple"))
        })
        .collect()
}

fn gig_engine() -> Outcome {
    let mut o = Outcome::new("GIG engine: moments within 1%, KS < 0.01, half-integer Bessel to 1e-10", 60);
    let t = Instant::now();
    let triples = gig_triples();
    let results: Vec<_> = triples
        .par_iter()
        .enumerate()
        .map(|(k, (c, g))| {
            let orders = [1.0, -1.0, -0.5 * nu(*c).expect("nu")];
            let mut rng = chain_rng(20, k as u64);
            let mut sums = [0.0; 3];
            for _ in 0..1_000_000 {
                let x = g.sample(&mut rng).expect("draw");
                for (s, r) in sums.iter_mut().zip(orders) {
                    *s += x.powf(r);
                }
            }
            let rel: Vec<f64> = sums
                .iter()
                .zip(orders)
                .map(|(s, r)| (s / 1e6 / g.moment(r) - 1.0).abs())
                .collect();
            let mut rng = chain_rng(21, k as u64);
            let mut draws: Vec<f64> = (0..100_000).map(|_| g.sample(&mut rng).expect("draw")).collect();
            let ks = QuadratureCdf::new(g.zeta, g.xi, g.psi).ks_distance(&mut draws);
            (rel, ks)
        })
        .collect();
    let worst_rel = results.iter().flat_map(|(r, _)| r.iter().copied()).fold(0.0, f64::max);
    let worst_ks = results.iter().map(|(_, ks)| *ks).fold(0.0, f64::max);
    o.check(worst_rel <= 0.01, format!("max relative moment error {worst_rel:.2e} over 20 triples x 3 orders, 1e6 draws"));
    o.check(worst_ks < 0.01, format!("max KS distance {worst_ks:.4} at 1e5 draws"));
    let mut worst_bessel = 0.0f64;
    for n in 0..5 {
        for &x in &[1e-3, 0.05, 0.5, 1.0, 2.5, 10.0, 80.0, 500.0] {
            let want = bessel_k_half_integer(n, x).ln();
            let got = bessel_k_log(n as f64 + 0.5, x).expect("bessel");
            worst_bessel = worst_bessel.max((got - want).abs() / want.abs().max(1.0));
        }
    }
    o.check(worst_bessel <= 1e-10, format!("half-integer log K error {worst_bessel:.2e}"));
    timed(o, t)
}

fn sampler_correctness() -> Outcome {
    let mut o = Outcome::new("sampler correctness: Geweke |z| < 4 for 3 samplers, |z| > 6 for 3 faults", 300);
    let t = Instant::now();
    let (model, hyper) = tiny_model();
    let samples = 50_000;
    let hybrid = Kernel::hybrid(0.3).expect("kernel");
    let correct = [
        ("hybrid r=0.3", hybrid.clone()),
        ("gibbs deterministic scan", Kernel::gibbs()),
        ("gibbs random scan", Kernel::random_scan([1.0 / 3.0; 3]).expect("kernel")),
    ];
    for (k, (name, kernel)) in correct.iter().enumerate() {
        let rep = geweke_joint_test(&model, &hyper, kernel, samples, 300 + k as u64).expect("geweke");
        o.check(rep.passed(4.0), format!("{name}: max |z| = {:.2}", rep.max_abs_z()));
    }
    let faults = [
        (Fault::WrongLambda0Shape, "lambda0 shape off by one"),
        (Fault::WrongGigOrder, "GIG order c + 1/2"),
    ];
    for (k, (fault, name)) in faults.iter().enumerate() {
        let kernel = hybrid.clone().with_fault(*fault);
        let rep = geweke_joint_test(&model, &hyper, &kernel, samples, 310 + k as u64).expect("geweke");
        o.check(rep.max_abs_z() > 6.0, format!("fault {name}: max |z| = {:.2}", rep.max_abs_z()));
    }

    // Taking the θ branch with probability 1 − r is the hybrid kernel at 1 − r,
    // which has the same invariant law, so no invariance test can see it.
    let kernel = hybrid.clone().with_fault(Fault::SwappedBranches);
    let rep = geweke_joint_test(&model, &hyper, &kernel, samples, 320).expect("geweke");
    let z = rep.max_abs_z();
    o.check_unattainable(
        z > 6.0,
        format!("fault swapped r branches: max |z| = {z:.2}"),
        "the swapped-branch fault leaves the posterior invariant, so no Geweke test can detect it",
    );
    // sanity: an undetectable fault must still look like a correct kernel
    o.check(z < 6.0, format!("swapped-branch control behaves as an invariant kernel (|z| = {z:.2} < 6)"));

    let kernel = hybrid.with_fault(Fault::CrossedBranches);
    let rep = geweke_joint_test(&model, &hyper, &kernel, samples, 330).expect("geweke");
    o.note(format!("extra fault crossed branches (informational): max |z| = {:.2}", rep.max_abs_z()));
    timed(o, t)
}

fn bound_suite() -> Outcome {
    let mut o = Outcome::new("bound checks: every inequality on 200 random instances (MC at 4 se)", 120);
    let t = Instant::now();
    let res = run_suite(&SuiteConfig::default()).expect("suite");
    for s in &res.summary {
        o.check(
            s.failures == 0,
            format!("{:<28} {}/{} pass, min margin {:.3e}", s.name, s.instances - s.failures, s.instances, s.min_margin),
        );
    }
    timed(o, t)
}

fn certificate() -> Outcome {
    let mut o = Outcome::new("certificate: all rho < 1 and rho* < 1 on the tiny model, threshold arithmetic", 1);
    let t = Instant::now();
    let (model, hyper) = tiny_model();
    let consts = resolve_constants(&model, &hyper, None, None, None, &mut chain_rng(5, 0)).expect("constants");
    match derive_certificate(&model, &hyper, consts) {
        Ok(rep) => {
            let co = rep.coefficients.expect("coefficients");
            for (name, v) in co.rho.constructed() {
                o.check(v < 1.0, format!("{name} = {v:.6}"));
            }
            o.check(co.rho_star < 1.0, format!("rho* = {:.6}, L = {:.3e}", co.rho_star, co.l));
        }
        Err(e) => o.check(false, format!("derive_certificate failed: {e}")),
    }
    let th = a0_threshold(5, 10, 5, 0.5);
    o.check(th == 3.5, format!("threshold(n=10, p=5, rank 5, c=0.5) = {th}"));
    let th = a0_threshold(3, 4, 3, 0.4);
    o.check((th - 3.2).abs() < 1e-12, format!("threshold(tiny model) = {th}"));
    timed(o, t)
}

fn drift_inequality() -> Outcome {
    let mut o = Outcome::new("drift inequality: E[v(X1)] <= rho* v + L + 4 se at 50 states", 120);
    let t = Instant::now();
    let (model, hyper) = tiny_model();
    let consts = resolve_constants(&model, &hyper, None, None, None, &mut chain_rng(5, 0)).expect("constants");
    let co = derive_certificate(&model, &hyper, consts)
        .expect("certificate")
        .coefficients
        .expect("coefficients");
    let mut rng = chain_rng(6, 0);
    let mut failures = 0;
    let mut tightest = f64::INFINITY;
    for k in 0..50 {
        let state = random_state(&model, &mut rng);
        let v = drift_v(&model, &state, &co).expect("v");
        let (est, se) = estimate_drift_expectation(&model, &hyper, &state, &co, 10_000, 600 + k).expect("estimate");
        let rhs = co.rho_star * v + co.l + 4.0 * se;
        if est > rhs {
            failures += 1;
        }
        tightest = tightest.min((rhs - est) / rhs);
    }
    o.check(failures == 0, format!("{} of 50 states satisfy the inequality; smallest relative slack {tightest:.3e}", 50 - failures));
    timed(o, t)
}

fn structural_invariants() -> Outcome {
    let mut o = Outcome::new("hybrid invariants: one block per step, |beta_j| > 0, bitwise reproducible", 60);
    let t = Instant::now();
    let (model, hyper) = tiny_model();
    let dummy = TauVector::from_slice(&[1.0; 3]).expect("tau");
    let mut bad_steps = 0;
    let mut zero_beta = 0;
    let mut steps = 0;
    for seed in 0..20u64 {
        let r = 0.05 + 0.045 * seed as f64;
        let kernel = Kernel::hybrid(r).expect("kernel");
        let mut rng = chain_rng(seed, 0);
        let mut s = default_init(&model, &hyper, &mut chain_rng(seed, 1));
        for _ in 0..500 {
            let step = kernel.step(&model, &hyper, &s, &dummy, &mut rng).expect("step");
            let theta_same = step.state.beta() == s.beta() && step.state.u() == s.u();
            let lambda_same = step.state.lambda() == s.lambda();
            let ok = match step.branch {
                Branch::Theta => lambda_same && !theta_same,
                Branch::Lambda => theta_same && !lambda_same,
                _ => false,
            };
            bad_steps += usize::from(!ok);
            zero_beta += usize::from(step.state.beta().iter().any(|b| *b == 0.0));
            steps += 1;
            s = step.state;
        }
    }
    o.check(bad_steps == 0, format!("{bad_steps} of {steps} steps changed other than exactly one block"));
    o.check(zero_beta == 0, format!("{zero_beta} states with a zero coefficient"));
    let mut identical = true;
    for kind in [SamplerKind::Hybrid, SamplerKind::GibbsDeterministic, SamplerKind::GibbsRandomScan] {
        let cfg = SamplerConfig {
            kind,
            r: Some(0.4),
            iterations: 1_000,
            burnin: 100,
            thin: 1,
            seed: 77,
            scan_probs: None,
            store_tau: true,
        };
        let init = default_init(&model, &hyper, &mut chain_rng(77, 1));
        let a = run_chain(&model, &hyper, init.clone(), &cfg).expect("chain");
        let b = run_chain(&model, &hyper, init, &cfg).expect("chain");
        identical &= a.states == b.states && a.taus == b.taus;
        zero_beta += a.states.iter().filter(|s| s.beta().iter().any(|b| *b == 0.0)).count();
    }
    o.check(identical, "same seed reproduces chains bitwise for all three samplers".into());
    o.check(zero_beta == 0, "emitted chain states all have nonzero coefficients".into());
    timed(o, t)
}

fn main() -> ExitCode {
    let criteria: [fn() -> Outcome; 7] = [
        conditional_law,
        gig_engine,
        sampler_correctness,
        bound_suite,
        certificate,
        drift_inequality,
        structural_invariants,
    ];
    let mut hard_failures = 0;
    let mut lines = Vec::new();
    for (k, run) in criteria.iter().enumerate() {
        let o = run();
        for d in &o.detail {
            println!("    {d}");
        }
        let status = if o.hard_failure {
            hard_failures += 1;
            "FAIL".to_string()
        } else if let Some(why) = &o.unattainable {
            format!("FAIL (unattainable: {why})")
        } else {
            "PASS".to_string()
        };
        let line = format!("criterion {}: {status} [{:.2?}] {}", k + 1, o.elapsed, o.name);
        println!("{line}\n");
        lines.push(line);
    }
    println!("summary");
    for l in &lines {
        println!("  {l}");
    }
    if hard_failures > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
