//! Executable checks of the matrix and moment inequalities behind the drift
//! certificate, evaluated on concrete `(model, τ, λ)` instances.
//!
//! Each check returns [`BoundReport`]s with both sides of the inequality. A
//! scalar bound passes when `lhs <= rhs + tol` with `tol = 1e-9 (1 + |rhs|)`.
//! A Loewner bound `A ⪯ B` is reported as `lhs = λ_max(A − B)`, `rhs = 0`
//! with `tol = 1e-9 (1 + ‖B‖₂)`. Monte Carlo bounds pass when
//! `lhs − 4·se <= rhs`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::conditionals::{build_operators, theta_moments, ConditionalOperators};
use crate::drift::{estimate_c_star, estimate_m1_m2, kappa, nu, shrunk_pseudo_inverse_norm_sq};
use crate::error::{Error, Result};
use crate::gig::GigParams;
use crate::linalg::{
    cholesky, frobenius_sq, largest_singular_value, max_eigenvalue, numerical_rank, numerical_rank_with, spd_inverse,
    sym_spectral_norm, sym_sqrt, Matrix, Vector,
};
use crate::model::{ChainState, Hyperparameters, MixedModelData, TauVector};
use crate::samplers::chain_rng;

const REL_TOL: f64 = 1e-9;
const MC_SE_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    pub tol: f64,
    /// Standard error of a Monte Carlo left side.
    pub std_error: Option<f64>,
    pub passed: bool,
    pub instance: String,
    pub note: Option<String>,
}

impl BoundReport {
    pub fn scalar(name: &'static str, lhs: f64, rhs: f64) -> Self {
        let tol = REL_TOL * (1.0 + rhs.abs());
        Self {
            name,
            lhs,
            rhs,
            margin: rhs - lhs,
            tol,
            std_error: None,
            passed: lhs <= rhs + tol,
            instance: String::new(),
            note: None,
        }
    }

    /// `A ⪯ B` for symmetric `A`, `B`.
    pub fn loewner(name: &'static str, a: &Matrix, b: &Matrix) -> Self {
        let lhs = max_eigenvalue(&(a - b));
        let tol = REL_TOL * (1.0 + sym_spectral_norm(b));
        Self {
            name,
            lhs,
            rhs: 0.0,
            margin: -lhs,
            tol,
            std_error: None,
            passed: lhs <= tol,
            instance: String::new(),
            note: None,
        }
    }

    pub fn monte_carlo(name: &'static str, estimate: f64, std_error: f64, rhs: f64) -> Self {
        Self {
            name,
            lhs: estimate,
            rhs,
            margin: rhs - estimate,
            tol: MC_SE_FACTOR * std_error,
            std_error: Some(std_error),
            passed: estimate - MC_SE_FACTOR * std_error <= rhs,
            instance: String::new(),
            note: None,
        }
    }

    /// Margin relative to the size of the right side; used to pick the worst
    /// of several reports.
    pub fn relative_margin(&self) -> f64 {
        (self.margin + self.tol) / (1.0 + self.rhs.abs())
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

fn worst(reports: Vec<BoundReport>) -> BoundReport {
    reports
        .into_iter()
        .min_by(|a, b| a.relative_margin().total_cmp(&b.relative_margin()))
        .expect("at least one report")
}

fn lambda_inverse_sum(lambda: &Vector) -> f64 {
    lambda.iter().skip(1).map(|l| 1.0 / l).sum()
}

/// `Σ_j τ_j`, `τ_max`.
fn tau_sum_max(tau: &TauVector) -> (f64, f64) {
    let t = tau.as_vector();
    (t.sum(), t.max())
}

/// Trace of the fitted covariance `W Var[θ] Wᵀ` and its split over the fixed
/// and random parts.
pub fn check_theta_trace(model: &MixedModelData, tau: &TauVector, lambda: &Vector) -> Result<Vec<BoundReport>> {
    let ops = build_operators(model, tau, lambda)?;
    let mom = theta_moments(model, &ops)?;
    let w = model.w();
    let x = model.x();
    let z = model.z();
    let lhs = (w * &mom.cov * w.transpose()).trace();
    let x_part = (x * ops.t_inv() * x.transpose()).trace();
    let z_part = (z * ops.q_inv() * z.transpose()).trace();
    Ok(vec![
        BoundReport::scalar("fitted_var_split", lhs, x_part + z_part),
        BoundReport::scalar("fixed_var_rank", x_part, numerical_rank(x) as f64 / lambda[0]),
        BoundReport::scalar("random_var_precision", z_part, frobenius_sq(z) * lambda_inverse_sum(lambda)),
    ])
}

/// `‖y − W E[θ]‖² <= 2n‖y‖² + 2n³‖y‖²`.
pub fn check_residual_mean(model: &MixedModelData, tau: &TauVector, lambda: &Vector) -> Result<BoundReport> {
    let ops = build_operators(model, tau, lambda)?;
    let mom = theta_moments(model, &ops)?;
    let lhs = (model.y() - model.w() * &mom.mean).norm_squared();
    let n = model.n() as f64;
    let y2 = model.y().norm_squared();
    Ok(BoundReport::scalar("residual_at_mean", lhs, 2.0 * n * y2 + 2.0 * n.powi(3) * y2))
}

/// Trace of `Var[β]` and `‖E[β]‖²` against bounds involving `c*`. When the
/// instance's own `‖λ₀T⁻¹Xᵀ‖²` exceeds `c_star` the report says so: a failure
/// then points at the constant rather than the code.
pub fn check_beta_moments(
    model: &MixedModelData,
    tau: &TauVector,
    lambda: &Vector,
    c_star: f64,
) -> Result<Vec<BoundReport>> {
    let ops = build_operators(model, tau, lambda)?;
    let mom = theta_moments(model, &ops)?;
    let (tau_sum, _) = tau_sum_max(tau);
    let s = largest_singular_value(model.x());
    let n = model.n() as f64;
    let var_rhs = tau_sum / lambda[0] + c_star * frobenius_sq(model.z()) * lambda_inverse_sum(lambda);
    let mean_rhs = c_star * n * n * model.y().norm_squared() * (s * s * tau_sum + 1.0);
    let own = shrunk_pseudo_inverse_norm_sq(model, tau)?;
    let mut out = vec![
        BoundReport::scalar("beta_var_trace", mom.beta_cov().trace(), var_rhs),
        BoundReport::scalar("beta_mean_norm", mom.beta_mean().norm_squared(), mean_rhs),
    ];
    if own > c_star {
        let msg = format!("instance norm {own} exceeds c* = {c_star}; c* is underestimated");
        out = out.into_iter().map(|r| r.with_note(msg.clone())).collect();
    }
    Ok(out)
}

/// Monte Carlo check of `E[Σ_j |β̃_j|^{−ν}] <= pκ s^ν λ₀^{ν/2} + κ λ₀^{ν/2} Σ_j τ_j^{−ν/2}`
/// with `β̃` drawn from its Gaussian conditional. Only the marginals matter for
/// the expectation of a sum, so each coordinate is drawn independently.
pub fn check_inverse_beta_moment<R: Rng + ?Sized>(
    model: &MixedModelData,
    tau: &TauVector,
    lambda: &Vector,
    c: f64,
    draws: usize,
    rng: &mut R,
) -> Result<BoundReport> {
    if draws < 2 {
        return Err(Error::validation("need at least two Monte Carlo draws"));
    }
    let v = nu(c)?;
    let k = kappa(c)?;
    let ops = build_operators(model, tau, lambda)?;
    let mom = theta_moments(model, &ops)?;
    let mu = mom.beta_mean();
    let sd: Vec<f64> = mom.beta_cov().diagonal().iter().map(|s| s.sqrt()).collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let mut val = 0.0;
        for j in 0..model.p() {
            let e: f64 = rng.sample(StandardNormal);
            val += (mu[j] + sd[j] * e).abs().powf(-v);
        }
        sum += val;
        sum_sq += val * val;
    }
    let nf = draws as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    let s = largest_singular_value(model.x());
    let l0 = lambda[0].powf(0.5 * v);
    let rhs = model.p() as f64 * k * s.powf(v) * l0
        + k * l0 * tau.as_vector().iter().map(|t| t.powf(-0.5 * v)).sum::<f64>();
    Ok(BoundReport::monte_carlo("inverse_beta_moment", mean, (var / nf).sqrt(), rhs))
}

/// Per-block trace of `Var[u_i]` and `‖E[u_i]‖²`; each is reported for the
/// block with the smallest relative margin. The mean bound needs `Z` of full
/// column rank and is omitted otherwise.
pub fn check_u_moments(model: &MixedModelData, tau: &TauVector, lambda: &Vector) -> Result<Vec<BoundReport>> {
    let ops = build_operators(model, tau, lambda)?;
    let mom = theta_moments(model, &ops)?;
    let u_mean = mom.u_mean();
    let q_inv = ops.q_inv();
    let mut traces = Vec::new();
    for i in 0..model.m() {
        let r = model.block_range(i);
        let lhs = q_inv.view((r.start, r.start), (r.len(), r.len())).trace();
        traces.push(
            BoundReport::scalar("u_block_var_trace", lhs, r.len() as f64 / lambda[i + 1]).with_note(format!("block {}", i + 1)),
        );
    }
    let mut out = vec![worst(traces)];

    let z = model.z();
    if numerical_rank_with(z, model.q() as f64) == model.q() {
        let ztz_inv = spd_inverse(&cholesky(z.transpose() * z, "Z'Z")?).trace();
        let (tau_sum, _) = tau_sum_max(tau);
        let s = largest_singular_value(model.x());
        let n = model.n() as f64;
        let common = ztz_inv * n.powi(3) * model.y().norm_squared() * (s * s * tau_sum + 1.0);
        let means = (0..model.m())
            .map(|i| {
                let r = model.block_range(i);
                let lhs = u_mean.rows(r.start, r.len()).norm_squared();
                BoundReport::scalar("u_block_mean_norm", lhs, r.len() as f64 * common).with_note(format!("block {}", i + 1))
            })
            .collect();
        out.push(worst(means));
    }
    Ok(out)
}

/// Moment bounds for `τ_j ~ GIG(c − ½, 2d, λ₀β_j²)`: two bounds on the mean
/// (the second for the given `big_c > 0`), the inverse mean, and the
/// `−ν/2` moment against `(M₁, M₂)`. Each is reported for the worst `j`.
pub fn check_tau_moments(
    hyper: &Hyperparameters,
    state: &ChainState,
    big_c: f64,
    m1: f64,
    m2: f64,
) -> Result<Vec<BoundReport>> {
    if !(big_c > 0.0) {
        return Err(Error::validation(format!("the free constant must be positive, got {big_c}")));
    }
    let (c, d) = (hyper.c, hyper.d);
    let v = nu(c)?;
    let l0 = state.lambda0();
    let mut groups: [Vec<BoundReport>; 4] = Default::default();
    for (j, &b) in state.beta().iter().enumerate() {
        let g = GigParams::new(c - 0.5, 2.0 * d, l0 * b * b)?;
        let mean = g.moment(1.0);
        let tag = format!("coordinate {}", j + 1);
        groups[0].push(
            BoundReport::scalar("tau_mean_quadratic", mean, (4.0 * c + 1.0) / (4.0 * d) + 0.5 * l0 * b * b).with_note(&tag),
        );
        groups[1].push(
            BoundReport::scalar("tau_mean_split", mean, c / d + b * b / (2.0 * big_c) + l0 * big_c / (4.0 * d))
                .with_note(&tag),
        );
        groups[2].push(BoundReport::scalar("tau_inverse_mean", g.moment(-1.0), d + 1.5 / (l0 * b * b)).with_note(&tag));
        groups[3].push(
            BoundReport::scalar(
                "tau_fractional_moment",
                g.moment(-0.5 * v),
                m1 / (l0.powf(0.5 * v) * b.abs().powf(v)) + m2,
            )
            .with_note(&tag),
        );
    }
    Ok(groups.into_iter().map(worst).collect())
}

fn projection_parts(model: &MixedModelData, ops: &ConditionalOperators) -> (Matrix, Matrix) {
    let z = model.z();
    // λ₀ Z Q⁻¹ Zᵀ
    let zqz = z * ops.q_inv() * z.transpose() * ops.lambda0();
    let m_half = sym_sqrt(ops.m());
    let inner = &m_half * &zqz * &m_half;
    (zqz, inner)
}

/// Spectral and Frobenius facts about `M = I − X(XᵀX + D_τ⁻¹)⁻¹Xᵀ` and the
/// random-effect projection `λ₀M^{½}ZQ⁻¹ZᵀM^{½}`.
pub fn check_projection_bounds(model: &MixedModelData, tau: &TauVector, lambda: &Vector) -> Result<Vec<BoundReport>> {
    let ops = build_operators(model, tau, lambda)?;
    let n = model.n();
    let nf = n as f64;
    let eye = Matrix::identity(n, n);
    let s = largest_singular_value(model.x());
    let (tau_sum, tau_max) = tau_sum_max(tau);
    let m = ops.m();
    let floor = &eye / (tau_max * s * s + 1.0);
    let (zqz, inner) = projection_parts(model, &ops);
    let complement = &eye - &zqz * m;
    Ok(vec![
        BoundReport::loewner("m_lower", &floor, m),
        BoundReport::loewner("m_upper", m, &eye),
        BoundReport::scalar("m_frobenius", m.norm(), nf.sqrt()),
        BoundReport::loewner("zq_projection_upper", &inner, &eye),
        BoundReport::scalar("zq_projection_frobenius", frobenius_sq(&inner), nf),
        BoundReport::scalar(
            "zq_complement_frobenius",
            frobenius_sq(&complement),
            nf * nf * (s * s * tau_sum + 1.0),
        ),
    ])
}

/// A randomized test instance.
#[derive(Debug, Clone)]
pub struct BoundInstance {
    pub index: usize,
    pub digest: String,
    pub model: MixedModelData,
    pub tau: TauVector,
    pub lambda: Vector,
    /// Prior with the drawn `(c, d)`; `a`, `b` are placeholders.
    pub hyper: Hyperparameters,
    pub beta: Vector,
    /// Free constant of the split mean bound.
    pub big_c: f64,
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn normal_matrix<R: Rng + ?Sized>(rng: &mut R, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Draws instance `index` of the suite seeded by `seed`: `n, p, q_i` in
/// `2..=8` with `q <= n`, standard normal `X` and `Z`, `y` standard normal
/// scaled by `√n`, and `τ`, `λ` log-uniform on `[1e-3, 1e3]`. The shape `c`
/// is drawn with `ν(c) < ½` so that the Monte Carlo check has finite variance.
pub fn random_instance(seed: u64, index: usize) -> Result<BoundInstance> {
    let mut rng = chain_rng(seed, index as u64);
    let n = rng.random_range(2..=8usize);
    let p = rng.random_range(2..=8usize);
    let mut blocks = vec![rng.random_range(2..=n)];
    let room = n - blocks[0];
    if room >= 2 && rng.random_bool(0.5) {
        blocks.push(rng.random_range(2..=room.min(8)));
    }
    let x = normal_matrix(&mut rng, n, p);
    let z: Vec<Matrix> = blocks.iter().map(|&qi| normal_matrix(&mut rng, n, qi)).collect();
    let y = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal) * (n as f64).sqrt());
    let model = MixedModelData::new(y, x, z)?;
    let m = model.m();
    let tau = TauVector::new(Vector::from_fn(p, |_, _| log_uniform(&mut rng, 1e-3, 1e3)))?;
    let lambda = Vector::from_fn(m + 1, |_, _| log_uniform(&mut rng, 1e-3, 1e3));
    let c = loop {
        let c = rng.random_range(0.05..0.74);
        if (c - 0.5f64).abs() > 0.01 {
            break c;
        }
    };
    let d = log_uniform(&mut rng, 0.1, 10.0);
    let hyper = Hyperparameters::new(vec![1.0; m + 1], vec![1.0; m + 1], c, d)?;
    let beta = Vector::from_fn(p, |_, _| {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        sign * log_uniform(&mut rng, 1e-2, 1e2)
    });
    let big_c = log_uniform(&mut rng, 1e-2, 1e2);
    let digest = format!("seed={seed} index={index} n={n} p={p} q={blocks:?}");
    Ok(BoundInstance {
        index,
        digest,
        model,
        tau,
        lambda,
        hyper,
        beta,
        big_c,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SuiteConfig {
    pub instances: usize,
    pub seed: u64,
    /// Draws for the Monte Carlo check.
    pub mc_draws: usize,
    /// `τ` draws for the per-instance `c*` estimate.
    pub c_star_draws: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            instances: 200,
            seed: 7,
            mc_draws: 100_000,
            c_star_draws: 10_000,
        }
    }
}

/// Every check on one instance, with the instance digest filled in.
pub fn check_instance(inst: &BoundInstance, cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    // Streams 0..instances seed the generator; the checks use a disjoint range.
    let mut rng = chain_rng(cfg.seed, (1 << 32) + inst.index as u64);
    let (model, tau, lambda) = (&inst.model, &inst.tau, &inst.lambda);
    let c_star = estimate_c_star(model, cfg.c_star_draws, &mut rng)?;
    let (m1, m2) = estimate_m1_m2(&inst.hyper)?;
    let state = ChainState::new(inst.beta.clone(), Vector::zeros(model.q()), lambda.clone())?;

    let mut out = check_theta_trace(model, tau, lambda)?;
    out.push(check_residual_mean(model, tau, lambda)?);
    out.extend(check_beta_moments(model, tau, lambda, c_star)?);
    out.push(check_inverse_beta_moment(model, tau, lambda, inst.hyper.c, cfg.mc_draws, &mut rng)?);
    out.extend(check_u_moments(model, tau, lambda)?);
    out.extend(check_tau_moments(&inst.hyper, &state, inst.big_c, m1, m2)?);
    out.extend(check_projection_bounds(model, tau, lambda)?);
    for r in &mut out {
        r.instance = inst.digest.clone();
    }
    Ok(out)
}

/// One row of the suite table.
#[derive(Debug, Clone, Serialize)]
pub struct BoundSummary {
    pub name: &'static str,
    pub instances: usize,
    pub failures: usize,
    /// Smallest `margin + tol`; negative means a failure.
    pub min_margin: f64,
    pub worst_instance: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub config: SuiteConfig,
    pub reports: Vec<BoundReport>,
    pub summary: Vec<BoundSummary>,
}

impl SuiteResult {
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &BoundReport> {
        self.reports.iter().filter(|r| !r.passed)
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<26} {:>9} {:>9} {:>14}  status\n", "bound", "instances", "failures", "min margin");
        for row in &self.summary {
            s.push_str(&format!(
                "{:<26} {:>9} {:>9} {:>14.6e}  {}\n",
                row.name,
                row.instances,
                row.failures,
                row.min_margin,
                if row.failures == 0 { "pass" } else { "FAIL" }
            ));
        }
        s
    }
}

/// Runs every check over `cfg.instances` random instances in parallel.
/// Results are ordered by instance index regardless of scheduling.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteResult> {
    let per_instance = (0..cfg.instances)
        .into_par_iter()
        .map(|k| check_instance(&random_instance(cfg.seed, k)?, cfg))
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<BoundReport> = per_instance.into_iter().flatten().collect();

    let mut summary: Vec<BoundSummary> = Vec::new();
    for r in &reports {
        let slack = r.margin + r.tol;
        match summary.iter_mut().find(|s| s.name == r.name) {
            Some(s) => {
                s.instances += 1;
                s.failures += usize::from(!r.passed);
                if slack < s.min_margin {
                    s.min_margin = slack;
                    s.worst_instance = r.instance.clone();
                }
            }
            None => summary.push(BoundSummary {
                name: r.name,
                instances: 1,
                failures: usize::from(!r.passed),
                min_margin: slack,
                worst_instance: r.instance.clone(),
            }),
        }
    }
    Ok(SuiteResult {
        config: *cfg,
        reports,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_design_hand_values() {
        // X = I₂, τ = (1, 1), λ₀ = 2: T = 2·2I, tr(XT⁻¹Xᵀ) = 0.5 <= rank/λ₀ = 1
        let model = MixedModelData::new(
            Vector::from_column_slice(&[1.0, -1.0]),
            Matrix::identity(2, 2),
            vec![Matrix::identity(2, 2)],
        )
        .unwrap();
        let tau = TauVector::from_slice(&[1.0, 1.0]).unwrap();
        let lambda = Vector::from_column_slice(&[2.0, 3.0]);
        let r = check_theta_trace(&model, &tau, &lambda).unwrap();
        assert!((r[1].lhs - 0.5).abs() < 1e-14);
        assert_eq!(r[1].rhs, 1.0);
        assert!(r.iter().all(|b| b.passed));
    }

    #[test]
    fn scalar_tolerance_rule() {
        assert!(BoundReport::scalar("t", 1.0 + 1e-10, 1.0).passed);
        assert!(!BoundReport::scalar("t", 1.0 + 1e-8, 1.0).passed);
    }

    #[test]
    fn loewner_detects_violation() {
        let a = Matrix::from_diagonal(&Vector::from_column_slice(&[1.0, 2.0]));
        let b = Matrix::identity(2, 2);
        let r = BoundReport::loewner("t", &a, &b);
        assert!(!r.passed);
        assert!((r.lhs - 1.0).abs() < 1e-12);
        assert!(BoundReport::loewner("t", &b, &a).passed);
    }

    #[test]
    fn instances_are_reproducible() {
        let a = random_instance(3, 5).unwrap();
        let b = random_instance(3, 5).unwrap();
        assert_eq!(a.digest, b.digest);
        assert_eq!(a.model.y(), b.model.y());
        assert_eq!(a.tau, b.tau);
        assert!(a.model.q() <= a.model.n());
    }
}
