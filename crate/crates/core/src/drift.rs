//! Drift function, ergodicity conditions and the constructive drift
//! certificate `E[v(θ̃, λ̃) | θ, λ] ≤ ρ* v(θ, λ) + L` for the hybrid kernel.
//!
//! ```text
//! v(θ, λ) = α₁‖y − Wθ‖² + α₂‖β‖² + Σ_j |β_j|^{−ν} + Σ_i δ_i‖u_i‖²
//!         + α₃λ₀ + α₄λ₀^{ν/2} + λ₀⁻¹ + Σ_i λ_i + Σ_i η_i λ_i⁻¹
//! ```
//!
//! The certificate depends on three constants that only have existence
//! proofs: `c* ≥ sup_τ ‖(XᵀX + D_τ⁻¹)⁻¹Xᵀ‖²_F` and `(M₁, M₂)` with
//! `E[τ_j^{−ν/2} | θ, λ] ≤ M₁/(λ₀β_j²)^{ν/2} + M₂`, `M₁κ(c) < 1`. They are
//! either supplied or estimated numerically, and the report records which.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gig::GigParams;
use crate::linalg::{cholesky, frobenius_sq, largest_singular_value, numerical_rank, numerical_rank_with, spd_inverse, Matrix, Vector};
use crate::model::{ChainState, Hyperparameters, MixedModelData, TauVector};
use crate::samplers::{chain_rng, Kernel};
use crate::special::ln_gamma;

/// Slack applied to lower bounds on coefficients.
const SLACK: f64 = 1.1;
/// Fraction of the admissible range used for `r`.
const R_FRACTION: f64 = 0.9;

/// `ν(c) = c` on `(0, 1/2]`, `min{1/2, 2c − 1}` on `(1/2, ∞)`.
pub fn nu(c: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("nu(c) needs c > 0, got {c}")));
    }
    Ok(if c <= 0.5 { c } else { (2.0 * c - 1.0).min(0.5) })
}

/// `κ(c) = Γ((1 − ν)/2) 2^{(1−ν)/2} / √(2π)`, which equals `E|Z|^{−ν}` for a
/// standard normal `Z`.
pub fn kappa(c: f64) -> Result<f64> {
    let v = nu(c)?;
    let h = 0.5 * (1.0 - v);
    Ok((ln_gamma(h) + h * std::f64::consts::LN_2 - 0.5 * (2.0 * std::f64::consts::PI).ln()).exp())
}

/// Coefficients of the drift function and the resulting envelope.
#[derive(Debug, Clone, Serialize)]
pub struct DriftCoefficients {
    pub nu: f64,
    pub kappa: f64,
    pub r: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub delta: Vec<f64>,
    /// Blocks whose `δ_i` uses the fallback form valid for every `r`.
    pub delta_adjusted: Vec<bool>,
    pub eta: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    pub rho: RhoValues,
    pub rho_star: f64,
    pub k0: f64,
    pub k0_prime: f64,
    pub k1: f64,
    pub l: f64,
}

/// Contraction factors of the individual drift terms.
#[derive(Debug, Clone, Serialize)]
pub struct RhoValues {
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: Vec<f64>,
    pub rho4: f64,
    pub rho5: f64,
    pub rho6: f64,
    pub rho7: Vec<f64>,
    /// Factor on `Σ λ_i`, equal to `r`.
    pub lambda_sum: f64,
    /// Factor on `Σ |β_j|^{−ν}`, equal to `1 − r(1 − κM₁)`.
    pub inverse_beta: f64,
}

impl RhoValues {
    /// The seven factors that the construction has to push below one, with names.
    pub fn constructed(&self) -> Vec<(String, f64)> {
        let mut v = vec![("rho1".to_string(), self.rho1), ("rho2".to_string(), self.rho2)];
        v.extend(self.rho3.iter().enumerate().map(|(i, x)| (format!("rho3[{}]", i + 1), *x)));
        v.push(("rho4".into(), self.rho4));
        v.push(("rho5".into(), self.rho5));
        v.push(("rho6".into(), self.rho6));
        v.extend(self.rho7.iter().enumerate().map(|(i, x)| (format!("rho7[{}]", i + 1), *x)));
        v
    }

    pub fn max(&self) -> f64 {
        self.constructed()
            .into_iter()
            .map(|(_, x)| x)
            .chain([self.lambda_sum, self.inverse_beta])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Supplied,
    Estimated,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Constant {
    pub value: f64,
    pub provenance: Provenance,
}

/// `c*`, `M₁`, `M₂`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CertificateConstants {
    pub c_star: Constant,
    pub m1: Constant,
    pub m2: Constant,
}

impl CertificateConstants {
    pub fn supplied(c_star: f64, m1: f64, m2: f64) -> Self {
        let s = |value| Constant {
            value,
            provenance: Provenance::Supplied,
        };
        Self {
            c_star: s(c_star),
            m1: s(m1),
            m2: s(m2),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub passed: bool,
    pub detail: String,
}

/// Everything derived from the data that the certificate uses.
#[derive(Debug, Clone, Serialize)]
pub struct DataSummary {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub rank_x: usize,
    pub rank_z: usize,
    pub s_max: f64,
    pub y_norm_sq: f64,
    pub trace_zzt: f64,
    /// `tr[(ZᵀZ)⁻¹]`, absent when `Z` is rank deficient.
    pub trace_ztz_inv: Option<f64>,
    /// `n + p + 2a₀ − 2`.
    pub big_n: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub cond1: ConditionCheck,
    pub cond2: ConditionCheck,
    pub cond3: ConditionCheck,
    /// Threshold `½(rank(X) − n + (2c+1)p + 2)` that `a₀` must exceed.
    pub a0_threshold: f64,
    pub data: DataSummary,
    /// Upper end of the admissible `r` range; needs `c*`.
    pub r_star_upper: Option<f64>,
    pub constants: Option<CertificateConstants>,
    /// `C₃ = q tr[(ZᵀZ)⁻¹] ‖y‖² n³ s²_max`.
    pub c3: Option<f64>,
    pub coefficients: Option<DriftCoefficients>,
}

impl CertificateReport {
    pub fn conditions_hold(&self) -> bool {
        self.cond1.passed && self.cond2.passed && self.cond3.passed
    }
}

/// `½(rank(X) − n + (2c + 1)p + 2)`.
pub fn a0_threshold(rank_x: usize, n: usize, p: usize, c: f64) -> f64 {
    0.5 * (rank_x as f64 - n as f64 + (2.0 * c + 1.0) * p as f64 + 2.0)
}

fn summarize_data(model: &MixedModelData, hyper: &Hyperparameters) -> DataSummary {
    let z = model.z();
    let q = model.q();
    let rank_z = numerical_rank_with(z, q as f64);
    let trace_ztz_inv = if rank_z == q {
        cholesky(z.transpose() * z, "Z'Z").ok().map(|c| spd_inverse(&c).trace())
    } else {
        None
    };
    DataSummary {
        n: model.n(),
        p: model.p(),
        q,
        rank_x: numerical_rank(model.x()),
        rank_z,
        s_max: largest_singular_value(model.x()),
        y_norm_sq: model.y().norm_squared(),
        trace_zzt: frobenius_sq(z),
        trace_ztz_inv,
        big_n: model.n() as f64 + model.p() as f64 + 2.0 * hyper.a[0] - 2.0,
    }
}

/// Evaluates the three sufficient conditions for geometric ergodicity:
/// `Z` has full column rank, `a₀ > ½(rank(X) − n + (2c+1)p + 2)`, `a_i > 1`.
pub fn check_conditions(model: &MixedModelData, hyper: &Hyperparameters) -> CertificateReport {
    let data = summarize_data(model, hyper);
    let threshold = a0_threshold(data.rank_x, data.n, data.p, hyper.c);
    let cond1 = ConditionCheck {
        passed: data.rank_z == data.q && data.trace_ztz_inv.is_some(),
        detail: format!("rank(Z) = {} of q = {}", data.rank_z, data.q),
    };
    let cond2 = ConditionCheck {
        passed: hyper.a[0] > threshold,
        detail: format!("a_0 = {} vs threshold {}", hyper.a[0], threshold),
    };
    let bad: Vec<String> = hyper.a[1..]
        .iter()
        .enumerate()
        .filter(|(_, a)| **a <= 1.0)
        .map(|(i, a)| format!("a_{} = {a}", i + 1))
        .collect();
    let cond3 = ConditionCheck {
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            "a_i > 1 for all i >= 1".into()
        } else {
            format!("needs a_i > 1: {}", bad.join(", "))
        },
    };
    CertificateReport {
        cond1,
        cond2,
        cond3,
        a0_threshold: threshold,
        data,
        r_star_upper: None,
        constants: None,
        c3: None,
        coefficients: None,
    }
}

/// Builds the drift coefficients from the supplied constants.
///
/// Order of construction: `η`, then `r` at 0.9 of its admissible bound, then
/// `α₁, α₂, δ`, then `C₁, C₂`, then `α₃, α₄` at 1.1 times their lower bounds.
pub fn derive_certificate(
    model: &MixedModelData,
    hyper: &Hyperparameters,
    constants: CertificateConstants,
) -> Result<CertificateReport> {
    hyper.check_against(model)?;
    let mut report = check_conditions(model, hyper);
    if !report.conditions_hold() {
        let failed: Vec<String> = [(&report.cond1, 1), (&report.cond2, 2), (&report.cond3, 3)]
            .iter()
            .filter(|(c, _)| !c.passed)
            .map(|(c, k)| format!("condition ({k}): {}", c.detail))
            .collect();
        return Err(Error::validation(format!(
            "ergodicity conditions fail: {}",
            failed.join("; ")
        )));
    }
    let c_star = constants.c_star.value;
    let m1 = constants.m1.value;
    let m2 = constants.m2.value;
    for (name, v) in [("c*", c_star), ("M1", m1), ("M2", m2)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::validation(format!("constant {name} must be positive, got {v}")));
        }
    }
    let c = hyper.c;
    let d = hyper.d;
    let v = nu(c)?;
    let k = kappa(c)?;
    if m1 * k >= 1.0 {
        return Err(Error::validation(format!(
            "M1 * kappa(c) = {} must be below 1 (M1 = {m1}, kappa = {k})",
            m1 * k
        )));
    }

    let data = &report.data;
    let n = data.n as f64;
    let p = data.p as f64;
    let q = data.q as f64;
    let big_n = data.big_n;
    let tr = data.trace_zzt;
    let tr_inv = data.trace_ztz_inv.expect("condition (1) holds");
    let y2 = data.y_norm_sq;
    let s = data.s_max;
    let rank = data.rank_x as f64;
    let qi: Vec<f64> = model.block_sizes().iter().map(|&x| x as f64).collect();
    let ai = &hyper.a[1..];
    let m = qi.len();

    let eta: Vec<f64> = (0..m)
        .map(|i| SLACK * (qi[i] + 2.0 * ai[i] - 2.0) / (2.0 * ai[i] - 2.0) * tr * (1.0 + 2.0 * d * c_star) / big_n)
        .collect();
    let fixed_part = (rank + 2.0 * p * (c + 1.0)) / big_n;
    let random_part = (0..m)
        .map(|i| tr * (1.0 + 2.0 * d * c_star) / (eta[i] * big_n) + qi[i] / (qi[i] + 2.0 * ai[i] - 2.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let r_upper = 1.0 - fixed_part.max(random_part);
    report.r_star_upper = Some(r_upper);
    if !(r_upper > 0.0) {
        return Err(Error::Inconsistent(format!(
            "admissible range for r is empty (upper bound {r_upper})"
        )));
    }
    let r = R_FRACTION * r_upper;

    let alpha1 = 1.0 / (r * big_n);
    let alpha2 = 2.0 * d / (r * big_n);
    // The textbook choice η/(r(q_i + 2a_i − 1)) keeps ρ₃ below 1 only when
    // r(q_i + 2a_i − 1) > 1. Otherwise use η(2 − r)/(2r(q_i + 2a_i − 2)),
    // which satisfies ρ₃ < 1 for every r and keeps r δ_i q_i / η_i below
    // q_i/(q_i + 2a_i − 2), the value the bound on r already allows for.
    let delta_adjusted: Vec<bool> = (0..m).map(|i| r * (qi[i] + 2.0 * ai[i] - 1.0) <= 1.0).collect();
    let delta: Vec<f64> = (0..m)
        .map(|i| {
            if delta_adjusted[i] {
                eta[i] * (2.0 - r) / (2.0 * r * (qi[i] + 2.0 * ai[i] - 2.0))
            } else {
                eta[i] / (r * (qi[i] + 2.0 * ai[i] - 1.0))
            }
        })
        .collect();
    let max_delta = delta.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let c3 = q * tr_inv * y2 * n.powi(3) * s * s;
    report.c3 = Some(c3);
    // A = c* n² ‖y‖² s²_max
    let big_a = c_star * n * n * y2 * s * s;
    let c1 = if big_a > 0.0 { SLACK * 2.0 * big_a / r } else { 1.0 };
    let c2 = if max_delta * c3 > 0.0 { SLACK * max_delta * c3 * big_n / d } else { 1.0 };

    let alpha3_bound = (r * alpha2 * big_a * p * c1 / (4.0 * d) + r * max_delta * p * c2 * c3 / (4.0 * d)) / (1.0 - r);
    let alpha3 = if alpha3_bound > 0.0 { SLACK * alpha3_bound } else { 1.0 };
    let alpha4 = SLACK * r / (1.0 - r) * p * k * (s.powf(v) + m2);

    let rho1 = (1.0 - r) * (1.0 + 1.0 / (alpha1 * big_n));
    let rho2 = r / 2.0
        + r * big_a / (2.0 * c1)
        + r * max_delta * c3 / (2.0 * alpha2 * c2)
        + (1.0 - r)
        + (1.0 - r) * d / (alpha2 * big_n);
    let rho3: Vec<f64> = (0..m)
        .map(|i| (1.0 - r) * (1.0 + eta[i] / (delta[i] * (qi[i] + 2.0 * ai[i] - 2.0))))
        .collect();
    let rho4 = r * alpha2 * big_a * p * c1 / (4.0 * alpha3 * d) + r * max_delta * p * c2 * c3 / (4.0 * alpha3 * d) + r;
    let rho5 = r * (1.0 + p * k * (s.powf(v) + m2) / alpha4);
    let rho6 = r * alpha1 * rank + r * alpha2 * p * (4.0 * c + 1.0) / (4.0 * d) + r + (1.0 - r) * 3.0 * p / (2.0 * big_n);
    let rho7: Vec<f64> = (0..m)
        .map(|i| r * alpha1 * tr / eta[i] + r * alpha2 * c_star * tr / eta[i] + r * delta[i] * qi[i] / eta[i] + r)
        .collect();
    let rho = RhoValues {
        rho1,
        rho2,
        rho3,
        rho4,
        rho5,
        rho6,
        rho7,
        lambda_sum: r,
        inverse_beta: 1.0 - r * (1.0 - k * m1),
    };
    if let Some((name, value)) = rho.constructed().into_iter().find(|(_, x)| !(*x < 1.0)) {
        return Err(Error::Inconsistent(format!("{name} = {value} is not below 1")));
    }
    let rho_star = rho.max();

    let sum_delta_q: f64 = (0..m).map(|i| delta[i] * qi[i]).sum();
    let k0 = 2.0 * alpha1 * (n * y2 + n.powi(3) * y2) + alpha2 * c_star * n * n * y2 + tr_inv * y2 * n.powi(3) * sum_delta_q;
    let k0_prime = k0 + p * c / d * (alpha2 * big_a + c3 * max_delta);
    let b = &hyper.b;
    let lam0_bound = (big_n + 3.0) / b[0];
    let k1 = alpha3 * lam0_bound
        + alpha4 * lam0_bound.powf(v)
        + 2.0 * b[0] / big_n
        + (0..m).map(|i| (qi[i] + 2.0 * ai[i] + 1.0) / b[i + 1]).sum::<f64>()
        + (0..m).map(|i| 2.0 * eta[i] * b[i + 1] / (qi[i] + 2.0 * ai[i] - 2.0)).sum::<f64>();
    let l = r * k0_prime + (1.0 - r) * k1;

    report.constants = Some(constants);
    report.coefficients = Some(DriftCoefficients {
        nu: v,
        kappa: k,
        r,
        alpha1,
        alpha2,
        alpha3,
        alpha4,
        delta,
        delta_adjusted,
        eta,
        c1,
        c2,
        rho,
        rho_star,
        k0,
        k0_prime,
        k1,
        l,
    });
    Ok(report)
}

/// The drift function at `state`.
pub fn drift_v(model: &MixedModelData, state: &ChainState, coeffs: &DriftCoefficients) -> Result<f64> {
    if let Some(j) = state.beta().iter().position(|b| *b == 0.0) {
        return Err(Error::Domain(format!("beta_{} = 0 lies outside the state space", j + 1)));
    }
    let v = coeffs.nu;
    let beta = state.beta();
    let lam = state.lambda();
    let mut total = coeffs.alpha1 * model.residual_sq(beta, state.u()) + coeffs.alpha2 * beta.norm_squared();
    total += beta.iter().map(|b| b.abs().powf(-v)).sum::<f64>();
    for i in 0..model.m() {
        let r = model.block_range(i);
        total += coeffs.delta[i] * state.u().rows(r.start, r.len()).norm_squared();
        total += lam[i + 1] + coeffs.eta[i] / lam[i + 1];
    }
    total += coeffs.alpha3 * lam[0] + coeffs.alpha4 * lam[0].powf(0.5 * v) + 1.0 / lam[0];
    Ok(total)
}

/// A state spread over many orders of magnitude, for probing the drift
/// inequality: `|β_j|` log-uniform on `[1e-3, 1e2]` with random sign, `u`
/// uniform on `[−5, 5]`, precisions log-uniform on `[1e-3, 1e3]`.
pub fn random_state<R: Rng + ?Sized>(model: &MixedModelData, rng: &mut R) -> ChainState {
    let mut log_uniform = |lo: f64, hi: f64| 10f64.powf(rng.random_range(lo..hi));
    let beta: Vec<f64> = (0..model.p()).map(|_| log_uniform(-3.0, 2.0)).collect();
    let lambda: Vec<f64> = (0..=model.m()).map(|_| log_uniform(-3.0, 3.0)).collect();
    let beta = Vector::from_iterator(beta.len(), beta.into_iter().map(|b| if rng.random_bool(0.5) { b } else { -b }));
    let u = Vector::from_fn(model.q(), |_, _| rng.random_range(-5.0..5.0));
    ChainState {
        beta,
        u,
        lambda: Vector::from_vec(lambda),
    }
}

/// Monte Carlo estimate of `E[v(X₁) | X₀ = state]` for the hybrid kernel with
/// the certificate's `r`. Replicate `k` uses rng stream `k` of `seed`.
/// Returns `(mean, standard error)`.
pub fn estimate_drift_expectation(
    model: &MixedModelData,
    hyper: &Hyperparameters,
    state: &ChainState,
    coeffs: &DriftCoefficients,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let kernel = Kernel::hybrid(coeffs.r)?;
    estimate_drift_expectation_with(model, hyper, state, coeffs, &kernel, draws, seed)
}

pub fn estimate_drift_expectation_with(
    model: &MixedModelData,
    hyper: &Hyperparameters,
    state: &ChainState,
    coeffs: &DriftCoefficients,
    kernel: &Kernel,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if draws < 2 {
        return Err(Error::validation("need at least two replicates"));
    }
    let dummy_tau = TauVector::new(Vector::from_element(model.p(), 1.0))?;
    let values = (0..draws as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = chain_rng(seed, k);
            let step = kernel.step(model, hyper, state, &dummy_tau, &mut rng)?;
            drift_v(model, &step.state, coeffs)
        })
        .collect::<Result<Vec<f64>>>()?;
    let nf = draws as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok((mean, (var / nf).sqrt()))
}

/// `‖(XᵀX + D_τ⁻¹)⁻¹Xᵀ‖²_F`, which equals `‖λ₀T⁻¹Xᵀ‖²_F` for every `λ₀`.
pub fn shrunk_pseudo_inverse_norm_sq(model: &MixedModelData, tau: &TauVector) -> Result<f64> {
    Ok(frobenius_sq(&shrunk_pseudo_inverse(model, tau)?))
}

/// Estimates `c*` as 1.5 times the largest `‖(XᵀX + D_τ⁻¹)⁻¹Xᵀ‖²_F` seen over
/// `draws` log-uniform `τ ∈ [1e-6, 1e6]^p` and, for `p <= 12`, every corner of
/// `{1e-8, 1e8}^p`.
pub fn estimate_c_star<R: Rng + ?Sized>(model: &MixedModelData, draws: usize, rng: &mut R) -> Result<f64> {
    let p = model.p();
    let mut best: f64 = 0.0;
    for _ in 0..draws {
        let tau = Vector::from_iterator(p, (0..p).map(|_| 10f64.powf(rng.random_range(-6.0..6.0))));
        best = best.max(shrunk_pseudo_inverse_norm_sq(model, &TauVector::new(tau)?)?);
    }
    if p <= 12 {
        for mask in 0u32..(1 << p) {
            let tau = Vector::from_iterator(p, (0..p).map(|j| if mask >> j & 1 == 1 { 1e8 } else { 1e-8 }));
            best = best.max(shrunk_pseudo_inverse_norm_sq(model, &TauVector::new(tau)?)?);
        }
    }
    Ok(1.5 * best)
}

/// Small-`ψ` limit of `ψ^{ν/2} E[τ^{−ν/2}]` for `τ ~ GIG(c − ½, 2d, ψ)`:
/// `2^{ν/2} Γ(½ − c + ν/2) / Γ(½ − c)` when `c < ½`, zero otherwise.
pub fn m1_lower_limit(c: f64) -> Result<f64> {
    let v = nu(c)?;
    if c >= 0.5 {
        return Ok(0.0);
    }
    Ok((0.5 * v * std::f64::consts::LN_2 + ln_gamma(0.5 - c + 0.5 * v) - ln_gamma(0.5 - c)).exp())
}

/// Picks `M₁` halfway between its small-`ψ` limit and `1/κ(c)`, then sets `M₂`
/// to 1.1 times the largest excess of `E[τ^{−ν/2}]` over `M₁ψ^{−ν/2}` on a
/// log grid `ψ ∈ [1e-12, 1e12]`.
pub fn estimate_m1_m2(hyper: &Hyperparameters) -> Result<(f64, f64)> {
    let v = nu(hyper.c)?;
    let k = kappa(hyper.c)?;
    let lower = m1_lower_limit(hyper.c)?;
    if lower * k >= 1.0 {
        return Err(Error::validation(format!(
            "no admissible M1: small-psi limit {lower} times kappa {k} is not below 1"
        )));
    }
    let m1 = 0.5 * (lower + 1.0 / k);
    let mut excess = f64::NEG_INFINITY;
    for step in 0..=2400 {
        let psi = 10f64.powf(-12.0 + step as f64 * 0.01);
        let g = GigParams::new(hyper.c - 0.5, 2.0 * hyper.d, psi)?;
        excess = excess.max(g.moment(-0.5 * v) - m1 * psi.powf(-0.5 * v));
    }
    let m2 = if excess > 0.0 { SLACK * excess } else { 1e-6 };
    Ok((m1, m2))
}

/// Constants from the user where given, estimated otherwise.
pub fn resolve_constants<R: Rng + ?Sized>(
    model: &MixedModelData,
    hyper: &Hyperparameters,
    c_star: Option<f64>,
    m1: Option<f64>,
    m2: Option<f64>,
    rng: &mut R,
) -> Result<CertificateConstants> {
    let pick = |given: Option<f64>, estimate: f64| match given {
        Some(value) => Constant {
            value,
            provenance: Provenance::Supplied,
        },
        None => Constant {
            value: estimate,
            provenance: Provenance::Estimated,
        },
    };
    let c_est = match c_star {
        Some(_) => f64::NAN,
        None => estimate_c_star(model, 10_000, rng)?,
    };
    let (m1_est, m2_est) = if m1.is_some() && m2.is_some() {
        (f64::NAN, f64::NAN)
    } else {
        estimate_m1_m2(hyper)?
    };
    Ok(CertificateConstants {
        c_star: pick(c_star, c_est),
        m1: pick(m1, m1_est),
        m2: pick(m2, m2_est),
    })
}

/// `(XᵀX + D_τ⁻¹)⁻¹Xᵀ`.
pub fn shrunk_pseudo_inverse(model: &MixedModelData, tau: &TauVector) -> Result<Matrix> {
    let mut a = model.xtx().clone();
    for (j, t) in tau.as_vector().iter().enumerate() {
        a[(j, j)] += 1.0 / t;
    }
    let chol = cholesky(a, "X'X + D_tau^-1")?;
    Ok(chol.solve(&model.x().transpose()))
}
