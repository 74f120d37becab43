//! Chain summaries (moments, autocorrelation, effective sample size,
//! quantiles) and the Geweke joint-distribution test.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::conditionals::GammaParams;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::model::{ChainState, Hyperparameters, MixedModelData, TauVector};
use crate::samplers::{chain_rng, ChainOutput, Fault, Kernel};

pub const MAX_LAG: usize = 50;
pub const MIN_STATES: usize = 10;

/// Autocovariances at every lag (divisor `N`), via zero-padded FFT.
pub fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    buf[..n].iter().map(|c| c.re / (size as f64 * n as f64)).collect()
}

/// Effective sample size by Geyer's initial monotone positive sequence.
/// A constant series has ESS 1; the result never exceeds the series length.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    let acov = autocovariance(x);
    if n < 2 || !(acov[0] > 0.0) {
        return 1.0;
    }
    let rho = |k: usize| if k < n { acov[k] / acov[0] } else { 0.0 };
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = rho(2 * k) + rho(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    (n as f64 / tau).clamp(1.0, n as f64)
}

/// Type-7 sample quantile (linear interpolation between order statistics).
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Serialize)]
pub struct CoordinateSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// Lags `0..=MAX_LAG` (fewer for short chains). A constant series reports
    /// 1 at lag 0 and 0 elsewhere.
    pub acf: Vec<f64>,
    pub ess: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryStats {
    pub states: usize,
    pub coordinates: Vec<CoordinateSummary>,
}

impl SummaryStats {
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<12} {:>14} {:>14} {:>10} {:>14} {:>14} {:>14} {:>8}\n",
            "name", "mean", "sd", "ess", "q05", "q50", "q95", "acf1"
        );
        for c in &self.coordinates {
            s.push_str(&format!(
                "{:<12} {:>14.6e} {:>14.6e} {:>10.1} {:>14.6e} {:>14.6e} {:>14.6e} {:>8.4}\n",
                c.name,
                c.mean,
                c.sd,
                c.ess,
                c.q05,
                c.q50,
                c.q95,
                c.acf.get(1).copied().unwrap_or(f64::NAN)
            ));
        }
        s
    }
}

pub fn summarize_series(name: &str, x: &[f64]) -> Result<CoordinateSummary> {
    let n = x.len();
    if n < MIN_STATES {
        return Err(Error::validation(format!(
            "need at least {MIN_STATES} stored states to summarize, got {n}"
        )));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let acov = autocovariance(x);
    let lags = MAX_LAG.min(n - 1);
    let acf = if acov[0] > 0.0 {
        acov[..=lags].iter().map(|c| c / acov[0]).collect()
    } else {
        let mut a = vec![0.0; lags + 1];
        a[0] = 1.0;
        a
    };
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(CoordinateSummary {
        name: name.to_owned(),
        mean,
        sd,
        acf,
        ess: effective_sample_size(x),
        q05: quantile(&sorted, 0.05),
        q50: quantile(&sorted, 0.50),
        q95: quantile(&sorted, 0.95),
    })
}

/// Summarizes each column of `values` (rows are stored states).
pub fn summarize_columns(columns: &[String], values: &Matrix) -> Result<SummaryStats> {
    let coordinates = columns
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let col: Vec<f64> = values.column(k).iter().copied().collect();
            summarize_series(name, &col)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SummaryStats {
        states: values.nrows(),
        coordinates,
    })
}

/// Summarizes every coordinate of `β`, `u`, `λ` (and `τ` if stored).
pub fn summarize(chain: &ChainOutput) -> Result<SummaryStats> {
    let (p, q, m) = chain.dims();
    let with_tau = !chain.taus.is_empty();
    let columns = crate::io::chain_header(p, q, m, with_tau);
    let values = Matrix::from_fn(chain.states.len(), columns.len(), |r, k| {
        let s = &chain.states[r];
        if k < p {
            s.beta()[k]
        } else if k < p + q {
            s.u()[k - p]
        } else if k < p + q + m + 1 {
            s.lambda()[k - p - q]
        } else {
            chain.taus[r].as_vector()[k - p - q - m - 1]
        }
    });
    summarize_columns(&columns, &values)
}

/// The model used for sampler-correctness tests: `n = 4`, `p = 3`, one
/// random-effect block of size 2, `c = 0.4`, `a = (4, 2)`, `b = (1, 1)`,
/// `d = 1`. The response is a placeholder; the Geweke test redraws it.
pub fn tiny_model() -> (MixedModelData, Hyperparameters) {
    let x = Matrix::from_row_slice(4, 3, &[1.0, 0.5, -0.3, 1.0, -1.2, 0.8, 1.0, 0.3, 1.5, 1.0, 0.9, -0.7]);
    let z = Matrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
    let y = Vector::from_column_slice(&[0.7, -1.1, 2.3, 0.4]);
    let model = MixedModelData::new(y, x, vec![z]).expect("valid tiny model");
    let hyper = Hyperparameters::new(vec![4.0, 2.0], vec![1.0, 1.0], 0.4, 1.0).expect("valid prior");
    (model, hyper)
}

pub const TEST_FUNCTIONS: [&str; 8] = [
    "lambda0",
    "log_lambda0",
    "sum_log_lambda_random",
    "beta1",
    "beta1_sq",
    "u_norm_sq",
    "tau1",
    "log_tau1",
];

fn test_functions(state: &ChainState, tau: &TauVector) -> [f64; 8] {
    let l = state.lambda();
    let b1 = state.beta()[0];
    let t1 = tau.as_vector()[0];
    [
        l[0],
        l[0].ln(),
        l.iter().skip(1).map(|v| v.ln()).sum(),
        b1,
        b1 * b1,
        state.u().norm_squared(),
        t1,
        t1.ln(),
    ]
}

fn checked_functions(state: &ChainState, tau: &TauVector, iteration: usize, stream: &str) -> Result<[f64; 8]> {
    let g = test_functions(state, tau);
    if let Some(k) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::Sampler(format!(
            "{stream} stream, iteration {iteration}: test function {} = {} at state {state:?}, tau {tau:?}",
            TEST_FUNCTIONS[k], g[k]
        )));
    }
    Ok(g)
}

/// One joint draw of `(τ, λ, β, u)` from the prior and `y` from the likelihood.
pub fn draw_prior_joint<R: Rng + ?Sized>(
    model: &MixedModelData,
    hyper: &Hyperparameters,
    rng: &mut R,
) -> Result<(ChainState, TauVector, Vector)> {
    let tau = Vector::from_iterator(
        model.p(),
        (0..model.p()).map(|_| GammaParams { shape: hyper.c, rate: hyper.d }.sample(rng)),
    );
    let lambda = Vector::from_iterator(
        model.m() + 1,
        (0..=model.m()).map(|i| GammaParams { shape: hyper.a[i], rate: hyper.b[i] }.sample(rng)),
    );
    let beta = Vector::from_iterator(
        model.p(),
        tau.iter().map(|t| {
            Normal::new(0.0, (t / lambda[0]).sqrt()).expect("finite sd").sample(rng)
        }),
    );
    let mut u = Vector::zeros(model.q());
    for i in 0..model.m() {
        let normal = Normal::new(0.0, lambda[i + 1].powf(-0.5)).expect("finite sd");
        for k in model.block_range(i) {
            u[k] = normal.sample(rng);
        }
    }
    let state = ChainState::new(beta, u, lambda)?;
    let y = draw_response(model, &state, rng);
    Ok((state, TauVector::new(tau)?, y))
}

/// `y ~ N(Xβ + Zu, λ₀⁻¹ I)`.
pub fn draw_response<R: Rng + ?Sized>(model: &MixedModelData, state: &ChainState, rng: &mut R) -> Vector {
    let mean = model.w() * state.theta();
    let normal = Normal::new(0.0, state.lambda0().powf(-0.5)).expect("finite sd");
    mean.map(|m| m + normal.sample(rng))
}

#[derive(Debug, Clone, Serialize)]
pub struct GewekeFunction {
    pub name: &'static str,
    pub marginal_mean: f64,
    pub marginal_se: f64,
    pub successive_mean: f64,
    pub successive_se: f64,
    pub successive_ess: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GewekeReport {
    pub sampler: &'static str,
    pub fault: Option<Fault>,
    pub samples: usize,
    pub seed: u64,
    pub functions: Vec<GewekeFunction>,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.functions.iter().map(|f| f.z.abs()).fold(0.0, f64::max)
    }

    pub fn passed(&self, threshold: f64) -> bool {
        self.functions.iter().all(|f| f.z.abs() < threshold)
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<24} {:>13} {:>13} {:>10} {:>9}\n",
            "function", "marginal", "successive", "ess", "z"
        );
        for f in &self.functions {
            s.push_str(&format!(
                "{:<24} {:>13.6e} {:>13.6e} {:>10.1} {:>9.3}\n",
                f.name, f.marginal_mean, f.successive_mean, f.successive_ess, f.z
            ));
        }
        s
    }
}

fn marginal_stream(model: &MixedModelData, hyper: &Hyperparameters, samples: usize, seed: u64) -> Result<Vec<[f64; 8]>> {
    let mut rng = chain_rng(seed, 0);
    (0..samples)
        .map(|it| {
            let (state, tau, _) = draw_prior_joint(model, hyper, &mut rng)?;
            checked_functions(&state, &tau, it, "marginal-conditional")
        })
        .collect()
}

fn successive_stream(
    model: &MixedModelData,
    hyper: &Hyperparameters,
    kernel: &Kernel,
    samples: usize,
    seed: u64,
) -> Result<Vec<[f64; 8]>> {
    let mut rng = chain_rng(seed, 1);
    let (mut state, mut tau, y) = draw_prior_joint(model, hyper, &mut rng)?;
    let mut data = model.with_response(y)?;
    let mut out = Vec::with_capacity(samples);
    for it in 0..samples {
        let step = kernel
            .step(&data, hyper, &state, &tau, &mut rng)
            .map_err(|e| Error::ChainAborted {
                iteration: it,
                source: Box::new(e),
            })?;
        state = step.state;
        tau = step.tau;
        data = data.with_response(draw_response(&data, &state, &mut rng))?;
        out.push(checked_functions(&state, &tau, it, "successive-conditional")?);
    }
    Ok(out)
}

/// Compares the prior-predictive simulation with the chain that alternates
/// one kernel transition and a fresh response draw. Both target the joint law
/// of parameters and data, so every test function's z-score is approximately
/// standard normal when the kernel leaves the posterior invariant. Standard
/// errors of the successive stream use its effective sample size.
pub fn geweke_joint_test(
    model: &MixedModelData,
    hyper: &Hyperparameters,
    kernel: &Kernel,
    samples: usize,
    seed: u64,
) -> Result<GewekeReport> {
    if samples < MIN_STATES {
        return Err(Error::validation(format!("need at least {MIN_STATES} samples")));
    }
    hyper.check_against(model)?;
    let (marginal, successive) = rayon::join(
        || marginal_stream(model, hyper, samples, seed),
        || successive_stream(model, hyper, kernel, samples, seed),
    );
    let (marginal, successive) = (marginal?, successive?);
    let nf = samples as f64;
    let functions = TEST_FUNCTIONS
        .iter()
        .enumerate()
        .map(|(k, &name)| {
            let a: Vec<f64> = marginal.iter().map(|g| g[k]).collect();
            let b: Vec<f64> = successive.iter().map(|g| g[k]).collect();
            let (ma, va) = mean_var(&a);
            let (mb, vb) = mean_var(&b);
            let ess = effective_sample_size(&b);
            let se_a = (va / nf).sqrt();
            let se_b = (vb / ess).sqrt();
            GewekeFunction {
                name,
                marginal_mean: ma,
                marginal_se: se_a,
                successive_mean: mb,
                successive_se: se_b,
                successive_ess: ess,
                z: (ma - mb) / (se_a * se_a + se_b * se_b).sqrt(),
            }
        })
        .collect();
    Ok(GewekeReport {
        sampler: kernel.kind().as_str(),
        fault: kernel.fault(),
        samples,
        seed,
        functions,
    })
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (mean, x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_quantiles() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&x, 0.5), 2.5);
        assert!((quantile(&x, 0.05) - 1.15).abs() < 1e-12);
        assert_eq!(quantile(&x, 1.0), 4.0);
    }

    #[test]
    fn constant_series() {
        let s = summarize_series("c", &[2.0; 20]).unwrap();
        assert_eq!(s.sd, 0.0);
        assert_eq!(s.ess, 1.0);
        assert_eq!(s.acf[0], 1.0);
    }

    #[test]
    fn short_chain_rejected() {
        assert!(summarize_series("c", &[1.0; 5]).is_err());
    }

    #[test]
    fn autocovariance_matches_direct_sum() {
        let x: Vec<f64> = (0..37).map(|k| ((k * 7919) % 13) as f64 - 0.3 * k as f64).collect();
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let fast = autocovariance(&x);
        for lag in [0, 1, 5, 36] {
            let direct: f64 = (0..n - lag).map(|t| (x[t] - mean) * (x[t + lag] - mean)).sum::<f64>() / n as f64;
            assert!((fast[lag] - direct).abs() < 1e-10, "lag {lag}");
        }
    }
}
