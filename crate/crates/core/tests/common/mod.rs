//! Independent reference computations used by the integration tests.
//! Nothing here calls the library's own formulas for the quantity under test.
#![allow(dead_code)]

use ngmm::linalg::{Matrix, Vector};
use ngmm::{MixedModelData, TauVector};

/// θ-conditional by brute force: `cov = (λ₀WᵀW + C)⁻¹` with
/// `C = blockdiag(λ₀D_τ⁻¹, Λ)`, `mean = cov · λ₀Wᵀy`. Uses a full LU inverse
/// rather than the block formulas.
pub fn direct_theta_moments(model: &MixedModelData, tau: &TauVector, lambda: &Vector) -> (Vector, Matrix) {
    let w = model.w();
    let p = model.p();
    let l0 = lambda[0];
    let mut prec = w.transpose() * w * l0;
    for j in 0..p {
        prec[(j, j)] += l0 / tau.as_vector()[j];
    }
    let mut offset = p;
    for (i, zi) in model.z_blocks().iter().enumerate() {
        for _ in 0..zi.ncols() {
            prec[(offset, offset)] += lambda[i + 1];
            offset += 1;
        }
    }
    let cov = prec.clone().try_inverse().expect("precision is invertible");
    let mean = &cov * (w.transpose() * model.y()) * l0;
    (mean, cov)
}

pub fn rel_err_mat(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn rel_err_vec(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// `K_{n+½}(x)` from the terminating series
/// `√(π/2x) e^{−x} Σ_k (n+k)! / (k!(n−k)!) (2x)^{−k}`.
pub fn bessel_k_half_integer(n: u32, x: f64) -> f64 {
    let mut sum = 0.0;
    for k in 0..=n {
        let num: f64 = ((n - k + 1)..=(n + k)).map(|v| v as f64).product();
        let den: f64 = (1..=k).map(|v| v as f64).product();
        sum += num / den / (2.0 * x).powi(k as i32);
    }
    (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() * sum
}

/// `E|X|^{−v}` for `X ~ N(0, σ²)`: `σ^{−v} 2^{−v/2} Γ((1−v)/2)/√π`.
pub fn centered_gaussian_inverse_moment(sigma: f64, v: f64) -> f64 {
    sigma.powf(-v) * 2f64.powf(-0.5 * v) * statrs::function::gamma::gamma(0.5 * (1.0 - v)) / std::f64::consts::PI.sqrt()
}

/// CDF of `GIG(ζ, ξ, ψ)` tabulated by trapezoidal quadrature of the density
/// on a log grid, normalized numerically (so no Bessel function is used).
pub struct QuadratureCdf {
    log_x: Vec<f64>,
    cdf: Vec<f64>,
}

impl QuadratureCdf {
    pub fn new(zeta: f64, xi: f64, psi: f64) -> Self {
        // density in t = ln x: exp(ζ t − (ξ e^t + ψ e^{−t})/2), up to a constant
        let g = |t: f64| zeta * t - 0.5 * (xi * t.exp() + psi * (-t).exp());
        let (lo, hi) = (-60.0f64, 60.0f64);
        let peak = (0..=120_000).map(|k| g(lo + (hi - lo) * k as f64 / 120_000.0)).fold(f64::NEG_INFINITY, f64::max);
        let mut a = lo;
        while g(a) < peak - 60.0 {
            a += 0.01;
        }
        let mut b = hi;
        while g(b) < peak - 60.0 {
            b -= 0.01;
        }
        let (a, b) = (a - 0.01, b + 0.01);
        let steps = 400_000;
        let h = (b - a) / steps as f64;
        let mut log_x = Vec::with_capacity(steps + 1);
        let mut cdf = Vec::with_capacity(steps + 1);
        let mut acc = 0.0;
        let mut prev = (g(a) - peak).exp();
        log_x.push(a);
        cdf.push(0.0);
        for k in 1..=steps {
            let t = a + h * k as f64;
            let cur = (g(t) - peak).exp();
            acc += 0.5 * h * (prev + cur);
            prev = cur;
            log_x.push(t);
            cdf.push(acc);
        }
        for c in cdf.iter_mut() {
            *c /= acc;
        }
        Self { log_x, cdf }
    }

    pub fn at(&self, x: f64) -> f64 {
        let t = x.ln();
        let n = self.log_x.len();
        if t <= self.log_x[0] {
            return 0.0;
        }
        if t >= self.log_x[n - 1] {
            return 1.0;
        }
        let h = self.log_x[1] - self.log_x[0];
        let pos = (t - self.log_x[0]) / h;
        let k = (pos.floor() as usize).min(n - 2);
        let w = pos - k as f64;
        self.cdf[k] * (1.0 - w) + self.cdf[k + 1] * w
    }

    /// Kolmogorov–Smirnov distance between the sample and this CDF.
    pub fn ks_distance(&self, sample: &mut [f64]) -> f64 {
        sample.sort_by(f64::total_cmp);
        let n = sample.len() as f64;
        sample
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = self.at(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Raw moment `E[X^k]` by quadrature on the same log grid (test-only oracle
/// for the Bessel-ratio formula).
pub fn quadrature_moment(zeta: f64, xi: f64, psi: f64, order: f64) -> f64 {
    let g = |t: f64| zeta * t - 0.5 * (xi * t.exp() + psi * (-t).exp());
    let steps = 200_000;
    let (a, b) = (-60.0f64, 60.0f64);
    let h = (b - a) / steps as f64;
    let peak = (0..=steps).map(|k| g(a + h * k as f64)).fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..=steps {
        let t = a + h * k as f64;
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
        let d = (g(t) - peak).exp();
        den += w * d;
        num += w * d * (order * t).exp();
    }
    num / den
}
