//! Generalized inverse Gaussian distribution `GIG(ζ, ξ, ψ)` with density
//!
//! ```text
//! f(x) = ξ^{ζ/2} / (2 ψ^{ζ/2} K_ζ(√(ξψ))) · x^{ζ−1} exp(−(ξx + ψ/x)/2),   x > 0.
//! ```
//!
//! Sampling follows Hörmann and Leydold (2014): ratio-of-uniforms with or
//! without a mode shift, and a three-piece rejection hat for small order and
//! small `√(ξψ)`.

use rand::Rng;
use rand_distr::Open01;

use crate::error::{Error, Result};
use crate::special::bessel_k_log;

const MAX_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams {
    pub zeta: f64,
    pub xi: f64,
    pub psi: f64,
}

impl GigParams {
    pub fn new(zeta: f64, xi: f64, psi: f64) -> Result<Self> {
        if !zeta.is_finite() {
            return Err(Error::Domain(format!("GIG order must be finite, got {zeta}")));
        }
        if !(xi > 0.0 && xi.is_finite()) || !(psi > 0.0 && psi.is_finite()) {
            return Err(Error::Domain(format!(
                "GIG needs xi > 0 and psi > 0, got xi = {xi}, psi = {psi}"
            )));
        }
        Ok(Self { zeta, xi, psi })
    }

    /// `√(ξψ)`.
    pub fn omega(&self) -> f64 {
        (self.xi * self.psi).sqrt()
    }

    /// Log of the normalizing constant `ξ^{ζ/2} / (2 ψ^{ζ/2} K_ζ(√(ξψ)))`.
    pub fn log_normalizer(&self) -> f64 {
        let log_k = bessel_k_log(self.zeta, self.omega()).expect("omega > 0");
        0.5 * self.zeta * (self.xi.ln() - self.psi.ln()) - std::f64::consts::LN_2 - log_k
    }

    pub fn log_density(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::Domain(format!("GIG density evaluated at non-positive x = {x}")));
        }
        Ok(self.log_normalizer() + (self.zeta - 1.0) * x.ln() - 0.5 * (self.xi * x + self.psi / x))
    }

    /// `E[X^order] = (ψ/ξ)^{order/2} K_{ζ+order}(√(ξψ)) / K_ζ(√(ξψ))`.
    pub fn moment(&self, order: f64) -> f64 {
        if order == 0.0 {
            return 1.0;
        }
        let w = self.omega();
        let num = bessel_k_log(self.zeta + order, w).expect("omega > 0");
        let den = bessel_k_log(self.zeta, w).expect("omega > 0");
        (0.5 * order * (self.psi.ln() - self.xi.ln()) + num - den).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        // X = α Y with Y ~ density ∝ y^{λ−1} exp(−ω(y + 1/y)/2).
        let omega = self.omega();
        let alpha = (self.psi / self.xi).sqrt();
        let lambda = self.zeta.abs();
        let y = if lambda > 2.0 || omega > 3.0 {
            rou_shift(lambda, omega, rng)?
        } else if lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
            rou_noshift(lambda, omega, rng)?
        } else {
            small_order(lambda, omega, rng)?
        };
        let x = if self.zeta < 0.0 { alpha / y } else { alpha * y };
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::Sampler(format!("GIG draw {x} out of range for {self:?}")));
        }
        Ok(x)
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

fn cap_exceeded(lambda: f64, omega: f64) -> Error {
    Error::Sampler(format!(
        "GIG rejection loop exceeded {MAX_ITERATIONS} iterations (lambda = {lambda}, omega = {omega})"
    ))
}

/// Mode of `y^{λ−1} exp(−ω(y + 1/y)/2)`.
fn mode(lambda: f64, omega: f64) -> f64 {
    if lambda >= 1.0 {
        (((lambda - 1.0) * (lambda - 1.0) + omega * omega).sqrt() + (lambda - 1.0)) / omega
    } else {
        omega / (((1.0 - lambda) * (1.0 - lambda) + omega * omega).sqrt() + (1.0 - lambda))
    }
}

fn rou_noshift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> Result<f64> {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((lambda + 1.0) + ((lambda + 1.0) * (lambda + 1.0) + omega * omega).sqrt()) / omega;
    let um = (0.5 * (lambda + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    for _ in 0..MAX_ITERATIONS {
        let u = um * uniform(rng);
        let v = uniform(rng);
        let x = u / v;
        if v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return Ok(x);
        }
    }
    Err(cap_exceeded(lambda, omega))
}

fn rou_shift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> Result<f64> {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);

    // extrema of (x − xm)√f(x): roots of y³ + a y² + b y + c = 0
    let a = -(2.0 * (lambda + 1.0) / omega + xm);
    let b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    let c = xm;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let cos_arg = (-q / (2.0 * (-(p * p * p) / 27.0).sqrt())).clamp(-1.0, 1.0);
    let fi = cos_arg.acos();
    let fak = 2.0 * (-p / 3.0).sqrt();
    let y1 = fak * (fi / 3.0).cos() - a / 3.0;
    let y2 = fak * (fi / 3.0 + 4.0 / 3.0 * std::f64::consts::PI).cos() - a / 3.0;

    let uplus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
    let uminus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();

    for _ in 0..MAX_ITERATIONS {
        let u = uminus + uniform(rng) * (uplus - uminus);
        let v = uniform(rng);
        let x = u / v + xm;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return Ok(x);
        }
    }
    Err(cap_exceeded(lambda, omega))
}

/// Rejection from a hat that is constant on `[0, x0]`, follows `x^{λ−1}` on
/// `[x0, 2/ω]` and an exponential tail beyond. Requires `0 <= λ < 1`, `ω <= 1`.
fn small_order<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> Result<f64> {
    let xm = mode(lambda, omega);
    let x0 = omega / (1.0 - lambda);
    let k0 = ((lambda - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let a0 = k0 * x0;
    let (k1, a1, k2, a2);
    if x0 >= 2.0 / omega {
        k1 = 0.0;
        a1 = 0.0;
        k2 = x0.powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
    } else {
        k1 = (-omega).exp();
        a1 = if lambda == 0.0 {
            k1 * (2.0 / (omega * omega)).ln()
        } else {
            k1 / lambda * ((2.0 / omega).powf(lambda) - x0.powf(lambda))
        };
        k2 = (2.0 / omega).powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-1.0f64).exp() / omega;
    }
    let total = a0 + a1 + a2;
    let tail_start = x0.max(2.0 / omega);

    for _ in 0..MAX_ITERATIONS {
        let mut v = total * uniform(rng);
        let (x, hx);
        if v <= a0 {
            x = x0 * v / a0;
            hx = k0;
        } else {
            v -= a0;
            if v <= a1 {
                if lambda == 0.0 {
                    x = omega * (omega.exp() * v).exp();
                    hx = k1 / x;
                } else {
                    x = (x0.powf(lambda) + lambda / k1 * v).powf(1.0 / lambda);
                    hx = k1 * x.powf(lambda - 1.0);
                }
            } else {
                v -= a1;
                x = -2.0 / omega * ((-omega / 2.0 * tail_start).exp() - omega / (2.0 * k2) * v).ln();
                hx = k2 * (-omega / 2.0 * x).exp();
            }
        }
        let u = uniform(rng) * hx;
        if x > 0.0 && x.is_finite() && u.ln() <= (lambda - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return Ok(x);
        }
    }
    Err(cap_exceeded(lambda, omega))
}
