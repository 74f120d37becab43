//! Full conditional distributions.
//!
//! With `A = XᵀX + D_τ⁻¹` the operators are
//!
//! ```text
//! T = λ₀ A,   M = I − X A⁻¹ Xᵀ,   Q = λ₀ ZᵀMZ + Λ
//! ```
//!
//! and `θ | τ, λ, y` is Gaussian with
//!
//! ```text
//! E[β] = λ₀T⁻¹Xᵀy − λ₀²T⁻¹XᵀZ Q⁻¹ZᵀMy        E[u] = λ₀Q⁻¹ZᵀMy
//! Var[β] = T⁻¹ + λ₀²T⁻¹XᵀZ Q⁻¹ZᵀXT⁻¹         Cov[β, u] = −λ₀T⁻¹XᵀZ Q⁻¹
//! Var[u] = Q⁻¹
//! ```

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::gig::GigParams;
use crate::linalg::{cholesky, spd_inverse, symmetrize, Chol, Matrix, Vector};
use crate::model::{Hyperparameters, MixedModelData, TauVector};

/// `T`, `M`, `Q` and the factorizations behind the θ-conditional.
#[derive(Debug, Clone)]
pub struct ConditionalOperators {
    lambda0: f64,
    /// Λ as the diagonal of length q.
    lambda_diag: Vector,
    /// Factor of `A = XᵀX + D_τ⁻¹`; `T = λ₀A`.
    chol_a: Chol,
    a_inv: Matrix,
    m: Matrix,
    q: Matrix,
    chol_q: Chol,
    q_inv: Matrix,
}

impl ConditionalOperators {
    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }
    /// `T = λ₀(XᵀX + D_τ⁻¹)`.
    pub fn t(&self) -> Matrix {
        let l = self.chol_a.l();
        &l * l.transpose() * self.lambda0
    }
    /// `T⁻¹`.
    pub fn t_inv(&self) -> Matrix {
        &self.a_inv / self.lambda0
    }
    /// Cholesky factor of `XᵀX + D_τ⁻¹` (the factor of `T` is this times `√λ₀`).
    pub fn chol_a(&self) -> &Chol {
        &self.chol_a
    }
    pub fn m(&self) -> &Matrix {
        &self.m
    }
    pub fn q(&self) -> &Matrix {
        &self.q
    }
    pub fn q_inv(&self) -> &Matrix {
        &self.q_inv
    }
    pub fn chol_q(&self) -> &Chol {
        &self.chol_q
    }
    /// Diagonal of `Λ = ⊕ λ_i I_{q_i}`.
    pub fn lambda_diag(&self) -> &Vector {
        &self.lambda_diag
    }
}

/// `Λ` as a length-q diagonal.
pub fn lambda_diagonal(model: &MixedModelData, lambda: &Vector) -> Vector {
    let mut d = Vector::zeros(model.q());
    for i in 0..model.m() {
        let r = model.block_range(i);
        d.rows_mut(r.start, r.len()).fill(lambda[i + 1]);
    }
    d
}

fn check_positive(name: &str, v: &Vector) -> Result<()> {
    if let Some(k) = v.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::Domain(format!("{name}[{k}] = {} must be strictly positive", v[k])));
    }
    Ok(())
}

pub fn build_operators(model: &MixedModelData, tau: &TauVector, lambda: &Vector) -> Result<ConditionalOperators> {
    check_positive("lambda", lambda)?;
    if tau.len() != model.p() || lambda.len() != model.m() + 1 {
        return Err(Error::validation(format!(
            "tau has length {} and lambda {}, expected p = {} and m + 1 = {}",
            tau.len(),
            lambda.len(),
            model.p(),
            model.m() + 1
        )));
    }
    let lambda0 = lambda[0];
    let x = model.x();
    let z = model.z();

    let mut a = model.xtx().clone();
    for (j, t) in tau.as_vector().iter().enumerate() {
        a[(j, j)] += 1.0 / t;
    }
    let chol_a = cholesky(a, "X'X + D_tau^-1")?;
    let a_inv = spd_inverse(&chol_a);

    let a_inv_xt = chol_a.solve(&x.transpose());
    let mut m = Matrix::identity(model.n(), model.n()) - x * a_inv_xt;
    symmetrize(&mut m);

    let lambda_diag = lambda_diagonal(model, lambda);
    let mut q = z.transpose() * (&m * z) * lambda0;
    symmetrize(&mut q);
    for k in 0..q.nrows() {
        q[(k, k)] += lambda_diag[k];
    }
    let chol_q = cholesky(q.clone(), "Q")?;
    let q_inv = spd_inverse(&chol_q);

    Ok(ConditionalOperators {
        lambda0,
        lambda_diag,
        chol_a,
        a_inv,
        m,
        q,
        chol_q,
        q_inv,
    })
}

/// Mean and covariance of `θ | τ, λ, y`, with the covariance factor used for
/// sampling.
#[derive(Debug, Clone)]
pub struct GaussianMoments {
    pub mean: Vector,
    pub cov: Matrix,
    chol: Chol,
    p: usize,
}

impl GaussianMoments {
    pub fn factor(&self) -> Matrix {
        self.chol.l()
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn beta_mean(&self) -> Vector {
        self.mean.rows(0, self.p).into_owned()
    }
    pub fn u_mean(&self) -> Vector {
        self.mean.rows(self.p, self.mean.len() - self.p).into_owned()
    }
    pub fn beta_cov(&self) -> Matrix {
        self.cov.view((0, 0), (self.p, self.p)).into_owned()
    }
    pub fn u_cov(&self) -> Matrix {
        let q = self.mean.len() - self.p;
        self.cov.view((self.p, self.p), (q, q)).into_owned()
    }
}

pub fn theta_moments(model: &MixedModelData, ops: &ConditionalOperators) -> Result<GaussianMoments> {
    theta_moments_with_jitter(model, ops, 0.0)
}

/// As [`theta_moments`], adding `jitter · I` to the covariance before it is
/// factorized. A nonzero jitter changes the sampled law.
pub fn theta_moments_with_jitter(
    model: &MixedModelData,
    ops: &ConditionalOperators,
    jitter: f64,
) -> Result<GaussianMoments> {
    let (p, q) = (model.p(), model.q());
    let l0 = ops.lambda0;
    let x = model.x();
    let z = model.z();
    let y = model.y();

    let t_inv = ops.t_inv();
    let b = &t_inv * (x.transpose() * z);
    let zt_my = z.transpose() * (&ops.m * y);

    let u_mean = &ops.q_inv * zt_my * l0;
    let beta_mean = &t_inv * (x.transpose() * y) * l0 - &b * &u_mean * l0;

    let b_qinv = &b * &ops.q_inv;
    let var_beta = &t_inv + &b_qinv * b.transpose() * (l0 * l0);
    let cov_bu = &b_qinv * (-l0);

    let mut cov = Matrix::zeros(p + q, p + q);
    cov.view_mut((0, 0), (p, p)).copy_from(&var_beta);
    cov.view_mut((0, p), (p, q)).copy_from(&cov_bu);
    cov.view_mut((p, 0), (q, p)).copy_from(&cov_bu.transpose());
    cov.view_mut((p, p), (q, q)).copy_from(&ops.q_inv);
    symmetrize(&mut cov);

    let mut mean = Vector::zeros(p + q);
    mean.rows_mut(0, p).copy_from(&beta_mean);
    mean.rows_mut(p, q).copy_from(&u_mean);

    let mut to_factor = cov.clone();
    if jitter != 0.0 {
        for k in 0..p + q {
            to_factor[(k, k)] += jitter;
        }
    }
    let chol = cholesky(to_factor, "Var[theta]")?;
    Ok(GaussianMoments { mean, cov, chol, p })
}

/// Draws `θ = mean + L z` and splits it into `(β, u)`.
pub fn sample_theta<R: Rng + ?Sized>(moments: &GaussianMoments, rng: &mut R) -> (Vector, Vector) {
    let k = moments.mean.len();
    let z = Vector::from_iterator(k, (0..k).map(|_| StandardNormal.sample(rng)));
    let l = moments.chol.l_dirty();
    let mut theta = moments.mean.clone();
    // lower-triangular product; l_dirty's upper part is garbage
    for i in 0..k {
        let mut s = 0.0;
        for j in 0..=i {
            s += l[(i, j)] * z[j];
        }
        theta[i] += s;
    }
    let p = moments.p;
    (theta.rows(0, p).into_owned(), theta.rows(p, k - p).into_owned())
}

/// Shape and rate of a gamma law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub shape: f64,
    pub rate: f64,
}

impl GammaParams {
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Gamma::new(self.shape, 1.0 / self.rate)
            .expect("positive gamma parameters")
            .sample(rng)
    }
}

/// Gamma conditionals of `λ₀, …, λ_m` given `(θ, τ)`.
pub fn lambda_conditional(
    model: &MixedModelData,
    hyper: &Hyperparameters,
    beta: &Vector,
    u: &Vector,
    tau: &TauVector,
) -> Vec<GammaParams> {
    let n = model.n() as f64;
    let p = model.p() as f64;
    let mut out = Vec::with_capacity(model.m() + 1);
    out.push(GammaParams {
        shape: 0.5 * n + 0.5 * p + hyper.a[0],
        rate: 0.5 * model.residual_sq(beta, u) + 0.5 * tau.weighted_sq(beta) + hyper.b[0],
    });
    for i in 0..model.m() {
        let r = model.block_range(i);
        out.push(GammaParams {
            shape: 0.5 * r.len() as f64 + hyper.a[i + 1],
            rate: 0.5 * u.rows(r.start, r.len()).norm_squared() + hyper.b[i + 1],
        });
    }
    out
}

/// Draws `λ` from its conditional; the components are independent.
pub fn sample_lambda<R: Rng + ?Sized>(params: &[GammaParams], rng: &mut R) -> Vector {
    Vector::from_iterator(params.len(), params.iter().map(|g| g.sample(rng)))
}

/// `E[λ₀⁻¹ | θ, τ] = (‖y − Wθ‖² + βᵀD_τ⁻¹β + 2b₀) / (n + p + 2a₀ − 2)`.
pub fn inverse_lambda0_mean(
    model: &MixedModelData,
    hyper: &Hyperparameters,
    beta: &Vector,
    u: &Vector,
    tau: &TauVector,
) -> f64 {
    let num = model.residual_sq(beta, u) + tau.weighted_sq(beta) + 2.0 * hyper.b[0];
    num / (model.n() as f64 + model.p() as f64 + 2.0 * hyper.a[0] - 2.0)
}

/// Conditional laws of `τ_j | θ, λ`: `GIG(c − 1/2, 2d, λ₀β_j²)`.
pub fn tau_conditional(hyper: &Hyperparameters, beta: &Vector, lambda0: f64) -> Result<Vec<GigParams>> {
    beta.iter()
        .map(|b| GigParams::new(hyper.c - 0.5, 2.0 * hyper.d, lambda0 * b * b))
        .collect()
}

pub fn sample_tau<R: Rng + ?Sized>(params: &[GigParams], rng: &mut R) -> Result<TauVector> {
    let draws = params.iter().map(|g| g.sample(rng)).collect::<Result<Vec<_>>>()?;
    TauVector::new(Vector::from_vec(draws))
}
