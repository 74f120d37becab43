//! Model definition: data, hyperparameters, chain state and the unnormalized
//! log posterior of the normal-gamma shrinkage linear mixed model
//!
//! ```text
//! y | β, u, τ, λ ~ N_n(Xβ + Σ Z_i u_i, λ₀⁻¹ I_n)
//! β | τ, λ       ~ N_p(0, λ₀⁻¹ D_τ)
//! u_i | λ        ~ N_{q_i}(0, λ_i⁻¹ I)
//! λ_i ~ Gamma(a_i, b_i),  τ_j ~ Gamma(c, d)   (shape, rate)
//! ```

use std::path::{Path, PathBuf};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::io::read_matrix_csv;
use crate::linalg::{Matrix, Vector};

/// Observed data and designs. Immutable after construction.
#[derive(Debug, Clone)]
pub struct MixedModelData {
    y: Vector,
    x: Matrix,
    z_blocks: Vec<Matrix>,
    z: Matrix,
    w: Matrix,
    xtx: Matrix,
    offsets: Vec<usize>,
}

impl MixedModelData {
    pub fn new(y: Vector, x: Matrix, z_blocks: Vec<Matrix>) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::validation(format!("need n >= 2 observations, got n = {n}")));
        }
        if x.ncols() == 0 {
            return Err(Error::validation("X must have at least one column (p >= 1)"));
        }
        if x.nrows() != n {
            return Err(Error::validation(format!(
                "dimension mismatch: X has {} rows but y has length {n}",
                x.nrows()
            )));
        }
        if z_blocks.is_empty() {
            return Err(Error::validation("at least one random-effect block is required (m >= 1)"));
        }
        for (i, zi) in z_blocks.iter().enumerate() {
            if zi.nrows() != n {
                return Err(Error::validation(format!(
                    "dimension mismatch: Z_{} has {} rows but y has length {n}",
                    i + 1,
                    zi.nrows()
                )));
            }
            if zi.ncols() < 2 {
                return Err(Error::validation(format!(
                    "need q_i >= 2 for every block, got q_{} = {}",
                    i + 1,
                    zi.ncols()
                )));
            }
        }
        let finite = y.iter().chain(x.iter()).chain(z_blocks.iter().flat_map(|z| z.iter()));
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("data contain non-finite values"));
        }

        let q: usize = z_blocks.iter().map(|z| z.ncols()).sum();
        let mut offsets = Vec::with_capacity(z_blocks.len() + 1);
        let mut z = Matrix::zeros(n, q);
        let mut col = 0;
        for zi in &z_blocks {
            offsets.push(col);
            z.columns_mut(col, zi.ncols()).copy_from(zi);
            col += zi.ncols();
        }
        offsets.push(q);

        let p = x.ncols();
        let mut w = Matrix::zeros(n, p + q);
        w.columns_mut(0, p).copy_from(&x);
        w.columns_mut(p, q).copy_from(&z);
        let xtx = x.transpose() * &x;

        Ok(Self {
            y,
            x,
            z_blocks,
            z,
            w,
            xtx,
            offsets,
        })
    }

    /// Same designs, different response.
    pub fn with_response(&self, y: Vector) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::validation(format!(
                "dimension mismatch: new response has length {} but n = {}",
                y.len(),
                self.n()
            )));
        }
        let mut out = self.clone();
        out.y = y;
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
    pub fn p(&self) -> usize {
        self.x.ncols()
    }
    pub fn m(&self) -> usize {
        self.z_blocks.len()
    }
    pub fn q(&self) -> usize {
        self.z.ncols()
    }
    /// Block sizes `q_1 … q_m`.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.z_blocks.iter().map(|z| z.ncols()).collect()
    }
    /// Column range of block `i` (0-based) inside `u` and `Z`.
    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }
    pub fn y(&self) -> &Vector {
        &self.y
    }
    pub fn x(&self) -> &Matrix {
        &self.x
    }
    pub fn xtx(&self) -> &Matrix {
        &self.xtx
    }
    pub fn z_blocks(&self) -> &[Matrix] {
        &self.z_blocks
    }
    /// `Z = [Z₁ … Z_m]`.
    pub fn z(&self) -> &Matrix {
        &self.z
    }
    /// `W = [X Z]`.
    pub fn w(&self) -> &Matrix {
        &self.w
    }

    /// `‖y − Wθ‖²` for `θ = (β, u)`.
    pub fn residual_sq(&self, beta: &Vector, u: &Vector) -> f64 {
        let fitted = &self.x * beta + &self.z * u;
        (&self.y - fitted).norm_squared()
    }
}

/// Gamma prior parameters: `λ_i ~ Gamma(a_i, b_i)` for `i = 0..=m` and
/// `τ_j ~ Gamma(c, d)`, all shape/rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: f64,
    pub d: f64,
}

impl Hyperparameters {
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: f64, d: f64) -> Result<Self> {
        let h = Self { a, b, c, d };
        h.validate()?;
        Ok(h)
    }

    fn validate(&self) -> Result<()> {
        if self.a.len() != self.b.len() {
            return Err(Error::validation(format!(
                "prior vectors a and b differ in length ({} vs {})",
                self.a.len(),
                self.b.len()
            )));
        }
        if self.a.len() < 2 {
            return Err(Error::validation("prior vectors a, b need m + 1 >= 2 entries"));
        }
        for (name, v) in [("a", &self.a), ("b", &self.b)] {
            if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !(**x > 0.0 && x.is_finite())) {
                return Err(Error::validation(format!(
                    "hyperparameter {name}_{i} must be strictly positive, got {x}"
                )));
            }
        }
        for (name, x) in [("c", self.c), ("d", self.d)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::validation(format!(
                    "hyperparameter {name} must be strictly positive, got {x}"
                )));
            }
        }
        Ok(())
    }

    /// Checks that the prior vectors have `m + 1` entries.
    pub fn check_against(&self, model: &MixedModelData) -> Result<()> {
        if self.a.len() != model.m() + 1 {
            return Err(Error::validation(format!(
                "prior vectors have {} entries but the model has m + 1 = {} precisions",
                self.a.len(),
                model.m() + 1
            )));
        }
        Ok(())
    }
}

/// Chain state `(θ, λ) = (β, u, λ₀ … λ_m)`, restricted to `|β_j| > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub(crate) beta: Vector,
    pub(crate) u: Vector,
    pub(crate) lambda: Vector,
}

impl ChainState {
    pub fn new(beta: Vector, u: Vector, lambda: Vector) -> Result<Self> {
        if let Some(j) = beta.iter().position(|b| *b == 0.0 || !b.is_finite()) {
            return Err(Error::Domain(format!(
                "beta_{} = {} lies outside the state space (|beta_j| > 0 required)",
                j + 1,
                beta[j]
            )));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("u contains non-finite values".into()));
        }
        if let Some(i) = lambda.iter().position(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::Domain(format!(
                "lambda_{i} = {} must be strictly positive",
                lambda[i]
            )));
        }
        Ok(Self { beta, u, lambda })
    }

    /// Checks vector lengths against the model.
    pub fn check_against(&self, model: &MixedModelData) -> Result<()> {
        if self.beta.len() != model.p() || self.u.len() != model.q() || self.lambda.len() != model.m() + 1 {
            return Err(Error::validation(format!(
                "state dimensions (p={}, q={}, m+1={}) do not match the model (p={}, q={}, m+1={})",
                self.beta.len(),
                self.u.len(),
                self.lambda.len(),
                model.p(),
                model.q(),
                model.m() + 1
            )));
        }
        Ok(())
    }

    pub fn beta(&self) -> &Vector {
        &self.beta
    }
    pub fn u(&self) -> &Vector {
        &self.u
    }
    pub fn lambda(&self) -> &Vector {
        &self.lambda
    }
    pub fn lambda0(&self) -> f64 {
        self.lambda[0]
    }
    /// `θ = (βᵀ uᵀ)ᵀ`.
    pub fn theta(&self) -> Vector {
        let p = self.beta.len();
        let mut t = Vector::zeros(p + self.u.len());
        t.rows_mut(0, p).copy_from(&self.beta);
        t.rows_mut(p, self.u.len()).copy_from(&self.u);
        t
    }
}

/// Auxiliary shrinkage weights `τ`, all strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct TauVector(Vector);

impl TauVector {
    pub fn new(tau: Vector) -> Result<Self> {
        if let Some(j) = tau.iter().position(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Domain(format!("tau_{} = {} must be strictly positive", j + 1, tau[j])));
        }
        Ok(Self(tau))
    }

    pub fn from_slice(tau: &[f64]) -> Result<Self> {
        Self::new(Vector::from_column_slice(tau))
    }

    pub fn as_vector(&self) -> &Vector {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `βᵀ D_τ⁻¹ β`.
    pub fn weighted_sq(&self, beta: &Vector) -> f64 {
        beta.iter().zip(self.0.iter()).map(|(b, t)| b * b / t).sum()
    }
}

/// Natural log of the joint posterior density of `(θ, τ, λ)` up to an additive
/// constant.
pub fn log_unnormalized_posterior(
    model: &MixedModelData,
    hyper: &Hyperparameters,
    state: &ChainState,
    tau: &TauVector,
) -> f64 {
    let n = model.n() as f64;
    let p = model.p() as f64;
    let l0 = state.lambda0();
    let ln_l0 = l0.ln();

    let mut lp = 0.5 * (n + p) * ln_l0;
    lp -= 0.5 * l0 * model.residual_sq(&state.beta, &state.u);
    lp -= 0.5 * tau.as_vector().iter().map(|t| t.ln()).sum::<f64>();
    lp -= 0.5 * l0 * tau.weighted_sq(&state.beta);
    for i in 0..model.m() {
        let range = model.block_range(i);
        let qi = range.len() as f64;
        let li = state.lambda[i + 1];
        lp += 0.5 * qi * li.ln();
        lp -= 0.5 * li * state.u.rows(range.start, range.len()).norm_squared();
    }
    for &t in tau.as_vector().iter() {
        lp += (hyper.c - 1.0) * t.ln() - hyper.d * t;
    }
    for (i, &li) in state.lambda.iter().enumerate() {
        lp += (hyper.a[i] - 1.0) * li.ln() - hyper.b[i] * li;
    }
    lp
}

/// Response and design CSV locations.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPaths {
    pub y: PathBuf,
    pub x: PathBuf,
    pub z: Vec<PathBuf>,
}

impl DataPaths {
    /// Resolves relative paths against `base`.
    pub fn relative_to(&self, base: &Path) -> Self {
        let fix = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        Self {
            y: fix(&self.y),
            x: fix(&self.x),
            z: self.z.iter().map(fix).collect(),
        }
    }
}

/// Reads the data files and prior section of `config` and validates everything.
pub fn load_model(paths: &DataPaths, config: &Config) -> Result<(MixedModelData, Hyperparameters)> {
    let y_mat = read_matrix_csv(&paths.y)?;
    let y = if y_mat.ncols() == 1 {
        y_mat.column(0).into_owned()
    } else if y_mat.nrows() == 1 {
        y_mat.row(0).transpose()
    } else {
        return Err(Error::Parse {
            path: paths.y.clone(),
            message: format!("response must be a single column, got {}x{}", y_mat.nrows(), y_mat.ncols()),
        });
    };
    let x = read_matrix_csv(&paths.x)?;
    if paths.z.len() != config.model.m {
        return Err(Error::validation(format!(
            "config declares m = {} random-effect blocks but {} Z files were given",
            config.model.m,
            paths.z.len()
        )));
    }
    let z_blocks = paths.z.iter().map(|p| read_matrix_csv(p)).collect::<Result<Vec<_>>>()?;
    let model = MixedModelData::new(y, x, z_blocks)?;
    let prior = &config.prior;
    let hyper = Hyperparameters::new(prior.a.clone(), prior.b.clone(), prior.c, prior.d)?;
    hyper.check_against(&model)?;
    Ok((model, hyper))
}
