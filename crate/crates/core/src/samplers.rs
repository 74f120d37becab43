//! Markov kernels on `(θ, λ)` (plus the auxiliary `τ`) and the chain runner.
//!
//! * hybrid: draw `τ | θ, λ`, then with probability `r` refresh `θ | λ, τ`,
//!   otherwise refresh `λ | θ, τ`;
//! * deterministic-scan Gibbs: `τ → θ → λ`;
//! * random-scan Gibbs: refresh one of `τ`, `θ`, `λ` chosen with fixed
//!   probabilities.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::conditionals::{
    build_operators, lambda_conditional, sample_lambda, sample_theta, tau_conditional, theta_moments, GammaParams,
};
use crate::config::{validate_scan_probs, SamplerConfig, SamplerKind};
use crate::error::{Error, Result};
use crate::gig::GigParams;
use crate::linalg::Vector;
use crate::model::{ChainState, Hyperparameters, MixedModelData, TauVector};

/// Maximum number of θ redraws when a draw hits `β_j = 0` exactly.
pub const MAX_THETA_REDRAWS: usize = 100;

/// Deliberate kernel defects, used to check that the correctness tests can
/// see them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Fault {
    /// λ₀ shape one larger than it should be.
    WrongLambda0Shape,
    /// τ drawn with order `c + 1/2` instead of `c − 1/2`.
    WrongGigOrder,
    /// Hybrid only: both the θ draw and the λ draw are made from the pre-step
    /// state and both are kept.
    CrossedBranches,
    /// Hybrid only: the θ branch is taken with probability `1 − r`. This is the
    /// hybrid kernel with `r` replaced by `1 − r`, so it leaves the posterior
    /// invariant and is not detectable.
    SwappedBranches,
}

/// Whether conditionals are sampled or replaced by their means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DrawMode {
    #[default]
    Sample,
    Mean,
}

/// Which block(s) a step refreshed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Theta,
    Lambda,
    Tau,
    Sweep,
}

#[derive(Debug, Clone)]
pub struct Step {
    pub state: ChainState,
    pub tau: TauVector,
    pub branch: Branch,
    pub redraws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    kind: SamplerKind,
    r: f64,
    scan_probs: [f64; 3],
    fault: Option<Fault>,
    draw_mode: DrawMode,
}

impl Kernel {
    pub fn hybrid(r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::validation(format!("r must lie in (0, 1), got {r}")));
        }
        Ok(Self {
            kind: SamplerKind::Hybrid,
            r,
            scan_probs: [1.0 / 3.0; 3],
            fault: None,
            draw_mode: DrawMode::Sample,
        })
    }

    pub fn gibbs() -> Self {
        Self {
            kind: SamplerKind::GibbsDeterministic,
            r: 0.5,
            scan_probs: [1.0 / 3.0; 3],
            fault: None,
            draw_mode: DrawMode::Sample,
        }
    }

    /// Random-scan Gibbs selecting `(τ, θ, λ)` with probabilities `probs`.
    pub fn random_scan(probs: [f64; 3]) -> Result<Self> {
        validate_scan_probs(&probs)?;
        Ok(Self {
            kind: SamplerKind::GibbsRandomScan,
            r: 0.5,
            scan_probs: probs,
            fault: None,
            draw_mode: DrawMode::Sample,
        })
    }

    pub fn from_config(cfg: &SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        match cfg.kind {
            SamplerKind::Hybrid => Self::hybrid(cfg.r.expect("validated")),
            SamplerKind::GibbsDeterministic => Ok(Self::gibbs()),
            SamplerKind::GibbsRandomScan => Self::random_scan(cfg.scan_probs.unwrap_or([1.0 / 3.0; 3])),
        }
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.fault = Some(fault);
        self
    }

    pub fn with_draw_mode(mut self, mode: DrawMode) -> Self {
        self.draw_mode = mode;
        self
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn fault(&self) -> Option<Fault> {
        self.fault
    }

    /// One transition. `tau` is the current auxiliary vector; the hybrid
    /// kernel ignores it and draws a fresh one.
    pub fn step<R: Rng + ?Sized>(
        &self,
        model: &MixedModelData,
        hyper: &Hyperparameters,
        state: &ChainState,
        tau: &TauVector,
        rng: &mut R,
    ) -> Result<Step> {
        match self.kind {
            SamplerKind::Hybrid => self.hybrid_step(model, hyper, state, rng),
            SamplerKind::GibbsDeterministic => self.gibbs_step(model, hyper, state, rng),
            SamplerKind::GibbsRandomScan => {
                let u: f64 = rng.random();
                let pick = if u < self.scan_probs[0] {
                    Branch::Tau
                } else if u < self.scan_probs[0] + self.scan_probs[1] {
                    Branch::Theta
                } else {
                    Branch::Lambda
                };
                self.random_scan_step_with(model, hyper, state, tau, pick, rng)
            }
        }
    }

    /// Hybrid step with a fresh `τ` and an independent uniform.
    pub fn hybrid_step<R: Rng + ?Sized>(
        &self,
        model: &MixedModelData,
        hyper: &Hyperparameters,
        state: &ChainState,
        rng: &mut R,
    ) -> Result<Step> {
        let tau = self.draw_tau(hyper, state, rng)?;
        let u: f64 = rng.random();
        self.hybrid_step_with_tau_u(model, hyper, state, tau, u, rng)
    }

    /// Remainder of a hybrid step once `τ` and the branch uniform `u` are fixed.
    pub fn hybrid_step_with_tau_u<R: Rng + ?Sized>(
        &self,
        model: &MixedModelData,
        hyper: &Hyperparameters,
        state: &ChainState,
        tau: TauVector,
        u: f64,
        rng: &mut R,
    ) -> Result<Step> {
        let theta_branch = match self.fault {
            Some(Fault::SwappedBranches) => u >= self.r,
            _ => u < self.r,
        };
        if self.fault == Some(Fault::CrossedBranches) && theta_branch {
            let (beta, uvec, redraws) = self.draw_theta(model, &state.lambda, &tau, rng)?;
            let lambda = self.draw_lambda(model, hyper, &state.beta, &state.u, &tau, rng);
            return Ok(Step {
                state: ChainState { beta, u: uvec, lambda },
                tau,
                branch: Branch::Sweep,
                redraws,
            });
        }
        if theta_branch {
            let (beta, u, redraws) = self.draw_theta(model, &state.lambda, &tau, rng)?;
            Ok(Step {
                state: ChainState {
                    beta,
                    u,
                    lambda: state.lambda.clone(),
                },
                tau,
                branch: Branch::Theta,
                redraws,
            })
        } else {
            let lambda = self.draw_lambda(model, hyper, &state.beta, &state.u, &tau, rng);
            Ok(Step {
                state: ChainState {
                    beta: state.beta.clone(),
                    u: state.u.clone(),
                    lambda,
                },
                tau,
                branch: Branch::Lambda,
                redraws: 0,
            })
        }
    }

    /// Deterministic scan `τ → θ → λ`.
    pub fn gibbs_step<R: Rng + ?Sized>(
        &self,
        model: &MixedModelData,
        hyper: &Hyperparameters,
        state: &ChainState,
        rng: &mut R,
    ) -> Result<Step> {
        let tau = self.draw_tau(hyper, state, rng)?;
        let (beta, u, redraws) = self.draw_theta(model, &state.lambda, &tau, rng)?;
        let lambda = self.draw_lambda(model, hyper, &beta, &u, &tau, rng);
        Ok(Step {
            state: ChainState { beta, u, lambda },
            tau,
            branch: Branch::Sweep,
            redraws,
        })
    }

    /// Random-scan update of the block `pick`.
    pub fn random_scan_step_with<R: Rng + ?Sized>(
        &self,
        model: &MixedModelData,
        hyper: &Hyperparameters,
        state: &ChainState,
        tau: &TauVector,
        pick: Branch,
        rng: &mut R,
    ) -> Result<Step> {
        match pick {
            Branch::Tau => Ok(Step {
                state: state.clone(),
                tau: self.draw_tau(hyper, state, rng)?,
                branch: Branch::Tau,
                redraws: 0,
            }),
            Branch::Theta => {
                let (beta, u, redraws) = self.draw_theta(model, &state.lambda, tau, rng)?;
                Ok(Step {
                    state: ChainState {
                        beta,
                        u,
                        lambda: state.lambda.clone(),
                    },
                    tau: tau.clone(),
                    branch: Branch::Theta,
                    redraws,
                })
            }
            Branch::Lambda => Ok(Step {
                state: ChainState {
                    beta: state.beta.clone(),
                    u: state.u.clone(),
                    lambda: self.draw_lambda(model, hyper, &state.beta, &state.u, tau, rng),
                },
                tau: tau.clone(),
                branch: Branch::Lambda,
                redraws: 0,
            }),
            Branch::Sweep => Err(Error::validation("random scan updates a single block")),
        }
    }

    /// `τ | θ, λ`, with the fault hook applied.
    pub fn tau_params(&self, hyper: &Hyperparameters, state: &ChainState) -> Result<Vec<GigParams>> {
        let mut params = tau_conditional(hyper, &state.beta, state.lambda0())?;
        if self.fault == Some(Fault::WrongGigOrder) {
            for g in &mut params {
                g.zeta = hyper.c + 0.5;
            }
        }
        Ok(params)
    }

    pub fn draw_tau<R: Rng + ?Sized>(
        &self,
        hyper: &Hyperparameters,
        state: &ChainState,
        rng: &mut R,
    ) -> Result<TauVector> {
        let params = self.tau_params(hyper, state)?;
        match self.draw_mode {
            DrawMode::Sample => crate::conditionals::sample_tau(&params, rng),
            DrawMode::Mean => TauVector::new(Vector::from_iterator(params.len(), params.iter().map(|g| g.moment(1.0)))),
        }
    }

    fn draw_theta<R: Rng + ?Sized>(
        &self,
        model: &MixedModelData,
        lambda: &Vector,
        tau: &TauVector,
        rng: &mut R,
    ) -> Result<(Vector, Vector, usize)> {
        let ops = build_operators(model, tau, lambda)?;
        let moments = theta_moments(model, &ops)?;
        match self.draw_mode {
            DrawMode::Sample => draw_nonzero_beta(|| sample_theta(&moments, rng)),
            DrawMode::Mean => draw_nonzero_beta(|| (moments.beta_mean(), moments.u_mean())),
        }
    }

    pub fn lambda_params(
        &self,
        model: &MixedModelData,
        hyper: &Hyperparameters,
        beta: &Vector,
        u: &Vector,
        tau: &TauVector,
    ) -> Vec<GammaParams> {
        let mut params = lambda_conditional(model, hyper, beta, u, tau);
        if self.fault == Some(Fault::WrongLambda0Shape) {
            params[0].shape += 1.0;
        }
        params
    }

    fn draw_lambda<R: Rng + ?Sized>(
        &self,
        model: &MixedModelData,
        hyper: &Hyperparameters,
        beta: &Vector,
        u: &Vector,
        tau: &TauVector,
        rng: &mut R,
    ) -> Vector {
        let params = self.lambda_params(model, hyper, beta, u, tau);
        match self.draw_mode {
            DrawMode::Sample => sample_lambda(&params, rng),
            DrawMode::Mean => Vector::from_iterator(params.len(), params.iter().map(GammaParams::mean)),
        }
    }
}

/// Calls `draw` until the β part has no exact zero, at most
/// [`MAX_THETA_REDRAWS`] extra times. Returns the number of redraws.
pub fn draw_nonzero_beta<F>(mut draw: F) -> Result<(Vector, Vector, usize)>
where
    F: FnMut() -> (Vector, Vector),
{
    for redraws in 0..=MAX_THETA_REDRAWS {
        let (beta, u) = draw();
        if beta.iter().all(|b| *b != 0.0) {
            return Ok((beta, u, redraws));
        }
    }
    Err(Error::Sampler(format!(
        "theta draw kept producing beta_j = 0 after {MAX_THETA_REDRAWS} redraws"
    )))
}

/// Default starting point: `λ` from its prior, `u ~ N(0, Λ⁻¹)`, `β = 1`.
pub fn default_init<R: Rng + ?Sized>(model: &MixedModelData, hyper: &Hyperparameters, rng: &mut R) -> ChainState {
    let lambda = Vector::from_iterator(
        model.m() + 1,
        (0..=model.m()).map(|i| GammaParams { shape: hyper.a[i], rate: hyper.b[i] }.sample(rng)),
    );
    let mut u = Vector::zeros(model.q());
    for i in 0..model.m() {
        let sd = lambda[i + 1].powf(-0.5);
        let normal = Normal::new(0.0, sd).expect("finite sd");
        for k in model.block_range(i) {
            u[k] = normal.sample(rng);
        }
    }
    ChainState {
        beta: Vector::from_element(model.p(), 1.0),
        u,
        lambda,
    }
}

/// The generator used for a chain: ChaCha8 seeded from `seed`, on stream
/// `stream`.
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BranchCounts {
    pub theta: u64,
    pub lambda: u64,
    pub tau: u64,
    pub sweep: u64,
}

impl BranchCounts {
    fn record(&mut self, b: Branch) {
        match b {
            Branch::Theta => self.theta += 1,
            Branch::Lambda => self.lambda += 1,
            Branch::Tau => self.tau += 1,
            Branch::Sweep => self.sweep += 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainMeta {
    pub config: SamplerConfig,
    pub stream: u64,
    pub steps: u64,
    pub wall_time_secs: f64,
    /// Every move is a Gibbs-type draw, so this is always 1.
    pub acceptance_rate: f64,
    pub branch_counts: BranchCounts,
    pub theta_redraws: u64,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub states: Vec<ChainState>,
    /// τ at every stored state, only when requested.
    pub taus: Vec<TauVector>,
    pub tau_last: TauVector,
    pub meta: ChainMeta,
    dims: (usize, usize, usize),
}

impl ChainOutput {
    /// `(p, q, m)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }
}

/// Runs `cfg.burnin + cfg.iterations` steps from `init` and stores every
/// `thin`-th post-burnin state.
pub fn run_chain(
    model: &MixedModelData,
    hyper: &Hyperparameters,
    init: ChainState,
    cfg: &SamplerConfig,
) -> Result<ChainOutput> {
    let kernel = Kernel::from_config(cfg)?;
    run_chain_with(model, hyper, init, &kernel, cfg, 0)
}

/// As [`run_chain`] with an explicit kernel and rng stream.
pub fn run_chain_with(
    model: &MixedModelData,
    hyper: &Hyperparameters,
    init: ChainState,
    kernel: &Kernel,
    cfg: &SamplerConfig,
    stream: u64,
) -> Result<ChainOutput> {
    cfg.validate()?;
    hyper.check_against(model)?;
    init.check_against(model)?;
    let init = ChainState::new(init.beta, init.u, init.lambda)?;
    let started = Instant::now();
    let mut rng = chain_rng(cfg.seed, stream);

    let mut state = init;
    let mut tau = kernel.draw_tau(hyper, &state, &mut rng)?;
    let mut counts = BranchCounts::default();
    let mut redraws = 0u64;
    let mut states = Vec::with_capacity(cfg.iterations / cfg.thin);
    let mut taus = Vec::new();
    let total = cfg.burnin + cfg.iterations;
    for it in 0..total {
        let step = kernel
            .step(model, hyper, &state, &tau, &mut rng)
            .map_err(|e| Error::ChainAborted {
                iteration: it,
                source: Box::new(e),
            })?;
        counts.record(step.branch);
        redraws += step.redraws as u64;
        state = step.state;
        tau = step.tau;
        if it >= cfg.burnin && (it - cfg.burnin + 1) % cfg.thin == 0 {
            states.push(state.clone());
            if cfg.store_tau {
                taus.push(tau.clone());
            }
        }
    }
    Ok(ChainOutput {
        states,
        taus,
        tau_last: tau,
        meta: ChainMeta {
            config: cfg.clone(),
            stream,
            steps: total as u64,
            wall_time_secs: started.elapsed().as_secs_f64(),
            acceptance_rate: 1.0,
            branch_counts: counts,
            theta_redraws: redraws,
        },
        dims: (model.p(), model.q(), model.m()),
    })
}

/// Runs `chains` independent chains concurrently; chain `k` uses rng stream
/// `k` and its own default initial state.
pub fn run_chains(
    model: &MixedModelData,
    hyper: &Hyperparameters,
    cfg: &SamplerConfig,
    chains: usize,
) -> Result<Vec<ChainOutput>> {
    let kernel = Kernel::from_config(cfg)?;
    (0..chains as u64)
        .into_par_iter()
        .map(|k| {
            // initial states come from a stream disjoint from the chain streams
            let mut init_rng = chain_rng(cfg.seed, u64::MAX - k);
            let init = default_init(model, hyper, &mut init_rng);
            run_chain_with(model, hyper, init, &kernel, cfg, k)
        })
        .collect()
}
