//! FlowADMM, the PnP-Flow forward-backward baseline, and the closed-form
//! convergence analysis available for Gaussian priors.

mod analysis;
mod pnp;
mod trace;

pub use analysis::{
    affine_admm_spectral_radius, gaussian_admm_fixed_point, prop1_tau_lower_bound, prop2_schedule_check,
    AdmmFixedPoint, Prop2Report,
};
pub use pnp::{pnp_flow_run, PnpConfig, StepSchedule};
pub use trace::{IterRecord, RunTrace, Snapshot};

use serde::{Deserialize, Serialize};

use crate::bench::psnr;
use crate::error::{Error, Result};
use crate::operators::LinearOp;
use crate::prior::FlowPrior;
use crate::renoise::{DenoiseMode, MeanDenoiser, SampleSchedule, TimeSchedule};
use crate::tensor::{SeededRng, Tensor};

/// ADMM state `(x_k, z_k, u_k)` with `u` the scaled dual variable.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: Tensor,
    pub z: Tensor,
    pub u: Tensor,
    pub k: usize,
}

impl AdmmState {
    /// `x₀ = z₀ = Aᵀy`, `u₀ = 0`.
    pub fn init(op: &dyn LinearOp, y: &Tensor) -> Result<Self> {
        let aty = op.adjoint(y)?;
        Ok(Self {
            u: aty.zeros_like(),
            x: aty.clone(),
            z: aty,
            k: 0,
        })
    }

    fn max_norm(&self) -> f64 {
        self.x.norm().max(self.z.norm()).max(self.u.norm())
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.z.is_finite() && self.u.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Data-term step `τ = 1/ρ`.
    pub tau: f64,
    pub iterations: usize,
    pub time: TimeSchedule,
    pub samples: SampleSchedule,
    pub mode: DenoiseMode,
    pub seed: u64,
    /// Store `(x, z, u)` every this many iterations.
    #[serde(default)]
    pub snapshot_every: Option<usize>,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::param(format!("tau must be > 0, got {}", self.tau)));
        }
        if self.iterations == 0 {
            return Err(Error::param("iterations K must be >= 1"));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::param("snapshot_every must be >= 1"));
        }
        self.time.validate()?;
        self.samples.validate()
    }
}

/// One FlowADMM update:
/// `x ← prox(z − u)`, `z ← S̄_{t}(x + u)`, `u ← u + x − z`.
pub fn flow_admm_step(
    state: &AdmmState,
    prox: &dyn Fn(&Tensor) -> Result<Tensor>,
    mean_denoise: &mut dyn FnMut(f64, &Tensor, usize) -> Result<Tensor>,
    t_k: f64,
    n_k: usize,
) -> Result<AdmmState> {
    let x = prox(&state.z.sub(&state.u)?)?;
    let z = mean_denoise(t_k, &x.add(&state.u)?, n_k)?;
    let mut u = state.u.clone();
    u.axpy_in_place(1.0, &x)?;
    u.axpy_in_place(-1.0, &z)?;
    Ok(AdmmState {
        x,
        z,
        u,
        k: state.k + 1,
    })
}

pub(crate) fn divergence_threshold(op: &dyn LinearOp, y: &Tensor) -> Result<f64> {
    Ok(1e8 * (1.0 + op.adjoint(y)?.norm()))
}

/// Runs FlowADMM for `cfg.iterations` steps and calls `observe` after each.
pub(crate) fn admm_loop(
    op: &dyn LinearOp,
    y: &Tensor,
    prior: &FlowPrior,
    cfg: &SolverConfig,
    observe: &mut dyn FnMut(&AdmmState),
) -> Result<(AdmmState, usize)> {
    cfg.validate()?;
    let denoiser = MeanDenoiser::new(prior.clone(), cfg.mode)?;
    let mut rng = SeededRng::new(cfg.seed);
    let limit = divergence_threshold(op, y)?;
    let prox = |v: &Tensor| op.prox(v, y, cfg.tau);
    let mut evals = 0usize;
    let mut state = AdmmState::init(op, y)?;
    for k in 0..cfg.iterations {
        let t_k = cfg.time.eval(k, cfg.iterations)?;
        let n_k = cfg.samples.eval(k, cfg.iterations);
        let mut md = |t: f64, v: &Tensor, n: usize| {
            let (out, used) = denoiser.apply(t, v, n, &mut rng)?;
            evals += used;
            Ok(out)
        };
        state = flow_admm_step(&state, &prox, &mut md, t_k, n_k)?;
        let norm = state.max_norm();
        if !state.is_finite() || norm > limit {
            return Err(Error::Diverged {
                iteration: state.k,
                norm,
            });
        }
        observe(&state);
    }
    Ok((state, evals))
}

/// FlowADMM from `x₀ = z₀ = Aᵀy`, `u₀ = 0`; returns `z_K` and the trace.
/// When `ground_truth` is given, the trace records the PSNR of the clipped `z_k`.
pub fn flow_admm_run(
    op: &dyn LinearOp,
    y: &Tensor,
    prior: &FlowPrior,
    cfg: &SolverConfig,
    ground_truth: Option<&Tensor>,
) -> Result<(Tensor, RunTrace)> {
    let mut trace = RunTrace::default();
    let mut prev_z = op.adjoint(y)?;
    let mut failure = None;
    let (state, evals) = admm_loop(op, y, prior, cfg, &mut |s| {
        let k = s.k - 1;
        let record = (|| -> Result<IterRecord> {
            Ok(IterRecord {
                k,
                t: cfg.time.eval(k, cfg.iterations)?,
                n: cfg.samples.eval(k, cfg.iterations),
                primal_residual: s.x.sub(&s.z)?.norm(),
                dz: s.z.sub(&prev_z)?.norm(),
                u_norm: s.u.norm(),
                psnr: match ground_truth {
                    Some(gt) => Some(psnr(&s.z.clamp(0.0, 1.0), gt, 1.0)?),
                    None => None,
                },
            })
        })();
        match record {
            Ok(r) => trace.records.push(r),
            Err(e) => {
                failure.get_or_insert(e);
            }
        }
        if cfg.snapshot_every.is_some_and(|every| s.k % every == 0) {
            trace.snapshots.push(Snapshot {
                k: s.k,
                x: s.x.clone(),
                z: s.z.clone(),
                u: s.u.clone(),
            });
        }
        prev_z = s.z.clone();
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    trace.denoiser_evals = evals;
    trace.final_x = Some(state.x);
    trace.final_u = Some(state.u);
    Ok((state.z, trace))
}
