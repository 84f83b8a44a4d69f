use serde::{Deserialize, Serialize};

use crate::bench::psnr;
use crate::error::{Error, Result};
use crate::operators::LinearOp;
use crate::prior::FlowPrior;
use crate::renoise::{DenoiseMode, MeanDenoiser, SampleSchedule, TimeSchedule};
use crate::solvers::{divergence_threshold, IterRecord, RunTrace};
use crate::tensor::{SeededRng, Tensor};

/// Gradient step sizes `τ_k = lr · (1 − t_k)^α`; `α = 0` gives a constant step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSchedule {
    pub lr: f64,
    pub alpha: f64,
}

impl StepSchedule {
    pub fn eval(&self, t: f64) -> f64 {
        if self.alpha == 0.0 {
            self.lr
        } else {
            self.lr * (1.0 - t).powf(self.alpha)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PnpConfig {
    pub iterations: usize,
    pub step: StepSchedule,
    pub time: TimeSchedule,
    pub samples: SampleSchedule,
    pub mode: DenoiseMode,
    pub seed: u64,
}

impl PnpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::param("iterations K must be >= 1"));
        }
        if !(self.step.lr >= 0.0 && self.step.lr.is_finite() && self.step.alpha >= 0.0) {
            return Err(Error::param("step schedule needs lr >= 0 and alpha >= 0"));
        }
        self.time.validate()?;
        self.samples.validate()
    }
}

/// Forward-backward iteration with renoising:
/// `z = x − τ_k Aᵀ(Ax − y)`, then `x = mean of D_{t_k}(t_k z + (1 − t_k) ε)`
/// over `N_k` draws. Starts from `x₀ = Aᵀy` and returns `x_K`.
pub fn pnp_flow_run(
    op: &dyn LinearOp,
    y: &Tensor,
    prior: &FlowPrior,
    cfg: &PnpConfig,
    ground_truth: Option<&Tensor>,
) -> Result<(Tensor, RunTrace)> {
    cfg.validate()?;
    let denoiser = MeanDenoiser::new(prior.clone(), cfg.mode)?;
    let mut rng = SeededRng::new(cfg.seed);
    let limit = divergence_threshold(op, y)?;
    let mut x = op.adjoint(y)?;
    let mut trace = RunTrace::default();
    for k in 0..cfg.iterations {
        let t = cfg.time.eval(k, cfg.iterations)?;
        let n = cfg.samples.eval(k, cfg.iterations);
        let tau = cfg.step.eval(t);
        let grad = op.adjoint(&op.apply(&x)?.sub(y)?)?;
        let mut z = x.clone();
        z.axpy_in_place(-tau, &grad)?;
        let (next, used) = denoiser.apply(t, &z, n, &mut rng)?;
        trace.denoiser_evals += used;
        let norm = next.norm();
        if !next.is_finite() || norm > limit {
            return Err(Error::Diverged { iteration: k + 1, norm });
        }
        trace.records.push(IterRecord {
            k,
            t,
            n,
            primal_residual: next.sub(&z)?.norm(),
            dz: next.sub(&x)?.norm(),
            u_norm: 0.0,
            psnr: match ground_truth {
                Some(gt) => Some(psnr(&next.clamp(0.0, 1.0), gt, 1.0)?),
                None => None,
            },
        });
        x = next;
    }
    trace.final_x = Some(x.clone());
    Ok((x, trace))
}
