//! The mean renoise-denoise operator `S̄_t(x) = E_ε[D_t(t x + (1 − t) ε)]`,
//! its Monte Carlo estimator, the residual `R_t = S̄_t − I`, iteration
//! schedules and Jacobian probes.

mod lipschitz;
mod schedule;

pub use lipschitz::{
    default_fd_step, jacobian_spectral_norm, spectral_norm_fd, DenseJacobian, GaussianVelocityJacobian,
    JacobianProbe, SpectralEstimate,
};
pub use schedule::{SampleSchedule, TimeSchedule};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::FlowPrior;
use crate::tensor::{sample_standard_normal, SeededRng, Tensor};

/// How `S̄_t` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Closed form, Gaussian priors only.
    Exact,
    /// `Ŝ_t^(N)` with `samples` renoised copies.
    MonteCarlo { samples: usize },
}

/// `μ + t·M_t (x − μ)` with `M_t = tΣ(t²Σ + (1 − t)² I)⁻¹`.
pub fn mean_denoise_exact_gaussian(prior: &FlowPrior, t: f64, x: &Tensor) -> Result<Tensor> {
    check_time(t)?;
    match prior {
        FlowPrior::Gaussian(g) => g.mean_denoise(t, x),
        other => Err(Error::Unsupported(format!(
            "closed-form mean denoiser needs a Gaussian prior, got {}",
            other.kind()
        ))),
    }
}

/// `Ŝ_t^(N)(x) = (1/N) Σᵢ D_t(t x + (1 − t) εᵢ)`.
///
/// Noise draws are taken from `rng` in index order before the denoiser calls
/// fan out, and the sum is reduced in index order, so the result depends only
/// on the rng state and `n`.
pub fn mean_denoise_mc(prior: &FlowPrior, t: f64, x: &Tensor, n: usize, rng: &mut SeededRng) -> Result<Tensor> {
    check_time(t)?;
    if n == 0 {
        return Err(Error::param("Monte Carlo sample count must be >= 1"));
    }
    if prior.numel() != x.numel() {
        return Err(Error::ShapeMismatch {
            expected: vec![prior.numel()],
            found: x.shape().to_vec(),
        });
    }
    let mut inputs = Vec::with_capacity(n);
    for _ in 0..n {
        let eps = sample_standard_normal(rng, x.shape())?;
        inputs.push(x.zip_map(&eps, |xi, e| t * xi + (1.0 - t) * e)?);
    }
    if t == 1.0 {
        return Ok(x.clone());
    }
    let outputs: Vec<Tensor> = if n >= 4 && x.numel() >= 64 {
        inputs
            .par_iter()
            .map(|xt| prior.denoise(t, xt))
            .collect::<Result<_>>()?
    } else {
        inputs.iter().map(|xt| prior.denoise(t, xt)).collect::<Result<_>>()?
    };
    let mut acc = vec![0.0; x.numel()];
    for d in &outputs {
        for (a, v) in acc.iter_mut().zip(d.data()) {
            *a += v;
        }
    }
    let inv = 1.0 / n as f64;
    Ok(Tensor::from_parts(acc.into_iter().map(|a| a * inv).collect(), x.shape().to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiseMode {
    ExactGaussian,
    MonteCarlo,
}

/// A prior paired with the way its mean denoiser is evaluated.
#[derive(Debug, Clone)]
pub struct MeanDenoiser {
    prior: FlowPrior,
    mode: DenoiseMode,
}

impl MeanDenoiser {
    pub fn new(prior: FlowPrior, mode: DenoiseMode) -> Result<Self> {
        if mode == DenoiseMode::ExactGaussian && prior.as_gaussian().is_none() {
            return Err(Error::Unsupported(format!(
                "exact mean denoiser needs a Gaussian prior, got {}",
                prior.kind()
            )));
        }
        Ok(Self { prior, mode })
    }

    pub fn prior(&self) -> &FlowPrior {
        &self.prior
    }

    pub fn mode(&self) -> DenoiseMode {
        self.mode
    }

    /// Evaluates `S̄_t(x)` with `n` samples (ignored in exact mode). Returns
    /// the estimate and the number of denoiser evaluations spent.
    pub fn apply(&self, t: f64, x: &Tensor, n: usize, rng: &mut SeededRng) -> Result<(Tensor, usize)> {
        match self.mode {
            DenoiseMode::ExactGaussian => Ok((mean_denoise_exact_gaussian(&self.prior, t, x)?, 0)),
            DenoiseMode::MonteCarlo => Ok((mean_denoise_mc(&self.prior, t, x, n, rng)?, n)),
        }
    }
}

/// `R_t(x) = S̄_t(x) − x` under the given estimator.
pub fn residual(prior: &FlowPrior, t: f64, x: &Tensor, estimator: Estimator, rng: &mut SeededRng) -> Result<Tensor> {
    let s = match estimator {
        Estimator::Exact => mean_denoise_exact_gaussian(prior, t, x)?,
        Estimator::MonteCarlo { samples } => mean_denoise_mc(prior, t, x, samples, rng)?,
    };
    s.sub(x)
}

/// Lipschitz constant of `R_t` implied by a velocity Lipschitz constant:
/// `(1 − t)(1 + t L_v)`.
pub fn lemma1_bound(t: f64, l_v: f64) -> f64 {
    (1.0 - t) * (1.0 + t * l_v)
}

#[derive(Debug, Clone)]
pub struct DeviationReport {
    pub points: Vec<Tensor>,
    /// `‖Ŝ_t(x) − x‖` for each drawn point.
    pub deviations: Vec<f64>,
    pub mean: f64,
    pub max: f64,
}

/// Draws `n_points` from the prior and measures how far the mean denoiser
/// moves each of them.
pub fn remark1_deviation(
    prior: &FlowPrior,
    t: f64,
    n_points: usize,
    estimator: Estimator,
    rng: &mut SeededRng,
) -> Result<DeviationReport> {
    if !prior.is_analytic() {
        return Err(Error::Unsupported("deviation study needs a prior that can be sampled".into()));
    }
    if n_points == 0 {
        return Err(Error::param("n_points must be >= 1"));
    }
    let mut points = Vec::with_capacity(n_points);
    let mut deviations = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let x = prior.sample(rng)?;
        deviations.push(residual(prior, t, &x, estimator, rng)?.norm());
        points.push(x);
    }
    let mean = deviations.iter().sum::<f64>() / n_points as f64;
    let max = deviations.iter().cloned().fold(0.0, f64::max);
    Ok(DeviationReport {
        points,
        deviations,
        mean,
        max,
    })
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param(format!("time {t} outside [0, 1]")));
    }
    Ok(())
}
