use crate::error::{Error, Result};
use crate::tensor::{SeededRng, Tensor};

/// Diagonal Gaussian `p₁ = N(μ, diag(σ²))`.
///
/// Zero variances are allowed and describe point masses, for which the
/// denoiser returns `μ` for every `t < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior {
    mean: Tensor,
    variance: Tensor,
    isotropic: bool,
}

impl GaussianPrior {
    pub fn isotropic(mean: Tensor, variance: f64) -> Result<Self> {
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::param(format!("variance must be finite and >= 0, got {variance}")));
        }
        let var = mean.map(|_| variance);
        Ok(Self {
            mean,
            variance: var,
            isotropic: true,
        })
    }

    pub fn diagonal(mean: Tensor, variance: Tensor) -> Result<Self> {
        mean.ensure_same_shape(&variance)?;
        if variance.data().iter().any(|&v| v < 0.0) {
            return Err(Error::param("variances must be >= 0"));
        }
        let first = variance.data()[0];
        let isotropic = variance.data().iter().all(|&v| v == first);
        Ok(Self {
            mean,
            variance,
            isotropic,
        })
    }

    pub fn mean(&self) -> &Tensor {
        &self.mean
    }

    pub fn variance(&self) -> &Tensor {
        &self.variance
    }

    pub fn is_isotropic(&self) -> bool {
        self.isotropic
    }

    pub fn shape(&self) -> &[usize] {
        self.mean.shape()
    }

    /// Posterior-mean slope `m_t = tσ² / (t²σ² + (1−t)²)` for one variance.
    pub fn shrinkage(t: f64, variance: f64) -> f64 {
        let denom = t * t * variance + (1.0 - t) * (1.0 - t);
        if denom == 0.0 {
            // t = 1 on a point mass; the continuous limit of D_1 is the identity
            return 1.0;
        }
        t * variance / denom
    }

    /// `E[x₁ | x_t] = μ + m_t (x_t − tμ)`, coordinate-wise.
    pub fn denoise(&self, t: f64, xt: &Tensor) -> Result<Tensor> {
        xt.ensure_same_shape(&self.mean)?;
        if t == 1.0 {
            return Ok(xt.clone());
        }
        let data = xt
            .data()
            .iter()
            .zip(self.mean.data())
            .zip(self.variance.data())
            .map(|((&x, &mu), &var)| mu + Self::shrinkage(t, var) * (x - t * mu))
            .collect();
        Ok(Tensor::from_parts(data, xt.shape().to_vec()))
    }

    /// `S̄_t(x) = μ + t·m_t (x − μ)`: the denoiser is affine and ε has zero
    /// mean, so the expectation over renoising is exact.
    pub fn mean_denoise(&self, t: f64, x: &Tensor) -> Result<Tensor> {
        x.ensure_same_shape(&self.mean)?;
        if t == 1.0 {
            return Ok(x.clone());
        }
        let data = x
            .data()
            .iter()
            .zip(self.mean.data())
            .zip(self.variance.data())
            .map(|((&x, &mu), &var)| mu + t * Self::shrinkage(t, var) * (x - mu))
            .collect();
        Ok(Tensor::from_parts(data, x.shape().to_vec()))
    }

    /// Per-coordinate standard deviation of a single renoise-denoise draw
    /// `D_t(t x + (1−t) ε)`, i.e. `m_t (1 − t)`.
    pub fn renoise_std(&self, t: f64) -> Tensor {
        self.variance.map(|var| Self::shrinkage(t, var) * (1.0 - t))
    }

    /// Spectral norm of the velocity Jacobian, `max_i |m_t,i − 1| / (1 − t)`.
    pub fn velocity_lipschitz(&self, t: f64) -> f64 {
        self.variance
            .data()
            .iter()
            .map(|&var| (Self::shrinkage(t, var) - 1.0).abs() / (1.0 - t))
            .fold(0.0, f64::max)
    }

    /// Exact Lipschitz constant of `R_t = S̄_t − I`, `max_i |t·m_t,i − 1|`.
    pub fn residual_lipschitz(&self, t: f64) -> f64 {
        self.variance
            .data()
            .iter()
            .map(|&var| (t * Self::shrinkage(t, var) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn sample(&self, rng: &mut SeededRng) -> Tensor {
        let data = self
            .mean
            .data()
            .iter()
            .zip(self.variance.data())
            .map(|(&mu, &var)| mu + var.sqrt() * rng.next_normal())
            .collect();
        Tensor::from_parts(data, self.mean.shape().to_vec())
    }
}
