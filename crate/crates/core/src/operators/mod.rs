//! Linear forward operators `A`, their adjoints, and the quadratic data prox
//! `argmin_x ½‖x − v‖² + (μ/2)‖Ax − y‖²`.
//!
//! Every imaging task here factors as `A = Qᵀ Λ P` with orthogonal `P`, `Q`
//! and diagonal `Λ` ([`DiagonalizableOp`]), which makes the prox element-wise.
//! Operators without such a factorization fall back to conjugate gradients on
//! the normal equations ([`prox_data_cg`]).

mod cg;
mod dense;
mod diag;
pub mod fft;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use cg::{prox_data_cg, CgOutcome};
pub use dense::DenseOp;
pub use diag::{prox_data_closed_form, Basis, DiagonalizableOp, OpKind};

/// Default CG settings used when an operator has no closed-form prox.
pub const CG_FALLBACK_TOL: f64 = 1e-10;
pub const CG_FALLBACK_MAX_ITERS: usize = 2000;

pub trait LinearOp: Send + Sync {
    fn input_shape(&self) -> &[usize];
    fn output_shape(&self) -> &[usize];
    fn apply(&self, x: &Tensor) -> Result<Tensor>;
    fn adjoint(&self, y: &Tensor) -> Result<Tensor>;

    /// `prox_{μF_y}(v)` for `F_y = ½‖A· − y‖²`. Defaults to CG.
    fn prox(&self, v: &Tensor, y: &Tensor, mu: f64) -> Result<Tensor> {
        prox_data_cg(self, v, y, mu, CG_FALLBACK_TOL, CG_FALLBACK_MAX_ITERS).map(|o| o.x)
    }

    /// Smallest eigenvalue of `AᵀA` when it is cheaply known.
    fn min_eig_ata(&self) -> Option<f64> {
        None
    }
}

/// Forward-operator description as it appears in task configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskOpSpec {
    Identity,
    GaussianBlur { kernel_size: usize, sigma_blur: f64 },
    Subsample { stride: usize },
    BoxMask { half_size: usize },
    BernoulliMask { missing_prob: f64, mask_seed: u64 },
}

impl TaskOpSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskOpSpec::Identity => "identity",
            TaskOpSpec::GaussianBlur { .. } => "gaussian_blur",
            TaskOpSpec::Subsample { .. } => "subsample",
            TaskOpSpec::BoxMask { .. } => "box_mask",
            TaskOpSpec::BernoulliMask { .. } => "bernoulli_mask",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TaskOpSpec::Identity | TaskOpSpec::BoxMask { .. } => Ok(()),
            TaskOpSpec::GaussianBlur {
                kernel_size,
                sigma_blur,
            } => {
                if kernel_size % 2 == 0 {
                    return Err(Error::param(format!("kernel_size must be odd, got {kernel_size}")));
                }
                if !(sigma_blur > 0.0 && sigma_blur.is_finite()) {
                    return Err(Error::param(format!("sigma_blur must be > 0, got {sigma_blur}")));
                }
                Ok(())
            }
            TaskOpSpec::Subsample { stride } => {
                if stride == 0 {
                    return Err(Error::param("stride must be at least 1"));
                }
                Ok(())
            }
            TaskOpSpec::BernoulliMask { missing_prob, .. } => {
                if !(0.0..1.0).contains(&missing_prob) {
                    return Err(Error::param(format!(
                        "missing_prob must lie in [0, 1), got {missing_prob}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn build(&self, shape: &[usize]) -> Result<DiagonalizableOp> {
        self.validate()?;
        match *self {
            TaskOpSpec::Identity => DiagonalizableOp::identity(shape),
            TaskOpSpec::GaussianBlur {
                kernel_size,
                sigma_blur,
            } => DiagonalizableOp::gaussian_blur(shape, kernel_size, sigma_blur),
            TaskOpSpec::Subsample { stride } => DiagonalizableOp::subsample(shape, stride),
            TaskOpSpec::BoxMask { half_size } => DiagonalizableOp::box_mask(shape, half_size),
            TaskOpSpec::BernoulliMask {
                missing_prob,
                mask_seed,
            } => DiagonalizableOp::bernoulli_mask(shape, missing_prob, mask_seed),
        }
    }
}

/// Splits an image shape into `(channels, height, width)`.
/// Accepts `[H, W]` and `[C, H, W]`.
pub(crate) fn image_dims(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match *shape {
        [h, w] if h > 0 && w > 0 => Ok((1, h, w)),
        [c, h, w] if c > 0 && h > 0 && w > 0 => Ok((c, h, w)),
        _ => Err(Error::Unsupported(format!(
            "image operator needs a [H,W] or [C,H,W] shape, got {shape:?}"
        ))),
    }
}
