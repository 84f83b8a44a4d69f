use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{DiagonalizableOp, LinearOp, TaskOpSpec};
use crate::tensor::{sample_standard_normal, SeededRng, Tensor};

/// A measurement model `y = A x + ν`, `ν ~ N(0, σ² I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub op: TaskOpSpec,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// The five restoration problems at 32×32, as `(name, task)`.
/// `large_scale` selects the variant with wider blur, coarser subsampling
/// and a larger box.
pub fn desk_tasks(large_scale: bool, seed: u64) -> Vec<(&'static str, TaskSpec)> {
    let task = |op, noise_sigma| TaskSpec { op, noise_sigma, seed };
    vec![
        ("denoising", task(TaskOpSpec::Identity, 0.2)),
        (
            "deblurring",
            task(
                TaskOpSpec::GaussianBlur {
                    kernel_size: 15,
                    sigma_blur: if large_scale { 0.75 } else { 0.25 },
                },
                0.05,
            ),
        ),
        (
            "super_resolution",
            task(TaskOpSpec::Subsample { stride: if large_scale { 4 } else { 2 } }, 0.05),
        ),
        (
            "random_inpainting",
            task(
                TaskOpSpec::BernoulliMask {
                    missing_prob: 0.7,
                    mask_seed: 0x6d61736b,
                },
                0.01,
            ),
        ),
        (
            "box_inpainting",
            task(TaskOpSpec::BoxMask { half_size: if large_scale { 10 } else { 5 } }, 0.05),
        ),
    ]
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::param(format!("noise_sigma must be finite and >= 0, got {}", self.noise_sigma)));
        }
        self.op.validate()
    }

    pub fn build(&self, shape: &[usize]) -> Result<DiagonalizableOp> {
        self.validate()?;
        self.op.build(shape)
    }

    /// Noise stream for image `index`; the same image always sees the same noise.
    pub fn image_rng(&self, index: usize) -> SeededRng {
        SeededRng::with_stream(self.seed, index as u64)
    }
}

/// `A x + ν`. Noise is drawn for every output entry and zeroed where a mask
/// hides the pixel, so masked entries of `y` are exactly zero.
pub fn degrade(x: &Tensor, task: &TaskSpec, rng: &mut SeededRng) -> Result<Tensor> {
    let op = task.build(x.shape())?;
    degrade_with(&op, x, task.noise_sigma, rng)
}

pub fn degrade_with(op: &DiagonalizableOp, x: &Tensor, noise_sigma: f64, rng: &mut SeededRng) -> Result<Tensor> {
    let mut y = op.apply(x)?;
    if noise_sigma == 0.0 {
        return Ok(y);
    }
    let mut noise = sample_standard_normal(rng, y.shape())?;
    if let Some(mask) = op.pixel_mask_tensor().filter(|m| m.shape() == y.shape()) {
        noise = noise.zip_map(&mask, |n, m| n * m)?;
    }
    y.axpy_in_place(noise_sigma, &noise)?;
    Ok(y)
}

/// The naive reconstruction scored as "degraded": `y` itself when it lives in
/// image space, otherwise the zero-filled `Aᵀy`.
pub fn degraded_view(op: &DiagonalizableOp, y: &Tensor) -> Result<Tensor> {
    if op.input_shape() == op.output_shape() {
        Ok(y.clone())
    } else {
        op.adjoint(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_identity_is_exact() {
        let x = Tensor::from_vec((0..16).map(|i| i as f64 / 16.0).collect(), &[4, 4]).unwrap();
        let task = TaskSpec { op: TaskOpSpec::Identity, noise_sigma: 0.0, seed: 1 };
        assert_eq!(degrade(&x, &task, &mut SeededRng::new(0)).unwrap(), x);
    }

    #[test]
    fn denoising_noise_level() {
        let x = Tensor::full(&[1, 64, 64], 0.5).unwrap();
        let task = TaskSpec { op: TaskOpSpec::Identity, noise_sigma: 0.2, seed: 9 };
        let y = degrade(&x, &task, &mut task.image_rng(0)).unwrap();
        let d = y.sub(&x).unwrap();
        let mean = d.mean();
        let std = (d.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.numel() - 1) as f64).sqrt();
        assert!((std - 0.2).abs() < 0.01, "{std}");
    }

    #[test]
    fn deblurring_residual_energy() {
        let x = Tensor::from_vec((0..64 * 64).map(|i| ((i * 7919) % 101) as f64 / 100.0).collect(), &[1, 64, 64]).unwrap();
        let (_, task) = desk_tasks(false, 4).swap_remove(1);
        let op = task.build(x.shape()).unwrap();
        let y = degrade(&x, &task, &mut task.image_rng(0)).unwrap();
        let r = y.sub(&op.apply(&x).unwrap()).unwrap();
        let per = r.norm().powi(2) / r.numel() as f64;
        assert!((per - 0.0025).abs() < 0.0003, "{per}");
    }

    #[test]
    fn masked_pixels_stay_zero() {
        let x = Tensor::full(&[1, 16, 16], 0.7).unwrap();
        for (name, task) in desk_tasks(false, 2) {
            let op = task.build(x.shape()).unwrap();
            let y = degrade(&x, &task, &mut task.image_rng(3)).unwrap();
            if let Some(mask) = op.pixel_mask_tensor().filter(|m| m.shape() == y.shape()) {
                for (v, m) in y.data().iter().zip(mask.data()) {
                    if *m == 0.0 {
                        assert_eq!(*v, 0.0, "{name}");
                    }
                }
            }
            assert_eq!(degraded_view(&op, &y).unwrap().shape(), x.shape());
        }
    }
}
