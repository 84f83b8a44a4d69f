use crate::error::{Error, Result};
use crate::operators::image_dims;
use crate::tensor::{mse, Tensor};

/// Reported PSNR for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

/// `10 log₁₀(peak² / mse)`, capped at [`PSNR_CAP_DB`].
pub fn psnr(x: &Tensor, reference: &Tensor, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::param(format!("peak must be > 0, got {peak}")));
    }
    let e = mse(x, reference)?;
    if e == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / e).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Valid-mode separable filtering of an `h×w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = (0..k).map(|j| g[j] * plane[r * w + c + j]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..k).map(|i| g[i] * rows[(r + i) * ow + c]).sum();
        }
    }
    out
}

/// Mean local SSIM with an 11×11 Gaussian window (σ = 1.5) and peak 1,
/// averaged over channels.
pub fn ssim(x: &Tensor, reference: &Tensor) -> Result<f64> {
    ssim_with_peak(x, reference, 1.0)
}

pub fn ssim_with_peak(x: &Tensor, reference: &Tensor, peak: f64) -> Result<f64> {
    x.ensure_same_shape(reference)?;
    let (c, h, w) = image_dims(x.shape())?;
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::param(format!(
            "SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let g = gaussian_window();
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let plane = h * w;
    let mut total = 0.0;
    for ch in 0..c {
        let a = &x.data()[ch * plane..(ch + 1) * plane];
        let b = &reference.data()[ch * plane..(ch + 1) * plane];
        let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| f(*p, *q)).collect() };
        let mu_a = filter_valid(a, h, w, &g);
        let mu_b = filter_valid(b, h, w, &g);
        let aa = filter_valid(&prod(&|p, _| p * p), h, w, &g);
        let bb = filter_valid(&prod(&|_, q| q * q), h, w, &g);
        let ab = filter_valid(&prod(&|p, q| p * q), h, w, &g);
        let n = mu_a.len();
        let mut acc = 0.0;
        for i in 0..n {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total += acc / n as f64;
    }
    Ok(total / c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{sample_standard_normal, SeededRng};

    #[test]
    fn psnr_examples() {
        let x = Tensor::full(&[4, 4], 0.5).unwrap();
        assert_eq!(psnr(&x, &x, 1.0).unwrap(), PSNR_CAP_DB);
        let y = x.map(|v| v + 0.1);
        assert!((psnr(&y, &x, 1.0).unwrap() - 20.0).abs() < 1e-12);
        let (a, b) = (x.map(|v| 3.0 * v + 1.0), y.map(|v| 3.0 * v + 1.0));
        assert!((psnr(&b, &a, 3.0).unwrap() - 20.0).abs() < 1e-10);
        assert!(psnr(&x, &Tensor::zeros(&[16]).unwrap(), 1.0).is_err());
    }

    #[test]
    fn ssim_identity_and_inversion() {
        let mut rng = SeededRng::new(3);
        let x = sample_standard_normal(&mut rng, &[1, 16, 16]).unwrap().map(|v| (0.5 + 0.2 * v).clamp(0.0, 1.0));
        assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-12);

        let checker = Tensor::from_vec((0..256).map(|i| ((i / 16 + i % 16) % 2) as f64).collect(), &[16, 16]).unwrap();
        let inv = checker.map(|v| 1.0 - v);
        assert!(ssim(&checker, &inv).unwrap() < 0.0);
        assert!(ssim(&Tensor::zeros(&[8, 8]).unwrap(), &Tensor::zeros(&[8, 8]).unwrap()).is_err());
    }

    #[test]
    fn ssim_drops_with_noise() {
        let img = Tensor::from_vec(
            (0..32 * 32).map(|i| 0.5 + 0.3 * ((i % 32) as f64 / 5.0).sin() * ((i / 32) as f64 / 7.0).cos()).collect(),
            &[1, 32, 32],
        )
        .unwrap();
        let noise = sample_standard_normal(&mut SeededRng::new(8), &[1, 32, 32]).unwrap();
        let scores: Vec<f64> = [0.05, 0.1, 0.2]
            .iter()
            .map(|&s| {
                let mut y = img.clone();
                y.axpy_in_place(s, &noise).unwrap();
                ssim(&y, &img).unwrap()
            })
            .collect();
        assert!(scores[0] > scores[1] && scores[1] > scores[2], "{scores:?}");
    }
}
