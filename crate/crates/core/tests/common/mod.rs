//! Test-side oracles shared by the integration suites. Nothing here calls the
//! library routine it is used to check.

#![allow(dead_code)]

use flowadmm::prior::{FlowPrior, GmmPrior};
use flowadmm::renoise::{lemma1_bound, mean_denoise_mc, spectral_norm_fd};
use flowadmm::{SeededRng, Tensor};
use nalgebra::DMatrix;

/// Posterior-mean slope `m_t = tσ² / (t²σ² + (1−t)²)` of a Gaussian prior.
pub fn gauss_m(t: f64, var: f64) -> f64 {
    t * var / (t * t * var + (1.0 - t) * (1.0 - t))
}

/// `‖J v_t‖₂ = |m_t − 1| / (1 − t)` for the Gaussian velocity.
pub fn gauss_lv(t: f64, var: f64) -> f64 {
    (gauss_m(t, var) - 1.0).abs() / (1.0 - t)
}

/// Fixed point of fixed-t FlowADMM for `A = I`, 1-D Gaussian `N(0, σ²)`:
/// `z* = y·aτ/(aτ + 1 − a)`, `u* = z*(1 − a)/a`, `a = t·m_t`.
pub fn identity_fixed_point(y: f64, t: f64, var: f64, tau: f64) -> (f64, f64) {
    let a = t * gauss_m(t, var);
    let z = y * a * tau / (a * tau + 1.0 - a);
    (z, z * (1.0 - a) / a)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Vec<f64> {
    (0..rows * cols).map(|_| rng.next_normal()).collect()
}

/// Largest singular value of a row-major matrix.
pub fn svd_norm(rows: usize, cols: usize, entries: &[f64]) -> f64 {
    let m = DMatrix::from_row_slice(rows, cols, entries);
    m.singular_values().max()
}

/// Largest eigenvalue modulus of a square row-major matrix.
pub fn eig_radius(n: usize, entries: &[f64]) -> f64 {
    let m = DMatrix::from_row_slice(n, n, entries);
    m.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

pub fn two_component_gmm() -> GmmPrior {
    GmmPrior::new(
        vec![0.35, 0.65],
        vec![Tensor::vector(vec![-1.0, 0.5]).unwrap(), Tensor::vector(vec![1.2, -0.4]).unwrap()],
        vec![Tensor::vector(vec![0.2, 0.1]).unwrap(), Tensor::vector(vec![0.15, 0.3]).unwrap()],
    )
    .unwrap()
}

pub struct Lemma1Gmm {
    pub t: f64,
    pub lv_hat: f64,
    pub bound: f64,
    pub max_ratio: f64,
}

/// For a 2-D GMM: `L̂_v` is the largest power-iteration estimate on a grid
/// covering the renoised region, and the residual ratios use common random
/// numbers so both points see the same noise draws.
pub fn gmm_lemma1_check(t: f64, pairs: usize, samples: usize, seed: u64) -> Lemma1Gmm {
    let prior = FlowPrior::Gmm(two_component_gmm());
    let mut lv_hat = 0.0f64;
    let g = 31;
    for i in 0..g {
        for j in 0..g {
            let p = Tensor::vector(vec![-3.0 + 6.0 * i as f64 / (g - 1) as f64, -3.0 + 6.0 * j as f64 / (g - 1) as f64]).unwrap();
            let field = |v: &Tensor| prior.velocity(t, v);
            lv_hat = lv_hat.max(spectral_norm_fd(&field, &p, 200, 1e-12, None).unwrap().value);
        }
    }
    let bound = lemma1_bound(t, lv_hat);
    let mut rng = SeededRng::new(seed);
    let mut max_ratio = 0.0f64;
    for k in 0..pairs {
        let x = Tensor::vector(vec![2.0 * rng.next_normal(), 2.0 * rng.next_normal()]).unwrap();
        let scale = if k % 2 == 0 { 1.0 } else { 0.05 };
        let y = Tensor::vector(vec![
            x.data()[0] + scale * rng.next_normal(),
            x.data()[1] + scale * rng.next_normal(),
        ])
        .unwrap();
        let stream = seed.wrapping_add(k as u64 + 1);
        let sx = mean_denoise_mc(&prior, t, &x, samples, &mut SeededRng::new(stream)).unwrap();
        let sy = mean_denoise_mc(&prior, t, &y, samples, &mut SeededRng::new(stream)).unwrap();
        let rx = sx.sub(&x).unwrap();
        let ry = sy.sub(&y).unwrap();
        let ratio = rx.sub(&ry).unwrap().norm() / x.sub(&y).unwrap().norm();
        max_ratio = max_ratio.max(ratio);
    }
    Lemma1Gmm {
        t,
        lv_hat,
        bound,
        max_ratio,
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}
