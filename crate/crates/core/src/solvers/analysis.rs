//! Closed-form quantities for FlowADMM with a Gaussian prior and a
//! diagonalizable operator. The prox, the mean denoiser and the dual update
//! are all diagonal in the basis `P`, so the fixed-`t` iteration splits into
//! independent affine 2×2 maps on `(ẑ_i, û_i)`.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::{Basis, DiagonalizableOp, LinearOp};
use crate::prior::{FlowPrior, GaussianPrior};
use crate::renoise::{DenoiseMode, SampleSchedule, TimeSchedule};
use crate::solvers::{admm_loop, AdmmState, SolverConfig};
use crate::tensor::Tensor;

/// Smallest admissible data-term penalty, `ξ / ((1 + ξ − 2ξ²) μ)`.
pub fn prop1_tau_lower_bound(xi: f64, mu_strong: f64) -> Result<f64> {
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(Error::param(format!("xi must be finite and >= 0, got {xi}")));
    }
    if xi >= 1.0 {
        return Err(Error::AssumptionViolated(format!(
            "residual Lipschitz constant {xi} >= 1"
        )));
    }
    let denom = 1.0 + xi - 2.0 * xi * xi;
    if denom <= 0.0 {
        return Err(Error::AssumptionViolated(format!("1 + xi - 2 xi^2 = {denom} <= 0")));
    }
    if !(mu_strong > 0.0) {
        return Err(Error::AssumptionViolated(format!(
            "data term is not strongly convex (mu = {mu_strong})"
        )));
    }
    Ok(xi / (denom * mu_strong))
}

/// Per-coefficient `t·m_t`, or an error when the prior covariance is not
/// diagonal in the operator's basis.
fn denoiser_slopes(prior: &GaussianPrior, op: &DiagonalizableOp, t: f64) -> Result<Vec<f64>> {
    if prior.shape() != op.input_shape() {
        return Err(Error::ShapeMismatch {
            expected: op.input_shape().to_vec(),
            found: prior.shape().to_vec(),
        });
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param(format!("time {t} outside [0, 1]")));
    }
    if matches!(op.basis(), Basis::Fourier(_)) && !prior.is_isotropic() {
        return Err(Error::Unsupported(
            "anisotropic prior covariance is not diagonal in the Fourier basis".into(),
        ));
    }
    Ok(prior
        .variance()
        .data()
        .iter()
        .map(|&var| if t == 1.0 { 1.0 } else { t * GaussianPrior::shrinkage(t, var) })
        .collect())
}

fn spectral_radius_2x2(m: [[f64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        (tr / 2.0 + r).abs().max((tr / 2.0 - r).abs())
    } else {
        det.sqrt()
    }
}

/// Spectral radius of the linear part of the fixed-`t` map
/// `(z, u) ↦ (z', u')`, the maximum over the per-coefficient blocks
/// `[[s c, s(1 − c)], [c(1 − s), (1 − c)(1 − s)]]` with `c = 1/(1 + τ|λ|²)`
/// and `s = t·m_t`.
pub fn affine_admm_spectral_radius(prior: &GaussianPrior, op: &DiagonalizableOp, tau: f64, t: f64) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param(format!("tau must be > 0, got {tau}")));
    }
    let slopes = denoiser_slopes(prior, op, t)?;
    Ok(op
        .spectrum()
        .iter()
        .zip(&slopes)
        .map(|(l, &s)| {
            let c = 1.0 / (1.0 + tau * l.norm_sqr());
            spectral_radius_2x2([[s * c, s * (1.0 - c)], [c * (1.0 - s), (1.0 - c) * (1.0 - s)]])
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmFixedPoint {
    pub z: Tensor,
    pub u: Tensor,
}

/// Fixed point of fixed-`t` FlowADMM with the exact Gaussian mean denoiser.
/// Per coefficient, with `r = (1 − s)/s`,
/// `ẑ_i = (τ conj(λ_i) (Qy)_i + r (Pμ)_i) / (τ|λ_i|² + r)` and
/// `u = (z − μ)·r`.
pub fn gaussian_admm_fixed_point(
    prior: &GaussianPrior,
    op: &DiagonalizableOp,
    y: &Tensor,
    tau: f64,
    t: f64,
) -> Result<AdmmFixedPoint> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param(format!("tau must be > 0, got {tau}")));
    }
    let slopes = denoiser_slopes(prior, op, t)?;
    if slopes.iter().any(|&s| s <= 0.0) {
        return Err(Error::AssumptionViolated(
            "denoiser slope is zero on some coordinate (t = 0 or a point mass); the dual fixed point is undefined".into(),
        ));
    }
    let pmu = op.p_forward(prior.mean())?;
    let qy = op.measurement_coefficients(y)?;
    let mut coeffs = Vec::with_capacity(pmu.len());
    for (((l, q), m), &s) in op.spectrum().iter().zip(&qy).zip(&pmu).zip(&slopes) {
        let r = (1.0 - s) / s;
        let denom = tau * l.norm_sqr() + r;
        if denom == 0.0 {
            return Err(Error::AssumptionViolated(
                "fixed point is not unique: an unobserved coefficient with an identity denoiser".into(),
            ));
        }
        coeffs.push((l.conj() * q * tau + m * r) / Complex64::new(denom, 0.0));
    }
    let z = op.p_inverse(coeffs);
    let u = Tensor::from_parts(
        z.data()
            .iter()
            .zip(prior.mean().data())
            .zip(&slopes)
            .map(|((zi, mi), s)| (zi - mi) * (1.0 - s) / s)
            .collect(),
        z.shape().to_vec(),
    );
    Ok(AdmmFixedPoint { z, u })
}

#[derive(Debug, Clone)]
pub struct Prop2Report {
    pub fixed_point: AdmmFixedPoint,
    /// `‖z_k − z*‖` after each iteration.
    pub z_gaps: Vec<f64>,
    /// `‖u_k − u*‖` after each iteration.
    pub u_gaps: Vec<f64>,
    pub final_state: AdmmState,
}

impl Prop2Report {
    pub fn final_gap(&self) -> f64 {
        *self.z_gaps.last().unwrap_or(&f64::NAN)
    }

    pub fn final_u_gap(&self) -> f64 {
        *self.u_gaps.last().unwrap_or(&f64::NAN)
    }
}

/// Runs FlowADMM with a non-stationary time schedule and the exact Gaussian
/// mean denoiser, measuring the distance to the fixed point of the limiting
/// operator `T_{t_max}`.
pub fn prop2_schedule_check(
    prior: &GaussianPrior,
    op: &DiagonalizableOp,
    y: &Tensor,
    tau: f64,
    schedule: TimeSchedule,
    iterations: usize,
) -> Result<Prop2Report> {
    let fixed_point = gaussian_admm_fixed_point(prior, op, y, tau, schedule.limit())?;
    let cfg = SolverConfig {
        tau,
        iterations,
        time: schedule,
        samples: SampleSchedule::Constant { n: 1 },
        mode: DenoiseMode::ExactGaussian,
        seed: 0,
        snapshot_every: None,
    };
    let mut z_gaps = Vec::with_capacity(iterations);
    let mut u_gaps = Vec::with_capacity(iterations);
    let flow_prior = FlowPrior::Gaussian(prior.clone());
    let (final_state, _) = admm_loop(op, y, &flow_prior, &cfg, &mut |s| {
        z_gaps.push(dist(&s.z, &fixed_point.z));
        u_gaps.push(dist(&s.u, &fixed_point.u));
    })?;
    Ok(Prop2Report {
        fixed_point,
        z_gaps,
        u_gaps,
        final_state,
    })
}

fn dist(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::vector(vec![v]).unwrap()
    }

    #[test]
    fn tau_lower_bound_examples() {
        assert!((prop1_tau_lower_bound(0.5, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(prop1_tau_lower_bound(0.0, 2.0).unwrap(), 0.0);
        assert!(matches!(prop1_tau_lower_bound(1.0, 1.0), Err(Error::AssumptionViolated(_))));
        assert!(matches!(prop1_tau_lower_bound(0.3, 0.0), Err(Error::AssumptionViolated(_))));
    }

    #[test]
    fn identity_fixed_point_formula() {
        let g = GaussianPrior::isotropic(scalar(0.0), 1.0).unwrap();
        let op = DiagonalizableOp::identity(&[1]).unwrap();
        let (tau, t, y) = (2.0, 0.7, 0.9);
        let a = t * t / (t * t + (1.0 - t) * (1.0 - t));
        let fp = gaussian_admm_fixed_point(&g, &op, &scalar(y), tau, t).unwrap();
        let z = y * a * tau / (a * tau + 1.0 - a);
        assert!((fp.z.data()[0] - z).abs() < 1e-14);
        assert!((fp.u.data()[0] - z * (1.0 - a) / a).abs() < 1e-14);
    }

    #[test]
    fn radius_is_permutation_invariant() {
        let g1 = GaussianPrior::diagonal(Tensor::zeros(&[3]).unwrap(), Tensor::vector(vec![0.2, 1.0, 3.0]).unwrap()).unwrap();
        let g2 = GaussianPrior::diagonal(Tensor::zeros(&[3]).unwrap(), Tensor::vector(vec![3.0, 0.2, 1.0]).unwrap()).unwrap();
        let op = DiagonalizableOp::identity(&[3]).unwrap();
        for &tau in &[0.1, 1.0, 10.0] {
            let a = affine_admm_spectral_radius(&g1, &op, tau, 0.6).unwrap();
            let b = affine_admm_spectral_radius(&g2, &op, tau, 0.6).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn fourier_basis_needs_isotropic_prior() {
        let shape = [1, 4, 4];
        let op = DiagonalizableOp::gaussian_blur(&shape, 3, 0.5).unwrap();
        let mut var = vec![1.0; 16];
        var[3] = 2.0;
        let aniso = GaussianPrior::diagonal(Tensor::zeros(&shape).unwrap(), Tensor::from_vec(var, &shape).unwrap()).unwrap();
        assert!(matches!(affine_admm_spectral_radius(&aniso, &op, 1.0, 0.5), Err(Error::Unsupported(_))));
        let iso = GaussianPrior::isotropic(Tensor::zeros(&shape).unwrap(), 1.0).unwrap();
        assert!(affine_admm_spectral_radius(&iso, &op, 1.0, 0.5).unwrap() < 1.0);
    }

    #[test]
    fn blur_fixed_point_is_stationary() {
        let shape = [1, 6, 6];
        let op = DiagonalizableOp::gaussian_blur(&shape, 5, 0.8).unwrap();
        let g = GaussianPrior::isotropic(Tensor::full(&shape, 0.4).unwrap(), 0.3).unwrap();
        let y = Tensor::from_vec((0..36).map(|i| (i as f64 * 0.37).sin()).collect(), &shape).unwrap();
        let (tau, t) = (0.8, 0.6);
        let fp = gaussian_admm_fixed_point(&g, &op, &y, tau, t).unwrap();
        let x = op.prox(&fp.z.sub(&fp.u).unwrap(), &y, tau).unwrap();
        let z = g.mean_denoise(t, &x.add(&fp.u).unwrap()).unwrap();
        assert!(dist(&x, &fp.z) < 1e-12);
        assert!(dist(&z, &fp.z) < 1e-12);
    }

    #[test]
    fn geometric_schedule_without_offset_is_fixed_t() {
        let g = GaussianPrior::isotropic(scalar(0.0), 1.0).unwrap();
        let op = DiagonalizableOp::identity(&[1]).unwrap();
        let y = scalar(0.5);
        let a = prop2_schedule_check(&g, &op, &y, 1.0, TimeSchedule::Geometric { t_max: 0.8, c: 0.0, r: 0.5 }, 30).unwrap();
        let b = prop2_schedule_check(&g, &op, &y, 1.0, TimeSchedule::Constant { t: 0.8 }, 30).unwrap();
        assert_eq!(a.z_gaps, b.z_gaps);
    }
}
