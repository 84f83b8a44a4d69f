//! Flow priors: velocity fields `v_t` and the MMSE denoisers
//! `D_t(x) = x + (1 − t) v_t(x)` they induce along the path
//! `x_t = t x₁ + (1 − t) x₀`, `x₀ ~ N(0, I)`.
//!
//! The Gaussian and Gaussian-mixture priors have exact posterior means, so
//! their velocities are derived from the denoiser. The MLP goes the other
//! way: it is a velocity network and the denoiser is built from it.

mod gaussian;
mod gmm;
mod mlp;

pub use gaussian::GaussianPrior;
pub use gmm::GmmPrior;
pub use mlp::{
    draw_fm_batch, train_flow_matching, Activation, FmSample, MlpMeta, MlpVelocity, TrainConfig,
    TrainReport,
};

use crate::error::{Error, Result};
use crate::tensor::{SeededRng, Tensor};

#[derive(Debug, Clone)]
pub enum FlowPrior {
    Gaussian(GaussianPrior),
    Gmm(GmmPrior),
    Mlp(MlpVelocity),
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param(format!("time {t} outside [0, 1]")));
    }
    Ok(())
}

impl FlowPrior {
    pub fn kind(&self) -> &'static str {
        match self {
            FlowPrior::Gaussian(_) => "gaussian",
            FlowPrior::Gmm(_) => "gmm",
            FlowPrior::Mlp(_) => "mlp",
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, FlowPrior::Mlp(_))
    }

    pub fn numel(&self) -> usize {
        match self {
            FlowPrior::Gaussian(g) => g.mean().numel(),
            FlowPrior::Gmm(g) => g.means()[0].numel(),
            FlowPrior::Mlp(m) => m.dim(),
        }
    }

    /// `D_t(x_t)`, the posterior mean `E[x₁ | x_t]`.
    pub fn denoise(&self, t: f64, xt: &Tensor) -> Result<Tensor> {
        check_time(t)?;
        match self {
            FlowPrior::Gaussian(g) => g.denoise(t, xt),
            FlowPrior::Gmm(g) => g.denoise(t, xt),
            FlowPrior::Mlp(m) => {
                let v = m.forward(xt, t)?;
                let mut out = xt.clone();
                out.axpy_in_place(1.0 - t, &v)?;
                Ok(out)
            }
        }
    }

    /// `v_t(x)`. Analytic priors need `t < 1` since the velocity is
    /// `(D_t(x) − x) / (1 − t)`.
    pub fn velocity(&self, t: f64, x: &Tensor) -> Result<Tensor> {
        check_time(t)?;
        match self {
            FlowPrior::Mlp(m) => m.forward(x, t),
            _ => {
                if t >= 1.0 {
                    return Err(Error::param("analytic velocity is undefined at t = 1"));
                }
                let d = self.denoise(t, x)?;
                Ok(d.sub(x)?.scale(1.0 / (1.0 - t)))
            }
        }
    }

    pub fn sample(&self, rng: &mut SeededRng) -> Result<Tensor> {
        match self {
            FlowPrior::Gaussian(g) => Ok(g.sample(rng)),
            FlowPrior::Gmm(g) => Ok(g.sample(rng)),
            FlowPrior::Mlp(_) => Err(Error::Unsupported(
                "a velocity network defines a flow, not a sampler".into(),
            )),
        }
    }

    pub fn as_gaussian(&self) -> Option<&GaussianPrior> {
        match self {
            FlowPrior::Gaussian(g) => Some(g),
            _ => None,
        }
    }
}

/// Free-function alias of [`FlowPrior::denoise`].
pub fn denoiser_apply(prior: &FlowPrior, t: f64, xt: &Tensor) -> Result<Tensor> {
    prior.denoise(t, xt)
}

/// Free-function alias of [`FlowPrior::velocity`].
pub fn velocity_apply(prior: &FlowPrior, t: f64, x: &Tensor) -> Result<Tensor> {
    prior.velocity(t, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::sample_standard_normal;
    use proptest::prelude::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::vector(vec![v]).unwrap()
    }

    fn std_gauss_1d() -> FlowPrior {
        FlowPrior::Gaussian(GaussianPrior::isotropic(scalar(0.0), 1.0).unwrap())
    }

    fn gmm_1d() -> GmmPrior {
        GmmPrior::new(
            vec![0.3, 0.7],
            vec![scalar(-2.0), scalar(1.5)],
            vec![scalar(0.5), scalar(0.2)],
        )
        .unwrap()
    }

    /// `E[x₁ | x_t]` by trapezoid quadrature of the 1-D posterior over [−10, 10].
    fn quadrature_posterior_mean(density: impl Fn(f64) -> f64, t: f64, xt: f64) -> f64 {
        let nodes = 100_000;
        let (a, b) = (-10.0, 10.0);
        let h = (b - a) / nodes as f64;
        let s2 = (1.0 - t) * (1.0 - t);
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..=nodes {
            let x1 = a + i as f64 * h;
            let w = if i == 0 || i == nodes { 0.5 } else { 1.0 };
            let lik = (-(xt - t * x1).powi(2) / (2.0 * s2)).exp();
            let p = w * density(x1) * lik;
            num += p * x1;
            den += p;
        }
        num / den
    }

    fn normal_pdf(x: f64, mu: f64, var: f64) -> f64 {
        (-(x - mu).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    }

    #[test]
    fn gaussian_denoiser_worked_example() {
        let p = std_gauss_1d();
        let d = p.denoise(0.5, &scalar(2.0)).unwrap();
        assert!((d.data()[0] - 2.0).abs() < 1e-12);
        let oracle = quadrature_posterior_mean(|x| normal_pdf(x, 0.0, 1.0), 0.5, 2.0);
        assert!((oracle - 2.0).abs() < 1e-6, "quadrature {oracle}");
    }

    #[test]
    fn gaussian_denoiser_limits() {
        let g = GaussianPrior::isotropic(Tensor::vector(vec![0.3, -1.0]).unwrap(), 2.0).unwrap();
        let p = FlowPrior::Gaussian(g);
        let x = Tensor::vector(vec![4.0, 5.0]).unwrap();
        assert_eq!(p.denoise(1.0, &x).unwrap(), x);
        assert_eq!(p.denoise(0.0, &x).unwrap().data(), &[0.3, -1.0]);
        assert!(p.denoise(1.5, &x).is_err());
        assert!(p.denoise(-0.1, &x).is_err());
    }

    #[test]
    fn velocity_examples() {
        let p = std_gauss_1d();
        let v = p.velocity(0.0, &scalar(3.0)).unwrap();
        assert_eq!(v.data(), &[-3.0]);
        assert!(p.velocity(1.0, &scalar(3.0)).is_err());

        let single = FlowPrior::Gmm(GmmPrior::new(vec![1.0], vec![scalar(0.0)], vec![scalar(1.0)]).unwrap());
        for &t in &[0.0, 0.3, 0.8] {
            let a = single.velocity(t, &scalar(0.7)).unwrap();
            let b = p.velocity(t, &scalar(0.7)).unwrap();
            assert!((a.data()[0] - b.data()[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn gmm_matches_quadrature() {
        let g = gmm_1d();
        let density = |x: f64| 0.3 * normal_pdf(x, -2.0, 0.5) + 0.7 * normal_pdf(x, 1.5, 0.2);
        for &t in &[0.2, 0.5, 0.8] {
            for &xt in &[-1.5, 0.0, 0.4, 1.2] {
                let d = g.denoise(t, &scalar(xt)).unwrap().data()[0];
                let oracle = quadrature_posterior_mean(density, t, xt);
                assert!((d - oracle).abs() < 1e-6, "t={t} xt={xt}: {d} vs {oracle}");
            }
        }
    }

    #[test]
    fn gmm_responsibilities_sum_to_one() {
        let g = gmm_1d();
        for &t in &[0.0, 0.1, 0.5, 0.99] {
            for &x in &[-5.0, 0.0, 3.0, 40.0] {
                let r = g.responsibilities(t, &scalar(x)).unwrap();
                assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gmm_validation() {
        assert!(GmmPrior::new(vec![0.5, 0.6], vec![scalar(0.0), scalar(1.0)], vec![scalar(1.0), scalar(1.0)]).is_err());
        assert!(GmmPrior::new(vec![1.0], vec![scalar(0.0)], vec![scalar(0.0)]).is_err());
    }

    #[test]
    fn sampling() {
        let point = FlowPrior::Gaussian(GaussianPrior::isotropic(scalar(5.0), 0.0).unwrap());
        let mut rng = SeededRng::new(1);
        for _ in 0..10 {
            assert_eq!(point.sample(&mut rng).unwrap().data(), &[5.0]);
        }

        let g = GaussianPrior::isotropic(scalar(2.0), 4.0).unwrap();
        let n = 100_000;
        let mean = (0..n).map(|_| g.sample(&mut rng).data()[0]).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 3.0 * 2.0 / (n as f64).sqrt());

        let mix = gmm_1d();
        let left = (0..n).filter(|_| mix.sample(&mut rng).data()[0] < -0.4).count() as f64 / n as f64;
        // the two components barely overlap at -0.4
        assert!((left - 0.3).abs() < 0.02, "left fraction {left}");

        let mlp = FlowPrior::Mlp(MlpVelocity::zeros(2, 3).unwrap());
        assert!(matches!(mlp.sample(&mut rng), Err(Error::Unsupported(_))));
    }

    proptest! {
        #[test]
        fn denoiser_velocity_identity(seed in any::<u64>(), t in 0.0f64..0.999) {
            let mut rng = SeededRng::new(seed);
            let x = sample_standard_normal(&mut rng, &[3]).unwrap();
            let priors = vec![
                FlowPrior::Gaussian(GaussianPrior::diagonal(
                    Tensor::vector(vec![0.1, -0.5, 2.0]).unwrap(),
                    Tensor::vector(vec![1.0, 0.3, 2.5]).unwrap()).unwrap()),
                FlowPrior::Gmm(GmmPrior::new(vec![0.4, 0.6],
                    vec![Tensor::vector(vec![1.0, 0.0, -1.0]).unwrap(), Tensor::vector(vec![-1.0, 2.0, 0.5]).unwrap()],
                    vec![Tensor::vector(vec![0.2, 0.5, 1.0]).unwrap(), Tensor::vector(vec![1.0, 0.1, 0.3]).unwrap()]).unwrap()),
                FlowPrior::Mlp(MlpVelocity::random(3, 5, &mut rng).unwrap()),
            ];
            for p in &priors {
                let d = p.denoise(t, &x).unwrap();
                let v = p.velocity(t, &x).unwrap();
                let mut recon = x.clone();
                recon.axpy_in_place(1.0 - t, &v).unwrap();
                for (a, b) in d.data().iter().zip(recon.data()) {
                    prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
                }
            }
        }

        #[test]
        fn gaussian_denoiser_is_affine(seed in any::<u64>(), t in 0.0f64..1.0, alpha in -2.0f64..2.0) {
            let mut rng = SeededRng::new(seed);
            let g = GaussianPrior::diagonal(
                sample_standard_normal(&mut rng, &[4]).unwrap(),
                Tensor::vector(vec![0.5, 1.0, 2.0, 0.0]).unwrap()).unwrap();
            let x = sample_standard_normal(&mut rng, &[4]).unwrap();
            let y = sample_standard_normal(&mut rng, &[4]).unwrap();
            let mix = x.scale(alpha).add(&y.scale(1.0 - alpha)).unwrap();
            let lhs = g.denoise(t, &mix).unwrap();
            let rhs = g.denoise(t, &x).unwrap().scale(alpha).add(&g.denoise(t, &y).unwrap().scale(1.0 - alpha)).unwrap();
            for (a, b) in lhs.data().iter().zip(rhs.data()) {
                prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs() + b.abs()));
            }
        }
    }

    fn fm_batch(seed: u64, n: usize) -> Vec<FmSample> {
        let mut rng = SeededRng::new(seed);
        (0..n)
            .map(|_| FmSample {
                x0: (0..2).map(|_| rng.next_normal()).collect(),
                x1: (0..2).map(|_| 2.0 * rng.next_normal() + 1.0).collect(),
                t: rng.next_uniform(),
            })
            .collect()
    }

    #[test]
    fn zero_network_zero_target_has_zero_loss() {
        let m = MlpVelocity::zeros(2, 4).unwrap();
        let batch = vec![FmSample { x0: vec![0.5, -1.0], x1: vec![0.5, -1.0], t: 0.3 }];
        assert_eq!(m.loss(&batch).unwrap(), 0.0);
        assert!(m.loss_and_grad(&[]).is_err());
    }

    #[test]
    fn gradients_match_central_differences() {
        let m = MlpVelocity::random(2, 16, &mut SeededRng::new(4)).unwrap();
        let batch = fm_batch(5, 8);
        let (_, grad) = m.loss_and_grad(&batch).unwrap();
        let h = 1e-5;
        for i in 0..grad.len() {
            let mut plus = m.clone();
            plus.params_mut()[i] += h;
            let mut minus = m.clone();
            minus.params_mut()[i] -= h;
            let fd = (plus.loss(&batch).unwrap() - minus.loss(&batch).unwrap()) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
            assert!(rel < 1e-4, "param {i}: analytic {} fd {fd}", grad[i]);
        }
    }

    #[test]
    fn duplicated_batch_leaves_loss_and_grad_unchanged() {
        let m = MlpVelocity::random(2, 6, &mut SeededRng::new(9)).unwrap();
        let batch = fm_batch(10, 5);
        let doubled: Vec<FmSample> = batch.iter().chain(batch.iter()).cloned().collect();
        let (l1, g1) = m.loss_and_grad(&batch).unwrap();
        let (l2, g2) = m.loss_and_grad(&doubled).unwrap();
        assert!((l1 - l2).abs() < 1e-12 * l1.max(1.0));
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn zero_learning_rate_keeps_curve_flat() {
        let prior = FlowPrior::Gaussian(GaussianPrior::isotropic(Tensor::vector(vec![1.0, -1.0]).unwrap(), 0.5).unwrap());
        let mut m = MlpVelocity::random(2, 8, &mut SeededRng::new(1)).unwrap();
        let cfg = TrainConfig { steps: 50, batch_size: 16, learning_rate: 0.0, eval_every: 10, eval_batch_size: 64 };
        let report = train_flow_matching(&mut m, &prior, &cfg, &mut SeededRng::new(2)).unwrap();
        let first = report.initial_loss();
        assert!(report.loss_curve.iter().all(|&(_, l)| l == first));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.f64");
        let m = MlpVelocity::random(3, 4, &mut SeededRng::new(8)).unwrap();
        m.save(&path).unwrap();
        let meta: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("model.f64.json")).unwrap()).unwrap();
        assert_eq!(meta["d"], 3);
        assert_eq!(meta["h"], 4);
        assert_eq!(meta["activation"], "tanh");
        assert_eq!(MlpVelocity::load(&path).unwrap(), m);
    }
}
