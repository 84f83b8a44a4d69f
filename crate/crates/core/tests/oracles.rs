//! Solver, estimator and metric checks against independent dense or
//! closed-form oracles.

mod common;

use common::*;
use flowadmm::bench::{paired_bootstrap_ci, ssim};
use flowadmm::operators::{DiagonalizableOp, LinearOp};
use flowadmm::prior::{FlowPrior, GaussianPrior};
use flowadmm::renoise::{
    jacobian_spectral_norm, mean_denoise_exact_gaussian, mean_denoise_mc, spectral_norm_fd, DenoiseMode, DenseJacobian,
    GaussianVelocityJacobian, SampleSchedule, TimeSchedule,
};
use flowadmm::solvers::{
    affine_admm_spectral_radius, flow_admm_run, flow_admm_step, pnp_flow_run, AdmmState, PnpConfig, SolverConfig,
    StepSchedule,
};
use flowadmm::{SeededRng, Tensor};
use nalgebra::{DMatrix, DVector};

fn vector(v: Vec<f64>) -> Tensor {
    Tensor::vector(v).unwrap()
}

#[test]
fn power_iteration_matches_dense_svd() {
    let mut rng = SeededRng::new(21);
    for _ in 0..20 {
        let entries = random_matrix(5, 5, &mut rng);
        let oracle = svd_norm(5, 5, &entries);
        let jac = DenseJacobian::new(5, 5, entries.clone()).unwrap();
        let est = jacobian_spectral_norm(&jac, 20_000, 1e-15, 3).unwrap();
        assert!((est.value - oracle).abs() < 1e-6, "{} vs {oracle}", est.value);

        let field = |x: &Tensor| {
            let out = (0..5).map(|i| (0..5).map(|j| entries[i * 5 + j] * x.data()[j]).sum()).collect();
            Ok(vector(out))
        };
        let fd = spectral_norm_fd(&field, &vector(vec![0.3; 5]), 20_000, 1e-15, None).unwrap();
        assert!((fd.value - oracle).abs() < 1e-6, "{} vs {oracle}", fd.value);
    }
}

#[test]
fn gaussian_velocity_norm_matches_closed_form() {
    let var = vector(vec![0.3, 1.0, 2.5, 0.05]);
    let g = GaussianPrior::diagonal(vector(vec![0.1, -0.2, 0.0, 0.4]), var.clone()).unwrap();
    let prior = FlowPrior::Gaussian(g.clone());
    let x = vector(vec![0.7, -1.1, 0.2, 2.0]);
    for &t in &[0.1, 0.4, 0.7, 0.95] {
        let oracle = var.data().iter().map(|&s| gauss_lv(t, s)).fold(0.0, f64::max);
        let analytic = jacobian_spectral_norm(&GaussianVelocityJacobian::new(&g, t).unwrap(), 10_000, 1e-15, 1).unwrap();
        assert!((analytic.value - oracle).abs() < 1e-6, "t={t}");
        let field = |v: &Tensor| prior.velocity(t, v);
        let fd = spectral_norm_fd(&field, &x, 10_000, 1e-15, None).unwrap();
        assert!((fd.value - oracle).abs() < 1e-6, "t={t}: {} vs {oracle}", fd.value);
    }
}

/// Linear part of one exact FlowADMM step on `(z, u)`, assembled column by
/// column from the step itself with `y = 0` and `μ = 0`.
fn dense_admm_map(prior: &FlowPrior, op: &DiagonalizableOp, tau: f64, t: f64) -> (usize, Vec<f64>) {
    let m = op.input_shape().iter().product::<usize>();
    let y = Tensor::zeros(op.output_shape()).unwrap();
    let n = 2 * m;
    let mut cols = vec![0.0; n * n];
    for j in 0..n {
        let mut basis = vec![0.0; n];
        basis[j] = 1.0;
        let z = Tensor::from_vec(basis[..m].to_vec(), op.input_shape()).unwrap();
        let u = Tensor::from_vec(basis[m..].to_vec(), op.input_shape()).unwrap();
        let state = AdmmState { x: z.zeros_like(), z, u, k: 0 };
        let prox = |v: &Tensor| op.prox(v, &y, tau);
        let mut md = |tt: f64, v: &Tensor, _n: usize| mean_denoise_exact_gaussian(prior, tt, v);
        let next = flow_admm_step(&state, &prox, &mut md, t, 1).unwrap();
        for i in 0..m {
            cols[i * n + j] = next.z.data()[i];
            cols[(m + i) * n + j] = next.u.data()[i];
        }
    }
    (n, cols)
}

#[test]
fn spectral_radius_matches_dense_eigensolver() {
    let shape = [6];
    let var = vector(vec![0.2, 1.0, 3.0, 0.5, 0.05, 8.0]);
    let g = GaussianPrior::diagonal(Tensor::zeros(&shape).unwrap(), var).unwrap();
    let prior = FlowPrior::Gaussian(g.clone());
    let ops = [
        DiagonalizableOp::identity(&shape).unwrap(),
        DiagonalizableOp::bernoulli_mask(&shape, 0.5, 7).unwrap(),
    ];
    for op in &ops {
        for &tau in &[0.1, 1.0, 7.0] {
            for &t in &[0.2, 0.6, 0.9, 1.0] {
                let (n, m) = dense_admm_map(&prior, op, tau, t);
                let oracle = eig_radius(n, &m);
                let r = affine_admm_spectral_radius(&g, op, tau, t).unwrap();
                assert!((r - oracle).abs() < 1e-8, "tau={tau} t={t}: {r} vs {oracle}");
            }
        }
    }
}

#[test]
fn geometric_rate_matches_radius_on_grid() {
    let var = 1.0;
    let g = GaussianPrior::isotropic(vector(vec![0.0]), var).unwrap();
    let prior = FlowPrior::Gaussian(g.clone());
    let op = DiagonalizableOp::identity(&[1]).unwrap();
    let y = vector(vec![0.8]);
    for &tau in &[0.2, 0.5, 1.0, 3.0, 10.0] {
        for &t in &[0.3, 0.5, 0.7, 0.85, 0.95] {
            let radius = affine_admm_spectral_radius(&g, &op, tau, t).unwrap();
            assert!(radius < 1.0);
            let (z_star, _) = identity_fixed_point(0.8, t, var, tau);
            // Start away from the solver's default init, whose error can sit
            // exactly in the null direction of the iteration map (e.g. tau = 1).
            let mut state = AdmmState { x: vector(vec![0.0]), z: vector(vec![1.3]), u: vector(vec![-0.4]), k: 0 };
            let prox = |v: &Tensor| op.prox(v, &y, tau);
            let mut md = |tt: f64, v: &Tensor, _n: usize| mean_denoise_exact_gaussian(&prior, tt, v);
            let mut snapshots = Vec::new();
            for _ in 0..60 {
                state = flow_admm_step(&state, &prox, &mut md, t, 1).unwrap();
                snapshots.push(state.clone());
            }
            let gaps: Vec<f64> = snapshots.iter().map(|s| (s.z.data()[0] - z_star).abs()).collect();
            // Rate over the steps whose gap is well above round-off.
            let usable: Vec<usize> = (1..gaps.len()).filter(|&k| gaps[k] > 1e-12 && gaps[k - 1] > 1e-12).collect();
            if usable.len() < 3 {
                assert!(radius < 0.05, "tau={tau} t={t}: fast convergence but radius {radius}");
                continue;
            }
            let (a, b) = (usable[0], usable[usable.len().min(10) - 1]);
            let rate = (gaps[b] / gaps[a]).powf(1.0 / (b - a) as f64);
            assert!((rate - radius).abs() < 0.05, "tau={tau} t={t}: rate {rate} radius {radius}");
        }
    }
}

#[test]
fn pnp_limit_matches_dense_affine_solve() {
    let shape = [1, 4, 4];
    let op = DiagonalizableOp::gaussian_blur(&shape, 3, 0.7).unwrap();
    let (mu, var, t, tau) = (0.3, 0.4, 0.8, 0.9);
    let g = GaussianPrior::isotropic(Tensor::full(&shape, mu).unwrap(), var).unwrap();
    let prior = FlowPrior::Gaussian(g);
    let y = Tensor::from_vec((0..16).map(|i| (i as f64 * 0.61).cos()).collect(), &shape).unwrap();

    let n = 16;
    let mut a = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = op.apply(&Tensor::from_vec(e, &shape).unwrap()).unwrap();
        for i in 0..n {
            a[(i, j)] = col.data()[i];
        }
    }
    // x' = μ + s(x − τAᵀ(Ax − y) − μ)  ⇒  (I − s(I − τAᵀA)) x = s τ Aᵀy + (1 − s) μ
    let s = t * gauss_m(t, var);
    let ata = a.transpose() * &a;
    let lhs = DMatrix::<f64>::identity(n, n) - (DMatrix::<f64>::identity(n, n) - ata * tau) * s;
    let yv = DVector::from_column_slice(y.data());
    let rhs = a.transpose() * yv * (s * tau) + DVector::from_element(n, (1.0 - s) * mu);
    let oracle = lhs.lu().solve(&rhs).unwrap();

    let cfg = PnpConfig {
        iterations: 400,
        step: StepSchedule { lr: tau, alpha: 0.0 },
        time: TimeSchedule::Constant { t },
        samples: SampleSchedule::Constant { n: 1 },
        mode: DenoiseMode::ExactGaussian,
        seed: 0,
    };
    let (x, _) = pnp_flow_run(&op, &y, &prior, &cfg, None).unwrap();
    for i in 0..n {
        assert!((x.data()[i] - oracle[i]).abs() < 1e-8);
    }
}

/// Standard deviation of `z_K` under MC noise, propagated through the 1-D
/// affine map: the state error evolves as `δ' = M δ + (1, −1)·e`.
fn propagated_sd(t: f64, var: f64, tau: f64, n: usize, k: usize) -> f64 {
    let s = t * gauss_m(t, var);
    let c = 1.0 / (1.0 + tau);
    let m = [[s * c, s * (1.0 - c)], [c * (1.0 - s), (1.0 - c) * (1.0 - s)]];
    let step_sd = gauss_m(t, var) * (1.0 - t) / (n as f64).sqrt();
    let mut cov = [[0.0f64; 2]; 2];
    for _ in 0..k {
        let mut next = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        next[i][j] += m[i][a] * cov[a][b] * m[j][b];
                    }
                }
            }
        }
        let v = step_sd * step_sd;
        next[0][0] += v;
        next[0][1] -= v;
        next[1][0] -= v;
        next[1][1] += v;
        cov = next;
    }
    cov[0][0].sqrt()
}

#[test]
fn mc_admm_tracks_exact_admm() {
    let (var, t, tau, k) = (1.0, 0.7, 1.5, 40);
    let prior = FlowPrior::Gaussian(GaussianPrior::isotropic(vector(vec![0.0]), var).unwrap());
    let op = DiagonalizableOp::identity(&[1]).unwrap();
    let y = vector(vec![0.6]);
    let cfg = |mode, n| SolverConfig {
        tau,
        iterations: k,
        time: TimeSchedule::Constant { t },
        samples: SampleSchedule::Constant { n },
        mode,
        seed: 17,
        snapshot_every: None,
    };
    let (exact, _) = flow_admm_run(&op, &y, &prior, &cfg(DenoiseMode::ExactGaussian, 1), None).unwrap();
    let (mc, _) = flow_admm_run(&op, &y, &prior, &cfg(DenoiseMode::MonteCarlo, 4096), None).unwrap();
    let sd = propagated_sd(t, var, tau, 4096, k);
    let gap = (mc.data()[0] - exact.data()[0]).abs();
    assert!(gap <= 10.0 * sd, "gap {gap} vs 10 SE {}", 10.0 * sd);
}

#[test]
fn mc_spread_halves_when_samples_quadruple() {
    let dim = 16;
    let prior = FlowPrior::Gaussian(GaussianPrior::isotropic(Tensor::zeros(&[dim]).unwrap(), 1.0).unwrap());
    let x = vector((0..dim).map(|i| (i as f64 * 0.4).sin()).collect());
    let t = 0.5;
    let spread = |n: usize, seed: u64| -> f64 {
        let mut rng = SeededRng::new(seed);
        let reps: Vec<Tensor> = (0..200).map(|_| mean_denoise_mc(&prior, t, &x, n, &mut rng).unwrap()).collect();
        (0..dim)
            .map(|i| std_dev(&reps.iter().map(|r| r.data()[i]).collect::<Vec<_>>()))
            .sum::<f64>()
            / dim as f64
    };
    let ratio = spread(64, 1) / spread(16, 2);
    assert!((0.4..=0.6).contains(&ratio), "ratio {ratio}");
}

#[test]
fn gmm_residual_ratios_respect_residual_bound() {
    for &t in &[0.3, 0.6, 0.9] {
        let r = gmm_lemma1_check(t, 500, 32, 99);
        assert!(r.max_ratio <= r.bound + 0.05, "t={t}: ratio {} bound {} (L_v {})", r.max_ratio, r.bound, r.lv_hat);
    }
}

/// Direct SSIM: Gaussian 11×11 window, σ = 1.5, valid positions only.
fn naive_ssim(x: &[f64], y: &[f64], h: usize, w: usize) -> f64 {
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut win = [[0.0; 11]; 11];
    let mut total = 0.0;
    for i in 0..11 {
        for j in 0..11 {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            win[i][j] = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            total += win[i][j];
        }
    }
    let mut acc = 0.0;
    let mut count = 0;
    for r in 0..=h - 11 {
        for c in 0..=w - 11 {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let wt = win[i][j] / total;
                    let (a, b) = (x[(r + i) * w + c + j], y[(r + i) * w + c + j]);
                    mx += wt * a;
                    my += wt * b;
                    xx += wt * a * a;
                    yy += wt * b * b;
                    xy += wt * a * b;
                }
            }
            let (vx, vy, cxy) = (xx - mx * mx, yy - my * my, xy - mx * my);
            acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    acc / count as f64
}

#[test]
fn ssim_of_inverted_checkerboard() {
    let n = 16;
    let board: Vec<f64> = (0..n * n).map(|k| ((k / n + k % n) % 2) as f64).collect();
    let inv: Vec<f64> = board.iter().map(|v| 1.0 - v).collect();
    let a = Tensor::from_vec(board.clone(), &[1, n, n]).unwrap();
    let b = Tensor::from_vec(inv.clone(), &[1, n, n]).unwrap();
    let got = ssim(&a, &b).unwrap();
    let oracle = naive_ssim(&board, &inv, n, n);
    assert!(got < 0.0, "{got}");
    assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");

    let mut rng = SeededRng::new(5);
    let img: Vec<f64> = (0..20 * 20).map(|_| rng.next_uniform()).collect();
    let other: Vec<f64> = img.iter().map(|v| (v + 0.1 * rng.next_normal()).clamp(0.0, 1.0)).collect();
    let got = ssim(&Tensor::from_vec(img.clone(), &[20, 20]).unwrap(), &Tensor::from_vec(other.clone(), &[20, 20]).unwrap()).unwrap();
    assert!((got - naive_ssim(&img, &other, 20, 20)).abs() < 1e-12);
}

#[test]
fn ssim_decreases_with_noise() {
    let mut rng = SeededRng::new(8);
    let img = Tensor::from_vec((0..32 * 32).map(|k| 0.5 + 0.3 * ((k % 32) as f64 / 5.0).sin()).collect(), &[1, 32, 32]).unwrap();
    let noise: Vec<f64> = (0..32 * 32).map(|_| rng.next_normal()).collect();
    let mut prev = 1.0 + 1e-12;
    for &sigma in &[0.05, 0.1, 0.2] {
        let noisy = Tensor::from_vec(img.data().iter().zip(&noise).map(|(a, n)| a + sigma * n).collect(), &[1, 32, 32]).unwrap();
        let s = ssim(&noisy, &img).unwrap();
        assert!(s < prev, "sigma {sigma}: {s} !< {prev}");
        prev = s;
    }
}

/// Per-image PSNR lists in the style of a paired evaluation: a shared
/// per-image difficulty plus method-specific jitter.
fn paired_lists(n: usize, shift: f64, rng: &mut SeededRng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let base = 28.0 + 2.0 * rng.next_normal();
            let other = base + shift + 0.8 * rng.next_normal();
            other - base
        })
        .collect()
}

#[test]
fn bootstrap_interval_coverage() {
    let shift = 0.7;
    let mut rng = SeededRng::new(2024);
    let covered = (0..100)
        .filter(|&rep| {
            let deltas = paired_lists(100, shift, &mut rng);
            let ci = paired_bootstrap_ci(&deltas, 10_000, 0.95, rep as u64).unwrap();
            ci.low <= shift && shift <= ci.high
        })
        .count();
    assert!(covered >= 93, "covered {covered}/100");
}

#[test]
fn bootstrap_width_shrinks_with_more_images() {
    let mut rng = SeededRng::new(31);
    let widths: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| {
            // Average over a few draws so one unlucky list cannot decide.
            (0..20)
                .map(|r| {
                    let ci = paired_bootstrap_ci(&paired_lists(n, 0.5, &mut rng), 10_000, 0.95, r).unwrap();
                    ci.high - ci.low
                })
                .sum::<f64>()
                / 20.0
        })
        .collect();
    assert!(widths[1] <= 1.2 * widths[0] && widths[2] <= 1.2 * widths[1], "{widths:?}");
    assert!(widths[2] < widths[0]);
}
