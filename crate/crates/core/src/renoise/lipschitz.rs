use crate::error::{Error, Result};
use crate::prior::GaussianPrior;
use crate::tensor::{SeededRng, Tensor};

/// Matrix-free access to a Jacobian `J` through `J·w` and `Jᵀ·w̃`.
pub trait JacobianProbe {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn jvp(&self, w: &[f64]) -> Vec<f64>;
    fn vjp(&self, w: &[f64]) -> Vec<f64>;
}

/// Row-major dense Jacobian, either given or assembled by central differences.
#[derive(Debug, Clone)]
pub struct DenseJacobian {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseJacobian {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::param(format!(
                "{rows}x{cols} Jacobian needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    /// Column `j` is `(f(x + h e_j) − f(x − h e_j)) / 2h`.
    pub fn central_differences(
        field: &dyn Fn(&Tensor) -> Result<Tensor>,
        x: &Tensor,
        step: f64,
    ) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::param("finite-difference step must be > 0"));
        }
        let cols = x.numel();
        let mut columns = Vec::with_capacity(cols);
        let mut probe = x.clone();
        for j in 0..cols {
            let orig = probe.data()[j];
            probe.data_mut()[j] = orig + step;
            let plus = field(&probe)?;
            probe.data_mut()[j] = orig - step;
            let minus = field(&probe)?;
            probe.data_mut()[j] = orig;
            let col: Vec<f64> = plus
                .data()
                .iter()
                .zip(minus.data())
                .map(|(a, b)| (a - b) / (2.0 * step))
                .collect();
            columns.push(col);
        }
        let rows = columns[0].len();
        let mut entries = vec![0.0; rows * cols];
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                entries[i * cols + j] = *v;
            }
        }
        Self::new(rows, cols, entries)
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

impl JacobianProbe for DenseJacobian {
    fn dim_in(&self) -> usize {
        self.cols
    }

    fn dim_out(&self) -> usize {
        self.rows
    }

    fn jvp(&self, w: &[f64]) -> Vec<f64> {
        self.entries
            .chunks(self.cols)
            .map(|row| row.iter().zip(w).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn vjp(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, wi) in self.entries.chunks(self.cols).zip(w) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * wi;
            }
        }
        out
    }
}

/// Exact Jacobian of a Gaussian prior's velocity, `diag((m_t − 1)/(1 − t))`.
#[derive(Debug, Clone)]
pub struct GaussianVelocityJacobian {
    diag: Vec<f64>,
}

impl GaussianVelocityJacobian {
    pub fn new(prior: &GaussianPrior, t: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::param(format!("velocity Jacobian needs t in [0, 1), got {t}")));
        }
        let diag = prior
            .variance()
            .data()
            .iter()
            .map(|&var| (GaussianPrior::shrinkage(t, var) - 1.0) / (1.0 - t))
            .collect();
        Ok(Self { diag })
    }
}

impl JacobianProbe for GaussianVelocityJacobian {
    fn dim_in(&self) -> usize {
        self.diag.len()
    }

    fn dim_out(&self) -> usize {
        self.diag.len()
    }

    fn jvp(&self, w: &[f64]) -> Vec<f64> {
        self.diag.iter().zip(w).map(|(d, x)| d * x).collect()
    }

    fn vjp(&self, w: &[f64]) -> Vec<f64> {
        self.jvp(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Power iteration on `JᵀJ`: `w̃ = Jw/‖Jw‖`, `w = Jᵀw̃/‖Jᵀw̃‖`, with
/// `‖Jᵀw̃‖` as the running estimate of `‖J‖₂`.
pub fn jacobian_spectral_norm(
    probe: &dyn JacobianProbe,
    iters: usize,
    tol: f64,
    seed: u64,
) -> Result<SpectralEstimate> {
    if iters == 0 {
        return Err(Error::param("power iteration needs at least one step"));
    }
    let mut rng = SeededRng::new(seed);
    let mut w: Vec<f64> = (0..probe.dim_in()).map(|_| rng.next_normal()).collect();
    normalize(&mut w);
    let mut prev = f64::NAN;
    let mut best = 0.0f64;
    for it in 1..=iters {
        let mut jw = probe.jvp(&w);
        if normalize(&mut jw) == 0.0 {
            return Ok(SpectralEstimate {
                value: best,
                iterations: it,
                converged: true,
            });
        }
        let mut g = probe.vjp(&jw);
        let sigma = normalize(&mut g);
        best = best.max(sigma);
        w = g;
        if (sigma - prev).abs() < tol {
            return Ok(SpectralEstimate {
                value: sigma,
                iterations: it,
                converged: true,
            });
        }
        prev = sigma;
    }
    Ok(SpectralEstimate {
        value: best,
        iterations: iters,
        converged: false,
    })
}

/// Default central-difference step `1e-5·(1 + ‖x‖∞)`.
pub fn default_fd_step(x: &Tensor) -> f64 {
    1e-5 * (1.0 + x.norm_inf())
}

/// `‖J_x field(x)‖₂` for an arbitrary field, via a finite-difference Jacobian.
pub fn spectral_norm_fd(
    field: &dyn Fn(&Tensor) -> Result<Tensor>,
    x: &Tensor,
    iters: usize,
    tol: f64,
    fd_step: Option<f64>,
) -> Result<SpectralEstimate> {
    let step = fd_step.unwrap_or_else(|| default_fd_step(x));
    let jac = DenseJacobian::central_differences(field, x, step)?;
    jacobian_spectral_norm(&jac, iters, tol, 0x5eed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::FlowPrior;

    #[test]
    fn diagonal_linear_field() {
        let j = DenseJacobian::new(2, 2, vec![3.0, 0.0, 0.0, 1.0]).unwrap();
        let est = jacobian_spectral_norm(&j, 200, 1e-14, 1).unwrap();
        assert!(est.converged);
        assert!((est.value - 3.0).abs() < 1e-8);
    }

    #[test]
    fn zero_jacobian_is_zero() {
        let j = DenseJacobian::new(2, 3, vec![0.0; 6]).unwrap();
        assert_eq!(jacobian_spectral_norm(&j, 10, 1e-12, 1).unwrap().value, 0.0);
    }

    #[test]
    fn finite_differences_recover_linear_map() {
        let m = [[1.0, -2.0, 0.5], [0.0, 3.0, 1.0]];
        let field = |x: &Tensor| {
            let d = x.data();
            Tensor::vector((0..2).map(|i| (0..3).map(|j| m[i][j] * d[j]).sum()).collect())
        };
        let x = Tensor::vector(vec![0.3, -0.7, 2.0]).unwrap();
        let jac = DenseJacobian::central_differences(&field, &x, 1e-5).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert!((jac.entries()[i * 3 + j] - m[i][j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gaussian_velocity_matches_closed_form() {
        let g = GaussianPrior::isotropic(Tensor::vector(vec![0.2, -0.1, 0.4]).unwrap(), 2.0).unwrap();
        let prior = FlowPrior::Gaussian(g.clone());
        for &t in &[0.1, 0.5, 0.9] {
            let closed = g.velocity_lipschitz(t);
            let analytic = jacobian_spectral_norm(&GaussianVelocityJacobian::new(&g, t).unwrap(), 100, 1e-14, 3).unwrap();
            assert!((analytic.value - closed).abs() < 1e-12);
            let x = Tensor::vector(vec![1.0, 2.0, -3.0]).unwrap();
            let field = |z: &Tensor| prior.velocity(t, z);
            let fd = spectral_norm_fd(&field, &x, 100, 1e-14, None).unwrap();
            assert!((fd.value - closed).abs() < 1e-6, "t={t}: {} vs {closed}", fd.value);
        }
    }
}
