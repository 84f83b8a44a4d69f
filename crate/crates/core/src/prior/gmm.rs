use crate::error::{Error, Result};
use crate::tensor::{SeededRng, Tensor};

/// Mixture of diagonal Gaussians `Σ_k w_k N(μ_k, diag(σ_k²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmPrior {
    weights: Vec<f64>,
    means: Vec<Tensor>,
    variances: Vec<Tensor>,
}

impl GmmPrior {
    pub fn new(weights: Vec<f64>, means: Vec<Tensor>, variances: Vec<Tensor>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != variances.len() {
            return Err(Error::param(
                "mixture needs matching, non-empty weight/mean/variance lists",
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::param("mixture weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param(format!("mixture weights sum to {total}, not 1")));
        }
        for (m, v) in means.iter().zip(&variances) {
            means[0].ensure_same_shape(m)?;
            m.ensure_same_shape(v)?;
            if v.data().iter().any(|&s| !(s > 0.0)) {
                return Err(Error::param("mixture variances must be > 0"));
            }
        }
        Ok(Self {
            weights,
            means,
            variances,
        })
    }

    /// Fits one component per label: empirical weight, mean and per-coordinate
    /// variance (floored at `var_floor`).
    pub fn from_labeled_samples(samples: &[Tensor], labels: &[usize], var_floor: f64) -> Result<Self> {
        if samples.is_empty() || samples.len() != labels.len() {
            return Err(Error::param("need one label per sample and at least one sample"));
        }
        if !(var_floor > 0.0) {
            return Err(Error::param("variance floor must be > 0"));
        }
        let n_comp = labels.iter().max().unwrap() + 1;
        let shape = samples[0].shape().to_vec();
        let numel = samples[0].numel();
        let mut counts = vec![0usize; n_comp];
        let mut sums = vec![vec![0.0; numel]; n_comp];
        for (s, &l) in samples.iter().zip(labels) {
            s.ensure_same_shape(&samples[0])?;
            counts[l] += 1;
            for (acc, v) in sums[l].iter_mut().zip(s.data()) {
                *acc += v;
            }
        }
        let mut sq = vec![vec![0.0; numel]; n_comp];
        for (s, &l) in samples.iter().zip(labels) {
            let c = counts[l] as f64;
            for ((acc, v), sum) in sq[l].iter_mut().zip(s.data()).zip(&sums[l]) {
                let d = v - sum / c;
                *acc += d * d;
            }
        }
        let mut weights = Vec::new();
        let mut means = Vec::new();
        let mut variances = Vec::new();
        let total = samples.len() as f64;
        for k in 0..n_comp {
            if counts[k] == 0 {
                continue;
            }
            let c = counts[k] as f64;
            weights.push(c / total);
            means.push(Tensor::from_parts(sums[k].iter().map(|s| s / c).collect(), shape.clone()));
            variances.push(Tensor::from_parts(
                sq[k].iter().map(|s| (s / c).max(var_floor)).collect(),
                shape.clone(),
            ));
        }
        let wsum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= wsum;
        }
        Self::new(weights, means, variances)
    }

    pub fn shape(&self) -> &[usize] {
        self.means[0].shape()
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Tensor] {
        &self.means
    }

    pub fn variances(&self) -> &[Tensor] {
        &self.variances
    }

    /// Posterior component probabilities given `x_t`, using
    /// `x_t | k ~ N(t μ_k, t² Σ_k + (1−t)² I)`.
    pub fn responsibilities(&self, t: f64, xt: &Tensor) -> Result<Vec<f64>> {
        xt.ensure_same_shape(&self.means[0])?;
        let s2 = (1.0 - t) * (1.0 - t);
        let logp: Vec<f64> = (0..self.n_components())
            .map(|k| {
                let mut acc = self.weights[k].ln();
                for ((&x, &mu), &var) in xt
                    .data()
                    .iter()
                    .zip(self.means[k].data())
                    .zip(self.variances[k].data())
                {
                    let v = t * t * var + s2;
                    let d = x - t * mu;
                    acc -= 0.5 * (d * d / v + v.ln());
                }
                acc
            })
            .collect();
        let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut r: Vec<f64> = logp.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = r.iter().sum();
        for v in &mut r {
            *v /= z;
        }
        Ok(r)
    }

    /// `E[x₁ | x_t]`: responsibility-weighted per-component posterior means.
    pub fn denoise(&self, t: f64, xt: &Tensor) -> Result<Tensor> {
        if t == 1.0 {
            xt.ensure_same_shape(&self.means[0])?;
            return Ok(xt.clone());
        }
        let resp = self.responsibilities(t, xt)?;
        let s2 = (1.0 - t) * (1.0 - t);
        let mut out = vec![0.0; xt.numel()];
        for (k, &r) in resp.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            for (((o, &x), &mu), &var) in out
                .iter_mut()
                .zip(xt.data())
                .zip(self.means[k].data())
                .zip(self.variances[k].data())
            {
                let gain = t * var / (t * t * var + s2);
                *o += r * (mu + gain * (x - t * mu));
            }
        }
        Ok(Tensor::from_parts(out, xt.shape().to_vec()))
    }

    pub fn sample(&self, rng: &mut SeededRng) -> Tensor {
        let u = rng.next_uniform();
        let mut acc = 0.0;
        let mut k = self.n_components() - 1;
        for (i, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        let data = self.means[k]
            .data()
            .iter()
            .zip(self.variances[k].data())
            .map(|(&mu, &var)| mu + var.sqrt() * rng.next_normal())
            .collect();
        Tensor::from_parts(data, self.shape().to_vec())
    }
}
