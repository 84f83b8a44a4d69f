//! Two-layer velocity network `v(x, t) = W₂ tanh(W₁ [x; t] + b₁) + b₂`
//! trained with the flow-matching regression objective.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::prior::FlowPrior;
use crate::tensor::{SeededRng, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
}

/// JSON sidecar written next to the F64 parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpMeta {
    pub d: usize,
    pub h: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpVelocity {
    dim: usize,
    hidden: usize,
    /// Flat parameters laid out as `[W₁ (h×(d+1)), b₁ (h), W₂ (d×h), b₂ (d)]`.
    params: Vec<f64>,
}

/// One flow-matching training triple.
#[derive(Debug, Clone)]
pub struct FmSample {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub t: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Evaluation batch loss is recorded every `eval_every` steps.
    pub eval_every: usize,
    pub eval_batch_size: usize,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// `(step, loss on the fixed evaluation batch)`, starting at step 0.
    pub loss_curve: Vec<(usize, f64)>,
}

impl TrainReport {
    pub fn initial_loss(&self) -> f64 {
        self.loss_curve.first().map(|p| p.1).unwrap_or(f64::NAN)
    }

    pub fn final_loss(&self) -> f64 {
        self.loss_curve.last().map(|p| p.1).unwrap_or(f64::NAN)
    }
}

struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    end: usize,
}

impl MlpVelocity {
    fn layout(d: usize, h: usize) -> Layout {
        let w1 = 0;
        let b1 = w1 + h * (d + 1);
        let w2 = b1 + h;
        let b2 = w2 + d * h;
        Layout {
            w1,
            b1,
            w2,
            b2,
            end: b2 + d,
        }
    }

    pub fn zeros(dim: usize, hidden: usize) -> Result<Self> {
        if dim == 0 || hidden == 0 {
            return Err(Error::param("MLP dimensions must be >= 1"));
        }
        Ok(Self {
            dim,
            hidden,
            params: vec![0.0; Self::layout(dim, hidden).end],
        })
    }

    /// Weights ~ N(0, 1/fan_in), biases zero.
    pub fn random(dim: usize, hidden: usize, rng: &mut SeededRng) -> Result<Self> {
        let mut m = Self::zeros(dim, hidden)?;
        let l = Self::layout(dim, hidden);
        let s1 = 1.0 / ((dim + 1) as f64).sqrt();
        let s2 = 1.0 / (hidden as f64).sqrt();
        for p in &mut m.params[l.w1..l.b1] {
            *p = s1 * rng.next_normal();
        }
        for p in &mut m.params[l.w2..l.b2] {
            *p = s2 * rng.next_normal();
        }
        Ok(m)
    }

    pub fn from_params(dim: usize, hidden: usize, params: Vec<f64>) -> Result<Self> {
        let need = Self::layout(dim, hidden).end;
        if params.len() != need {
            return Err(Error::param(format!(
                "MLP {dim}->{hidden}->{dim} needs {need} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("MLP parameters".into()));
        }
        Ok(Self { dim, hidden, params })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn hidden_pre(&self, x: &[f64], t: f64) -> Vec<f64> {
        let (d, l) = (self.dim, Self::layout(self.dim, self.hidden));
        (0..self.hidden)
            .map(|j| {
                let row = &self.params[l.w1 + j * (d + 1)..l.w1 + (j + 1) * (d + 1)];
                let mut a = self.params[l.b1 + j] + row[d] * t;
                for (w, xi) in row[..d].iter().zip(x) {
                    a += w * xi;
                }
                a
            })
            .collect()
    }

    fn output(&self, hid: &[f64]) -> Vec<f64> {
        let (h, l) = (self.hidden, Self::layout(self.dim, self.hidden));
        (0..self.dim)
            .map(|i| {
                let row = &self.params[l.w2 + i * h..l.w2 + (i + 1) * h];
                self.params[l.b2 + i] + row.iter().zip(hid).map(|(w, a)| w * a).sum::<f64>()
            })
            .collect()
    }

    pub fn forward_raw(&self, x: &[f64], t: f64) -> Vec<f64> {
        let hid: Vec<f64> = self.hidden_pre(x, t).into_iter().map(f64::tanh).collect();
        self.output(&hid)
    }

    pub fn forward(&self, x: &Tensor, t: f64) -> Result<Tensor> {
        if x.numel() != self.dim {
            return Err(Error::ShapeMismatch {
                expected: vec![self.dim],
                found: x.shape().to_vec(),
            });
        }
        Ok(Tensor::from_parts(self.forward_raw(x.data(), t), x.shape().to_vec()))
    }

    /// Batch-mean of `‖v(x_t, t) − (x₁ − x₀)‖²` and its exact gradient with
    /// respect to the flat parameter vector.
    pub fn loss_and_grad(&self, batch: &[FmSample]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::param("flow-matching batch is empty"));
        }
        let (d, h) = (self.dim, self.hidden);
        let l = Self::layout(d, h);
        let mut grad = vec![0.0; l.end];
        let mut loss = 0.0;
        let inv_b = 1.0 / batch.len() as f64;
        for s in batch {
            if s.x0.len() != d || s.x1.len() != d {
                return Err(Error::param(format!("batch sample dimension differs from {d}")));
            }
            if !(0.0..=1.0).contains(&s.t) {
                return Err(Error::param(format!("time {} outside [0, 1]", s.t)));
            }
            let xt: Vec<f64> = s.x0.iter().zip(&s.x1).map(|(a, b)| s.t * b + (1.0 - s.t) * a).collect();
            let hid: Vec<f64> = self.hidden_pre(&xt, s.t).into_iter().map(f64::tanh).collect();
            let v = self.output(&hid);
            let resid: Vec<f64> = (0..d).map(|i| v[i] - (s.x1[i] - s.x0[i])).collect();
            loss += resid.iter().map(|r| r * r).sum::<f64>() * inv_b;

            let dv: Vec<f64> = resid.iter().map(|r| 2.0 * r * inv_b).collect();
            let mut dhid = vec![0.0; h];
            for i in 0..d {
                grad[l.b2 + i] += dv[i];
                for j in 0..h {
                    grad[l.w2 + i * h + j] += dv[i] * hid[j];
                    dhid[j] += self.params[l.w2 + i * h + j] * dv[i];
                }
            }
            for j in 0..h {
                let da = dhid[j] * (1.0 - hid[j] * hid[j]);
                grad[l.b1 + j] += da;
                let row = l.w1 + j * (d + 1);
                for k in 0..d {
                    grad[row + k] += da * xt[k];
                }
                grad[row + d] += da * s.t;
            }
        }
        Ok((loss, grad))
    }

    pub fn loss(&self, batch: &[FmSample]) -> Result<f64> {
        self.loss_and_grad(batch).map(|(l, _)| l)
    }

    pub fn meta(&self) -> MlpMeta {
        MlpMeta {
            d: self.dim,
            h: self.hidden,
            activation: Activation::Tanh,
        }
    }

    /// Writes parameters to `<path>` (F64) and the sidecar to `<path>.json`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let t = Tensor::vector(self.params.clone())?;
        io::write_f64(path, &t)?;
        let side = sidecar_path(path);
        let json = serde_json::to_string_pretty(&self.meta()).expect("meta serializes");
        std::fs::write(&side, json).map_err(|e| Error::io(&side, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let side = sidecar_path(path);
        let raw = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let meta: MlpMeta = serde_json::from_str(&raw).map_err(|e| Error::Format {
            path: side.clone(),
            message: e.to_string(),
        })?;
        let params = io::read_f64(path)?.into_vec();
        Self::from_params(meta.d, meta.h, params)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Draws `n` triples with `x₁ ~ prior`, `x₀ ~ N(0, I)`, `t ~ U(0, 1)`.
pub fn draw_fm_batch(prior: &FlowPrior, n: usize, rng: &mut SeededRng) -> Result<Vec<FmSample>> {
    (0..n)
        .map(|_| {
            let x1 = prior.sample(rng)?.into_vec();
            let x0 = (0..x1.len()).map(|_| rng.next_normal()).collect();
            let t = rng.next_uniform();
            Ok(FmSample { x0, x1, t })
        })
        .collect()
}

/// Plain SGD on the flow-matching loss with samples from an analytic prior.
pub fn train_flow_matching(
    model: &mut MlpVelocity,
    prior: &FlowPrior,
    cfg: &TrainConfig,
    rng: &mut SeededRng,
) -> Result<TrainReport> {
    if cfg.batch_size == 0 || cfg.eval_batch_size == 0 || cfg.eval_every == 0 {
        return Err(Error::param("batch sizes and eval_every must be >= 1"));
    }
    if prior.numel() != model.dim {
        return Err(Error::param(format!(
            "prior dimension {} differs from model dimension {}",
            prior.numel(),
            model.dim
        )));
    }
    let mut eval_rng = rng.child(0xE7A1);
    let eval_batch = draw_fm_batch(prior, cfg.eval_batch_size, &mut eval_rng)?;
    let mut curve = vec![(0, model.loss(&eval_batch)?)];
    for step in 1..=cfg.steps {
        let batch = draw_fm_batch(prior, cfg.batch_size, rng)?;
        let (loss, grad) = model.loss_and_grad(&batch)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { step });
        }
        for (p, g) in model.params.iter_mut().zip(&grad) {
            *p -= cfg.learning_rate * g;
        }
        if step % cfg.eval_every == 0 || step == cfg.steps {
            let eval = model.loss(&eval_batch)?;
            if !eval.is_finite() {
                return Err(Error::TrainingDiverged { step });
            }
            curve.push((step, eval));
        }
    }
    Ok(TrainReport { loss_curve: curve })
}
