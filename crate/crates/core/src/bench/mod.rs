//! Degradation tasks, image metrics, the synthetic corpus, and a paired
//! benchmark harness with bootstrap confidence intervals.

mod bootstrap;
mod corpus;
mod metrics;
mod task;

pub use bootstrap::{paired_bootstrap_ci, BootstrapCi, DEFAULT_BOOTSTRAP_SEED, DEFAULT_RESAMPLES};
pub use corpus::{fit_corpus_gmm, synthetic_corpus, synthetic_image, CORPUS_CLASSES};
pub use metrics::{psnr, ssim, ssim_with_peak, PSNR_CAP_DB};
pub use task::{degrade, degrade_with, degraded_view, desk_tasks, TaskSpec};

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::FlowPrior;
use crate::solvers::{flow_admm_run, pnp_flow_run, PnpConfig, SolverConfig};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum MethodSolver {
    Flowadmm(SolverConfig),
    Pnpflow(PnpConfig),
}

impl MethodSolver {
    fn with_seed_offset(mut self, offset: u64) -> Self {
        match &mut self {
            MethodSolver::Flowadmm(c) => c.seed = c.seed.wrapping_add(offset),
            MethodSolver::Pnpflow(c) => c.seed = c.seed.wrapping_add(offset),
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MethodSolver::Flowadmm(c) => c.validate(),
            MethodSolver::Pnpflow(c) => c.validate(),
        }
    }

    /// Runs the solver and returns the reconstruction.
    pub fn solve(&self, op: &crate::operators::DiagonalizableOp, y: &Tensor, prior: &FlowPrior) -> Result<Tensor> {
        match self {
            MethodSolver::Flowadmm(c) => flow_admm_run(op, y, prior, c, None).map(|r| r.0),
            MethodSolver::Pnpflow(c) => pnp_flow_run(op, y, prior, c, None).map(|r| r.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub name: String,
    pub solver: MethodSolver,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub psnr: f64,
    pub ssim: f64,
}

impl ImageMetrics {
    /// Scores `estimate` clipped to `[0, 1]` against `truth`.
    pub fn score(estimate: &Tensor, truth: &Tensor) -> Result<Self> {
        let clipped = estimate.clamp(0.0, 1.0);
        Ok(Self {
            psnr: psnr(&clipped, truth, 1.0)?,
            ssim: ssim(&clipped, truth)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub name: String,
    /// Per image: metrics, or the solver error message.
    pub per_image: Vec<std::result::Result<ImageMetrics, String>>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

impl MethodOutcome {
    pub fn failures(&self) -> usize {
        self.per_image.iter().filter(|r| r.is_err()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub method: String,
    pub baseline: String,
    /// Images where both runs succeeded.
    pub pairs: usize,
    /// Images dropped because either run failed.
    pub excluded: usize,
    /// Interval on mean ΔPSNR = method − baseline; absent with no pairs.
    pub ci: Option<BootstrapCi>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub task: String,
    pub degraded: Vec<ImageMetrics>,
    pub methods: Vec<MethodOutcome>,
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchOptions {
    pub resamples: usize,
    pub bootstrap_seed: u64,
    /// Index into the method list of the method others are compared with.
    pub baseline: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            resamples: DEFAULT_RESAMPLES,
            bootstrap_seed: DEFAULT_BOOTSTRAP_SEED,
            baseline: 0,
        }
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    task: &'a str,
    method: &'a str,
    mean_psnr: f64,
    mean_ssim: f64,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    failures: usize,
}

impl BenchReport {
    pub fn image_count(&self) -> usize {
        self.degraded.len()
    }

    pub fn mean_degraded_psnr(&self) -> f64 {
        mean_of(self.degraded.iter().map(|m| m.psnr))
    }

    pub fn mean_degraded_ssim(&self) -> f64 {
        mean_of(self.degraded.iter().map(|m| m.ssim))
    }

    pub fn failures(&self) -> usize {
        self.methods.iter().map(MethodOutcome::failures).sum()
    }

    pub fn method(&self, name: &str) -> Option<&MethodOutcome> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn comparison(&self, method: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.method == method)
    }

    /// One row per (image, method), degraded input included.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image,method,psnr,ssim,status\n");
        for (i, d) in self.degraded.iter().enumerate() {
            let _ = writeln!(out, "{i},degraded,{:.17e},{:.17e},ok", d.psnr, d.ssim);
        }
        for m in &self.methods {
            for (i, r) in m.per_image.iter().enumerate() {
                match r {
                    Ok(v) => {
                        let _ = writeln!(out, "{i},{},{:.17e},{:.17e},ok", m.name, v.psnr, v.ssim);
                    }
                    Err(e) => {
                        let _ = writeln!(out, "{i},{},,,\"error: {}\"", m.name, e.replace('"', "'"));
                    }
                }
            }
        }
        out
    }

    /// Rows `{task, method, mean_psnr, mean_ssim, ci_low, ci_high, failures}`,
    /// the interval being on ΔPSNR against the baseline method.
    pub fn summary_json(&self) -> String {
        let mut rows = vec![SummaryRow {
            task: &self.task,
            method: "degraded",
            mean_psnr: self.mean_degraded_psnr(),
            mean_ssim: self.mean_degraded_ssim(),
            ci_low: None,
            ci_high: None,
            failures: 0,
        }];
        for m in &self.methods {
            let ci = self.comparison(&m.name).and_then(|c| c.ci);
            rows.push(SummaryRow {
                task: &self.task,
                method: &m.name,
                mean_psnr: m.mean_psnr,
                mean_ssim: m.mean_ssim,
                ci_low: ci.map(|c| c.low),
                ci_high: ci.map(|c| c.high),
                failures: m.failures(),
            });
        }
        serde_json::to_string_pretty(&rows).expect("summary rows serialize")
    }
}

/// Degrades every image once (noise stream keyed by image index, so all
/// methods see byte-identical measurements), runs every method on it, and
/// scores clipped outputs. Images run in parallel; results are merged in
/// image order.
pub fn run_benchmark(
    images: &[Tensor],
    task_name: &str,
    task: &TaskSpec,
    prior: &FlowPrior,
    methods: &[MethodSpec],
    opts: &BenchOptions,
) -> Result<BenchReport> {
    if images.len() < 2 {
        return Err(Error::param("a benchmark needs at least two images"));
    }
    if methods.is_empty() || opts.baseline >= methods.len() {
        return Err(Error::param("benchmark needs at least one method and a valid baseline index"));
    }
    for m in methods {
        m.solver.validate()?;
    }
    for img in images {
        images[0].ensure_same_shape(img)?;
    }
    let op = task.build(images[0].shape())?;

    type Row = (ImageMetrics, Vec<std::result::Result<ImageMetrics, String>>);
    let rows: Vec<Row> = images
        .par_iter()
        .enumerate()
        .map(|(i, x)| -> Result<Row> {
            let y = degrade_with(&op, x, task.noise_sigma, &mut task.image_rng(i))?;
            let degraded = ImageMetrics::score(&degraded_view(&op, &y)?, x)?;
            let per_method = methods
                .iter()
                .map(|m| {
                    m.solver
                        .with_seed_offset(i as u64)
                        .solve(&op, &y, prior)
                        .and_then(|rec| ImageMetrics::score(&rec, x))
                        .map_err(|e| e.to_string())
                })
                .collect();
            Ok((degraded, per_method))
        })
        .collect::<Result<_>>()?;

    let degraded: Vec<ImageMetrics> = rows.iter().map(|r| r.0).collect();
    let outcomes: Vec<MethodOutcome> = methods
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let per_image: Vec<_> = rows.iter().map(|r| r.1[j].clone()).collect();
            let ok = || per_image.iter().filter_map(|r| r.as_ref().ok());
            MethodOutcome {
                name: m.name.clone(),
                mean_psnr: mean_of(ok().map(|v| v.psnr)),
                mean_ssim: mean_of(ok().map(|v| v.ssim)),
                per_image,
            }
        })
        .collect();

    let base = &outcomes[opts.baseline];
    let mut comparisons = Vec::with_capacity(outcomes.len());
    for m in &outcomes {
        let deltas: Vec<f64> = m
            .per_image
            .iter()
            .zip(&base.per_image)
            .filter_map(|(a, b)| match (a, b) {
                (Ok(a), Ok(b)) => Some(a.psnr - b.psnr),
                _ => None,
            })
            .collect();
        let ci = if deltas.is_empty() {
            None
        } else {
            Some(paired_bootstrap_ci(&deltas, opts.resamples, 0.95, opts.bootstrap_seed)?)
        };
        comparisons.push(Comparison {
            method: m.name.clone(),
            baseline: base.name.clone(),
            pairs: deltas.len(),
            excluded: images.len() - deltas.len(),
            ci,
        });
    }

    Ok(BenchReport {
        task: task_name.to_string(),
        degraded,
        methods: outcomes,
        comparisons,
    })
}
