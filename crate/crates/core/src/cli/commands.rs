use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{
    degrade_with, degraded_view, fit_corpus_gmm, run_benchmark, synthetic_corpus, BenchOptions, ImageMetrics,
    MethodSolver, TaskSpec,
};
use crate::error::{Error, Result};
use crate::io::{read_f64, read_tensor, write_f64, write_netpbm};
use crate::operators::{prox_data_cg, DiagonalizableOp, LinearOp};
use crate::prior::{FlowPrior, GaussianPrior, MlpVelocity};
use crate::renoise::{lemma1_bound, mean_denoise_exact_gaussian, mean_denoise_mc, spectral_norm_fd};
use crate::solvers::{
    affine_admm_spectral_radius, flow_admm_run, pnp_flow_run, prop1_tau_lower_bound, RunTrace, SolverConfig,
};
use crate::tensor::{sample_standard_normal, SeededRng, Tensor};

use super::config::{PriorSpec, RunConfig};
use super::{EXIT_OK, EXIT_OTHER, EXIT_PARTIAL};

/// What a command printed and the exit code it asks for.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub exit: i32,
    pub stdout: String,
}

impl CommandOutput {
    fn ok(stdout: String) -> Self {
        Self { exit: EXIT_OK, stdout }
    }
}

/// Written by `degrade`, read back by `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub task_name: String,
    pub task: TaskSpec,
    pub image_shape: Vec<usize>,
    pub measurement_shape: Vec<usize>,
    /// Seed of the synthetic corpus, absent for file inputs.
    pub corpus_seed: Option<u64>,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub index: usize,
    /// Paths are relative to the manifest's directory unless absolute.
    pub measurement: String,
    pub truth: Option<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path,
            message: e.to_string(),
        })
    }
}

fn resolve(dir: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Builds the configured prior for images of `shape`.
pub fn build_prior(spec: &PriorSpec, shape: &[usize]) -> Result<FlowPrior> {
    match spec {
        PriorSpec::Gaussian { mean, variance } => Ok(FlowPrior::Gaussian(GaussianPrior::isotropic(
            Tensor::full(shape, *mean)?,
            *variance,
        )?)),
        PriorSpec::Gmm {
            per_class,
            seed,
            var_floor,
        } => match *shape {
            [1, h, w] if h == w => Ok(FlowPrior::Gmm(fit_corpus_gmm(*per_class, h, *seed, *var_floor)?)),
            _ => Err(Error::Unsupported(format!(
                "the corpus mixture prior needs [1, S, S] images, got {shape:?}"
            ))),
        },
        PriorSpec::Mlp { path } => {
            let mlp = MlpVelocity::load(path)?;
            let numel: usize = shape.iter().product();
            if mlp.dim() != numel {
                return Err(Error::ShapeMismatch {
                    expected: vec![numel],
                    found: vec![mlp.dim()],
                });
            }
            Ok(FlowPrior::Mlp(mlp))
        }
    }
}

fn image_shape(cfg: &RunConfig) -> Vec<usize> {
    vec![1, cfg.io.image_size, cfg.io.image_size]
}

/// Clean images from `io.input` or the synthetic corpus.
fn clean_images(cfg: &RunConfig, default_count: Option<usize>) -> Result<(Vec<Tensor>, Option<u64>)> {
    if let Some(path) = &cfg.io.input {
        return Ok((vec![read_tensor(path)?], None));
    }
    let n = cfg.io.synthetic.or(default_count).ok_or_else(|| Error::Config {
        key: "io.synthetic".into(),
        line: 0,
        message: "set io.input or io.synthetic (or pass --synthetic N)".into(),
    })?;
    if n == 0 {
        return Err(Error::Config {
            key: "io.synthetic".into(),
            line: 0,
            message: "need at least one image".into(),
        });
    }
    let (images, _) = synthetic_corpus(n, cfg.io.image_size, cfg.bench.corpus_seed)?;
    Ok((images, Some(cfg.bench.corpus_seed)))
}

/// Writes `y_NNN.f64` per image plus `manifest.json`; synthetic ground truth
/// goes to `truth/`.
pub fn cmd_degrade(cfg: &RunConfig) -> Result<CommandOutput> {
    let (images, corpus_seed) = clean_images(cfg, None)?;
    let shape = images[0].shape().to_vec();
    for img in &images {
        images[0].ensure_same_shape(img)?;
    }
    let op = cfg.task.build(&shape)?;
    let out = &cfg.io.out;
    create_dir(out)?;
    if corpus_seed.is_some() {
        create_dir(&out.join("truth"))?;
    }
    if cfg.io.pgm {
        create_dir(&out.join("preview"))?;
    }
    let mut entries = Vec::with_capacity(images.len());
    for (i, x) in images.iter().enumerate() {
        let y = degrade_with(&op, x, cfg.task.noise_sigma, &mut cfg.task.image_rng(i))?;
        let name = format!("y_{i:03}.f64");
        write_f64(&out.join(&name), &y)?;
        if cfg.io.pgm {
            write_netpbm(&out.join(format!("preview/y_{i:03}.pgm")), &degraded_view(&op, &y)?)?;
        }
        let truth = match (&cfg.io.input, corpus_seed) {
            (Some(p), _) => Some(std::path::absolute(p).map_err(|e| Error::io(p, e))?.to_string_lossy().into_owned()),
            (None, Some(_)) => {
                let t = format!("truth/x_{i:03}.f64");
                write_f64(&out.join(&t), x)?;
                Some(t)
            }
            (None, None) => None,
        };
        entries.push(ManifestEntry {
            index: i,
            measurement: name,
            truth,
        });
    }
    let manifest = Manifest {
        task_name: cfg.task_name.clone(),
        task: cfg.task.clone(),
        image_shape: shape,
        measurement_shape: op.output_shape().to_vec(),
        corpus_seed,
        entries,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&out.join(MANIFEST_FILE), &json)?;
    Ok(CommandOutput::ok(format!(
        "degraded {} image(s) for task {} (noise sigma {}) into {}\n",
        manifest.entries.len(),
        manifest.task_name,
        manifest.task.noise_sigma,
        out.display()
    )))
}

#[derive(Debug, Clone, Serialize)]
struct SolveRow {
    index: usize,
    final_psnr: Option<f64>,
    final_ssim: Option<f64>,
    iterations: usize,
    denoiser_evals: usize,
}

fn run_method(
    method: &MethodSolver,
    op: &DiagonalizableOp,
    y: &Tensor,
    prior: &FlowPrior,
    truth: Option<&Tensor>,
    offset: u64,
) -> Result<(Tensor, RunTrace)> {
    match *method {
        MethodSolver::Flowadmm(mut c) => {
            c.seed = c.seed.wrapping_add(offset);
            flow_admm_run(op, y, prior, &c, truth)
        }
        MethodSolver::Pnpflow(mut c) => {
            c.seed = c.seed.wrapping_add(offset);
            pnp_flow_run(op, y, prior, &c, truth)
        }
    }
}

/// Reconstructs every measurement listed in `<out>/manifest.json` with the
/// configured solver, using the task recorded there.
pub fn cmd_solve(cfg: &RunConfig) -> Result<CommandOutput> {
    let dir = &cfg.io.out;
    let manifest = Manifest::load(dir)?;
    let op = manifest.task.build(&manifest.image_shape)?;
    if op.output_shape() != manifest.measurement_shape.as_slice() {
        return Err(Error::ShapeMismatch {
            expected: manifest.measurement_shape.clone(),
            found: op.output_shape().to_vec(),
        });
    }
    let mut inputs = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        let y = read_f64(&resolve(dir, &e.measurement))?;
        if y.shape() != manifest.measurement_shape.as_slice() {
            return Err(Error::ShapeMismatch {
                expected: manifest.measurement_shape.clone(),
                found: y.shape().to_vec(),
            });
        }
        let truth = match &e.truth {
            Some(p) => {
                let t = read_tensor(&resolve(dir, p))?;
                if t.shape() != manifest.image_shape.as_slice() {
                    return Err(Error::ShapeMismatch {
                        expected: manifest.image_shape.clone(),
                        found: t.shape().to_vec(),
                    });
                }
                Some(t)
            }
            None => None,
        };
        inputs.push((e.index, y, truth));
    }
    let prior = build_prior(&cfg.prior, &manifest.image_shape)?;

    let results: Vec<(Tensor, RunTrace)> = inputs
        .par_iter()
        .map(|(i, y, truth)| run_method(&cfg.method, &op, y, &prior, truth.as_ref(), *i as u64))
        .collect::<Result<_>>()?;

    let iterations = match cfg.method {
        MethodSolver::Flowadmm(c) => c.iterations,
        MethodSolver::Pnpflow(c) => c.iterations,
    };
    let mut rows = Vec::with_capacity(results.len());
    for ((i, _, truth), (rec, trace)) in inputs.iter().zip(&results) {
        write_f64(&dir.join(format!("recon_{i:03}.f64")), rec)?;
        trace.write_csv(&dir.join(format!("trace_{i:03}.csv")))?;
        if !trace.snapshots.is_empty() {
            trace.write_snapshots(&dir.join(format!("snapshots_{i:03}")))?;
        }
        let metrics = truth.as_ref().map(|t| ImageMetrics::score(rec, t)).transpose()?;
        rows.push(SolveRow {
            index: *i,
            final_psnr: metrics.map(|m| m.psnr),
            final_ssim: metrics.map(|m| m.ssim),
            iterations,
            denoiser_evals: trace.denoiser_evals,
        });
    }
    let json = serde_json::to_string_pretty(&rows).expect("summary serializes");
    write_text(&dir.join("summary.json"), &json)?;

    let mut text = String::new();
    for r in &rows {
        let _ = match r.final_psnr {
            Some(p) => writeln!(text, "image {}: PSNR {p:.2} dB, {} denoiser evals", r.index, r.denoiser_evals),
            None => writeln!(text, "image {}: {} denoiser evals", r.index, r.denoiser_evals),
        };
    }
    Ok(CommandOutput::ok(text))
}

/// Runs every `bench.methods` entry on a synthetic corpus and writes
/// `bench.csv` and `bench_summary.json`.
pub fn cmd_bench(cfg: &RunConfig) -> Result<CommandOutput> {
    let shape = image_shape(cfg);
    let (images, _) = synthetic_corpus(cfg.bench.images, cfg.io.image_size, cfg.bench.corpus_seed)?;
    let prior = build_prior(&cfg.prior, &shape)?;
    let opts = BenchOptions {
        resamples: cfg.bench.resamples,
        bootstrap_seed: cfg.bench.bootstrap_seed,
        baseline: cfg.bench.baseline,
    };
    let report = run_benchmark(&images, &cfg.task_name, &cfg.task, &prior, &cfg.bench.methods, &opts)?;
    create_dir(&cfg.io.out)?;
    write_text(&cfg.io.out.join("bench.csv"), &report.to_csv())?;
    write_text(&cfg.io.out.join("bench_summary.json"), &report.summary_json())?;

    let mut text = format!("task {} ({} images)\n", report.task, report.image_count());
    let _ = writeln!(
        text,
        "{:<16} {:>9} {:>7}  {:>24}  failures",
        "method", "PSNR", "SSIM", "dPSNR 95% CI"
    );
    let _ = writeln!(
        text,
        "{:<16} {:>9.3} {:>7.4}  {:>24}  0",
        "degraded",
        report.mean_degraded_psnr(),
        report.mean_degraded_ssim(),
        "-"
    );
    for m in &report.methods {
        let ci = report
            .comparison(&m.name)
            .and_then(|c| c.ci)
            .map(|c| format!("[{:+.3}, {:+.3}]", c.low, c.high))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            text,
            "{:<16} {:>9.3} {:>7.4}  {:>24}  {}",
            m.name,
            m.mean_psnr,
            m.mean_ssim,
            ci,
            m.failures()
        );
    }
    let exit = if report.failures() > 0 { EXIT_PARTIAL } else { EXIT_OK };
    Ok(CommandOutput { exit, stdout: text })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Estimates `(1−t)·L̂_v` at renoised late-stage FlowADMM inputs for every
/// `t` in `probe.t_grid`. Writes `lipschitz.csv` (one row per point) and
/// `lipschitz_summary.csv` (median and max per `t`).
pub fn cmd_probe_lipschitz(cfg: &RunConfig) -> Result<CommandOutput> {
    let MethodSolver::Flowadmm(solver) = cfg.method else {
        return Err(Error::Config {
            key: "solver.kind".into(),
            line: 0,
            message: "probe-lipschitz probes FlowADMM iterates; set solver.kind to flowadmm".into(),
        });
    };
    let (images, _) = clean_images(cfg, Some(1))?;
    let x = &images[0];
    let op = cfg.task.build(x.shape())?;
    let prior = build_prior(&cfg.prior, x.shape())?;
    let y = degrade_with(&op, x, cfg.task.noise_sigma, &mut cfg.task.image_rng(0))?;
    let keep = cfg.probe.points.min(solver.iterations);
    let run_cfg = SolverConfig {
        snapshot_every: Some(1),
        ..solver
    };
    let (_, trace) = flow_admm_run(&op, &y, &prior, &run_cfg, None)?;
    // z_k + u_k equals x_k + u_{k-1}, the input the mean denoiser saw at step k.
    let points: Vec<Tensor> = trace.snapshots[trace.snapshots.len() - keep..]
        .iter()
        .map(|s| s.z.add(&s.u))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, f64, usize)> = cfg
        .probe
        .t_grid
        .iter()
        .enumerate()
        .flat_map(|(ti, &t)| (0..points.len()).map(move |p| (ti, t, p)))
        .collect();
    let estimates: Vec<f64> = jobs
        .par_iter()
        .map(|&(ti, t, p)| -> Result<f64> {
            if t == 1.0 {
                return Ok(0.0);
            }
            let mut rng = SeededRng::with_stream(cfg.seed ^ 0x11b5, (ti * points.len() + p) as u64);
            let eps = sample_standard_normal(&mut rng, points[p].shape())?;
            let mut xt = points[p].scale(t);
            xt.axpy_in_place(1.0 - t, &eps)?;
            let field = |v: &Tensor| prior.velocity(t, v);
            let est = spectral_norm_fd(&field, &xt, cfg.probe.iters, cfg.probe.tol, cfg.probe.fd_step)?;
            Ok((1.0 - t) * est.value)
        })
        .collect::<Result<_>>()?;

    let mut csv = String::from("t,estimate\n");
    for (&(_, t, _), e) in jobs.iter().zip(&estimates) {
        let _ = writeln!(csv, "{t:.17e},{e:.17e}");
    }
    let mut summary = String::from("t,median,max,count\n");
    let mut text = format!("{:>8} {:>14} {:>14}\n", "t", "median", "max");
    for (ti, &t) in cfg.probe.t_grid.iter().enumerate() {
        let mut vals: Vec<f64> = estimates[ti * points.len()..(ti + 1) * points.len()].to_vec();
        vals.sort_by(f64::total_cmp);
        let (med, max) = (median(&vals), vals[vals.len() - 1]);
        let _ = writeln!(summary, "{t:.17e},{med:.17e},{max:.17e},{}", vals.len());
        let _ = writeln!(text, "{t:>8.4} {med:>14.6e} {max:>14.6e}");
    }
    create_dir(&cfg.io.out)?;
    write_text(&cfg.io.out.join("lipschitz.csv"), &csv)?;
    write_text(&cfg.io.out.join("lipschitz_summary.csv"), &summary)?;
    Ok(CommandOutput::ok(text))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

impl CheckStatus {
    fn label(self) -> &'static str {
        match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skip => "SKIP",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

fn row(name: &'static str, pass: bool, detail: String) -> CheckRow {
    CheckRow {
        name,
        status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
        detail,
    }
}

fn skip(name: &'static str, detail: impl Into<String>) -> CheckRow {
    CheckRow {
        name,
        status: CheckStatus::Skip,
        detail: detail.into(),
    }
}

fn check_adjoint(op: &DiagonalizableOp, rng: &mut SeededRng) -> Result<CheckRow> {
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let x = sample_standard_normal(rng, op.input_shape())?;
        let y = sample_standard_normal(rng, op.output_shape())?;
        let ax = op.apply(&x)?;
        let aty = op.adjoint(&y)?;
        let gap = (ax.dot(&y)? - x.dot(&aty)?).abs() / (ax.norm() * y.norm()).max(1e-300);
        worst = worst.max(gap);
    }
    Ok(row("adjoint", worst <= 1e-10, format!("max relative gap {worst:.2e}")))
}

fn check_prox(op: &DiagonalizableOp, tau: f64, rng: &mut SeededRng) -> Result<CheckRow> {
    let v = sample_standard_normal(rng, op.input_shape())?;
    let y = sample_standard_normal(rng, op.output_shape())?;
    let closed = op.prox_closed_form(&v, &y, tau)?;
    let cg = prox_data_cg(op, &v, &y, tau, 1e-12, 5000)?.x;
    let rel = cg.sub(&closed)?.norm() / closed.norm().max(1e-300);
    Ok(row("prox closed form vs CG", rel <= 1e-6, format!("relative gap {rel:.2e}")))
}

fn schedule_times(method: &MethodSolver) -> Result<Vec<f64>> {
    let (time, k) = match method {
        MethodSolver::Flowadmm(c) => (c.time, c.iterations),
        MethodSolver::Pnpflow(c) => (c.time, c.iterations),
    };
    (0..k).map(|i| time.eval(i, k)).collect()
}

fn distinct(ts: &[f64]) -> Vec<f64> {
    let mut v = ts.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn check_mc_unbiased(prior: &GaussianPrior, flow: &FlowPrior, t: f64, n: usize, rng: &mut SeededRng) -> Result<CheckRow> {
    let x = sample_standard_normal(rng, prior.shape())?;
    let exact = mean_denoise_exact_gaussian(flow, t, &x)?;
    let mc = mean_denoise_mc(flow, t, &x, n, rng)?;
    let sd = prior.renoise_std(t);
    let mut worst = 0.0f64;
    for ((a, b), s) in mc.data().iter().zip(exact.data()).zip(sd.data()) {
        let se = s / (n as f64).sqrt();
        let z = if se > 0.0 { (a - b).abs() / se } else if a == b { 0.0 } else { f64::INFINITY };
        worst = worst.max(z);
    }
    Ok(row(
        "mean denoiser MC vs exact",
        worst <= 6.0,
        format!("t = {t}, N = {n}, max |error| = {worst:.2} SE"),
    ))
}

/// Runs the invariant checks that apply to `cfg` and prints a table.
/// Exit code 1 when any check fails; skipped checks do not count.
pub fn cmd_validate(cfg: &RunConfig) -> Result<CommandOutput> {
    let rows = validate_rows(cfg)?;
    let mut text = format!("{:<28} {:<6} detail\n", "check", "status");
    for r in &rows {
        let _ = writeln!(text, "{:<28} {:<6} {}", r.name, r.status.label(), r.detail);
    }
    let failed = rows.iter().any(|r| r.status == CheckStatus::Fail);
    Ok(CommandOutput {
        exit: if failed { EXIT_OTHER } else { EXIT_OK },
        stdout: text,
    })
}

pub fn validate_rows(cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let shape = match &cfg.io.input {
        Some(p) => read_tensor(p)?.shape().to_vec(),
        None => image_shape(cfg),
    };
    let op = cfg.task.build(&shape)?;
    let mut rng = SeededRng::new(cfg.seed ^ 0x7a11d);
    let mut rows = vec![row("config", true, format!("preset {}, task {}", cfg.preset, cfg.task_name))];
    rows.push(check_adjoint(&op, &mut rng)?);
    let tau = match cfg.method {
        MethodSolver::Flowadmm(c) => c.tau,
        MethodSolver::Pnpflow(c) => c.step.lr.max(1e-3),
    };
    rows.push(check_prox(&op, tau, &mut rng)?);

    let times = schedule_times(&cfg.method)?;
    let monotone = times.windows(2).all(|w| w[0] <= w[1]);
    let in_range = times.iter().all(|t| (0.0..=1.0).contains(t));
    rows.push(row(
        "time schedule",
        monotone && in_range,
        format!(
            "t_0 = {:.4}, t_K-1 = {:.4}, non-decreasing: {monotone}",
            times[0],
            times[times.len() - 1]
        ),
    ));
    let (budget, k) = match cfg.method {
        MethodSolver::Flowadmm(c) => (c.samples.total(c.iterations), c.iterations),
        MethodSolver::Pnpflow(c) => (c.samples.total(c.iterations), c.iterations),
    };
    rows.push(row(
        "sample budget",
        budget >= k,
        format!("sum N_k = {budget} ({:.2} per iteration)", budget as f64 / k as f64),
    ));

    let prior = build_prior(&cfg.prior, &shape)?;
    let Some(gauss) = prior.as_gaussian() else {
        let why = format!("needs a Gaussian prior (configured: {})", prior.kind());
        rows.push(skip("mean denoiser MC vs exact", why.clone()));
        rows.push(skip("residual Lipschitz bound", why.clone()));
        rows.push(skip("Prop. 1 contraction", why));
        return Ok(rows);
    };
    let ts = distinct(&times);
    let t_last = ts[ts.len() - 1];
    rows.push(check_mc_unbiased(gauss, &prior, t_last, cfg.validate.samples, &mut rng)?);

    let mut lemma_ok = true;
    let mut worst_margin = f64::INFINITY;
    let mut xi = 0.0f64;
    for &t in ts.iter().filter(|&&t| t < 1.0) {
        let bound = lemma1_bound(t, gauss.velocity_lipschitz(t));
        let exact = gauss.residual_lipschitz(t);
        lemma_ok &= exact <= bound + 1e-12;
        worst_margin = worst_margin.min(bound - exact);
        xi = xi.max(bound);
    }
    rows.push(row(
        "residual Lipschitz bound",
        lemma_ok,
        format!("min margin {worst_margin:.3e}, xi = {xi:.6}"),
    ));

    let MethodSolver::Flowadmm(admm) = cfg.method else {
        rows.push(skip("Prop. 1 contraction", "applies to FlowADMM only"));
        return Ok(rows);
    };
    if !cfg.validate.prop1 {
        rows.push(skip("Prop. 1 contraction", "not requested"));
        return Ok(rows);
    }
    let mu = op.min_eig_ata().unwrap_or(0.0);
    match prop1_tau_lower_bound(xi, mu) {
        Err(Error::AssumptionViolated(why)) => {
            rows.push(skip("Prop. 1 contraction", format!("Prop. 1 hypotheses unmet: {why}")));
        }
        Err(e) => return Err(e),
        Ok(bound) if admm.tau <= bound => {
            rows.push(skip(
                "Prop. 1 contraction",
                format!("Prop. 1 hypotheses unmet: tau = {} <= bound {bound:.4}", admm.tau),
            ));
        }
        Ok(bound) => {
            let mut radius = 0.0f64;
            for &t in &ts {
                radius = radius.max(affine_admm_spectral_radius(gauss, &op, admm.tau, t)?);
            }
            rows.push(row(
                "Prop. 1 contraction",
                radius < 1.0,
                format!("tau = {} > bound {bound:.4}, max spectral radius {radius:.6}", admm.tau),
            ));
        }
    }
    Ok(rows)
}
