//! Flat JSON run configs with dotted keys, e.g.
//! `{"preset": "celeba-sr-desk", "solver.tau": 0.5, "task.noise_sigma": 0.05}`.
//!
//! A config starts from the built-in defaults, applies the named preset, then
//! the file's keys, then command-line overrides. Unknown keys and badly typed
//! values are reported with the key and its line in the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::bench::{MethodSolver, MethodSpec, TaskSpec, DEFAULT_BOOTSTRAP_SEED, DEFAULT_RESAMPLES};
use crate::error::{Error, Result};
use crate::operators::TaskOpSpec;
use crate::renoise::{DenoiseMode, SampleSchedule, TimeSchedule};
use crate::solvers::{PnpConfig, SolverConfig, StepSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Num,
    Int,
    Str,
    Bool,
    NumList,
    Methods,
}

const SCHED_KEYS: [(&str, Kind); 13] = [
    ("time.kind", Kind::Str),
    ("time.t_min", Kind::Num),
    ("time.t_max", Kind::Num),
    ("time.gamma", Kind::Num),
    ("time.t", Kind::Num),
    ("time.c", Kind::Num),
    ("time.r", Kind::Num),
    ("samples.kind", Kind::Str),
    ("samples.N", Kind::Int),
    ("samples.N_e", Kind::Int),
    ("samples.N_m", Kind::Int),
    ("samples.N_l", Kind::Int),
    ("samples.s1", Kind::Num),
];

/// Every accepted key and its value type (schedule keys are accepted under
/// both the `solver.` and `pnp.` prefixes).
pub const KEYS: &[(&str, &str)] = &[
    ("preset", "string: preset name"),
    ("seed", "integer: master seed"),
    ("task.name", "string"),
    ("task.op.kind", "identity | gaussian_blur | subsample | box_mask | bernoulli_mask"),
    ("task.op.kernel_size", "odd integer"),
    ("task.op.sigma_blur", "number"),
    ("task.op.stride", "integer"),
    ("task.op.half_size", "integer"),
    ("task.op.missing_prob", "number in [0, 1)"),
    ("task.op.mask_seed", "integer"),
    ("task.noise_sigma", "number >= 0"),
    ("task.seed", "integer (defaults to seed)"),
    ("prior.kind", "gaussian | gmm | mlp"),
    ("prior.gaussian.mean", "number"),
    ("prior.gaussian.variance", "number >= 0"),
    ("prior.gmm.per_class", "integer"),
    ("prior.gmm.seed", "integer"),
    ("prior.gmm.var_floor", "number > 0"),
    ("prior.mlp.path", "path to F64 parameters with a .json sidecar"),
    ("solver.kind", "flowadmm | pnpflow"),
    ("solver.iterations", "integer K >= 1"),
    ("solver.tau", "number > 0"),
    ("solver.mode", "exact_gaussian | monte_carlo"),
    ("solver.seed", "integer (defaults to seed)"),
    ("solver.snapshot_every", "integer"),
    ("pnp.iterations", "integer K >= 1"),
    ("pnp.lr", "number >= 0"),
    ("pnp.alpha", "number >= 0"),
    ("pnp.mode", "exact_gaussian | monte_carlo"),
    ("pnp.seed", "integer (defaults to seed)"),
    ("io.input", "path to an .f64/.pgm/.ppm image"),
    ("io.synthetic", "integer: number of synthetic images"),
    ("io.image_size", "integer: synthetic image side"),
    ("io.out", "output directory"),
    ("io.pgm", "bool: also write PGM previews"),
    ("bench.images", "integer >= 2"),
    ("bench.corpus_seed", "integer"),
    ("bench.methods", "list of objects with a name and key overrides"),
    ("bench.resamples", "integer"),
    ("bench.bootstrap_seed", "integer"),
    ("bench.baseline", "integer index into bench.methods"),
    ("probe.t_grid", "list of numbers in [0, 1]"),
    ("probe.points", "integer"),
    ("probe.iters", "integer"),
    ("probe.tol", "number"),
    ("probe.fd_step", "number"),
    ("validate.prop1", "bool"),
    ("validate.samples", "integer"),
];

fn kind_of(key: &str) -> Option<Kind> {
    for prefix in ["solver.", "pnp."] {
        if let Some(rest) = key.strip_prefix(prefix) {
            if rest == "samples.s2" {
                return Some(Kind::Num);
            }
            if let Some((_, k)) = SCHED_KEYS.iter().find(|(n, _)| *n == rest) {
                return Some(*k);
            }
        }
    }
    let kind = match key {
        "preset" | "task.name" | "task.op.kind" | "prior.kind" | "prior.mlp.path" | "solver.kind" | "solver.mode"
        | "pnp.mode" | "io.input" | "io.out" => Kind::Str,
        "io.pgm" | "validate.prop1" => Kind::Bool,
        "probe.t_grid" => Kind::NumList,
        "bench.methods" => Kind::Methods,
        "seed" | "task.op.kernel_size" | "task.op.stride" | "task.op.half_size" | "task.op.mask_seed" | "task.seed"
        | "prior.gmm.per_class" | "prior.gmm.seed" | "solver.iterations" | "solver.seed" | "solver.snapshot_every"
        | "pnp.iterations" | "pnp.seed" | "io.synthetic" | "io.image_size" | "bench.images" | "bench.corpus_seed"
        | "bench.resamples" | "bench.bootstrap_seed" | "bench.baseline" | "probe.points" | "probe.iters"
        | "validate.samples" => Kind::Int,
        "task.op.sigma_blur" | "task.op.missing_prob" | "task.noise_sigma" | "prior.gaussian.mean"
        | "prior.gaussian.variance" | "prior.gmm.var_floor" | "solver.tau" | "pnp.lr" | "pnp.alpha" | "probe.tol"
        | "probe.fd_step" => Kind::Num,
        _ => return None,
    };
    Some(kind)
}

fn type_ok(kind: Kind, v: &Value) -> bool {
    match kind {
        Kind::Num => v.is_number(),
        Kind::Int => v.is_u64(),
        Kind::Str => v.is_string(),
        Kind::Bool => v.is_boolean(),
        Kind::NumList => v.as_array().is_some_and(|a| a.iter().all(Value::is_number)),
        Kind::Methods => v.as_array().is_some_and(|a| a.iter().all(Value::is_object)),
    }
}

/// Key → (value, line in the source file; 0 for defaults and overrides).
#[derive(Debug, Clone, Default)]
struct Flat {
    entries: BTreeMap<String, (Value, usize)>,
}

fn err(key: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        line,
        message: message.into(),
    }
}

/// Line of the first `"key":` in `text`, or 0.
fn line_of(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    let mut from = 0;
    while let Some(pos) = text[from..].find(&needle) {
        let at = from + pos;
        let rest = text[at + needle.len()..].trim_start();
        if rest.starts_with(':') {
            return text[..at].matches('\n').count() + 1;
        }
        from = at + needle.len();
    }
    0
}

impl Flat {
    fn from_object(obj: &Map<String, Value>, text: &str, allow_name: bool) -> Result<Self> {
        let mut flat = Flat::default();
        for (key, value) in obj {
            let line = line_of(text, key);
            if allow_name && key == "name" {
                if !value.is_string() {
                    return Err(err(key, line, "method name must be a string"));
                }
                flat.entries.insert(key.clone(), (value.clone(), line));
                continue;
            }
            let kind = kind_of(key).ok_or_else(|| err(key, line, "unknown key"))?;
            if !type_ok(kind, value) {
                return Err(err(key, line, format!("expected {}", describe(kind))));
            }
            flat.entries.insert(key.clone(), (value.clone(), line));
        }
        Ok(flat)
    }

    fn set(&mut self, key: &str, value: Value) {
        self.entries.insert(key.to_string(), (value, 0));
    }

    fn overlay(&self, other: &Flat) -> Flat {
        let mut out = self.clone();
        for (k, v) in &other.entries {
            out.entries.insert(k.clone(), v.clone());
        }
        out
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map(|e| e.1).unwrap_or(0)
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn raw(&self, key: &str) -> Result<&Value> {
        self.entries
            .get(key)
            .map(|e| &e.0)
            .ok_or_else(|| err(key, 0, "required key is missing"))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        self.raw(key)?
            .as_f64()
            .ok_or_else(|| err(key, self.line(key), "expected a number"))
    }

    fn u64(&self, key: &str) -> Result<u64> {
        self.raw(key)?
            .as_u64()
            .ok_or_else(|| err(key, self.line(key), "expected a non-negative integer"))
    }

    fn usize(&self, key: &str) -> Result<usize> {
        Ok(self.u64(key)? as usize)
    }

    fn str(&self, key: &str) -> Result<&str> {
        self.raw(key)?
            .as_str()
            .ok_or_else(|| err(key, self.line(key), "expected a string"))
    }

    fn bool(&self, key: &str) -> Result<bool> {
        self.raw(key)?
            .as_bool()
            .ok_or_else(|| err(key, self.line(key), "expected true or false"))
    }

    fn opt_usize(&self, key: &str) -> Result<Option<usize>> {
        if self.has(key) {
            self.usize(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn seed_or(&self, key: &str, master: u64) -> Result<u64> {
        if self.has(key) {
            self.u64(key)
        } else {
            Ok(master)
        }
    }

    /// Checks a semantic constraint, attributing failures to `key`.
    fn check(&self, key: &str, r: Result<()>) -> Result<()> {
        r.map_err(|e| match e {
            Error::Config { .. } => e,
            other => err(key, self.line(key), other.to_string()),
        })
    }
}

fn describe(kind: Kind) -> &'static str {
    match kind {
        Kind::Num => "a number",
        Kind::Int => "a non-negative integer",
        Kind::Str => "a string",
        Kind::Bool => "true or false",
        Kind::NumList => "a list of numbers",
        Kind::Methods => "a list of objects",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    /// Isotropic Gaussian with constant mean, shaped like the images.
    Gaussian { mean: f64, variance: f64 },
    /// Mixture fitted on `per_class` synthetic images of each class.
    Gmm { per_class: usize, seed: u64, var_floor: f64 },
    Mlp { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IoConfig {
    pub input: Option<PathBuf>,
    pub synthetic: Option<usize>,
    pub image_size: usize,
    pub out: PathBuf,
    pub pgm: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub images: usize,
    pub corpus_seed: u64,
    pub methods: Vec<MethodSpec>,
    pub resamples: usize,
    pub bootstrap_seed: u64,
    pub baseline: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub t_grid: Vec<f64>,
    pub points: usize,
    pub iters: usize,
    pub tol: f64,
    pub fd_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateConfig {
    pub prop1: bool,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: String,
    pub seed: u64,
    pub task_name: String,
    pub task: TaskSpec,
    pub prior: PriorSpec,
    /// The solver `solve` runs.
    pub method: MethodSolver,
    pub io: IoConfig,
    pub bench: BenchConfig,
    pub probe: ProbeConfig,
    pub validate: ValidateConfig,
}

/// Names of the built-in presets.
pub const PRESETS: &[&str] = &[
    "celeba-denoising-desk",
    "celeba-deblurring-desk",
    "celeba-sr-desk",
    "celeba-random-inpainting-desk",
    "celeba-box-inpainting-desk",
    "afhq-denoising-desk",
    "afhq-deblurring-desk",
    "afhq-sr-desk",
    "afhq-random-inpainting-desk",
    "afhq-box-inpainting-desk",
    "celeba-sr8-desk",
];

pub const DEFAULT_PRESET: &str = "celeba-denoising-desk";

fn base_defaults() -> Flat {
    let mut f = Flat::default();
    let pairs: Vec<(&str, Value)> = vec![
        ("seed", 0.into()),
        ("prior.kind", "gmm".into()),
        ("prior.gaussian.mean", 0.5.into()),
        ("prior.gaussian.variance", 0.05.into()),
        ("prior.gmm.per_class", 30.into()),
        ("prior.gmm.seed", 99.into()),
        ("prior.gmm.var_floor", 1e-4.into()),
        ("solver.kind", "flowadmm".into()),
        ("solver.mode", "monte_carlo".into()),
        ("solver.time.kind", "power_law".into()),
        ("solver.time.t_max", 0.95.into()),
        ("pnp.mode", "monte_carlo".into()),
        ("pnp.lr", 1.0.into()),
        ("pnp.time.kind", "power_law".into()),
        ("pnp.time.t_min", 0.0.into()),
        ("pnp.time.t_max", 0.99.into()),
        ("pnp.time.gamma", 1.0.into()),
        ("pnp.samples.kind", "constant".into()),
        ("pnp.samples.N", 5.into()),
        ("io.image_size", 32.into()),
        ("io.out", "out".into()),
        ("io.pgm", false.into()),
        ("bench.images", 16.into()),
        ("bench.corpus_seed", 11.into()),
        ("bench.resamples", (DEFAULT_RESAMPLES as u64).into()),
        ("bench.bootstrap_seed", DEFAULT_BOOTSTRAP_SEED.into()),
        ("bench.baseline", 0.into()),
        ("probe.t_grid", serde_json::json!([0.9, 0.95, 0.99, 1.0])),
        ("probe.points", 8.into()),
        ("probe.iters", 500.into()),
        ("probe.tol", 1e-10.into()),
        ("validate.prop1", true.into()),
        ("validate.samples", 4096.into()),
        (
            "bench.methods",
            serde_json::json!([
                {"name": "pnpflow", "solver.kind": "pnpflow"},
                {"name": "flowadmm", "solver.kind": "flowadmm"}
            ]),
        ),
    ];
    for (k, v) in pairs {
        f.set(k, v);
    }
    f
}

fn three_phase(f: &mut Flat, prefix: &str, n: [u64; 3], s1: f64, s2: f64) {
    f.set(&format!("{prefix}.samples.kind"), "three_phase".into());
    f.set(&format!("{prefix}.samples.N_e"), n[0].into());
    f.set(&format!("{prefix}.samples.N_m"), n[1].into());
    f.set(&format!("{prefix}.samples.N_l"), n[2].into());
    f.set(&format!("{prefix}.samples.s1"), s1.into());
    f.set(&format!("{prefix}.samples.s2"), s2.into());
}

struct AdmmRow {
    k: u64,
    tau: f64,
    t_min: f64,
    t_max: f64,
    gamma: f64,
    /// `None` means a constant 5 samples per iteration.
    phases: Option<([u64; 3], f64, f64)>,
}

/// Preset keys: task operator rescaled to 32×32, FlowADMM and PnP-Flow
/// hyperparameters per dataset and task.
fn preset_keys(name: &str) -> Option<Flat> {
    let (dataset, task) = name.strip_suffix("-desk")?.split_once('-')?;
    let large = match dataset {
        "celeba" => false,
        "afhq" => true,
        _ => return None,
    };
    let mut f = Flat::default();
    let op = |f: &mut Flat, kind: &str, sigma: f64| {
        f.set("task.op.kind", kind.into());
        f.set("task.noise_sigma", sigma.into());
    };
    // (FlowADMM row, PnP-Flow K, PnP-Flow alpha)
    let (row, pnp_k, pnp_alpha) = match (task, large) {
        ("denoising", _) => {
            op(&mut f, "identity", 0.2);
            (AdmmRow { k: 100, tau: 5.0, t_min: 0.5, t_max: 0.95, gamma: 1.0, phases: Some(([1, 1, 41], 0.5, 0.9)) }, 100, 0.8)
        }
        ("deblurring", _) => {
            op(&mut f, "gaussian_blur", 0.05);
            f.set("task.op.kernel_size", 15.into());
            f.set("task.op.sigma_blur", (if large { 0.75 } else { 0.25 }).into());
            if large {
                (AdmmRow { k: 100, tau: 0.25, t_min: 0.5, t_max: 0.95, gamma: 0.5, phases: None }, 500, 0.01)
            } else {
                (AdmmRow { k: 100, tau: 0.5, t_min: 0.5, t_max: 0.95, gamma: 0.5, phases: Some(([1, 1, 41], 0.5, 0.9)) }, 100, 0.01)
            }
        }
        ("sr", _) => {
            op(&mut f, "subsample", 0.05);
            f.set("task.op.stride", (if large { 4 } else { 2 }).into());
            if large {
                (AdmmRow { k: 500, tau: 0.25, t_min: 0.3, t_max: 0.95, gamma: 1.0, phases: Some(([1, 4, 29], 0.5, 0.9)) }, 500, 0.01)
            } else {
                (AdmmRow { k: 100, tau: 0.5, t_min: 0.3, t_max: 0.95, gamma: 1.0, phases: Some(([1, 3, 35], 0.6, 0.9)) }, 100, 0.3)
            }
        }
        ("sr8", false) => {
            op(&mut f, "subsample", 0.05);
            f.set("task.op.stride", 8.into());
            f.set("pnp.lr", 2.0.into());
            (AdmmRow { k: 100, tau: 0.1, t_min: 0.2, t_max: 0.95, gamma: 1.0, phases: Some(([1, 3, 35], 0.6, 0.9)) }, 100, 0.0)
        }
        ("random-inpainting", _) => {
            op(&mut f, "bernoulli_mask", 0.01);
            f.set("task.op.missing_prob", 0.7.into());
            f.set("task.op.mask_seed", 0x6d61736bu64.into());
            if large {
                (AdmmRow { k: 200, tau: 0.125, t_min: 0.3, t_max: 0.95, gamma: 0.5, phases: Some(([1, 3, 33], 0.5, 0.9)) }, 200, 0.01)
            } else {
                (AdmmRow { k: 100, tau: 0.25, t_min: 0.3, t_max: 0.95, gamma: 0.5, phases: Some(([1, 4, 29], 0.5, 0.9)) }, 100, 0.01)
            }
        }
        ("box-inpainting", _) => {
            op(&mut f, "box_mask", 0.05);
            f.set("task.op.half_size", (if large { 10 } else { 5 }).into());
            if large {
                (AdmmRow { k: 100, tau: 0.5, t_min: 0.1, t_max: 0.9, gamma: 2.0, phases: Some(([1, 3, 19], 0.6, 0.8)) }, 100, 0.5)
            } else {
                (AdmmRow { k: 100, tau: 1.0, t_min: 0.1, t_max: 0.95, gamma: 2.0, phases: Some(([1, 4, 35], 0.7, 0.9)) }, 100, 0.5)
            }
        }
        _ => return None,
    };
    f.set("task.name", name.trim_end_matches("-desk").into());
    f.set("solver.iterations", row.k.into());
    f.set("solver.tau", row.tau.into());
    f.set("solver.time.t_min", row.t_min.into());
    f.set("solver.time.t_max", row.t_max.into());
    f.set("solver.time.gamma", row.gamma.into());
    match row.phases {
        Some((n, s1, s2)) => three_phase(&mut f, "solver", n, s1, s2),
        None => {
            f.set("solver.samples.kind", "constant".into());
            f.set("solver.samples.N", 5.into());
        }
    }
    f.set("pnp.iterations", pnp_k.into());
    f.set("pnp.alpha", pnp_alpha.into());
    Some(f)
}

fn parse_time(f: &Flat, prefix: &str) -> Result<TimeSchedule> {
    let key = |s: &str| format!("{prefix}.time.{s}");
    let kind_key = key("kind");
    let sched = match f.str(&kind_key)? {
        "power_law" => TimeSchedule::PowerLaw {
            t_min: f.f64(&key("t_min"))?,
            t_max: f.f64(&key("t_max"))?,
            gamma: f.f64(&key("gamma"))?,
        },
        "constant" => TimeSchedule::Constant { t: f.f64(&key("t"))? },
        "geometric" => TimeSchedule::Geometric {
            t_max: f.f64(&key("t_max"))?,
            c: f.f64(&key("c"))?,
            r: f.f64(&key("r"))?,
        },
        "harmonic" => TimeSchedule::Harmonic { t_max: f.f64(&key("t_max"))? },
        other => return Err(err(&kind_key, f.line(&kind_key), format!("unknown time schedule `{other}`"))),
    };
    f.check(&kind_key, sched.validate())?;
    Ok(sched)
}

fn parse_samples(f: &Flat, prefix: &str) -> Result<SampleSchedule> {
    let key = |s: &str| format!("{prefix}.samples.{s}");
    let kind_key = key("kind");
    let sched = match f.str(&kind_key)? {
        "constant" => SampleSchedule::Constant { n: f.usize(&key("N"))? },
        "three_phase" => SampleSchedule::ThreePhase {
            n_e: f.usize(&key("N_e"))?,
            n_m: f.usize(&key("N_m"))?,
            n_l: f.usize(&key("N_l"))?,
            s1: f.f64(&key("s1"))?,
            s2: f.f64(&key("s2"))?,
        },
        other => return Err(err(&kind_key, f.line(&kind_key), format!("unknown sample schedule `{other}`"))),
    };
    f.check(&kind_key, sched.validate())?;
    Ok(sched)
}

fn parse_mode(f: &Flat, key: &str) -> Result<DenoiseMode> {
    match f.str(key)? {
        "exact_gaussian" => Ok(DenoiseMode::ExactGaussian),
        "monte_carlo" => Ok(DenoiseMode::MonteCarlo),
        other => Err(err(key, f.line(key), format!("unknown estimator mode `{other}`"))),
    }
}

fn parse_method(f: &Flat, master: u64) -> Result<MethodSolver> {
    match f.str("solver.kind")? {
        "flowadmm" => {
            let cfg = SolverConfig {
                tau: f.f64("solver.tau")?,
                iterations: f.usize("solver.iterations")?,
                time: parse_time(f, "solver")?,
                samples: parse_samples(f, "solver")?,
                mode: parse_mode(f, "solver.mode")?,
                seed: f.seed_or("solver.seed", master)?,
                snapshot_every: f.opt_usize("solver.snapshot_every")?,
            };
            if cfg.iterations == 0 {
                return Err(err("solver.iterations", f.line("solver.iterations"), "K must be >= 1"));
            }
            f.check("solver.tau", cfg.validate())?;
            Ok(MethodSolver::Flowadmm(cfg))
        }
        "pnpflow" => {
            let cfg = PnpConfig {
                iterations: f.usize("pnp.iterations")?,
                step: StepSchedule {
                    lr: f.f64("pnp.lr")?,
                    alpha: f.f64("pnp.alpha")?,
                },
                time: parse_time(f, "pnp")?,
                samples: parse_samples(f, "pnp")?,
                mode: parse_mode(f, "pnp.mode")?,
                seed: f.seed_or("pnp.seed", master)?,
            };
            if cfg.iterations == 0 {
                return Err(err("pnp.iterations", f.line("pnp.iterations"), "K must be >= 1"));
            }
            f.check("pnp.lr", cfg.validate())?;
            Ok(MethodSolver::Pnpflow(cfg))
        }
        other => Err(err("solver.kind", f.line("solver.kind"), format!("unknown solver `{other}`"))),
    }
}

fn parse_task(f: &Flat, master: u64) -> Result<TaskSpec> {
    let kind_key = "task.op.kind";
    let op = match f.str(kind_key)? {
        "identity" => TaskOpSpec::Identity,
        "gaussian_blur" => TaskOpSpec::GaussianBlur {
            kernel_size: f.usize("task.op.kernel_size")?,
            sigma_blur: f.f64("task.op.sigma_blur")?,
        },
        "subsample" => TaskOpSpec::Subsample { stride: f.usize("task.op.stride")? },
        "box_mask" => TaskOpSpec::BoxMask { half_size: f.usize("task.op.half_size")? },
        "bernoulli_mask" => TaskOpSpec::BernoulliMask {
            missing_prob: f.f64("task.op.missing_prob")?,
            mask_seed: f.u64("task.op.mask_seed")?,
        },
        other => return Err(err(kind_key, f.line(kind_key), format!("unknown operator `{other}`"))),
    };
    let task = TaskSpec {
        op,
        noise_sigma: f.f64("task.noise_sigma")?,
        seed: f.seed_or("task.seed", master)?,
    };
    f.check(kind_key, task.validate())?;
    Ok(task)
}

fn parse_prior(f: &Flat) -> Result<PriorSpec> {
    let spec = match f.str("prior.kind")? {
        "gaussian" => PriorSpec::Gaussian {
            mean: f.f64("prior.gaussian.mean")?,
            variance: f.f64("prior.gaussian.variance")?,
        },
        "gmm" => PriorSpec::Gmm {
            per_class: f.usize("prior.gmm.per_class")?,
            seed: f.u64("prior.gmm.seed")?,
            var_floor: f.f64("prior.gmm.var_floor")?,
        },
        "mlp" => PriorSpec::Mlp {
            path: PathBuf::from(f.str("prior.mlp.path")?),
        },
        other => return Err(err("prior.kind", f.line("prior.kind"), format!("unknown prior `{other}`"))),
    };
    if let PriorSpec::Gaussian { variance, .. } = spec {
        if !(variance >= 0.0) {
            return Err(err("prior.gaussian.variance", f.line("prior.gaussian.variance"), "must be >= 0"));
        }
    }
    Ok(spec)
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub synthetic: Option<usize>,
    pub input: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults of the default preset.
    pub fn default_config() -> Result<Self> {
        Self::from_json_str("{}", &Overrides::default())
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, overrides)
    }

    pub fn from_json_str(text: &str, overrides: &Overrides) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| err("<document>", e.line(), e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| err("<document>", 1, "config must be a JSON object"))?;
        let file = Flat::from_object(obj, text, false)?;

        let preset = if file.has("preset") {
            file.str("preset")?.to_string()
        } else {
            DEFAULT_PRESET.to_string()
        };
        let preset_flat = preset_keys(&preset).ok_or_else(|| {
            err(
                "preset",
                file.line("preset"),
                format!("unknown preset `{preset}`; known: {}", PRESETS.join(", ")),
            )
        })?;
        let mut merged = base_defaults().overlay(&preset_flat).overlay(&file);
        if let Some(seed) = overrides.seed {
            merged.set("seed", seed.into());
        }
        if let Some(out) = &overrides.out {
            merged.set("io.out", out.to_string_lossy().into_owned().into());
        }
        if let Some(n) = overrides.synthetic {
            merged.set("io.synthetic", (n as u64).into());
        }
        if let Some(p) = &overrides.input {
            merged.set("io.input", p.to_string_lossy().into_owned().into());
        }

        let seed = merged.u64("seed")?;
        let task = parse_task(&merged, seed)?;
        let prior = parse_prior(&merged)?;
        let method = parse_method(&merged, seed)?;

        let mut methods = Vec::new();
        let list = merged.raw("bench.methods")?.as_array().cloned().unwrap_or_default();
        for (i, entry) in list.iter().enumerate() {
            let obj = entry.as_object().expect("checked when parsing");
            let local = Flat::from_object(obj, text, true)?;
            if local.entries.keys().any(|k| k.starts_with("bench.") || k == "preset") {
                return Err(err("bench.methods", merged.line("bench.methods"), "method entries cannot override bench keys or the preset"));
            }
            let name = match local.entries.get("name") {
                Some((v, _)) => v.as_str().unwrap_or_default().to_string(),
                None => format!("method{i}"),
            };
            methods.push(MethodSpec {
                name,
                solver: parse_method(&merged.overlay(&local), seed)?,
            });
        }
        let baseline = merged.usize("bench.baseline")?;
        let images = merged.usize("bench.images")?;
        if images < 2 {
            return Err(err("bench.images", merged.line("bench.images"), "need at least 2 images"));
        }
        if methods.is_empty() || baseline >= methods.len() {
            return Err(err("bench.baseline", merged.line("bench.baseline"), "baseline must index into bench.methods"));
        }

        let t_grid: Vec<f64> = merged
            .raw("probe.t_grid")?
            .as_array()
            .map(|a| a.iter().filter_map(Value::as_f64).collect())
            .unwrap_or_default();
        if t_grid.is_empty() || t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(err("probe.t_grid", merged.line("probe.t_grid"), "need a non-empty list of times in [0, 1]"));
        }

        let io = IoConfig {
            input: if merged.has("io.input") { Some(PathBuf::from(merged.str("io.input")?)) } else { None },
            synthetic: merged.opt_usize("io.synthetic")?,
            image_size: merged.usize("io.image_size")?,
            out: PathBuf::from(merged.str("io.out")?),
            pgm: merged.bool("io.pgm")?,
        };
        if io.image_size < 11 {
            return Err(err("io.image_size", merged.line("io.image_size"), "image side must be at least 11"));
        }

        Ok(RunConfig {
            task_name: if merged.has("task.name") {
                merged.str("task.name")?.to_string()
            } else {
                preset.trim_end_matches("-desk").to_string()
            },
            preset,
            seed,
            task,
            prior,
            method,
            io,
            bench: BenchConfig {
                images,
                corpus_seed: merged.u64("bench.corpus_seed")?,
                methods,
                resamples: merged.usize("bench.resamples")?,
                bootstrap_seed: merged.u64("bench.bootstrap_seed")?,
                baseline,
            },
            probe: ProbeConfig {
                t_grid,
                points: merged.usize("probe.points")?.max(1),
                iters: merged.usize("probe.iters")?.max(1),
                tol: merged.f64("probe.tol")?,
                fd_step: if merged.has("probe.fd_step") { Some(merged.f64("probe.fd_step")?) } else { None },
            },
            validate: ValidateConfig {
                prop1: merged.bool("validate.prop1")?,
                samples: merged.usize("validate.samples")?.max(1),
            },
        })
    }
}
