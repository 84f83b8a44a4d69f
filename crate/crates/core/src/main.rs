use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flowadmm::cli::{self, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "flowadmm", version, about = "FlowADMM image restoration with flow-matching priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat JSON config with dotted keys; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `io.out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Degrade clean images and write measurements plus a manifest.
    Degrade {
        #[command(flatten)]
        common: Common,
        /// Number of synthetic images (overrides `io.synthetic`).
        #[arg(long)]
        synthetic: Option<usize>,
        /// Clean input image (overrides `io.input`).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Reconstruct the measurements listed in `<out>/manifest.json`.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Compare the configured methods on a synthetic corpus.
    Bench {
        #[command(flatten)]
        common: Common,
    },
    /// Estimate (1-t)·Lip(v_t) at renoised late-stage iterates.
    ProbeLipschitz {
        #[command(flatten)]
        common: Common,
    },
    /// Run invariant checks for the configured problem.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common, extra: Overrides) -> flowadmm::Result<RunConfig> {
    let overrides = Overrides {
        seed: common.seed,
        out: common.out.clone(),
        ..extra
    };
    match &common.config {
        Some(path) => RunConfig::load(path, &overrides),
        None => RunConfig::from_json_str("{}", &overrides),
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let result = match &args.command {
        Command::Degrade { common, synthetic, input } => load(
            common,
            Overrides {
                synthetic: *synthetic,
                input: input.clone(),
                ..Default::default()
            },
        )
        .and_then(|c| cli::cmd_degrade(&c)),
        Command::Solve { common } => load(common, Overrides::default()).and_then(|c| cli::cmd_solve(&c)),
        Command::Bench { common } => load(common, Overrides::default()).and_then(|c| cli::cmd_bench(&c)),
        Command::ProbeLipschitz { common } => {
            load(common, Overrides::default()).and_then(|c| cli::cmd_probe_lipschitz(&c))
        }
        Command::Validate { common } => load(common, Overrides::default()).and_then(|c| cli::cmd_validate(&c)),
    };
    match result {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.exit as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
