//! Command-line front end: run configs, the `degrade`, `solve`, `bench`,
//! `probe-lipschitz` and `validate` commands, and exit codes.

mod commands;
pub mod config;

pub use commands::{
    build_prior, cmd_bench, cmd_degrade, cmd_probe_lipschitz, cmd_solve, cmd_validate, validate_rows, CheckRow,
    CheckStatus, CommandOutput, Manifest, ManifestEntry, MANIFEST_FILE,
};
pub use config::{Overrides, PriorSpec, RunConfig, PRESETS};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
/// I/O and any other runtime error, or a failed `validate` check.
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
/// `bench` finished but some (method, image) runs failed.
pub const EXIT_PARTIAL: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } => EXIT_CONFIG,
        Error::Diverged { .. } => EXIT_DIVERGED,
        _ => EXIT_OTHER,
    }
}
