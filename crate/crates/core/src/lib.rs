//! FlowADMM: plug-and-play ADMM whose prior step is the mean renoise-denoise
//! operator of a flow-matching denoiser, plus analytic flow priors for which
//! every convergence quantity has a closed form.

pub mod bench;
pub mod cli;
pub mod error;
pub mod io;
pub mod operators;
pub mod prior;
pub mod renoise;
pub mod solvers;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{l2_distance, mse, sample_standard_normal, SeededRng, Tensor};
