use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub k: usize,
    pub t: f64,
    pub n: usize,
    /// `‖x_{k+1} − z_{k+1}‖`.
    pub primal_residual: f64,
    /// `‖z_{k+1} − z_k‖`.
    pub dz: f64,
    /// `‖u_{k+1}‖`.
    pub u_norm: f64,
    pub psnr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub k: usize,
    pub x: Tensor,
    pub z: Tensor,
    pub u: Tensor,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterRecord>,
    pub snapshots: Vec<Snapshot>,
    pub denoiser_evals: usize,
    pub final_x: Option<Tensor>,
    pub final_u: Option<Tensor>,
}

fn num(v: f64) -> String {
    format!("{v:.17e}")
}

impl RunTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,t_k,N_k,primal_residual,dz,u_norm,psnr\n");
        for r in &self.records {
            let psnr = r.psnr.map(num).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.k,
                num(r.t),
                r.n,
                num(r.primal_residual),
                num(r.dz),
                num(r.u_norm),
                psnr
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Writes `x_<k>.f64`, `z_<k>.f64`, `u_<k>.f64` for every snapshot.
    pub fn write_snapshots(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for s in &self.snapshots {
            for (name, t) in [("x", &s.x), ("z", &s.z), ("u", &s.u)] {
                io::write_f64(&dir.join(format!("{name}_{:05}.f64", s.k)), t)?;
            }
        }
        Ok(())
    }
}
