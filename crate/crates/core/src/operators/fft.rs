//! Unitary 2-D DFT applied plane by plane.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Cached plans for an `h × w` plane. Plans are `Send + Sync`, so one
/// instance can be shared by concurrent callers.
#[derive(Clone)]
pub struct Dft2 {
    h: usize,
    w: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft2").field("h", &self.h).field("w", &self.w).finish()
    }
}

impl Dft2 {
    pub fn new(h: usize, w: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            h,
            w,
            row_fwd: planner.plan_fft_forward(w),
            row_inv: planner.plan_fft_inverse(w),
            col_fwd: planner.plan_fft_forward(h),
            col_inv: planner.plan_fft_inverse(h),
        }
    }

    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }

    /// In-place transform of every `h*w` plane in `buf`. `unitary` scales by
    /// `1/sqrt(h w)`; otherwise the forward transform is unnormalized.
    pub fn forward(&self, buf: &mut [Complex64], unitary: bool) {
        self.run(buf, false, unitary);
    }

    pub fn inverse(&self, buf: &mut [Complex64], unitary: bool) {
        self.run(buf, true, unitary);
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool, unitary: bool) {
        let (rows, cols) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        let (h, w) = (self.h, self.w);
        let mut scratch = vec![Complex64::new(0.0, 0.0); h * w];
        for plane in buf.chunks_exact_mut(h * w) {
            rows.process(plane);
            for r in 0..h {
                for c in 0..w {
                    scratch[c * h + r] = plane[r * w + c];
                }
            }
            cols.process(&mut scratch);
            for r in 0..h {
                for c in 0..w {
                    plane[r * w + c] = scratch[c * h + r];
                }
            }
        }
        let scale = if unitary {
            1.0 / ((h * w) as f64).sqrt()
        } else if inverse {
            1.0 / (h * w) as f64
        } else {
            1.0
        };
        if scale != 1.0 {
            for v in buf.iter_mut() {
                *v *= scale;
            }
        }
    }
}
