use crate::error::{Error, Result};
use crate::operators::LinearOp;
use crate::tensor::Tensor;

/// Explicit row-major matrix acting on flat vectors. It has no factorized
/// form, so its prox goes through CG.
#[derive(Debug, Clone)]
pub struct DenseOp {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
}

impl DenseOp {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::param(format!(
                "dense operator needs {rows}x{cols} entries, got {}",
                entries.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
            input_shape: vec![cols],
            output_shape: vec![rows],
        })
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }
}

impl LinearOp for DenseOp {
    fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        if x.numel() != self.cols {
            return Err(Error::ShapeMismatch {
                expected: self.input_shape.clone(),
                found: x.shape().to_vec(),
            });
        }
        let out = self
            .entries
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x.data()).map(|(a, b)| a * b).sum())
            .collect();
        Ok(Tensor::from_parts(out, self.output_shape.clone()))
    }

    fn adjoint(&self, y: &Tensor) -> Result<Tensor> {
        if y.numel() != self.rows {
            return Err(Error::ShapeMismatch {
                expected: self.output_shape.clone(),
                found: y.shape().to_vec(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (row, &yr) in self.entries.chunks_exact(self.cols).zip(y.data()) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yr;
            }
        }
        Ok(Tensor::from_parts(out, self.input_shape.clone()))
    }
}
