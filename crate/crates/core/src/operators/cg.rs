use crate::error::{Error, Result};
use crate::operators::LinearOp;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Tensor,
    pub iterations: usize,
    /// Final `‖r‖ / ‖rhs‖`.
    pub relative_residual: f64,
}

/// Solves `(I + μAᵀA) x = v + μAᵀy` by conjugate gradients from `x = 0`.
///
/// Stops once `‖r‖ ≤ tol·‖rhs‖`; exceeding `max_iters` is an error that
/// carries the last relative residual.
pub fn prox_data_cg<A: LinearOp + ?Sized>(
    op: &A,
    v: &Tensor,
    y: &Tensor,
    mu: f64,
    tol: f64,
    max_iters: usize,
) -> Result<CgOutcome> {
    if !(mu > 0.0) {
        return Err(Error::param(format!("prox weight mu must be > 0, got {mu}")));
    }
    if !(tol > 0.0) {
        return Err(Error::param(format!("CG tolerance must be > 0, got {tol}")));
    }
    let mut rhs = op.adjoint(y)?.scale(mu);
    rhs.axpy_in_place(1.0, v)?;
    let rhs_norm = rhs.norm();
    let mut x = rhs.zeros_like();
    if rhs_norm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let normal = |p: &Tensor| -> Result<Tensor> {
        let mut out = op.adjoint(&op.apply(p)?)?.scale(mu);
        out.axpy_in_place(1.0, p)?;
        Ok(out)
    };

    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r)?;
    let mut rel = 1.0;
    for it in 1..=max_iters {
        let ap = normal(&p)?;
        let alpha = rr / p.dot(&ap)?;
        x.axpy_in_place(alpha, &p)?;
        r.axpy_in_place(-alpha, &ap)?;
        let rr_new = r.dot(&r)?;
        rel = rr_new.sqrt() / rhs_norm;
        if rel <= tol {
            return Ok(CgOutcome {
                x,
                iterations: it,
                relative_residual: rel,
            });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, &ri) in p.data_mut().iter_mut().zip(r.data()) {
            *pi = ri + beta * *pi;
        }
    }
    Err(Error::NotConverged {
        iterations: max_iters,
        residual: rel,
    })
}
