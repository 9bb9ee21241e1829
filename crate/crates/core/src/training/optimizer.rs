use crate::error::{ensure_dims, Result};
use crate::model::ParamSet;
use crate::numerics::Matrix;

/// Mini-batch gradient descent with optional heavy-ball momentum.
///
/// Velocity buffers are created lazily on the first step and matched to the
/// parameter tensors by position.
#[derive(Debug, Clone)]
pub struct Sgd {
    lr: f64,
    momentum: f64,
    velocity: Vec<Matrix>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Self {
            lr,
            momentum,
            velocity: Vec::new(),
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// `θ ← θ − lr·v`, `v ← μ·v + scale·g`.
    pub fn step<P: ParamSet>(&mut self, params: &mut P, grads: &P, scale: f64) -> Result<()> {
        let grads = grads.tensors();
        let mut tensors = params.tensors_mut();
        ensure_dims!(tensors.len() == grads.len(), "gradient/parameter count mismatch");
        if self.velocity.is_empty() && self.momentum > 0.0 {
            self.velocity = grads.iter().map(|g| Matrix::zeros(g.rows(), g.cols())).collect();
        }
        for (k, (p, g)) in tensors.iter_mut().zip(grads).enumerate() {
            ensure_dims!(p.shape() == g.shape(), "gradient shape {:?} for {:?}", g.shape(), p.shape());
            if self.momentum > 0.0 {
                let v = &mut self.velocity[k];
                for (vv, gv) in v.as_mut_slice().iter_mut().zip(g.as_slice()) {
                    *vv = self.momentum * *vv + scale * gv;
                }
                p.axpy(-self.lr, v)?;
            } else {
                p.axpy(-self.lr * scale, g)?;
            }
        }
        Ok(())
    }

    pub fn step_matrix(&mut self, param: &mut Matrix, grad: &Matrix, scale: f64) -> Result<()> {
        ensure_dims!(param.shape() == grad.shape(), "gradient shape mismatch");
        if self.momentum > 0.0 {
            if self.velocity.is_empty() {
                self.velocity.push(Matrix::zeros(grad.rows(), grad.cols()));
            }
            let v = &mut self.velocity[0];
            for (vv, gv) in v.as_mut_slice().iter_mut().zip(grad.as_slice()) {
                *vv = self.momentum * *vv + scale * gv;
            }
            param.axpy(-self.lr, v)
        } else {
            param.axpy(-self.lr * scale, grad)
        }
    }
}
