use std::sync::Arc;

use super::{CompositeProblem, Components};
use crate::dataio::SparseDataset;
use crate::error::{param_err, Result};
use crate::linalg;
use crate::proximal::ProxSpec;

/// `max_z |d^2/dz^2 (1 / (1 + e^z))| = sqrt(3) / 18`.
pub const SIGMOID_CURVATURE_BOUND: f64 = 0.096_225_044_864_937_63;

/// Non-convex sigmoid loss `f_i(x) = 1 / (1 + exp(b_i a_i^T x)) + (mu/2) ||x||^2`.
#[derive(Debug)]
pub struct SigmoidComponents {
    data: Arc<SparseDataset>,
    mu: f64,
}

impl SigmoidComponents {
    pub fn new(data: Arc<SparseDataset>, mu: f64) -> Self {
        Self { data, mu }
    }
}

impl Components for SigmoidComponents {
    fn count(&self) -> usize {
        self.data.n()
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn value(&self, i: usize, x: &[f64]) -> f64 {
        let margin = self.data.label(i) * self.data.row_dot(i, x);
        linalg::sigmoid(-margin) + 0.5 * self.mu * linalg::norm_sq(x)
    }

    fn gradient(&self, i: usize, x: &[f64], out: &mut [f64]) -> Result<()> {
        let b = self.data.label(i);
        let s = linalg::sigmoid(-b * self.data.row_dot(i, x));
        let coef = -b * s * (1.0 - s);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.mu * xi;
        }
        let (idx, val) = self.data.row(i);
        for (&j, v) in idx.iter().zip(val) {
            out[j as usize] += coef * v;
        }
        Ok(())
    }

    fn has_gradient(&self) -> bool {
        true
    }
}

/// Sigmoid loss with optional ridge and l1 terms;
/// `L = mu + SIGMOID_CURVATURE_BOUND * max_i ||a_i||^2`.
pub fn make_sigmoid_loss(data: Arc<SparseDataset>, mu: f64, lambda: f64) -> Result<CompositeProblem> {
    if !(mu >= 0.0) {
        return param_err(format!("mu must be >= 0, got {mu}"));
    }
    let psi = ProxSpec::l1(lambda)?;
    let smoothness = (mu + SIGMOID_CURVATURE_BOUND * data.max_row_norm_sq()).max(f64::MIN_POSITIVE);
    let name = format!("sigmoid(n={}, d={})", data.n(), data.dim());
    // the loss is not convex, so no strong convexity constant is claimed
    CompositeProblem::new(name, Arc::new(SigmoidComponents::new(data, mu)), psi, smoothness, 0.0)
}
