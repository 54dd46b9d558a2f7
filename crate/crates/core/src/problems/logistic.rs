use std::sync::Arc;

use super::{CompositeProblem, Components};
use crate::dataio::SparseDataset;
use crate::error::{param_err, Result};
use crate::linalg;
use crate::proximal::ProxSpec;

/// `f_i(x) = ln(1 + exp(-b_i a_i^T x)) + (mu/2) ||x||^2`.
#[derive(Debug)]
pub struct LogisticComponents {
    data: Arc<SparseDataset>,
    mu: f64,
}

impl LogisticComponents {
    pub fn new(data: Arc<SparseDataset>, mu: f64) -> Self {
        Self { data, mu }
    }

    pub fn data(&self) -> &SparseDataset {
        &self.data
    }
}

impl Components for LogisticComponents {
    fn count(&self) -> usize {
        self.data.n()
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn value(&self, i: usize, x: &[f64]) -> f64 {
        let margin = self.data.label(i) * self.data.row_dot(i, x);
        linalg::log1p_exp(-margin) + 0.5 * self.mu * linalg::norm_sq(x)
    }

    fn gradient(&self, i: usize, x: &[f64], out: &mut [f64]) -> Result<()> {
        let b = self.data.label(i);
        let coef = -b * linalg::sigmoid(-b * self.data.row_dot(i, x));
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

    fn mean_value(&self, x: &[f64]) -> f64 {
        let n = self.data.n();
        let loss: f64 = (0..n)
            .map(|i| linalg::log1p_exp(-self.data.label(i) * self.data.row_dot(i, x)))
            .sum();
        loss / n as f64 + 0.5 * self.mu * linalg::norm_sq(x)
    }

    fn mean_gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.data.n();
        out.fill(0.0);
        for i in 0..n {
            let b = self.data.label(i);
            let coef = -b * linalg::sigmoid(-b * self.data.row_dot(i, x)) / n as f64;
            let (idx, val) = self.data.row(i);
            for (&j, v) in idx.iter().zip(val) {
                out[j as usize] += coef * v;
            }
        }
        linalg::axpy(self.mu, x, out);
        Ok(())
    }
}

/// Elastic-net logistic regression; `L = mu + max_i ||a_i||^2 / 4`.
pub fn make_logistic_elastic_net(data: Arc<SparseDataset>, mu: f64, lambda: f64) -> Result<CompositeProblem> {
    if !(mu >= 0.0) {
        return param_err(format!("mu must be >= 0, got {mu}"));
    }
    let psi = ProxSpec::l1(lambda)?;
    let smoothness = (mu + data.max_row_norm_sq() / 4.0).max(f64::MIN_POSITIVE);
    let name = format!("logistic(n={}, d={})", data.n(), data.dim());
    let comps = LogisticComponents::new(data, mu);
    CompositeProblem::new(name, Arc::new(comps), psi, smoothness, mu)
}
