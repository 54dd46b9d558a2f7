use std::sync::Arc;

use super::{CompositeProblem, Components};
use crate::dataio::SurvivalDataset;
use crate::error::{param_err, Result};
use crate::linalg;
use crate::proximal::ProxSpec;

/// Cox partial log-likelihood split per subject:
/// `f_i(x) = delta_i (-a_i^T x + log sum_{j in R_i} exp(a_j^T x)) + (mu/2) ||x||^2`
/// with risk set `R_i = { j : t_j >= t_i }`.
#[derive(Debug)]
pub struct CoxComponents {
    data: Arc<SurvivalDataset>,
    mu: f64,
    /// Subjects sorted by decreasing time.
    order: Vec<usize>,
    /// `R_i = order[..risk_len[i]]`.
    risk_len: Vec<usize>,
}

impl CoxComponents {
    pub fn new(data: Arc<SurvivalDataset>, mu: f64) -> Self {
        let n = data.n();
        let t = data.times();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| t[b].total_cmp(&t[a]));
        let mut risk_len = vec![0; n];
        // walk groups of tied times; every member gets the whole group
        let mut k = 0;
        while k < n {
            let mut end = k + 1;
            while end < n && t[order[end]] == t[order[k]] {
                end += 1;
            }
            for &i in &order[k..end] {
                risk_len[i] = end;
            }
            k = end;
        }
        Self { data, mu, order, risk_len }
    }

    pub fn risk_set(&self, i: usize) -> &[usize] {
        &self.order[..self.risk_len[i]]
    }

    fn scores(&self, x: &[f64]) -> Vec<f64> {
        (0..self.data.n()).map(|j| linalg::dot(self.data.row(j), x)).collect()
    }
}

/// Running `log sum exp` with optional weighted vector sum, rescaled on new maxima.
struct PrefixLse {
    max: f64,
    sum: f64,
    weighted: Vec<f64>,
}

impl PrefixLse {
    fn new(d: usize) -> Self {
        Self { max: f64::NEG_INFINITY, sum: 0.0, weighted: vec![0.0; d] }
    }

    fn push(&mut self, s: f64, row: Option<&[f64]>) {
        if s > self.max {
            let r = (self.max - s).exp();
            self.sum *= r;
            self.weighted.iter_mut().for_each(|w| *w *= r);
            self.max = s;
        }
        let w = (s - self.max).exp();
        self.sum += w;
        if let Some(a) = row {
            linalg::axpy(w, a, &mut self.weighted);
        }
    }

    fn lse(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

impl Components for CoxComponents {
    fn count(&self) -> usize {
        self.data.n()
    }

    fn dim(&self) -> usize {
        self.data.d()
    }

    fn value(&self, i: usize, x: &[f64]) -> f64 {
        let ridge = 0.5 * self.mu * linalg::norm_sq(x);
        if !self.data.events()[i] {
            return ridge;
        }
        let mut acc = PrefixLse::new(0);
        for &j in self.risk_set(i) {
            acc.push(linalg::dot(self.data.row(j), x), None);
        }
        -linalg::dot(self.data.row(i), x) + acc.lse() + ridge
    }

    fn gradient(&self, i: usize, x: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.mu * xi;
        }
        if !self.data.events()[i] {
            return Ok(());
        }
        let mut acc = PrefixLse::new(self.data.d());
        for &j in self.risk_set(i) {
            let a = self.data.row(j);
            acc.push(linalg::dot(a, x), Some(a));
        }
        linalg::axpy(1.0 / acc.sum, &acc.weighted, out);
        linalg::axpy(-1.0, self.data.row(i), out);
        Ok(())
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn mean_value(&self, x: &[f64]) -> f64 {
        let n = self.data.n();
        let s = self.scores(x);
        let mut acc = PrefixLse::new(0);
        let mut lse_at = vec![0.0; n + 1];
        for (k, &j) in self.order.iter().enumerate() {
            acc.push(s[j], None);
            lse_at[k + 1] = acc.lse();
        }
        let events = self.data.events();
        let total: f64 = (0..n)
            .filter(|&i| events[i])
            .map(|i| -s[i] + lse_at[self.risk_len[i]])
            .sum();
        total / n as f64 + 0.5 * self.mu * linalg::norm_sq(x)
    }

    fn mean_gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.data.n();
        let d = self.data.d();
        let s = self.scores(x);
        let events = self.data.events();
        // expected covariate of each prefix of the time-sorted order
        let mut acc = PrefixLse::new(d);
        let mut mean_at: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
        let needed: std::collections::HashSet<usize> =
            (0..n).filter(|&i| events[i]).map(|i| self.risk_len[i]).collect();
        for (k, &j) in self.order.iter().enumerate() {
            acc.push(s[j], Some(self.data.row(j)));
            if needed.contains(&(k + 1)) {
                mean_at[k + 1] = acc.weighted.iter().map(|w| w / acc.sum).collect();
            }
        }
        out.fill(0.0);
        for i in (0..n).filter(|&i| events[i]) {
            linalg::axpy(1.0, &mean_at[self.risk_len[i]], out);
            linalg::axpy(-1.0, self.data.row(i), out);
        }
        out.iter_mut().for_each(|v| *v /= n as f64);
        linalg::axpy(self.mu, x, out);
        Ok(())
    }
}

/// Elastic-net Cox regression; `L = mu + 2 max_i ||a_i||^2`.
pub fn make_cox_elastic_net(data: Arc<SurvivalDataset>, mu: f64, lambda: f64) -> Result<CompositeProblem> {
    if !(mu >= 0.0) {
        return param_err(format!("mu must be >= 0, got {mu}"));
    }
    let psi = ProxSpec::l1(lambda)?;
    let max_sq = (0..data.n()).map(|i| linalg::norm_sq(data.row(i))).fold(0.0, f64::max);
    let smoothness = (mu + 2.0 * max_sq).max(f64::MIN_POSITIVE);
    let name = format!("cox(n={}, d={})", data.n(), data.d());
    CompositeProblem::new(name, Arc::new(CoxComponents::new(data, mu)), psi, smoothness, mu)
}
