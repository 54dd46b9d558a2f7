//! Independent oracles: finite differences, Monte-Carlo expectations with
//! standard errors, exhaustive enumeration and a first-order reference solver.

mod battery;
mod reference;

pub use battery::{memeff_coupling, run_battery, BatteryOptions, CheckOutcome, CouplingReport, Fault};
pub use reference::{reference_solve, ReferenceOptions, ReferenceSolution};

use crate::error::{param_err, Result, ZoError};
use crate::estimators::Direction;
use crate::sampling::{apply_p, Jacobian};

/// Central differences `((f(x + h e_j) - f(x - h e_j)) / 2h)_j`.
pub fn fd_gradient<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(h > 0.0) {
        return param_err(format!("difference step must be positive, got {h}"));
    }
    let mut y = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        y[j] = x[j] + h;
        let fp = f(&y)?;
        y[j] = x[j] - h;
        let fm = f(&y)?;
        y[j] = x[j];
        let v = (fp - fm) / (2.0 * h);
        if !v.is_finite() {
            return Err(ZoError::Evaluation(format!("finite difference along {j} is {v}")));
        }
        out.push(v);
    }
    Ok(out)
}

/// Streaming componentwise mean and variance (Welford), mergeable across
/// independent streams.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMoments {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningMoments {
    pub fn new(dim: usize) -> Self {
        Self { count: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub fn push(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.mean.len(), "sample dimension changed");
        self.count += 1;
        let c = self.count as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(v) {
            let delta = x - *m;
            *m += delta / c;
            *s += delta * (x - *m);
        }
    }

    pub fn merge(&mut self, other: &RunningMoments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let total = na + nb;
        for k in 0..self.mean.len() {
            let delta = other.mean[k] - self.mean[k];
            self.mean[k] += delta * nb / total;
            self.m2[k] += other.m2[k] + delta * delta * na * nb / total;
        }
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Standard error of the mean from the unbiased sample variance.
    pub fn stderr(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![f64::INFINITY; self.mean.len()];
        }
        let c = self.count as f64;
        self.m2.iter().map(|s| (s / (c - 1.0) / c).sqrt()).collect()
    }
}

/// Result of a componentwise Monte-Carlo comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct MCReport {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: u64,
    pub k_sigma: f64,
    /// Largest `|mean - target| / stderr` over the components.
    pub worst_z: f64,
    pub pass: bool,
}

impl MCReport {
    pub fn from_moments(m: &RunningMoments, target: &[f64], k_sigma: f64) -> Self {
        let se = m.stderr();
        let mut worst = 0.0f64;
        let mut pass = true;
        for ((mu, s), t) in m.mean().iter().zip(&se).zip(target) {
            let diff = (mu - t).abs();
            // exact agreement up to summation rounding is accepted when stderr is 0
            let slack = 1e-14 * (1.0 + t.abs());
            if diff > k_sigma * s + slack {
                pass = false;
            }
            let z = if *s > 0.0 { diff / s } else if diff > slack { f64::INFINITY } else { 0.0 };
            worst = worst.max(z);
        }
        Self { mean: m.mean().to_vec(), stderr: se, samples: m.count(), k_sigma, worst_z: worst, pass }
    }

    pub fn summary(&self) -> String {
        format!(
            "{} samples, worst |mean - target| / stderr = {:.3} (limit {}), {}",
            self.samples,
            self.worst_z,
            self.k_sigma,
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

/// Componentwise check that `E[sampler()] = target` within `k_sigma`
/// standard errors (no multiplicity correction).
pub fn mc_expectation<F>(mut sampler: F, n_samples: u64, target: &[f64], k_sigma: f64) -> Result<MCReport>
where
    F: FnMut() -> Result<Vec<f64>>,
{
    if n_samples < 100 {
        return param_err("Monte-Carlo checks need at least 100 samples");
    }
    let mut m = RunningMoments::new(target.len());
    for _ in 0..n_samples {
        m.push(&sampler()?);
    }
    Ok(MCReport::from_moments(&m, target, k_sigma))
}

fn binomial(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for t in 0..k {
        acc = acc.checked_mul(n - t)? / (t + 1);
    }
    Some(acc)
}

/// Exact mean of `P(A)` over every `R`-subset of `[n] x [d]` with
/// coordinate directions.
pub fn enumerate_impl1(n: usize, d: usize, r: usize, a: &Jacobian) -> Result<Jacobian> {
    let total = n * d;
    if r == 0 || r > total || a.n() != n || a.d() != d {
        return param_err("enumeration needs 1 <= R <= nd and a d x n matrix");
    }
    let count = binomial(total as u64, r as u64).filter(|&c| c <= 1_000_000);
    let Some(count) = count else {
        return Err(ZoError::Capability(format!("C({total}, {r}) subsets is too many to enumerate")));
    };
    let mut sum = vec![0.0; total];
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        let pairs: Vec<(usize, Direction)> =
            idx.iter().map(|&e| (e / d, Direction::Coordinate { index: e % d, dim: d })).collect();
        let p = apply_p(&pairs, a)?;
        for (s, v) in sum.iter_mut().zip(p.as_slice()) {
            *s += v;
        }
        // next combination in lexicographic order
        let mut t = r;
        while t > 0 && idx[t - 1] == total - r + t - 1 {
            t -= 1;
        }
        if t == 0 {
            break;
        }
        idx[t - 1] += 1;
        for u in t..r {
            idx[u] = idx[u - 1] + 1;
        }
    }
    let cols: Vec<Vec<f64>> = (0..n).map(|i| sum[i * d..(i + 1) * d].iter().map(|s| s / count as f64).collect()).collect();
    Jacobian::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fd_examples() {
        let g = fd_gradient(|x| Ok(x[0] * x[0]), &[1.0], 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-9);
        let h = 1e-3;
        let g = fd_gradient(|x| Ok(x[0].sin()), &[0.0], h).unwrap();
        assert!((g[0] - 1.0).abs() <= h * h / 6.0 + 1e-15);
        assert!(fd_gradient(|x| Ok(x[0]), &[0.0], 0.0).is_err());
        assert!(fd_gradient(|_| Ok(f64::NAN), &[0.0], 1.0).is_err());
    }

    #[test]
    fn fd_error_within_smoothness_bound() {
        // f = sum cos(x_j) is 1-smooth
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let h = 10f64.powf(rng.random_range(-4.0..-1.0));
            let g = fd_gradient(|y| Ok(y.iter().map(|v| v.cos()).sum()), &x, h).unwrap();
            for (gj, xj) in g.iter().zip(&x) {
                assert!((gj + xj.sin()).abs() <= h / 2.0 + 1e-10);
            }
        }
    }

    #[test]
    fn constant_sampler_has_zero_stderr() {
        let r = mc_expectation(|| Ok(vec![1.5, -2.0]), 100, &[1.5, -2.0], 4.0).unwrap();
        assert!(r.pass && r.stderr.iter().all(|s| *s == 0.0));
        let r = mc_expectation(|| Ok(vec![1.5]), 100, &[1.6], 4.0).unwrap();
        assert!(!r.pass);
        assert!(mc_expectation(|| Ok(vec![0.0]), 99, &[0.0], 4.0).is_err());
    }

    #[test]
    fn fair_coin_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let r = mc_expectation(|| Ok(vec![if rng.random::<bool>() { 1.0 } else { -1.0 }]), 100_000, &[0.0], 4.0).unwrap();
        assert!(r.pass, "{}", r.summary());
        assert!((r.stderr[0] - (1.0f64 / 100_000.0).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn merged_moments_match_single_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<Vec<f64>> = (0..1000).map(|_| vec![rng.random::<f64>(), rng.random_range(-5.0..5.0)]).collect();
        let mut all = RunningMoments::new(2);
        let mut a = RunningMoments::new(2);
        let mut b = RunningMoments::new(2);
        for (k, x) in xs.iter().enumerate() {
            all.push(x);
            if k < 300 { a.push(x) } else { b.push(x) }
        }
        a.merge(&b);
        for (u, v) in a.mean().iter().zip(all.mean()) {
            assert!((u - v).abs() < 1e-12);
        }
        for (u, v) in a.stderr().iter().zip(all.stderr()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn enumeration_examples() {
        let a = Jacobian::from_columns(&[vec![3.0]]).unwrap();
        assert_eq!(enumerate_impl1(1, 1, 1, &a).unwrap(), a);
        let a = Jacobian::from_columns(&[vec![1.0, -2.0], vec![0.5, 4.0]]).unwrap();
        for r in 1..=4 {
            let e = enumerate_impl1(2, 2, r, &a).unwrap();
            for (x, y) in e.as_slice().iter().zip(a.as_slice()) {
                assert!((x - y * r as f64 / 4.0).abs() < 1e-12);
            }
        }
        let big = Jacobian::zeros(10, 10);
        assert!(matches!(enumerate_impl1(10, 10, 50, &big), Err(ZoError::Capability(_))));
    }
}
