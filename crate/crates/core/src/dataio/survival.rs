use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{param_err, Result, ZoError};

/// Right-censored survival data: dense features, times and event flags.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    d: usize,
    features: Vec<f64>,
    times: Vec<f64>,
    events: Vec<bool>,
}

impl SurvivalDataset {
    /// `features` is row-major `n x d`.
    pub fn new(d: usize, features: Vec<f64>, times: Vec<f64>, events: Vec<bool>) -> Result<Self> {
        let n = times.len();
        if n == 0 || d == 0 {
            return Err(ZoError::Input("survival data needs n >= 1 and d >= 1".into()));
        }
        if features.len() != n * d || events.len() != n {
            return Err(ZoError::Input(format!(
                "inconsistent survival arrays: {} features for n={n}, d={d}; {} events",
                features.len(),
                events.len()
            )));
        }
        if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(ZoError::Input(format!("event times must be positive and finite, got {t}")));
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(ZoError::Input("non-finite feature value".into()));
        }
        Ok(Self { d, features, times, events })
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    /// CSV with header `t,delta,f1..fd`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string(), "delta".to_string()];
        header.extend((1..=self.d).map(|j| format!("f{j}")));
        wr.write_record(&header)?;
        let mut rec: Vec<String> = Vec::with_capacity(self.d + 2);
        for i in 0..self.n() {
            rec.clear();
            rec.push(format!("{}", self.times[i]));
            rec.push(if self.events[i] { "1" } else { "0" }.to_string());
            rec.extend(self.row(i).iter().map(|v| format!("{v}")));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        let d = header.len().saturating_sub(2);
        let well_formed = header.len() >= 3
            && &header[0] == "t"
            && &header[1] == "delta"
            && header.iter().skip(2).enumerate().all(|(j, h)| h == format!("f{}", j + 1));
        if !well_formed {
            return Err(ZoError::Schema("survival CSV header must be t,delta,f1..fd".into()));
        }
        let (mut features, mut times, mut events) = (Vec::new(), Vec::new(), Vec::new());
        for (k, rec) in rd.records().enumerate() {
            let rec = rec?;
            let line = k + 2;
            let num = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|_| ZoError::Parse {
                    line,
                    message: format!("not a number: {s:?}"),
                })
            };
            times.push(num(&rec[0])?);
            events.push(match rec[1].trim() {
                "1" => true,
                "0" => false,
                other => return Err(ZoError::Schema(format!("delta must be 0 or 1 at line {line}, got {other:?}"))),
            });
            for j in 0..d {
                features.push(num(&rec[j + 2])?);
            }
        }
        Self::new(d, features, times, events)
    }
}

/// Parameters of the synthetic survival generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalParams {
    pub n: usize,
    pub d: usize,
    /// Fraction of nonzero entries in the true coefficient vector.
    pub sparsity: f64,
    pub censor_rate: f64,
    pub seed: u64,
}

/// Generated data plus the planted coefficients.
#[derive(Debug, Clone)]
pub struct GeneratedSurvival {
    pub data: SurvivalDataset,
    pub coefficients: Vec<f64>,
    pub params: SurvivalParams,
}

/// Gaussian features, sparse planted coefficients `x_true`, event times
/// `T_i ~ Exp(exp(a_i^T x_true))`. A `censor_rate` fraction of subjects
/// (those with the largest censoring scores) is censored, observing
/// `t_i = w_i T_i` with `w_i ~ U(0.05, 1)`.
pub fn gen_survival(n: usize, d: usize, sparsity: f64, censor_rate: f64, seed: u64) -> Result<GeneratedSurvival> {
    if n == 0 || d == 0 {
        return param_err("survival generator needs n >= 1 and d >= 1");
    }
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return param_err(format!("sparsity must lie in (0, 1], got {sparsity}"));
    }
    if !(0.0..1.0).contains(&censor_rate) {
        return param_err(format!("censor rate must lie in [0, 1), got {censor_rate}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = ((sparsity * d as f64).round() as usize).clamp(1, d);
    let scale = 1.0 / (support as f64).sqrt();
    let mut coefficients = vec![0.0; d];
    for j in sample(&mut rng, d, support) {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        coefficients[j] = sign * scale * rng.random_range(0.5..1.5);
    }
    let features: Vec<f64> = (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut times = Vec::with_capacity(n);
    for i in 0..n {
        let a = &features[i * d..(i + 1) * d];
        let eta: f64 = a.iter().zip(&coefficients).map(|(x, y)| x * y).sum();
        let u: f64 = 1.0 - rng.random::<f64>();
        times.push(-u.ln() / eta.exp());
    }
    let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let n_censored = (censor_rate * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut events = vec![true; n];
    for &i in order.iter().take(n_censored) {
        events[i] = false;
        times[i] *= rng.random_range(0.05..1.0);
    }
    // guard against underflow to 0 for extreme linear predictors
    for t in &mut times {
        if *t <= 0.0 {
            *t = f64::MIN_POSITIVE;
        }
    }
    let data = SurvivalDataset::new(d, features, times, events)?;
    Ok(GeneratedSurvival {
        data,
        coefficients,
        params: SurvivalParams { n, d, sparsity, censor_rate, seed },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_censoring_means_all_events() {
        let g = gen_survival(50, 4, 0.5, 0.0, 3).unwrap();
        assert!(g.data.events().iter().all(|&e| e));
    }

    #[test]
    fn censor_fraction_is_exact() {
        let g = gen_survival(112, 160, 0.05, 0.25, 1).unwrap();
        assert_eq!(g.data.n(), 112);
        assert_eq!(g.data.d(), 160);
        assert_eq!(g.data.events().iter().filter(|e| !**e).count(), 28);
        assert!(g.data.times().iter().all(|t| *t > 0.0));
        assert_eq!(g.coefficients.iter().filter(|c| **c != 0.0).count(), 8);
    }

    #[test]
    fn same_seed_same_data() {
        let a = gen_survival(30, 5, 0.4, 0.3, 9).unwrap();
        let b = gen_survival(30, 5, 0.4, 0.3, 9).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(gen_survival(10, 2, 0.5, 1.0, 0).is_err());
        assert!(gen_survival(10, 2, 0.0, 0.1, 0).is_err());
        assert!(gen_survival(0, 2, 0.5, 0.1, 0).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let g = gen_survival(12, 3, 0.7, 0.5, 4).unwrap();
        let mut buf = Vec::new();
        g.data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,delta,f1,f2,f3\n"));
        assert_eq!(text.lines().count(), 13);
        let back = SurvivalDataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, g.data);
    }

    #[test]
    fn rejects_nonpositive_times() {
        let err = SurvivalDataset::new(1, vec![0.0, 1.0], vec![1.0, 0.0], vec![true, true]).unwrap_err();
        assert!(matches!(err, ZoError::Input(_)));
    }
}
