//! Dataset ingestion and synthetic data.

mod libsvm;
mod survival;

pub use libsvm::{parse_libsvm, write_read_roundtrip, SparseDataset};
pub use survival::{gen_survival, GeneratedSurvival, SurvivalDataset, SurvivalParams};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{param_err, Result};

/// Public download locations of the LIBSVM binary datasets used by the
/// logistic experiments. Nothing is fetched automatically.
pub const KNOWN_DATASETS: &[(&str, &str)] = &[
    (
        "a9a",
        "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary/a9a",
    ),
    (
        "w8a",
        "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary/w8a",
    ),
];

/// Planted-model binary classification data.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationParams {
    pub n: usize,
    pub d: usize,
    /// Nonzeros per row; `d` gives dense rows.
    pub nnz_per_row: usize,
    /// One-hot style `{0, 1}` features instead of Gaussian values.
    pub binary: bool,
    /// Probability of flipping each label.
    pub label_noise: f64,
    /// Rescale every row to unit Euclidean norm.
    pub unit_rows: bool,
    pub seed: u64,
}

impl ClassificationParams {
    /// Sparse binary rows shaped like the a9a training split.
    pub fn a9a_like(seed: u64) -> Self {
        Self {
            n: 32561,
            d: 123,
            nnz_per_row: 14,
            binary: true,
            label_noise: 0.15,
            unit_rows: false,
            seed,
        }
    }
}

/// Labels are `sign(a_i^T w)` for a Gaussian planted `w`, flipped with
/// probability `label_noise`.
pub fn gen_classification(p: &ClassificationParams) -> Result<SparseDataset> {
    if p.n == 0 || p.d == 0 || p.nnz_per_row == 0 || p.nnz_per_row > p.d {
        return param_err("classification generator needs n, d >= 1 and 1 <= nnz_per_row <= d");
    }
    if !(0.0..=0.5).contains(&p.label_noise) {
        return param_err("label noise must lie in [0, 0.5]");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let w: Vec<f64> = (0..p.d).map(|_| rng.sample(StandardNormal)).collect();
    let mut rows = Vec::with_capacity(p.n);
    for _ in 0..p.n {
        let mut idx: Vec<usize> = sample(&mut rng, p.d, p.nnz_per_row).into_vec();
        idx.sort_unstable();
        let mut entries: Vec<(u32, f64)> = idx
            .into_iter()
            .map(|j| {
                let v = if p.binary { 1.0 } else { rng.sample(StandardNormal) };
                (j as u32, v)
            })
            .collect();
        if p.unit_rows {
            let nrm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            if nrm > 0.0 {
                entries.iter_mut().for_each(|(_, v)| *v /= nrm);
            }
        }
        // center binary features so both classes are represented
        let score: f64 = entries
            .iter()
            .map(|&(j, v)| (v - if p.binary { p.nnz_per_row as f64 / p.d as f64 } else { 0.0 }) * w[j as usize])
            .sum();
        let mut label = if score >= 0.0 { 1.0 } else { -1.0 };
        if rng.random::<f64>() < p.label_noise {
            label = -label;
        }
        rows.push((label, entries));
    }
    SparseDataset::from_rows(rows, Some(p.d))
}
