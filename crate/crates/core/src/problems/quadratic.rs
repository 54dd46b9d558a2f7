use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{CompositeProblem, Components, KnownOptimum};
use crate::error::{param_err, Result, ZoError};
use crate::estimators::random_orthogonal;
use crate::proximal::ProxSpec;

/// `f_i(x) = 0.5 (x - c_i)^T A_i (x - c_i)` with symmetric `A_i`.
#[derive(Debug, Clone)]
pub struct QuadraticComponents {
    d: usize,
    /// Row-major `d x d` blocks, one per component.
    matrices: Vec<Vec<f64>>,
    centers: Vec<Vec<f64>>,
}

impl QuadraticComponents {
    pub fn new(matrices: Vec<Vec<f64>>, centers: Vec<Vec<f64>>) -> Result<Self> {
        let n = matrices.len();
        if n == 0 || centers.len() != n {
            return Err(ZoError::Input("need one center per matrix and n >= 1".into()));
        }
        let d = centers[0].len();
        if d == 0 {
            return Err(ZoError::Input("dimension must be >= 1".into()));
        }
        for (a, c) in matrices.iter().zip(&centers) {
            if a.len() != d * d || c.len() != d {
                return Err(ZoError::Input("inconsistent quadratic shapes".into()));
            }
            for r in 0..d {
                for s in 0..r {
                    if (a[r * d + s] - a[s * d + r]).abs() > 1e-12 * (1.0 + a[r * d + s].abs()) {
                        return Err(ZoError::Input("quadratic matrices must be symmetric".into()));
                    }
                }
            }
        }
        Ok(Self { d, matrices, centers })
    }

    pub fn matrix(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.d, self.d, &self.matrices[i])
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i]
    }

    /// Row-major entries of `A_i`.
    pub fn matrix_entries(&self, i: usize) -> &[f64] {
        &self.matrices[i]
    }

    /// Hessian of `f`, the mean of the `A_i`.
    pub fn mean_matrix(&self) -> DMatrix<f64> {
        let n = self.matrices.len() as f64;
        let mut m = DMatrix::zeros(self.d, self.d);
        for i in 0..self.matrices.len() {
            m += self.matrix(i);
        }
        m / n
    }

    /// Minimizer of `f`: solves `(mean A_i) x = mean A_i c_i`.
    pub fn minimizer(&self) -> Result<Vec<f64>> {
        let n = self.matrices.len() as f64;
        let mut rhs = DVector::zeros(self.d);
        for i in 0..self.matrices.len() {
            rhs += self.matrix(i) * DVector::from_column_slice(&self.centers[i]);
        }
        rhs /= n;
        let chol = self
            .mean_matrix()
            .cholesky()
            .ok_or_else(|| ZoError::Input("mean Hessian is not positive definite".into()))?;
        Ok(chol.solve(&rhs).as_slice().to_vec())
    }

    /// Problem with `L, mu` taken from the spectra of `A_i` and their mean.
    /// The optimum is recorded when `psi = 0`.
    pub fn into_problem(self, psi: ProxSpec) -> Result<CompositeProblem> {
        let smoothness = (0..self.matrices.len())
            .map(|i| self.matrix(i).symmetric_eigenvalues().max())
            .fold(0.0, f64::max);
        let mu = self.mean_matrix().symmetric_eigenvalues().min().max(0.0);
        self.into_problem_with_constants(psi, smoothness, mu)
    }

    pub fn into_problem_with_constants(self, psi: ProxSpec, smoothness: f64, mu: f64) -> Result<CompositeProblem> {
        let optimum = match (&psi, mu > 0.0) {
            (ProxSpec::Zero, true) => {
                let x = self.minimizer()?;
                let value = self.mean_value(&x);
                Some(KnownOptimum { x, value })
            }
            _ => None,
        };
        let name = format!("quadratic(n={}, d={})", self.matrices.len(), self.d);
        let mut p = CompositeProblem::new(name, Arc::new(self), psi, smoothness, mu)?;
        p.set_optimum(optimum);
        Ok(p)
    }
}

impl Components for QuadraticComponents {
    fn count(&self) -> usize {
        self.matrices.len()
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, i: usize, x: &[f64]) -> f64 {
        let a = &self.matrices[i];
        let c = &self.centers[i];
        let d = self.d;
        let mut total = 0.0;
        for r in 0..d {
            let er = x[r] - c[r];
            let row = &a[r * d..(r + 1) * d];
            let mut acc = 0.0;
            for s in 0..d {
                acc += row[s] * (x[s] - c[s]);
            }
            total += er * acc;
        }
        0.5 * total
    }

    fn gradient(&self, i: usize, x: &[f64], out: &mut [f64]) -> Result<()> {
        let a = &self.matrices[i];
        let c = &self.centers[i];
        let d = self.d;
        for r in 0..d {
            let row = &a[r * d..(r + 1) * d];
            out[r] = (0..d).map(|s| row[s] * (x[s] - c[s])).sum();
        }
        Ok(())
    }

    fn has_gradient(&self) -> bool {
        true
    }
}

/// Random strongly convex quadratic sum with `psi = 0`.
///
/// All `A_i = Q diag(lambda_i) Q^T` share one Haar rotation `Q`; each
/// spectrum lies in `[1/cond, 1]` and (for `d >= 2`) contains both ends,
/// so `L = 1` and `mu = 1/cond` hold exactly for the sum.
pub fn make_synthetic_quadratic(n: usize, d: usize, cond: f64, seed: u64) -> Result<CompositeProblem> {
    let comps = synthetic_quadratic_components(n, d, cond, seed)?;
    if d == 1 {
        comps.into_problem(ProxSpec::Zero)
    } else {
        comps.into_problem_with_constants(ProxSpec::Zero, 1.0, 1.0 / cond)
    }
}

/// The components behind [`make_synthetic_quadratic`].
pub fn synthetic_quadratic_components(n: usize, d: usize, cond: f64, seed: u64) -> Result<QuadraticComponents> {
    if n == 0 || d == 0 {
        return param_err("synthetic quadratic needs n >= 1 and d >= 1");
    }
    if !(cond >= 1.0 && cond.is_finite()) {
        return param_err(format!("condition number must be >= 1, got {cond}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = 1.0 / cond;
    let q = random_orthogonal(d, &mut rng)?;
    let mut matrices = Vec::with_capacity(n);
    let mut centers = Vec::with_capacity(n);
    for i in 0..n {
        let eig: Vec<f64> = (0..d)
            .map(|j| {
                if d == 1 {
                    // alternate ends so the mean of a 1-d sum still spans the range
                    if i % 2 == 0 || n == 1 {
                        1.0
                    } else {
                        lo
                    }
                } else if j == 0 {
                    lo
                } else if j == d - 1 {
                    1.0
                } else {
                    lo * cond.powf(rng.random::<f64>())
                }
            })
            .collect();
        let a = &q * DMatrix::from_diagonal(&DVector::from_vec(eig)) * q.transpose();
        let a = (&a + a.transpose()) * 0.5;
        let mut flat = Vec::with_capacity(d * d);
        for r in 0..d {
            for s in 0..d {
                flat.push(a[(r, s)]);
            }
        }
        matrices.push(flat);
        centers.push((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
    }
    QuadraticComponents::new(matrices, centers)
}
