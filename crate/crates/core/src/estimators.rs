//! Zeroth-order gradient estimators and direction sampling.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{param_err, Result, ZoError};
use crate::linalg;
use crate::problems::CountingOracle;

/// A unit perturbation direction.
///
/// Coordinate directions are kept symbolic so that `x + beta e_j` and
/// `e_j^T v` cost O(1).
#[derive(Debug, Clone, PartialEq)]
pub enum Direction {
    Coordinate { index: usize, dim: usize },
    Dense(Arc<[f64]>),
}

impl Direction {
    pub fn coordinate(index: usize, dim: usize) -> Result<Self> {
        if index >= dim {
            return param_err(format!("coordinate {index} out of range for d = {dim}"));
        }
        Ok(Direction::Coordinate { index, dim })
    }

    /// Wraps a vector that must already have unit norm (to 1e-10).
    pub fn dense(v: Vec<f64>) -> Result<Self> {
        let nrm = linalg::norm(&v);
        if v.is_empty() || (nrm - 1.0).abs() > 1e-10 {
            return param_err(format!("direction must have unit norm, got {nrm}"));
        }
        Ok(Direction::Dense(v.into()))
    }

    pub fn dim(&self) -> usize {
        match self {
            Direction::Coordinate { dim, .. } => *dim,
            Direction::Dense(v) => v.len(),
        }
    }

    /// `u^T v`
    #[inline]
    pub fn dot(&self, v: &[f64]) -> f64 {
        match self {
            Direction::Coordinate { index, .. } => v[*index],
            Direction::Dense(u) => linalg::dot(u, v),
        }
    }

    /// `out += alpha u`
    #[inline]
    pub fn add_scaled(&self, alpha: f64, out: &mut [f64]) {
        match self {
            Direction::Coordinate { index, .. } => out[*index] += alpha,
            Direction::Dense(u) => linalg::axpy(alpha, u, out),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.add_scaled(1.0, &mut v);
        v
    }
}

/// Distribution used to draw the directions of the correction batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionScheme {
    Coordinate,
    Spherical,
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        param_err(format!("smoothing radius must be positive, got {beta}"))
    }
}

/// Scalar `(f_i(x + beta u) - f_i(x)) / beta`. Uses `base` for `f_i(x)` when
/// given; otherwise evaluates it.
pub fn directional_difference(
    oracle: &mut CountingOracle<'_>,
    i: usize,
    x: &[f64],
    u: &Direction,
    beta: f64,
    base: Option<f64>,
) -> Result<f64> {
    check_beta(beta)?;
    if u.dim() != x.len() {
        return param_err("direction and point dimensions differ");
    }
    let f0 = match base {
        Some(v) => v,
        None => oracle.eval(i, x)?,
    };
    let mut y = x.to_vec();
    u.add_scaled(beta, &mut y);
    let f1 = oracle.eval(i, &y)?;
    let q = (f1 - f0) / beta;
    if q.is_finite() {
        Ok(q)
    } else {
        Err(ZoError::Evaluation(format!("difference quotient of f_{i} is {q}")))
    }
}

/// Two-point estimator `((f_i(x + beta u) - f_i(x)) / beta) u`.
/// Costs 2 oracle calls, or 1 when `base = Some(f_i(x))`.
pub fn two_point(
    oracle: &mut CountingOracle<'_>,
    i: usize,
    x: &[f64],
    u: &Direction,
    beta: f64,
    base: Option<f64>,
) -> Result<Vec<f64>> {
    let q = directional_difference(oracle, i, x, u, beta, base)?;
    let mut out = vec![0.0; x.len()];
    u.add_scaled(q, &mut out);
    Ok(out)
}

/// `(d+1)`-point coordinate estimator; `base` as in [`two_point`].
pub fn coord_full_with_base(
    oracle: &mut CountingOracle<'_>,
    i: usize,
    x: &[f64],
    beta: f64,
    base: Option<f64>,
) -> Result<Vec<f64>> {
    check_beta(beta)?;
    let f0 = match base {
        Some(v) => v,
        None => oracle.eval(i, x)?,
    };
    let mut y = x.to_vec();
    let mut out = vec![0.0; x.len()];
    for j in 0..x.len() {
        y[j] = x[j] + beta;
        let q = (oracle.eval(i, &y)? - f0) / beta;
        y[j] = x[j];
        if !q.is_finite() {
            return Err(ZoError::Evaluation(format!("difference quotient of f_{i} is {q}")));
        }
        out[j] = q;
    }
    Ok(out)
}

/// `sum_j ((f_i(x + beta e_j) - f_i(x)) / beta) e_j`; exactly `d + 1` calls.
pub fn coord_full(oracle: &mut CountingOracle<'_>, i: usize, x: &[f64], beta: f64) -> Result<Vec<f64>> {
    coord_full_with_base(oracle, i, x, beta, None)
}

/// Normalized `d`-dimensional Gaussian.
pub fn sphere_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let nrm = linalg::norm(&v);
        if nrm > 0.0 {
            return v.into_iter().map(|x| x / nrm).collect();
        }
    }
}

pub fn sample_direction<R: Rng + ?Sized>(scheme: DirectionScheme, d: usize, rng: &mut R) -> Result<Direction> {
    if d < 1 {
        return param_err("dimension must be >= 1");
    }
    Ok(match scheme {
        DirectionScheme::Coordinate => Direction::Coordinate { index: rng.random_range(0..d), dim: d },
        DirectionScheme::Spherical => Direction::Dense(sphere_vector(d, rng).into()),
    })
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs fixed so that `diag(R) > 0`.
pub fn random_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if d < 1 {
        return param_err("dimension must be >= 1");
    }
    loop {
        let z = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = z.qr();
        let r = qr.r();
        if (0..d).any(|j| r[(j, j)] == 0.0) {
            continue;
        }
        let mut q = qr.q();
        for j in 0..d {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        return Ok(q);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::test_support::{half_norm_sq, linear_problem};
    use crate::problems::{make_logistic_elastic_net, QuadraticComponents};
    use crate::dataio::SparseDataset;
    use crate::proximal::ProxSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_point_examples() {
        let p = half_norm_sq(1, 2);
        let mut o = CountingOracle::new(&p);
        let g = two_point(&mut o, 0, &[1.0, 0.0], &Direction::coordinate(0, 2).unwrap(), 0.1, None).unwrap();
        assert!((g[0] - 1.05).abs() < 1e-12 && g[1] == 0.0);
        assert_eq!(o.calls(), 2);

        let s = 0.5f64.sqrt();
        let u = Direction::dense(vec![s, s]).unwrap();
        let g = two_point(&mut o, 0, &[1.0, 0.0], &u, 0.2, Some(0.5)).unwrap();
        let want = s + 0.1;
        assert!((g[0] - want * s).abs() < 1e-12 && (g[1] - want * s).abs() < 1e-12);
        assert_eq!(o.calls(), 3);

        let lin = linear_problem(vec![vec![3.0, 0.0, 0.0]]);
        let mut o = CountingOracle::new(&lin);
        for beta in [1e-3, 1.0, 17.0] {
            let g = two_point(&mut o, 0, &[0.4, -2.0, 1.0], &Direction::coordinate(0, 3).unwrap(), beta, None)
                .unwrap();
            assert!((g[0] - 3.0).abs() < 1e-9 && g[1] == 0.0 && g[2] == 0.0);
        }
    }

    #[test]
    fn rejects_bad_beta() {
        let p = half_norm_sq(1, 1);
        let mut o = CountingOracle::new(&p);
        let u = Direction::coordinate(0, 1).unwrap();
        assert!(matches!(two_point(&mut o, 0, &[0.0], &u, 0.0, None), Err(ZoError::Parameter(_))));
        assert!(coord_full(&mut o, 0, &[0.0], -1.0).is_err());
        assert_eq!(o.calls(), 0);
    }

    #[test]
    fn coord_full_examples_and_cost() {
        let p = half_norm_sq(1, 2);
        let mut o = CountingOracle::new(&p);
        let g = coord_full(&mut o, 0, &[1.0, 2.0], 0.2).unwrap();
        assert!((g[0] - 1.1).abs() < 1e-12 && (g[1] - 2.1).abs() < 1e-12);
        assert_eq!(o.calls(), 3);

        let lin = linear_problem(vec![vec![1.0, -2.0, 0.5, 4.0]]);
        let mut o = CountingOracle::new(&lin);
        let g = coord_full(&mut o, 0, &[0.1, 0.2, 0.3, 0.4], 0.7).unwrap();
        for (a, b) in g.iter().zip([1.0, -2.0, 0.5, 4.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(o.calls(), 5);
    }

    #[test]
    fn coord_full_on_logistic_row_is_close_to_gradient() {
        let ds = SparseDataset::from_rows(vec![(1.0, vec![(0, 0.5), (2, -1.0), (3, 2.0)])], None).unwrap();
        let p = make_logistic_elastic_net(ds.into(), 0.1, 0.0).unwrap();
        let x = [0.3, -0.2, 0.1, 0.05];
        let beta = 1e-6;
        let mut o = CountingOracle::new(&p);
        let g = coord_full(&mut o, 0, &x, beta).unwrap();
        let exact = p.component_gradient(0, &x).unwrap();
        let bound = p.smoothness() * beta * 2.0 / 2.0; // sqrt(d) = 2
        assert!(linalg::dist_sq(&g, &exact).sqrt() <= bound + 1e-9);
    }

    #[test]
    fn coord_full_error_shrinks_linearly_in_beta() {
        let p = half_norm_sq(1, 3);
        let x = [0.2, -1.0, 0.7];
        let mut o = CountingOracle::new(&p);
        let errs: Vec<f64> = [1e-1, 1e-2, 1e-3]
            .iter()
            .map(|&b| linalg::dist_sq(&coord_full(&mut o, 0, &x, b).unwrap(), &x).sqrt())
            .collect();
        assert!((errs[0] / errs[1] - 10.0).abs() < 1e-3);
        assert!((errs[1] / errs[2] - 10.0).abs() < 1e-2);
    }

    #[test]
    fn quadratic_bias_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let d = 6;
        let q = random_orthogonal(d, &mut rng).unwrap();
        let eig = nalgebra::DVector::from_fn(d, |j, _| 0.1 + j as f64);
        let h = &q * DMatrix::from_diagonal(&eig) * q.transpose();
        let h = (&h + h.transpose()) * 0.5;
        let flat: Vec<f64> = (0..d * d).map(|k| h[(k / d, k % d)]).collect();
        let p = QuadraticComponents::new(vec![flat], vec![vec![0.0; d]])
            .unwrap()
            .into_problem(ProxSpec::Zero)
            .unwrap();
        let mut o = CountingOracle::new(&p);
        for _ in 0..200 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u = sample_direction(DirectionScheme::Spherical, d, &mut rng).unwrap();
            let beta = 10f64.powf(rng.random_range(-4.0..-1.0));
            let est = two_point(&mut o, 0, &x, &u, beta, None).unwrap();
            let grad = p.component_gradient(0, &x).unwrap();
            let mut proj = vec![0.0; d];
            u.add_scaled(u.dot(&grad), &mut proj);
            let err = linalg::dist_sq(&est, &proj).sqrt();
            let uv = u.to_vec();
            let uhu = linalg::dot(&uv, (&h * nalgebra::DVector::from_column_slice(&uv)).as_slice());
            assert!((err - 0.5 * beta * uhu.abs()).abs() < 1e-10);
            assert!(err <= 0.5 * p.smoothness() * beta + 1e-12);
        }
    }

    #[test]
    fn coordinate_directions_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 3];
        let draws = 100_000;
        for _ in 0..draws {
            match sample_direction(DirectionScheme::Coordinate, 3, &mut rng).unwrap() {
                Direction::Coordinate { index, .. } => counts[index] += 1,
                _ => unreachable!(),
            }
        }
        let p = 1.0 / 3.0;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        for c in counts {
            assert!((c as f64 / draws as f64 - p).abs() < 3.0 * se);
        }
    }

    #[test]
    fn spherical_second_moment_is_isotropic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = 5;
        let draws = 100_000;
        let mut sum = vec![0.0; d * d];
        let mut sq = vec![0.0; d * d];
        for _ in 0..draws {
            let u = sample_direction(DirectionScheme::Spherical, d, &mut rng).unwrap().to_vec();
            assert!((linalg::norm(&u) - 1.0).abs() < 1e-12);
            for a in 0..d {
                for b in 0..d {
                    let v = u[a] * u[b];
                    sum[a * d + b] += v;
                    sq[a * d + b] += v * v;
                }
            }
        }
        for a in 0..d {
            for b in 0..d {
                let m = sum[a * d + b] / draws as f64;
                let var = sq[a * d + b] / draws as f64 - m * m;
                let se = (var / draws as f64).sqrt();
                let target = if a == b { 1.0 / d as f64 } else { 0.0 };
                assert!((m - target).abs() < 4.0 * se, "({a},{b}) {m}");
            }
        }
    }

    #[test]
    fn orthogonal_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [1, 2, 5, 20] {
            let q = random_orthogonal(d, &mut rng).unwrap();
            let err = (q.transpose() * &q - DMatrix::<f64>::identity(d, d)).norm();
            assert!(err <= 1e-10);
        }
        let plus = (0..2000)
            .filter(|_| random_orthogonal(1, &mut rng).unwrap()[(0, 0)] > 0.0)
            .count();
        assert!((plus as f64 - 1000.0).abs() < 4.0 * 22.37);
    }

    /// Two-sample Kolmogorov-Smirnov on the first coordinate of a column
    /// versus direct sphere samples.
    #[test]
    fn orthogonal_columns_look_spherical() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = 4000;
        let d = 4;
        for col in 0..d {
            let mut a: Vec<f64> = (0..m).map(|_| random_orthogonal(d, &mut rng).unwrap()[(0, col)]).collect();
            let mut b: Vec<f64> = (0..m).map(|_| sphere_vector(d, &mut rng)[0]).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let (mut i, mut j, mut stat) = (0, 0, 0.0f64);
            while i < m && j < m {
                if a[i] <= b[j] {
                    i += 1;
                } else {
                    j += 1;
                }
                stat = stat.max((i as f64 - j as f64).abs() / m as f64);
            }
            // alpha = 0.001 critical value for equal sample sizes
            let crit = 1.95 * (2.0 / m as f64).sqrt();
            assert!(stat < crit, "column {col}: {stat} >= {crit}");
        }
    }
}
