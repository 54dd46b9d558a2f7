use crate::error::{Result, ZoError};
use crate::linalg;
use crate::problems::CompositeProblem;
use crate::solver::grad_map_norm;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceOptions {
    /// Stop when the certified gap proxy drops below this: `||G||^2 / (2 mu)`
    /// for strongly convex problems, `||G||` otherwise, with `G` the gradient
    /// mapping at step `1/L`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub stationarity: f64,
    pub converged: bool,
}

/// Accelerated proximal gradient (FISTA) on the analytic gradient, with
/// backtracking on the local Lipschitz estimate and gradient-based restarts
/// (function values stop resolving progress long before the tolerance).
pub fn reference_solve(p: &CompositeProblem, x0: Option<&[f64]>, opts: ReferenceOptions) -> Result<ReferenceSolution> {
    if !p.has_reference_gradient() {
        return Err(ZoError::Capability("reference solve needs analytic gradients".into()));
    }
    let l_global = p.smoothness();
    let mu = p.strong_convexity();
    let measure = |x: &[f64]| -> Result<f64> {
        let g = grad_map_norm(p, x, 1.0 / l_global)?;
        Ok(if mu > 0.0 { g * g / (2.0 * mu) } else { g })
    };
    let mut x = x0.map_or_else(|| vec![0.0; p.d()], <[f64]>::to_vec);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut l_est = l_global;
    let mut stat = measure(&x)?;
    let mut it = 0;
    while it < opts.max_iter && stat > opts.tol {
        it += 1;
        let fy = p.smooth_value(&y)?;
        let gy = p.smooth_gradient(&y)?;
        // shrink optimistically, then backtrack
        l_est = (l_est * 0.9).max(l_global * 1e-6);
        let z = loop {
            let mut step = y.clone();
            linalg::axpy(-1.0 / l_est, &gy, &mut step);
            let z = p.prox(&step, 1.0 / l_est)?;
            let diff: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
            let model = fy + linalg::dot(&gy, &diff) + 0.5 * l_est * linalg::norm_sq(&diff);
            if p.smooth_value(&z)? <= model + 1e-15 * fy.abs().max(1.0) || l_est >= l_global {
                break z;
            }
            l_est = (l_est * 2.0).min(l_global);
        };
        // gradient-based restart: drop momentum once it points uphill
        let uphill: f64 = y.iter().zip(&z).zip(&x).map(|((yi, zi), xi)| (yi - zi) * (zi - xi)).sum();
        if uphill > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = z.iter().zip(&x).map(|(zi, xi)| zi + beta * (zi - xi)).collect();
        x = z;
        t = t_next;
        if it % 10 == 0 {
            stat = measure(&x)?;
        }
    }
    stat = measure(&x)?;
    Ok(ReferenceSolution { value: p.objective_value(&x)?, converged: stat <= opts.tol, x, iterations: it, stationarity: stat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{gen_classification, ClassificationParams};
    use crate::problems::{make_logistic_elastic_net, make_synthetic_quadratic};
    use std::sync::Arc;

    /// Matrix-free conjugate gradients on `H x = -grad(0)` with
    /// `H v = grad(v) - grad(0)`.
    fn cg(p: &CompositeProblem) -> Vec<f64> {
        let d = p.d();
        let g0 = p.smooth_gradient(&vec![0.0; d]).unwrap();
        let hv = |v: &[f64]| -> Vec<f64> {
            p.smooth_gradient(v).unwrap().iter().zip(&g0).map(|(a, b)| a - b).collect()
        };
        let mut x = vec![0.0; d];
        let mut r: Vec<f64> = g0.iter().map(|v| -v).collect();
        let mut dir = r.clone();
        for _ in 0..10 * d {
            let rr = linalg::dot(&r, &r);
            if rr < 1e-30 {
                break;
            }
            let hp = hv(&dir);
            let a = rr / linalg::dot(&dir, &hp);
            linalg::axpy(a, &dir, &mut x);
            linalg::axpy(-a, &hp, &mut r);
            let b = linalg::dot(&r, &r) / rr;
            dir = r.iter().zip(&dir).map(|(ri, di)| ri + b * di).collect();
        }
        x
    }

    #[test]
    fn quadratic_optimum_agrees_with_cg_and_fista() {
        let p = make_synthetic_quadratic(50, 20, 100.0, 7).unwrap();
        let known = p.known_optimum().unwrap().x.clone();
        let x_cg = cg(&p);
        assert!(linalg::dist_sq(&x_cg, &known).sqrt() < 1e-9 * (1.0 + linalg::norm(&known)));
        let sol = reference_solve(&p, None, ReferenceOptions { tol: 1e-24, max_iter: 50_000 }).unwrap();
        assert!(linalg::dist_sq(&sol.x, &known).sqrt() < 1e-9 * (1.0 + linalg::norm(&known)));
    }

    #[test]
    fn logistic_l1_solution_is_stationary() {
        let ds = gen_classification(&ClassificationParams {
            n: 300,
            d: 10,
            nnz_per_row: 10,
            binary: false,
            label_noise: 0.1,
            unit_rows: true,
            seed: 3,
        })
        .unwrap();
        let p = make_logistic_elastic_net(Arc::new(ds), 1e-3, 1e-2).unwrap();
        let sol = reference_solve(&p, None, ReferenceOptions { tol: 1e-14, max_iter: 100_000 }).unwrap();
        assert!(sol.converged);
        assert!(grad_map_norm(&p, &sol.x, 1.0 / p.smoothness()).unwrap() <= 1e-6);
    }
}
