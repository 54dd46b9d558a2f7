//! Comparison solvers: proximal ZO-SGD, full-batch proximal ZO-GD and ZO Prox-SVRG.

use rand::Rng;

use crate::error::{param_err, Result};
use crate::estimators::{coord_full_with_base, directional_difference, sample_direction, DirectionScheme};
use crate::linalg;
use crate::problems::{CompositeProblem, CountingOracle};

/// Step-size sequence of the stochastic baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `alpha_k = alpha0 / sqrt(k + 1)`.
    InvSqrt(f64),
}

impl StepSchedule {
    pub fn at(&self, k: u64) -> f64 {
        match *self {
            StepSchedule::Constant(a) => a,
            StepSchedule::InvSqrt(a0) => a0 / ((k + 1) as f64).sqrt(),
        }
    }

    pub fn initial(&self) -> f64 {
        self.at(0)
    }

    fn validate(&self) -> Result<()> {
        let a = self.initial();
        if a > 0.0 && a.is_finite() {
            Ok(())
        } else {
            param_err(format!("step size must be positive, got {a}"))
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        param_err(format!("smoothing radius must be positive, got {beta}"))
    }
}

fn prox_step(oracle: &CountingOracle<'_>, x: &mut [f64], g: &[f64], alpha: f64) -> Result<()> {
    linalg::axpy(-alpha, g, x);
    oracle.problem().psi().prox_in_place(x, alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VanillaParams {
    pub step: StepSchedule,
    pub beta: f64,
    pub scheme: DirectionScheme,
}

impl VanillaParams {
    /// `alpha_k = 1 / (L sqrt(d) sqrt(k + 1))`.
    pub fn defaults(p: &CompositeProblem, beta: f64) -> Self {
        Self {
            step: StepSchedule::InvSqrt(1.0 / (p.smoothness() * (p.d() as f64).sqrt())),
            beta,
            scheme: DirectionScheme::Coordinate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.step.validate()?;
        check_beta(self.beta)
    }
}

/// `x+ = prox(x - alpha_k d * two_point(i, x, u))` for one random `(i, u)`;
/// returns the gradient estimate.
pub fn vanilla_zo_step<R: Rng + ?Sized>(
    x: &mut [f64],
    k: u64,
    oracle: &mut CountingOracle<'_>,
    params: &VanillaParams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = x.len();
    let i = rng.random_range(0..oracle.n());
    let u = sample_direction(params.scheme, d, rng)?;
    let q = directional_difference(oracle, i, x, &u, params.beta, None)?;
    let mut g = vec![0.0; d];
    u.add_scaled(d as f64 * q, &mut g);
    prox_step(oracle, x, &g, params.step.at(k))?;
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullBatchParams {
    pub alpha: f64,
    pub beta: f64,
}

impl FullBatchParams {
    /// `alpha = 1 / (2L)`.
    pub fn defaults(p: &CompositeProblem, beta: f64) -> Self {
        Self { alpha: 0.5 / p.smoothness(), beta }
    }

    pub fn validate(&self) -> Result<()> {
        StepSchedule::Constant(self.alpha).validate()?;
        check_beta(self.beta)
    }
}

/// `(1/n) sum_i coord_full(i, x)`; `n (d + 1)` calls.
pub fn full_batch_estimate(oracle: &mut CountingOracle<'_>, x: &[f64], beta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = oracle.n();
    let mut g = vec![0.0; x.len()];
    let mut bases = Vec::with_capacity(n);
    for i in 0..n {
        let f0 = oracle.eval(i, x)?;
        bases.push(f0);
        let col = coord_full_with_base(oracle, i, x, beta, Some(f0))?;
        linalg::axpy(1.0 / n as f64, &col, &mut g);
    }
    Ok((g, bases))
}

pub fn full_batch_zo_step(x: &mut [f64], oracle: &mut CountingOracle<'_>, params: &FullBatchParams) -> Result<Vec<f64>> {
    let (g, _) = full_batch_estimate(oracle, x, params.beta)?;
    prox_step(oracle, x, &g, params.alpha)?;
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZpsvrgParams {
    pub alpha: f64,
    /// Inner steps per snapshot; 0 turns every step into a full-batch step.
    pub epoch_len: usize,
    /// Two-point pairs averaged per inner step.
    pub batch: usize,
    pub beta: f64,
    pub scheme: DirectionScheme,
}

impl ZpsvrgParams {
    /// `alpha = 1 / (10 L d)`, `m = n`, single-sample inner steps.
    pub fn defaults(p: &CompositeProblem, beta: f64) -> Self {
        Self {
            alpha: 1.0 / (10.0 * p.smoothness() * p.d() as f64),
            epoch_len: p.n(),
            batch: 1,
            beta,
            scheme: DirectionScheme::Coordinate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        StepSchedule::Constant(self.alpha).validate()?;
        check_beta(self.beta)?;
        if self.batch == 0 {
            return param_err("inner batch must be >= 1");
        }
        Ok(())
    }
}

/// Iterate plus the current snapshot of the SVRG outer loop.
#[derive(Debug, Clone)]
pub struct ZpsvrgState {
    pub x: Vec<f64>,
    pub snapshot: Vec<f64>,
    pub g_hat: Vec<f64>,
    /// `f_i(snapshot)` from the sweep, reused by inner steps.
    snapshot_values: Vec<f64>,
    inner_left: usize,
    has_snapshot: bool,
    pub k: u64,
}

impl ZpsvrgState {
    pub fn new(x0: Vec<f64>) -> Self {
        let d = x0.len();
        Self {
            snapshot: x0.clone(),
            x: x0,
            g_hat: vec![0.0; d],
            snapshot_values: Vec::new(),
            inner_left: 0,
            has_snapshot: false,
            k: 0,
        }
    }

    /// Calls the next step needs when it opens a new epoch; `None` while
    /// inside an epoch (cost `2 batch` to `3 batch`).
    pub fn snapshot_cost(&self, n: usize, d: usize) -> Option<u64> {
        (!self.has_snapshot || self.inner_left == 0).then(|| (n * (d + 1)) as u64)
    }
}

/// One inner step, opening a new epoch first when the previous one ended.
pub fn zpsvrg_step<R: Rng + ?Sized>(
    state: &mut ZpsvrgState,
    oracle: &mut CountingOracle<'_>,
    params: &ZpsvrgParams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = state.x.len();
    if !state.has_snapshot || state.inner_left == 0 {
        let (g, bases) = full_batch_estimate(oracle, &state.x, params.beta)?;
        state.g_hat = g;
        state.snapshot_values = bases;
        state.snapshot.clone_from(&state.x);
        state.has_snapshot = true;
        state.inner_left = params.epoch_len;
        if params.epoch_len == 0 {
            let g = state.g_hat.clone();
            prox_step(oracle, &mut state.x, &g, params.alpha)?;
            state.k += 1;
            return Ok(g);
        }
    }
    let mut g = state.g_hat.clone();
    let scale = d as f64 / params.batch as f64;
    for _ in 0..params.batch {
        let i = rng.random_range(0..oracle.n());
        let u = sample_direction(params.scheme, d, rng)?;
        let q = directional_difference(oracle, i, &state.x, &u, params.beta, None)?;
        let qs = directional_difference(oracle, i, &state.snapshot, &u, params.beta, Some(state.snapshot_values[i]))?;
        u.add_scaled(scale * (q - qs), &mut g);
    }
    prox_step(oracle, &mut state.x, &g, params.alpha)?;
    state.inner_left -= 1;
    state.k += 1;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_synthetic_quadratic;
    use crate::problems::test_support::linear_problem;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vanilla_on_one_dimensional_linear_problem_is_prox_sgd() {
        let p = linear_problem(vec![vec![2.0], vec![-1.0]]);
        let mut o = CountingOracle::new(&p);
        let params = VanillaParams { step: StepSchedule::Constant(0.1), beta: 0.3, scheme: DirectionScheme::Coordinate };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for k in 0..20 {
            let mut x = vec![0.5];
            let g = vanilla_zo_step(&mut x, k, &mut o, &params, &mut rng).unwrap();
            assert!((g[0] - 2.0).abs() < 1e-12 || (g[0] + 1.0).abs() < 1e-12);
            assert!((x[0] - (0.5 - 0.1 * g[0])).abs() < 1e-15);
        }
        assert_eq!(o.calls(), 40);
    }

    #[test]
    fn full_batch_step_cost_and_accuracy() {
        let p = make_synthetic_quadratic(6, 4, 10.0, 1).unwrap();
        let mut o = CountingOracle::new(&p);
        let params = FullBatchParams { alpha: 0.5, beta: 1e-7 };
        let mut x = vec![0.2, -0.4, 1.0, 0.0];
        let exact = p.smooth_gradient(&x).unwrap();
        let mut want = x.clone();
        linalg::axpy(-0.5, &exact, &mut want);
        full_batch_zo_step(&mut x, &mut o, &params).unwrap();
        assert_eq!(o.calls(), 6 * 5);
        assert!(linalg::dist_sq(&x, &want).sqrt() < 1e-6);
    }

    #[test]
    fn full_batch_converges_linearly() {
        let p = make_synthetic_quadratic(5, 3, 10.0, 2).unwrap();
        let xs = p.known_optimum().unwrap().x.clone();
        let mut o = CountingOracle::new(&p);
        let params = FullBatchParams { alpha: 1.0 / p.smoothness(), beta: 1e-6 };
        let mut x = vec![0.0; 3];
        let e0 = linalg::dist_sq(&x, &xs);
        for _ in 0..300 {
            full_batch_zo_step(&mut x, &mut o, &params).unwrap();
        }
        // prox-GD contracts by at least (1 - mu/L) per step, down to the
        // O(beta / mu) shift of the coordinate estimator
        let bound = (1.0f64 - 0.1).powi(600) * e0;
        assert!(linalg::dist_sq(&x, &xs) <= bound.max(1e-9));
    }

    #[test]
    fn zpsvrg_first_inner_step_uses_snapshot_gradient() {
        let p = make_synthetic_quadratic(4, 3, 5.0, 3).unwrap();
        let mut o = CountingOracle::new(&p);
        let params = ZpsvrgParams { alpha: 0.01, epoch_len: 3, batch: 2, beta: 1e-4, scheme: DirectionScheme::Spherical };
        let mut st = ZpsvrgState::new(vec![1.0, 0.0, -1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = zpsvrg_step(&mut st, &mut o, &params, &mut rng).unwrap();
        for (a, b) in g.iter().zip(&st.g_hat) {
            assert!((a - b).abs() < 1e-9);
        }
        // sweep + two pairs of (base, x-perturbed, snapshot-perturbed)
        assert_eq!(o.calls(), 16 + 6);
    }

    #[test]
    fn zpsvrg_without_inner_loop_is_full_batch() {
        let p = make_synthetic_quadratic(4, 3, 5.0, 3).unwrap();
        let params = ZpsvrgParams { alpha: 0.2, epoch_len: 0, batch: 1, beta: 1e-5, scheme: DirectionScheme::Coordinate };
        let fb = FullBatchParams { alpha: 0.2, beta: 1e-5 };
        let mut o1 = CountingOracle::new(&p);
        let mut o2 = CountingOracle::new(&p);
        let mut st = ZpsvrgState::new(vec![0.3; 3]);
        let mut x = vec![0.3; 3];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            zpsvrg_step(&mut st, &mut o1, &params, &mut rng).unwrap();
            full_batch_zo_step(&mut x, &mut o2, &fb).unwrap();
        }
        assert_eq!(st.x, x);
        assert_eq!(o1.calls(), o2.calls());
    }
}
