use rand::Rng;

use crate::error::{Result, ZoError};
use crate::estimators::{coord_full_with_base, directional_difference, Direction};
use crate::linalg;
use crate::problems::CountingOracle;
use crate::sampling::{gen_plan, Basis, Jacobian, SamplerConfig, Sketch, UpdatePlan, Variant};

/// Smoothing radius per iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSchedule {
    Constant(f64),
    /// `beta_k = beta0 * ratio^k`, summable for `ratio < 1`.
    Geometric { beta0: f64, ratio: f64 },
}

impl BetaSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BetaSchedule::Constant(b) if b > 0.0 && b.is_finite() => Ok(()),
            BetaSchedule::Geometric { beta0, ratio } if beta0 > 0.0 && beta0.is_finite() && ratio > 0.0 && ratio < 1.0 => {
                Ok(())
            }
            other => Err(ZoError::Parameter(format!("invalid smoothing schedule {other:?}"))),
        }
    }

    pub fn at(&self, k: u64) -> f64 {
        match *self {
            BetaSchedule::Constant(b) => b,
            BetaSchedule::Geometric { beta0, ratio } => {
                // never let the radius underflow to zero
                (beta0 * ratio.powf(k as f64)).max(f64::MIN_POSITIVE.sqrt())
            }
        }
    }

    pub fn initial(&self) -> f64 {
        self.at(0)
    }
}

/// `f_i(x)` memoized per component for the current point.
#[derive(Debug, Clone)]
pub(crate) struct BaseCache {
    stamp: Vec<u64>,
    values: Vec<f64>,
    current: u64,
}

impl BaseCache {
    pub fn new(n: usize) -> Self {
        Self { stamp: vec![0; n], values: vec![0.0; n], current: 1 }
    }

    /// Forget every cached value (the point moved).
    pub fn advance(&mut self) {
        self.current += 1;
    }

    pub fn get(&mut self, oracle: &mut CountingOracle<'_>, i: usize, x: &[f64]) -> Result<f64> {
        if self.stamp[i] == self.current {
            return Ok(self.values[i]);
        }
        let v = oracle.eval(i, x)?;
        self.stamp[i] = self.current;
        self.values[i] = v;
        Ok(v)
    }
}

/// `g = jbar + (d/R) sum_{(i,u)} (dhat_u f_i(x) - u u^T J^(i))`.
pub(crate) fn correction_gradient(
    oracle: &mut CountingOracle<'_>,
    cache: &mut BaseCache,
    x: &[f64],
    jac: &Jacobian,
    jbar: &[f64],
    correction: &[(usize, Direction)],
    beta: f64,
) -> Result<Vec<f64>> {
    let d = x.len();
    let scale = d as f64 / correction.len() as f64;
    let mut g = jbar.to_vec();
    for (i, u) in correction {
        let base = cache.get(oracle, *i, x)?;
        let q = directional_difference(oracle, *i, x, u, beta, Some(base))?;
        let c = u.dot(jac.column(*i));
        u.add_scaled(scale * (q - c), &mut g);
    }
    Ok(g)
}

/// The gradient estimator for an explicit correction batch; base values are
/// shared between pairs with the same component.
pub fn estimate_gradient(
    oracle: &mut CountingOracle<'_>,
    x: &[f64],
    jac: &Jacobian,
    correction: &[(usize, Direction)],
    beta: f64,
) -> Result<Vec<f64>> {
    if correction.is_empty() {
        return Err(ZoError::Parameter("correction batch must be nonempty".into()));
    }
    let mut cache = BaseCache::new(oracle.n());
    correction_gradient(oracle, &mut cache, x, jac, &jac.mean_column(), correction, beta)
}

/// Iterate and Jacobian estimate of the stored-Jacobian variants.
#[derive(Debug, Clone)]
pub struct ZivrState {
    pub x: Vec<f64>,
    pub jac: Jacobian,
    /// `(1/n) J 1`, kept incrementally.
    pub jbar: Vec<f64>,
    pub k: u64,
    column_writes: usize,
    cache: BaseCache,
}

impl ZivrState {
    pub fn new(x0: Vec<f64>, jac: Jacobian) -> Self {
        let n = jac.n();
        let jbar = jac.mean_column();
        Self { x: x0, jac, jbar, k: 0, column_writes: 0, cache: BaseCache::new(n) }
    }

    /// `J_0 = 0`.
    pub fn zero(x0: Vec<f64>, n: usize) -> Self {
        let d = x0.len();
        Self::new(x0, Jacobian::zeros(d, n))
    }

    /// `J_0` from coordinate sweeps at `x0`; costs `n (d + 1)` calls.
    pub fn warm(oracle: &mut CountingOracle<'_>, x0: Vec<f64>, beta: f64) -> Result<Self> {
        let cols = (0..oracle.n())
            .map(|i| coord_full_with_base(oracle, i, &x0, beta, None))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(x0, Jacobian::from_columns(&cols)?))
    }

    fn touch_columns(&mut self, count: usize) {
        // refresh the running mean from scratch now and then to bound drift
        self.column_writes += count;
        if self.column_writes >= self.jac.n() {
            self.jbar = self.jac.mean_column();
            self.column_writes = 0;
        }
    }
}

/// What one step produced.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub gradient: Vec<f64>,
    pub beta: f64,
    pub omega: bool,
}

/// Solver parameters shared by the stored-Jacobian variants.
#[derive(Debug, Clone)]
pub struct ZivrParams {
    pub sampler: SamplerConfig,
    pub alpha: f64,
    pub beta: BetaSchedule,
}

impl ZivrParams {
    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        self.beta.validate()?;
        if matches!(self.sampler.variant, Variant::MemEff { .. }) {
            return Err(ZoError::Parameter("use the memory-efficient solver for the block variant".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(ZoError::Parameter(format!("step size must be positive, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// One iteration with freshly drawn randomness.
pub fn zivr_step<R: Rng + ?Sized>(
    state: &mut ZivrState,
    oracle: &mut CountingOracle<'_>,
    params: &ZivrParams,
    rng: &mut R,
) -> Result<StepReport> {
    let plan = gen_plan(&params.sampler, rng)?;
    zivr_step_with_plan(state, oracle, params, &plan)
}

/// One iteration for a given plan: gradient estimate, prox step, then the
/// Jacobian refresh, all evaluated at the current iterate.
pub fn zivr_step_with_plan(
    state: &mut ZivrState,
    oracle: &mut CountingOracle<'_>,
    params: &ZivrParams,
    plan: &UpdatePlan,
) -> Result<StepReport> {
    let beta = params.beta.at(state.k);
    let alpha = params.alpha;
    state.cache.advance();
    let g = correction_gradient(oracle, &mut state.cache, &state.x, &state.jac, &state.jbar, &plan.correction, beta)?;
    if !linalg::all_finite(&g) {
        return Err(ZoError::Divergence {
            iter: state.k,
            oracle_calls: oracle.calls(),
            message: "non-finite gradient estimate".into(),
        });
    }
    let mut x_next = state.x.clone();
    linalg::axpy(-alpha, &g, &mut x_next);
    oracle.problem().psi().prox_in_place(&mut x_next, alpha)?;

    if plan.omega {
        refresh_jacobian(state, oracle, &plan.sketch, beta)?;
    }
    state.x = x_next;
    state.k += 1;
    Ok(StepReport { gradient: g, beta, omega: plan.omega })
}

fn refresh_jacobian(state: &mut ZivrState, oracle: &mut CountingOracle<'_>, sketch: &Sketch, beta: f64) -> Result<()> {
    let n = state.jac.n() as f64;
    let x = &state.x;
    match sketch {
        Sketch::Empty => {}
        Sketch::Pairs { pairs, basis } => {
            for &(i, j) in pairs {
                let u = basis.direction(j);
                let base = state.cache.get(oracle, i, x)?;
                let q = directional_difference(oracle, i, x, &u, beta, Some(base))?;
                let col = state.jac.column_mut(i);
                let delta = q - u.dot(col);
                u.add_scaled(delta, col);
                if !linalg::all_finite(col) {
                    return Err(non_finite_jacobian(state.k, oracle.calls()));
                }
                u.add_scaled(delta / n, &mut state.jbar);
            }
            state.touch_columns(pairs.len().min(state.jac.n()));
        }
        Sketch::Columns { components, basis } => {
            for &i in components {
                let base = state.cache.get(oracle, i, x)?;
                let fresh = match basis {
                    Basis::Identity(_) => coord_full_with_base(oracle, i, x, beta, Some(base))?,
                    Basis::Orthogonal(_) => {
                        let mut v = vec![0.0; x.len()];
                        for j in 0..basis.dim() {
                            let u = basis.direction(j);
                            let q = directional_difference(oracle, i, x, &u, beta, Some(base))?;
                            u.add_scaled(q, &mut v);
                        }
                        v
                    }
                };
                if !linalg::all_finite(&fresh) {
                    return Err(non_finite_jacobian(state.k, oracle.calls()));
                }
                let col = state.jac.column_mut(i);
                for ((m, c), f) in state.jbar.iter_mut().zip(col.iter_mut()).zip(&fresh) {
                    *m += (f - *c) / n;
                    *c = *f;
                }
            }
            state.touch_columns(components.len());
        }
        Sketch::Block { .. } => {
            return Err(ZoError::Parameter("block sketches belong to the memory-efficient solver".into()));
        }
    }
    Ok(())
}

fn non_finite_jacobian(iter: u64, oracle_calls: u64) -> ZoError {
    ZoError::Divergence { iter, oracle_calls, message: "non-finite Jacobian estimate".into() }
}
