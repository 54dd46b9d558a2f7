use std::collections::HashMap;

use rand::Rng;

use super::zivr::{BaseCache, BetaSchedule, StepReport};
use crate::error::{Result, ZoError};
use crate::estimators::{coord_full_with_base, directional_difference, Direction};
use crate::linalg;
use crate::problems::CountingOracle;
use crate::sampling::{gen_plan, BlockPartition, SamplerConfig, Sketch, UpdatePlan, Variant};

/// Block snapshots in place of a stored Jacobian.
///
/// The implied Jacobian has column `i`, row `j` equal to the coordinate
/// two-point estimate of `f_i` at the snapshot of the block holding `(i, j)`;
/// `g_tilde` is its mean column.
#[derive(Debug, Clone)]
pub struct MemEffState {
    pub x: Vec<f64>,
    pub g_tilde: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub partition: BlockPartition,
    pub k: u64,
    cache: BaseCache,
}

#[derive(Debug, Clone)]
pub struct MemEffParams {
    pub sampler: SamplerConfig,
    pub alpha: f64,
    pub beta: BetaSchedule,
}

impl MemEffParams {
    pub fn blocks(&self) -> usize {
        match self.sampler.variant {
            Variant::MemEff { blocks } => blocks,
            _ => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        self.beta.validate()?;
        if self.blocks() == 0 {
            return Err(ZoError::Parameter("memory-efficient solver needs the block variant".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(ZoError::Parameter(format!("step size must be positive, got {}", self.alpha)));
        }
        Ok(())
    }
}

impl MemEffState {
    /// All snapshots at `x0`; `g_tilde` is the mean of the coordinate
    /// estimates there, which costs `n (d + 1)` calls.
    pub fn init(oracle: &mut CountingOracle<'_>, x0: Vec<f64>, blocks: usize, beta: f64) -> Result<Self> {
        let n = oracle.n();
        let d = x0.len();
        let partition = BlockPartition::new(n, d, blocks)?;
        let mut g_tilde = vec![0.0; d];
        for i in 0..n {
            let col = coord_full_with_base(oracle, i, &x0, beta, None)?;
            linalg::axpy(1.0 / n as f64, &col, &mut g_tilde);
        }
        Ok(Self {
            snapshots: vec![x0.clone(); blocks],
            x: x0,
            g_tilde,
            partition,
            k: 0,
            cache: BaseCache::new(n),
        })
    }
}

/// `f_i` at a snapshot, memoized within one iteration.
struct SnapshotCache(HashMap<(usize, usize), f64>);

impl SnapshotCache {
    fn get(&mut self, oracle: &mut CountingOracle<'_>, l: usize, i: usize, x: &[f64]) -> Result<f64> {
        if let Some(v) = self.0.get(&(l, i)) {
            return Ok(*v);
        }
        let v = oracle.eval(i, x)?;
        self.0.insert((l, i), v);
        Ok(v)
    }
}

pub fn memeff_step<R: Rng + ?Sized>(
    state: &mut MemEffState,
    oracle: &mut CountingOracle<'_>,
    params: &MemEffParams,
    rng: &mut R,
) -> Result<StepReport> {
    let plan = gen_plan(&params.sampler, rng)?;
    memeff_step_with_plan(state, oracle, params, &plan)
}

pub fn memeff_step_with_plan(
    state: &mut MemEffState,
    oracle: &mut CountingOracle<'_>,
    params: &MemEffParams,
    plan: &UpdatePlan,
) -> Result<StepReport> {
    let beta = params.beta.at(state.k);
    let alpha = params.alpha;
    let n = oracle.n() as f64;
    let d = state.x.len();
    state.cache.advance();
    let mut snap_cache = SnapshotCache(HashMap::new());

    let scale = d as f64 / plan.correction.len() as f64;
    let mut g = state.g_tilde.clone();
    for (i, u) in &plan.correction {
        let j = match u {
            Direction::Coordinate { index, .. } => *index,
            Direction::Dense(_) => {
                return Err(ZoError::Parameter("memory-efficient step needs coordinate directions".into()))
            }
        };
        let x = &state.x;
        let base = state.cache.get(oracle, *i, x)?;
        let q = directional_difference(oracle, *i, x, u, beta, Some(base))?;
        let l = state.partition.block_of(*i, j);
        let snap = &state.snapshots[l];
        let sbase = snap_cache.get(oracle, l, *i, snap)?;
        let qs = directional_difference(oracle, *i, snap, u, beta, Some(sbase))?;
        g[j] += scale * (q - qs);
    }
    if !linalg::all_finite(&g) {
        return Err(ZoError::Divergence {
            iter: state.k,
            oracle_calls: oracle.calls(),
            message: "non-finite gradient estimate".into(),
        });
    }

    if plan.omega {
        let (l, entries) = match &plan.sketch {
            Sketch::Block { index, entries, .. } => (*index, entries.clone()),
            _ => return Err(ZoError::Parameter("memory-efficient step needs a block sketch".into())),
        };
        // averaged over n (not |T_l|) so that g_tilde stays the mean column
        // of the implied Jacobian
        for e in entries {
            let (i, j) = (e / d, e % d);
            let u = Direction::Coordinate { index: j, dim: d };
            let x = &state.x;
            let base = state.cache.get(oracle, i, x)?;
            let q = directional_difference(oracle, i, x, &u, beta, Some(base))?;
            let snap = &state.snapshots[l];
            let sbase = snap_cache.get(oracle, l, i, snap)?;
            let qs = directional_difference(oracle, i, snap, &u, beta, Some(sbase))?;
            state.g_tilde[j] += (q - qs) / n;
        }
        state.snapshots[l].copy_from_slice(&state.x);
    }

    let mut x_next = state.x.clone();
    linalg::axpy(-alpha, &g, &mut x_next);
    oracle.problem().psi().prox_in_place(&mut x_next, alpha)?;
    state.x = x_next;
    state.k += 1;
    Ok(StepReport { gradient: g, beta, omega: plan.omega })
}
