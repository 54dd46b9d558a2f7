use std::fmt;
use std::io::{Read, Write};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::memeff::{memeff_step, MemEffParams, MemEffState};
use super::metrics::grad_map_norm;
use super::zivr::{zivr_step, ZivrParams, ZivrState};
use crate::baselines::{
    full_batch_zo_step, vanilla_zo_step, zpsvrg_step, FullBatchParams, VanillaParams, ZpsvrgParams, ZpsvrgState,
};
use crate::error::{Result, ZoError};
use crate::linalg;
use crate::problems::{CompositeProblem, CountingOracle};
use crate::sampling::Variant;

/// How `J_0` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JacobianInit {
    #[default]
    Zero,
    /// Coordinate sweeps at `x_0`, paid from the budget.
    Warm,
}

#[derive(Debug, Clone)]
pub enum SolverSpec {
    Zivr { params: ZivrParams, init: JacobianInit },
    MemEff(MemEffParams),
    VanillaZo(VanillaParams),
    FullBatchZo(FullBatchParams),
    Zpsvrg(ZpsvrgParams),
}

impl SolverSpec {
    pub fn name(&self) -> String {
        match self {
            SolverSpec::Zivr { params, .. } => match params.sampler.variant {
                Variant::Impl1 => "zivr_impl1".into(),
                Variant::Impl2 => "zivr_impl2".into(),
                Variant::Impl3 => "zivr_impl3".into(),
                Variant::MemEff { .. } => "zivr_memeff".into(),
            },
            SolverSpec::MemEff(_) => "zivr_memeff".into(),
            SolverSpec::VanillaZo(_) => "vanilla_zo".into(),
            SolverSpec::FullBatchZo(_) => "full_batch_zo".into(),
            SolverSpec::Zpsvrg(_) => "zpsvrg".into(),
        }
    }

    pub fn validate(&self, p: &CompositeProblem) -> Result<()> {
        let check_dims = |n: usize, d: usize| {
            if n != p.n() || d != p.d() {
                Err(ZoError::Parameter(format!(
                    "sampler is for n = {n}, d = {d} but the problem has n = {}, d = {}",
                    p.n(),
                    p.d()
                )))
            } else {
                Ok(())
            }
        };
        match self {
            SolverSpec::Zivr { params, .. } => {
                params.validate()?;
                check_dims(params.sampler.n, params.sampler.d)
            }
            SolverSpec::MemEff(params) => {
                params.validate()?;
                check_dims(params.sampler.n, params.sampler.d)
            }
            SolverSpec::VanillaZo(v) => v.validate(),
            SolverSpec::FullBatchZo(f) => f.validate(),
            SolverSpec::Zpsvrg(z) => z.validate(),
        }
    }
}

/// When to evaluate metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricSchedule {
    EveryIters(u64),
    /// Whenever another `c` oracle calls have been spent.
    EveryCalls(u64),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub solver: SolverSpec,
    pub max_oracle_calls: u64,
    pub metrics: MetricSchedule,
    pub seed: u64,
    /// Defaults to the origin.
    pub x0: Option<Vec<f64>>,
    /// `h(x*)` for the gap column; falls back to the problem's known optimum.
    pub reference_value: Option<f64>,
    /// Step of the reported gradient mapping; defaults to `1/L`.
    pub grad_map_alpha: Option<f64>,
    /// Fill the `wall_ms` column (makes traces machine dependent).
    pub record_wall_time: bool,
    pub divergence_threshold: f64,
    pub max_iterations: Option<u64>,
}

impl RunConfig {
    pub fn new(solver: SolverSpec, max_oracle_calls: u64, seed: u64) -> Self {
        Self {
            solver,
            max_oracle_calls,
            metrics: MetricSchedule::EveryCalls((max_oracle_calls / 500).max(1)),
            seed,
            x0: None,
            reference_value: None,
            grad_map_alpha: None,
            record_wall_time: false,
            divergence_threshold: 1e12,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub oracle_calls: u64,
    pub iter: u64,
    pub objective: f64,
    pub gap: Option<f64>,
    pub grad_map_norm: Option<f64>,
    pub wall_ms: Option<f64>,
}

pub const TRACE_HEADER: [&str; 6] = ["oracle_calls", "iter", "objective", "gap", "grad_map_norm", "wall_ms"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Trace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(TRACE_HEADER)?;
        for r in &self.rows {
            wr.write_record([
                r.oracle_calls.to_string(),
                r.iter.to_string(),
                r.objective.to_string(),
                opt_field(r.gap),
                opt_field(r.grad_map_norm),
                opt_field(r.wall_ms),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
        if header != TRACE_HEADER {
            return Err(ZoError::Schema(format!("unexpected trace header {header:?}")));
        }
        let mut rows = Vec::new();
        for (k, rec) in rd.records().enumerate() {
            let rec = rec?;
            let line = k + 2;
            let bad = |m: String| ZoError::Parse { line, message: m };
            let int = |s: &str| s.parse::<u64>().map_err(|e| bad(format!("{s:?}: {e}")));
            let float = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
            let opt = |s: &str| if s.is_empty() { Ok(None) } else { float(s).map(Some) };
            rows.push(TraceRow {
                oracle_calls: int(&rec[0])?,
                iter: int(&rec[1])?,
                objective: float(&rec[2])?,
                gap: opt(&rec[3])?,
                grad_map_norm: opt(&rec[4])?,
                wall_ms: opt(&rec[5])?,
            });
        }
        Ok(Self { rows })
    }
}

/// Resolved scalars of a run, for manifests.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub solver: String,
    pub iterations: u64,
    pub oracle_calls: u64,
    pub wall_ms: f64,
    pub final_objective: f64,
    pub final_gap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub x: Vec<f64>,
    pub summary: RunSummary,
}

/// A run that stopped on an error; keeps what was recorded up to then.
#[derive(Debug)]
pub struct RunFailure {
    pub error: ZoError,
    pub trace: Trace,
    pub last_good_x: Vec<f64>,
    pub iterations: u64,
    pub oracle_calls: u64,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} iterations)", self.error, self.iterations)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

enum Stepper {
    Zivr(ZivrParams, Option<ZivrState>, JacobianInit, Vec<f64>),
    MemEff(MemEffParams, Option<MemEffState>, Vec<f64>),
    Vanilla(VanillaParams, Vec<f64>, u64),
    FullBatch(FullBatchParams, Vec<f64>),
    Zpsvrg(ZpsvrgParams, ZpsvrgState),
}

impl Stepper {
    fn new(spec: &SolverSpec, x0: Vec<f64>) -> Self {
        match spec {
            SolverSpec::Zivr { params, init } => Stepper::Zivr(params.clone(), None, *init, x0),
            SolverSpec::MemEff(p) => Stepper::MemEff(p.clone(), None, x0),
            SolverSpec::VanillaZo(p) => Stepper::Vanilla(p.clone(), x0, 0),
            SolverSpec::FullBatchZo(p) => Stepper::FullBatch(p.clone(), x0),
            SolverSpec::Zpsvrg(p) => Stepper::Zpsvrg(p.clone(), ZpsvrgState::new(x0)),
        }
    }

    fn x(&self) -> &[f64] {
        match self {
            Stepper::Zivr(_, Some(s), ..) => &s.x,
            Stepper::Zivr(_, None, _, x0) => x0,
            Stepper::MemEff(_, Some(s), _) => &s.x,
            Stepper::MemEff(_, None, x0) => x0,
            Stepper::Vanilla(_, x, _) => x,
            Stepper::FullBatch(_, x) => x,
            Stepper::Zpsvrg(_, s) => &s.x,
        }
    }

    /// Cost of the next step when it is known in advance.
    fn deterministic_cost(&self, n: usize, d: usize) -> Option<u64> {
        let sweep = (n * (d + 1)) as u64;
        match self {
            Stepper::Zivr(_, None, JacobianInit::Warm, _) => Some(sweep),
            Stepper::MemEff(_, None, _) => Some(sweep),
            Stepper::FullBatch(..) => Some(sweep),
            Stepper::Zpsvrg(_, s) => s.snapshot_cost(n, d),
            _ => None,
        }
    }

    fn step(&mut self, oracle: &mut CountingOracle<'_>, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        match self {
            Stepper::Zivr(params, state, init, x0) => {
                let st = match state {
                    Some(s) => s,
                    None => {
                        let s = match init {
                            JacobianInit::Zero => ZivrState::zero(x0.clone(), oracle.n()),
                            JacobianInit::Warm => ZivrState::warm(oracle, x0.clone(), params.beta.initial())?,
                        };
                        state.insert(s)
                    }
                };
                Ok(zivr_step(st, oracle, params, rng)?.gradient)
            }
            Stepper::MemEff(params, state, x0) => {
                let st = match state {
                    Some(s) => s,
                    None => {
                        let s = MemEffState::init(oracle, x0.clone(), params.blocks(), params.beta.initial())?;
                        state.insert(s)
                    }
                };
                Ok(memeff_step(st, oracle, params, rng)?.gradient)
            }
            Stepper::Vanilla(params, x, k) => {
                let g = vanilla_zo_step(x, *k, oracle, params, rng)?;
                *k += 1;
                Ok(g)
            }
            Stepper::FullBatch(params, x) => full_batch_zo_step(x, oracle, params),
            Stepper::Zpsvrg(params, st) => zpsvrg_step(st, oracle, params, rng),
        }
    }
}

struct Recorder<'a> {
    problem: &'a CompositeProblem,
    h_star: Option<f64>,
    gm_alpha: f64,
    with_gm: bool,
    start: Option<Instant>,
    trace: Trace,
}

impl Recorder<'_> {
    fn record(&mut self, calls: u64, iter: u64, x: &[f64]) -> Result<f64> {
        let objective = self.problem.objective_value(x)?;
        let gap = self.h_star.map(|h| objective - h);
        let grad_map_norm = if self.with_gm { Some(grad_map_norm(self.problem, x, self.gm_alpha)?) } else { None };
        let wall_ms = self.start.map(|s| s.elapsed().as_secs_f64() * 1e3);
        self.trace.rows.push(TraceRow { oracle_calls: calls, iter, objective, gap, grad_map_norm, wall_ms });
        Ok(objective)
    }
}

/// Drives a solver until the oracle budget is spent.
///
/// A step whose cost is fixed in advance (full sweeps) is skipped when it
/// would overrun the budget; other steps run while calls remain, so the
/// final count can exceed the budget by at most one iteration.
pub fn run(problem: &CompositeProblem, cfg: &RunConfig) -> std::result::Result<RunOutput, RunFailure> {
    let fail = |error: ZoError| RunFailure {
        error,
        trace: Trace::default(),
        last_good_x: cfg.x0.clone().unwrap_or_else(|| vec![0.0; problem.d()]),
        iterations: 0,
        oracle_calls: 0,
    };
    cfg.solver.validate(problem).map_err(&fail)?;
    let x0 = cfg.x0.clone().unwrap_or_else(|| vec![0.0; problem.d()]);
    if x0.len() != problem.d() || !linalg::all_finite(&x0) {
        return Err(fail(ZoError::Parameter("x0 must be a finite vector of length d".into())));
    }
    let stride_ok = match cfg.metrics {
        MetricSchedule::EveryIters(s) | MetricSchedule::EveryCalls(s) => s > 0,
    };
    if !stride_ok {
        return Err(fail(ZoError::Parameter("metric stride must be >= 1".into())));
    }
    let gm_alpha = cfg.grad_map_alpha.unwrap_or(1.0 / problem.smoothness());
    let start = Instant::now();
    let mut rec = Recorder {
        problem,
        h_star: cfg.reference_value.or_else(|| problem.known_optimum().map(|o| o.value)),
        gm_alpha,
        with_gm: problem.has_reference_gradient(),
        start: cfg.record_wall_time.then_some(start),
        trace: Trace::default(),
    };
    let mut oracle = CountingOracle::new(problem);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stepper = Stepper::new(&cfg.solver, x0);
    let (n, d) = (problem.n(), problem.d());
    let mut iter = 0u64;
    let mut last_good = stepper.x().to_vec();
    let mut next_metric_calls = 0u64;
    let mut recorded_at: Option<u64> = None;

    let outcome: Result<()> = (|| {
        let obj = rec.record(0, 0, stepper.x())?;
        check_objective(obj, cfg, 0, 0)?;
        recorded_at = Some(0);
        if let MetricSchedule::EveryCalls(c) = cfg.metrics {
            next_metric_calls = c;
        }
        while oracle.calls() < cfg.max_oracle_calls && cfg.max_iterations.is_none_or(|m| iter < m) {
            if let Some(c) = stepper.deterministic_cost(n, d) {
                if oracle.calls() + c > cfg.max_oracle_calls {
                    break;
                }
            }
            let g = stepper.step(&mut oracle, &mut rng)?;
            iter += 1;
            let gn = linalg::norm(&g);
            if !(gn <= cfg.divergence_threshold) || !linalg::all_finite(stepper.x()) {
                return Err(ZoError::Divergence {
                    iter,
                    oracle_calls: oracle.calls(),
                    message: format!("gradient estimate norm {gn:e}"),
                });
            }
            last_good = stepper.x().to_vec();
            let due = match cfg.metrics {
                MetricSchedule::EveryIters(s) => iter.is_multiple_of(s),
                MetricSchedule::EveryCalls(c) => {
                    let hit = oracle.calls() >= next_metric_calls;
                    while next_metric_calls <= oracle.calls() {
                        next_metric_calls += c;
                    }
                    hit
                }
            };
            if due {
                let obj = rec.record(oracle.calls(), iter, stepper.x())?;
                check_objective(obj, cfg, iter, oracle.calls())?;
                recorded_at = Some(iter);
            }
        }
        if recorded_at != Some(iter) {
            let obj = rec.record(oracle.calls(), iter, stepper.x())?;
            check_objective(obj, cfg, iter, oracle.calls())?;
        }
        Ok(())
    })();

    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok(()) => {
            let last = rec.trace.last().cloned().expect("trace has an initial row");
            Ok(RunOutput {
                x: stepper.x().to_vec(),
                summary: RunSummary {
                    solver: cfg.solver.name(),
                    iterations: iter,
                    oracle_calls: oracle.calls(),
                    wall_ms,
                    final_objective: last.objective,
                    final_gap: last.gap,
                },
                trace: rec.trace,
            })
        }
        Err(error) => Err(RunFailure {
            error,
            trace: rec.trace,
            last_good_x: last_good,
            iterations: iter,
            oracle_calls: oracle.calls(),
        }),
    }
}

fn check_objective(obj: f64, cfg: &RunConfig, iter: u64, calls: u64) -> Result<()> {
    if obj.abs() > cfg.divergence_threshold {
        return Err(ZoError::Divergence { iter, oracle_calls: calls, message: format!("objective {obj:e}") });
    }
    Ok(())
}
