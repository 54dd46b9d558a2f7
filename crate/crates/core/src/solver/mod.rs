//! The ZIVR iteration, its memory-efficient form, parameter presets and
//! the budgeted run loop.

mod memeff;
mod metrics;
pub mod presets;
mod run;
mod zivr;

pub use memeff::{memeff_step, memeff_step_with_plan, MemEffParams, MemEffState};
pub use metrics::{grad_map, grad_map_norm};
pub use presets::{preset_alpha, preset_beta, preset_kappa, Regime};
pub use run::{
    run, JacobianInit, MetricSchedule, RunConfig, RunFailure, RunOutput, RunSummary, SolverSpec, Trace, TraceRow,
    TRACE_HEADER,
};
pub use zivr::{estimate_gradient, zivr_step, zivr_step_with_plan, BetaSchedule, StepReport, ZivrParams, ZivrState};
