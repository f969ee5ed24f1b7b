//! Curriculum-scheduled spectral enhancement.

mod delta;
mod schedule;

pub use delta::{
    build_delta, build_delta_masked, build_delta_with_draws, enhance, frobenius_bound, perturbation_bound,
    BoundCheck, DeltaSpec, SubspaceMask,
};
pub use schedule::{alpha_schedule, batch_scaling, lambda_schedule, schedules_csv, ScheduleState, REFERENCE_BATCH};
