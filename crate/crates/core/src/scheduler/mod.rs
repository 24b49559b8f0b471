//! Execution engines: the sequential asynchronous scheduler, greedy parallel
//! schedules derived from its traces, and the forest-path executor.

mod engine;
pub mod parallel;
pub mod path;
pub mod policy;
pub mod trace;

pub use engine::{
    run_async, ActivationReport, EngineError, Outcome, RunOptions, RunResult, Simulation,
};
pub use parallel::{
    build_greedy_forest_schedule, check_dominance, check_expanded_parent_invariant,
    validate_parallel_schedule, DominanceViolation, ExpandedParentViolation, ParallelSchedule,
    ScheduleError, ScheduleMode,
};
pub use policy::ActivationPolicy;
pub use trace::{Event, FlagEvent, RoundTrace, Snapshot, Trace, TracedMove};
