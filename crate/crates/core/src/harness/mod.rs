//! Instances, generators, validation and experiments.

mod charts;
mod experiment;
mod generators;
mod instance;
mod validate;

pub use charts::{configuration_svg, line_chart, Series};
pub use experiment::{
    run_experiment, run_trials, summarize, CellSummary, Execution, ExperimentError, ExperimentPlan,
    ExperimentReport, GeneratorKind, TrialRecord,
};
pub use generators::{gen_gap_theorem1, gen_hexagon, gen_line_lemma1, GeneratorError};
pub use instance::Instance;
pub use validate::{validate_instance, TunnelCheck, ValidationReport, Violation};
