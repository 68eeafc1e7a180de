//! Seeded Monte Carlo campaigns over the localization estimators.

mod runner;
mod scenario;
mod spec;

pub use runner::{
    run_campaign, run_trial, MethodStats, SweepRow, TrialOutcome, TrialRecord, TrialTable,
    MAX_REDRAWS,
};
pub use scenario::{scenario_one, scenario_two, Overrides};
pub use spec::{
    ExperimentSpec, GeometrySpec, NoiseSpec, ScenarioTag, SweepParam, SweepSpec, TargetBox,
};
