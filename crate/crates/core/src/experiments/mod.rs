//! Scenario files, sweeps with rate fits, and the invariant check suite
//! behind the command-line front end.

mod check;
mod config;
mod fit;
mod run;

pub use check::{check, CheckLevel, CheckOptions, CheckSummary, InvariantResult};
pub use config::{Axis, ConfigError, EtaKind, FlowSource, KernelConfig, ScenarioConfig, SWEEP_QUANTITIES};
pub use fit::{fit_rate, RateFit};
pub use run::{
    catalog_table, load_config, run, scenario_reports, spot_check, sweep, sweep_from_reports, RunOutput, SweepResult,
    SweepRow,
};
