//! File formats and report documents: TOML scenarios, JSON Lines ledgers,
//! and the JSON/CSV/text artifacts the command line emits.

mod artifacts;
mod ledger;
mod scenario;

pub use artifacts::{
    build_report, csv_tables, plot_series, render_csv, render_text, run_scenario_experiments,
    schedule_scenario, Artifact, AsymmetryReport, DensityPoint, ExperimentDoc, PhasePoint,
    PlotSeries, ReportDoc, ScheduleDoc, TaskReport, WindowReport, ALPHA_POINTS,
};
pub use ledger::{ledger_to_jsonl, parse_ledger, parse_ledger_str};
pub use scenario::{
    AsymmetrySpec, ExperimentsSection, InstanceDef, ScenarioConfig, SimulationSection,
    TransferSpec, Units, WindowDef, SCENARIO_VERSION,
};

/// The scenario shipped with the crate.
pub const DEFAULT_SCENARIO: &str = include_str!("../../scenarios/default.toml");

#[cfg(test)]
mod tests;
