//! Scenarios, the simulation loop, run reports and the reference suite.

mod report;
mod run;
mod scenario;
mod suite;

pub use report::{render_text, stats_table, suite_line};
pub use run::{
    exploration_config, run, simulate, stats, verify, AgentStats, ExplorationSummary,
    ModeResidence, NamedFormulaVerdict, RunError, RunReport, RunStats,
};
pub use scenario::{
    parse_scenario, resolve, Assignment, BuilderSource, Mutations, NamedFormula, NetSource,
    OutputRequests, Scenario, ScenarioDoc, ScenarioError, ScriptEntry, TriggerCheck, TriggerSource,
    SEED_ENV, WANT_OUTPUT,
};
pub use suite::{builtin, builtin_names, reference_suite, suite_triggers, REFERENCE_SUITE};
