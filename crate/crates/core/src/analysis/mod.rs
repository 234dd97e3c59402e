//! Structural checks and bounded reachability analysis.

mod explore;
mod formula;
mod incidence;

pub use explore::{
    explore, Branching, Edge, EdgeLabel, ExState, ExploreConfig, InvariantViolation, PathStep,
    ReachGraph,
};
pub use formula::{
    check_formula, compile_condition, replay, Counterexample, Forbid, Formula, FormulaVerdict,
    Replay, TransitionClass,
};
pub use incidence::{
    check_p_invariant, incidence_matrix, structural_output_safety, AnalysisError, IncidenceMatrix,
    SafetyReport,
};
