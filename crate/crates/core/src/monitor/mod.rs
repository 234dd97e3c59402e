//! Verdicts over complete traces.

mod props;
mod trace;
mod triggers;

pub use props::{
    check_bounded_autonomy, check_distributed_soundness, check_governance_reachability,
    check_mandatory_escalation, check_output_gating, check_proposition, Proposition,
};
pub use trace::{
    runs, EventKind, Firing, MonitorError, Timeline, Trace, TraceEvent, TraceHeader, TRACE_FORMAT,
    TRACE_VERSION,
};
pub use triggers::{check_trigger_set, TriggerVerdict};
