//! Scenario documents shipped with the crate.

use crate::monitor::{check_trigger_set, MonitorError, Timeline, Trace, TriggerVerdict};
use crate::smart::TriggerSet;

use super::scenario::{parse_scenario, Scenario, ScenarioError};

macro_rules! shipped {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../../../scenarios/", $name, ".json")))),*]
    };
}

const BUILTIN: &[(&str, &str)] = shipped!(
    "robot-nominal",
    "robot-anomaly",
    "robot-escalation",
    "robot-ur-spike",
    "robot-ur-in-recovery",
    "robot-conflict",
    "governance-from-stable",
    "governance-from-recovery",
    "governance-from-assisted",
    "distributed-agreement",
    "robot-no-assist",
    "robot-structural",
    "hysteresis-oscillation",
    "robot-mutant-no-sm",
    "zeno-loop",
);

/// The six scenarios trigger sets are judged against.
pub const REFERENCE_SUITE: [&str; 6] = [
    "robot-nominal",
    "robot-anomaly",
    "robot-escalation",
    "robot-ur-spike",
    "robot-ur-in-recovery",
    "robot-conflict",
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

/// Source text of a shipped scenario.
pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

pub fn reference_suite() -> Result<Vec<Scenario>, ScenarioError> {
    REFERENCE_SUITE
        .iter()
        .map(|n| parse_scenario(builtin(n).expect("shipped scenario"), None))
        .collect()
}

/// Judges each agent's trigger set over every trace it appears in. `adjust`
/// may rewrite the default set (to model a mutant, for instance).
pub fn suite_triggers(
    traces: &[Trace],
    adjust: &dyn Fn(TriggerSet) -> TriggerSet,
) -> Result<Vec<TriggerVerdict>, MonitorError> {
    let timelines = traces
        .iter()
        .map(Timeline::new)
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for tl in &timelines {
        for a in tl.agents()? {
            let set = adjust(TriggerSet::default_for(a));
            let mut v = check_trigger_set(std::slice::from_ref(tl), &set, &a.id)?;
            v.agent = format!("{}/{}", tl.scenario, a.id);
            out.push(v);
        }
    }
    Ok(out)
}
