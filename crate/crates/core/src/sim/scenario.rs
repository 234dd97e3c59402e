//! Scenario documents: net source, signal script, run settings and checks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{ExploreConfig, Formula};
use crate::guard::{SignalKind, Value};
use crate::kernel::{PolicyKind, DEFAULT_ZENO_LIMIT};
use crate::monitor::Proposition;
use crate::net::{CompiledNet, Net, NetError};
use crate::smart::{
    build_multi_agent, build_single_agent, AgentSpec, SmartConfig, SmartError, TriggerSet,
};
use crate::Time;

pub const SEED_ENV: &str = "SMART_TGPN_SEED";

/// Scenario-only signal requesting output attempts (`<agent>.want_output` for multi-agent nets).
pub const WANT_OUTPUT: &str = "want_output";

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario schema error at `{path}` (line {line}, column {column}): {message}")]
    Schema {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("undeclared signal `{0}`")]
    UndeclaredSignal(String),
    #[error("bad value {value} for signal `{signal}`")]
    BadValue { signal: String, value: String },
    #[error("script entry at t={time} is beyond the horizon {horizon}")]
    AfterHorizon { time: Time, horizon: Time },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Smart(#[from] SmartError),
    #[error("cannot read `{path}`: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetSource {
    Builder(BuilderSource),
    File { file: PathBuf },
    Inline { inline: Box<Net> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "lowercase", deny_unknown_fields)]
pub enum BuilderSource {
    Single {
        #[serde(default)]
        config: SmartConfig,
    },
    Multi {
        agents: Vec<AgentSpec>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mutations {
    /// Transitions deleted from the built net.
    pub remove_transitions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub time: Time,
    pub signal: String,
    pub value: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedFormula {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub formula: Formula,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TriggerSource {
    /// `"default"`: the builder's trigger set for every agent.
    Named(String),
    Custom(Box<TriggerSet>),
}

fn default_horizon() -> Time {
    50
}

fn yes() -> bool {
    true
}

fn default_zeno() -> u32 {
    DEFAULT_ZENO_LIMIT
}

/// The document as written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub net: NetSource,
    #[serde(default)]
    pub mutations: Mutations,
    #[serde(default)]
    pub initial: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    pub script: Vec<ScriptEntry>,
    #[serde(default = "default_horizon")]
    pub horizon: Time,
    #[serde(default)]
    pub policy: PolicyKind,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "yes")]
    pub stop_on_quiescence: bool,
    #[serde(default = "default_zeno")]
    pub zeno_limit: u32,
    #[serde(default)]
    pub propositions: Vec<Proposition>,
    #[serde(default)]
    pub formulas: Vec<NamedFormula>,
    #[serde(default)]
    pub triggers: Option<TriggerSource>,
    #[serde(default)]
    pub exploration: Option<ExploreConfig>,
}

/// A resolved signal assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub time: Time,
    pub signal: String,
    pub value: Value,
}

/// Output-request schedule of one agent.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputRequests {
    pub agent: String,
    pub outputs: Vec<String>,
    /// Change points `(time, requested)`.
    pub changes: Vec<(Time, bool)>,
}

impl OutputRequests {
    pub fn requested_at(&self, t: Time) -> bool {
        self.changes
            .iter()
            .take_while(|&&(ct, _)| ct <= t)
            .last()
            .is_some_and(|&(_, v)| v)
    }

    pub fn next_change_after(&self, t: Time) -> Option<Time> {
        self.changes.iter().map(|&(ct, _)| ct).find(|&ct| ct > t)
    }
}

#[derive(Clone, Debug)]
pub struct TriggerCheck {
    pub agent: String,
    pub set: TriggerSet,
}

/// A fully resolved scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub doc: ScenarioDoc,
    pub net: Net,
    pub initial: Vec<Assignment>,
    pub script: Vec<Assignment>,
    pub want_output: Vec<OutputRequests>,
    pub seed: u64,
    pub triggers: Vec<TriggerCheck>,
    pub warnings: Vec<String>,
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.doc.name
    }

    pub fn compiled(&self) -> Result<CompiledNet, NetError> {
        CompiledNet::new(&self.net)
    }
}

fn schema_error(e: serde_path_to_error::Error<serde_json::Error>) -> ScenarioError {
    let path = e.path().to_string();
    let inner = e.into_inner();
    let (line, column) = (inner.line(), inner.column());
    ScenarioError::Schema {
        path,
        line,
        column,
        message: inner.to_string(),
    }
}

fn resolve_net(doc: &ScenarioDoc, base: Option<&Path>) -> Result<Net, ScenarioError> {
    let mut net = match &doc.net {
        NetSource::Builder(BuilderSource::Single { config }) => build_single_agent(config)?,
        NetSource::Builder(BuilderSource::Multi { agents }) => build_multi_agent(agents)?,
        NetSource::File { file } => {
            let path = match base {
                Some(b) if file.is_relative() => b.join(file),
                _ => file.clone(),
            };
            let text = std::fs::read_to_string(&path).map_err(|e| ScenarioError::Io {
                path: path.clone(),
                message: e.to_string(),
            })?;
            Net::from_json(&text)?
        }
        NetSource::Inline { inline } => (**inline).clone(),
    };
    if !doc.mutations.remove_transitions.is_empty() {
        for t in &doc.mutations.remove_transitions {
            if net.transition(t).is_none() {
                return Err(ScenarioError::Invalid(format!(
                    "mutation removes unknown transition `{t}`"
                )));
            }
        }
        let ids: Vec<&str> = doc
            .mutations
            .remove_transitions
            .iter()
            .map(String::as_str)
            .collect();
        net.remove_transitions(&ids);
    }
    Ok(net.flatten()?)
}

fn resolve_value(
    c: &CompiledNet,
    signal: &str,
    raw: &serde_json::Value,
) -> Result<Value, ScenarioError> {
    let id = c
        .signals
        .id(signal)
        .ok_or_else(|| ScenarioError::UndeclaredSignal(signal.to_string()))?;
    Value::coerce(c.signals.decl(id).kind, raw).ok_or_else(|| ScenarioError::BadValue {
        signal: signal.to_string(),
        value: raw.to_string(),
    })
}

fn want_flag(signal: &str, raw: &serde_json::Value) -> Result<bool, ScenarioError> {
    Value::coerce(SignalKind::Bool, raw)
        .and_then(Value::as_bool)
        .ok_or_else(|| ScenarioError::BadValue {
            signal: signal.to_string(),
            value: raw.to_string(),
        })
}

/// Parses and resolves a scenario. Relative net file paths are taken from `base`.
pub fn parse_scenario(text: &str, base: Option<&Path>) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ScenarioDoc = serde_path_to_error::deserialize(de).map_err(schema_error)?;
    resolve(doc, base)
}

pub fn resolve(doc: ScenarioDoc, base: Option<&Path>) -> Result<Scenario, ScenarioError> {
    let net = resolve_net(&doc, base)?;
    let c = CompiledNet::new(&net)?;
    let mut warnings = Vec::new();

    for d in c.signals.decls() {
        if d.kind == SignalKind::Real && d.initial.is_none() && !doc.initial.contains_key(&d.name) {
            warnings.push(format!(
                "real signal `{}` has no initial value; using 0",
                d.name
            ));
        }
    }

    let agents: Vec<(String, String, Vec<String>)> = net
        .smart
        .as_ref()
        .map(|r| {
            r.agents
                .iter()
                .map(|a| (a.id.clone(), a.name(WANT_OUTPUT), a.outputs.clone()))
                .collect()
        })
        .unwrap_or_default();
    let mut want: Vec<OutputRequests> = agents
        .iter()
        .map(|(id, _, outs)| OutputRequests {
            agent: id.clone(),
            outputs: outs.clone(),
            changes: Vec::new(),
        })
        .collect();

    let mut initial = Vec::new();
    for (name, raw) in &doc.initial {
        if let Some(i) = agents.iter().position(|(_, w, _)| w == name) {
            want[i].changes.push((0, want_flag(name, raw)?));
            continue;
        }
        initial.push(Assignment {
            time: 0,
            signal: name.clone(),
            value: resolve_value(&c, name, raw)?,
        });
    }

    let mut entries = doc.script.clone();
    entries.sort_by_key(|e| e.time);
    let mut script = Vec::new();
    for e in &entries {
        if e.time > doc.horizon {
            return Err(ScenarioError::AfterHorizon {
                time: e.time,
                horizon: doc.horizon,
            });
        }
        if let Some(i) = agents.iter().position(|(_, w, _)| *w == e.signal) {
            want[i]
                .changes
                .push((e.time, want_flag(&e.signal, &e.value)?));
            continue;
        }
        script.push(Assignment {
            time: e.time,
            signal: e.signal.clone(),
            value: resolve_value(&c, &e.signal, &e.value)?,
        });
    }

    let seed = match doc.seed {
        Some(s) => s,
        None => std::env::var(SEED_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0),
    };

    let triggers = match &doc.triggers {
        None => Vec::new(),
        Some(TriggerSource::Named(n)) if n == "default" => net
            .smart
            .as_ref()
            .ok_or_else(|| ScenarioError::Invalid("default triggers need a SMART net".into()))?
            .agents
            .iter()
            .map(|a| TriggerCheck {
                agent: a.id.clone(),
                set: TriggerSet::default_for(a),
            })
            .collect(),
        Some(TriggerSource::Named(n)) => {
            return Err(ScenarioError::Invalid(format!(
                "unknown trigger set `{n}` (expected \"default\" or an object)"
            )))
        }
        Some(TriggerSource::Custom(set)) => {
            let roles = net
                .smart
                .as_ref()
                .ok_or_else(|| ScenarioError::Invalid("trigger checks need a SMART net".into()))?;
            let owner = roles
                .agents
                .iter()
                .find(|a| set.all().any(|t| a.move_of(&t.transition).is_some()))
                .unwrap_or(&roles.agents[0]);
            let undeclared = set.undeclared(&net);
            if let Some(n) = undeclared.into_iter().next() {
                return Err(ScenarioError::UndeclaredSignal(n));
            }
            vec![TriggerCheck {
                agent: owner.id.clone(),
                set: (**set).clone(),
            }]
        }
    };

    Ok(Scenario {
        doc,
        net,
        initial,
        script,
        want_output: want,
        seed,
        triggers,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ANOMALY: &str = r#"{
        "name": "anomaly",
        "net": {"builder": "single"},
        "script": [
            {"time": 3, "signal": "anom", "value": 1},
            {"time": 7, "signal": "anom", "value": 0}
        ],
        "horizon": 20
    }"#;

    #[test]
    fn parses_builder_scenario() {
        let s = parse_scenario(ANOMALY, None).unwrap();
        assert_eq!(s.script.len(), 2);
        assert_eq!(s.script[0].value, Value::Bool(true));
        assert_eq!(s.doc.policy, PolicyKind::Earliest);
        assert!(s.doc.stop_on_quiescence);
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn script_after_horizon_rejected() {
        let text = ANOMALY.replace("\"time\": 7", "\"time\": 70");
        assert!(matches!(
            parse_scenario(&text, None),
            Err(ScenarioError::AfterHorizon { time: 70, .. })
        ));
    }

    #[test]
    fn undeclared_signal_rejected() {
        let text = ANOMALY.replace(
            "\"signal\": \"anom\", \"value\": 0",
            "\"signal\": \"ghost\", \"value\": 0",
        );
        assert!(
            matches!(parse_scenario(&text, None), Err(ScenarioError::UndeclaredSignal(s)) if s == "ghost")
        );
    }

    #[test]
    fn schema_errors_carry_location() {
        let text = ANOMALY.replace("\"horizon\": 20", "\"horizon\": \"soon\"");
        match parse_scenario(&text, None) {
            Err(ScenarioError::Schema { path, line, .. }) => {
                assert_eq!(path, "horizon");
                assert_eq!(line, 8);
            }
            other => panic!("{other:?}"),
        }
        let text = ANOMALY.replace("\"horizon\"", "\"horizn\"");
        assert!(matches!(
            parse_scenario(&text, None),
            Err(ScenarioError::Schema { .. })
        ));
    }

    #[test]
    fn want_output_is_separated_from_signals() {
        let text = r#"{"name": "w", "net": {"builder": "single"},
            "script": [{"time": 1, "signal": "want_output", "value": true},
                       {"time": 4, "signal": "want_output", "value": false}]}"#;
        let s = parse_scenario(text, None).unwrap();
        assert!(s.script.is_empty());
        let w = &s.want_output[0];
        assert!(!w.requested_at(0) && w.requested_at(1) && w.requested_at(3) && !w.requested_at(4));
        assert_eq!(w.next_change_after(1), Some(4));
    }

    #[test]
    fn real_without_initial_warns() {
        let net = r#"{"places": ["p"], "transitions": [], "arcs": [], "signals": [{"name": "U", "kind": "real"}]}"#;
        let text = format!(r#"{{"name": "r", "net": {{"inline": {net}}}}}"#);
        let s = parse_scenario(&text, None).unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert!(s.warnings[0].contains("`U`"));
    }

    #[test]
    fn mutation_and_triggers_resolve() {
        let text = r#"{"name": "m", "net": {"builder": "single"},
            "mutations": {"remove_transitions": ["t_SR"]}, "triggers": "default"}"#;
        let s = parse_scenario(text, None).unwrap();
        assert!(s.net.transition("t_SR").is_none());
        assert_eq!(s.triggers.len(), 1);
        let bad = text.replace("t_SR", "t_nope");
        assert!(matches!(
            parse_scenario(&bad, None),
            Err(ScenarioError::Invalid(_))
        ));
    }

    #[test]
    fn seed_falls_back_to_zero_or_env() {
        let s = parse_scenario(ANOMALY, None).unwrap();
        let expected = std::env::var(SEED_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0);
        assert_eq!(s.seed, expected);
        let with = ANOMALY.replace("\"horizon\": 20", "\"horizon\": 20, \"seed\": 9");
        assert_eq!(parse_scenario(&with, None).unwrap().seed, 9);
    }

    #[test]
    fn multi_agent_want_output_names() {
        let text = r#"{"name": "mm", "net": {"builder": "multi", "agents": [{"id": "scout"}, {"id": "supervisor"}]},
            "script": [{"time": 1, "signal": "scout.want_output", "value": 1},
                       {"time": 2, "signal": "scout.disagree", "value": 1}]}"#;
        let s = parse_scenario(text, None).unwrap();
        assert_eq!(s.script.len(), 1);
        assert!(s.want_output[0].requested_at(1));
        assert!(!s.want_output[1].requested_at(1));
    }
}
