//! Line-delimited trace files and the per-instant view monitors read.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::guard::{eval_guard, EvalContext, GuardExpr, MarkingHistory, SignalState, Value};
use crate::kernel::PolicyKind;
use crate::net::{CompiledNet, Net, TransitionId};
use crate::smart::{AgentRoles, Mode};
use crate::Time;

pub const TRACE_FORMAT: &str = "smart-tgpn-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MonitorError {
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace is inconsistent at event {event}: {message}")]
    Inconsistent { event: usize, message: String },
    #[error("trace net is not a SMART net")]
    NoRoles,
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("cannot evaluate `{expr}`: {message}")]
    Eval { expr: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub scenario: String,
    pub policy: PolicyKind,
    pub seed: u64,
    pub horizon: Time,
    /// Flattened net the trace was produced by.
    pub net: Net,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Signal,
    Fire,
    /// An output was requested but its transition was not enabled.
    OutputBlocked,
    /// Last record; `name` says why the run stopped.
    End,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEvent {
    pub time: Time,
    pub kind: EventKind,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    /// Marking after a firing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marking: Option<String>,
}

impl TraceEvent {
    pub fn signal(time: Time, name: impl Into<String>, value: Value) -> Self {
        TraceEvent {
            time,
            kind: EventKind::Signal,
            name: name.into(),
            value: Some(value),
            marking: None,
        }
    }

    pub fn fire(time: Time, transition: impl Into<String>, marking: String) -> Self {
        TraceEvent {
            time,
            kind: EventKind::Fire,
            name: transition.into(),
            value: None,
            marking: Some(marking),
        }
    }

    pub fn output_blocked(time: Time, transition: impl Into<String>) -> Self {
        TraceEvent {
            time,
            kind: EventKind::OutputBlocked,
            name: transition.into(),
            value: None,
            marking: None,
        }
    }

    pub fn end(time: Time, reason: impl Into<String>) -> Self {
        TraceEvent {
            time,
            kind: EventKind::End,
            name: reason.into(),
            value: None,
            marking: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Trace, MonitorError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(MonitorError::Parse {
            line: 1,
            message: "empty trace".into(),
        })?;
        let header: TraceHeader = serde_json::from_str(first).map_err(|e| MonitorError::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        if header.format != TRACE_FORMAT || header.version != TRACE_VERSION {
            return Err(MonitorError::Parse {
                line: 1,
                message: format!(
                    "unsupported trace format {} v{}",
                    header.format, header.version
                ),
            });
        }
        let events = lines
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| MonitorError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<TraceEvent>, _>>()?;
        Ok(Trace { header, events })
    }

    pub fn end_time(&self) -> Time {
        self.events.last().map_or(0, |e| e.time)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Firing {
    /// Index into the trace's event list.
    pub event: usize,
    pub time: Time,
    pub transition: TransitionId,
    pub pre: Vec<u32>,
    pub post: Vec<u32>,
}

/// Replayed view of a trace: signal histories, marking history and firings.
pub struct Timeline {
    pub scenario: String,
    pub net: CompiledNet,
    pub signals: SignalState,
    pub history: MarkingHistory,
    pub firings: Vec<Firing>,
    pub blocked_outputs: Vec<(usize, Time, String)>,
    pub end: Time,
    pub end_reason: String,
}

impl Timeline {
    pub fn new(trace: &Trace) -> Result<Timeline, MonitorError> {
        let inconsistent = |event, message: String| MonitorError::Inconsistent { event, message };
        let net =
            CompiledNet::new(&trace.header.net).map_err(|e| inconsistent(0, e.to_string()))?;
        let mut signals = SignalState::new(net.signals.clone());
        let mut history = MarkingHistory::new(net.places.clone(), net.initial_marking.clone());
        let mut marking = net.initial_marking.clone();
        let mut firings = Vec::new();
        let mut blocked = Vec::new();
        let mut last = 0;
        let mut end_reason = String::from("horizon");
        for (i, e) in trace.events.iter().enumerate() {
            if e.time < last {
                return Err(inconsistent(i, format!("time {} after {last}", e.time)));
            }
            last = e.time;
            match e.kind {
                EventKind::Signal => {
                    let v = e
                        .value
                        .ok_or_else(|| inconsistent(i, "signal event without value".into()))?;
                    let v = match net.signals.id(&e.name).map(|id| net.signals.decl(id).kind) {
                        Some(kind) => Value::coerce(kind, &serde_json::to_value(v).expect("value"))
                            .unwrap_or(v),
                        None => v,
                    };
                    signals
                        .record(&e.name, v, e.time)
                        .map_err(|err| inconsistent(i, err.to_string()))?;
                }
                EventKind::Fire => {
                    let t = net.transition_id(&e.name).ok_or_else(|| {
                        inconsistent(i, format!("unknown transition `{}`", e.name))
                    })?;
                    let tr = &net.transitions[t];
                    let pre = marking.clone();
                    for &(p, w) in &tr.inputs {
                        marking[p] = marking[p].checked_sub(w).ok_or_else(|| {
                            inconsistent(i, format!("`{}` fired without tokens", e.name))
                        })?;
                    }
                    for &(p, w) in &tr.outputs {
                        marking[p] += w;
                    }
                    if let Some(d) = &e.marking {
                        let got = net.marking_digest(&marking);
                        if *d != got {
                            return Err(inconsistent(
                                i,
                                format!("snapshot `{d}` but replay gives `{got}`"),
                            ));
                        }
                    }
                    history.push(e.time, marking.clone());
                    firings.push(Firing {
                        event: i,
                        time: e.time,
                        transition: t,
                        pre,
                        post: marking.clone(),
                    });
                }
                EventKind::OutputBlocked => blocked.push((i, e.time, e.name.clone())),
                EventKind::End => end_reason = e.name.clone(),
            }
        }
        Ok(Timeline {
            scenario: trace.header.scenario.clone(),
            net,
            signals,
            history,
            firings,
            blocked_outputs: blocked,
            end: trace.end_time(),
            end_reason,
        })
    }

    pub fn agents(&self) -> Result<&[AgentRoles], MonitorError> {
        Ok(&self.net.smart().ok_or(MonitorError::NoRoles)?.agents)
    }

    pub fn agent(&self, id: &str) -> Result<&AgentRoles, MonitorError> {
        self.net
            .smart()
            .ok_or(MonitorError::NoRoles)?
            .agent(id)
            .ok_or_else(|| MonitorError::UnknownAgent(id.to_string()))
    }

    /// Truth of `expr` at instant `t`, after that instant's firings.
    pub fn holds(&self, expr: &GuardExpr, t: Time) -> Result<bool, MonitorError> {
        let ctx = EvalContext {
            signals: &self.signals,
            predicates: &self.net.predicates,
            marking: self.history.at(t),
            history: Some(&self.history),
            places: self.net.place_index(),
            now: t,
        };
        eval_guard(expr, &ctx).map_err(|e| MonitorError::Eval {
            expr: expr.to_string(),
            message: e.to_string(),
        })
    }

    /// Truth of `expr` at every instant of `0..=end`.
    pub fn series(&self, expr: &GuardExpr) -> Result<Vec<bool>, MonitorError> {
        (0..=self.end).map(|t| self.holds(expr, t)).collect()
    }

    pub fn marked(&self, place: &str, t: Time) -> bool {
        self.net
            .place_id(place)
            .is_some_and(|p| self.history.at(t)[p] > 0)
    }

    /// Settled mode of an agent at `t`.
    pub fn mode_at(&self, a: &AgentRoles, t: Time) -> Option<Mode> {
        Mode::ALL
            .into_iter()
            .find(|&m| self.marked(a.modes.place(m), t))
    }

    pub fn firings_of<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Firing> + 'a {
        self.firings
            .iter()
            .filter(move |f| self.net.transitions[f.transition].name == name)
    }

    pub fn name_of(&self, f: &Firing) -> &str {
        &self.net.transitions[f.transition].name
    }

    /// Values of every signal at `t` by name.
    pub fn values_by_name(&self, t: Time) -> BTreeMap<String, Value> {
        let v = self.signals.values_at(t);
        (0..self.net.signals.len())
            .map(|i| (self.net.signals.name(i).to_string(), v.get(i)))
            .collect()
    }
}

/// Maximal runs of consecutive `true` entries as inclusive `(start, end)` instants.
pub fn runs(series: &[bool]) -> Vec<(Time, Time)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &b) in series.iter().enumerate() {
        match (b, start) {
            (true, None) => start = Some(i as Time),
            (false, Some(s)) => {
                out.push((s, i as Time - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, series.len() as Time - 1));
    }
    out
}
