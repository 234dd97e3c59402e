//! The discrete-event run loop and the checks run over its trace.

use serde::Serialize;

use crate::analysis::{check_formula, explore, AnalysisError, ExploreConfig, FormulaVerdict};
use crate::guard::{SignalError, SignalState};
use crate::kernel::{
    advance_to_next_event, due_transitions, enabled, fire, make_policy, next_event_time, schedule,
    AdvanceOptions, KernelError, KernelState, Step,
};
use crate::monitor::{
    check_proposition, check_trigger_set, MonitorError, Timeline, Trace, TraceEvent, TraceHeader,
    TriggerVerdict, TRACE_FORMAT, TRACE_VERSION,
};
use crate::net::{CompiledNet, NetError};
use crate::smart::{AgentRoles, Mode};
use crate::verdict::{Outcome, Verdict};
use crate::Time;

use super::scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AgentStats {
    pub agent: String,
    /// Ticks spent in each mode over `[0, end)`.
    pub residence: ModeResidence,
    /// Mode switches away from the stable mode or deeper into escalation.
    pub escalations: usize,
    pub governance_entries: usize,
    pub returns_to_stable: usize,
    pub outputs: usize,
    pub blocked_outputs: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ModeResidence {
    pub stable: Time,
    pub recovery: Time,
    pub assisted: Time,
    pub restricted: Time,
}

impl ModeResidence {
    pub fn get_mut(&mut self, m: Mode) -> &mut Time {
        match m {
            Mode::S => &mut self.stable,
            Mode::M => &mut self.recovery,
            Mode::A => &mut self.assisted,
            Mode::R => &mut self.restricted,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub firings: usize,
    pub agents: Vec<AgentStats>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExplorationSummary {
    pub states: usize,
    pub edges: usize,
    pub complete: bool,
    pub capped: bool,
    pub alphabet: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pruned: Vec<String>,
    pub invariant_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    pub horizon: Time,
    pub end: Time,
    pub end_reason: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub propositions: Vec<Verdict>,
    pub formulas: Vec<NamedFormulaVerdict>,
    pub triggers: Vec<TriggerVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exploration: Option<ExplorationSummary>,
    pub stats: RunStats,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedFormulaVerdict {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub verdict: FormulaVerdict,
}

impl RunReport {
    pub fn recompute_outcome(&mut self) {
        let mut all: Vec<Outcome> = self.propositions.iter().map(|v| v.outcome).collect();
        all.extend(self.formulas.iter().map(|f| f.verdict.outcome));
        all.extend(self.triggers.iter().map(|t| t.outcome));
        if self
            .exploration
            .as_ref()
            .is_some_and(|e| e.invariant_violations > 0)
        {
            all.push(Outcome::Violation);
        }
        self.outcome = Outcome::worst(all);
    }
}

/// Simulates the scenario and returns its trace.
pub fn simulate(sc: &Scenario) -> Result<Trace, RunError> {
    let net = CompiledNet::new(&sc.net)?;
    let doc = &sc.doc;
    let mut signals = SignalState::new(net.signals.clone());
    let mut events = Vec::new();
    for a in &sc.initial {
        signals.record(&a.signal, a.value, 0)?;
        events.push(TraceEvent::signal(0, &a.signal, a.value));
    }
    for a in &sc.script {
        signals.record(&a.signal, a.value, a.time)?;
    }
    let agents: Vec<AgentRoles> = net.smart().map(|r| r.agents.clone()).unwrap_or_default();

    let mut policy = make_policy(doc.policy, sc.seed);
    let mut state = KernelState::initial(&net, &signals.values_at(0));
    let mut opts = AdvanceOptions::new(doc.horizon);
    opts.zeno_limit = doc.zeno_limit;
    let mut next_script = 0;
    let mut attempted: Vec<Option<Time>> = vec![None; sc.want_output.len()];
    let end_reason;

    loop {
        let now = state.now;
        while next_script < sc.script.len() && sc.script[next_script].time <= now {
            let a = &sc.script[next_script];
            events.push(TraceEvent::signal(a.time, &a.signal, a.value));
            next_script += 1;
        }

        let values = signals.values_at(now);
        state.refresh(&net, &values);
        schedule(&net, &mut state, policy.as_mut());
        if due_transitions(&net, &state).is_empty() {
            let mut fired_output = false;
            for (i, w) in sc.want_output.iter().enumerate() {
                if !w.requested_at(now) || attempted[i] == Some(now) {
                    continue;
                }
                attempted[i] = Some(now);
                for name in &w.outputs {
                    let Some(t) = net.transition_id(name) else {
                        continue;
                    };
                    let ready = enabled(&net, &state, &values, t)
                        && state.timers[t].is_some_and(|x| x >= net.transitions[t].lo);
                    if ready {
                        if state.same_instant + 1 >= opts.zeno_limit {
                            return Err(KernelError::Zeno {
                                time: now,
                                limit: opts.zeno_limit,
                            }
                            .into());
                        }
                        let e = fire(&net, &mut state, &values, t)?;
                        events.push(TraceEvent::fire(now, name, net.marking_digest(&e.post)));
                        fired_output = true;
                    } else {
                        events.push(TraceEvent::output_blocked(now, name));
                    }
                }
            }
            if fired_output {
                continue;
            }
            if doc.stop_on_quiescence && quiescent(&net, &state, &signals, sc, &agents) {
                end_reason = "quiescence";
                break;
            }
        }

        opts.wakeup = sc
            .want_output
            .iter()
            .filter_map(|w| {
                if w.requested_at(now) {
                    Some(now + 1)
                } else {
                    w.next_change_after(now)
                }
            })
            .min();
        match advance_to_next_event(&net, &mut state, &signals, policy.as_mut(), &opts)? {
            Step::Fired(e) => {
                let name = &net.transitions[e.transition].name;
                events.push(TraceEvent::fire(e.time, name, net.marking_digest(&e.post)));
            }
            Step::Advanced { .. } => {}
            Step::Idle => {
                end_reason = "horizon";
                break;
            }
        }
    }
    events.push(TraceEvent::end(state.now, end_reason));
    Ok(Trace {
        header: TraceHeader {
            format: TRACE_FORMAT.into(),
            version: TRACE_VERSION,
            scenario: doc.name.clone(),
            policy: doc.policy,
            seed: sc.seed,
            horizon: doc.horizon,
            net: sc.net.clone(),
        },
        events,
    })
}

/// Every agent sits in its restricted mode and nothing further can happen.
fn quiescent(
    net: &CompiledNet,
    state: &KernelState,
    signals: &SignalState,
    sc: &Scenario,
    agents: &[AgentRoles],
) -> bool {
    let now = state.now;
    !agents.is_empty()
        && agents.iter().all(|a| {
            net.place_id(a.modes.place(Mode::R))
                .is_some_and(|p| state.marking[p] > 0)
        })
        && next_event_time(net, state, signals).is_none()
        && sc
            .want_output
            .iter()
            .all(|w| !w.requested_at(now) && w.next_change_after(now).is_none())
}

/// Firing counts and per-agent mode statistics of a trace.
pub fn stats(tl: &Timeline) -> RunStats {
    let mut out = RunStats {
        firings: tl.firings.len(),
        agents: Vec::new(),
    };
    let Some(roles) = tl.net.smart() else {
        return out;
    };
    for a in &roles.agents {
        let mut s = AgentStats {
            agent: a.id.clone(),
            ..AgentStats::default()
        };
        for t in 0..tl.end {
            if let Some(m) = tl.mode_at(a, t) {
                *s.residence.get_mut(m) += 1;
            }
        }
        for f in &tl.firings {
            let name = tl.name_of(f);
            match a.move_of(name) {
                Some("SM" | "MA") => s.escalations += 1,
                Some("SR" | "MR" | "AR") => {
                    s.escalations += 1;
                    s.governance_entries += 1;
                }
                Some("MS" | "AS" | "RS") => s.returns_to_stable += 1,
                _ => {}
            }
            if a.outputs.iter().any(|o| o == name) {
                s.outputs += 1;
            }
        }
        s.blocked_outputs = tl
            .blocked_outputs
            .iter()
            .filter(|(_, _, n)| a.outputs.contains(n))
            .count();
        out.agents.push(s);
    }
    out
}

/// Runs the scenario's propositions, trigger checks and formulas against `trace`.
pub fn verify(sc: &Scenario, trace: &Trace) -> Result<RunReport, RunError> {
    let tl = Timeline::new(trace)?;
    let doc = &sc.doc;
    let mut propositions = Vec::new();
    for &p in &doc.propositions {
        propositions.extend(check_proposition(&tl, p)?);
    }
    let mut triggers = Vec::new();
    for t in &sc.triggers {
        triggers.push(check_trigger_set(
            std::slice::from_ref(&tl),
            &t.set,
            &t.agent,
        )?);
    }

    let mut formulas = Vec::new();
    let mut exploration = None;
    if !doc.formulas.is_empty() || doc.exploration.is_some() {
        let net = CompiledNet::new(&sc.net)?;
        let cfg = exploration_config(sc);
        let graph = explore(&net, &cfg)?;
        for f in &doc.formulas {
            formulas.push(NamedFormulaVerdict {
                name: f.name.clone(),
                verdict: check_formula(&graph, &f.formula)?,
            });
        }
        exploration = Some(ExplorationSummary {
            states: graph.len(),
            edges: graph.edges.len(),
            complete: graph.complete,
            capped: graph.capped,
            alphabet: graph
                .alphabet
                .iter()
                .map(|&s| net.signals.name(s).to_string())
                .collect(),
            pruned: graph.pruned.clone(),
            invariant_violations: graph.invariant_violations.len(),
        });
    }

    let mut report = RunReport {
        scenario: doc.name.clone(),
        policy: trace.header.policy.to_string(),
        seed: trace.header.seed,
        horizon: trace.header.horizon,
        end: tl.end,
        end_reason: tl.end_reason.clone(),
        trace: None,
        warnings: sc.warnings.clone(),
        propositions,
        formulas,
        triggers,
        exploration,
        stats: stats(&tl),
        outcome: Outcome::VacuousPass,
    };
    report.recompute_outcome();
    Ok(report)
}

/// Exploration settings: the scenario's own, else defaults bounded by the run horizon.
pub fn exploration_config(sc: &Scenario) -> ExploreConfig {
    let mut cfg = sc.doc.exploration.clone().unwrap_or_else(|| ExploreConfig {
        horizon: sc.doc.horizon,
        ..ExploreConfig::default()
    });
    if cfg.initial.is_empty() {
        cfg.initial = sc
            .initial
            .iter()
            .map(|a| {
                (
                    a.signal.clone(),
                    serde_json::to_value(a.value).expect("value serializes"),
                )
            })
            .collect();
    }
    cfg
}

/// Simulates and checks the scenario.
pub fn run(sc: &Scenario) -> Result<(Trace, RunReport), RunError> {
    let trace = simulate(sc)?;
    let report = verify(sc, &trace)?;
    Ok((trace, report))
}
