//! Formula checking over an explored state graph.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::guard::{Guard, GuardCompiler, GuardExpr, SignalState, Value};
use crate::kernel::{
    advance_to_next_event, eval_in_state, AdvanceOptions, Earliest, KernelError, KernelState, Step,
};
use crate::net::{guard_string, CompiledNet, Role};
use crate::verdict::Outcome;
use crate::Time;

use super::explore::{Edge, EdgeLabel, PathStep, ReachGraph};
use super::AnalysisError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionClass {
    Outputs,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Forbid {
    Class(TransitionClass),
    Transitions(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Formula {
    /// No forbidden transition fires from a state where `when` holds.
    Safety {
        #[serde(with = "guard_string")]
        when: GuardExpr,
        forbid: Forbid,
    },
    /// While `when` holds persistently, `target` holds within `within` ticks.
    BoundedResponse {
        #[serde(with = "guard_string")]
        when: GuardExpr,
        #[serde(with = "guard_string")]
        target: GuardExpr,
        within: Time,
    },
    /// While `when` holds persistently, `place` becomes marked within `within` ticks.
    Reach {
        place: String,
        #[serde(with = "guard_string")]
        when: GuardExpr,
        within: Time,
    },
    /// `place` is never entered from a state where `condition` holds.
    NeverWhile {
        place: String,
        #[serde(with = "guard_string")]
        condition: GuardExpr,
    },
}

impl std::fmt::Display for Formula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Formula::Safety { when, forbid } => {
                let what = match forbid {
                    Forbid::Class(TransitionClass::Outputs) => "outputs".to_string(),
                    Forbid::Transitions(ts) => ts.join("|"),
                };
                write!(f, "always ({when}) -> no {what}")
            }
            Formula::BoundedResponse {
                when,
                target,
                within,
            } => write!(f, "({when}) leads to ({target}) within {within}"),
            Formula::Reach {
                place,
                when,
                within,
            } => write!(f, "reach {place} within {within} while ({when})"),
            Formula::NeverWhile { place, condition } => {
                write!(f, "never enter {place} while ({condition})")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    /// Signal values at time 0.
    pub initial: Vec<(String, Value)>,
    pub steps: Vec<PathStep>,
    /// Instant at which the violation is established: the offending firing,
    /// or the last instant a response was still allowed.
    pub at: Time,
}

impl Counterexample {
    /// Firings along the path as `(time, transition)`.
    pub fn firings(&self) -> Vec<(Time, String)> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                PathStep::Fire { time, transition } => Some((*time, transition.clone())),
                PathStep::Tick { .. } => None,
            })
            .collect()
    }

    /// Signal assignments along the path as `(time, signal, value)`.
    pub fn script(&self) -> Vec<(Time, String, bool)> {
        self.steps
            .iter()
            .flat_map(|s| match s {
                PathStep::Tick { time, set } => {
                    set.iter().map(|(n, v)| (*time, n.clone(), *v)).collect()
                }
                PathStep::Fire { .. } => Vec::new(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FormulaVerdict {
    pub formula: String,
    pub outcome: Outcome,
    /// Reachable states satisfying the premise.
    pub premise_states: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn remap_held(g: Guard, map: &[usize]) -> Guard {
    match g {
        Guard::Held { slot, duration } => Guard::Held {
            slot: map[slot],
            duration,
        },
        Guard::Not(x) => Guard::Not(Box::new(remap_held(*x, map))),
        Guard::And(v) => Guard::And(v.into_iter().map(|x| remap_held(x, map)).collect()),
        Guard::Or(v) => Guard::Or(v.into_iter().map(|x| remap_held(x, map)).collect()),
        other => other,
    }
}

/// Compiles a condition against the net. Clock-based atoms must stay within the
/// saturation bounds the explorer keeps, otherwise the answer would be wrong.
pub fn compile_condition(net: &CompiledNet, e: &GuardExpr) -> Result<Guard, AnalysisError> {
    let mut c = GuardCompiler::new(&net.signals, net.place_index(), &net.predicates);
    let g = c
        .compile(e)
        .map_err(|err| AnalysisError::Formula(format!("`{e}`: {err}")))?;
    let slots = c.into_slots();
    let mut map = Vec::new();
    for s in &slots {
        let i = net
            .held_slots
            .iter()
            .position(|h| h.inner == s.inner)
            .ok_or_else(|| {
                AnalysisError::Formula(format!("`held_for({})` is not tracked by the net", s.expr))
            })?;
        map.push(i);
    }
    let g = remap_held(g, &map);
    let mut err = None;
    g.walk(&mut |x| match *x {
        Guard::Timeout { place, budget }
            if net.timeout_budgets[place]
                .iter()
                .max()
                .is_none_or(|&m| budget > m) =>
        {
            err = Some(format!(
                "timeout budget {budget} on `{}` exceeds what the net tracks",
                net.places[place]
            ));
        }
        Guard::Held { slot, duration }
            if net.held_durations[slot]
                .iter()
                .max()
                .is_none_or(|&m| duration > m) =>
        {
            err = Some(format!(
                "held_for duration {duration} exceeds what the net tracks"
            ));
        }
        _ => {}
    });
    match err {
        Some(m) => Err(AnalysisError::Formula(m)),
        None => Ok(g),
    }
}

fn mentions_pruned(graph: &ReachGraph<'_>, e: &GuardExpr) -> Option<String> {
    let inlined = e.inline(&graph.net.predicates);
    inlined
        .identifiers()
        .into_iter()
        .find(|n| graph.pruned.contains(n))
}

struct Eval<'g, 'n> {
    graph: &'g ReachGraph<'n>,
}

impl Eval<'_, '_> {
    fn holds(&self, g: &Guard, s: u32) -> bool {
        let st = &self.graph.states[s as usize];
        eval_in_state(g, &st.kernel, &st.values)
    }

    fn counterexample(&self, edges: Vec<Edge>, at: Time) -> Counterexample {
        Counterexample {
            initial: self.graph.initial_values(),
            steps: self.graph.steps(&edges),
            at,
        }
    }
}

pub fn check_formula(
    graph: &ReachGraph<'_>,
    formula: &Formula,
) -> Result<FormulaVerdict, AnalysisError> {
    let net = graph.net;
    let ev = Eval { graph };
    let n = graph.len() as u32;
    let mut verdict = FormulaVerdict {
        formula: formula.to_string(),
        outcome: Outcome::Pass,
        premise_states: 0,
        counterexample: None,
        note: None,
    };
    let premise_expr = match formula {
        Formula::Safety { when, .. }
        | Formula::BoundedResponse { when, .. }
        | Formula::Reach { when, .. } => when,
        Formula::NeverWhile { condition, .. } => condition,
    };
    if let Some(name) = mentions_pruned(graph, premise_expr) {
        verdict.outcome = Outcome::Inconclusive;
        verdict.note = Some(format!(
            "signal `{name}` was not explored (no guard reads it)"
        ));
        return Ok(verdict);
    }
    let premise = compile_condition(net, premise_expr)?;
    let premise_holds: Vec<bool> = (0..n).map(|s| ev.holds(&premise, s)).collect();
    verdict.premise_states = premise_holds.iter().filter(|&&b| b).count();

    match formula {
        Formula::Safety { forbid, .. } => {
            let forbidden: Vec<bool> = net
                .transitions
                .iter()
                .map(|t| match forbid {
                    Forbid::Class(TransitionClass::Outputs) => t.role == Role::Output,
                    Forbid::Transitions(ts) => ts.contains(&t.name),
                })
                .collect();
            if let Forbid::Transitions(ts) = forbid {
                for t in ts {
                    net.transition_id(t).ok_or_else(|| {
                        AnalysisError::Formula(format!("unknown transition `{t}`"))
                    })?;
                }
            }
            let bad = graph.edges.iter().find(|e| {
                matches!(e.label, EdgeLabel::Fire(t) if forbidden[t])
                    && premise_holds[e.src as usize]
            });
            if let Some(e) = bad {
                let mut path = graph.path_to(e.src);
                path.push(*e);
                verdict.outcome = Outcome::Violation;
                verdict.counterexample =
                    Some(ev.counterexample(path, graph.states[e.src as usize].depth));
            }
        }
        Formula::NeverWhile { place, .. } => {
            let p = net
                .place_id(place)
                .ok_or_else(|| AnalysisError::UnknownPlace(place.clone()))?;
            let marked = |s: u32| graph.states[s as usize].kernel.marking[p] > 0;
            let bad = graph
                .edges
                .iter()
                .find(|e| premise_holds[e.src as usize] && !marked(e.src) && marked(e.dst));
            if let Some(e) = bad {
                let mut path = graph.path_to(e.src);
                path.push(*e);
                verdict.outcome = Outcome::Violation;
                verdict.counterexample =
                    Some(ev.counterexample(path, graph.states[e.src as usize].depth));
            }
        }
        Formula::BoundedResponse { target, within, .. } => {
            let target = compile_condition(net, target)?;
            bounded_response(&ev, &premise_holds, &target, *within, &mut verdict);
        }
        Formula::Reach { place, within, .. } => {
            if net.place_id(place).is_none() {
                return Err(AnalysisError::UnknownPlace(place.clone()));
            }
            let target = compile_condition(net, &GuardExpr::marked(place))?;
            bounded_response(&ev, &premise_holds, &target, *within, &mut verdict);
        }
    }

    if verdict.outcome == Outcome::Pass {
        if verdict.premise_states == 0 {
            verdict.outcome = Outcome::VacuousPass;
        }
        if !graph.complete {
            let why = if graph.capped {
                "state cap reached"
            } else {
                "horizon reached"
            };
            match formula {
                Formula::Safety { .. } | Formula::NeverWhile { .. } => {
                    verdict.note =
                        Some(format!("holds up to time {} ({why})", graph.config.horizon));
                }
                _ => {}
            }
        }
    }
    Ok(verdict)
}

/// Longest tick count achievable while staying inside `inside`, saturated at `need`.
/// `open` states (unexplored successors) count as reaching `need` when pessimistic.
fn longest_stay(graph: &ReachGraph<'_>, inside: &[bool], need: u32, pessimistic: bool) -> Vec<u32> {
    let n = graph.len();
    let mut f = vec![0u32; n];
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, e) in graph.edges.iter().enumerate() {
        if inside[e.src as usize] && inside[e.dst as usize] {
            preds[e.dst as usize].push(i as u32);
        }
    }
    let mut queue: VecDeque<u32> = VecDeque::new();
    for s in 0..n {
        if !inside[s] {
            continue;
        }
        if pessimistic && graph.truncated[s] {
            f[s] = need;
        }
        queue.push_back(s as u32);
    }
    let mut queued = vec![true; n];
    while let Some(d) = queue.pop_front() {
        queued[d as usize] = false;
        for &ei in &preds[d as usize] {
            let e = graph.edges[ei as usize];
            let cand = (e.ticks() + f[d as usize]).min(need);
            if cand > f[e.src as usize] {
                f[e.src as usize] = cand;
                if !queued[e.src as usize] {
                    queued[e.src as usize] = true;
                    queue.push_back(e.src);
                }
            }
        }
    }
    f
}

fn bounded_response(
    ev: &Eval<'_, '_>,
    premise: &[bool],
    target: &Guard,
    within: Time,
    verdict: &mut FormulaVerdict,
) {
    let graph = ev.graph;
    let inside: Vec<bool> = (0..graph.len() as u32)
        .map(|s| premise[s as usize] && !ev.holds(target, s))
        .collect();
    let need = within as u32 + 1;
    let f = longest_stay(graph, &inside, need, false);
    let start = (0..graph.len())
        .filter(|&s| inside[s] && f[s] >= need)
        .min_by_key(|&s| graph.states[s].depth);
    if let Some(s) = start {
        let mut path = graph.path_to(s as u32);
        let t0 = graph.states[s].depth;
        let mut cur = s as u32;
        let mut remaining = need;
        let mut seen = HashSet::new();
        while remaining > 0 && seen.insert((cur, remaining)) {
            let next = graph
                .out_edges(cur)
                .filter(|e| inside[e.dst as usize] && e.ticks() + f[e.dst as usize] >= remaining)
                .max_by_key(|e| e.ticks());
            let Some(e) = next else { break };
            path.push(*e);
            remaining -= e.ticks();
            cur = e.dst;
        }
        verdict.outcome = Outcome::Violation;
        verdict.counterexample = Some(ev.counterexample(path, t0 + within));
        verdict.note = Some(format!(
            "premise held from time {t0} without response for {need} ticks"
        ));
        return;
    }
    if !graph.complete {
        let f = longest_stay(graph, &inside, need, true);
        if (0..graph.len()).any(|s| inside[s] && f[s] >= need) {
            verdict.outcome = Outcome::Inconclusive;
            verdict.note = Some(format!(
                "exploration stopped before the bound of {within} ticks could be confirmed"
            ));
        }
    }
}

/// Result of replaying a counterexample through the kernel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Replay {
    pub expected: Vec<(Time, String)>,
    pub observed: Vec<(Time, String)>,
}

impl Replay {
    pub fn matches(&self) -> bool {
        self.expected == self.observed
    }
}

/// Drives the kernel with the counterexample's signal script under the earliest
/// policy up to the violation instant and collects the firings it produces.
/// Only counterexamples from earliest-branching graphs are expected to match.
pub fn replay(net: &CompiledNet, cex: &Counterexample) -> Result<Replay, KernelError> {
    let mut sig = SignalState::new(net.signals.clone());
    for (name, v) in &cex.initial {
        if Some(*v)
            != net
                .signals
                .id(name)
                .map(|i| net.signals.decl(i).initial_value())
        {
            sig.record(name, *v, 0)
                .map_err(|e| KernelError::NotEnabled(e.to_string()))?;
        }
    }
    for (t, name, v) in cex.script() {
        sig.record(&name, Value::Bool(v), t)
            .map_err(|e| KernelError::NotEnabled(e.to_string()))?;
    }
    let at = cex.at;
    let expected = cex.firings();
    let at_instant = expected.iter().filter(|(t, _)| *t == at).count();
    let mut state = KernelState::initial(net, &sig.values_at(0));
    let opts = AdvanceOptions::new(at);
    let mut observed = Vec::new();
    let mut seen_at = 0;
    loop {
        match advance_to_next_event(net, &mut state, &sig, &mut Earliest, &opts)? {
            Step::Fired(e) => {
                if e.time == at {
                    if seen_at == at_instant {
                        break;
                    }
                    seen_at += 1;
                }
                observed.push((e.time, net.transitions[e.transition].name.clone()));
            }
            Step::Advanced { .. } => {}
            Step::Idle => break,
        }
    }
    Ok(Replay { expected, observed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{explore, Branching, ExploreConfig};
    use crate::guard::parse_guard;
    use crate::net::Net;
    use crate::smart::{build_single_agent, SmartConfig};

    fn g(s: &str) -> GuardExpr {
        parse_guard(s).unwrap()
    }

    fn smart() -> CompiledNet {
        CompiledNet::new(&build_single_agent(&SmartConfig::default()).unwrap()).unwrap()
    }

    fn all_cfg() -> ExploreConfig {
        ExploreConfig {
            horizon: 40,
            max_flips: Some(1),
            ..Default::default()
        }
    }

    #[test]
    fn formulas_round_trip_through_json() {
        let f = Formula::Safety {
            when: g("invalid"),
            forbid: Forbid::Class(TransitionClass::Outputs),
        };
        let j = serde_json::to_string(&f).unwrap();
        assert_eq!(
            j,
            r#"{"kind":"safety","when":"invalid","forbid":"outputs"}"#
        );
        assert_eq!(serde_json::from_str::<Formula>(&j).unwrap(), f);
        let br: Formula = serde_json::from_str(
            r#"{"kind":"bounded-response","when":"invalid and marked(P_S)","target":"not marked(P_S)","within":2}"#,
        )
        .unwrap();
        assert!(matches!(br, Formula::BoundedResponse { within: 2, .. }));
    }

    #[test]
    fn no_output_while_invalid() {
        let n = smart();
        let graph = explore(&n, &all_cfg()).unwrap();
        let v = check_formula(
            &graph,
            &Formula::Safety {
                when: g("invalid"),
                forbid: Forbid::Class(TransitionClass::Outputs),
            },
        )
        .unwrap();
        assert_eq!(v.outcome, Outcome::Pass, "{v:?}");
        assert!(v.premise_states > 0);
    }

    #[test]
    fn stable_mode_left_within_deadline() {
        let n = smart();
        let graph = explore(&n, &all_cfg()).unwrap();
        let f = |within| Formula::BoundedResponse {
            when: g("invalid and not UR and marked(P_S)"),
            target: g("not marked(P_S)"),
            within,
        };
        assert_eq!(check_formula(&graph, &f(2)).unwrap().outcome, Outcome::Pass);
        // one tick too tight: the strong deadline allows a stay of exactly two ticks
        let tight = check_formula(&graph, &f(1)).unwrap();
        assert_eq!(tight.outcome, Outcome::Violation);
    }

    #[test]
    fn vacuous_when_premise_unreachable() {
        let n = smart();
        let graph = explore(&n, &all_cfg()).unwrap();
        let v = check_formula(
            &graph,
            &Formula::Safety {
                when: g("marked(P_S) and marked(P_R)"),
                forbid: Forbid::Class(TransitionClass::Outputs),
            },
        )
        .unwrap();
        assert_eq!(v.outcome, Outcome::VacuousPass);
    }

    #[test]
    fn restricted_mode_is_absorbing_by_default() {
        let n = smart();
        let graph = explore(&n, &all_cfg()).unwrap();
        let v = check_formula(
            &graph,
            &Formula::NeverWhile {
                place: "P_S".into(),
                condition: g("marked(P_R)"),
            },
        )
        .unwrap();
        assert_eq!(v.outcome, Outcome::Pass);
    }

    #[test]
    fn pruned_signal_makes_formula_inconclusive() {
        let n = smart();
        let graph = explore(&n, &all_cfg()).unwrap();
        let v = check_formula(
            &graph,
            &Formula::Safety {
                when: g("ext_auth"),
                forbid: Forbid::Class(TransitionClass::Outputs),
            },
        )
        .unwrap();
        assert_eq!(v.outcome, Outcome::Inconclusive);
    }

    #[test]
    fn short_horizon_is_inconclusive_for_response() {
        let n = smart();
        let graph = explore(
            &n,
            &ExploreConfig {
                horizon: 1,
                ..all_cfg()
            },
        )
        .unwrap();
        assert!(!graph.complete);
        let v = check_formula(
            &graph,
            &Formula::Reach {
                place: "P_R".into(),
                when: g("UR"),
                within: 30,
            },
        )
        .unwrap();
        assert_eq!(v.outcome, Outcome::Inconclusive, "{v:?}");
    }

    #[test]
    fn missing_escalation_counterexample_replays() {
        let mut net: Net = build_single_agent(&SmartConfig::default()).unwrap();
        net.remove_transitions(&["t_SM"]);
        let n = CompiledNet::new(&net).unwrap();
        let cfg = ExploreConfig {
            horizon: 20,
            branching: Branching::Earliest,
            max_flips: Some(1),
            outputs: false,
            ..Default::default()
        };
        let graph = explore(&n, &cfg).unwrap();
        let v = check_formula(
            &graph,
            &Formula::BoundedResponse {
                when: g("invalid and not UR and marked(P_S)"),
                target: g("not marked(P_S)"),
                within: 2,
            },
        )
        .unwrap();
        assert_eq!(v.outcome, Outcome::Violation);
        let cex = v.counterexample.unwrap();
        assert!(!cex.script().is_empty());
        let r = replay(&n, &cex).unwrap();
        assert!(r.matches(), "{r:?}");
    }

    #[test]
    fn condition_compiler_rejects_untracked_clocks() {
        let n = smart();
        assert!(compile_condition(&n, &g("timeout(P_M, 99)")).is_err());
        assert!(compile_condition(&n, &g("held_for(anom, 2)")).is_err());
        assert!(compile_condition(&n, &g("timeout(P_M, 5)")).is_ok());
    }
}
