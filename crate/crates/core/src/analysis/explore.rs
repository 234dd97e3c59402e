//! Bounded state-space exploration over integer ticks.
//!
//! States are deduplicated time-abstractly: two states with the same marking,
//! saturated clocks and signal values have the same future, so only the first
//! visit is kept and its depth records the earliest time it is reachable.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::guard::{SignalId, SignalKind, SignalValues, Value};
use crate::kernel::{enabled, KernelState};
use crate::net::{CompiledNet, Role, TransitionId};
use crate::Time;

use super::AnalysisError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branching {
    /// Any fireable transition may fire at any admissible clock value.
    #[default]
    All,
    /// Firings follow the kernel's earliest policy; only the environment branches.
    Earliest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreConfig {
    pub horizon: Time,
    pub branching: Branching,
    /// Boolean signals the environment may flip; defaults to those read by guards.
    pub alphabet: Option<Vec<String>>,
    /// Maximum number of simultaneous flips per tick.
    pub max_flips: Option<usize>,
    pub state_cap: usize,
    /// Whether output transitions are explored as optional firings.
    pub outputs: bool,
    /// Initial signal values overriding the declared ones.
    pub initial: BTreeMap<String, serde_json::Value>,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            horizon: 50,
            branching: Branching::All,
            alphabet: None,
            max_flips: None,
            state_cap: 1_000_000,
            outputs: true,
            initial: BTreeMap::new(),
        }
    }
}

const MAX_ALPHABET: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeLabel {
    Fire(TransitionId),
    /// One tick passes; bit `i` set means alphabet signal `i` flips at the new instant.
    Tick(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub src: u32,
    pub dst: u32,
    pub label: EdgeLabel,
}

impl Edge {
    pub fn ticks(&self) -> u32 {
        matches!(self.label, EdgeLabel::Tick(_)) as u32
    }
}

#[derive(Clone, Debug)]
pub struct ExState {
    pub kernel: KernelState,
    pub values: SignalValues,
    /// Earliest time at which the state is reached.
    pub depth: Time,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InvariantViolation {
    pub invariant: String,
    pub state: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct StateKey {
    marking: Vec<u32>,
    clocks: Vec<u32>,
    values: SignalValues,
}

/// Clock saturation bounds: beyond these values no guard or interval can tell clocks apart.
struct Caps {
    timers: Vec<Time>,
    residence: Vec<Time>,
    held: Vec<Time>,
}

impl Caps {
    fn new(net: &CompiledNet) -> Caps {
        Caps {
            timers: net
                .transitions
                .iter()
                .map(|t| match (t.hi, t.strong) {
                    (Some(hi), true) => hi,
                    (Some(hi), false) => hi + 1,
                    (None, _) => t.lo,
                })
                .collect(),
            residence: net
                .timeout_budgets
                .iter()
                .map(|b| b.iter().copied().max().unwrap_or(0))
                .collect(),
            held: net
                .held_durations
                .iter()
                .map(|d| d.iter().copied().max().unwrap_or(0))
                .collect(),
        }
    }

    fn apply(&self, s: &mut KernelState) {
        fn cap(v: &mut [Option<Time>], caps: &[Time]) {
            for (c, &m) in v.iter_mut().zip(caps) {
                if let Some(x) = c {
                    *x = (*x).min(m);
                }
            }
        }
        cap(&mut s.timers, &self.timers);
        cap(&mut s.residence, &self.residence);
        cap(&mut s.held, &self.held);
        s.scheduled.iter_mut().for_each(|x| *x = None);
        s.same_instant = 0;
    }
}

fn key_of(s: &KernelState, values: &SignalValues) -> StateKey {
    let enc = |c: &Option<Time>| c.map_or(0, |x| x as u32 + 1);
    StateKey {
        marking: s.marking.clone(),
        clocks: s
            .timers
            .iter()
            .chain(&s.residence)
            .chain(&s.held)
            .map(enc)
            .collect(),
        values: values.clone(),
    }
}

/// Explored state graph. State 0 is the initial state.
pub struct ReachGraph<'n> {
    pub net: &'n CompiledNet,
    pub config: ExploreConfig,
    pub states: Vec<ExState>,
    pub edges: Vec<Edge>,
    /// Signals the environment could flip.
    pub alphabet: Vec<SignalId>,
    /// Boolean signals held at their initial value because no guard reads them.
    pub pruned: Vec<String>,
    /// Whether every successor of every state is present.
    pub complete: bool,
    pub capped: bool,
    /// States with tick successors left unexplored at the horizon.
    pub truncated: Vec<bool>,
    pub invariant_violations: Vec<InvariantViolation>,
    parent: Vec<Option<u32>>,
    out_start: Vec<u32>,
    out_list: Vec<u32>,
}

struct Builder {
    caps: Caps,
    index: HashMap<StateKey, u32>,
    states: Vec<ExState>,
    edges: Vec<Edge>,
    parent: Vec<Option<u32>>,
    truncated: Vec<bool>,
    cap: usize,
    capped: bool,
    complete: bool,
    mode_sets: Vec<(String, Vec<usize>)>,
    /// Stable-mode place of the agent owning each output transition.
    output_owner: Vec<Option<usize>>,
    violations: Vec<InvariantViolation>,
}

impl Builder {
    /// Returns the state's index and whether it is new.
    fn intern(
        &mut self,
        mut k: KernelState,
        values: SignalValues,
        depth: Time,
        via: Option<u32>,
    ) -> Option<(u32, bool)> {
        self.caps.apply(&mut k);
        let key = key_of(&k, &values);
        if let Some(&i) = self.index.get(&key) {
            return Some((i, false));
        }
        if self.states.len() >= self.cap {
            self.capped = true;
            self.complete = false;
            return None;
        }
        let id = self.states.len() as u32;
        for (agent, places) in &self.mode_sets {
            let sum: u32 = places.iter().map(|&p| k.marking[p]).sum();
            if sum != 1 {
                self.violations.push(InvariantViolation {
                    invariant: format!("mode exclusivity ({agent})"),
                    state: id,
                });
            }
        }
        k.now = depth;
        self.index.insert(key, id);
        self.states.push(ExState {
            kernel: k,
            values,
            depth,
        });
        self.parent.push(via);
        self.truncated.push(false);
        Some((id, true))
    }

    fn push_edge(&mut self, src: u32, dst: u32, label: EdgeLabel) -> u32 {
        self.edges.push(Edge { src, dst, label });
        self.edges.len() as u32 - 1
    }
}

fn fireable(net: &CompiledNet, s: &KernelState, t: TransitionId) -> bool {
    let tr = &net.transitions[t];
    s.timers[t].is_some_and(|x| x >= tr.lo && tr.hi.is_none_or(|h| x <= h))
}

fn forced(net: &CompiledNet, s: &KernelState) -> bool {
    net.transitions
        .iter()
        .enumerate()
        .any(|(t, tr)| tr.strong && matches!((s.timers[t], tr.hi), (Some(x), Some(h)) if x >= h))
}

/// Transitions the earliest policy would fire now, best first.
fn earliest_due(net: &CompiledNet, s: &KernelState) -> Vec<TransitionId> {
    let mut due: Vec<TransitionId> = (0..net.transitions.len())
        .filter(|&t| {
            let tr = &net.transitions[t];
            fireable(net, s, t) && !(tr.role == Role::Output && !tr.strong)
        })
        .collect();
    due.sort_by(|&a, &b| net.order_key(a).cmp(&net.order_key(b)));
    due
}

fn flip_masks(k: usize, max: Option<usize>) -> Vec<u64> {
    let limit = max.unwrap_or(k);
    (0u64..(1u64 << k))
        .filter(|m| m.count_ones() as usize <= limit)
        .collect()
}

fn initial_values(net: &CompiledNet, cfg: &ExploreConfig) -> Result<SignalValues, AnalysisError> {
    let mut v = net.signals.initial_values();
    for (name, raw) in &cfg.initial {
        let id = net.signals.id(name).ok_or_else(|| {
            AnalysisError::Formula(format!("unknown signal `{name}` in initial values"))
        })?;
        let kind = net.signals.decl(id).kind;
        let val = Value::coerce(kind, raw).ok_or_else(|| {
            AnalysisError::Formula(format!("bad initial value for `{name}`: {raw}"))
        })?;
        v.set(id, val);
    }
    Ok(v)
}

fn choose_alphabet(
    net: &CompiledNet,
    cfg: &ExploreConfig,
) -> Result<(Vec<SignalId>, Vec<String>), AnalysisError> {
    let bools: Vec<SignalId> = (0..net.signals.len())
        .filter(|&i| net.signals.decl(i).kind == SignalKind::Bool)
        .collect();
    let alphabet = match &cfg.alphabet {
        Some(names) => names
            .iter()
            .map(|n| match net.signals.id(n) {
                Some(id) if net.signals.decl(id).kind == SignalKind::Bool => Ok(id),
                Some(_) => Err(AnalysisError::Formula(format!(
                    "`{n}` is not a boolean signal"
                ))),
                None => Err(AnalysisError::Formula(format!("unknown signal `{n}`"))),
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => {
            let mut read = vec![false; net.signals.len()];
            let guards = net
                .transitions
                .iter()
                .map(|t| &t.guard)
                .chain(net.held_slots.iter().map(|s| &s.inner));
            for g in guards {
                for id in g.signals() {
                    read[id] = true;
                }
            }
            bools.iter().copied().filter(|&i| read[i]).collect()
        }
    };
    if alphabet.len() > MAX_ALPHABET {
        return Err(AnalysisError::Formula(format!(
            "alphabet of {} signals is too large (limit {MAX_ALPHABET}); restrict it explicitly",
            alphabet.len()
        )));
    }
    // an explicit alphabet fixes the other signals on purpose; only the
    // default one silently drops signals a formula might still read
    let pruned = if cfg.alphabet.is_some() {
        Vec::new()
    } else {
        bools
            .iter()
            .filter(|i| !alphabet.contains(i))
            .map(|&i| net.signals.name(i).to_string())
            .collect()
    };
    Ok((alphabet, pruned))
}

/// Breadth-first exploration, one tick layer at a time.
pub fn explore<'n>(
    net: &'n CompiledNet,
    cfg: &ExploreConfig,
) -> Result<ReachGraph<'n>, AnalysisError> {
    let (alphabet, pruned) = choose_alphabet(net, cfg)?;
    let masks = flip_masks(alphabet.len(), cfg.max_flips);
    let v0 = initial_values(net, cfg)?;
    let mode_sets = net
        .smart()
        .map(|r| {
            r.agents
                .iter()
                .map(|a| {
                    let ps = a
                        .modes
                        .all()
                        .iter()
                        .filter_map(|p| net.place_id(p))
                        .collect();
                    (a.id.clone(), ps)
                })
                .collect()
        })
        .unwrap_or_default();
    let output_owner = net
        .transitions
        .iter()
        .map(|t| {
            net.smart()?
                .agents
                .iter()
                .find(|a| a.outputs.contains(&t.name))
                .and_then(|a| net.place_id(&a.modes.stable))
        })
        .collect();
    let mut b = Builder {
        caps: Caps::new(net),
        index: HashMap::new(),
        states: Vec::new(),
        edges: Vec::new(),
        parent: Vec::new(),
        truncated: Vec::new(),
        cap: cfg.state_cap.max(1),
        capped: false,
        complete: true,
        mode_sets,
        output_owner,
        violations: Vec::new(),
    };
    let k0 = KernelState::initial(net, &v0);
    b.intern(k0, v0, 0, None);

    let mut layer = vec![0u32];
    let mut depth: Time = 0;
    while !layer.is_empty() {
        let mut queue: VecDeque<u32> = layer.into();
        let mut next = Vec::new();
        while let Some(s) = queue.pop_front() {
            let st = b.states[s as usize].clone();
            let due = match cfg.branching {
                Branching::Earliest => earliest_due(net, &st.kernel),
                Branching::All => Vec::new(),
            };
            let firings: Vec<TransitionId> = match cfg.branching {
                Branching::Earliest if !due.is_empty() => vec![due[0]],
                _ => (0..net.transitions.len())
                    .filter(|&t| fireable(net, &st.kernel, t))
                    .filter(|&t| cfg.outputs || net.transitions[t].role != Role::Output)
                    .filter(|&t| {
                        cfg.branching == Branching::All || net.transitions[t].role == Role::Output
                    })
                    .collect(),
            };
            for t in firings {
                if let Some(p) = b.output_owner[t] {
                    if st.kernel.marking[p] == 0 {
                        b.violations.push(InvariantViolation {
                            invariant: format!("output legality ({})", net.transitions[t].name),
                            state: s,
                        });
                    }
                }
                let mut k = st.kernel.clone();
                if crate::kernel::fire(net, &mut k, &st.values, t).is_err() {
                    continue;
                }
                let e = b.edges.len() as u32;
                match b.intern(k, st.values.clone(), depth, Some(e)) {
                    Some((d, fresh)) => {
                        b.push_edge(s, d, EdgeLabel::Fire(t));
                        if fresh {
                            queue.push_back(d);
                        }
                    }
                    None => b.truncated[s as usize] = true,
                }
            }
            let may_tick = match cfg.branching {
                Branching::All => !forced(net, &st.kernel),
                Branching::Earliest => due.is_empty(),
            };
            if !may_tick {
                continue;
            }
            for &m in &masks {
                let mut values = st.values.clone();
                for (i, &id) in alphabet.iter().enumerate() {
                    if m >> i & 1 == 1 {
                        let cur = values.get(id).as_bool().unwrap_or(false);
                        values.set(id, Value::Bool(!cur));
                    }
                }
                let mut k = st.kernel.clone();
                k.elapse(1);
                k.refresh(net, &values);
                if depth >= cfg.horizon {
                    b.caps.apply(&mut k);
                    match b.index.get(&key_of(&k, &values)) {
                        Some(&d) => {
                            b.push_edge(s, d, EdgeLabel::Tick(m));
                        }
                        None => {
                            b.truncated[s as usize] = true;
                            b.complete = false;
                        }
                    }
                    continue;
                }
                let e = b.edges.len() as u32;
                match b.intern(k, values, depth + 1, Some(e)) {
                    Some((d, fresh)) => {
                        b.push_edge(s, d, EdgeLabel::Tick(m));
                        if fresh {
                            next.push(d);
                        }
                    }
                    None => b.truncated[s as usize] = true,
                }
            }
        }
        layer = next;
        depth += 1;
    }

    let n = b.states.len();
    let mut out_start = vec![0u32; n + 1];
    for e in &b.edges {
        out_start[e.src as usize + 1] += 1;
    }
    for i in 0..n {
        out_start[i + 1] += out_start[i];
    }
    let mut fill = out_start.clone();
    let mut out_list = vec![0u32; b.edges.len()];
    for (i, e) in b.edges.iter().enumerate() {
        out_list[fill[e.src as usize] as usize] = i as u32;
        fill[e.src as usize] += 1;
    }
    Ok(ReachGraph {
        net,
        config: cfg.clone(),
        states: b.states,
        edges: b.edges,
        alphabet,
        pruned,
        complete: b.complete,
        capped: b.capped,
        truncated: b.truncated,
        invariant_violations: b.violations,
        parent: b.parent,
        out_start,
        out_list,
    })
}

/// One step of a concrete path through the graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "lowercase")]
pub enum PathStep {
    Fire {
        time: Time,
        transition: String,
    },
    /// Time advances to `time`; `set` lists signals assigned at that instant.
    Tick {
        time: Time,
        set: Vec<(String, bool)>,
    },
}

impl ReachGraph<'_> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn out_edges(&self, s: u32) -> impl Iterator<Item = &Edge> {
        let (a, b) = (self.out_start[s as usize], self.out_start[s as usize + 1]);
        self.out_list[a as usize..b as usize]
            .iter()
            .map(|&i| &self.edges[i as usize])
    }

    /// Edges of the breadth-first tree path from the initial state to `s`.
    pub fn path_to(&self, s: u32) -> Vec<Edge> {
        let mut out = Vec::new();
        let mut cur = s;
        while let Some(e) = self.parent[cur as usize] {
            let edge = self.edges[e as usize];
            out.push(edge);
            cur = edge.src;
        }
        out.reverse();
        out
    }

    pub fn max_depth(&self) -> Time {
        self.states.iter().map(|s| s.depth).max().unwrap_or(0)
    }

    /// Renders edges as concrete steps, starting from the time of the first source.
    pub fn steps(&self, edges: &[Edge]) -> Vec<PathStep> {
        let mut time = edges
            .first()
            .map_or(0, |e| self.states[e.src as usize].depth);
        let mut out = Vec::new();
        for e in edges {
            match e.label {
                EdgeLabel::Fire(t) => out.push(PathStep::Fire {
                    time,
                    transition: self.net.transitions[t].name.clone(),
                }),
                EdgeLabel::Tick(_) => {
                    time += 1;
                    let dst = &self.states[e.dst as usize].values;
                    let src = &self.states[e.src as usize].values;
                    let set = self
                        .alphabet
                        .iter()
                        .filter(|&&id| src.get(id) != dst.get(id))
                        .map(|&id| {
                            (
                                self.net.signals.name(id).to_string(),
                                dst.get(id).as_bool().unwrap_or(false),
                            )
                        })
                        .collect();
                    out.push(PathStep::Tick { time, set });
                }
            }
        }
        out
    }

    /// Signal values of the initial state by name.
    pub fn initial_values(&self) -> Vec<(String, Value)> {
        let v = &self.states[0].values;
        (0..self.net.signals.len())
            .map(|i| (self.net.signals.name(i).to_string(), v.get(i)))
            .collect()
    }

    pub fn label(&self, l: EdgeLabel) -> String {
        match l {
            EdgeLabel::Fire(t) => format!("fire:{}", self.net.transitions[t].name),
            EdgeLabel::Tick(0) => "tick".into(),
            EdgeLabel::Tick(m) => {
                let names: Vec<&str> = self
                    .alphabet
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| m >> i & 1 == 1)
                    .map(|(_, &id)| self.net.signals.name(id))
                    .collect();
                format!("tick:~{}", names.join(",~"))
            }
        }
    }

    /// Line-oriented dump: `S <id> t=<depth> m=<marking> x=<clocks> v=<signals>` then
    /// `E <src> <dst> <label>` per edge.
    pub fn export(&self, w: &mut dyn Write) -> io::Result<()> {
        for (i, s) in self.states.iter().enumerate() {
            let clocks: Vec<String> = s
                .kernel
                .timers
                .iter()
                .enumerate()
                .filter_map(|(t, x)| x.map(|x| format!("{}={x}", self.net.transitions[t].name)))
                .collect();
            let values: Vec<String> = (0..self.net.signals.len())
                .map(|id| format!("{}={}", self.net.signals.name(id), s.values.get(id)))
                .collect();
            writeln!(
                w,
                "S {i} t={} m={} x={} v={}",
                s.depth,
                self.net.marking_digest(&s.kernel.marking),
                clocks.join(","),
                values.join(",")
            )?;
        }
        for e in &self.edges {
            writeln!(w, "E {} {} {}", e.src, e.dst, self.label(e.label))?;
        }
        Ok(())
    }

    /// Whether `t` is enabled in state `s` (guard and marking).
    pub fn is_enabled(&self, s: u32, t: TransitionId) -> bool {
        let st = &self.states[s as usize];
        enabled(self.net, &st.kernel, &st.values, t)
    }
}
