//! Enabling, firing, clocks and deadline enforcement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::guard::{GuardEnv, PlaceId, SignalId, SignalState, SignalValues, Value};
use crate::net::{CompiledNet, CompiledTransition, NetError, Role, TransitionId};
use crate::Time;

pub const DEFAULT_ZENO_LIMIT: u32 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KernelError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("transition `{0}` is not enabled")]
    NotEnabled(String),
    #[error("transition `{name}` fired at clock {clock} before its earliest time {lo}")]
    TooEarly { name: String, clock: Time, lo: Time },
    #[error("transition `{name}` fired at clock {clock} after its latest time {hi}")]
    DeadlinePassed { name: String, clock: Time, hi: Time },
    #[error("Zeno behaviour: {limit} events at time {time}")]
    Zeno { time: Time, limit: u32 },
    #[error(
        "strong transition `{name}` overran its deadline at time {time} (kernel invariant breach)"
    )]
    DeadlineViolation { name: String, time: Time },
}

/// Dynamic state: marking, global time and all clocks.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KernelState {
    pub now: Time,
    pub marking: Vec<u32>,
    /// Enabling clock per transition; `None` while disabled.
    pub timers: Vec<Option<Time>>,
    /// Clock value at which the policy plans to fire each enabled transition.
    pub scheduled: Vec<Option<Time>>,
    /// Continuous-marking age per place; `None` while empty.
    pub residence: Vec<Option<Time>>,
    /// Continuous-truth age per held-for slot; `None` while false.
    pub held: Vec<Option<Time>>,
    /// Events already fired at `now`.
    pub same_instant: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiringEvent {
    pub time: Time,
    pub transition: TransitionId,
    pub pre: Vec<u32>,
    pub post: Vec<u32>,
}

struct Env<'a> {
    state: &'a KernelState,
    values: &'a SignalValues,
}

impl GuardEnv for Env<'_> {
    fn value(&self, id: SignalId) -> Value {
        self.values.get(id)
    }
    fn tokens(&self, place: PlaceId) -> u32 {
        self.state.marking[place]
    }
    fn residence(&self, place: PlaceId) -> Option<Time> {
        self.state.residence[place]
    }
    fn held(&self, slot: usize) -> Option<Time> {
        self.state.held[slot]
    }
}

pub fn struct_enabled(net: &CompiledNet, marking: &[u32], t: TransitionId) -> bool {
    net.transitions[t]
        .inputs
        .iter()
        .all(|&(p, w)| marking[p] >= w)
}

/// Structural enabling plus guard truth at the state's instant.
pub fn enabled(
    net: &CompiledNet,
    state: &KernelState,
    values: &SignalValues,
    t: TransitionId,
) -> bool {
    struct_enabled(net, &state.marking, t) && net.transitions[t].guard.eval(&Env { state, values })
}

/// Evaluates an arbitrary compiled guard against the state.
pub fn eval_in_state(
    guard: &crate::guard::Guard,
    state: &KernelState,
    values: &SignalValues,
) -> bool {
    guard.eval(&Env { state, values })
}

impl KernelState {
    pub fn initial(net: &CompiledNet, values: &SignalValues) -> KernelState {
        let mut s = KernelState {
            now: 0,
            marking: net.initial_marking.clone(),
            timers: vec![None; net.transitions.len()],
            scheduled: vec![None; net.transitions.len()],
            residence: vec![None; net.places.len()],
            held: vec![None; net.held_slots.len()],
            same_instant: 0,
        };
        s.refresh(net, values);
        s
    }

    /// Recomputes residence, held and enabling clocks after a discrete change.
    pub fn refresh(&mut self, net: &CompiledNet, values: &SignalValues) {
        for (p, r) in self.residence.iter_mut().enumerate() {
            if self.marking[p] == 0 {
                *r = None;
            } else if r.is_none() {
                *r = Some(0);
            }
        }
        for i in 0..net.held_slots.len() {
            let holds = net.held_slots[i].inner.eval(&Env {
                state: self,
                values,
            });
            if !holds {
                self.held[i] = None;
            } else if self.held[i].is_none() {
                self.held[i] = Some(0);
            }
        }
        for t in 0..net.transitions.len() {
            if enabled(net, self, values, t) {
                if self.timers[t].is_none() {
                    self.timers[t] = Some(0);
                    self.scheduled[t] = None;
                }
            } else {
                self.timers[t] = None;
                self.scheduled[t] = None;
            }
        }
    }

    /// Lets `d` ticks pass with no discrete change.
    pub fn elapse(&mut self, d: Time) {
        if d == 0 {
            return;
        }
        self.now += d;
        self.same_instant = 0;
        for c in self
            .timers
            .iter_mut()
            .chain(self.residence.iter_mut())
            .chain(self.held.iter_mut())
            .flatten()
        {
            *c += d;
        }
    }

    pub fn is_enabled(&self, t: TransitionId) -> bool {
        self.timers[t].is_some()
    }
}

/// Fires `t` at the current instant and refreshes clocks.
pub fn fire(
    net: &CompiledNet,
    state: &mut KernelState,
    values: &SignalValues,
    t: TransitionId,
) -> Result<FiringEvent, KernelError> {
    let tr = &net.transitions[t];
    if !enabled(net, state, values, t) {
        return Err(KernelError::NotEnabled(tr.name.clone()));
    }
    let clock = state.timers[t].unwrap_or(0);
    if clock < tr.lo {
        return Err(KernelError::TooEarly {
            name: tr.name.clone(),
            clock,
            lo: tr.lo,
        });
    }
    if let Some(hi) = tr.hi {
        if clock > hi {
            return Err(KernelError::DeadlinePassed {
                name: tr.name.clone(),
                clock,
                hi,
            });
        }
    }
    let pre = state.marking.clone();
    for &(p, w) in &tr.inputs {
        state.marking[p] -= w;
    }
    for &(p, w) in &tr.outputs {
        state.marking[p] += w;
    }
    let post = state.marking.clone();
    debug_assert!((0..pre.len()).all(|p| post[p] as i64 == pre[p] as i64 + tr.delta(p)));
    state.timers[t] = None;
    state.scheduled[t] = None;
    state.same_instant += 1;
    state.refresh(net, values);
    Ok(FiringEvent {
        time: state.now,
        transition: t,
        pre,
        post,
    })
}

/// Earliest absolute time at which an enabled strong transition reaches its
/// latest firing time, with every transition forced at that instant.
pub fn next_forced_deadline(
    net: &CompiledNet,
    state: &KernelState,
) -> Option<(Time, Vec<TransitionId>)> {
    let mut best: Option<(Time, Vec<TransitionId>)> = None;
    for (t, tr) in net.transitions.iter().enumerate() {
        let (Some(x), true, Some(hi)) = (state.timers[t], tr.strong, tr.hi) else {
            continue;
        };
        let at = state.now + hi.saturating_sub(x);
        match &mut best {
            Some((b, set)) if *b == at => set.push(t),
            Some((b, _)) if *b < at => {}
            _ => best = Some((at, vec![t])),
        }
    }
    best
}

/// Chooses the clock value at which a newly enabled transition fires.
pub trait FiringPolicy {
    fn choose(&mut self, t: &CompiledTransition) -> Time;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    #[default]
    Earliest,
    Latest,
    Random,
}

impl std::str::FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "earliest" => Ok(PolicyKind::Earliest),
            "latest" => Ok(PolicyKind::Latest),
            "random" => Ok(PolicyKind::Random),
            other => Err(format!(
                "unknown policy `{other}` (expected earliest, latest or random)"
            )),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PolicyKind::Earliest => "earliest",
            PolicyKind::Latest => "latest",
            PolicyKind::Random => "random",
        })
    }
}

pub struct Earliest;

impl FiringPolicy for Earliest {
    fn choose(&mut self, t: &CompiledTransition) -> Time {
        t.lo
    }
}

/// Fires at the latest time; unbounded intervals fall back to the earliest.
pub struct Latest;

impl FiringPolicy for Latest {
    fn choose(&mut self, t: &CompiledTransition) -> Time {
        t.hi.unwrap_or(t.lo)
    }
}

/// Uniform choice in `[lo, hi]`, or `[lo, lo + spread]` when unbounded.
pub struct SeededRandom {
    rng: ChaCha8Rng,
    spread: Time,
}

impl SeededRandom {
    pub const DEFAULT_SPREAD: Time = 5;

    pub fn new(seed: u64) -> Self {
        SeededRandom {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spread: Self::DEFAULT_SPREAD,
        }
    }
}

impl FiringPolicy for SeededRandom {
    fn choose(&mut self, t: &CompiledTransition) -> Time {
        let hi = t.hi.unwrap_or(t.lo + self.spread);
        self.rng.gen_range(t.lo..=hi)
    }
}

pub fn make_policy(kind: PolicyKind, seed: u64) -> Box<dyn FiringPolicy> {
    match kind {
        PolicyKind::Earliest => Box::new(Earliest),
        PolicyKind::Latest => Box::new(Latest),
        PolicyKind::Random => Box::new(SeededRandom::new(seed)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdvanceOptions {
    pub horizon: Time,
    pub zeno_limit: u32,
    /// Extra instant the caller wants to regain control at.
    pub wakeup: Option<Time>,
}

impl AdvanceOptions {
    pub fn new(horizon: Time) -> Self {
        AdvanceOptions {
            horizon,
            zeno_limit: DEFAULT_ZENO_LIMIT,
            wakeup: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    Fired(FiringEvent),
    Advanced {
        from: Time,
        to: Time,
    },
    /// Nothing is due and time cannot advance further within the horizon.
    Idle,
}

/// Transitions whose planned firing time has arrived (or that are forced),
/// best tie-break first.
pub fn due_transitions(net: &CompiledNet, state: &KernelState) -> Vec<TransitionId> {
    let mut due: Vec<TransitionId> = (0..net.transitions.len())
        .filter(|&t| {
            let Some(x) = state.timers[t] else {
                return false;
            };
            let tr = &net.transitions[t];
            let forced = tr.strong && tr.hi.is_some_and(|hi| x >= hi);
            forced || state.scheduled[t].is_some_and(|s| x >= s)
        })
        .collect();
    due.sort_by(|&a, &b| net.order_key(a).cmp(&net.order_key(b)));
    due
}

/// Assigns a planned firing clock to every enabled, unplanned transition.
/// Weak output transitions are demand-driven and never planned.
pub fn schedule(net: &CompiledNet, state: &mut KernelState, policy: &mut dyn FiringPolicy) {
    for (t, tr) in net.transitions.iter().enumerate() {
        if state.timers[t].is_some()
            && state.scheduled[t].is_none()
            && !(tr.role == Role::Output && !tr.strong)
        {
            state.scheduled[t] = Some(policy.choose(tr));
        }
    }
}

/// Next instant after `now` at which anything can change.
pub fn next_event_time(
    net: &CompiledNet,
    state: &KernelState,
    signals: &SignalState,
) -> Option<Time> {
    let now = state.now;
    let mut best: Option<Time> = signals.next_change_after(now);
    let mut consider = |t: Time| {
        if t > now && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    for (t, tr) in net.transitions.iter().enumerate() {
        if let Some(x) = state.timers[t] {
            if let Some(s) = state.scheduled[t] {
                consider(now + s.saturating_sub(x));
            }
            if let (true, Some(hi)) = (tr.strong, tr.hi) {
                consider(now + hi.saturating_sub(x));
            }
        }
    }
    for (p, budgets) in net.timeout_budgets.iter().enumerate() {
        if let Some(r) = state.residence[p] {
            for &b in budgets {
                if b > r {
                    consider(now + (b - r));
                }
            }
        }
    }
    for (i, durations) in net.held_durations.iter().enumerate() {
        if let Some(a) = state.held[i] {
            for &d in durations {
                if d > a {
                    consider(now + (d - a));
                }
            }
        }
    }
    best
}

/// Performs one kernel step: fire the best due transition, or advance time to
/// the next instant where something can happen.
pub fn advance_to_next_event(
    net: &CompiledNet,
    state: &mut KernelState,
    signals: &SignalState,
    policy: &mut dyn FiringPolicy,
    opts: &AdvanceOptions,
) -> Result<Step, KernelError> {
    let values = signals.values_at(state.now);
    state.refresh(net, &values);
    for (t, tr) in net.transitions.iter().enumerate() {
        if let (Some(x), true, Some(hi)) = (state.timers[t], tr.strong, tr.hi) {
            if x > hi {
                return Err(KernelError::DeadlineViolation {
                    name: tr.name.clone(),
                    time: state.now,
                });
            }
        }
    }
    schedule(net, state, policy);
    if let Some(&t) = due_transitions(net, state).first() {
        if state.same_instant + 1 >= opts.zeno_limit {
            return Err(KernelError::Zeno {
                time: state.now,
                limit: opts.zeno_limit,
            });
        }
        return Ok(Step::Fired(fire(net, state, &values, t)?));
    }
    let mut next = next_event_time(net, state, signals);
    if let Some(w) = opts.wakeup {
        if w > state.now && next.is_none_or(|n| w < n) {
            next = Some(w);
        }
    }
    let target = match next {
        Some(n) if n <= opts.horizon => n,
        _ if state.now < opts.horizon => opts.horizon,
        _ => return Ok(Step::Idle),
    };
    let from = state.now;
    state.elapse(target - from);
    state.refresh(net, &signals.values_at(target));
    Ok(Step::Advanced { from, to: target })
}
