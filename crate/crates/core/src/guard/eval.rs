//! Guard evaluation.
//!
//! Two evaluators share the same semantics. [`Guard`] is the compiled,
//! index-based form the kernel runs on every event; it reads residence and
//! held-for clocks maintained incrementally by the kernel. [`eval_guard`] and
//! [`held_for`] interpret a [`GuardExpr`] directly against recorded signal and
//! marking histories; monitors use them, and tests use them as an oracle for
//! the kernel's clocks.

use std::collections::{BTreeMap, HashMap};

use crate::fixed::Fixed;
use crate::Time;

use super::expr::{CmpOp, GuardExpr};
use super::signals::{SignalCatalog, SignalId, SignalKind, SignalState, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GuardError {
    #[error("undeclared signal or predicate `{0}`")]
    UndeclaredSignal(String),
    #[error("undeclared place `{0}`")]
    UndeclaredPlace(String),
    #[error("`{0}` is a real signal and needs a threshold comparison")]
    RealAsBool(String),
    #[error("`{0}` is not a real signal and cannot be compared to a threshold")]
    NotReal(String),
    #[error("predicate `{0}` is defined in terms of itself")]
    Cycle(String),
    #[error("`timeout` / `held_for` need a marking history")]
    NeedsHistory,
}

pub type PlaceId = usize;

/// Compiled guard over signal ids, place ids and held-for slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Guard {
    Const(bool),
    Bool(SignalId),
    Cmp {
        signal: SignalId,
        op: CmpOp,
        value: Fixed,
    },
    Marked {
        place: PlaceId,
        count: u32,
    },
    Timeout {
        place: PlaceId,
        budget: Time,
    },
    Held {
        slot: usize,
        duration: Time,
    },
    Not(Box<Guard>),
    And(Vec<Guard>),
    Or(Vec<Guard>),
}

/// A held-for sub-condition whose continuous-truth age the kernel tracks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeldSlot {
    pub inner: Guard,
    pub expr: GuardExpr,
}

/// Everything a compiled guard may read.
pub trait GuardEnv {
    fn value(&self, id: SignalId) -> Value;
    fn tokens(&self, place: PlaceId) -> u32;
    /// Ticks since `place` became marked, if it is marked.
    fn residence(&self, place: PlaceId) -> Option<Time>;
    /// Ticks since the held slot's condition became true, if it is true.
    fn held(&self, slot: usize) -> Option<Time>;
}

impl Guard {
    pub fn eval(&self, env: &dyn GuardEnv) -> bool {
        match self {
            Guard::Const(b) => *b,
            Guard::Bool(id) => env.value(*id).as_bool().unwrap_or(false),
            Guard::Cmp { signal, op, value } => env
                .value(*signal)
                .as_real()
                .is_some_and(|v| op.holds(v, *value)),
            Guard::Marked { place, count } => env.tokens(*place) >= *count,
            Guard::Timeout { place, budget } => env.residence(*place).is_some_and(|a| a >= *budget),
            Guard::Held { slot, duration } => env.held(*slot).is_some_and(|a| a >= *duration),
            Guard::Not(g) => !g.eval(env),
            Guard::And(v) => v.iter().all(|g| g.eval(env)),
            Guard::Or(v) => v.iter().any(|g| g.eval(env)),
        }
    }

    pub fn walk(&self, f: &mut dyn FnMut(&Guard)) {
        f(self);
        match self {
            Guard::Not(g) => g.walk(f),
            Guard::And(v) | Guard::Or(v) => v.iter().for_each(|g| g.walk(f)),
            _ => {}
        }
    }

    pub fn signals(&self) -> Vec<SignalId> {
        let mut out = Vec::new();
        self.walk(&mut |g| match g {
            Guard::Bool(id) | Guard::Cmp { signal: id, .. } => out.push(*id),
            _ => {}
        });
        out
    }
}

/// Resolves names and lowers [`GuardExpr`]s to [`Guard`]s, collecting held slots.
pub struct GuardCompiler<'a> {
    signals: &'a SignalCatalog,
    places: &'a HashMap<String, PlaceId>,
    predicates: &'a BTreeMap<String, GuardExpr>,
    slots: Vec<HeldSlot>,
}

impl<'a> GuardCompiler<'a> {
    pub fn new(
        signals: &'a SignalCatalog,
        places: &'a HashMap<String, PlaceId>,
        predicates: &'a BTreeMap<String, GuardExpr>,
    ) -> Self {
        GuardCompiler {
            signals,
            places,
            predicates,
            slots: Vec::new(),
        }
    }

    pub fn compile(&mut self, e: &GuardExpr) -> Result<Guard, GuardError> {
        self.go(e, &mut Vec::new())
    }

    pub fn into_slots(self) -> Vec<HeldSlot> {
        self.slots
    }

    fn place(&self, name: &str) -> Result<PlaceId, GuardError> {
        self.places
            .get(name)
            .copied()
            .ok_or_else(|| GuardError::UndeclaredPlace(name.to_string()))
    }

    fn go(&mut self, e: &GuardExpr, stack: &mut Vec<String>) -> Result<Guard, GuardError> {
        Ok(match e {
            GuardExpr::Const(b) => Guard::Const(*b),
            GuardExpr::Var(name) => {
                if let Some(id) = self.signals.id(name) {
                    if self.signals.decl(id).kind != SignalKind::Bool {
                        return Err(GuardError::RealAsBool(name.clone()));
                    }
                    Guard::Bool(id)
                } else if let Some(def) = self.predicates.get(name) {
                    if stack.contains(name) {
                        return Err(GuardError::Cycle(name.clone()));
                    }
                    stack.push(name.clone());
                    let g = self.go(def, stack);
                    stack.pop();
                    g?
                } else {
                    return Err(GuardError::UndeclaredSignal(name.clone()));
                }
            }
            GuardExpr::Cmp { signal, op, value } => {
                let id = self
                    .signals
                    .id(signal)
                    .ok_or_else(|| GuardError::UndeclaredSignal(signal.clone()))?;
                if self.signals.decl(id).kind != SignalKind::Real {
                    return Err(GuardError::NotReal(signal.clone()));
                }
                Guard::Cmp {
                    signal: id,
                    op: *op,
                    value: *value,
                }
            }
            GuardExpr::Marked { place, count } => Guard::Marked {
                place: self.place(place)?,
                count: *count,
            },
            GuardExpr::Timeout { place, budget } => Guard::Timeout {
                place: self.place(place)?,
                budget: *budget,
            },
            GuardExpr::Not(inner) => Guard::Not(Box::new(self.go(inner, stack)?)),
            GuardExpr::And(v) => Guard::And(
                v.iter()
                    .map(|x| self.go(x, stack))
                    .collect::<Result<_, _>>()?,
            ),
            GuardExpr::Or(v) => Guard::Or(
                v.iter()
                    .map(|x| self.go(x, stack))
                    .collect::<Result<_, _>>()?,
            ),
            GuardExpr::HeldFor { expr, duration } => {
                let inner = self.go(expr, stack)?;
                let slot = match self.slots.iter().position(|s| s.inner == inner) {
                    Some(i) => i,
                    None => {
                        self.slots.push(HeldSlot {
                            inner,
                            expr: expr.inline(self.predicates),
                        });
                        self.slots.len() - 1
                    }
                };
                Guard::Held {
                    slot,
                    duration: *duration,
                }
            }
        })
    }
}

/// Piecewise-constant marking history keyed by place name.
///
/// Several snapshots may share a timestamp (same-instant firings); the last
/// one is the settled marking at that instant.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkingHistory {
    places: Vec<String>,
    index: HashMap<String, PlaceId>,
    points: Vec<(Time, Vec<u32>)>,
}

impl MarkingHistory {
    pub fn new(places: Vec<String>, initial: Vec<u32>) -> Self {
        let index = places
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        MarkingHistory {
            places,
            index,
            points: vec![(0, initial)],
        }
    }

    pub fn push(&mut self, time: Time, marking: Vec<u32>) {
        debug_assert!(self.points.last().is_none_or(|&(t, _)| t <= time));
        self.points.push((time, marking));
    }

    pub fn places(&self) -> &[String] {
        &self.places
    }

    pub fn place_id(&self, name: &str) -> Option<PlaceId> {
        self.index.get(name).copied()
    }

    pub fn points(&self) -> &[(Time, Vec<u32>)] {
        &self.points
    }

    /// Settled marking at `time`.
    pub fn at(&self, time: Time) -> &[u32] {
        let idx = self.points.partition_point(|&(t, _)| t <= time);
        &self.points[idx.saturating_sub(1)].1
    }

    /// Ticks `place` has been continuously marked at `time` (settled view).
    pub fn residence(&self, place: PlaceId, time: Time) -> Option<Time> {
        let idx = self.points.partition_point(|&(t, _)| t <= time);
        let mut i = idx.checked_sub(1)?;
        if self.points[i].1[place] == 0 {
            return None;
        }
        // walk back while marked; intermediate same-instant unmarkings count as exits
        while i > 0 && self.points[i - 1].1[place] > 0 {
            i -= 1;
        }
        let since = if i == 0 { 0 } else { self.points[i].0 };
        Some(time - since)
    }

    pub fn change_points_in(&self, from: Time, to: Time) -> Vec<Time> {
        let mut v: Vec<Time> = self
            .points
            .iter()
            .map(|&(t, _)| t)
            .filter(|&t| t > from && t <= to)
            .collect();
        v.dedup();
        v
    }
}

/// Inputs for history-based guard interpretation at one instant.
pub struct EvalContext<'a> {
    pub signals: &'a SignalState,
    pub predicates: &'a BTreeMap<String, GuardExpr>,
    /// Marking the marking atoms read at `now`.
    pub marking: &'a [u32],
    /// Place names and history, required by `timeout` and `held_for`.
    pub history: Option<&'a MarkingHistory>,
    pub places: &'a HashMap<String, PlaceId>,
    pub now: Time,
}

/// Evaluates `expr` at `ctx.now`.
pub fn eval_guard(expr: &GuardExpr, ctx: &EvalContext<'_>) -> Result<bool, GuardError> {
    eval_at(expr, ctx, &mut Vec::new())
}

fn eval_at(
    e: &GuardExpr,
    ctx: &EvalContext<'_>,
    stack: &mut Vec<String>,
) -> Result<bool, GuardError> {
    let cat = ctx.signals.catalog();
    Ok(match e {
        GuardExpr::Const(b) => *b,
        GuardExpr::Var(name) => {
            if let Some(id) = cat.id(name) {
                match ctx.signals.value_at_id(id, ctx.now) {
                    Value::Bool(b) => b,
                    Value::Real(_) => return Err(GuardError::RealAsBool(name.clone())),
                }
            } else if let Some(def) = ctx.predicates.get(name) {
                if stack.contains(name) {
                    return Err(GuardError::Cycle(name.clone()));
                }
                stack.push(name.clone());
                let r = eval_at(def, ctx, stack);
                stack.pop();
                r?
            } else {
                return Err(GuardError::UndeclaredSignal(name.clone()));
            }
        }
        GuardExpr::Cmp { signal, op, value } => {
            let v = ctx
                .signals
                .value_at(signal, ctx.now)
                .map_err(|_| GuardError::UndeclaredSignal(signal.clone()))?;
            match v {
                Value::Real(x) => op.holds(x, *value),
                Value::Bool(_) => return Err(GuardError::NotReal(signal.clone())),
            }
        }
        GuardExpr::Marked { place, count } => {
            let p = *ctx
                .places
                .get(place)
                .ok_or_else(|| GuardError::UndeclaredPlace(place.clone()))?;
            ctx.marking[p] >= *count
        }
        GuardExpr::Timeout { place, budget } => {
            let p = *ctx
                .places
                .get(place)
                .ok_or_else(|| GuardError::UndeclaredPlace(place.clone()))?;
            let hist = ctx.history.ok_or(GuardError::NeedsHistory)?;
            if ctx.marking[p] == 0 {
                false
            } else {
                hist.residence(p, ctx.now).is_some_and(|a| a >= *budget)
            }
        }
        GuardExpr::Not(inner) => !eval_at(inner, ctx, stack)?,
        GuardExpr::And(v) => {
            let mut all = true;
            for x in v {
                all &= eval_at(x, ctx, stack)?;
            }
            all
        }
        GuardExpr::Or(v) => {
            let mut any = false;
            for x in v {
                any |= eval_at(x, ctx, stack)?;
            }
            any
        }
        GuardExpr::HeldFor { expr, duration } => {
            let hist = ctx.history.ok_or(GuardError::NeedsHistory)?;
            held_for_inner(expr, *duration, ctx, hist, stack)?
        }
    })
}

/// True iff `expr` has held at every instant of `[now - duration, now]`.
///
/// Windows reaching before time 0 evaluate false. The expression is checked at
/// the window start and at every signal or marking change-point inside it, and
/// at the instants where a `timeout` or nested `held_for` atom may flip.
pub fn held_for(
    expr: &GuardExpr,
    duration: Time,
    ctx: &EvalContext<'_>,
) -> Result<bool, GuardError> {
    let hist = ctx.history.ok_or(GuardError::NeedsHistory)?;
    held_for_inner(expr, duration, ctx, hist, &mut Vec::new())
}

fn held_for_inner(
    expr: &GuardExpr,
    duration: Time,
    ctx: &EvalContext<'_>,
    hist: &MarkingHistory,
    stack: &mut Vec<String>,
) -> Result<bool, GuardError> {
    if ctx.now < duration {
        return Ok(false);
    }
    let start = ctx.now - duration;
    let full = expr.inline(ctx.predicates);
    let mut budgets = Vec::new();
    full.walk(&mut |e| match e {
        GuardExpr::Timeout { budget, .. } => budgets.push(*budget),
        GuardExpr::HeldFor { duration, .. } => budgets.push(*duration),
        _ => {}
    });
    let mut base: Vec<Time> = vec![start];
    base.extend(ctx.signals.change_points_in(start, ctx.now));
    base.extend(hist.change_points_in(start, ctx.now));
    // clock atoms can flip between change-points
    let horizon_back = budgets.iter().copied().max().unwrap_or(0);
    let mut anchors = ctx
        .signals
        .change_points_in(start.saturating_sub(horizon_back + 1), ctx.now);
    anchors.extend(hist.change_points_in(start.saturating_sub(horizon_back + 1), ctx.now));
    anchors.push(0);
    let mut candidates = base;
    for a in anchors {
        for b in &budgets {
            let t = a + b;
            if t >= start && t <= ctx.now {
                candidates.push(t);
            }
        }
    }
    candidates.sort_unstable();
    candidates.dedup();
    for t in candidates {
        let sub = EvalContext {
            signals: ctx.signals,
            predicates: ctx.predicates,
            marking: hist.at(t),
            history: Some(hist),
            places: ctx.places,
            now: t,
        };
        if !eval_at(&full, &sub, stack)? {
            return Ok(false);
        }
    }
    Ok(true)
}
