use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::guard::{Guard, GuardCompiler, GuardExpr, HeldSlot, PlaceId, SignalCatalog};
use crate::smart::SmartRoles;
use crate::Time;

use super::{validate_net, Bound, Net, Priority, Role, Timing};

pub type TransitionId = usize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetError {
    #[error("cannot read net: {0}")]
    Parse(String),
    #[error("invalid net: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("refinement failed: {0}")]
    Refinement(String),
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
}

#[derive(Clone, Debug)]
pub struct CompiledTransition {
    pub name: String,
    pub expr: GuardExpr,
    pub guard: Guard,
    pub lo: Time,
    pub hi: Option<Time>,
    pub strong: bool,
    pub role: Role,
    pub priority: Priority,
    pub inputs: Vec<(PlaceId, u32)>,
    pub outputs: Vec<(PlaceId, u32)>,
}

impl CompiledTransition {
    /// Marking delta `w(t,p) - w(p,t)` for place `p`.
    pub fn delta(&self, p: PlaceId) -> i64 {
        let out: i64 = self
            .outputs
            .iter()
            .filter(|&&(q, _)| q == p)
            .map(|&(_, w)| w as i64)
            .sum();
        let inp: i64 = self
            .inputs
            .iter()
            .filter(|&&(q, _)| q == p)
            .map(|&(_, w)| w as i64)
            .sum();
        out - inp
    }
}

/// Index-based form of a validated, flattened net; what the kernel executes.
#[derive(Clone, Debug)]
pub struct CompiledNet {
    pub desc: Arc<Net>,
    pub places: Vec<String>,
    pub transitions: Vec<CompiledTransition>,
    pub signals: Arc<SignalCatalog>,
    pub predicates: BTreeMap<String, GuardExpr>,
    pub held_slots: Vec<HeldSlot>,
    pub initial_marking: Vec<u32>,
    /// Distinct `timeout` budgets per place.
    pub timeout_budgets: Vec<Vec<Time>>,
    /// Distinct `held_for` durations per slot.
    pub held_durations: Vec<Vec<Time>>,
    place_index: HashMap<String, PlaceId>,
    transition_index: HashMap<String, TransitionId>,
}

impl CompiledNet {
    pub fn new(net: &Net) -> Result<CompiledNet, NetError> {
        let flat = net.flatten()?;
        let report = validate_net(&flat);
        if !report.is_ok() {
            return Err(NetError::Invalid(report.errors));
        }
        let signals = Arc::new(
            SignalCatalog::new(flat.signals.clone())
                .map_err(|e| NetError::Invalid(vec![e.to_string()]))?,
        );
        let place_index: HashMap<String, PlaceId> = flat
            .places
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        let mut compiler = GuardCompiler::new(&signals, &place_index, &flat.predicates);
        let mut transitions = Vec::with_capacity(flat.transitions.len());
        for t in &flat.transitions {
            let guard = compiler
                .compile(&t.guard)
                .map_err(|e| NetError::Invalid(vec![format!("guard of `{}`: {e}", t.id)]))?;
            let inputs = flat
                .inputs(&t.id)
                .into_iter()
                .map(|(p, w)| (place_index[p], w))
                .collect();
            let outputs = flat
                .outputs(&t.id)
                .into_iter()
                .map(|(p, w)| (place_index[p], w))
                .collect();
            transitions.push(CompiledTransition {
                name: t.id.clone(),
                expr: t.guard.clone(),
                guard,
                lo: t.interval.lo,
                hi: match t.interval.hi {
                    Bound::Finite(v) => Some(v),
                    Bound::Inf => None,
                },
                strong: t.timing == Timing::Strong,
                role: t.role,
                priority: t.effective_priority(),
                inputs,
                outputs,
            });
        }
        let held_slots = compiler.into_slots();

        let mut timeout_budgets = vec![Vec::new(); flat.places.len()];
        let mut held_durations = vec![Vec::new(); held_slots.len()];
        let mut collect = |g: &Guard| {
            g.walk(&mut |a| match a {
                Guard::Timeout { place, budget } => timeout_budgets[*place].push(*budget),
                Guard::Held { slot, duration } => held_durations[*slot].push(*duration),
                _ => {}
            })
        };
        for t in &transitions {
            collect(&t.guard);
        }
        for s in &held_slots {
            collect(&s.inner);
        }
        for v in timeout_budgets.iter_mut().chain(held_durations.iter_mut()) {
            v.sort_unstable();
            v.dedup();
        }

        let initial_marking = flat
            .places
            .iter()
            .map(|p| flat.initial_marking.get(p).copied().unwrap_or(0))
            .collect();
        let transition_index = transitions
            .iter()
            .enumerate()
            .map(|(i, t)| (t.name.clone(), i))
            .collect();
        Ok(CompiledNet {
            places: flat.places.clone(),
            predicates: flat.predicates.clone(),
            desc: Arc::new(flat),
            transitions,
            signals,
            held_slots,
            initial_marking,
            timeout_budgets,
            held_durations,
            place_index,
            transition_index,
        })
    }

    pub fn place_id(&self, name: &str) -> Option<PlaceId> {
        self.place_index.get(name).copied()
    }

    pub fn transition_id(&self, name: &str) -> Option<TransitionId> {
        self.transition_index.get(name).copied()
    }

    pub fn require_transition(&self, name: &str) -> Result<TransitionId, NetError> {
        self.transition_id(name)
            .ok_or_else(|| NetError::UnknownTransition(name.to_string()))
    }

    pub fn place_index(&self) -> &HashMap<String, PlaceId> {
        &self.place_index
    }

    pub fn smart(&self) -> Option<&SmartRoles> {
        self.desc.smart.as_ref()
    }

    /// Tie-break key: priority class, then transition name.
    pub fn order_key(&self, t: TransitionId) -> (Priority, &str) {
        (
            self.transitions[t].priority,
            self.transitions[t].name.as_str(),
        )
    }

    pub fn marking_by_name(&self, marking: &[u32]) -> BTreeMap<String, u32> {
        self.places
            .iter()
            .zip(marking)
            .filter(|(_, &n)| n > 0)
            .map(|(p, &n)| (p.clone(), n))
            .collect()
    }

    /// Compact marking rendering, e.g. `P_S:1,P_claim:1`.
    pub fn marking_digest(&self, marking: &[u32]) -> String {
        let mut parts: Vec<String> = self
            .places
            .iter()
            .zip(marking)
            .filter(|(_, &n)| n > 0)
            .map(|(p, n)| format!("{p}:{n}"))
            .collect();
        parts.sort();
        parts.join(",")
    }
}
