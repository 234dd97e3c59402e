//! Runtime signals: declarations, point-in-time values and piecewise-constant histories.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fixed::Fixed;
use crate::Time;

pub type SignalId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    Bool,
    Real,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Real(Fixed),
}

impl Value {
    pub fn kind(self) -> SignalKind {
        match self {
            Value::Bool(_) => SignalKind::Bool,
            Value::Real(_) => SignalKind::Real,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(b),
            Value::Real(_) => None,
        }
    }

    pub fn as_real(self) -> Option<Fixed> {
        match self {
            Value::Real(v) => Some(v),
            Value::Bool(_) => None,
        }
    }

    /// Reads a JSON scalar, accepting 0/1 for booleans.
    pub fn coerce(kind: SignalKind, raw: &serde_json::Value) -> Option<Value> {
        match (kind, raw) {
            (SignalKind::Bool, serde_json::Value::Bool(b)) => Some(Value::Bool(*b)),
            (SignalKind::Bool, serde_json::Value::Number(n)) => match n.as_u64() {
                Some(0) => Some(Value::Bool(false)),
                Some(1) => Some(Value::Bool(true)),
                _ => None,
            },
            (SignalKind::Real, serde_json::Value::Number(n)) => {
                n.as_f64().map(|v| Value::Real(Fixed::from_f64(v)))
            }
            (SignalKind::Real, serde_json::Value::String(s)) => s.parse().ok().map(Value::Real),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{}", u8::from(*b)),
            Value::Real(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalDecl {
    pub name: String,
    pub kind: SignalKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Value>,
}

impl SignalDecl {
    pub fn boolean(name: impl Into<String>, initial: bool) -> Self {
        SignalDecl {
            name: name.into(),
            kind: SignalKind::Bool,
            initial: Some(Value::Bool(initial)),
        }
    }

    pub fn real(name: impl Into<String>, initial: Fixed) -> Self {
        SignalDecl {
            name: name.into(),
            kind: SignalKind::Real,
            initial: Some(Value::Real(initial)),
        }
    }

    /// The declared initial value, falling back to `false` / `0`.
    pub fn initial_value(&self) -> Value {
        self.initial.unwrap_or(match self.kind {
            SignalKind::Bool => Value::Bool(false),
            SignalKind::Real => Value::Real(Fixed::ZERO),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignalError {
    #[error("undeclared signal `{0}`")]
    Undeclared(String),
    #[error("signal `{name}` expects a {expected:?} value")]
    TypeMismatch { name: String, expected: SignalKind },
    #[error("signal `{name}` recorded at t={time} before its last change-point t={last}")]
    OutOfOrder {
        name: String,
        time: Time,
        last: Time,
    },
    #[error("signal `{0}` declared twice")]
    Duplicate(String),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SignalCatalog {
    decls: Vec<SignalDecl>,
    index: HashMap<String, SignalId>,
}

impl SignalCatalog {
    pub fn new(decls: Vec<SignalDecl>) -> Result<Self, SignalError> {
        let mut index = HashMap::with_capacity(decls.len());
        for (i, d) in decls.iter().enumerate() {
            if index.insert(d.name.clone(), i).is_some() {
                return Err(SignalError::Duplicate(d.name.clone()));
            }
            if let Some(v) = d.initial {
                if v.kind() != d.kind {
                    return Err(SignalError::TypeMismatch {
                        name: d.name.clone(),
                        expected: d.kind,
                    });
                }
            }
        }
        Ok(SignalCatalog { decls, index })
    }

    pub fn id(&self, name: &str) -> Option<SignalId> {
        self.index.get(name).copied()
    }

    pub fn decl(&self, id: SignalId) -> &SignalDecl {
        &self.decls[id]
    }

    pub fn decls(&self) -> &[SignalDecl] {
        &self.decls
    }

    pub fn len(&self) -> usize {
        self.decls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }

    pub fn name(&self, id: SignalId) -> &str {
        &self.decls[id].name
    }

    pub fn initial_values(&self) -> SignalValues {
        SignalValues(self.decls.iter().map(SignalDecl::initial_value).collect())
    }
}

/// Values of every declared signal at one instant, indexed by [`SignalId`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignalValues(Vec<Value>);

impl SignalValues {
    pub fn new(values: Vec<Value>) -> Self {
        SignalValues(values)
    }

    pub fn get(&self, id: SignalId) -> Value {
        self.0[id]
    }

    pub fn set(&mut self, id: SignalId, v: Value) {
        self.0[id] = v;
    }

    pub fn as_slice(&self) -> &[Value] {
        &self.0
    }
}

/// Timestamped piecewise-constant histories for every declared signal.
///
/// Each history starts at time 0. Recording at the time of the last
/// change-point overwrites it; recording earlier is rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalState {
    catalog: Arc<SignalCatalog>,
    histories: Vec<Vec<(Time, Value)>>,
}

impl SignalState {
    pub fn new(catalog: Arc<SignalCatalog>) -> Self {
        let histories = catalog
            .decls()
            .iter()
            .map(|d| vec![(0, d.initial_value())])
            .collect();
        SignalState { catalog, histories }
    }

    pub fn catalog(&self) -> &Arc<SignalCatalog> {
        &self.catalog
    }

    pub fn record(&mut self, name: &str, value: Value, time: Time) -> Result<(), SignalError> {
        let id = self
            .catalog
            .id(name)
            .ok_or_else(|| SignalError::Undeclared(name.to_string()))?;
        self.record_id(id, value, time)
    }

    pub fn record_id(&mut self, id: SignalId, value: Value, time: Time) -> Result<(), SignalError> {
        let decl = self.catalog.decl(id);
        if value.kind() != decl.kind {
            return Err(SignalError::TypeMismatch {
                name: decl.name.clone(),
                expected: decl.kind,
            });
        }
        let hist = &mut self.histories[id];
        let &(last, last_value) = hist.last().expect("history starts at t=0");
        if time < last {
            return Err(SignalError::OutOfOrder {
                name: decl.name.clone(),
                time,
                last,
            });
        }
        if time == last {
            hist.last_mut().unwrap().1 = value;
            // collapse a change that undid the previous one
            if hist.len() >= 2 && hist[hist.len() - 2].1 == value {
                hist.pop();
            }
        } else if last_value != value {
            hist.push((time, value));
        }
        Ok(())
    }

    pub fn value_at(&self, name: &str, time: Time) -> Result<Value, SignalError> {
        let id = self
            .catalog
            .id(name)
            .ok_or_else(|| SignalError::Undeclared(name.to_string()))?;
        Ok(self.value_at_id(id, time))
    }

    pub fn value_at_id(&self, id: SignalId, time: Time) -> Value {
        let hist = &self.histories[id];
        let idx = hist.partition_point(|&(t, _)| t <= time);
        hist[idx.saturating_sub(1)].1
    }

    pub fn values_at(&self, time: Time) -> SignalValues {
        SignalValues(
            (0..self.histories.len())
                .map(|id| self.value_at_id(id, time))
                .collect(),
        )
    }

    /// Earliest change-point strictly after `time`, over all signals.
    pub fn next_change_after(&self, time: Time) -> Option<Time> {
        self.histories
            .iter()
            .filter_map(|h| {
                let idx = h.partition_point(|&(t, _)| t <= time);
                h.get(idx).map(|&(t, _)| t)
            })
            .min()
    }

    /// Signals whose value changes exactly at `time` (time 0 excluded).
    pub fn changes_at(&self, time: Time) -> Vec<(SignalId, Value)> {
        if time == 0 {
            return Vec::new();
        }
        self.histories
            .iter()
            .enumerate()
            .filter_map(|(id, h)| h.iter().find(|&&(t, _)| t == time).map(|&(_, v)| (id, v)))
            .collect()
    }

    pub fn history(&self, id: SignalId) -> &[(Time, Value)] {
        &self.histories[id]
    }

    /// All change-points in `(from, to]` across every signal, sorted and deduplicated.
    pub fn change_points_in(&self, from: Time, to: Time) -> Vec<Time> {
        let mut pts: Vec<Time> = self
            .histories
            .iter()
            .flat_map(|h| h.iter().map(|&(t, _)| t))
            .filter(|&t| t > from && t <= to)
            .collect();
        pts.sort_unstable();
        pts.dedup();
        pts
    }
}
