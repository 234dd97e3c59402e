//! Net descriptions: the serializable structure of a timed guarded Petri net.

mod compiled;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::guard::{parse_guard, GuardExpr, SignalDecl};
use crate::hierarchy::SubnetDesc;
use crate::smart::SmartRoles;
use crate::Time;

pub use compiled::{CompiledNet, CompiledTransition, NetError, TransitionId};
pub use validate::{validate_net, ValidationReport};

/// Latest firing time of an interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bound {
    Finite(Time),
    Inf,
}

impl Bound {
    pub fn finite(self) -> Option<Time> {
        match self {
            Bound::Finite(t) => Some(t),
            Bound::Inf => None,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(t) => write!(f, "{t}"),
            Bound::Inf => f.write_str("inf"),
        }
    }
}

/// Firing interval `[lo, hi]` measured on the transition's enabling clock.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lo: Time,
    pub hi: Bound,
}

impl Interval {
    pub const fn new(lo: Time, hi: Time) -> Self {
        Interval {
            lo,
            hi: Bound::Finite(hi),
        }
    }

    pub const fn unbounded(lo: Time) -> Self {
        Interval { lo, hi: Bound::Inf }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeTuple;
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&self.lo)?;
        match self.hi {
            Bound::Finite(v) => t.serialize_element(&v)?,
            Bound::Inf => t.serialize_element("inf")?,
        }
        t.end()
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Hi {
            Num(Time),
            Str(String),
        }
        let (lo, hi): (Time, Hi) = Deserialize::deserialize(d)?;
        let hi = match hi {
            Hi::Num(v) => Bound::Finite(v),
            Hi::Str(s) if s == "inf" || s == "∞" => Bound::Inf,
            Hi::Str(s) => {
                return Err(D::Error::custom(format!(
                    "expected integer or \"inf\", got `{s}`"
                )))
            }
        };
        Ok(Interval { lo, hi })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Timing {
    Weak,
    Strong,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Output,
    ModeSwitch,
    Internal,
}

/// Tie-break class for transitions due at the same instant; earlier variants win.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Priority {
    Governance,
    Escalation,
    #[serde(alias = "recovery-return")]
    Recovery,
    Internal,
    Output,
}

impl Priority {
    pub fn default_for(role: Role) -> Priority {
        match role {
            Role::Output => Priority::Output,
            Role::ModeSwitch => Priority::Escalation,
            Role::Internal => Priority::Internal,
        }
    }
}

fn true_guard() -> GuardExpr {
    GuardExpr::Const(true)
}

fn is_true(g: &GuardExpr) -> bool {
    *g == GuardExpr::Const(true)
}

pub(crate) mod guard_string {
    use super::*;

    pub fn serialize<S: Serializer>(g: &GuardExpr, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&g.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<GuardExpr, D::Error> {
        let s = String::deserialize(d)?;
        parse_guard(&s).map_err(D::Error::custom)
    }
}

pub(crate) mod guard_map {
    use super::*;

    pub fn serialize<S: Serializer>(
        m: &BTreeMap<String, GuardExpr>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let strings: BTreeMap<&String, String> =
            m.iter().map(|(k, v)| (k, v.to_string())).collect();
        strings.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<String, GuardExpr>, D::Error> {
        let raw = BTreeMap::<String, String>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                let e = parse_guard(&v)
                    .map_err(|e| D::Error::custom(format!("predicate `{k}`: {e}")))?;
                Ok((k, e))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionDesc {
    pub id: String,
    #[serde(
        default = "true_guard",
        with = "guard_string",
        skip_serializing_if = "is_true"
    )]
    pub guard: GuardExpr,
    pub interval: Interval,
    pub timing: Timing,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<Priority>,
}

impl TransitionDesc {
    pub fn new(
        id: impl Into<String>,
        guard: GuardExpr,
        interval: Interval,
        timing: Timing,
        role: Role,
    ) -> Self {
        TransitionDesc {
            id: id.into(),
            guard,
            interval,
            timing,
            role,
            priority: None,
        }
    }

    pub fn with_priority(mut self, p: Priority) -> Self {
        self.priority = Some(p);
        self
    }

    pub fn effective_priority(&self) -> Priority {
        self.priority
            .unwrap_or_else(|| Priority::default_for(self.role))
    }
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcDesc {
    pub from: String,
    pub to: String,
    #[serde(default = "one")]
    pub weight: u32,
}

impl ArcDesc {
    pub fn new(from: impl Into<String>, to: impl Into<String>, weight: u32) -> Self {
        ArcDesc {
            from: from.into(),
            to: to.into(),
            weight,
        }
    }
}

/// A net as written in a net description file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Net {
    pub places: Vec<String>,
    pub transitions: Vec<TransitionDesc>,
    pub arcs: Vec<ArcDesc>,
    #[serde(default)]
    pub initial_marking: BTreeMap<String, u32>,
    #[serde(default)]
    pub refinable: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub signals: Vec<SignalDecl>,
    #[serde(
        default,
        with = "guard_map",
        skip_serializing_if = "BTreeMap::is_empty"
    )]
    pub predicates: BTreeMap<String, GuardExpr>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subnets: Vec<SubnetDesc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smart: Option<SmartRoles>,
}

impl Net {
    pub fn from_json(text: &str) -> Result<Net, NetError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| NetError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("net serializes")
    }

    pub fn transition(&self, id: &str) -> Option<&TransitionDesc> {
        self.transitions.iter().find(|t| t.id == id)
    }

    pub fn transition_mut(&mut self, id: &str) -> Option<&mut TransitionDesc> {
        self.transitions.iter_mut().find(|t| t.id == id)
    }

    pub fn has_place(&self, p: &str) -> bool {
        self.places.iter().any(|x| x == p)
    }

    /// Input arcs `(place, weight)` of transition `t`.
    pub fn inputs(&self, t: &str) -> Vec<(&str, u32)> {
        self.arcs
            .iter()
            .filter(|a| a.to == t && self.has_place(&a.from))
            .map(|a| (a.from.as_str(), a.weight))
            .collect()
    }

    /// Output arcs `(place, weight)` of transition `t`.
    pub fn outputs(&self, t: &str) -> Vec<(&str, u32)> {
        self.arcs
            .iter()
            .filter(|a| a.from == t && self.has_place(&a.to))
            .map(|a| (a.to.as_str(), a.weight))
            .collect()
    }

    /// Removes transitions and their arcs (used to build mutants).
    pub fn remove_transitions(&mut self, ids: &[&str]) {
        self.transitions.retain(|t| !ids.contains(&t.id.as_str()));
        self.arcs
            .retain(|a| !ids.contains(&a.from.as_str()) && !ids.contains(&a.to.as_str()));
    }

    /// Applies every embedded subnet refinement, returning a single-level net.
    pub fn flatten(&self) -> Result<Net, NetError> {
        let mut net = self.clone();
        let subnets = std::mem::take(&mut net.subnets);
        for s in subnets {
            net = crate::hierarchy::refine(&net, &s.place, &s.subnet(), &s.interface())
                .map_err(|e| NetError::Refinement(e.to_string()))?;
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_json_uses_inf_sentinel() {
        let i: Interval = serde_json::from_str(r#"[0, "inf"]"#).unwrap();
        assert_eq!(i, Interval::unbounded(0));
        assert_eq!(
            serde_json::to_string(&Interval::new(1, 5)).unwrap(),
            "[1,5]"
        );
        assert_eq!(serde_json::to_string(&i).unwrap(), r#"[0,"inf"]"#);
        assert!(serde_json::from_str::<Interval>(r#"[0, "forever"]"#).is_err());
    }

    #[test]
    fn net_file_round_trips() {
        let text = r#"{
            "places": ["p", "q"],
            "transitions": [
                {"id": "t", "guard": "go and not stop", "interval": [1, 5], "timing": "weak", "role": "internal"}
            ],
            "arcs": [{"from": "p", "to": "t", "weight": 2}, {"from": "t", "to": "q"}],
            "initial_marking": {"p": 3},
            "refinable": [],
            "signals": [{"name": "go", "kind": "bool"}, {"name": "stop", "kind": "bool", "initial": false}]
        }"#;
        let net = Net::from_json(text).unwrap();
        assert_eq!(net.inputs("t"), vec![("p", 2)]);
        assert_eq!(net.outputs("t"), vec![("q", 1)]);
        let again = Net::from_json(&net.to_json()).unwrap();
        assert_eq!(again, net);
    }

    #[test]
    fn parse_errors_name_the_field() {
        let text = r#"{"places": [], "transitions": [{"id": "t", "guard": "a and", "interval": [0, 1], "timing": "weak", "role": "internal"}], "arcs": []}"#;
        let err = Net::from_json(text).unwrap_err().to_string();
        assert!(err.contains("transitions[0].guard"), "{err}");
    }
}
