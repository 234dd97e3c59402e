use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::guard::{parse_guard, GuardExpr, GuardParseError};
use crate::net::{guard_string, Net};
use crate::Time;

use super::AgentRoles;

/// A named escalation condition and the transition that acts on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trigger {
    pub name: String,
    #[serde(with = "guard_string")]
    pub guard: GuardExpr,
    pub transition: String,
}

fn default_max_micro() -> u32 {
    3
}

/// Domain trigger set: self-recovery probes, assisted indicators and
/// governance triggers, judged against a risk predicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerSet {
    #[serde(default)]
    pub self_recovery: Vec<Trigger>,
    #[serde(default)]
    pub assisted: Vec<Trigger>,
    #[serde(default)]
    pub governance: Vec<Trigger>,
    #[serde(with = "guard_string")]
    pub risk: GuardExpr,
    /// Minimal risk duration that must provoke a trigger.
    pub dwell: Time,
    /// Stable/recovery round trips tolerated inside one risk episode.
    #[serde(default = "default_max_micro")]
    pub max_micro_recoveries: u32,
}

fn g(a: &AgentRoles, src: &str) -> GuardExpr {
    let e = parse_guard(src).expect("trigger guard parses");
    if a.prefix.is_empty() {
        e
    } else {
        e.rename(&|n: &str| format!("{}{n}", a.prefix))
    }
}

impl TriggerSet {
    /// Triggers bound to the builder's escalation and governance transitions.
    pub fn default_for(a: &AgentRoles) -> TriggerSet {
        let t = |k: &str| a.switch(k).unwrap_or_default().to_string();
        let cfg = &a.config;
        TriggerSet {
            self_recovery: vec![Trigger {
                name: "epistemic-invalidity".into(),
                guard: g(a, "invalid and not UR"),
                transition: t("SM"),
            }],
            assisted: vec![Trigger {
                name: "recovery-budget-exhausted".into(),
                guard: g(a, "invalid and timeout_M and not UR and assist"),
                transition: t("MA"),
            }],
            governance: vec![
                Trigger {
                    name: "unrecoverable-in-stable".into(),
                    guard: g(a, "UR"),
                    transition: t("SR"),
                },
                Trigger {
                    name: "unrecoverable-in-recovery".into(),
                    guard: g(a, "UR or invalid and timeout_M and not assist"),
                    transition: t("MR"),
                },
                Trigger {
                    name: "unrecoverable-in-assisted".into(),
                    guard: a
                        .switch("AR")
                        .map(|_| g(a, "UR or timeout_A"))
                        .unwrap_or(GuardExpr::Const(false)),
                    transition: t("AR"),
                },
            ],
            risk: g(a, "invalid or UR or disagree"),
            dwell: cfg.delta_s.max(cfg.delta_sr) + 1,
            max_micro_recoveries: default_max_micro(),
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &Trigger> {
        self.self_recovery
            .iter()
            .chain(&self.assisted)
            .chain(&self.governance)
    }

    /// Drops triggers bound to the given transitions (mutation helper).
    pub fn without_transitions(mut self, ids: &[&str]) -> TriggerSet {
        for list in [
            &mut self.self_recovery,
            &mut self.assisted,
            &mut self.governance,
        ] {
            list.retain(|t| !ids.contains(&t.transition.as_str()));
        }
        self
    }

    /// Names that are neither declared signals nor predicates of `net`.
    pub fn undeclared(&self, net: &Net) -> BTreeSet<String> {
        let mut names = self.risk.identifiers();
        for t in self.all() {
            names.extend(t.guard.identifiers());
        }
        names
            .into_iter()
            .filter(|n| {
                !net.signals.iter().any(|s| &s.name == n) && !net.predicates.contains_key(n)
            })
            .collect()
    }
}

impl std::str::FromStr for TriggerSet {
    type Err = GuardParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(TriggerSet {
            self_recovery: vec![],
            assisted: vec![],
            governance: vec![],
            risk: parse_guard(s)?,
            dwell: 1,
            max_micro_recoveries: default_max_micro(),
        })
    }
}
