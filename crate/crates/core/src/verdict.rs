//! Verdict outcomes shared by formula checks and trace monitors.

use serde::{Deserialize, Serialize};

use crate::Time;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    /// Holds, but no instant exercised the premise.
    VacuousPass,
    Inconclusive,
    Violation,
}

impl Outcome {
    pub fn is_pass(self) -> bool {
        matches!(self, Outcome::Pass | Outcome::VacuousPass)
    }

    /// Exit status convention: 0 pass, 1 violation, 2 inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass | Outcome::VacuousPass => 0,
            Outcome::Violation => 1,
            Outcome::Inconclusive => 2,
        }
    }

    /// Worst of several outcomes (violation > inconclusive > pass > vacuous).
    pub fn worst(items: impl IntoIterator<Item = Outcome>) -> Outcome {
        items
            .into_iter()
            .max_by_key(|o| match o {
                Outcome::VacuousPass => 0,
                Outcome::Pass => 1,
                Outcome::Inconclusive => 2,
                Outcome::Violation => 3,
            })
            .unwrap_or(Outcome::VacuousPass)
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            Outcome::Pass => "pass",
            Outcome::VacuousPass => "vacuous-pass",
            Outcome::Inconclusive => "inconclusive",
            Outcome::Violation => "violation",
        })
    }
}

/// A finding with the time interval and trace events that witness it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub from: Time,
    pub to: Time,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<usize>,
    pub message: String,
}

impl Finding {
    pub fn new(from: Time, to: Time, message: impl Into<String>) -> Self {
        Finding {
            from,
            to,
            events: Vec::new(),
            message: message.into(),
        }
    }

    pub fn with_events(mut self, events: Vec<usize>) -> Self {
        self.events = events;
        self
    }
}

/// Result of one monitor check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    pub outcome: Outcome,
    /// Instants or episodes at which the premise was exercised.
    pub exercised: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Finding>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<Finding>,
}

impl Verdict {
    /// Violations win, then an obligation left open at the end of the trace,
    /// then vacuity.
    pub fn decide(
        check: impl Into<String>,
        agent: Option<String>,
        exercised: usize,
        violations: Vec<Finding>,
        notes: Vec<Finding>,
        pending: bool,
    ) -> Verdict {
        let outcome = if !violations.is_empty() {
            Outcome::Violation
        } else if pending {
            Outcome::Inconclusive
        } else if exercised == 0 {
            Outcome::VacuousPass
        } else {
            Outcome::Pass
        };
        Verdict {
            check: check.into(),
            agent,
            outcome,
            exercised,
            violations,
            notes,
        }
    }
}
