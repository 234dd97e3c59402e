//! SMART mode machines: stable (S), self-recovery (M), assisted (A) and
//! restricted (R) modes carried by a single mode token per agent.

mod builder;
mod config;
mod triggers;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use builder::{
    apply_hysteresis, build_multi_agent, build_single_agent, coordination_subnet,
    single_agent_mode_machine, AgentSpec,
};
pub use config::{Gating, Hysteresis, SmartConfig};
pub use triggers::{Trigger, TriggerSet};
pub use validate::{validate_smart, SmartCheck, SmartStructureReport};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SmartError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("multi-agent builds need at least two agents (got {0})")]
    TooFewAgents(usize),
    #[error("duplicate agent id `{0}`")]
    DuplicateAgent(String),
    #[error("agent id `{0}` must be a non-empty identifier")]
    BadAgentId(String),
    #[error("net carries no SMART role annotations")]
    NoRoles,
    #[error("refinement of the assisted mode failed: {0}")]
    Refinement(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModePlaces {
    #[serde(rename = "S")]
    pub stable: String,
    #[serde(rename = "M")]
    pub recovery: String,
    #[serde(rename = "A")]
    pub assisted: String,
    #[serde(rename = "R")]
    pub restricted: String,
}

impl ModePlaces {
    pub fn all(&self) -> [&str; 4] {
        [
            &self.stable,
            &self.recovery,
            &self.assisted,
            &self.restricted,
        ]
    }

    /// Single-letter mode name for a place, if it is one of ours.
    pub fn mode_of(&self, place: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|&m| self.place(m) == place)
    }

    pub fn place(&self, m: Mode) -> &str {
        match m {
            Mode::S => &self.stable,
            Mode::M => &self.recovery,
            Mode::A => &self.assisted,
            Mode::R => &self.restricted,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    S,
    M,
    A,
    R,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::S, Mode::M, Mode::A, Mode::R];
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Role annotations of one agent inside a (flattened) SMART net.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRoles {
    pub id: String,
    /// Prefix applied to this agent's places, transitions, signals and predicates.
    pub prefix: String,
    pub modes: ModePlaces,
    pub outputs: Vec<String>,
    /// Mode-switch transitions keyed by move: SM, SR, MS, MA, MR, AS, AR, RS.
    pub switches: BTreeMap<String, String>,
    pub coordination: Vec<String>,
    pub config: SmartConfig,
}

impl AgentRoles {
    /// Prefixed name of an agent-local signal or predicate.
    pub fn name(&self, local: &str) -> String {
        format!("{}{local}", self.prefix)
    }

    pub fn switch(&self, key: &str) -> Option<&str> {
        self.switches.get(key).map(String::as_str)
    }

    /// Which move a transition performs, if it is one of this agent's mode switches.
    pub fn move_of(&self, transition: &str) -> Option<&str> {
        self.switches
            .iter()
            .find(|(_, t)| t.as_str() == transition)
            .map(|(k, _)| k.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmartRoles {
    pub agents: Vec<AgentRoles>,
}

impl SmartRoles {
    pub fn agent(&self, id: &str) -> Option<&AgentRoles> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn mode_places(&self) -> Vec<&str> {
        self.agents.iter().flat_map(|a| a.modes.all()).collect()
    }
}
