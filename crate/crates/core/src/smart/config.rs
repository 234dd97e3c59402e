use serde::{Deserialize, Serialize};

use crate::fixed::Fixed;
use crate::Time;

use super::SmartError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gating {
    /// Output transitions need the stable-mode token only.
    Structural,
    /// Output transitions also carry `not invalid and not UR`.
    #[default]
    Guarded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hysteresis {
    pub enabled: bool,
    pub theta_up: Fixed,
    pub theta_down: Fixed,
    /// Ticks `invalid_up` must hold before escalating.
    pub debounce_up: Time,
    /// Ticks `valid_down` must hold before returning.
    pub debounce_down: Time,
}

impl Default for Hysteresis {
    fn default() -> Self {
        Hysteresis {
            enabled: false,
            theta_up: Fixed::from_raw(700_000),
            theta_down: Fixed::from_raw(300_000),
            debounce_up: 2,
            debounce_down: 2,
        }
    }
}

/// Deadlines, budgets and thresholds of one agent's mode machine (ticks).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmartConfig {
    pub delta_s: Time,
    pub delta_sr: Time,
    pub delta_m: Time,
    pub delta_mr: Time,
    pub delta_a: Time,
    pub delta_ar: Time,
    pub budget_m: Time,
    pub budget_a: Time,
    /// Uncertainty threshold in `invalid`.
    pub theta: Fixed,
    pub hysteresis: Hysteresis,
    pub gating: Gating,
    /// Adds a `t_RS` exit from restricted mode guarded by `ext_auth and not UR`.
    pub governance_release: bool,
}

impl Default for SmartConfig {
    fn default() -> Self {
        SmartConfig {
            delta_s: 2,
            delta_sr: 1,
            delta_m: 1,
            delta_mr: 1,
            delta_a: 2,
            delta_ar: 1,
            budget_m: 5,
            budget_a: 5,
            theta: Fixed::from_raw(500_000),
            hysteresis: Hysteresis::default(),
            gating: Gating::Guarded,
            governance_release: false,
        }
    }
}

impl SmartConfig {
    pub fn validate(&self) -> Result<(), SmartError> {
        for (name, v) in [
            ("delta_s", self.delta_s),
            ("delta_sr", self.delta_sr),
            ("delta_m", self.delta_m),
            ("delta_mr", self.delta_mr),
            ("delta_a", self.delta_a),
            ("delta_ar", self.delta_ar),
        ] {
            if v == 0 {
                return Err(SmartError::Config(format!("{name} must be positive")));
            }
        }
        if self.hysteresis.enabled && self.hysteresis.theta_down >= self.hysteresis.theta_up {
            return Err(SmartError::Config(format!(
                "hysteresis needs theta_down < theta_up (got {} and {})",
                self.hysteresis.theta_down, self.hysteresis.theta_up
            )));
        }
        Ok(())
    }

    /// Worst-case ticks from a persistent unrecoverable condition to restricted mode.
    pub fn governance_bound(&self) -> Time {
        self.delta_sr
            .max(self.delta_s + self.delta_mr)
            .max(self.delta_mr)
            .max(self.delta_ar)
    }

    /// Worst-case residence in self-recovery mode.
    pub fn recovery_bound(&self) -> Time {
        self.budget_m + self.delta_m.max(self.delta_mr)
    }
}
