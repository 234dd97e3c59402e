use serde::Serialize;

use crate::guard::GuardExpr;
use crate::net::{Bound, Net, Role, Timing};

use super::{AgentRoles, SmartError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SmartCheck {
    pub name: &'static str,
    pub passed: bool,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SmartStructureReport {
    pub checks: Vec<SmartCheck>,
}

impl SmartStructureReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&SmartCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &'static str, violations: Vec<String>) -> SmartCheck {
    SmartCheck {
        name,
        passed: violations.is_empty(),
        violations,
    }
}

fn mentions_var(e: &GuardExpr, name: &str) -> bool {
    *e == GuardExpr::var(name)
}

/// SMART-specific structural checks on a net carrying role annotations.
pub fn validate_smart(net: &Net) -> Result<SmartStructureReport, SmartError> {
    let net = net
        .flatten()
        .map_err(|e| SmartError::Refinement(e.to_string()))?;
    let roles = net.smart.as_ref().ok_or(SmartError::NoRoles)?;
    let all_modes = roles.mode_places();

    let mut gating = Vec::new();
    let mut governance = Vec::new();
    let mut release = Vec::new();
    let mut timing = Vec::new();
    let mut conservation = Vec::new();

    let listed: Vec<&str> = roles
        .agents
        .iter()
        .flat_map(|a| a.outputs.iter().map(String::as_str))
        .collect();
    for t in &net.transitions {
        if t.role == Role::Output && !listed.contains(&t.id.as_str()) {
            gating.push(format!("output transition `{}` belongs to no agent", t.id));
        }
    }

    for a in &roles.agents {
        agent_checks(
            &net,
            a,
            &all_modes,
            &mut gating,
            &mut governance,
            &mut release,
            &mut timing,
            &mut conservation,
        );
    }

    Ok(SmartStructureReport {
        checks: vec![
            check("output-gating", gating),
            check("governance-exits", governance),
            check("restricted-release", release),
            check("strong-deadlines", timing),
            check("mode-token-conservation", conservation),
        ],
    })
}

#[allow(clippy::too_many_arguments)]
fn agent_checks(
    net: &Net,
    a: &AgentRoles,
    all_modes: &[&str],
    gating: &mut Vec<String>,
    governance: &mut Vec<String>,
    release: &mut Vec<String>,
    timing: &mut Vec<String>,
    conservation: &mut Vec<String>,
) {
    let own: [&str; 4] = a.modes.all();
    let ur = a.name("UR");
    let ext_auth = a.name("ext_auth");

    for out in &a.outputs {
        let Some(_) = net.transition(out) else {
            gating.push(format!("output transition `{out}` is missing"));
            continue;
        };
        let inputs = net.inputs(out);
        if !inputs.iter().any(|&(p, w)| p == a.modes.stable && w >= 1) {
            gating.push(format!(
                "output `{out}` lacks `{}` as a preplace",
                a.modes.stable
            ));
        }
        for (p, _) in &inputs {
            if *p != a.modes.stable && all_modes.contains(p) {
                gating.push(format!(
                    "output `{out}` also consumes from mode place `{p}`"
                ));
            }
        }
    }

    for from in [&a.modes.stable, &a.modes.recovery, &a.modes.assisted] {
        let ok = net.transitions.iter().any(|t| {
            net.inputs(&t.id).iter().any(|(p, _)| p == from)
                && net
                    .outputs(&t.id)
                    .iter()
                    .any(|(p, _)| *p == a.modes.restricted)
                && t.guard.disjuncts().iter().any(|d| mentions_var(d, &ur))
        });
        if !ok {
            governance.push(format!(
                "no UR-guarded exit from `{from}` to `{}`",
                a.modes.restricted
            ));
        }
    }

    for t in &net.transitions {
        let consumes_r = net
            .inputs(&t.id)
            .iter()
            .any(|(p, _)| *p == a.modes.restricted);
        let leaves_r = net
            .outputs(&t.id)
            .iter()
            .any(|(p, _)| *p != a.modes.restricted);
        if consumes_r && leaves_r {
            let conj = t.guard.conjuncts();
            let has_auth = conj.iter().any(|c| mentions_var(c, &ext_auth));
            let has_not_ur = conj
                .iter()
                .any(|c| matches!(c, GuardExpr::Not(inner) if mentions_var(inner, &ur)));
            if !(has_auth && has_not_ur) {
                release.push(format!(
                    "exit `{}` from `{}` is not guarded by `{ext_auth} and not {ur}`",
                    t.id, a.modes.restricted
                ));
            }
        }
    }

    for key in ["SM", "SR", "MA", "MR", "AR"] {
        let Some(tid) = a.switch(key) else {
            continue;
        };
        match net.transition(tid) {
            Some(t) if t.timing == Timing::Strong && t.interval.hi != Bound::Inf => {}
            Some(t) => timing.push(format!(
                "`{}` must be strong with a finite latest time",
                t.id
            )),
            None => timing.push(format!("`{tid}` is missing")),
        }
    }

    for t in &net.transitions {
        let consumed: u32 = net
            .inputs(&t.id)
            .iter()
            .filter(|(p, _)| own.contains(p))
            .map(|&(_, w)| w)
            .sum();
        let produced: u32 = net
            .outputs(&t.id)
            .iter()
            .filter(|(p, _)| own.contains(p))
            .map(|&(_, w)| w)
            .sum();
        if consumed != produced || consumed > 1 {
            conservation.push(format!(
                "`{}` consumes {consumed} and produces {produced} mode tokens of agent `{}`",
                t.id, a.id
            ));
        }
    }
    let initial: Vec<u32> = own
        .iter()
        .map(|p| net.initial_marking.get(*p).copied().unwrap_or(0))
        .collect();
    if initial != [1, 0, 0, 0] {
        conservation.push(format!(
            "agent `{}` must start with one token in `{}` only (found {initial:?})",
            a.id, a.modes.stable
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guard::parse_guard;
    use crate::net::{ArcDesc, Interval, TransitionDesc};
    use crate::smart::{build_single_agent, SmartConfig};

    fn base() -> Net {
        build_single_agent(&SmartConfig::default()).unwrap()
    }

    #[test]
    fn builder_output_passes() {
        let r = validate_smart(&base()).unwrap();
        assert!(r.all_passed(), "{r:?}");
        let mut cfg = SmartConfig {
            governance_release: true,
            ..SmartConfig::default()
        };
        cfg.hysteresis.enabled = true;
        assert!(validate_smart(&build_single_agent(&cfg).unwrap())
            .unwrap()
            .all_passed());
    }

    #[test]
    fn output_without_stable_preplace_fails() {
        let mut n = base();
        n.arcs.retain(|a| !(a.from == "P_S" && a.to == "t_out"));
        let r = validate_smart(&n).unwrap();
        assert!(!r.check("output-gating").unwrap().passed);
    }

    #[test]
    fn unguarded_restricted_exit_fails() {
        let mut n = base();
        n.transitions.push(TransitionDesc::new(
            "t_escape",
            parse_guard("ext_auth").unwrap(),
            Interval::unbounded(0),
            Timing::Weak,
            Role::ModeSwitch,
        ));
        n.arcs.push(ArcDesc::new("P_R", "t_escape", 1));
        n.arcs.push(ArcDesc::new("t_escape", "P_S", 1));
        let r = validate_smart(&n).unwrap();
        assert!(!r.check("restricted-release").unwrap().passed);
        assert!(r.check("output-gating").unwrap().passed);
    }

    #[test]
    fn weak_escalation_and_missing_governance_fail() {
        let mut n = base();
        n.transition_mut("t_SM").unwrap().timing = Timing::Weak;
        n.remove_transitions(&["t_SR"]);
        let r = validate_smart(&n).unwrap();
        assert!(!r.check("strong-deadlines").unwrap().passed);
        assert!(!r.check("governance-exits").unwrap().passed);
    }

    #[test]
    fn token_duplication_fails_conservation() {
        let mut n = base();
        n.arcs.push(ArcDesc::new("t_SM", "P_A", 1));
        let r = validate_smart(&n).unwrap();
        assert!(!r.check("mode-token-conservation").unwrap().passed);
    }

    #[test]
    fn plain_net_has_no_roles() {
        assert_eq!(validate_smart(&Net::default()), Err(SmartError::NoRoles));
    }
}
