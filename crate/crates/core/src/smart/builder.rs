use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::fixed::Fixed;
use crate::guard::{parse_guard, GuardExpr, SignalDecl};
use crate::hierarchy::{refine, InterfaceSpec, Subnet};
use crate::net::{ArcDesc, Interval, Net, Priority, Role, Timing, TransitionDesc};

use super::{AgentRoles, ModePlaces, SmartConfig, SmartError, SmartRoles};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: String,
    #[serde(default)]
    pub config: SmartConfig,
}

const SINGLE_AGENT_ID: &str = "agent";

fn local(prefix: &str, src: &str) -> GuardExpr {
    let e = parse_guard(src).expect("builder guard parses");
    if prefix.is_empty() {
        e
    } else {
        e.rename(&|n: &str| format!("{prefix}{n}"))
    }
}

struct Tr<'a> {
    id: &'a str,
    from: &'a [&'a str],
    to: &'a [&'a str],
    guard: &'a str,
    interval: Interval,
    timing: Timing,
    role: Role,
    priority: Priority,
}

fn add(net: &mut Net, prefix: &str, t: Tr<'_>) {
    let id = format!("{prefix}{}", t.id);
    net.transitions.push(
        TransitionDesc::new(
            id.clone(),
            local(prefix, t.guard),
            t.interval,
            t.timing,
            t.role,
        )
        .with_priority(t.priority),
    );
    for p in t.from {
        net.arcs
            .push(ArcDesc::new(format!("{prefix}{p}"), id.clone(), 1));
    }
    for p in t.to {
        net.arcs
            .push(ArcDesc::new(id.clone(), format!("{prefix}{p}"), 1));
    }
}

fn signals(prefix: &str, multi: bool) -> Vec<SignalDecl> {
    let mut v = vec![
        SignalDecl::real(format!("{prefix}U"), Fixed::ZERO),
        SignalDecl::boolean(format!("{prefix}anom"), false),
        SignalDecl::boolean(format!("{prefix}evidence"), true),
        SignalDecl::boolean(format!("{prefix}safe"), true),
        SignalDecl::boolean(format!("{prefix}hardware_fault"), false),
        SignalDecl::boolean(format!("{prefix}assist"), true),
        SignalDecl::boolean(format!("{prefix}ext_auth"), false),
        SignalDecl::boolean(format!("{prefix}disagree"), false),
        SignalDecl::boolean(format!("{prefix}agree"), false),
    ];
    if multi {
        v.push(SignalDecl::real(format!("{prefix}claim"), Fixed::ZERO));
    }
    v
}

fn predicates(prefix: &str, cfg: &SmartConfig) -> BTreeMap<String, GuardExpr> {
    let h = &cfg.hysteresis;
    [
        (
            "invalid",
            format!("U >= {} or anom or not evidence", cfg.theta),
        ),
        ("UR", "not safe or hardware_fault".to_string()),
        (
            "invalid_up",
            format!("U >= {} or anom or not evidence", h.theta_up),
        ),
        (
            "valid_down",
            format!("U <= {} and not anom and evidence", h.theta_down),
        ),
        ("timeout_M", format!("timeout(P_M, {})", cfg.budget_m)),
        ("timeout_A", format!("timeout(P_A, {})", cfg.budget_a)),
    ]
    .into_iter()
    .map(|(k, v)| (format!("{prefix}{k}"), local(prefix, &v)))
    .collect()
}

/// Coordination session inside the assisted mode. `P_A` stays the mode-token
/// place; the session token runs claim -> check -> agree | conflict.
/// The claim/check/agree protocol that refines an agent's assisted place.
pub fn coordination_subnet(prefix: &str, multi: bool) -> Subnet {
    let mut net = Net::default();
    for p in ["P_A", "P_claim", "P_check", "P_agree", "P_conflict"] {
        net.places.push(format!("{prefix}{p}"));
    }
    let idle = "marked(P_A) and not marked(P_claim) and not marked(P_check) and not marked(P_agree) and not marked(P_conflict)";
    let agree = if multi {
        "agree and not disagree and evidence and not UR"
    } else {
        "not disagree and evidence and not UR"
    };
    let weak = |id, from, to, guard| Tr {
        id,
        from,
        to,
        guard,
        interval: Interval::new(0, 1),
        timing: Timing::Weak,
        role: Role::Internal,
        priority: Priority::Internal,
    };
    let strong = |id, from, to, guard| Tr {
        timing: Timing::Strong,
        ..weak(id, from, to, guard)
    };
    add(&mut net, prefix, weak("t_propose", &[], &["P_claim"], idle));
    add(
        &mut net,
        prefix,
        weak("t_verify", &["P_claim"], &["P_check"], "true"),
    );
    add(
        &mut net,
        prefix,
        strong("t_agree", &["P_check"], &["P_agree"], agree),
    );
    add(
        &mut net,
        prefix,
        strong(
            "t_conflict",
            &["P_check"],
            &["P_conflict"],
            "disagree and not UR",
        ),
    );
    add(
        &mut net,
        prefix,
        weak("t_resolve", &["P_conflict"], &["P_check"], "not disagree"),
    );
    add(
        &mut net,
        prefix,
        strong("t_Aexit", &["P_agree"], &[], "not marked(P_A)"),
    );
    let a = format!("{prefix}P_A");
    Subnet {
        net,
        entry: vec![a.clone()],
        exit: vec![a.clone()],
        success_exit: vec![a],
    }
}

fn mode_machine(
    prefix: &str,
    cfg: &SmartConfig,
    multi: bool,
) -> Result<(Net, BTreeMap<String, String>), SmartError> {
    cfg.validate()?;
    let mut net = Net {
        places: ["P_S", "P_M", "P_A", "P_R"]
            .iter()
            .map(|p| format!("{prefix}{p}"))
            .collect(),
        initial_marking: [(format!("{prefix}P_S"), 1)].into(),
        refinable: vec![format!("{prefix}P_A")],
        signals: signals(prefix, multi),
        predicates: predicates(prefix, cfg),
        ..Net::default()
    };
    let out_guard = match cfg.gating {
        super::Gating::Guarded => "not invalid and not UR",
        super::Gating::Structural => "true",
    };
    let (as_guard, ar_guard) = if multi {
        (
            "marked(P_agree) and not disagree and agree and not invalid and not UR",
            "UR or disagree and timeout_A",
        )
    } else {
        (
            "marked(P_agree) and not disagree and not invalid and not UR",
            "UR or marked(P_conflict) and timeout_A",
        )
    };
    let strong = |hi| Interval::new(0, hi);
    let mut specs = vec![
        (
            "t_out",
            "P_S",
            "P_S",
            out_guard,
            Interval::unbounded(0),
            Timing::Weak,
            Role::Output,
            Priority::Output,
        ),
        (
            "t_SM",
            "P_S",
            "P_M",
            "invalid and not UR",
            strong(cfg.delta_s),
            Timing::Strong,
            Role::ModeSwitch,
            Priority::Escalation,
        ),
        (
            "t_SR",
            "P_S",
            "P_R",
            "UR",
            strong(cfg.delta_sr),
            Timing::Strong,
            Role::ModeSwitch,
            Priority::Governance,
        ),
        (
            "t_MS",
            "P_M",
            "P_S",
            "not invalid and not UR",
            Interval::unbounded(0),
            Timing::Weak,
            Role::ModeSwitch,
            Priority::Recovery,
        ),
        (
            "t_MA",
            "P_M",
            "P_A",
            "invalid and timeout_M and not UR and assist",
            strong(cfg.delta_m),
            Timing::Strong,
            Role::ModeSwitch,
            Priority::Escalation,
        ),
        (
            "t_MR",
            "P_M",
            "P_R",
            "UR or invalid and timeout_M and not assist",
            strong(cfg.delta_mr),
            Timing::Strong,
            Role::ModeSwitch,
            Priority::Governance,
        ),
        (
            "t_AS",
            "P_A",
            "P_S",
            as_guard,
            strong(cfg.delta_a),
            Timing::Strong,
            Role::ModeSwitch,
            Priority::Recovery,
        ),
        (
            "t_AR",
            "P_A",
            "P_R",
            ar_guard,
            strong(cfg.delta_ar),
            Timing::Strong,
            Role::ModeSwitch,
            Priority::Governance,
        ),
    ];
    if cfg.governance_release {
        specs.push((
            "t_RS",
            "P_R",
            "P_S",
            "ext_auth and not UR",
            Interval::unbounded(0),
            Timing::Weak,
            Role::ModeSwitch,
            Priority::Recovery,
        ));
    }
    let mut switches = BTreeMap::new();
    for (tid, from, to, guard, interval, timing, role, priority) in specs {
        add(
            &mut net,
            prefix,
            Tr {
                id: tid,
                from: &[from],
                to: &[to],
                guard,
                interval,
                timing,
                role,
                priority,
            },
        );
        if let Some(key) = tid.strip_prefix("t_").filter(|k| k.len() == 2) {
            switches.insert(key.to_string(), format!("{prefix}{tid}"));
        }
    }
    Ok((net, switches))
}

/// The single-agent mode machine with the assisted mode still a plain place.
pub fn single_agent_mode_machine(cfg: &SmartConfig) -> Result<Net, SmartError> {
    Ok(mode_machine("", cfg, false)?.0)
}

fn agent_net(
    id: &str,
    prefix: &str,
    cfg: &SmartConfig,
    multi: bool,
) -> Result<(Net, AgentRoles), SmartError> {
    let (net, switches) = mode_machine(prefix, cfg, multi)?;
    let sub = coordination_subnet(prefix, multi);
    let mut net = refine(
        &net,
        &format!("{prefix}P_A"),
        &sub,
        &InterfaceSpec::default(),
    )
    .map_err(|e| SmartError::Refinement(e.to_string()))?;
    // the assisted place survives refinement as the subnet's entry/exit place
    net.refinable.retain(|p| p != &format!("{prefix}P_A"));

    let roles = AgentRoles {
        id: id.to_string(),
        prefix: prefix.to_string(),
        modes: ModePlaces {
            stable: format!("{prefix}P_S"),
            recovery: format!("{prefix}P_M"),
            assisted: format!("{prefix}P_A"),
            restricted: format!("{prefix}P_R"),
        },
        outputs: vec![format!("{prefix}t_out")],
        switches,
        coordination: ["P_claim", "P_check", "P_agree", "P_conflict"]
            .iter()
            .map(|p| format!("{prefix}{p}"))
            .collect(),
        config: *cfg,
    };
    if cfg.hysteresis.enabled {
        rewrite_hysteresis(&mut net, &roles, cfg);
    }
    Ok((net, roles))
}

/// Builds the single-agent SMART net with the assisted mode refined.
pub fn build_single_agent(cfg: &SmartConfig) -> Result<Net, SmartError> {
    let (mut net, roles) = agent_net(SINGLE_AGENT_ID, "", cfg, false)?;
    net.smart = Some(SmartRoles {
        agents: vec![roles],
    });
    Ok(net)
}

/// Builds one namespaced SMART machine per agent (`<id>.P_S`, `<id>.t_SM`, ...).
pub fn build_multi_agent(agents: &[AgentSpec]) -> Result<Net, SmartError> {
    if agents.len() < 2 {
        return Err(SmartError::TooFewAgents(agents.len()));
    }
    let mut seen = HashSet::new();
    let mut out = Net::default();
    let mut roles = Vec::new();
    for a in agents {
        if a.id.is_empty() || !a.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(SmartError::BadAgentId(a.id.clone()));
        }
        if !seen.insert(a.id.clone()) {
            return Err(SmartError::DuplicateAgent(a.id.clone()));
        }
        let (net, r) = agent_net(&a.id, &format!("{}.", a.id), &a.config, true)?;
        out.places.extend(net.places);
        out.transitions.extend(net.transitions);
        out.arcs.extend(net.arcs);
        out.initial_marking.extend(net.initial_marking);
        out.refinable.extend(net.refinable);
        out.signals.extend(net.signals);
        out.predicates.extend(net.predicates);
        roles.push(r);
    }
    out.smart = Some(SmartRoles { agents: roles });
    Ok(out)
}

fn rewrite_hysteresis(net: &mut Net, a: &AgentRoles, cfg: &SmartConfig) {
    let h = &cfg.hysteresis;
    let p = &a.prefix;
    net.predicates.insert(
        a.name("invalid_up"),
        local(p, &format!("U >= {} or anom or not evidence", h.theta_up)),
    );
    net.predicates.insert(
        a.name("valid_down"),
        local(
            p,
            &format!("U <= {} and not anom and evidence", h.theta_down),
        ),
    );
    if let Some(t) = a.switch("SM").and_then(|id| net.transition_mut(id)) {
        t.guard = local(
            p,
            &format!("held_for(invalid_up, {}) and not UR", h.debounce_up),
        );
    }
    if let Some(t) = a.switch("MS").and_then(|id| net.transition_mut(id)) {
        t.guard = local(
            p,
            &format!("held_for(valid_down, {}) and not UR", h.debounce_down),
        );
    }
}

/// Rewrites escalation and return guards to debounced dual-threshold form.
/// Returns the net unchanged when hysteresis is disabled.
pub fn apply_hysteresis(net: &Net, cfg: &SmartConfig) -> Result<Net, SmartError> {
    if !cfg.hysteresis.enabled {
        return Ok(net.clone());
    }
    cfg.validate()?;
    let roles = net.smart.as_ref().ok_or(SmartError::NoRoles)?.clone();
    let mut out = net.clone();
    for mut a in roles.agents {
        a.config.hysteresis = cfg.hysteresis;
        rewrite_hysteresis(&mut out, &a, cfg);
    }
    if let Some(r) = out.smart.as_mut() {
        for a in &mut r.agents {
            a.config.hysteresis = cfg.hysteresis;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::validate_net;

    #[test]
    fn default_transition_inventory_is_exact() {
        let net = build_single_agent(&SmartConfig::default()).unwrap();
        let mut ids: Vec<&str> = net.transitions.iter().map(|t| t.id.as_str()).collect();
        ids.sort();
        let mut want = vec![
            "t_out",
            "t_SM",
            "t_SR",
            "t_MS",
            "t_MA",
            "t_MR",
            "t_AS",
            "t_AR",
            "t_propose",
            "t_verify",
            "t_agree",
            "t_conflict",
            "t_resolve",
            "t_Aexit",
        ];
        want.sort();
        assert_eq!(ids, want);
        assert!(validate_net(&net).is_ok(), "{:?}", validate_net(&net));
    }

    #[test]
    fn initial_marking_only_stable() {
        let net = build_single_agent(&SmartConfig::default()).unwrap();
        assert_eq!(net.initial_marking, [("P_S".to_string(), 1)].into());
        for p in [
            "P_M",
            "P_A",
            "P_R",
            "P_claim",
            "P_check",
            "P_agree",
            "P_conflict",
        ] {
            assert!(net.has_place(p), "{p}");
        }
    }

    #[test]
    fn guards_match_the_mode_machine() {
        let net = build_single_agent(&SmartConfig::default()).unwrap();
        let g = |id: &str| net.transition(id).unwrap().guard.to_string();
        assert_eq!(g("t_MR"), "UR or invalid and timeout_M and not assist");
        assert_eq!(g("t_SM"), "invalid and not UR");
        assert_eq!(g("t_out"), "not invalid and not UR");
        assert_eq!(
            g("t_AS"),
            "marked(P_agree) and not disagree and not invalid and not UR"
        );
        assert_eq!(
            net.transition("t_SM").unwrap().interval,
            Interval::new(0, 2)
        );
        assert_eq!(
            net.transition("t_out").unwrap().interval,
            Interval::unbounded(0)
        );
    }

    #[test]
    fn structural_gating_drops_output_guard() {
        let cfg = SmartConfig {
            gating: super::super::Gating::Structural,
            ..SmartConfig::default()
        };
        let net = build_single_agent(&cfg).unwrap();
        assert_eq!(
            net.transition("t_out").unwrap().guard,
            GuardExpr::Const(true)
        );
    }

    #[test]
    fn multi_agent_namespaces_everything() {
        let agents = [
            AgentSpec {
                id: "scout".into(),
                config: SmartConfig::default(),
            },
            AgentSpec {
                id: "lifter".into(),
                config: SmartConfig::default(),
            },
        ];
        let net = build_multi_agent(&agents).unwrap();
        let modes = net.smart.as_ref().unwrap().mode_places();
        assert_eq!(modes.len(), 8);
        assert_eq!(
            net.transition("scout.t_AS").unwrap().guard.to_string(),
            "marked(scout.P_agree) and not scout.disagree and scout.agree and not scout.invalid and not scout.UR"
        );
        assert_eq!(
            net.transition("lifter.t_AR").unwrap().guard.to_string(),
            "lifter.UR or lifter.disagree and lifter.timeout_A"
        );
        assert!(validate_net(&net).is_ok(), "{:?}", validate_net(&net));
    }

    #[test]
    fn multi_agent_rejects_bad_rosters() {
        let one = [AgentSpec {
            id: "solo".into(),
            config: SmartConfig::default(),
        }];
        assert_eq!(build_multi_agent(&one), Err(SmartError::TooFewAgents(1)));
        let dup = [
            AgentSpec {
                id: "x".into(),
                config: SmartConfig::default(),
            },
            AgentSpec {
                id: "x".into(),
                config: SmartConfig::default(),
            },
        ];
        assert_eq!(
            build_multi_agent(&dup),
            Err(SmartError::DuplicateAgent("x".into()))
        );
    }

    #[test]
    fn hysteresis_rewrites_two_guards_only() {
        let base = build_single_agent(&SmartConfig::default()).unwrap();
        let mut cfg = SmartConfig::default();
        cfg.hysteresis.enabled = true;
        let h = apply_hysteresis(&base, &cfg).unwrap();
        assert_eq!(
            h.transition("t_SM").unwrap().guard.to_string(),
            "held_for(invalid_up, 2) and not UR"
        );
        assert_eq!(
            h.predicates["invalid_up"].to_string(),
            "U >= 0.7 or anom or not evidence"
        );
        assert_eq!(
            h.transition("t_MS").unwrap().guard.to_string(),
            "held_for(valid_down, 2) and not UR"
        );
        assert_eq!(h.places, base.places);
        assert_eq!(h.arcs, base.arcs);
        let changed: Vec<&str> = h
            .transitions
            .iter()
            .zip(&base.transitions)
            .filter(|(a, b)| a.guard != b.guard)
            .map(|(a, _)| a.id.as_str())
            .collect();
        assert_eq!(changed, vec!["t_SM", "t_MS"]);
    }

    #[test]
    fn hysteresis_thresholds_must_be_ordered() {
        let base = build_single_agent(&SmartConfig::default()).unwrap();
        let mut cfg = SmartConfig::default();
        cfg.hysteresis.enabled = true;
        cfg.hysteresis.theta_down = cfg.hysteresis.theta_up;
        assert!(matches!(
            apply_hysteresis(&base, &cfg),
            Err(SmartError::Config(_))
        ));
        let off = apply_hysteresis(&base, &SmartConfig::default()).unwrap();
        assert_eq!(off, base);
    }
}
