//! Acceptance checks, one line per criterion. Run with
//! `cargo test -p smart-tgpn --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use smart_tgpn::analysis::{
    check_formula, check_p_invariant, compile_condition, explore, incidence_matrix, replay,
    Branching, EdgeLabel, ExploreConfig, Forbid, Formula, ReachGraph, TransitionClass,
};
use smart_tgpn::guard::parse_guard;
use smart_tgpn::hierarchy::{check_interface, InterfaceSpec};
use smart_tgpn::kernel::{eval_in_state, KernelError};
use smart_tgpn::monitor::{EventKind, Proposition, Timeline, Trace};
use smart_tgpn::net::{ArcDesc, CompiledNet, Interval, Net, Timing};
use smart_tgpn::sim::{
    builtin, builtin_names, parse_scenario, resolve, run, simulate, suite_triggers, RunError,
    Scenario, ScriptEntry, REFERENCE_SUITE,
};
use smart_tgpn::smart::{
    build_multi_agent, build_single_agent, coordination_subnet, single_agent_mode_machine,
    AgentSpec, Gating, Mode, SmartConfig,
};
use smart_tgpn::verdict::Outcome;
use smart_tgpn::{GuardExpr, PolicyKind, Time};

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond) {
            return Err(format!($($msg)+));
        }
    };
}

const ALPHABET: [&str; 8] = [
    "anom",
    "evidence",
    "safe",
    "hardware_fault",
    "assist",
    "ext_auth",
    "disagree",
    "agree",
];

fn g(src: &str) -> GuardExpr {
    parse_guard(src).expect("guard parses")
}

fn scenario(name: &str) -> Scenario {
    parse_scenario(builtin(name).expect("shipped scenario"), None).expect("scenario parses")
}

fn fires(trace: &Trace) -> Vec<(Time, String)> {
    trace
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Fire)
        .map(|e| (e.time, e.name.clone()))
        .collect()
}

fn first_fire(trace: &Trace, name: &str) -> Option<Time> {
    fires(trace)
        .into_iter()
        .find(|(_, n)| n == name)
        .map(|(t, _)| t)
}

fn count(trace: &Trace, name: &str) -> usize {
    fires(trace).iter().filter(|(_, n)| n == name).count()
}

fn single() -> CompiledNet {
    CompiledNet::new(&build_single_agent(&SmartConfig::default()).unwrap()).unwrap()
}

fn full_config(branching: Branching) -> ExploreConfig {
    ExploreConfig {
        horizon: 20,
        branching,
        alphabet: Some(ALPHABET.iter().map(|s| s.to_string()).collect()),
        ..ExploreConfig::default()
    }
}

fn proposition(trace: &Trace, p: Proposition) -> Vec<Outcome> {
    let tl = Timeline::new(trace).unwrap();
    smart_tgpn::monitor::check_proposition(&tl, p)
        .unwrap()
        .into_iter()
        .map(|v| v.outcome)
        .collect()
}

/// Mode places of every agent hold exactly one token between them.
fn mode_sums_ok(graph: &ReachGraph<'_>) -> usize {
    let net = graph.net;
    let roles = net.smart().unwrap();
    graph
        .states
        .iter()
        .filter(|s| {
            roles.agents.iter().any(|a| {
                let sum: u32 = a
                    .modes
                    .all()
                    .iter()
                    .map(|p| s.kernel.marking[net.place_id(p).unwrap()])
                    .sum();
                sum != 1
            })
        })
        .count()
}

struct Shared<'n> {
    net: &'n CompiledNet,
    /// Single-agent exploration with every choice, built once.
    all: OnceLock<Result<ReachGraph<'n>, String>>,
}

impl<'n> Shared<'n> {
    fn all(&self) -> Result<&ReachGraph<'n>, String> {
        self.all
            .get_or_init(|| {
                explore(self.net, &full_config(Branching::All)).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(Clone::clone)
    }
}

fn mode_token_invariant(sh: &Shared<'_>) -> Check {
    for net in [
        build_single_agent(&SmartConfig::default()).unwrap(),
        build_multi_agent(&[
            AgentSpec {
                id: "scout".into(),
                config: SmartConfig::default(),
            },
            AgentSpec {
                id: "supervisor".into(),
                config: SmartConfig::default(),
            },
        ])
        .unwrap(),
    ] {
        let c = CompiledNet::new(&net).unwrap();
        let m = incidence_matrix(&c);
        for a in &c.smart().unwrap().agents {
            let y = m.indicator(&a.modes.all()).unwrap();
            ensure!(
                check_p_invariant(&m, &y).unwrap(),
                "mode indicator of `{}` is not a P-invariant",
                a.id
            );
            // independent: every column sums to zero over the mode rows
            for (j, t) in m.transitions.iter().enumerate() {
                let s: i64 = (0..m.places.len()).map(|i| y[i] * m.entries[i][j]).sum();
                ensure!(
                    s == 0,
                    "transition `{t}` changes `{}` mode tokens by {s}",
                    a.id
                );
            }
        }
    }
    let start = Instant::now();
    let graph = sh.all()?;
    let secs = start.elapsed().as_secs_f64();
    ensure!(graph.complete && !graph.capped, "exploration incomplete");
    let bad = mode_sums_ok(graph);
    ensure!(bad == 0, "{bad} states with mode sum != 1");
    ensure!(
        graph.invariant_violations.is_empty(),
        "explorer flagged {:?}",
        graph.invariant_violations[0]
    );
    ensure!(
        start.elapsed() < Duration::from_secs(60),
        "exploration took {secs:.1} s"
    );
    Ok(format!(
        "yC=0 on 1- and 2-agent nets; {} states, 0 bad, {secs:.1} s",
        graph.len()
    ))
}

fn bounded_autonomy(sh: &Shared<'_>) -> Check {
    let graph = sh.all()?;
    let f = Formula::BoundedResponse {
        when: g("marked(P_S) and invalid and not UR"),
        target: g("not marked(P_S)"),
        within: 2,
    };
    let v = check_formula(graph, &f).map_err(|e| e.to_string())?;
    ensure!(
        v.outcome == Outcome::Pass && v.premise_states > 0,
        "exploration: {:?} {:?}",
        v.outcome,
        v.counterexample
    );
    // one tick less must be refuted, otherwise the check is not sharp
    let tight = Formula::BoundedResponse {
        when: g("marked(P_S) and invalid and not UR"),
        target: g("not marked(P_S)"),
        within: 1,
    };
    let v1 = check_formula(graph, &tight).map_err(|e| e.to_string())?;
    ensure!(v1.outcome == Outcome::Violation, "bound 1 not refuted");

    let sc = scenario("robot-escalation");
    let (trace, _) = run(&sc).map_err(|e| e.to_string())?;
    let sm = first_fire(&trace, "t_SM").ok_or("no t_SM in scenario")?;
    ensure!(sm <= 3 + 2, "t_SM at {sm}, anomaly from 3");
    ensure!(
        proposition(&trace, Proposition::BoundedAutonomy) == [Outcome::Pass],
        "monitor disagrees"
    );

    let mut late = scenario("robot-escalation");
    late.doc.policy = PolicyKind::Latest;
    let (trace, _) = run(&late).map_err(|e| e.to_string())?;
    let sm_late = first_fire(&trace, "t_SM").ok_or("no t_SM under latest policy")?;
    ensure!(sm_late == 5, "latest policy t_SM at {sm_late}");
    Ok(format!("{} premise states, bound 2 holds, bound 1 refuted; t_SM at {sm} (earliest) / {sm_late} (latest)", v.premise_states))
}

fn output_gating(sh: &Shared<'_>) -> Check {
    let graph = sh.all()?;
    let safety = Formula::Safety {
        when: g("invalid"),
        forbid: Forbid::Class(TransitionClass::Outputs),
    };
    let v = check_formula(graph, &safety).map_err(|e| e.to_string())?;
    ensure!(
        v.outcome == Outcome::Pass && v.premise_states > 0,
        "guarded exploration: {:?}",
        v.outcome
    );
    // independent count over the graph's firing edges
    let invalid = compile_condition(sh.net, &g("invalid")).unwrap();
    let t_out = sh.net.transition_id("t_out").unwrap();
    let bad_edges = graph
        .edges
        .iter()
        .filter(|e| e.label == EdgeLabel::Fire(t_out))
        .filter(|e| {
            let s = &graph.states[e.src as usize];
            eval_in_state(&invalid, &s.kernel, &s.values)
        })
        .count();
    ensure!(bad_edges == 0, "{bad_edges} output edges under invalidity");

    let mut outputs = 0;
    for name in builtin_names().filter(|n| *n != "zeno-loop") {
        let trace = simulate(&scenario(name)).map_err(|e| e.to_string())?;
        let tl = Timeline::new(&trace).unwrap();
        for a in tl
            .agents()
            .unwrap()
            .iter()
            .filter(|a| a.config.gating == Gating::Guarded)
        {
            let inv = g(&format!("{}invalid", a.prefix));
            for f in tl
                .firings
                .iter()
                .filter(|f| a.outputs.iter().any(|o| o == tl.name_of(f)))
            {
                outputs += 1;
                ensure!(
                    !tl.holds(&inv, f.time).unwrap(),
                    "{name}: output at {} under invalidity",
                    f.time
                );
            }
        }
    }
    ensure!(outputs > 0, "scenario suite fired no outputs");

    // structural-only gating
    let cfg = SmartConfig {
        gating: Gating::Structural,
        ..SmartConfig::default()
    };
    let snet = CompiledNet::new(&build_single_agent(&cfg).unwrap()).unwrap();
    let sgraph = explore(&snet, &full_config(Branching::All)).map_err(|e| e.to_string())?;
    let outside = Formula::Safety {
        when: g("not marked(P_S)"),
        forbid: Forbid::Class(TransitionClass::Outputs),
    };
    let vo = check_formula(&sgraph, &outside).map_err(|e| e.to_string())?;
    ensure!(
        vo.outcome == Outcome::Pass,
        "structural: output outside P_S"
    );
    let leave = Formula::BoundedResponse {
        when: g("marked(P_S) and invalid and not UR"),
        target: g("not marked(P_S)"),
        within: cfg.delta_s,
    };
    ensure!(
        check_formula(&sgraph, &leave).unwrap().outcome == Outcome::Pass,
        "structural: stable mode outlives invalidity"
    );
    let under = check_formula(&sgraph, &safety).unwrap();
    ensure!(
        under.outcome == Outcome::Violation,
        "structural net should allow outputs under invalidity"
    );

    let sc = scenario("robot-structural");
    let trace = simulate(&sc).map_err(|e| e.to_string())?;
    let tl = Timeline::new(&trace).unwrap();
    let inv_from = 5;
    let leave_at = first_fire(&trace, "t_SM").ok_or("structural scenario never leaves P_S")?;
    let mut window = 0;
    for f in tl.firings.iter().filter(|f| tl.name_of(f) == "t_out") {
        if tl.holds(&g("invalid"), f.time).unwrap() {
            window += 1;
            ensure!(
                f.time - inv_from <= cfg.delta_s,
                "output {} ticks into invalidity",
                f.time - inv_from
            );
        }
        ensure!(
            f.time < leave_at
                || (f.time == leave_at && f.event < tl.firings_of("t_SM").next().unwrap().event),
            "output after leaving P_S"
        );
    }
    ensure!(
        window > 0,
        "structural scenario shows no output inside the window"
    );
    Ok(format!(
        "guarded: 0 of {outputs} scenario outputs and 0 explored edges under invalidity; structural: {window} outputs inside the {}-tick window",
        cfg.delta_s
    ))
}

fn mandatory_escalation(sh: &Shared<'_>) -> Check {
    let cfg = SmartConfig::default();
    let bound = cfg.budget_m + cfg.delta_m.max(cfg.delta_mr);
    let graph = explore(sh.net, &full_config(Branching::Earliest)).map_err(|e| e.to_string())?;
    let f = Formula::BoundedResponse {
        when: g("marked(P_M)"),
        target: g("not marked(P_M)"),
        within: bound,
    };
    let v = check_formula(&graph, &f).map_err(|e| e.to_string())?;
    ensure!(
        v.outcome == Outcome::Pass && v.premise_states > 0,
        "exploration: {:?}",
        v.outcome
    );

    let p_m = sh.net.place_id("P_M").unwrap();
    let conds = [
        (
            "t_MS",
            compile_condition(sh.net, &g("not invalid and not UR")).unwrap(),
        ),
        (
            "t_MA",
            compile_condition(sh.net, &g("assist and not UR")).unwrap(),
        ),
        (
            "t_MR",
            compile_condition(sh.net, &g("UR or not assist")).unwrap(),
        ),
    ];
    let mut exits = 0;
    for e in &graph.edges {
        let EdgeLabel::Fire(t) = e.label else {
            continue;
        };
        let tr = &sh.net.transitions[t];
        if !tr.inputs.iter().any(|&(p, _)| p == p_m) {
            continue;
        }
        exits += 1;
        let (_, c) = conds
            .iter()
            .find(|(n, _)| *n == tr.name)
            .ok_or(format!("P_M left via `{}`", tr.name))?;
        let s = &graph.states[e.src as usize];
        ensure!(
            eval_in_state(c, &s.kernel, &s.values),
            "`{}` fired against its exit condition",
            tr.name
        );
    }

    let mut checked = Vec::new();
    for (name, exit) in [
        ("robot-escalation", "t_MA"),
        ("robot-ur-in-recovery", "t_MR"),
        ("robot-no-assist", "t_MR"),
        ("robot-anomaly", "t_MS"),
    ] {
        let (trace, _) = run(&scenario(name)).map_err(|e| e.to_string())?;
        let enter = first_fire(&trace, "t_SM").ok_or(format!("{name}: never entered P_M"))?;
        let exits_here: Vec<(Time, String)> = fires(&trace)
            .into_iter()
            .filter(|(_, n)| ["t_MS", "t_MA", "t_MR"].contains(&n.as_str()))
            .collect();
        ensure!(
            exits_here.len() == 1 && exits_here[0].1 == exit,
            "{name}: exits {exits_here:?}"
        );
        ensure!(
            exits_here[0].0 - enter <= bound,
            "{name}: P_M held {} ticks",
            exits_here[0].0 - enter
        );
        ensure!(
            proposition(&trace, Proposition::MandatoryEscalation) == [Outcome::Pass],
            "{name}: monitor disagrees"
        );
        checked.push(format!("{name} {exit}@{}", exits_here[0].0));
    }
    Ok(format!(
        "bound {bound} holds over {} states, {exits} explored exits legal; {}",
        graph.len(),
        checked.join(", ")
    ))
}

fn governance_reachability() -> Check {
    let cfg = SmartConfig::default();
    let bound = cfg
        .delta_sr
        .max(cfg.delta_s + cfg.delta_mr)
        .max(cfg.delta_ar);
    let mut lines = Vec::new();
    for (name, ur_at, release_at) in [
        ("governance-from-stable", 10, 20),
        ("governance-from-recovery", 5, 20),
        ("governance-from-assisted", 10, 20),
    ] {
        let sc = scenario(name);
        let (trace, _) = run(&sc).map_err(|e| e.to_string())?;
        let tl = Timeline::new(&trace).unwrap();
        let a = tl.agent("agent").unwrap().clone();
        let reached = (ur_at..=tl.end)
            .find(|&t| tl.mode_at(&a, t) == Some(Mode::R))
            .ok_or(format!("{name}: P_R never reached"))?;
        ensure!(
            reached - ur_at <= bound,
            "{name}: P_R after {} ticks",
            reached - ur_at
        );
        ensure!(
            (reached..release_at).all(|t| tl.mode_at(&a, t) == Some(Mode::R)),
            "{name}: left P_R before release"
        );
        let rs = first_fire(&trace, "t_RS").ok_or(format!("{name}: no release"))?;
        ensure!(rs >= release_at, "{name}: released at {rs}");
        ensure!(
            proposition(&trace, Proposition::GovernanceReachability) == [Outcome::Pass],
            "{name}: monitor disagrees"
        );
        lines.push(format!("{}+{}", &name[16..], reached - ur_at));
    }
    let mut held = scenario("robot-ur-spike");
    held.doc.stop_on_quiescence = false;
    let (trace, _) = run(&held).map_err(|e| e.to_string())?;
    let tl = Timeline::new(&trace).unwrap();
    let a = tl.agent("agent").unwrap().clone();
    ensure!(tl.end == held.doc.horizon, "run stopped early");
    ensure!(
        (11..=tl.end).all(|t| tl.mode_at(&a, t) == Some(Mode::R)),
        "left P_R without authorization"
    );
    Ok(format!(
        "bound {bound}: entry delays {}; no exit to t={} without ext_auth",
        lines.join(", "),
        tl.end
    ))
}

fn distributed_soundness() -> Check {
    let cfg = SmartConfig::default();
    let (trace, _) = run(&scenario("robot-conflict")).map_err(|e| e.to_string())?;
    ensure!(
        count(&trace, "scout.t_AS") == 0,
        "t_AS fired under disagreement"
    );
    ensure!(
        first_fire(&trace, "scout.t_conflict").is_some(),
        "no conflict recorded"
    );
    let entry = first_fire(&trace, "scout.t_MA").ok_or("scout never assisted")?;
    let ar = first_fire(&trace, "scout.t_AR").ok_or("no t_AR")?;
    ensure!(
        ar - entry <= cfg.budget_a + cfg.delta_ar,
        "t_AR {} ticks after A-entry",
        ar - entry
    );
    ensure!(
        proposition(&trace, Proposition::DistributedSoundness)
            .iter()
            .all(|o| o.is_pass()),
        "monitor disagrees"
    );

    let (ok, _) = run(&scenario("distributed-agreement")).map_err(|e| e.to_string())?;
    let as_at = first_fire(&ok, "scout.t_AS").ok_or("agreement did not return")?;
    let tl = Timeline::new(&ok).unwrap();
    let scout = tl.agent("scout").unwrap().clone();
    ensure!(
        tl.mode_at(&scout, as_at) == Some(Mode::S),
        "scout not back in P_S"
    );
    ensure!(
        count(&ok, "scout.t_AR") == 0,
        "governance despite agreement"
    );
    Ok(format!(
        "conflict: 0 t_AS, t_AR {} ticks after entry; agreement: t_AS at {as_at}",
        ar - entry
    ))
}

fn hysteresis() -> Check {
    let sc = scenario("hysteresis-oscillation");
    let (trace, _) = run(&sc).map_err(|e| e.to_string())?;
    let sm = count(&trace, "t_SM");
    let ms = count(&trace, "t_MS");
    ensure!(sm == 1, "{sm} S->M transitions");
    ensure!(ms <= 1, "{ms} M->S transitions");
    // the first instant U drops to the lower threshold, read from the script
    let h = sc.doc.net.clone();
    let smart_tgpn::sim::NetSource::Builder(smart_tgpn::sim::BuilderSource::Single { config }) = h
    else {
        return Err("unexpected net source".into());
    };
    let down = config.hysteresis.theta_down;
    let calm_from = sc
        .script
        .iter()
        .filter(|a| a.signal == "U")
        .find(|a| a.value.as_real().is_some_and(|u| u <= down))
        .map(|a| a.time)
        .ok_or("U never drops")?;
    let ms_at = first_fire(&trace, "t_MS").ok_or("never returned")?;
    ensure!(
        ms_at >= calm_from + config.hysteresis.debounce_down,
        "returned at {ms_at}, calm from {calm_from}"
    );
    Ok(format!(
        "1 S->M at {}, 1 M->S at {ms_at} (valid from {calm_from})",
        first_fire(&trace, "t_SM").unwrap()
    ))
}

fn interface_hypotheses() -> Check {
    let machine = single_agent_mode_machine(&SmartConfig::default()).unwrap();
    let sub = coordination_subnet("", false);
    let iface = InterfaceSpec::default();
    let r = check_interface(&machine, "P_A", &sub, &iface);
    ensure!(r.all_passed(), "coordination subnet fails: {r:?}");

    // agreement also drops a second token into the exit place
    let mut double = sub.clone();
    double.net.arcs.push(ArcDesc::new("t_agree", "P_A", 1));
    let h1 = check_interface(&machine, "P_A", &double, &iface);
    ensure!(!h1.conservation.passed, "double exit token not detected");

    let mut breach = sub.clone();
    breach.net.arcs.push(ArcDesc::new("t_conflict", "P_R", 1));
    let h2 = check_interface(&machine, "P_A", &breach, &iface);
    ensure!(
        !h2.encapsulation.passed,
        "encapsulation breach not detected"
    );

    let mut loose: Net = machine.clone();
    let t = loose.transition_mut("t_AS").unwrap();
    t.timing = Timing::Weak;
    t.interval = Interval::unbounded(0);
    let h3 = check_interface(&loose, "P_A", &sub, &iface);
    ensure!(
        !h3.exit_determinacy.passed,
        "non-deterministic exit not detected"
    );
    Ok("H1-H3 pass; double token, breach and weak exit each detected".into())
}

fn trigger_sets() -> Check {
    let mut traces = Vec::new();
    for name in REFERENCE_SUITE {
        traces.push(simulate(&scenario(name)).map_err(|e| e.to_string())?);
    }
    let verdicts = suite_triggers(&traces, &|s| s).map_err(|e| e.to_string())?;
    for v in &verdicts {
        ensure!(
            v.completeness.is_empty() && v.soundness.is_empty() && v.non_zeno.is_empty(),
            "{}: {:?}",
            v.agent,
            v
        );
    }
    let episodes: usize = verdicts.iter().map(|v| v.risk_episodes).sum();
    ensure!(episodes > 0, "suite exercised no risk");

    let mut mutant = scenario("robot-ur-spike");
    mutant.net.remove_transitions(&["t_SR"]);
    let trace = simulate(&mutant).map_err(|e| e.to_string())?;
    let mv = suite_triggers(std::slice::from_ref(&trace), &|s| {
        s.without_transitions(&["t_SR"])
    })
    .map_err(|e| e.to_string())?;
    let found: usize = mv.iter().map(|v| v.completeness.len()).sum();
    ensure!(found == 1, "{found} completeness violations on the mutant");
    Ok(format!("default set clean over 6 scenarios ({episodes} risk episodes); t_SR mutant: 1 completeness violation"))
}

fn kernel_conformance() -> Check {
    let zeno = scenario("zeno-loop");
    match simulate(&zeno) {
        Err(RunError::Kernel(KernelError::Zeno { .. })) => {}
        other => return Err(format!("zeno net gave {:?}", other.map(|t| t.events.len()))),
    }

    let mut net = build_single_agent(&SmartConfig::default()).unwrap();
    net.remove_transitions(&["t_SM"]);
    let c = CompiledNet::new(&net).unwrap();
    let cfg = ExploreConfig {
        horizon: 20,
        branching: Branching::Earliest,
        max_flips: Some(1),
        outputs: false,
        ..ExploreConfig::default()
    };
    let graph = explore(&c, &cfg).map_err(|e| e.to_string())?;
    let f = Formula::BoundedResponse {
        when: g("marked(P_S) and invalid and not UR"),
        target: g("not marked(P_S)"),
        within: 2,
    };
    let v = check_formula(&graph, &f).map_err(|e| e.to_string())?;
    ensure!(
        v.outcome == Outcome::Violation,
        "mutant passes: {:?}",
        v.outcome
    );
    let cex = v.counterexample.ok_or("no counterexample")?;
    let r = replay(&c, &cex).map_err(|e| e.to_string())?;
    ensure!(r.matches(), "replay differs: {r:?}");
    // a mutant whose counterexample passes through firings
    let mut no_ma = build_single_agent(&SmartConfig::default()).unwrap();
    no_ma.remove_transitions(&["t_MA"]);
    let c2 = CompiledNet::new(&no_ma).unwrap();
    let g2 = explore(&c2, &cfg).map_err(|e| e.to_string())?;
    let stuck = Formula::BoundedResponse {
        when: g("marked(P_M)"),
        target: g("not marked(P_M)"),
        within: 6,
    };
    let v2 = check_formula(&g2, &stuck).map_err(|e| e.to_string())?;
    let cex2 = v2.counterexample.ok_or("t_MA mutant: no counterexample")?;
    let r2 = replay(&c2, &cex2).map_err(|e| e.to_string())?;
    ensure!(
        !r2.expected.is_empty() && r2.matches(),
        "t_MA mutant replay differs: {r2:?}"
    );
    // the same environment script through the run loop must show the violation
    let mut doc = scenario("robot-mutant-no-sm").doc;
    doc.script = cex
        .script()
        .into_iter()
        .filter(|(time, _, _)| *time <= cex.at)
        .map(|(time, signal, v)| ScriptEntry {
            time,
            signal,
            value: serde_json::Value::Bool(v),
        })
        .collect();
    doc.horizon = cex.at;
    let sc = resolve(doc, None).map_err(|e| e.to_string())?;
    let trace = simulate(&sc).map_err(|e| e.to_string())?;
    let tl = Timeline::new(&trace).unwrap();
    let p1 = smart_tgpn::monitor::check_proposition(&tl, Proposition::BoundedAutonomy).unwrap();
    ensure!(
        p1[0].outcome == Outcome::Violation,
        "replayed script does not violate P1"
    );
    ensure!(
        p1[0].violations[0].to == cex.at,
        "violation at {} instead of {}",
        p1[0].violations[0].to,
        cex.at
    );

    let mut sc = scenario("robot-escalation");
    sc.doc.policy = PolicyKind::Random;
    sc.seed = 1234;
    let a = simulate(&sc).map_err(|e| e.to_string())?.to_jsonl();
    let b = simulate(&sc).map_err(|e| e.to_string())?.to_jsonl();
    ensure!(a == b, "same seed, different traces");
    Ok(format!("Zeno raised; t_SM mutant counterexample at t={} re-violates P1 at the same instant; t_MA mutant counterexample replays {} firings exactly; seeded traces identical", cex.at, r2.expected.len()))
}

fn main() {
    let net = single();
    let shared = Shared {
        net: &net,
        all: OnceLock::new(),
    };
    let criteria: Vec<Criterion<'_>> = vec![
        (
            "mode-token invariant",
            Box::new(|| mode_token_invariant(&shared)),
        ),
        ("bounded autonomy", Box::new(|| bounded_autonomy(&shared))),
        ("output gating", Box::new(|| output_gating(&shared))),
        (
            "mandatory escalation",
            Box::new(|| mandatory_escalation(&shared)),
        ),
        ("governance reachability", Box::new(governance_reachability)),
        ("distributed soundness", Box::new(distributed_soundness)),
        ("hysteresis anti-oscillation", Box::new(hysteresis)),
        ("interface hypotheses", Box::new(interface_hypotheses)),
        ("trigger-set checker", Box::new(trigger_sets)),
        ("kernel conformance", Box::new(kernel_conformance)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
