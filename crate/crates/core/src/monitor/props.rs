//! Trace checks for the five SMART guarantees.

use serde::{Deserialize, Serialize};

use crate::guard::{parse_guard, GuardExpr};
use crate::net::Role;
use crate::smart::{AgentRoles, Gating};
use crate::verdict::{Finding, Verdict};
use crate::Time;

use super::trace::{runs, MonitorError, Timeline};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Proposition {
    /// Stable mode is left within Δ_S of persistent invalidity.
    #[serde(rename = "P1")]
    BoundedAutonomy,
    /// No output under invalidity or outside the stable mode.
    #[serde(rename = "P2")]
    OutputGating,
    /// Recovery mode ends within its budget via a legal exit.
    #[serde(rename = "P3")]
    MandatoryEscalation,
    /// Unrecoverability reaches the restricted mode, which then absorbs.
    #[serde(rename = "P4")]
    GovernanceReachability,
    /// Disagreement blocks the assisted return and forces governance.
    #[serde(rename = "P5")]
    DistributedSoundness,
}

impl Proposition {
    pub const ALL: [Proposition; 5] = [
        Proposition::BoundedAutonomy,
        Proposition::OutputGating,
        Proposition::MandatoryEscalation,
        Proposition::GovernanceReachability,
        Proposition::DistributedSoundness,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Proposition::BoundedAutonomy => "P1",
            Proposition::OutputGating => "P2",
            Proposition::MandatoryEscalation => "P3",
            Proposition::GovernanceReachability => "P4",
            Proposition::DistributedSoundness => "P5",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Proposition::BoundedAutonomy => "bounded autonomy",
            Proposition::OutputGating => "output gating",
            Proposition::MandatoryEscalation => "mandatory escalation",
            Proposition::GovernanceReachability => "governance reachability",
            Proposition::DistributedSoundness => "distributed soundness",
        }
    }
}

impl std::fmt::Display for Proposition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for Proposition {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Proposition::ALL
            .into_iter()
            .find(|p| p.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown proposition `{s}` (expected P1..P5)"))
    }
}

/// Runs one proposition check; agent-scoped checks yield one verdict per agent.
pub fn check_proposition(tl: &Timeline, p: Proposition) -> Result<Vec<Verdict>, MonitorError> {
    if p == Proposition::OutputGating {
        return Ok(vec![check_output_gating(tl)?]);
    }
    tl.agents()?
        .iter()
        .map(|a| match p {
            Proposition::BoundedAutonomy => check_bounded_autonomy(tl, a),
            Proposition::MandatoryEscalation => check_mandatory_escalation(tl, a),
            Proposition::GovernanceReachability => check_governance_reachability(tl, a),
            Proposition::DistributedSoundness => check_distributed_soundness(tl, a),
            Proposition::OutputGating => unreachable!(),
        })
        .collect()
}

fn label(p: Proposition) -> String {
    format!("{} {}", p.id(), p.title())
}

/// Agent-local expression: names are resolved in the agent's namespace.
pub(crate) fn local(a: &AgentRoles, src: &str) -> GuardExpr {
    let e = parse_guard(src).expect("monitor condition parses");
    if a.prefix.is_empty() {
        e
    } else {
        e.rename(&|n: &str| a.name(n))
    }
}

fn place_marked_series(tl: &Timeline, place: &str) -> Vec<bool> {
    (0..=tl.end).map(|t| tl.marked(place, t)).collect()
}

/// Residence episodes `(entry, exit firing index)` of a place, from the firings.
fn episodes(tl: &Timeline, place: &str) -> Vec<(Time, Option<usize>)> {
    let Some(p) = tl.net.place_id(place) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut open = (tl.net.initial_marking[p] > 0).then_some(0);
    for (i, f) in tl.firings.iter().enumerate() {
        if f.pre[p] == 0 && f.post[p] > 0 {
            open = Some(f.time);
        } else if f.pre[p] > 0 && f.post[p] == 0 {
            if let Some(e) = open.take() {
                out.push((e, Some(i)));
            }
        }
    }
    if let Some(e) = open {
        out.push((e, None));
    }
    out
}

pub fn check_bounded_autonomy(tl: &Timeline, a: &AgentRoles) -> Result<Verdict, MonitorError> {
    let cfg = &a.config;
    let d = cfg.delta_s;
    let cond = if cfg.hysteresis.enabled {
        local(
            a,
            &format!(
                "held_for(invalid_up, {}) and not UR",
                cfg.hysteresis.debounce_up
            ),
        )
    } else {
        local(a, "invalid and not UR")
    };
    let c = tl.series(&cond)?;
    let in_s = place_marked_series(tl, &a.modes.stable);
    let s_id = tl.net.place_id(&a.modes.stable);
    let marked_before = |t: Time| t == 0 || in_s[t as usize - 1];
    let exercised = (0..=tl.end)
        .filter(|&t| c[t as usize] && (marked_before(t) || in_s[t as usize]))
        .count();

    let mut bad = vec![false; c.len()];
    for u in d..=tl.end {
        let ui = u as usize;
        let resident = s_id
            .and_then(|p| tl.history.residence(p, u))
            .is_some_and(|r| r >= d);
        bad[ui] = in_s[ui] && resident && c[(u - d) as usize..=ui].iter().all(|&b| b);
    }
    let violations = runs(&bad)
        .into_iter()
        .map(|(u, _)| {
            Finding::new(
                u - d,
                u,
                format!(
                    "`{cond}` held from {} but {} was still marked at {u}",
                    u - d,
                    a.modes.stable
                ),
            )
        })
        .collect();
    let end = tl.end as usize;
    let pending = in_s[end] && c[end];
    Ok(Verdict::decide(
        label(Proposition::BoundedAutonomy),
        Some(a.id.clone()),
        exercised,
        violations,
        vec![],
        pending,
    ))
}

pub fn check_output_gating(tl: &Timeline) -> Result<Verdict, MonitorError> {
    let agents = tl.agents()?;
    let mut violations = Vec::new();
    let mut notes = Vec::new();
    let mut exercised = 0;
    for f in &tl.firings {
        if tl.net.transitions[f.transition].role != Role::Output {
            continue;
        }
        exercised += 1;
        let name = tl.name_of(f);
        let Some(a) = agents.iter().find(|a| a.outputs.iter().any(|o| o == name)) else {
            violations.push(
                Finding::new(f.time, f.time, format!("`{name}` is an output of no agent"))
                    .with_events(vec![f.event]),
            );
            continue;
        };
        let s = tl
            .net
            .place_id(&a.modes.stable)
            .expect("stable place exists");
        if f.pre[s] == 0 {
            violations.push(
                Finding::new(
                    f.time,
                    f.time,
                    format!("`{name}` fired while {} was empty", a.modes.stable),
                )
                .with_events(vec![f.event]),
            );
        }
        let invalid = local(a, "invalid");
        if !tl.holds(&invalid, f.time)? {
            continue;
        }
        let mut since = f.time;
        while since > 0 && tl.holds(&invalid, since - 1)? {
            since -= 1;
        }
        let within = f.time - since <= a.config.delta_s;
        match a.config.gating {
            Gating::Structural if within => notes.push(
                Finding::new(
                    since,
                    f.time,
                    format!(
                        "`{name}` fired {} ticks into invalidity (bounded window)",
                        f.time - since
                    ),
                )
                .with_events(vec![f.event]),
            ),
            _ => violations.push(
                Finding::new(
                    since,
                    f.time,
                    format!("`{name}` fired while `{invalid}` held"),
                )
                .with_events(vec![f.event]),
            ),
        }
    }
    Ok(Verdict::decide(
        label(Proposition::OutputGating),
        None,
        exercised,
        violations,
        notes,
        false,
    ))
}

/// Instants in `[from, to]` where `esc` holds for longer than `limit` ticks while
/// the place is still marked; returns the first such instant.
fn overdue(esc: &[bool], from: Time, to: Time, limit: Time) -> Option<(Time, Time)> {
    let mut start = None;
    for u in from..=to {
        if esc[u as usize] {
            let s = *start.get_or_insert(u);
            if u - s >= limit {
                return Some((s, u));
            }
        } else {
            start = None;
        }
    }
    None
}

pub fn check_mandatory_escalation(tl: &Timeline, a: &AgentRoles) -> Result<Verdict, MonitorError> {
    let cfg = &a.config;
    let limit = cfg.delta_m.max(cfg.delta_mr);
    let ur = tl.series(&local(a, "UR"))?;
    let invalid = tl.series(&local(a, "invalid"))?;
    let assist = tl.series(&local(a, "assist"))?;
    let eps = episodes(tl, &a.modes.recovery);
    let mut violations = Vec::new();
    let mut pending = false;
    for &(e, exit) in &eps {
        let last = match exit {
            Some(i) => tl.firings[i].time,
            None => tl.end,
        };
        let esc: Vec<bool> = (0..=tl.end)
            .map(|u| ur[u as usize] || (invalid[u as usize] && u >= e + cfg.budget_m))
            .collect();
        // instants where the place is still marked after the instant settles
        let marked_to = if exit.is_some() {
            last.saturating_sub(1)
        } else {
            last
        };
        if (exit.is_none() || last > e) && marked_to >= e {
            if let Some((s, u)) = overdue(&esc, e, marked_to, limit) {
                violations.push(Finding::new(
                    s,
                    u,
                    format!(
                        "{} entered at {e} still marked at {u}, {} ticks after escalation was due",
                        a.modes.recovery,
                        u - s
                    ),
                ));
            }
        }
        let Some(i) = exit else {
            pending |= esc[tl.end as usize];
            continue;
        };
        let f = &tl.firings[i];
        let t = f.time as usize;
        let name = tl.name_of(f);
        let consistent = match a.move_of(name) {
            Some("MS") => !ur[t],
            Some("MA") => assist[t] && !ur[t],
            Some("MR") => ur[t] || !assist[t],
            _ => {
                violations.push(
                    Finding::new(
                        e,
                        f.time,
                        format!(
                            "{} left via `{name}`, not a recovery exit",
                            a.modes.recovery
                        ),
                    )
                    .with_events(vec![f.event]),
                );
                continue;
            }
        };
        if !consistent {
            violations.push(
                Finding::new(
                    e,
                    f.time,
                    format!(
                        "exit `{name}` inconsistent with assist={} UR={}",
                        assist[t] as u8, ur[t] as u8
                    ),
                )
                .with_events(vec![f.event]),
            );
        }
    }
    Ok(Verdict::decide(
        label(Proposition::MandatoryEscalation),
        Some(a.id.clone()),
        eps.len(),
        violations,
        vec![],
        pending,
    ))
}

pub fn check_governance_reachability(
    tl: &Timeline,
    a: &AgentRoles,
) -> Result<Verdict, MonitorError> {
    let bound = a.config.governance_bound();
    let ur = tl.series(&local(a, "UR"))?;
    let ext = tl.series(&local(a, "ext_auth"))?;
    let in_r = place_marked_series(tl, &a.modes.restricted);
    let mut violations = Vec::new();
    let mut pending = false;
    let ur_runs = runs(&ur);
    for &(s, f) in &ur_runs {
        let reached = (s..=f.min(s + bound)).find(|&u| in_r[u as usize]);
        if reached.is_some() {
            continue;
        }
        if f >= s + bound {
            violations.push(Finding::new(
                s,
                s + bound,
                format!(
                    "UR held from {s} but {} not reached by {}",
                    a.modes.restricted,
                    s + bound
                ),
            ));
        } else if f == tl.end {
            pending = true;
        }
    }
    let r = tl.net.place_id(&a.modes.restricted);
    let mut exits = 0;
    for f in &tl.firings {
        let Some(r) = r else { break };
        if f.pre[r] > 0 && f.post[r] == 0 {
            exits += 1;
            let t = f.time as usize;
            if !ext[t] || ur[t] {
                violations.push(
                    Finding::new(
                        f.time,
                        f.time,
                        format!(
                            "`{}` left {} with ext_auth={} UR={}",
                            tl.name_of(f),
                            a.modes.restricted,
                            ext[t] as u8,
                            ur[t] as u8
                        ),
                    )
                    .with_events(vec![f.event]),
                );
            }
        }
    }
    let exercised = ur_runs.len() + exits + in_r.iter().filter(|&&b| b).count().min(1);
    Ok(Verdict::decide(
        label(Proposition::GovernanceReachability),
        Some(a.id.clone()),
        exercised,
        violations,
        vec![],
        pending,
    ))
}

pub fn check_distributed_soundness(tl: &Timeline, a: &AgentRoles) -> Result<Verdict, MonitorError> {
    let cfg = &a.config;
    let disagree = tl.series(&local(a, "disagree"))?;
    let ar_guard = a
        .switch("AR")
        .and_then(|t| tl.net.transition_id(t))
        .map(|t| tl.net.transitions[t].expr.clone())
        .unwrap_or_else(|| local(a, "UR or disagree and timeout_A"));
    let esc = tl.series(&ar_guard)?;
    let mut violations = Vec::new();
    let mut notes = Vec::new();
    let mut pending = false;
    let eps = episodes(tl, &a.modes.assisted);
    for &(e, exit) in &eps {
        let marked_to = match exit {
            Some(i) => tl.firings[i].time.saturating_sub(1),
            None => tl.end,
        };
        let exit_time = exit.map(|i| tl.firings[i].time);
        if exit_time != Some(e) {
            if let Some((s, u)) = overdue(&esc, e, marked_to, cfg.delta_ar) {
                violations.push(Finding::new(
                    s,
                    u,
                    format!(
                        "`{ar_guard}` held from {s} but {} still marked at {u}",
                        a.modes.assisted
                    ),
                ));
            }
        }
        match exit {
            None => pending |= esc[tl.end as usize],
            Some(i) => {
                let f = &tl.firings[i];
                if a.move_of(tl.name_of(f)) == Some("AS") {
                    notes.push(
                        Finding::new(
                            e,
                            f.time,
                            format!("returned to {} after agreement", a.modes.stable),
                        )
                        .with_events(vec![f.event]),
                    );
                }
            }
        }
    }
    if let Some(t_as) = a.switch("AS") {
        for f in tl.firings_of(t_as) {
            if disagree[f.time as usize] {
                violations.push(
                    Finding::new(f.time, f.time, format!("`{t_as}` fired while disagree=1"))
                        .with_events(vec![f.event]),
                );
            }
        }
    }
    Ok(Verdict::decide(
        label(Proposition::DistributedSoundness),
        Some(a.id.clone()),
        eps.len(),
        violations,
        notes,
        pending,
    ))
}
