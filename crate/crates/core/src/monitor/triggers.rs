//! Trigger-set conditions judged over a collection of traces.

use serde::Serialize;

use crate::smart::{AgentRoles, Mode, TriggerSet};
use crate::verdict::{Finding, Outcome};
use crate::Time;

use super::trace::{runs, MonitorError, Timeline};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TriggerVerdict {
    pub agent: String,
    pub outcome: Outcome,
    /// Risk episodes lasting at least the dwell time.
    pub risk_episodes: usize,
    /// Long risk episodes touching the stable mode with no trigger firing.
    pub completeness: Vec<Finding>,
    /// Governance triggers outside risk, or blocked returns in low-risk stretches.
    pub soundness: Vec<Finding>,
    /// Too many stable/recovery round trips inside one risk episode.
    pub non_zeno: Vec<Finding>,
    /// Stable mode kept under risk for longer than the dwell time.
    pub envelope: Vec<Finding>,
}

impl TriggerVerdict {
    pub fn violation_count(&self) -> usize {
        self.completeness.len() + self.soundness.len() + self.non_zeno.len() + self.envelope.len()
    }
}

fn tagged(tl: &Timeline, f: Finding) -> Finding {
    Finding {
        message: format!("[{}] {}", tl.scenario, f.message),
        ..f
    }
}

/// Checks `ts` for the agent `agent` on every trace.
pub fn check_trigger_set(
    traces: &[Timeline],
    ts: &TriggerSet,
    agent: &str,
) -> Result<TriggerVerdict, MonitorError> {
    let mut v = TriggerVerdict {
        agent: agent.to_string(),
        outcome: Outcome::Pass,
        risk_episodes: 0,
        completeness: Vec::new(),
        soundness: Vec::new(),
        non_zeno: Vec::new(),
        envelope: Vec::new(),
    };
    let mut governance_firings = 0;
    for tl in traces {
        let undeclared = ts.undeclared(&tl.net.desc);
        if let Some(n) = undeclared.iter().next() {
            return Err(MonitorError::Eval {
                expr: ts.risk.to_string(),
                message: format!("`{n}` is not declared by the net"),
            });
        }
        let a = tl.agent(agent)?.clone();
        governance_firings += check_one(tl, ts, &a, &mut v)?;
    }
    v.outcome = if v.violation_count() > 0 {
        Outcome::Violation
    } else if v.risk_episodes == 0 && governance_firings == 0 {
        Outcome::VacuousPass
    } else {
        Outcome::Pass
    };
    Ok(v)
}

fn check_one(
    tl: &Timeline,
    ts: &TriggerSet,
    a: &AgentRoles,
    v: &mut TriggerVerdict,
) -> Result<usize, MonitorError> {
    let risk = tl.series(&ts.risk)?;
    let mode: Vec<Option<Mode>> = (0..=tl.end).map(|t| tl.mode_at(a, t)).collect();
    let in_s_around = |t: Time| {
        mode[t as usize] == Some(Mode::S) || (t > 0 && mode[t as usize - 1] == Some(Mode::S))
    };
    let trigger_times: Vec<Time> = tl
        .firings
        .iter()
        .filter(|f| ts.all().any(|tr| tr.transition == tl.name_of(f)))
        .map(|f| f.time)
        .collect();
    let ms = a.switch("MS").unwrap_or_default();

    for (s, f) in runs(&risk) {
        let len = f - s + 1;
        if len < ts.dwell {
            continue;
        }
        v.risk_episodes += 1;
        let touches_s = (s..=f).any(in_s_around);
        if touches_s && !trigger_times.iter().any(|&t| s <= t && t <= f) {
            v.completeness.push(tagged(
                tl,
                Finding::new(
                    s,
                    f,
                    format!("risk held for {len} ticks from {s} and no trigger fired"),
                ),
            ));
        }
        let micro: Vec<usize> = tl
            .firings_of(ms)
            .filter(|x| s <= x.time && x.time <= f)
            .map(|x| x.event)
            .collect();
        if micro.len() > ts.max_micro_recoveries as usize {
            v.non_zeno.push(tagged(
                tl,
                Finding::new(
                    s,
                    f,
                    format!(
                        "{} returns from recovery inside one risk episode",
                        micro.len()
                    ),
                )
                .with_events(micro),
            ));
        }
        let mut streak = 0;
        for u in s..=f {
            streak = if mode[u as usize] == Some(Mode::S) {
                streak + 1
            } else {
                0
            };
            if streak > ts.dwell {
                v.envelope.push(tagged(
                    tl,
                    Finding::new(
                        u - streak + 1,
                        u,
                        format!("stable mode kept under risk for {streak} ticks"),
                    ),
                ));
                break;
            }
        }
    }

    let mut governance_firings = 0;
    for f in &tl.firings {
        let name = tl.name_of(f);
        if ts.governance.iter().any(|g| g.transition == name) {
            governance_firings += 1;
            if !risk[f.time as usize] {
                v.soundness.push(tagged(
                    tl,
                    Finding::new(
                        f.time,
                        f.time,
                        format!("governance trigger `{name}` fired outside risk"),
                    )
                    .with_events(vec![f.event]),
                ));
            }
        }
    }

    let calm: Vec<bool> = risk.iter().map(|r| !r).collect();
    for (s, f) in runs(&calm) {
        if f - s + 1 < ts.dwell {
            continue;
        }
        let head = s..=s + ts.dwell - 1;
        let stuck_in = |m: Mode| head.clone().all(|u| mode[u as usize] == Some(m));
        let (m, key) = if stuck_in(Mode::M) {
            (Mode::M, "MS")
        } else if stuck_in(Mode::A) {
            (Mode::A, "AS")
        } else {
            continue;
        };
        let returned = (s..=f).any(|u| mode[u as usize] == Some(Mode::S));
        let permitted = match a.switch(key).and_then(|t| tl.net.transition_id(t)) {
            Some(t) => {
                let g = &tl.net.transitions[t].expr;
                let mut any = false;
                for u in s..=f {
                    if tl.holds(g, u)? {
                        any = true;
                        break;
                    }
                }
                any
            }
            None => false,
        };
        if !returned && !permitted {
            v.soundness.push(tagged(
                tl,
                Finding::new(
                    s,
                    f,
                    format!("return from {m} blocked for {} low-risk ticks", f - s + 1),
                ),
            ));
        }
    }
    Ok(governance_firings)
}
