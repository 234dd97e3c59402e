//! Plain-text rendering of run reports and trace summaries.

use std::fmt::Write;

use crate::verdict::{Finding, Outcome};

use super::run::{RunReport, RunStats};

fn findings(out: &mut String, label: &str, items: &[Finding]) {
    for f in items {
        let _ = writeln!(out, "      {label} [{}..{}] {}", f.from, f.to, f.message);
    }
}

/// Mode residence and switch counts per agent.
pub fn stats_table(stats: &RunStats) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "firings: {}", stats.firings);
    if stats.agents.is_empty() {
        return out;
    }
    let _ = writeln!(
        out,
        "{:<14} {:>6} {:>6} {:>6} {:>6} {:>5} {:>5} {:>5} {:>5} {:>7}",
        "agent", "S", "M", "A", "R", "esc", "gov", "ret", "out", "blocked"
    );
    for a in &stats.agents {
        let r = &a.residence;
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>6} {:>6} {:>6} {:>5} {:>5} {:>5} {:>5} {:>7}",
            a.agent,
            r.stable,
            r.recovery,
            r.assisted,
            r.restricted,
            a.escalations,
            a.governance_entries,
            a.returns_to_stable,
            a.outputs,
            a.blocked_outputs
        );
    }
    out
}

pub fn render_text(r: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "scenario {}  policy={} seed={}",
        r.scenario, r.policy, r.seed
    );
    let _ = writeln!(
        out,
        "ended at t={} ({}) of horizon {}",
        r.end, r.end_reason, r.horizon
    );
    if let Some(t) = &r.trace {
        let _ = writeln!(out, "trace: {t}");
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out.push('\n');
    out.push_str(&stats_table(&r.stats));

    if !r.propositions.is_empty() {
        let _ = writeln!(out, "\npropositions:");
        for v in &r.propositions {
            let who = v
                .agent
                .as_deref()
                .map(|a| format!(" [{a}]"))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "  {:<13} {}{}  (exercised {})",
                v.outcome, v.check, who, v.exercised
            );
            findings(&mut out, "violation", &v.violations);
            findings(&mut out, "note", &v.notes);
        }
    }
    if !r.triggers.is_empty() {
        let _ = writeln!(out, "\ntrigger sets:");
        for t in &r.triggers {
            let _ = writeln!(
                out,
                "  {:<13} agent {}  (risk episodes {})",
                t.outcome, t.agent, t.risk_episodes
            );
            findings(&mut out, "completeness", &t.completeness);
            findings(&mut out, "soundness", &t.soundness);
            findings(&mut out, "non-zeno", &t.non_zeno);
            findings(&mut out, "envelope", &t.envelope);
        }
    }
    if let Some(e) = &r.exploration {
        let _ = writeln!(
            out,
            "\nexploration: {} states, {} edges, {}{}",
            e.states,
            e.edges,
            if e.complete { "complete" } else { "truncated" },
            if e.capped { ", state cap hit" } else { "" }
        );
        let _ = writeln!(out, "  alphabet: {}", e.alphabet.join(", "));
        if e.invariant_violations > 0 {
            let _ = writeln!(out, "  invariant violations: {}", e.invariant_violations);
        }
    }
    if !r.formulas.is_empty() {
        let _ = writeln!(out, "\nformulas:");
        for f in &r.formulas {
            let name = f
                .name
                .as_deref()
                .map(|n| format!("{n}: "))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "  {:<13} {name}{}",
                f.verdict.outcome, f.verdict.formula
            );
            if let Some(n) = &f.verdict.note {
                let _ = writeln!(out, "      note {n}");
            }
            if let Some(c) = &f.verdict.counterexample {
                let firings: Vec<String> = c
                    .firings()
                    .iter()
                    .map(|(t, n)| format!("{n}@{t}"))
                    .collect();
                let _ = writeln!(
                    out,
                    "      counterexample at t={}: {}",
                    c.at,
                    firings.join(" ")
                );
            }
        }
    }
    let _ = writeln!(out, "\noutcome: {}", r.outcome);
    out
}

/// One line per scenario for suite runs.
pub fn suite_line(r: &RunReport) -> String {
    let bad = r
        .propositions
        .iter()
        .filter(|v| v.outcome == Outcome::Violation)
        .map(|v| v.check.as_str())
        .collect::<Vec<_>>();
    let mut line = format!(
        "{:<13} {} (end t={} {})",
        r.outcome, r.scenario, r.end, r.end_reason
    );
    if !bad.is_empty() {
        let _ = write!(line, " violated: {}", bad.join(", "));
    }
    line
}
