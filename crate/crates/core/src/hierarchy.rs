//! Hierarchical refinement of a place by a subnet, and interface checks.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::guard::GuardExpr;
use crate::net::{guard_string, ArcDesc, Bound, Net, Timing};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RefineError {
    #[error("place `{0}` is not refinable")]
    NotRefinable(String),
    #[error("interface names `{0}`, which is not a subnet place")]
    MissingInterfacePlace(String),
    #[error("subnet needs at least one entry and one success-exit place")]
    EmptyInterface,
    #[error("signal `{0}` declared with conflicting definitions")]
    SignalConflict(String),
    #[error("predicate `{0}` defined differently in macro net and subnet")]
    PredicateConflict(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subnet {
    pub net: Net,
    pub entry: Vec<String>,
    pub exit: Vec<String>,
    pub success_exit: Vec<String>,
}

fn one() -> u32 {
    1
}

fn true_guard() -> GuardExpr {
    GuardExpr::Const(true)
}

/// How tokens cross the boundary of a refined place.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceSpec {
    /// Tokens deposited into each entry place per activation.
    #[serde(default = "one")]
    pub in_weight: u32,
    /// Tokens taken from the success-exit place per exit.
    #[serde(default = "one")]
    pub out_weight: u32,
    /// Conjoined to the guard of every transition leaving the refined place.
    #[serde(default = "true_guard", with = "guard_string")]
    pub exit_guard: GuardExpr,
}

impl Default for InterfaceSpec {
    fn default() -> Self {
        InterfaceSpec {
            in_weight: 1,
            out_weight: 1,
            exit_guard: GuardExpr::Const(true),
        }
    }
}

/// Subnet section of a net description file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubnetDesc {
    pub place: String,
    pub net: Net,
    pub entry: Vec<String>,
    pub exit: Vec<String>,
    pub success_exit: Vec<String>,
    #[serde(default)]
    pub interface: InterfaceSpec,
}

impl SubnetDesc {
    pub fn subnet(&self) -> Subnet {
        Subnet {
            net: self.net.clone(),
            entry: self.entry.clone(),
            exit: self.exit.clone(),
            success_exit: self.success_exit.clone(),
        }
    }

    pub fn interface(&self) -> InterfaceSpec {
        self.interface.clone()
    }
}

/// Replaces place `p` of `macro_net` by `sub`, returning the flattened net.
///
/// Arcs into `p` are redirected to the entry places; arcs out of `p` are taken
/// from the success-exit place (one copy of the transition per success exit
/// when there are several). Subnet names that clash with macro names are
/// qualified as `p.name`.
pub fn refine(
    macro_net: &Net,
    p: &str,
    sub: &Subnet,
    iface: &InterfaceSpec,
) -> Result<Net, RefineError> {
    if !macro_net.refinable.iter().any(|r| r == p) {
        return Err(RefineError::NotRefinable(p.to_string()));
    }
    if sub.entry.is_empty() || sub.success_exit.is_empty() {
        return Err(RefineError::EmptyInterface);
    }
    for name in sub.entry.iter().chain(&sub.exit).chain(&sub.success_exit) {
        if !sub.net.has_place(name) {
            return Err(RefineError::MissingInterfacePlace(name.clone()));
        }
    }

    let mut taken: HashSet<String> = macro_net
        .places
        .iter()
        .chain(macro_net.transitions.iter().map(|t| &t.id))
        .filter(|n| n.as_str() != p)
        .cloned()
        .collect();
    let mut rename: HashMap<String, String> = HashMap::new();
    for name in sub
        .net
        .places
        .iter()
        .chain(sub.net.transitions.iter().map(|t| &t.id))
    {
        let mut candidate = name.clone();
        if taken.contains(&candidate) {
            candidate = format!("{p}.{name}");
            let mut k = 2;
            while taken.contains(&candidate) {
                candidate = format!("{p}.{name}#{k}");
                k += 1;
            }
        }
        taken.insert(candidate.clone());
        rename.insert(name.clone(), candidate);
    }
    let rn = |n: &str| rename.get(n).cloned().unwrap_or_else(|| n.to_string());
    let rename_guard = |g: &GuardExpr| g.rename(&|n: &str| rn(n));

    let mut out = Net {
        places: macro_net
            .places
            .iter()
            .filter(|x| x.as_str() != p)
            .cloned()
            .collect(),
        ..Net::default()
    };
    out.places.extend(sub.net.places.iter().map(|x| rn(x)));

    let entries: Vec<String> = sub.entry.iter().map(|x| rn(x)).collect();
    let successes: Vec<String> = sub.success_exit.iter().map(|x| rn(x)).collect();

    let exits_of_p: HashSet<&str> = macro_net
        .arcs
        .iter()
        .filter(|a| a.from == p)
        .map(|a| a.to.as_str())
        .collect();

    for t in &macro_net.transitions {
        if !exits_of_p.contains(t.id.as_str()) {
            out.transitions.push(t.clone());
            continue;
        }
        for s in &successes {
            let mut copy = t.clone();
            if successes.len() > 1 {
                copy.id = format!("{}#{s}", t.id);
            }
            copy.guard = GuardExpr::and([copy.guard, iface.exit_guard.clone()]);
            out.transitions.push(copy);
        }
    }
    out.transitions.extend(sub.net.transitions.iter().map(|t| {
        let mut t = t.clone();
        t.id = rn(&t.id);
        t.guard = rename_guard(&t.guard);
        t
    }));

    let copy_name = |tid: &str, s: &str| {
        if successes.len() > 1 {
            format!("{tid}#{s}")
        } else {
            tid.to_string()
        }
    };
    for a in &macro_net.arcs {
        if a.to == p {
            for e in &entries {
                out.arcs
                    .push(ArcDesc::new(a.from.clone(), e.clone(), iface.in_weight));
            }
        } else if a.from == p {
            for s in &successes {
                out.arcs.push(ArcDesc::new(
                    s.clone(),
                    copy_name(&a.to, s),
                    iface.out_weight,
                ));
            }
        } else if exits_of_p.contains(a.from.as_str()) || exits_of_p.contains(a.to.as_str()) {
            for s in &successes {
                let (from, to) = if exits_of_p.contains(a.from.as_str()) {
                    (copy_name(&a.from, s), a.to.clone())
                } else {
                    (a.from.clone(), copy_name(&a.to, s))
                };
                out.arcs.push(ArcDesc::new(from, to, a.weight));
            }
        } else {
            out.arcs.push(a.clone());
        }
    }
    out.arcs.extend(
        sub.net
            .arcs
            .iter()
            .map(|a| ArcDesc::new(rn(&a.from), rn(&a.to), a.weight)),
    );

    let mut marking: BTreeMap<String, u32> = macro_net
        .initial_marking
        .iter()
        .filter(|(k, _)| k.as_str() != p)
        .map(|(k, v)| (k.clone(), *v))
        .collect();
    for (k, v) in &sub.net.initial_marking {
        *marking.entry(rn(k)).or_default() += v;
    }
    if let Some(&n) = macro_net.initial_marking.get(p) {
        if n > 0 {
            for e in &entries {
                *marking.entry(e.clone()).or_default() += n * iface.in_weight;
            }
        }
    }
    marking.retain(|_, v| *v > 0);
    out.initial_marking = marking;

    out.refinable = macro_net
        .refinable
        .iter()
        .filter(|r| r.as_str() != p)
        .cloned()
        .collect();
    out.refinable
        .extend(sub.net.refinable.iter().map(|x| rn(x)));

    out.signals = macro_net.signals.clone();
    for s in &sub.net.signals {
        match out.signals.iter().find(|x| x.name == s.name) {
            Some(existing) if existing != s => {
                return Err(RefineError::SignalConflict(s.name.clone()))
            }
            Some(_) => {}
            None => out.signals.push(s.clone()),
        }
    }
    out.predicates = macro_net.predicates.clone();
    for (k, v) in &sub.net.predicates {
        let v = rename_guard(v);
        match out.predicates.get(k) {
            Some(existing) if *existing != v => {
                return Err(RefineError::PredicateConflict(k.clone()))
            }
            Some(_) => {}
            None => {
                out.predicates.insert(k.clone(), v);
            }
        }
    }
    out.subnets = macro_net.subnets.clone();
    out.smart = macro_net.smart.clone();
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct HypothesisResult {
    pub passed: bool,
    pub witnesses: Vec<String>,
}

impl HypothesisResult {
    fn from_witnesses(witnesses: Vec<String>) -> Self {
        HypothesisResult {
            passed: witnesses.is_empty(),
            witnesses,
        }
    }
}

/// Verdicts for token conservation (H1), encapsulation (H2) and exit determinacy (H3).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct InterfaceReport {
    pub conservation: HypothesisResult,
    pub encapsulation: HypothesisResult,
    pub exit_determinacy: HypothesisResult,
}

impl InterfaceReport {
    pub fn all_passed(&self) -> bool {
        self.conservation.passed && self.encapsulation.passed && self.exit_determinacy.passed
    }
}

/// Checks whether refining `p` with `sub` preserves the macro net's mode-token claims.
pub fn check_interface(
    macro_net: &Net,
    p: &str,
    sub: &Subnet,
    iface: &InterfaceSpec,
) -> InterfaceReport {
    // H1: the subnet's mode-carrying places hold one token throughout
    let mut h1 = Vec::new();
    if sub.entry.len() != 1 {
        h1.push(format!(
            "expected one entry place, found {}",
            sub.entry.len()
        ));
    }
    if iface.in_weight != 1 {
        h1.push(format!("entry deposits {} tokens", iface.in_weight));
    }
    if iface.out_weight != 1 {
        h1.push(format!("exit extracts {} tokens", iface.out_weight));
    }
    for a in &macro_net.arcs {
        if (a.to == p || a.from == p) && a.weight != 1 {
            h1.push(format!(
                "macro arc `{}` -> `{}` has weight {}",
                a.from, a.to, a.weight
            ));
        }
    }
    let carrying: HashSet<&str> = sub
        .entry
        .iter()
        .chain(&sub.exit)
        .chain(&sub.success_exit)
        .map(String::as_str)
        .collect();
    for t in &sub.net.transitions {
        let net_change: i64 = sub
            .net
            .outputs(&t.id)
            .iter()
            .filter(|(q, _)| carrying.contains(q))
            .map(|&(_, w)| w as i64)
            .sum::<i64>()
            - sub
                .net
                .inputs(&t.id)
                .iter()
                .filter(|(q, _)| carrying.contains(q))
                .map(|&(_, w)| w as i64)
                .sum::<i64>();
        if net_change != 0 {
            h1.push(format!(
                "subnet transition `{}` changes the mode-token count by {net_change:+}",
                t.id
            ));
        }
    }

    // H2: only the interface moves tokens across the boundary
    let mut h2 = Vec::new();
    let macro_places: HashSet<&str> = macro_net
        .places
        .iter()
        .map(String::as_str)
        .filter(|&x| x != p)
        .collect();
    let sub_places: HashSet<&str> = sub.net.places.iter().map(String::as_str).collect();
    for a in &sub.net.arcs {
        for end in [&a.from, &a.to] {
            if macro_places.contains(end.as_str()) && !sub_places.contains(end.as_str()) {
                h2.push(format!(
                    "subnet arc `{}` -> `{}` touches macro place `{end}`",
                    a.from, a.to
                ));
            }
        }
    }
    let internal: HashSet<&str> = sub_places
        .iter()
        .copied()
        .filter(|x| !carrying.contains(x))
        .collect();
    for a in &macro_net.arcs {
        for end in [&a.from, &a.to] {
            if internal.contains(end.as_str()) && !macro_places.contains(end.as_str()) {
                h2.push(format!(
                    "macro arc `{}` -> `{}` reaches subnet internal place `{end}`",
                    a.from, a.to
                ));
            }
        }
    }

    // H3: leaving via a success exit is forced within a finite bound
    let mut h3 = Vec::new();
    let exits: Vec<&str> = macro_net
        .arcs
        .iter()
        .filter(|a| a.from == p)
        .map(|a| a.to.as_str())
        .collect();
    for tid in exits {
        match macro_net.transition(tid) {
            Some(t) if t.timing == Timing::Strong && t.interval.hi != Bound::Inf => {}
            Some(t) => h3.push(format!(
                "exit transition `{}` is {:?} with interval {}",
                t.id, t.timing, t.interval
            )),
            None => {}
        }
    }

    InterfaceReport {
        conservation: HypothesisResult::from_witnesses(h1),
        encapsulation: HypothesisResult::from_witnesses(h2),
        exit_determinacy: HypothesisResult::from_witnesses(h3),
    }
}
