use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::guard::{GuardCompiler, SignalCatalog};

use super::{Bound, Net, Timing};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
    pub info: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Structural well-formedness report. Embedded subnets are flattened first.
pub fn validate_net(net: &Net) -> ValidationReport {
    let mut r = ValidationReport::default();
    let flat;
    let net = if net.subnets.is_empty() {
        net
    } else {
        match net.flatten() {
            Ok(n) => {
                flat = n;
                &flat
            }
            Err(e) => {
                r.errors.push(e.to_string());
                return r;
            }
        }
    };

    let mut places = HashSet::new();
    for p in &net.places {
        if !places.insert(p.as_str()) {
            r.errors.push(format!("duplicate place `{p}`"));
        }
    }
    let mut transitions = HashSet::new();
    for t in &net.transitions {
        if !transitions.insert(t.id.as_str()) {
            r.errors.push(format!("duplicate transition `{}`", t.id));
        }
        if places.contains(t.id.as_str()) {
            r.errors
                .push(format!("`{}` names both a place and a transition", t.id));
        }
    }

    for a in &net.arcs {
        let from_p = places.contains(a.from.as_str());
        let from_t = transitions.contains(a.from.as_str());
        let to_p = places.contains(a.to.as_str());
        let to_t = transitions.contains(a.to.as_str());
        if !(from_p || from_t) || !(to_p || to_t) {
            let missing = if !(from_p || from_t) { &a.from } else { &a.to };
            r.errors.push(format!(
                "dangling arc `{}` -> `{}`: `{missing}` is not a place or transition",
                a.from, a.to
            ));
            continue;
        }
        if (from_p && to_p) || (from_t && to_t) {
            r.errors.push(format!(
                "arc `{}` -> `{}` must connect a place and a transition",
                a.from, a.to
            ));
        }
        if a.weight == 0 {
            r.errors
                .push(format!("zero arc weight on `{}` -> `{}`", a.from, a.to));
        }
    }

    for p in net.initial_marking.keys() {
        if !places.contains(p.as_str()) {
            r.errors
                .push(format!("initial marking names unknown place `{p}`"));
        }
    }
    for p in &net.refinable {
        if !places.contains(p.as_str()) {
            r.errors
                .push(format!("refinable names unknown place `{p}`"));
        }
    }

    let catalog = match SignalCatalog::new(net.signals.clone()) {
        Ok(c) => c,
        Err(e) => {
            r.errors.push(e.to_string());
            SignalCatalog::default()
        }
    };
    let place_index: HashMap<String, usize> = net
        .places
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), i))
        .collect();
    for name in net.predicates.keys() {
        if catalog.id(name).is_some() {
            r.errors
                .push(format!("predicate `{name}` shadows a declared signal"));
        }
    }
    let mut compiler = GuardCompiler::new(&catalog, &place_index, &net.predicates);
    for (name, def) in &net.predicates {
        if let Err(e) = compiler.compile(def) {
            r.errors.push(format!("predicate `{name}`: {e}"));
        }
    }

    for t in &net.transitions {
        if t.timing == Timing::Strong && t.interval.hi == Bound::Inf {
            r.errors.push(format!(
                "strong timing requires finite latest time (transition `{}`)",
                t.id
            ));
        }
        if let Bound::Finite(hi) = t.interval.hi {
            if t.interval.lo > hi {
                r.errors.push(format!(
                    "transition `{}` has empty firing interval {}",
                    t.id, t.interval
                ));
            }
        }
        if let Err(e) = compiler.compile(&t.guard) {
            r.errors.push(format!("guard of `{}`: {e}", t.id));
        }
        if net.inputs(&t.id).is_empty() {
            r.info
                .push(format!("transition `{}` has no input places", t.id));
        }
        if t.interval.lo > 0 && !t.guard.is_constant() {
            r.warnings.push(format!(
                "transition `{}` has earliest time {} and a guard that may drop before it can fire",
                t.id, t.interval.lo
            ));
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guard::GuardExpr;
    use crate::net::{ArcDesc, Interval, Role, TransitionDesc};

    fn tiny() -> Net {
        Net {
            places: vec!["p".into(), "q".into()],
            transitions: vec![TransitionDesc::new(
                "t",
                GuardExpr::Const(true),
                Interval::new(0, 1),
                Timing::Strong,
                Role::Internal,
            )],
            arcs: vec![ArcDesc::new("p", "t", 1), ArcDesc::new("t", "q", 1)],
            ..Net::default()
        }
    }

    #[test]
    fn well_formed_net_has_no_errors() {
        assert!(validate_net(&tiny()).is_ok());
    }

    #[test]
    fn dangling_arc_reported() {
        let mut n = tiny();
        n.arcs.push(ArcDesc::new("t", "missing", 1));
        let r = validate_net(&n);
        assert!(r.errors.iter().any(|e| e.contains("dangling arc")), "{r:?}");
    }

    #[test]
    fn strong_unbounded_reported() {
        let mut n = tiny();
        n.transitions[0].interval = Interval::unbounded(0);
        let r = validate_net(&n);
        assert!(r
            .errors
            .iter()
            .any(|e| e.contains("strong timing requires finite latest time")));
    }

    #[test]
    fn zero_weight_and_source_transitions() {
        let mut n = tiny();
        n.arcs[0].weight = 0;
        n.transitions.push(TransitionDesc::new(
            "src",
            GuardExpr::Const(true),
            Interval::unbounded(0),
            Timing::Weak,
            Role::Internal,
        ));
        let r = validate_net(&n);
        assert!(r.errors.iter().any(|e| e.contains("zero arc weight")));
        assert!(r
            .info
            .iter()
            .any(|e| e.contains("`src` has no input places")));
    }

    #[test]
    fn undeclared_guard_signal_reported() {
        let mut n = tiny();
        n.transitions[0].guard = GuardExpr::var("ghost");
        let r = validate_net(&n);
        assert!(r.errors.iter().any(|e| e.contains("ghost")));
    }
}
