use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::fixed::Fixed;
use crate::Time;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Ge,
    Le,
}

impl CmpOp {
    pub fn holds(self, lhs: Fixed, rhs: Fixed) -> bool {
        match self {
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Le => lhs <= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Ge => ">=",
            CmpOp::Le => "<=",
        }
    }
}

/// Guard expression AST. Identifiers are resolved late: a `Var` names either
/// a boolean signal or a named predicate.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GuardExpr {
    Const(bool),
    Var(String),
    Cmp {
        signal: String,
        op: CmpOp,
        value: Fixed,
    },
    /// At least `count` tokens in `place`.
    Marked {
        place: String,
        count: u32,
    },
    /// `place` has been continuously marked for at least `budget` ticks.
    Timeout {
        place: String,
        budget: Time,
    },
    Not(Box<GuardExpr>),
    And(Vec<GuardExpr>),
    Or(Vec<GuardExpr>),
    HeldFor {
        expr: Box<GuardExpr>,
        duration: Time,
    },
}

impl GuardExpr {
    pub fn var(name: impl Into<String>) -> Self {
        GuardExpr::Var(name.into())
    }

    pub fn marked(place: impl Into<String>) -> Self {
        GuardExpr::Marked {
            place: place.into(),
            count: 1,
        }
    }

    pub fn timeout(place: impl Into<String>, budget: Time) -> Self {
        GuardExpr::Timeout {
            place: place.into(),
            budget,
        }
    }

    pub fn cmp(signal: impl Into<String>, op: CmpOp, value: Fixed) -> Self {
        GuardExpr::Cmp {
            signal: signal.into(),
            op,
            value,
        }
    }

    pub fn held_for(expr: GuardExpr, duration: Time) -> Self {
        GuardExpr::HeldFor {
            expr: Box::new(expr),
            duration,
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: GuardExpr) -> Self {
        match e {
            GuardExpr::Not(inner) => *inner,
            GuardExpr::Const(b) => GuardExpr::Const(!b),
            other => GuardExpr::Not(Box::new(other)),
        }
    }

    /// Conjunction, flattening nested `And`s and dropping `true`.
    pub fn and(parts: impl IntoIterator<Item = GuardExpr>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                GuardExpr::Const(true) => {}
                GuardExpr::Const(false) => return GuardExpr::Const(false),
                GuardExpr::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => GuardExpr::Const(true),
            1 => out.pop().unwrap(),
            _ => GuardExpr::And(out),
        }
    }

    /// Disjunction, flattening nested `Or`s and dropping `false`.
    pub fn or(parts: impl IntoIterator<Item = GuardExpr>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                GuardExpr::Const(false) => {}
                GuardExpr::Const(true) => return GuardExpr::Const(true),
                GuardExpr::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => GuardExpr::Const(false),
            1 => out.pop().unwrap(),
            _ => GuardExpr::Or(out),
        }
    }

    /// Replaces every `Var` naming a predicate with its definition, recursively.
    /// Cycles are left unexpanded at the point of recursion.
    pub fn inline(&self, predicates: &BTreeMap<String, GuardExpr>) -> GuardExpr {
        fn go(
            e: &GuardExpr,
            preds: &BTreeMap<String, GuardExpr>,
            stack: &mut Vec<String>,
        ) -> GuardExpr {
            match e {
                GuardExpr::Var(n) => match preds.get(n) {
                    Some(def) if !stack.contains(n) => {
                        stack.push(n.clone());
                        let r = go(def, preds, stack);
                        stack.pop();
                        r
                    }
                    _ => e.clone(),
                },
                GuardExpr::Not(inner) => GuardExpr::Not(Box::new(go(inner, preds, stack))),
                GuardExpr::And(v) => {
                    GuardExpr::And(v.iter().map(|x| go(x, preds, stack)).collect())
                }
                GuardExpr::Or(v) => GuardExpr::Or(v.iter().map(|x| go(x, preds, stack)).collect()),
                GuardExpr::HeldFor { expr, duration } => GuardExpr::HeldFor {
                    expr: Box::new(go(expr, preds, stack)),
                    duration: *duration,
                },
                other => other.clone(),
            }
        }
        go(self, predicates, &mut Vec::new())
    }

    /// Rewrites identifiers (variables, compared signals and places) through `f`.
    pub fn rename(&self, f: &dyn Fn(&str) -> String) -> GuardExpr {
        match self {
            GuardExpr::Const(b) => GuardExpr::Const(*b),
            GuardExpr::Var(n) => GuardExpr::Var(f(n)),
            GuardExpr::Cmp { signal, op, value } => GuardExpr::Cmp {
                signal: f(signal),
                op: *op,
                value: *value,
            },
            GuardExpr::Marked { place, count } => GuardExpr::Marked {
                place: f(place),
                count: *count,
            },
            GuardExpr::Timeout { place, budget } => GuardExpr::Timeout {
                place: f(place),
                budget: *budget,
            },
            GuardExpr::Not(e) => GuardExpr::Not(Box::new(e.rename(f))),
            GuardExpr::And(v) => GuardExpr::And(v.iter().map(|e| e.rename(f)).collect()),
            GuardExpr::Or(v) => GuardExpr::Or(v.iter().map(|e| e.rename(f)).collect()),
            GuardExpr::HeldFor { expr, duration } => GuardExpr::HeldFor {
                expr: Box::new(expr.rename(f)),
                duration: *duration,
            },
        }
    }

    /// Names used as variables or compared signals (not expanded through predicates).
    pub fn identifiers(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |e| match e {
            GuardExpr::Var(n) => {
                out.insert(n.clone());
            }
            GuardExpr::Cmp { signal, .. } => {
                out.insert(signal.clone());
            }
            _ => {}
        });
        out
    }

    /// Places referenced by `marked` / `timeout` atoms.
    pub fn places(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |e| match e {
            GuardExpr::Marked { place, .. } | GuardExpr::Timeout { place, .. } => {
                out.insert(place.clone());
            }
            _ => {}
        });
        out
    }

    pub fn walk(&self, f: &mut dyn FnMut(&GuardExpr)) {
        f(self);
        match self {
            GuardExpr::Not(e) => e.walk(f),
            GuardExpr::HeldFor { expr, .. } => expr.walk(f),
            GuardExpr::And(v) | GuardExpr::Or(v) => v.iter().for_each(|e| e.walk(f)),
            _ => {}
        }
    }

    /// True for guards that can never change value (no signals, places or clocks).
    pub fn is_constant(&self) -> bool {
        let mut constant = true;
        self.walk(&mut |e| {
            if !matches!(
                e,
                GuardExpr::Const(_) | GuardExpr::Not(_) | GuardExpr::And(_) | GuardExpr::Or(_)
            ) {
                constant = false;
            }
        });
        constant
    }

    /// Top-level disjuncts (the expression itself if not an `Or`).
    pub fn disjuncts(&self) -> Vec<&GuardExpr> {
        match self {
            GuardExpr::Or(v) => v.iter().collect(),
            e => vec![e],
        }
    }

    /// Top-level conjuncts (the expression itself if not an `And`).
    pub fn conjuncts(&self) -> Vec<&GuardExpr> {
        match self {
            GuardExpr::And(v) => v.iter().collect(),
            e => vec![e],
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            GuardExpr::Or(_) => 1,
            GuardExpr::And(_) => 2,
            _ => 3,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &GuardExpr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for GuardExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GuardExpr::Const(b) => write!(f, "{b}"),
            GuardExpr::Var(n) => write!(f, "{n}"),
            GuardExpr::Cmp { signal, op, value } => write!(f, "{signal} {} {value}", op.symbol()),
            GuardExpr::Marked { place, count: 1 } => write!(f, "marked({place})"),
            GuardExpr::Marked { place, count } => write!(f, "marked({place}, {count})"),
            GuardExpr::Timeout { place, budget } => write!(f, "timeout({place}, {budget})"),
            GuardExpr::Not(e) => {
                f.write_str("not ")?;
                write_child(f, e, 3)
            }
            GuardExpr::And(v) | GuardExpr::Or(v) => {
                let (sep, prec) = if matches!(self, GuardExpr::And(_)) {
                    (" and ", 3)
                } else {
                    (" or ", 2)
                };
                if v.is_empty() {
                    return write!(f, "{}", matches!(self, GuardExpr::And(_)));
                }
                for (i, e) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    write_child(f, e, prec)?;
                }
                Ok(())
            }
            GuardExpr::HeldFor { expr, duration } => write!(f, "held_for({expr}, {duration})"),
        }
    }
}
