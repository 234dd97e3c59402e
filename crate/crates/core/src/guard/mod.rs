//! Runtime signals and the guard expression language.

pub mod eval;
pub mod expr;
pub mod parse;
pub mod signals;

pub use eval::{
    eval_guard, held_for, EvalContext, Guard, GuardCompiler, GuardEnv, GuardError, HeldSlot,
    MarkingHistory, PlaceId,
};
pub use expr::{CmpOp, GuardExpr};
pub use parse::{parse_guard, GuardParseError};
pub use signals::{
    SignalCatalog, SignalDecl, SignalError, SignalId, SignalKind, SignalState, SignalValues, Value,
};
