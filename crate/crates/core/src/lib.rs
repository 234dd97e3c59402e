//! Timed guarded Petri nets with SMART failure-managed autonomy: kernel,
//! guard language, hierarchical refinement, SMART builder, structural
//! analysis, bounded exploration, trace monitors and the scenario runner.

pub mod analysis;
pub mod fixed;
pub mod guard;
pub mod hierarchy;
pub mod kernel;
pub mod monitor;
pub mod net;
pub mod sim;
pub mod smart;
pub mod verdict;

/// Discrete time in ticks.
pub type Time = u64;

pub use fixed::Fixed;
pub use guard::{GuardExpr, SignalState, Value};
pub use kernel::{FiringEvent, KernelError, KernelState, PolicyKind};
pub use net::{CompiledNet, Net, ValidationReport};
pub use smart::{SmartConfig, TriggerSet};
