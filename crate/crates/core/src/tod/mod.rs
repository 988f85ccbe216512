//! Task-oriented continuation after the transition turn: splicing a sampled
//! SGD dialogue, or letting two simulators talk until a stop condition.

mod index;
mod simulate;
mod termination;

pub use index::{index_sgd, merge_continuation, IndexedDialogue, SgdIndex, TodError};
pub use simulate::{simulate_continuation, simulate_continuation_from, SimulationError};
pub use termination::{
    should_terminate, RepetitionRule, TerminationKind, TerminationPolicy, TerminationReason,
};
