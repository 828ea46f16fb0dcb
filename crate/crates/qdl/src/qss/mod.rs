//! LIQSS1 integration kernel.
//!
//! Each state variable is owned by a [`QdlAtom`]: a unit that stores the
//! continuous internal value `x`, the quantized output `q`, and the event
//! schedule for the variable. Atoms interact only through their quantized
//! outputs, so a variable whose motion stays inside its quantum band never
//! disturbs its neighbours. The simulation loop processes internal events
//! (an atom's own state reaching the quantum band edge) and external events
//! (a neighbour's quantized output changing) in deterministic time order.

mod atom;
mod engine;
mod queue;

pub use atom::{
    liqss1_select_q, time_to_boundary, DerivativeClosure, QSelection, QdlAtom,
};
pub use engine::{
    run, EngineConfig, EngineError, EventLog, EventRecord, GridSamples, InputEvent, QdlSystem,
    RecordingMode, RunResult, RunStats,
};
pub use queue::EventQueue;

/// Index of a state atom within an assembled system.
pub type AtomId = usize;

/// Index of an external input slot (disturbance target).
pub type InputId = usize;
