//! dq-frame power system component models.
//!
//! Every component expands into LIM nodes/branches plus auxiliary
//! first-order states. All electrical quantities live in a synchronous
//! rotating reference frame, so balanced sinusoidal operation maps to
//! constant states and the quantized engine is silent at steady state.
//!
//! Conventions used throughout:
//!
//! - complex envelope `v_d + j v_q`; the q-axis equation of an inductance
//!   carries `-ω L i_d` and the d-axis `+ω L i_q` (dually `∓ ω C v` for
//!   capacitances);
//! - branch currents are oriented from the bus into the device, so a
//!   device drawing power has positive branch current;
//! - machine models use the motor convention (stator current into the
//!   machine positive); a generator simply operates at negative stator
//!   current and negative torque.

mod cable;
mod exciter;
mod governor;
mod induction_machine;
pub mod microgrid;
mod rectifier;
mod rl_load;
mod sync_machine;

pub use cable::{expand_cable, CableHandles, CableParams};
pub use exciter::{exciter_rates, expand_exciter, ExciterHandles, ExciterParams};
pub use governor::{expand_governor, governor_torque, GovernorParams};
pub use induction_machine::{
    expand_induction_machine, induction_machine_rates, ImHandles, InductionMachineParams,
};
pub use microgrid::{Microgrid, MicrogridParams, QuantaDefaults};
pub use rectifier::{
    expand_rectifier, rectifier_coupling, rectifier_coupling_power_conserving, CouplingForm,
    RectifierHandles, RectifierParams,
};
pub use rl_load::{expand_rl_load, RlHandles, RlLoadParams};
pub use sync_machine::{
    expand_sync_machine, sync_machine_rates, SmHandles, SmRates, SyncMachineParams,
};

/// Direct- and quadrature-axis component pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DqValue {
    pub d: f64,
    pub q: f64,
}

impl DqValue {
    pub fn new(d: f64, q: f64) -> Self {
        Self { d, q }
    }

    /// Magnitude of the rotating-frame envelope.
    pub fn magnitude(&self) -> f64 {
        (self.d * self.d + self.q * self.q).sqrt()
    }
}

/// The d and q node atoms of a bus.
#[derive(Debug, Clone, Copy)]
pub struct BusAtoms {
    pub d: crate::lim::StateId,
    pub q: crate::lim::StateId,
}
