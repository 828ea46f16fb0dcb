//! Event-driven quantized-state simulation of stiff electrical networks.
//!
//! The engine combines LIQSS1 quantized-state integration with a
//! discrete-event (QDEVS) scheduler, operating on circuits expressed in
//! Latency-Insertion-Method form: capacitive nodes, inductive branches,
//! and dependent sources. A fixed-step Radau IIA integrator over the
//! same equations serves as the benchmark oracle, and the analysis
//! module computes the accuracy and update-intensity metrics used to
//! compare the two.
//!
//! Crate layout:
//!
//! - [`qss`] — atoms, hysteretic quantization, event queue, simulation loop
//! - [`lim`] — generic node/branch elements, netlist assembly, validation
//! - [`devices`] — dq-frame power system component models and the bundled
//!   three-bus microgrid
//! - [`solver`] — dense state-space extraction, equilibrium solve, Radau IIA
//! - [`analysis`] — deviation metrics, zero-phase Butterworth filtering,
//!   spectral estimation, update intensity
//! - [`scenario`] — scenario configuration, disturbance scheduling, and the
//!   full comparison pipeline

pub mod analysis;
pub mod devices;
pub mod error;
pub mod lim;
pub mod qss;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
