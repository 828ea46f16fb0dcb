//! Latency-Insertion-Method network elements and netlist assembly.
//!
//! A network is built from capacitive nodes (KCL, voltage latency) and
//! inductive branches (KVL, current latency), each optionally carrying
//! dependent sources, plus auxiliary first-order states contributed by
//! device models. Every node voltage, branch current, and auxiliary state
//! becomes one atom; assembly turns the element data into one derivative
//! closure per atom together with the dependency graph, and the same
//! closures back the dense state-space description used by the reference
//! solver.

mod assemble;
mod netlist;

pub use assemble::{assemble, Assembly};
pub use netlist::{
    branch_rate, node_rate, AuxState, ExtraSource, IdealCurrentBranch, IdealVoltageNode,
    LimBranch, LimNode, Netlist, NetlistError, NodeRef, Signal, StateId, StateKind,
};
