//! Lumped-π cable in the rotating frame (dynamic-phasor form).

use crate::lim::{LimBranch, Netlist, NodeRef, Signal, StateId};

use super::BusAtoms;

/// Parameters of one π-section cable.
#[derive(Debug, Clone, Copy)]
pub struct CableParams {
    /// Series resistance (Ω).
    pub r: f64,
    /// Series inductance (H, > 0).
    pub l: f64,
    /// Total shunt capacitance (F, > 0); one half lands on each end bus.
    pub c: f64,
    /// Total shunt conductance (S).
    pub g: f64,
    /// Synchronous frame speed (rad/s).
    pub w: f64,
    /// Quantum for the branch-current atoms (A).
    pub current_quantum: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CableHandles {
    pub i_d: StateId,
    pub i_q: StateId,
}

/// Expands a cable between two buses: one series branch per axis with the
/// rotating-frame cross coupling realised as current-controlled voltage
/// sources, plus half-capacitance contributions merged into the end bus
/// nodes (capacitance, shunt conductance, and the matching `∓ωC/2`
/// cross-axis current sources).
pub fn expand_cable(
    net: &mut Netlist,
    label: &str,
    p: &CableParams,
    bus1: BusAtoms,
    bus2: BusAtoms,
) -> CableHandles {
    let i_d = net.add_branch(LimBranch {
        label: format!("{label}.id"),
        from: NodeRef::Node(bus1.d),
        to: NodeRef::Node(bus2.d),
        l: p.l,
        r: p.r,
        e: Signal::Const(0.0),
        gain: Signal::Const(1.0),
        vcvs: vec![],
        ccvs: vec![],
        extra: None,
        quantum: p.current_quantum,
    });
    let i_q = net.add_branch(LimBranch {
        label: format!("{label}.iq"),
        from: NodeRef::Node(bus1.q),
        to: NodeRef::Node(bus2.q),
        l: p.l,
        r: p.r,
        e: Signal::Const(0.0),
        gain: Signal::Const(1.0),
        vcvs: vec![],
        ccvs: vec![(i_d, -p.w * p.l)],
        extra: None,
        quantum: p.current_quantum,
    });
    net.branch_mut(i_d).ccvs.push((i_q, p.w * p.l));

    // Half capacitance at each end, with the frame cross terms scaled to
    // the added capacitance so node totals stay consistent.
    let c2 = p.c / 2.0;
    let g2 = p.g / 2.0;
    for bus in [bus1, bus2] {
        let nd = net.node_mut(bus.d);
        nd.c += c2;
        nd.g += g2;
        nd.vccs.push((NodeRef::Node(bus.q), p.w * c2));
        let nq = net.node_mut(bus.q);
        nq.c += c2;
        nq.g += g2;
        nq.vccs.push((NodeRef::Node(bus.d), -p.w * c2));
    }
    CableHandles { i_d, i_q }
}
