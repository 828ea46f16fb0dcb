//! Time-averaged transformer-rectifier load with nonlinear ac/dc coupling.

use crate::lim::{LimBranch, LimNode, Netlist, NetlistError, NodeRef, Signal, StateId};

use super::BusAtoms;

/// Magnitude of the averaged coupling gains: `2 sqrt(3√3 / 2π)`.
fn coupling_gain() -> f64 {
    2.0 * (3.0 * 3.0_f64.sqrt() / (2.0 * std::f64::consts::PI)).sqrt()
}

/// Which algebraic form couples the dc-side voltage to the ac bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingForm {
    /// `v_g = v_q/S_q + v_d/S_d`; singular when either gain vanishes.
    #[default]
    Printed,
    /// `v_g = S_q v_q + S_d v_d`; conserves the averaged power balance.
    PowerConserving,
}

#[derive(Debug, Clone, Copy)]
pub struct RectifierParams {
    /// Firing/phase angle (rad).
    pub phi: f64,
    /// dc-side branch inductance (H, > 0).
    pub l_dc: f64,
    /// dc-side branch resistance (Ω).
    pub r_dc: f64,
    /// dc rail capacitance (F, > 0).
    pub c_dc: f64,
    /// Resistive load conductance on the dc rail (S).
    pub g_load: f64,
    pub coupling: CouplingForm,
    pub current_quantum: f64,
    pub voltage_quantum: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RectifierHandles {
    pub i_dc: StateId,
    pub v_dc: StateId,
}

/// Averaged ac/dc coupling: grid-side current components drawn from the
/// bus and the dc-side driving voltage, in the printed form.
///
/// Returns an error when the phase angle makes either gain vanish, since
/// the dc voltage expression divides by both.
pub fn rectifier_coupling(
    phi: f64,
    i_dc: f64,
    v_d: f64,
    v_q: f64,
) -> Result<(f64, f64, f64), NetlistError> {
    let a = coupling_gain();
    let s_d = a * phi.cos();
    let s_q = -a * phi.sin();
    if s_d.abs() < 1e-12 || s_q.abs() < 1e-12 {
        return Err(NetlistError::SingularCoupling { phi });
    }
    let i_gd = s_d * i_dc;
    let i_gq = s_q * i_dc;
    let v_g = v_q / s_q + v_d / s_d;
    Ok((i_gd, i_gq, v_g))
}

/// Power-conserving alternative for the dc driving voltage.
pub fn rectifier_coupling_power_conserving(phi: f64, i_dc: f64, v_d: f64, v_q: f64) -> (f64, f64, f64) {
    let a = coupling_gain();
    let s_d = a * phi.cos();
    let s_q = -a * phi.sin();
    (s_d * i_dc, s_q * i_dc, s_q * v_q + s_d * v_d)
}

/// Expands the rectifier: a dc branch from ground into the dc rail node,
/// driven by the coupled bus voltage, with the grid-side currents injected
/// into the ac bus as current sources controlled by the dc current.
pub fn expand_rectifier(
    net: &mut Netlist,
    label: &str,
    p: &RectifierParams,
    bus: BusAtoms,
) -> Result<RectifierHandles, NetlistError> {
    let a = coupling_gain();
    let s_d = a * p.phi.cos();
    let s_q = -a * p.phi.sin();
    if p.coupling == CouplingForm::Printed && (s_d.abs() < 1e-12 || s_q.abs() < 1e-12) {
        return Err(NetlistError::SingularCoupling { phi: p.phi });
    }
    let (t_q, t_d) = match p.coupling {
        CouplingForm::Printed => (1.0 / s_q, 1.0 / s_d),
        CouplingForm::PowerConserving => (s_q, s_d),
    };
    let v_dc = net.add_node(LimNode {
        label: format!("{label}.vdc"),
        c: p.c_dc,
        g: p.g_load,
        h: Signal::Const(0.0),
        vccs: vec![],
        cccs: vec![],
        extra: None,
        quantum: p.voltage_quantum,
    });
    let i_dc = net.add_branch(LimBranch {
        label: format!("{label}.idc"),
        from: NodeRef::Ground,
        to: NodeRef::Node(v_dc),
        l: p.l_dc,
        r: p.r_dc,
        e: Signal::Const(0.0),
        gain: Signal::Const(1.0),
        vcvs: vec![(NodeRef::Node(bus.q), t_q), (NodeRef::Node(bus.d), t_d)],
        ccvs: vec![],
        extra: None,
        quantum: p.current_quantum,
    });
    // Grid-side currents are drawn from the bus: negative injections.
    net.node_mut(bus.q).cccs.push((i_dc, -s_q));
    net.node_mut(bus.d).cccs.push((i_dc, -s_d));
    Ok(RectifierHandles { i_dc, v_dc })
}
