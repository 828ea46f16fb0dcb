//! Series RL load: two LIM branches to ground in the dq frame.

use crate::lim::{LimBranch, Netlist, NodeRef, Signal, StateId};
use crate::qss::InputId;

use super::BusAtoms;

#[derive(Debug, Clone, Copy)]
pub struct RlLoadParams {
    /// Series resistance (Ω).
    pub r: f64,
    /// Series inductance (H, > 0).
    pub l: f64,
    /// Synchronous frame speed (rad/s).
    pub w: f64,
    pub current_quantum: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RlHandles {
    pub i_d: StateId,
    pub i_q: StateId,
}

/// Expands the RL load as two grounded branches with rotating-frame cross
/// coupling.
///
/// `power_scale` is an optional input multiplying the terminal-voltage
/// drive. Scaling the drive by k is identical to scaling the load
/// admittance (dividing both R and L) by k, so at a fixed bus voltage the
/// consumed active and reactive power scale linearly in k with the power
/// factor unchanged. A +20 % active power step is therefore a step of this
/// input from 1.0 to 1.2.
pub fn expand_rl_load(
    net: &mut Netlist,
    label: &str,
    p: &RlLoadParams,
    bus: BusAtoms,
    power_scale: Option<InputId>,
) -> RlHandles {
    let gain = match power_scale {
        Some(k) => Signal::Input(k),
        None => Signal::Const(1.0),
    };
    let i_d = net.add_branch(LimBranch {
        label: format!("{label}.id"),
        from: NodeRef::Node(bus.d),
        to: NodeRef::Ground,
        l: p.l,
        r: p.r,
        e: Signal::Const(0.0),
        gain,
        vcvs: vec![],
        ccvs: vec![],
        extra: None,
        quantum: p.current_quantum,
    });
    let i_q = net.add_branch(LimBranch {
        label: format!("{label}.iq"),
        from: NodeRef::Node(bus.q),
        to: NodeRef::Ground,
        l: p.l,
        r: p.r,
        e: Signal::Const(0.0),
        gain,
        vcvs: vec![],
        ccvs: vec![(i_d, -p.w * p.l)],
        extra: None,
        quantum: p.current_quantum,
    });
    net.branch_mut(i_d).ccvs.push((i_q, p.w * p.l));
    RlHandles { i_d, i_q }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lim::{assemble, LimNode};

    fn fixture(scale: bool) -> (crate::lim::Assembly, BusAtoms, RlHandles, Option<InputId>) {
        let mut net = Netlist::new();
        let k = if scale {
            Some(net.input("load.scale", 1.0))
        } else {
            None
        };
        let d = net.add_node(LimNode {
            label: "bus.vd".into(),
            c: 1e-4,
            g: 0.0,
            h: Signal::Const(0.0),
            vccs: vec![],
            cccs: vec![],
            extra: None,
            quantum: 1e-3,
        });
        let q = net.add_node(LimNode {
            label: "bus.vq".into(),
            c: 1e-4,
            g: 0.0,
            h: Signal::Const(0.0),
            vccs: vec![],
            cccs: vec![],
            extra: None,
            quantum: 1e-3,
        });
        let bus = BusAtoms { d, q };
        let p = RlLoadParams {
            r: 40.0,
            l: 0.1,
            w: 377.0,
            current_quantum: 1e-2,
        };
        let h = expand_rl_load(&mut net, "rl", &p, bus, k);
        (assemble(&net).unwrap(), bus, h, k)
    }

    #[test]
    fn grounded_branch_steady_state() {
        // Constant dq current satisfying v = (R + jωL) i is stationary.
        let (asm, bus, h, _) = fixture(false);
        let (r, l, w) = (40.0, 0.1, 377.0);
        let (i_d, i_q) = (3.0, -4.0);
        let mut state = vec![0.0; asm.n()];
        state[bus.d] = r * i_d - w * l * i_q;
        state[bus.q] = r * i_q + w * l * i_d;
        state[h.i_d] = i_d;
        state[h.i_q] = i_q;
        assert!(asm.system.closures[h.i_d].eval(&state, &[]).abs() < 1e-9);
        assert!(asm.system.closures[h.i_q].eval(&state, &[]).abs() < 1e-9);
    }

    #[test]
    fn power_scale_multiplies_drive_only() {
        // With the admittance scale k, the drive term scales but the back
        // terms (resistive drop and cross coupling) do not.
        let (asm, bus, h, k) = fixture(true);
        let mut state = vec![0.0; asm.n()];
        state[bus.q] = 1000.0;
        state[h.i_q] = 2.0;
        state[h.i_d] = 1.0;
        let u1 = vec![1.0];
        let u2 = vec![1.2];
        let f1 = asm.system.closures[h.i_q].eval(&state, &u1);
        let f2 = asm.system.closures[h.i_q].eval(&state, &u2);
        // Difference is exactly 0.2 * v_q / L.
        assert!((f2 - f1 - 0.2 * 1000.0 / 0.1).abs() < 1e-9);
        assert_eq!(asm.system.closures[h.i_q].input_deps(), &[k.unwrap()]);
    }
}
