//! Simplified AC8B-style voltage regulator and exciter.
//!
//! Three internal PID states plus a first-order exciter stage produce the
//! per-unit field voltage from the regulation error `V_ref − v_t,pu`. The
//! integral path forces the terminal voltage onto the setpoint at
//! equilibrium, which makes the setpoint the natural disturbance target.

use crate::lim::{AuxState, ExtraSource, Netlist, StateId};
use crate::qss::InputId;

use super::BusAtoms;

#[derive(Debug, Clone, Copy)]
pub struct ExciterParams {
    pub k_pr: f64,
    pub k_ir: f64,
    pub k_dr: f64,
    /// Transducer/derivative filter time constant (s, > 0).
    pub t_dr: f64,
    /// Regulator gain and time constant.
    pub k_a: f64,
    pub t_a: f64,
    /// Exciter feedback gain and time constant.
    pub k_e: f64,
    pub t_e: f64,
    /// Voltage setpoint (pu); the default value of the setpoint input.
    pub v_ref: f64,
    /// Base line-line RMS voltage (V) for the per-unit conversions.
    pub v_base_ll: f64,
    pub state_quantum: f64,
    pub field_quantum: f64,
}

/// The four state derivatives and the field voltage in volts.
///
/// `x = [x1, x2, x3, v_fd_pu]`; the drive is the regulation error
/// `v_ref − v_t,pu` with `v_t,pu = sqrt(v_qs² + v_ds²)/V_base,LL`.
pub fn exciter_rates(
    p: &ExciterParams,
    v_qs: f64,
    v_ds: f64,
    x: [f64; 4],
    v_ref: f64,
) -> ([f64; 4], f64) {
    let v_t_pu = (v_qs * v_qs + v_ds * v_ds).sqrt() / p.v_base_ll;
    let err = v_ref - v_t_pu;
    let [x1, x2, x3, v_fd_pu] = x;
    let dx1 = err - x1 / p.t_dr;
    let dx2 = x1;
    let dx3 = (p.k_ir - p.k_dr / (p.t_dr * p.t_dr)) * x1 + (p.k_ir / p.t_dr) * x2
        - x3 / p.t_a
        + (p.k_dr / p.t_dr + p.k_pr) * err;
    let dv_fd = (p.k_a / (p.t_a * p.t_e)) * x3 - (p.k_e / p.t_e) * v_fd_pu;
    ([dx1, dx2, dx3, dv_fd], v_fd_pu * p.v_base_ll)
}

#[derive(Debug, Clone, Copy)]
pub struct ExciterHandles {
    pub x1: StateId,
    pub x2: StateId,
    pub x3: StateId,
    /// Per-unit field voltage state; multiply by `v_base_ll` for volts.
    pub v_fd_pu: StateId,
    pub v_ref_input: InputId,
}

pub fn expand_exciter(
    net: &mut Netlist,
    label: &str,
    p: &ExciterParams,
    terminal: BusAtoms,
) -> ExciterHandles {
    let v_ref_input = net.input(format!("{label}.v_ref"), p.v_ref);
    let pb = *p;
    let err = move |s: &[f64], u: &[f64]| -> f64 {
        let v_q = s[terminal.q];
        let v_d = s[terminal.d];
        u[v_ref_input] - (v_q * v_q + v_d * v_d).sqrt() / pb.v_base_ll
    };

    // Each aux state reads itself; ids are assigned sequentially on
    // insertion, so the next id is known before the call.
    let x1 = net.n_states();
    net.add_aux(AuxState {
        label: format!("{label}.x1"),
        rate: ExtraSource::new(
            vec![terminal.d, terminal.q, x1],
            vec![v_ref_input],
            move |s, u| err(s, u) - s[x1] / pb.t_dr,
        ),
        quantum: p.state_quantum,
    });
    let x2 = net.add_aux(AuxState {
        label: format!("{label}.x2"),
        rate: ExtraSource::new(vec![x1], vec![], move |s, _| s[x1]),
        quantum: p.state_quantum,
    });
    let x3 = net.n_states();
    net.add_aux(AuxState {
        label: format!("{label}.x3"),
        rate: ExtraSource::new(
            vec![terminal.d, terminal.q, x1, x2, x3],
            vec![v_ref_input],
            move |s, u| {
                (pb.k_ir - pb.k_dr / (pb.t_dr * pb.t_dr)) * s[x1] + (pb.k_ir / pb.t_dr) * s[x2]
                    - s[x3] / pb.t_a
                    + (pb.k_dr / pb.t_dr + pb.k_pr) * err(s, u)
            },
        ),
        quantum: p.state_quantum,
    });
    let v_fd_pu = net.n_states();
    net.add_aux(AuxState {
        label: format!("{label}.vfd"),
        rate: ExtraSource::new(vec![x3, v_fd_pu], vec![], move |s, _| {
            (pb.k_a / (pb.t_a * pb.t_e)) * s[x3] - (pb.k_e / pb.t_e) * s[v_fd_pu]
        }),
        quantum: p.field_quantum,
    });
    ExciterHandles {
        x1,
        x2,
        x3,
        v_fd_pu,
        v_ref_input,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ExciterParams {
        ExciterParams {
            k_pr: 80.0,
            k_ir: 20.0,
            k_dr: 5.0,
            t_dr: 0.05,
            k_a: 0.2,
            t_a: 0.02,
            k_e: 1.0,
            t_e: 0.5,
            v_ref: 1.0,
            v_base_ll: 4160.0,
            state_quantum: 1e-6,
            field_quantum: 1e-7,
        }
    }

    #[test]
    fn rated_voltage_reads_one_per_unit() {
        let p = params();
        // v_qs at base, v_ds zero: the error vanishes at v_ref = 1.
        let ([dx1, _, _, _], _) = exciter_rates(&p, p.v_base_ll, 0.0, [0.0; 4], 1.0);
        assert_eq!(dx1, 0.0);
    }

    #[test]
    fn dead_input_gives_zero_rates() {
        // All states zero, terminal voltage zero, setpoint zero.
        let p = params();
        let (rates, v_fd) = exciter_rates(&p, 0.0, 0.0, [0.0; 4], 0.0);
        assert_eq!(rates, [0.0; 4]);
        assert_eq!(v_fd, 0.0);
    }

    #[test]
    fn field_equilibrium_matches_closed_form() {
        // dv_fd/dt = 0 at v_fd,pu = K_a x3 / (T_a K_e).
        let p = params();
        let x3 = 0.37;
        let v_eq = p.k_a * x3 / (p.t_a * p.k_e);
        let ([_, _, _, dv], _) = exciter_rates(&p, p.v_base_ll, 0.0, [0.0, 0.0, x3, v_eq], 1.0);
        assert!(dv.abs() < 1e-12, "dv = {dv}");
    }

    #[test]
    fn expansion_matches_rate_op() {
        use crate::lim::{assemble, LimNode, Signal};
        let mut net = Netlist::new();
        let d = net.add_node(LimNode {
            label: "t.vd".into(),
            c: 1e-4,
            g: 1.0,
            h: Signal::Const(0.0),
            vccs: vec![],
            cccs: vec![],
            extra: None,
            quantum: 1e-3,
        });
        let q = net.add_node(LimNode {
            label: "t.vq".into(),
            c: 1e-4,
            g: 1.0,
            h: Signal::Const(0.0),
            vccs: vec![],
            cccs: vec![],
            extra: None,
            quantum: 1e-3,
        });
        let p = params();
        let h = expand_exciter(&mut net, "avr", &p, BusAtoms { d, q });
        let asm = assemble(&net).unwrap();

        let mut state = vec![0.0; asm.n()];
        state[d] = 300.0;
        state[q] = 4100.0;
        state[h.x1] = 0.01;
        state[h.x2] = 0.002;
        state[h.x3] = -0.4;
        state[h.v_fd_pu] = 0.006;
        let u = vec![1.02];
        let (expect, _) = exciter_rates(
            &p,
            state[q],
            state[d],
            [state[h.x1], state[h.x2], state[h.x3], state[h.v_fd_pu]],
            u[0],
        );
        let got = [
            asm.system.closures[h.x1].eval(&state, &u),
            asm.system.closures[h.x2].eval(&state, &u),
            asm.system.closures[h.x3].eval(&state, &u),
            asm.system.closures[h.v_fd_pu].eval(&state, &u),
        ];
        for i in 0..4 {
            let rel = (got[i] - expect[i]).abs() / expect[i].abs().max(1e-9);
            assert!(rel < 1e-12, "component {i}: {} vs {}", got[i], expect[i]);
        }
    }
}
