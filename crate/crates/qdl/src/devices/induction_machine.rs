//! Squirrel-cage induction machine: stator LIM branches, rotor current
//! states, and a mechanical node with a cubic load torque.
//!
//! The four winding voltage equations are solved in closed form for the
//! current derivatives (the q and d axes decouple into 2×2 blocks sharing
//! the same inductance matrix). Stator speed-voltage terms use the
//! synchronous frame speed and rotor terms the slip speed, so balanced
//! steady operation is a constant state.

use crate::lim::{ExtraSource, LimBranch, LimNode, Netlist, NodeRef, Signal, StateId};

use super::BusAtoms;

#[derive(Debug, Clone, Copy)]
pub struct InductionMachineParams {
    /// Stator and rotor resistances (Ω).
    pub r_s: f64,
    pub r_r: f64,
    /// Leakage and magnetising inductances (H).
    pub l_ls: f64,
    pub l_lr: f64,
    pub l_m: f64,
    /// Pole count (even).
    pub poles: u32,
    /// Rotor inertia (kg·m²).
    pub j: f64,
    /// Load torque coefficient: `T_load = T_b (ω_r/ω_s)³` (N·m).
    pub t_b: f64,
    /// Synchronous frame speed (rad/s).
    pub w_s: f64,
    pub current_quantum: f64,
    pub speed_quantum: f64,
}

impl InductionMachineParams {
    pub fn l_ss(&self) -> f64 {
        self.l_ls + self.l_m
    }

    pub fn l_rr(&self) -> f64 {
        self.l_lr + self.l_m
    }

    /// Determinant of one axis block of the inductance matrix; must be
    /// positive for the winding equations to be solvable.
    pub fn det(&self) -> f64 {
        self.l_ss() * self.l_rr() - self.l_m * self.l_m
    }
}

/// Current derivatives and rotor acceleration at one operating point.
///
/// State order: `(i_qs, i_ds, i_qr, i_dr)`; the rotor windings are shorted.
pub fn induction_machine_rates(
    p: &InductionMachineParams,
    i_qs: f64,
    i_ds: f64,
    i_qr: f64,
    i_dr: f64,
    w_r: f64,
    v_qs: f64,
    v_ds: f64,
) -> ([f64; 4], f64) {
    let l_ss = p.l_ss();
    let l_rr = p.l_rr();
    let det = p.det();
    let slip = p.w_s - w_r;

    let psi_qs = p.l_ls * i_qs + p.l_m * (i_qs + i_qr);
    let psi_ds = p.l_ls * i_ds + p.l_m * (i_ds + i_dr);
    let psi_qr = p.l_lr * i_qr + p.l_m * (i_qr + i_qs);
    let psi_dr = p.l_lr * i_dr + p.l_m * (i_dr + i_ds);

    let b_qs = v_qs - p.r_s * i_qs - p.w_s * psi_ds;
    let b_ds = v_ds - p.r_s * i_ds + p.w_s * psi_qs;
    let b_qr = -p.r_r * i_qr - slip * psi_dr;
    let b_dr = -p.r_r * i_dr + slip * psi_qr;

    let di_qs = (l_rr * b_qs - p.l_m * b_qr) / det;
    let di_ds = (l_rr * b_ds - p.l_m * b_dr) / det;
    let di_qr = (l_ss * b_qr - p.l_m * b_qs) / det;
    let di_dr = (l_ss * b_dr - p.l_m * b_ds) / det;

    let poles = p.poles as f64;
    let t_e = 3.0 * poles / 4.0 * (psi_ds * i_qs - psi_qs * i_ds);
    let dw_r = poles / (2.0 * p.j) * (t_e - p.t_b * (w_r / p.w_s).powi(3));
    ([di_qs, di_ds, di_qr, di_dr], dw_r)
}

#[derive(Debug, Clone, Copy)]
pub struct ImHandles {
    pub i_ds: StateId,
    pub i_qs: StateId,
    pub i_dr: StateId,
    pub i_qr: StateId,
    /// Electrical rotor speed (rad/s).
    pub omega: StateId,
}

/// Expands the machine onto its bus: stator branches with the coupled
/// rotor dynamics folded into dependent sources, rotor current states,
/// and a mechanical node.
pub fn expand_induction_machine(
    net: &mut Netlist,
    label: &str,
    p: &InductionMachineParams,
    bus: BusAtoms,
) -> ImHandles {
    assert!(p.poles % 2 == 0, "pole count must be even");
    assert!(p.det() > 0.0, "inductance matrix must be invertible");
    let base = net.n_states();
    let (i_ds, i_qs, i_dr, i_qr) = (base, base + 1, base + 2, base + 3);
    let omega = base + 4;

    let pb = *p;
    let l_ss = p.l_ss();
    let l_rr = p.l_rr();
    let det = p.det();

    // Stator branches: eliminating the rotor derivative gives an
    // effective latency det/L_rr per axis.
    // d-axis: b_ds − (L_m/L_rr) b_dr over det/L_rr.
    net.add_branch(LimBranch {
        label: format!("{label}.ids"),
        from: NodeRef::Node(bus.d),
        to: NodeRef::Ground,
        l: det / l_rr,
        r: p.r_s,
        e: Signal::Const(0.0),
        gain: Signal::Const(1.0),
        vcvs: vec![],
        ccvs: vec![],
        extra: Some(ExtraSource::new(
            vec![i_qs, i_qr, i_dr, omega],
            vec![],
            move |s, _| {
                let psi_qs = pb.l_ls * s[i_qs] + pb.l_m * (s[i_qs] + s[i_qr]);
                let psi_qr = pb.l_lr * s[i_qr] + pb.l_m * (s[i_qr] + s[i_qs]);
                let slip = pb.w_s - s[omega];
                pb.w_s * psi_qs + pb.l_m / l_rr * (pb.r_r * s[i_dr] - slip * psi_qr)
            },
        )),
        quantum: p.current_quantum,
    });
    net.add_branch(LimBranch {
        label: format!("{label}.iqs"),
        from: NodeRef::Node(bus.q),
        to: NodeRef::Ground,
        l: det / l_rr,
        r: p.r_s,
        e: Signal::Const(0.0),
        gain: Signal::Const(1.0),
        vcvs: vec![],
        ccvs: vec![],
        extra: Some(ExtraSource::new(
            vec![i_ds, i_dr, i_qr, omega],
            vec![],
            move |s, _| {
                let psi_ds = pb.l_ls * s[i_ds] + pb.l_m * (s[i_ds] + s[i_dr]);
                let psi_dr = pb.l_lr * s[i_dr] + pb.l_m * (s[i_dr] + s[i_ds]);
                let slip = pb.w_s - s[omega];
                -pb.w_s * psi_ds + pb.l_m / l_rr * (pb.r_r * s[i_qr] + slip * psi_dr)
            },
        )),
        quantum: p.current_quantum,
    });

    // Rotor currents carry the full eliminated form and read the bus.
    net.add_aux(crate::lim::AuxState {
        label: format!("{label}.idr"),
        rate: ExtraSource::new(
            vec![bus.d, i_ds, i_qs, i_dr, i_qr, omega],
            vec![],
            move |s, _| {
                let psi_qs = pb.l_ls * s[i_qs] + pb.l_m * (s[i_qs] + s[i_qr]);
                let psi_qr = pb.l_lr * s[i_qr] + pb.l_m * (s[i_qr] + s[i_qs]);
                let slip = pb.w_s - s[omega];
                let b_ds = s[bus.d] - pb.r_s * s[i_ds] + pb.w_s * psi_qs;
                let b_dr = -pb.r_r * s[i_dr] + slip * psi_qr;
                (l_ss * b_dr - pb.l_m * b_ds) / det
            },
        ),
        quantum: p.current_quantum,
    });
    net.add_aux(crate::lim::AuxState {
        label: format!("{label}.iqr"),
        rate: ExtraSource::new(
            vec![bus.q, i_ds, i_qs, i_dr, i_qr, omega],
            vec![],
            move |s, _| {
                let psi_ds = pb.l_ls * s[i_ds] + pb.l_m * (s[i_ds] + s[i_dr]);
                let psi_dr = pb.l_lr * s[i_dr] + pb.l_m * (s[i_dr] + s[i_ds]);
                let slip = pb.w_s - s[omega];
                let b_qs = s[bus.q] - pb.r_s * s[i_qs] - pb.w_s * psi_ds;
                let b_qr = -pb.r_r * s[i_qr] - slip * psi_dr;
                (l_ss * b_qr - pb.l_m * b_qs) / det
            },
        ),
        quantum: p.current_quantum,
    });

    // Mechanical node: (2J/P) dω/dt = T_e − T_b (ω/ω_s)³.
    let poles = p.poles as f64;
    net.add_node(LimNode {
        label: format!("{label}.omega"),
        c: 2.0 * p.j / poles,
        g: 0.0,
        h: Signal::Const(0.0),
        vccs: vec![],
        cccs: vec![],
        extra: Some(ExtraSource::new(
            vec![i_ds, i_qs, i_dr, i_qr, omega],
            vec![],
            move |s, _| {
                let psi_qs = pb.l_ls * s[i_qs] + pb.l_m * (s[i_qs] + s[i_qr]);
                let psi_ds = pb.l_ls * s[i_ds] + pb.l_m * (s[i_ds] + s[i_dr]);
                let t_e = 3.0 * poles / 4.0 * (psi_ds * s[i_qs] - psi_qs * s[i_ds]);
                t_e - pb.t_b * (s[omega] / pb.w_s).powi(3)
            },
        )),
        quantum: p.speed_quantum,
    });

    ImHandles {
        i_ds,
        i_qs,
        i_dr,
        i_qr,
        omega,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn params() -> InductionMachineParams {
        InductionMachineParams {
            r_s: 0.15,
            r_r: 0.25,
            l_ls: 2e-3,
            l_lr: 2e-3,
            l_m: 60e-3,
            poles: 4,
            j: 5.0,
            t_b: 1100.0,
            w_s: 376.99111843077515,
            current_quantum: 1e-2,
            speed_quantum: 1e-4,
        }
    }

    #[test]
    fn torque_free_electrical_state() {
        // All currents zero, terminal voltage zero: electrical derivatives
        // vanish and the speed decays under the cubic load alone.
        let p = params();
        let (di, dw) = induction_machine_rates(&p, 0.0, 0.0, 0.0, 0.0, 370.0, 0.0, 0.0);
        assert_eq!(di, [0.0; 4]);
        let expect = p.poles as f64 / (2.0 * p.j) * (-p.t_b * (370.0 / p.w_s).powi(3));
        assert!((dw - expect).abs() < 1e-12);
        assert!(dw < 0.0);
    }

    #[test]
    fn open_rotor_stator_flux() {
        // ψ_qs with i_qr = 0 collapses to (L_ls + L_m) i_qs; probe through
        // the q-rotor equation where it appears scaled by slip.
        let p = params();
        let i_qs = 7.0;
        let psi_qs = p.l_ss() * i_qs;
        // b_dr = slip * psi_qr; with only i_qs nonzero psi_qr = l_m*i_qs.
        let psi_qr = p.l_m * i_qs;
        assert!((psi_qs - (p.l_ls + p.l_m) * i_qs).abs() < 1e-15);
        assert!((psi_qr - p.l_m * i_qs).abs() < 1e-15);
    }

    #[test]
    fn current_rates_match_matrix_inversion() {
        // Brute-force oracle: build the full 4×4 inductance system and
        // solve it with a dense LU, then compare against the closed form.
        let p = params();
        let (i_qs, i_ds, i_qr, i_dr) = (30.0, -12.0, -25.0, 9.0);
        let (w_r, v_qs, v_ds) = (360.0, 4100.0, 250.0);

        let psi_qs = p.l_ls * i_qs + p.l_m * (i_qs + i_qr);
        let psi_ds = p.l_ls * i_ds + p.l_m * (i_ds + i_dr);
        let psi_qr = p.l_lr * i_qr + p.l_m * (i_qr + i_qs);
        let psi_dr = p.l_lr * i_dr + p.l_m * (i_dr + i_ds);
        let slip = p.w_s - w_r;
        let l_ss = p.l_ss();
        let l_rr = p.l_rr();
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            l_ss, 0.0,  p.l_m, 0.0,
            0.0,  l_ss, 0.0,   p.l_m,
            p.l_m, 0.0, l_rr,  0.0,
            0.0,  p.l_m, 0.0,  l_rr,
        ]);
        let rhs = DVector::from_row_slice(&[
            v_qs - p.r_s * i_qs - p.w_s * psi_ds,
            v_ds - p.r_s * i_ds + p.w_s * psi_qs,
            -p.r_r * i_qr - slip * psi_dr,
            -p.r_r * i_dr + slip * psi_qr,
        ]);
        let oracle = m.lu().solve(&rhs).unwrap();

        let (di, _) = induction_machine_rates(&p, i_qs, i_ds, i_qr, i_dr, w_r, v_qs, v_ds);
        for k in 0..4 {
            let rel = (di[k] - oracle[k]).abs() / oracle[k].abs().max(1e-9);
            assert!(rel < 1e-10, "component {k}: {} vs {}", di[k], oracle[k]);
        }
    }

    #[test]
    fn expansion_matches_rate_op() {
        use crate::lim::{assemble, LimNode, Signal};
        let mut net = Netlist::new();
        let d = net.add_node(LimNode {
            label: "b.vd".into(),
            c: 1e-4,
            g: 0.0,
            h: Signal::Const(0.0),
            vccs: vec![],
            cccs: vec![],
            extra: None,
            quantum: 1e-3,
        });
        let q = net.add_node(LimNode {
            label: "b.vq".into(),
            c: 1e-4,
            g: 0.0,
            h: Signal::Const(0.0),
            vccs: vec![],
            cccs: vec![],
            extra: None,
            quantum: 1e-3,
        });
        let p = params();
        let h = expand_induction_machine(&mut net, "im", &p, BusAtoms { d, q });
        let asm = assemble(&net).unwrap();

        let mut s = vec![0.0; asm.n()];
        s[d] = 220.0;
        s[q] = 4120.0;
        s[h.i_qs] = 31.0;
        s[h.i_ds] = -14.0;
        s[h.i_qr] = -26.0;
        s[h.i_dr] = 8.0;
        s[h.omega] = 362.0;
        let (di, dw) = induction_machine_rates(
            &p, s[h.i_qs], s[h.i_ds], s[h.i_qr], s[h.i_dr], s[h.omega], s[q], s[d],
        );
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-9);
        assert!(rel(asm.system.closures[h.i_qs].eval(&s, &[]), di[0]) < 1e-10);
        assert!(rel(asm.system.closures[h.i_ds].eval(&s, &[]), di[1]) < 1e-10);
        assert!(rel(asm.system.closures[h.i_qr].eval(&s, &[]), di[2]) < 1e-10);
        assert!(rel(asm.system.closures[h.i_dr].eval(&s, &[]), di[3]) < 1e-10);
        assert!(rel(asm.system.closures[h.omega].eval(&s, &[]), dw) < 1e-10);
    }
}
