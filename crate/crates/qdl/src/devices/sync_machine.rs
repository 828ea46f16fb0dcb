//! Synchronous machine: two stator LIM branches (q and d axis), three
//! rotor flux states (q damper, d damper, field), and a mechanical node.
//!
//! Rotor windings follow the flux-decay form
//! `dψ_w/dt = (r_w/L_lw)(ψ_m,axis − ψ_w)` (plus the field drive `v_fd`),
//! where `ψ_m,axis` is the axis mutual flux including the stator-current
//! contribution. Stator flux linkages collapse to
//! `ψ_qs = L_q i_qs + ψ_q` and `ψ_ds = L_d i_ds + ψ_d` with the aggregate
//! inductances `L_q`, `L_d` and rotor-side aggregate fluxes `ψ_q`, `ψ_d`,
//! so the stator branches carry the aggregate inductance as their latency
//! and the speed-voltage plus rotor-flux-motion terms as dependent sources.

use crate::lim::{AuxState, ExtraSource, LimBranch, LimNode, Netlist, NodeRef, Signal, StateId};

use super::governor::{expand_governor, GovernorParams};
use super::BusAtoms;

#[derive(Debug, Clone, Copy)]
pub struct SyncMachineParams {
    /// Stator resistance (Ω) and leakage inductance (H).
    pub r_s: f64,
    pub l_ls: f64,
    /// q-axis damper winding.
    pub r_kq: f64,
    pub l_lkq: f64,
    /// d-axis damper winding.
    pub r_kd: f64,
    pub l_lkd: f64,
    /// Field winding.
    pub r_fd: f64,
    pub l_lfd: f64,
    /// Magnetising inductances.
    pub l_mq: f64,
    pub l_md: f64,
    /// Pole count (even).
    pub poles: u32,
    /// Rotor inertia (kg·m²).
    pub j: f64,
    /// Base line-line RMS voltage (V); scales the per-unit field voltage.
    pub v_base_ll: f64,
    pub current_quantum: f64,
    pub flux_quantum: f64,
    pub speed_quantum: f64,
}

impl SyncMachineParams {
    /// q-axis magnetising‖damper-leakage parallel combination.
    pub fn l_aq(&self) -> f64 {
        1.0 / (1.0 / self.l_mq + 1.0 / self.l_lkq)
    }

    /// d-axis three-way parallel combination (magnetising, damper, field).
    pub fn l_ad(&self) -> f64 {
        1.0 / (1.0 / self.l_md + 1.0 / self.l_lkd + 1.0 / self.l_lfd)
    }

    /// Aggregate q-axis inductance `L_q = L_ls + L_mq ‖ L_lkq`.
    pub fn l_q(&self) -> f64 {
        self.l_ls + self.l_aq()
    }

    /// Aggregate d-axis inductance.
    pub fn l_d(&self) -> f64 {
        self.l_ls + self.l_ad()
    }

    /// Rotor-side aggregate q flux `ψ_q`.
    pub fn psi_q_agg(&self, psi_kq: f64) -> f64 {
        self.l_aq() / self.l_lkq * psi_kq
    }

    /// Rotor-side aggregate d flux `ψ_d`.
    pub fn psi_d_agg(&self, psi_kd: f64, psi_fd: f64) -> f64 {
        self.l_ad() * (psi_kd / self.l_lkd + psi_fd / self.l_lfd)
    }
}

/// Flux derivatives, electrical torque, and mechanical acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmRates {
    pub dpsi_kq: f64,
    pub dpsi_kd: f64,
    pub dpsi_fd: f64,
    pub t_e: f64,
    /// Mechanical-shaft acceleration `(T_m − T_e)/J` (rad/s²).
    pub domega_m: f64,
}

/// Rotor flux decay, torque, and rotor acceleration at one operating point.
pub fn sync_machine_rates(
    p: &SyncMachineParams,
    psi_kq: f64,
    psi_kd: f64,
    psi_fd: f64,
    i_qs: f64,
    i_ds: f64,
    v_fd: f64,
    t_m: f64,
) -> SmRates {
    let psi_q = p.psi_q_agg(psi_kq);
    let psi_d = p.psi_d_agg(psi_kd, psi_fd);
    let psi_mq = psi_q + p.l_aq() * i_qs;
    let psi_md = psi_d + p.l_ad() * i_ds;
    let dpsi_kq = p.r_kq / p.l_lkq * (psi_mq - psi_kq);
    let dpsi_kd = p.r_kd / p.l_lkd * (psi_md - psi_kd);
    let dpsi_fd = p.r_fd / p.l_lfd * (psi_md - psi_fd) + v_fd;
    let psi_qs = p.l_q() * i_qs + psi_q;
    let psi_ds = p.l_d() * i_ds + psi_d;
    let t_e = 3.0 * p.poles as f64 / 2.0 * (psi_ds * i_qs - psi_qs * i_ds);
    SmRates {
        dpsi_kq,
        dpsi_kd,
        dpsi_fd,
        t_e,
        domega_m: (t_m - t_e) / p.j,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SmHandles {
    pub i_ds: StateId,
    pub i_qs: StateId,
    pub psi_kq: StateId,
    pub psi_kd: StateId,
    pub psi_fd: StateId,
    /// Electrical rotor speed (rad/s).
    pub omega: StateId,
    /// Governor integrator angle.
    pub theta: StateId,
}

/// Expands the machine plus its governor onto a terminal bus.
///
/// `v_fd_pu_atom` is the per-unit field voltage state produced by the
/// exciter; it is scaled by the base voltage inside the field flux
/// equation. The mechanical state is the electrical rotor speed, carried
/// by a node with latency `2J/P`; the governor's proportional gain maps
/// onto the node conductance and its setpoint onto the node injection.
pub fn expand_sync_machine(
    net: &mut Netlist,
    label: &str,
    p: &SyncMachineParams,
    gov: &GovernorParams,
    terminal: BusAtoms,
    v_fd_pu_atom: StateId,
) -> SmHandles {
    assert!(p.poles % 2 == 0, "pole count must be even");
    let base = net.n_states();
    let (i_ds, i_qs) = (base, base + 1);
    let (psi_kq, psi_kd, psi_fd) = (base + 2, base + 3, base + 4);
    let omega = base + 5;

    let pb = *p;
    let l_aq = p.l_aq();
    let l_ad = p.l_ad();
    let l_q = p.l_q();
    let l_d = p.l_d();
    let c_q = l_aq / p.l_lkq;
    let c_kd = l_ad / p.l_lkd;
    let c_fd = l_ad / p.l_lfd;

    // d-axis stator: L_d di_ds/dt = v_d − r_s i_ds + ω ψ_qs − dψ_d/dt.
    net.add_branch(LimBranch {
        label: format!("{label}.ids"),
        from: NodeRef::Node(terminal.d),
        to: NodeRef::Ground,
        l: l_d,
        r: p.r_s,
        e: Signal::Const(0.0),
        gain: Signal::Const(1.0),
        vcvs: vec![],
        ccvs: vec![],
        extra: Some(ExtraSource::new(
            vec![omega, i_qs, i_ds, psi_kq, psi_kd, psi_fd, v_fd_pu_atom],
            vec![],
            move |s, _| {
                let psi_qs = l_q * s[i_qs] + c_q * s[psi_kq];
                let psi_md = c_kd * s[psi_kd] + c_fd * s[psi_fd] + l_ad * s[i_ds];
                let dpsi_kd = pb.r_kd / pb.l_lkd * (psi_md - s[psi_kd]);
                let dpsi_fd = pb.r_fd / pb.l_lfd * (psi_md - s[psi_fd])
                    + s[v_fd_pu_atom] * pb.v_base_ll;
                s[omega] * psi_qs - (c_kd * dpsi_kd + c_fd * dpsi_fd)
            },
        )),
        quantum: p.current_quantum,
    });

    // q-axis stator: L_q di_qs/dt = v_q − r_s i_qs − ω ψ_ds − dψ_q/dt.
    net.add_branch(LimBranch {
        label: format!("{label}.iqs"),
        from: NodeRef::Node(terminal.q),
        to: NodeRef::Ground,
        l: l_q,
        r: p.r_s,
        e: Signal::Const(0.0),
        gain: Signal::Const(1.0),
        vcvs: vec![],
        ccvs: vec![],
        extra: Some(ExtraSource::new(
            vec![omega, i_qs, i_ds, psi_kq, psi_kd, psi_fd],
            vec![],
            move |s, _| {
                let psi_ds = l_d * s[i_ds] + c_kd * s[psi_kd] + c_fd * s[psi_fd];
                let psi_mq = c_q * s[psi_kq] + l_aq * s[i_qs];
                let dpsi_kq = pb.r_kq / pb.l_lkq * (psi_mq - s[psi_kq]);
                -s[omega] * psi_ds - c_q * dpsi_kq
            },
        )),
        quantum: p.current_quantum,
    });

    net.add_aux(AuxState {
        label: format!("{label}.psi_kq"),
        rate: ExtraSource::new(vec![psi_kq, i_qs], vec![], move |s, _| {
            let psi_mq = c_q * s[psi_kq] + l_aq * s[i_qs];
            pb.r_kq / pb.l_lkq * (psi_mq - s[psi_kq])
        }),
        quantum: p.flux_quantum,
    });
    net.add_aux(AuxState {
        label: format!("{label}.psi_kd"),
        rate: ExtraSource::new(vec![psi_kd, psi_fd, i_ds], vec![], move |s, _| {
            let psi_md = c_kd * s[psi_kd] + c_fd * s[psi_fd] + l_ad * s[i_ds];
            pb.r_kd / pb.l_lkd * (psi_md - s[psi_kd])
        }),
        quantum: p.flux_quantum,
    });
    net.add_aux(AuxState {
        label: format!("{label}.psi_fd"),
        rate: ExtraSource::new(
            vec![psi_kd, psi_fd, i_ds, v_fd_pu_atom],
            vec![],
            move |s, _| {
                let psi_md = c_kd * s[psi_kd] + c_fd * s[psi_fd] + l_ad * s[i_ds];
                pb.r_fd / pb.l_lfd * (psi_md - s[psi_fd]) + s[v_fd_pu_atom] * pb.v_base_ll
            },
        ),
        quantum: p.flux_quantum,
    });

    // Mechanical node: (2J/P) dω/dt = T_m − T_e with the governor's
    // proportional term as the node conductance.
    let two_j_over_p = 2.0 * p.j / p.poles as f64;
    net.add_node(LimNode {
        label: format!("{label}.omega"),
        c: two_j_over_p,
        g: gov.k_p,
        h: Signal::Const(gov.k_p * gov.w_s),
        vccs: vec![],
        cccs: vec![],
        extra: None, // governor integral and torque wired in below
        quantum: p.speed_quantum,
    });

    let theta = expand_governor(net, "gov", gov, omega);

    let k_i = gov.k_i;
    let poles = p.poles as f64;
    net.node_mut(omega).extra = Some(ExtraSource::new(
        vec![theta, i_qs, i_ds, psi_kq, psi_kd, psi_fd],
        vec![],
        move |s, _| {
            let psi_qs = l_q * s[i_qs] + c_q * s[psi_kq];
            let psi_ds = l_d * s[i_ds] + c_kd * s[psi_kd] + c_fd * s[psi_fd];
            let t_e = 3.0 * poles / 2.0 * (psi_ds * s[i_qs] - psi_qs * s[i_ds]);
            k_i * s[theta] - t_e
        },
    ));

    SmHandles {
        i_ds,
        i_qs,
        psi_kq,
        psi_kd,
        psi_fd,
        omega,
        theta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SyncMachineParams {
        SyncMachineParams {
            r_s: 0.1,
            l_ls: 1.5e-3,
            r_kq: 0.1,
            l_lkq: 2e-3,
            r_kd: 0.1,
            l_lkd: 2e-3,
            r_fd: 0.02,
            l_lfd: 2.5e-3,
            l_mq: 20e-3,
            l_md: 25e-3,
            poles: 2,
            j: 50.0,
            v_base_ll: 4160.0,
            current_quantum: 1e-2,
            flux_quantum: 1e-4,
            speed_quantum: 1e-4,
        }
    }

    #[test]
    fn dead_machine_has_zero_rates() {
        let r = sync_machine_rates(&params(), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(r.t_e, 0.0);
        assert_eq!(r.dpsi_kq, 0.0);
        assert_eq!(r.dpsi_kd, 0.0);
        assert_eq!(r.dpsi_fd, 0.0);
    }

    #[test]
    fn torque_balance_freezes_rotor() {
        let p = params();
        let r = sync_machine_rates(&p, 0.1, 0.2, 0.3, -10.0, -5.0, 0.0, 0.0);
        let r_bal = sync_machine_rates(&p, 0.1, 0.2, 0.3, -10.0, -5.0, 0.0, r.t_e);
        assert_eq!(r_bal.domega_m, 0.0);
    }

    #[test]
    fn aggregate_inductance_parallel_special_case() {
        // With L_mq = L_lkq the parallel combination halves: L_q = L_ls + L_mq/2.
        let mut p = params();
        p.l_mq = 8e-3;
        p.l_lkq = 8e-3;
        assert!((p.l_q() - (p.l_ls + 4e-3)).abs() < 1e-15);
    }

    #[test]
    fn torque_increases_with_q_current_at_positive_d_flux() {
        let p = params();
        let base = sync_machine_rates(&p, 0.0, 0.5, 0.5, 1.0, 0.0, 0.0, 0.0);
        let more = sync_machine_rates(&p, 0.0, 0.5, 0.5, 2.0, 0.0, 0.0, 0.0);
        assert!(more.t_e > base.t_e);
    }

    #[test]
    fn expansion_matches_rate_op() {
        use crate::lim::{assemble, LimNode};
        let mut net = Netlist::new();
        let d = net.add_node(LimNode {
            label: "t.vd".into(),
            c: 1e-4,
            g: 0.0,
            h: Signal::Const(0.0),
            vccs: vec![],
            cccs: vec![],
            extra: None,
            quantum: 1e-3,
        });
        let q = net.add_node(LimNode {
            label: "t.vq".into(),
            c: 1e-4,
            g: 0.0,
            h: Signal::Const(0.0),
            vccs: vec![],
            cccs: vec![],
            extra: None,
            quantum: 1e-3,
        });
        // Free-standing per-unit field state for the fixture.
        let vfd = net.add_aux(AuxState {
            label: "vfd".into(),
            rate: ExtraSource::new(vec![], vec![], |_, _| 0.0),
            quantum: 1e-7,
        });
        let p = params();
        let gov = GovernorParams {
            k_p: 75.0,
            k_i: 316.0,
            w_s: 376.99,
            angle_quantum: 1e-4,
        };
        let h = expand_sync_machine(&mut net, "sm", &p, &gov, BusAtoms { d, q }, vfd);
        let asm = assemble(&net).unwrap();

        let mut s = vec![0.0; asm.n()];
        s[d] = 310.0;
        s[q] = 4140.0;
        s[vfd] = 0.006;
        s[h.i_ds] = -12.0;
        s[h.i_qs] = -55.0;
        s[h.psi_kq] = -0.4;
        s[h.psi_kd] = 10.2;
        s[h.psi_fd] = 11.5;
        s[h.omega] = 376.2;
        s[h.theta] = -1.1;

        let v_fd = s[vfd] * p.v_base_ll;
        let (t_m, dtheta) = super::super::governor::governor_torque(&gov, s[h.omega], s[h.theta]);
        let rates = sync_machine_rates(
            &p, s[h.psi_kq], s[h.psi_kd], s[h.psi_fd], s[h.i_qs], s[h.i_ds], v_fd, t_m,
        );

        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-9);

        // Rotor fluxes match the op directly.
        assert!(rel(asm.system.closures[h.psi_kq].eval(&s, &[]), rates.dpsi_kq) < 1e-12);
        assert!(rel(asm.system.closures[h.psi_kd].eval(&s, &[]), rates.dpsi_kd) < 1e-12);
        assert!(rel(asm.system.closures[h.psi_fd].eval(&s, &[]), rates.dpsi_fd) < 1e-12);

        // Stator branches: straight-line transcription of the aggregate
        // equations, independent of the closure construction.
        let psi_q = p.psi_q_agg(s[h.psi_kq]);
        let psi_d = p.psi_d_agg(s[h.psi_kd], s[h.psi_fd]);
        let psi_qs = p.l_q() * s[h.i_qs] + psi_q;
        let psi_ds = p.l_d() * s[h.i_ds] + psi_d;
        let c_q = p.l_aq() / p.l_lkq;
        let c_kd = p.l_ad() / p.l_lkd;
        let c_fd = p.l_ad() / p.l_lfd;
        let expect_diqs =
            (s[q] - p.r_s * s[h.i_qs] - s[h.omega] * psi_ds - c_q * rates.dpsi_kq) / p.l_q();
        let expect_dids = (s[d] - p.r_s * s[h.i_ds] + s[h.omega] * psi_qs
            - (c_kd * rates.dpsi_kd + c_fd * rates.dpsi_fd))
            / p.l_d();
        assert!(rel(asm.system.closures[h.i_qs].eval(&s, &[]), expect_diqs) < 1e-12);
        assert!(rel(asm.system.closures[h.i_ds].eval(&s, &[]), expect_dids) < 1e-12);

        // Mechanical node: electrical-speed rate is P/2 times the shaft
        // acceleration from the op.
        let expect_domega = rates.domega_m * p.poles as f64 / 2.0;
        assert!(rel(asm.system.closures[h.omega].eval(&s, &[]), expect_domega) < 1e-12);

        // Governor integrator.
        assert!(rel(asm.system.closures[h.theta].eval(&s, &[]), dtheta) < 1e-12);
    }
}
