//! The bundled three-bus reference system.
//!
//! A generator set (synchronous machine, turbo-governor, AC8B-style
//! exciter) on bus 1 feeds an induction motor and a transformer-rectifier
//! load on bus 2 and a constant-impedance RL load on bus 3 through three
//! π-section cables (1-2, 2-3, 1-3). All devices share one synchronous
//! dq frame at the system frequency; the expansion yields 32 state atoms.

use crate::lim::{Assembly, LimNode, Netlist, NetlistError, NodeRef, Signal};
use crate::qss::InputId;

use super::{
    expand_cable, expand_exciter, expand_induction_machine, expand_rectifier, expand_rl_load,
    expand_sync_machine, BusAtoms, CableHandles, CableParams, CouplingForm, ExciterHandles,
    ExciterParams, GovernorParams, ImHandles, InductionMachineParams, RectifierHandles,
    RectifierParams, RlHandles, RlLoadParams, SmHandles, SyncMachineParams,
};

/// Default quanta by physical kind, overridable per atom label.
#[derive(Debug, Clone, Copy)]
pub struct QuantaDefaults {
    /// Bus and machine voltages (V).
    pub voltage: f64,
    /// Branch and machine currents (A).
    pub current: f64,
    /// Rotor speeds (rad/s).
    pub speed: f64,
    /// Machine fluxes (Wb).
    pub flux: f64,
    /// Governor integrator angle (rad).
    pub angle: f64,
    /// Regulator internal states (pu).
    pub avr_state: f64,
    /// Per-unit field voltage (pu).
    pub field: f64,
    /// Rectifier dc rail voltage (V).
    pub dc_voltage: f64,
}

impl Default for QuantaDefaults {
    fn default() -> Self {
        Self {
            voltage: 1e-3,
            current: 1e-2,
            speed: 1e-4,
            flux: 1e-4,
            angle: 1e-4,
            avr_state: 1e-6,
            field: 1e-7,
            dc_voltage: 1e-3,
        }
    }
}

/// One cable's electrical constants (frame speed and quanta are filled in
/// by the builder).
#[derive(Debug, Clone, Copy)]
pub struct CableSection {
    pub r: f64,
    pub l: f64,
    pub c: f64,
    pub g: f64,
}

/// Full parameter set of the reference system.
#[derive(Debug, Clone)]
pub struct MicrogridParams {
    /// System frequency (Hz).
    pub f_hz: f64,
    /// Base line-line RMS voltage (V).
    pub v_base_ll: f64,
    /// Per-axis stray bus capacitance (F) and conductance (S).
    pub bus_c: f64,
    pub bus_g: f64,
    pub cable12: CableSection,
    pub cable23: CableSection,
    pub cable13: CableSection,
    pub sm: SmConstants,
    pub gov: GovConstants,
    pub avr: AvrConstants,
    pub im: ImConstants,
    pub rl: RlConstants,
    pub rect: RectConstants,
    pub quanta: QuantaDefaults,
}

#[derive(Debug, Clone, Copy)]
pub struct SmConstants {
    pub r_s: f64,
    pub l_ls: f64,
    pub r_kq: f64,
    pub l_lkq: f64,
    pub r_kd: f64,
    pub l_lkd: f64,
    pub r_fd: f64,
    pub l_lfd: f64,
    pub l_mq: f64,
    pub l_md: f64,
    pub poles: u32,
    pub j: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct GovConstants {
    pub k_p: f64,
    pub k_i: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct AvrConstants {
    pub k_pr: f64,
    pub k_ir: f64,
    pub k_dr: f64,
    pub t_dr: f64,
    pub k_a: f64,
    pub t_a: f64,
    pub k_e: f64,
    pub t_e: f64,
    pub v_ref: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ImConstants {
    pub r_s: f64,
    pub r_r: f64,
    pub l_ls: f64,
    pub l_lr: f64,
    pub l_m: f64,
    pub poles: u32,
    pub j: f64,
    pub t_b: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RlConstants {
    pub r: f64,
    pub l: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RectConstants {
    pub phi: f64,
    pub l_dc: f64,
    pub r_dc: f64,
    pub c_dc: f64,
    pub g_load: f64,
    pub power_conserving_coupling: bool,
}

impl Default for MicrogridParams {
    fn default() -> Self {
        Self {
            f_hz: 60.0,
            v_base_ll: 4160.0,
            bus_c: 6.0e-6,
            bus_g: 1e-4,
            cable12: CableSection {
                r: 1.5,
                l: 6.0e-3,
                c: 2.0e-6,
                g: 0.0,
            },
            cable23: CableSection {
                r: 1.6,
                l: 7.0e-3,
                c: 2.0e-6,
                g: 0.0,
            },
            cable13: CableSection {
                r: 1.8,
                l: 8.0e-3,
                c: 2.0e-6,
                g: 0.0,
            },
            sm: SmConstants {
                r_s: 0.35,
                l_ls: 9e-3,
                r_kq: 1.2,
                l_lkq: 12e-3,
                r_kd: 1.2,
                l_lkd: 12e-3,
                r_fd: 0.06,
                l_lfd: 14e-3,
                l_mq: 160e-3,
                l_md: 180e-3,
                poles: 2,
                j: 60.0,
            },
            gov: GovConstants {
                k_p: 120.0,
                k_i: 470.0,
            },
            avr: AvrConstants {
                k_pr: 2.0,
                k_ir: 2.0,
                k_dr: 0.5,
                t_dr: 0.05,
                k_a: 0.05,
                t_a: 0.02,
                k_e: 1.0,
                t_e: 0.5,
                v_ref: 1.0,
            },
            im: ImConstants {
                r_s: 1.0,
                r_r: 1.3,
                l_ls: 11e-3,
                l_lr: 11e-3,
                l_m: 0.75,
                poles: 4,
                j: 1.3,
                t_b: 1050.0,
            },
            rl: RlConstants { r: 93.0, l: 0.12 },
            rect: RectConstants {
                phi: -std::f64::consts::FRAC_PI_6,
                l_dc: 80e-3,
                r_dc: 0.5,
                c_dc: 300e-6,
                g_load: 4.8e-3,
                power_conserving_coupling: false,
            },
            quanta: QuantaDefaults::default(),
        }
    }
}

impl MicrogridParams {
    pub fn w_s(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f_hz
    }

    /// Sets one named parameter; the paths mirror the struct layout
    /// (`sm.j`, `cable12.l`, `quanta.voltage`, ...).
    pub fn set(&mut self, path: &str, value: f64) -> Result<(), String> {
        let int = |v: f64| -> Result<u32, String> {
            if v.fract() == 0.0 && v > 0.0 {
                Ok(v as u32)
            } else {
                Err(format!("{path} must be a positive integer"))
            }
        };
        match path {
            "f_hz" => self.f_hz = value,
            "v_base_ll" => self.v_base_ll = value,
            "bus.c" => self.bus_c = value,
            "bus.g" => self.bus_g = value,

            "cable12.r" => self.cable12.r = value,
            "cable12.l" => self.cable12.l = value,
            "cable12.c" => self.cable12.c = value,
            "cable12.g" => self.cable12.g = value,
            "cable23.r" => self.cable23.r = value,
            "cable23.l" => self.cable23.l = value,
            "cable23.c" => self.cable23.c = value,
            "cable23.g" => self.cable23.g = value,
            "cable13.r" => self.cable13.r = value,
            "cable13.l" => self.cable13.l = value,
            "cable13.c" => self.cable13.c = value,
            "cable13.g" => self.cable13.g = value,

            "sm.r_s" => self.sm.r_s = value,
            "sm.l_ls" => self.sm.l_ls = value,
            "sm.r_kq" => self.sm.r_kq = value,
            "sm.l_lkq" => self.sm.l_lkq = value,
            "sm.r_kd" => self.sm.r_kd = value,
            "sm.l_lkd" => self.sm.l_lkd = value,
            "sm.r_fd" => self.sm.r_fd = value,
            "sm.l_lfd" => self.sm.l_lfd = value,
            "sm.l_mq" => self.sm.l_mq = value,
            "sm.l_md" => self.sm.l_md = value,
            "sm.poles" => self.sm.poles = int(value)?,
            "sm.j" => self.sm.j = value,

            "gov.k_p" => self.gov.k_p = value,
            "gov.k_i" => self.gov.k_i = value,

            "avr.k_pr" => self.avr.k_pr = value,
            "avr.k_ir" => self.avr.k_ir = value,
            "avr.k_dr" => self.avr.k_dr = value,
            "avr.t_dr" => self.avr.t_dr = value,
            "avr.k_a" => self.avr.k_a = value,
            "avr.t_a" => self.avr.t_a = value,
            "avr.k_e" => self.avr.k_e = value,
            "avr.t_e" => self.avr.t_e = value,
            "avr.v_ref" => self.avr.v_ref = value,

            "im.r_s" => self.im.r_s = value,
            "im.r_r" => self.im.r_r = value,
            "im.l_ls" => self.im.l_ls = value,
            "im.l_lr" => self.im.l_lr = value,
            "im.l_m" => self.im.l_m = value,
            "im.poles" => self.im.poles = int(value)?,
            "im.j" => self.im.j = value,
            "im.t_b" => self.im.t_b = value,

            "rl.r" => self.rl.r = value,
            "rl.l" => self.rl.l = value,

            "rect.phi" => self.rect.phi = value,
            "rect.l_dc" => self.rect.l_dc = value,
            "rect.r_dc" => self.rect.r_dc = value,
            "rect.c_dc" => self.rect.c_dc = value,
            "rect.g_load" => self.rect.g_load = value,

            "quanta.voltage" => self.quanta.voltage = value,
            "quanta.current" => self.quanta.current = value,
            "quanta.speed" => self.quanta.speed = value,
            "quanta.flux" => self.quanta.flux = value,
            "quanta.angle" => self.quanta.angle = value,
            "quanta.avr_state" => self.quanta.avr_state = value,
            "quanta.field" => self.quanta.field = value,
            "quanta.dc_voltage" => self.quanta.dc_voltage = value,

            _ => return Err(format!("unknown parameter path '{path}'")),
        }
        Ok(())
    }
}

/// Atom handles of the built system.
#[derive(Debug, Clone, Copy)]
pub struct MicrogridHandles {
    pub bus1: BusAtoms,
    pub bus2: BusAtoms,
    pub bus3: BusAtoms,
    pub cable12: CableHandles,
    pub cable23: CableHandles,
    pub cable13: CableHandles,
    pub avr: ExciterHandles,
    pub sm: SmHandles,
    pub im: ImHandles,
    pub rect: RectifierHandles,
    pub rl: RlHandles,
    /// RL load admittance scale (the active-power step target).
    pub load_scale: InputId,
    /// Exciter voltage setpoint (pu).
    pub v_ref: InputId,
}

/// The assembled reference system.
pub struct Microgrid {
    pub params: MicrogridParams,
    pub assembly: Assembly,
    pub handles: MicrogridHandles,
}

fn bus(net: &mut Netlist, name: &str, c: f64, g: f64, w: f64, quantum: f64) -> BusAtoms {
    let d = net.add_node(LimNode {
        label: format!("{name}.vd"),
        c,
        g,
        h: Signal::Const(0.0),
        vccs: vec![],
        cccs: vec![],
        extra: None,
        quantum,
    });
    let q = net.add_node(LimNode {
        label: format!("{name}.vq"),
        c,
        g,
        h: Signal::Const(0.0),
        vccs: vec![],
        cccs: vec![],
        extra: None,
        quantum,
    });
    // Rotating-frame cross coupling of the stray capacitance.
    net.node_mut(d).vccs.push((NodeRef::Node(q), w * c));
    net.node_mut(q).vccs.push((NodeRef::Node(d), -w * c));
    BusAtoms { d, q }
}

impl Microgrid {
    /// Builds and assembles the reference system; the expansion order fixes
    /// the 32-state layout.
    pub fn build(params: &MicrogridParams) -> Result<Self, NetlistError> {
        let p = params.clone();
        let w = p.w_s();
        let qd = p.quanta;
        let mut net = Netlist::new();

        let load_scale = net.input("load3.scale", 1.0);

        let bus1 = bus(&mut net, "bus1", p.bus_c, p.bus_g, w, qd.voltage);
        let bus2 = bus(&mut net, "bus2", p.bus_c, p.bus_g, w, qd.voltage);
        let bus3 = bus(&mut net, "bus3", p.bus_c, p.bus_g, w, qd.voltage);

        let mk_cable = |s: &CableSection| CableParams {
            r: s.r,
            l: s.l,
            c: s.c,
            g: s.g,
            w,
            current_quantum: qd.current,
        };
        let cable12 = expand_cable(&mut net, "cable12", &mk_cable(&p.cable12), bus1, bus2);
        let cable23 = expand_cable(&mut net, "cable23", &mk_cable(&p.cable23), bus2, bus3);
        let cable13 = expand_cable(&mut net, "cable13", &mk_cable(&p.cable13), bus1, bus3);

        let avr = expand_exciter(
            &mut net,
            "avr",
            &ExciterParams {
                k_pr: p.avr.k_pr,
                k_ir: p.avr.k_ir,
                k_dr: p.avr.k_dr,
                t_dr: p.avr.t_dr,
                k_a: p.avr.k_a,
                t_a: p.avr.t_a,
                k_e: p.avr.k_e,
                t_e: p.avr.t_e,
                v_ref: p.avr.v_ref,
                v_base_ll: p.v_base_ll,
                state_quantum: qd.avr_state,
                field_quantum: qd.field,
            },
            bus1,
        );

        let sm = expand_sync_machine(
            &mut net,
            "sm",
            &SyncMachineParams {
                r_s: p.sm.r_s,
                l_ls: p.sm.l_ls,
                r_kq: p.sm.r_kq,
                l_lkq: p.sm.l_lkq,
                r_kd: p.sm.r_kd,
                l_lkd: p.sm.l_lkd,
                r_fd: p.sm.r_fd,
                l_lfd: p.sm.l_lfd,
                l_mq: p.sm.l_mq,
                l_md: p.sm.l_md,
                poles: p.sm.poles,
                j: p.sm.j,
                v_base_ll: p.v_base_ll,
                current_quantum: qd.current,
                flux_quantum: qd.flux,
                speed_quantum: qd.speed,
            },
            &GovernorParams {
                k_p: p.gov.k_p,
                k_i: p.gov.k_i,
                w_s: w,
                angle_quantum: qd.angle,
            },
            bus1,
            avr.v_fd_pu,
        );

        let im = expand_induction_machine(
            &mut net,
            "im",
            &InductionMachineParams {
                r_s: p.im.r_s,
                r_r: p.im.r_r,
                l_ls: p.im.l_ls,
                l_lr: p.im.l_lr,
                l_m: p.im.l_m,
                poles: p.im.poles,
                j: p.im.j,
                t_b: p.im.t_b,
                w_s: w,
                current_quantum: qd.current,
                speed_quantum: qd.speed,
            },
            bus2,
        );

        let rect = expand_rectifier(
            &mut net,
            "rect",
            &RectifierParams {
                phi: p.rect.phi,
                l_dc: p.rect.l_dc,
                r_dc: p.rect.r_dc,
                c_dc: p.rect.c_dc,
                g_load: p.rect.g_load,
                coupling: if p.rect.power_conserving_coupling {
                    CouplingForm::PowerConserving
                } else {
                    CouplingForm::Printed
                },
                current_quantum: qd.current,
                voltage_quantum: qd.dc_voltage,
            },
            bus2,
        )?;

        let rl = expand_rl_load(
            &mut net,
            "load3",
            &RlLoadParams {
                r: p.rl.r,
                l: p.rl.l,
                w,
                current_quantum: qd.current,
            },
            bus3,
            Some(load_scale),
        );

        let assembly = crate::lim::assemble(&net)?;
        debug_assert_eq!(assembly.n(), 32);
        let v_ref = avr.v_ref_input;
        Ok(Self {
            params: p,
            assembly,
            handles: MicrogridHandles {
                bus1,
                bus2,
                bus3,
                cable12,
                cable23,
                cable13,
                avr,
                sm,
                im,
                rect,
                rl,
                load_scale,
                v_ref,
            },
        })
    }

    /// Analytic flat start for the equilibrium solve.
    ///
    /// Works outward from rated q-axis voltage on every bus: load and
    /// rectifier currents from their own impedances, the induction machine
    /// from a linear solve of its winding equations at a torque-balanced
    /// slip, the generator stator current from the load sum, and the rotor
    /// fluxes plus exciter chain back-solved from the stator balance. The
    /// point is close enough that Newton stays in the physical basin
    /// (positive field flux) instead of the armature-flux mirror solution.
    pub fn initial_guess(&self) -> Vec<f64> {
        let p = &self.params;
        let h = &self.handles;
        let w = p.w_s();
        let v = p.v_base_ll * p.avr.v_ref;
        let mut x = vec![0.0; self.assembly.n()];
        for bus in [h.bus1, h.bus2, h.bus3] {
            x[bus.q] = v;
            x[bus.d] = 0.0;
        }

        // RL load current from its impedance at rated voltage.
        let z2 = p.rl.r * p.rl.r + (w * p.rl.l) * (w * p.rl.l);
        x[h.rl.i_q] = v * p.rl.r / z2;
        x[h.rl.i_d] = -v * w * p.rl.l / z2;

        // dc rail near its driven level.
        let a = 2.0 * (3.0 * 3.0_f64.sqrt() / (2.0 * std::f64::consts::PI)).sqrt();
        let s_d = a * p.rect.phi.cos();
        let s_q = -a * p.rect.phi.sin();
        let v_g = if p.rect.power_conserving_coupling {
            s_q * v
        } else {
            v / s_q
        };
        let i_dc = v_g / (p.rect.r_dc + 1.0 / p.rect.g_load.max(1e-9));
        x[h.rect.v_dc] = i_dc / p.rect.g_load.max(1e-9);
        x[h.rect.i_dc] = i_dc;

        // Induction machine: winding equilibrium is linear at fixed slip;
        // bisect the slip until the air-gap torque carries the cubic load.
        let im = InductionMachineParams {
            r_s: p.im.r_s,
            r_r: p.im.r_r,
            l_ls: p.im.l_ls,
            l_lr: p.im.l_lr,
            l_m: p.im.l_m,
            poles: p.im.poles,
            j: p.im.j,
            t_b: p.im.t_b,
            w_s: w,
            current_quantum: 1.0,
            speed_quantum: 1.0,
        };
        let im_steady = |w_r: f64| -> [f64; 4] {
            use nalgebra::{DMatrix, DVector};
            let slip = w - w_r;
            let (l_ss, l_rr, l_m) = (im.l_ss(), im.l_rr(), im.l_m);
            // Unknowns (i_qs, i_ds, i_qr, i_dr); rows are the four winding
            // voltage balances with derivatives zeroed.
            #[rustfmt::skip]
            let m = DMatrix::from_row_slice(4, 4, &[
                im.r_s,        w * l_ss,    0.0,          w * l_m,
                -w * l_ss,     im.r_s,      -w * l_m,     0.0,
                0.0,           slip * l_m,  im.r_r,       slip * l_rr,
                -slip * l_m,   0.0,         -slip * l_rr, im.r_r,
            ]);
            let rhs = DVector::from_row_slice(&[v, 0.0, 0.0, 0.0]);
            match m.lu().solve(&rhs) {
                Some(sol) => [sol[0], sol[1], sol[2], sol[3]],
                None => [0.0; 4],
            }
        };
        let torque_misfit = |w_r: f64| -> f64 {
            let [i_qs, i_ds, i_qr, i_dr] = im_steady(w_r);
            let psi_qs = im.l_ls * i_qs + im.l_m * (i_qs + i_qr);
            let psi_ds = im.l_ls * i_ds + im.l_m * (i_ds + i_dr);
            let t_e = 3.0 * im.poles as f64 / 4.0 * (psi_ds * i_qs - psi_qs * i_ds);
            t_e - im.t_b * (w_r / w).powi(3)
        };
        let mut lo = 0.9 * w;
        let mut hi = w - 1e-9;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if torque_misfit(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w_im = 0.5 * (lo + hi);
        let [im_iqs, im_ids, im_iqr, im_idr] = im_steady(w_im);
        x[h.im.i_qs] = im_iqs;
        x[h.im.i_ds] = im_ids;
        x[h.im.i_qr] = im_iqr;
        x[h.im.i_dr] = im_idr;
        x[h.im.omega] = w_im;

        // Generator stator supplies the aggregate load plus the shunt and
        // rotating-frame capacitive draws of the bus nodes (motor
        // convention: generation is negative stator current).
        let i_gd = s_d * i_dc;
        let i_gq = s_q * i_dc;
        let c_node_total = 3.0 * p.bus_c
            + p.cable12.c
            + p.cable23.c
            + p.cable13.c;
        let shunt_q = (3.0 * p.bus_g + 0.5 * (p.cable12.g + p.cable23.g + p.cable13.g)) * v;
        let cap_d = -w * c_node_total * v;
        let sm_iqs = -(x[h.rl.i_q] + im_iqs + i_gq + shunt_q);
        let sm_ids = -(x[h.rl.i_d] + im_ids + i_gd + cap_d);
        x[h.sm.i_qs] = sm_iqs;
        x[h.sm.i_ds] = sm_ids;
        x[h.sm.omega] = w;

        // Stator voltage balance fixes the flux linkages, the rotor decay
        // equations fix the winding fluxes, and the field equation fixes
        // the required field voltage.
        let sm = SyncMachineParams {
            r_s: p.sm.r_s,
            l_ls: p.sm.l_ls,
            r_kq: p.sm.r_kq,
            l_lkq: p.sm.l_lkq,
            r_kd: p.sm.r_kd,
            l_lkd: p.sm.l_lkd,
            r_fd: p.sm.r_fd,
            l_lfd: p.sm.l_lfd,
            l_mq: p.sm.l_mq,
            l_md: p.sm.l_md,
            poles: p.sm.poles,
            j: p.sm.j,
            v_base_ll: p.v_base_ll,
            current_quantum: 1.0,
            flux_quantum: 1.0,
            speed_quantum: 1.0,
        };
        let psi_ds = (v - sm.r_s * sm_iqs) / w;
        let psi_qs = (sm.r_s * sm_ids - 0.0) / w;
        let psi_d = psi_ds - sm.l_d() * sm_ids;
        let psi_q = psi_qs - sm.l_q() * sm_iqs;
        let c_q = sm.l_aq() / sm.l_lkq;
        let c_kd = sm.l_ad() / sm.l_lkd;
        let c_fd = sm.l_ad() / sm.l_lfd;
        x[h.sm.psi_kq] = psi_q / c_q;
        let psi_md = psi_d + sm.l_ad() * sm_ids;
        let psi_kd = psi_md;
        let psi_fd = (psi_d - c_kd * psi_kd) / c_fd;
        x[h.sm.psi_kd] = psi_kd;
        x[h.sm.psi_fd] = psi_fd;
        let v_fd = -(sm.r_fd / sm.l_lfd) * (psi_md - psi_fd);

        // Exciter chain holding that field voltage at zero error.
        let vfd_pu = v_fd / p.v_base_ll;
        let x3 = vfd_pu * p.avr.t_a * p.avr.k_e / p.avr.k_a;
        let x2 = x3 * p.avr.t_dr / (p.avr.t_a * p.avr.k_ir);
        x[h.avr.v_fd_pu] = vfd_pu;
        x[h.avr.x3] = x3;
        x[h.avr.x2] = x2;

        // Governor integrator carrying the electrical torque.
        let rates = super::sync_machine_rates(
            &sm,
            x[h.sm.psi_kq],
            x[h.sm.psi_kd],
            x[h.sm.psi_fd],
            sm_iqs,
            sm_ids,
            v_fd,
            0.0,
        );
        x[h.sm.theta] = rates.t_e / p.gov.k_i.max(1e-12);
        x
    }
}
