//! Turbo-governor: prime mover and speed governor lumped into one
//! equivalent PI torque controller.

use crate::lim::{AuxState, ExtraSource, Netlist, StateId};

#[derive(Debug, Clone, Copy)]
pub struct GovernorParams {
    /// Proportional torque gain (N·m·s/rad).
    pub k_p: f64,
    /// Integral torque gain (N·m/rad).
    pub k_i: f64,
    /// Synchronous speed setpoint (rad/s, > 0).
    pub w_s: f64,
    /// Quantum of the integrator-angle atom (rad).
    pub angle_quantum: f64,
}

/// Mechanical torque and integrator rate from the speed deviation:
/// `δ_r = ω_s − ω_r`, `T_m = K_p δ_r + K_i θ_r`, `dθ_r/dt = δ_r`.
#[inline]
pub fn governor_torque(p: &GovernorParams, w_r: f64, theta_r: f64) -> (f64, f64) {
    let delta = p.w_s - w_r;
    (p.k_p * delta + p.k_i * theta_r, delta)
}

/// Adds the integrator-angle atom. The torque itself is applied by the
/// machine's mechanical node, which reads this atom.
pub fn expand_governor(
    net: &mut Netlist,
    label: &str,
    p: &GovernorParams,
    omega_atom: StateId,
) -> StateId {
    let w_s = p.w_s;
    net.add_aux(AuxState {
        label: format!("{label}.theta"),
        rate: ExtraSource::new(vec![omega_atom], vec![], move |s, _| w_s - s[omega_atom]),
        quantum: p.angle_quantum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> GovernorParams {
        GovernorParams {
            k_p: 2.0,
            k_i: 5.0,
            w_s: 377.0,
            angle_quantum: 1e-4,
        }
    }

    #[test]
    fn synchronous_equilibrium_is_torque_free() {
        let (t_m, dtheta) = governor_torque(&params(), 377.0, 0.0);
        assert_eq!(t_m, 0.0);
        assert_eq!(dtheta, 0.0);
    }

    #[test]
    fn pure_proportional_response() {
        let p = GovernorParams {
            k_i: 0.0,
            ..params()
        };
        let (t_m, _) = governor_torque(&p, 376.0, 3.0);
        assert_eq!(t_m, 2.0);
    }

    #[test]
    fn integral_term_adds_bias() {
        let (t_m, dtheta) = governor_torque(&params(), 377.0, 1.5);
        assert_eq!(t_m, 7.5);
        assert_eq!(dtheta, 0.0);
    }
}
