//! Atom state, the LIQSS1 quantized-output selection rule, and the
//! time-advance function.

use std::sync::Arc;

use super::{AtomId, InputId};

/// Evaluatable mapping from quantized neighbour values and external inputs
/// to the time derivative of one state variable.
///
/// The same closure is evaluated on the quantized vector `q` during event
/// simulation and on the raw state vector `x` by the dense reference solver,
/// so both integration paths share one definition of the system equations.
/// Evaluation must be pure and deterministic, and `deps` must list exactly
/// the state slots the closure reads.
#[derive(Clone)]
pub struct DerivativeClosure {
    deps: Vec<AtomId>,
    input_deps: Vec<InputId>,
    eval: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
}

impl DerivativeClosure {
    pub fn new(
        mut deps: Vec<AtomId>,
        mut input_deps: Vec<InputId>,
        eval: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
    ) -> Self {
        deps.sort_unstable();
        deps.dedup();
        input_deps.sort_unstable();
        input_deps.dedup();
        Self {
            deps,
            input_deps,
            eval,
        }
    }

    /// State slots this closure reads.
    pub fn deps(&self) -> &[AtomId] {
        &self.deps
    }

    /// External input slots this closure reads.
    pub fn input_deps(&self) -> &[InputId] {
        &self.input_deps
    }

    #[inline]
    pub fn eval(&self, state: &[f64], inputs: &[f64]) -> f64 {
        (self.eval)(state, inputs)
    }
}

impl std::fmt::Debug for DerivativeClosure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DerivativeClosure")
            .field("deps", &self.deps)
            .field("input_deps", &self.input_deps)
            .finish()
    }
}

/// One state variable's continuous value, quantized output, quantum, and
/// event schedule.
#[derive(Debug, Clone)]
pub struct QdlAtom {
    /// Atom index within the system.
    pub id: AtomId,
    /// Continuous internal value (state units).
    pub x: f64,
    /// Quantized output value (state units).
    pub q: f64,
    /// Quantum (state units, > 0).
    pub dq: f64,
    /// Current derivative estimate (state units per second).
    pub dxdt: f64,
    /// Running estimate of the diagonal Jacobian entry `∂f/∂q` (1/s).
    pub a_diag: f64,
    /// Time of the last update (s).
    pub t_last: f64,
    /// Scheduled internal event time (s, may be +infinity).
    pub t_next: f64,
    /// Cumulative updates, internal plus external.
    pub update_count: u64,
    /// Internal transitions only (quantized-output recomputations).
    pub internal_count: u64,
    /// External transitions only (input-change reschedules).
    pub external_count: u64,
}

impl QdlAtom {
    pub fn new(id: AtomId, x0: f64, dq: f64) -> Self {
        assert!(dq > 0.0, "quantum must be positive (atom {id})");
        Self {
            id,
            x: x0,
            q: x0,
            dq,
            dxdt: 0.0,
            a_diag: 0.0,
            t_last: 0.0,
            t_next: f64::INFINITY,
            update_count: 0,
            internal_count: 0,
            external_count: 0,
        }
    }
}

/// Result of the LIQSS1 quantized-output selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QSelection {
    /// New quantized output.
    pub q: f64,
    /// Derivative re-evaluated at the chosen output.
    pub dxdt: f64,
    /// Updated diagonal Jacobian estimate.
    pub a_diag: f64,
}

#[inline]
fn divided_difference(prev: f64, p0: (f64, f64), p1: (f64, f64)) -> f64 {
    let dq = p1.0 - p0.0;
    if dq != 0.0 {
        let a = (p1.1 - p0.1) / dq;
        if a.is_finite() {
            return a;
        }
    }
    prev
}

/// LIQSS1 selection of the next quantized output for one atom.
///
/// Candidates are the band edges `q_prev ± dq` and, when the derivative
/// points back inside the band from both edges, the root of the local
/// linear model `q_hat = q_prev − f(q_prev)/a_diag` clamped to the band.
/// The band-edge tests use strict signs: a candidate edge is taken only if
/// the state actually moves toward it there. `f_prev` must be the
/// derivative at `(q_prev, current neighbour values)`, and `f` evaluates
/// the derivative as a function of this atom's own quantized value with
/// neighbours frozen.
///
/// `a_diag` is refreshed from the two most recent `(q, f)` evaluations by
/// divided difference whenever they are separated in `q`. If the implicit
/// branch is required while `a_diag` is zero, the output is held at
/// `q_prev` with the derivative forced to zero so that the atom stalls
/// until an external transition arrives.
pub fn liqss1_select_q(
    q_prev: f64,
    dq: f64,
    a_diag: f64,
    f_prev: f64,
    mut f: impl FnMut(f64) -> f64,
) -> QSelection {
    debug_assert!(dq > 0.0);
    let q_hi = q_prev + dq;
    let q_lo = q_prev - dq;

    let f_hi = f(q_hi);
    let mut a = divided_difference(a_diag, (q_prev, f_prev), (q_hi, f_hi));
    if f_hi > 0.0 {
        return QSelection {
            q: q_hi,
            dxdt: f_hi,
            a_diag: a,
        };
    }

    let f_lo = f(q_lo);
    a = divided_difference(a, (q_hi, f_hi), (q_lo, f_lo));
    if f_lo < 0.0 {
        return QSelection {
            q: q_lo,
            dxdt: f_lo,
            a_diag: a,
        };
    }

    // Both edges point back inside the band: linearly implicit fixed point.
    if a == 0.0 {
        // Stall-avoidance rule: hold the output and wait for an input change.
        return QSelection {
            q: q_prev,
            dxdt: 0.0,
            a_diag: a,
        };
    }
    let q_hat = (q_prev - f_prev / a).clamp(q_lo, q_hi);
    let f_hat = f(q_hat);
    a = divided_difference(a, (q_lo, f_lo), (q_hat, f_hat));
    QSelection {
        q: q_hat,
        dxdt: f_hat,
        a_diag: a,
    }
}

/// Time for the continuous state to drift from `x` to the quantum band edge
/// of `q` at constant slope `dxdt`.
///
/// Returns +infinity for a zero slope; never returns a negative value (a
/// state marginally past the edge from rounding maps to zero).
#[inline]
pub fn time_to_boundary(x: f64, q: f64, dq: f64, dxdt: f64) -> f64 {
    debug_assert!(dq > 0.0);
    if dxdt > 0.0 {
        ((q + dq - x) / dxdt).max(0.0)
    } else if dxdt < 0.0 {
        ((q - dq - x) / dxdt).max(0.0)
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_zero_field_holds_output() {
        // Identically zero derivative: output unchanged, slope zero.
        let sel = liqss1_select_q(0.0, 0.1, 0.0, 0.0, |_| 0.0);
        assert_eq!(sel.q, 0.0);
        assert_eq!(sel.dxdt, 0.0);
    }

    #[test]
    fn select_rising_edge() {
        // xdot = -100(x - 1) at x = 0: derivative at the upper candidate is
        // +90, so the state moves toward q_prev + dq.
        let f = |q: f64| -100.0 * (q - 1.0);
        let sel = liqss1_select_q(0.0, 0.1, 0.0, f(0.0), f);
        assert_eq!(sel.q, 0.1);
        assert!((sel.dxdt - 90.0).abs() < 1e-12);
        assert!((sel.a_diag + 100.0).abs() < 1e-9);
    }

    #[test]
    fn select_implicit_root_inside_band() {
        // xdot = -100(x - 0.05): both band edges point back inside, so the
        // root of the linear model is selected and the slope vanishes there.
        let f = |q: f64| -100.0 * (q - 0.05);
        let sel = liqss1_select_q(0.0, 0.1, 0.0, f(0.0), f);
        assert!((sel.q - 0.05).abs() < 1e-12);
        assert!(sel.dxdt.abs() < 1e-9);
        assert!((sel.a_diag + 100.0).abs() < 1e-9);
    }

    #[test]
    fn select_falling_edge() {
        let f = |q: f64| -q;
        // At q_prev = 1 with x on the lower edge: f(1.1) < 0, f(0.9) < 0.
        let sel = liqss1_select_q(1.0, 0.1, 0.0, f(1.0), f);
        assert!((sel.q - 0.9).abs() < 1e-12);
        assert!((sel.dxdt + 0.9).abs() < 1e-12);
    }

    #[test]
    fn select_stall_when_diagonal_vanishes() {
        // Constant negative derivative at the upper edge, constant positive
        // at the lower edge cannot happen for a constant f; force the stall
        // path with a flat derivative that still requires the implicit
        // branch: f == 0 everywhere with a nonzero prior estimate cleared.
        let sel = liqss1_select_q(2.0, 0.5, 0.0, 0.0, |_| 0.0);
        assert_eq!(sel.q, 2.0);
        assert_eq!(sel.dxdt, 0.0);
        assert_eq!(sel.a_diag, 0.0);
    }

    #[test]
    fn boundary_unit_slope() {
        assert!((time_to_boundary(0.0, 0.0, 0.1, 1.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn boundary_zero_slope_is_infinite() {
        assert_eq!(time_to_boundary(0.3, 0.3, 0.1, 0.0), f64::INFINITY);
    }

    #[test]
    fn boundary_falling() {
        let sigma = time_to_boundary(0.03, 0.0, 0.1, -2.0);
        assert!((sigma - 0.065).abs() < 1e-15);
    }

    #[test]
    fn boundary_never_negative() {
        // State marginally past the edge from rounding clamps to zero.
        let sigma = time_to_boundary(0.100000001, 0.0, 0.1, 1.0);
        assert!(sigma >= 0.0);
        assert!(sigma < 1e-8);
    }
}
