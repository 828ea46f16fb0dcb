//! Damped-Newton equilibrium initialisation.

use nalgebra::DVector;

use super::{DenseSystem, SolverError};

/// Outcome of an equilibrium solve.
#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub x: Vec<f64>,
    /// Infinity norm of the rate vector at the solution.
    pub residual: f64,
    pub iterations: usize,
}

/// Snaps each component to the nearest multiple of its quantum relative to
/// the given anchor: `anchor + round((x - anchor)/dq) * dq`.
pub fn snap_to_quanta(x: &[f64], anchors: &[f64], quanta: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(anchors)
        .zip(quanta)
        .map(|((&xi, &ai), &dq)| ai + ((xi - ai) / dq).round() * dq)
        .collect()
}

/// Damped Newton iteration on `f(x) = 0` to an infinity-norm residual of
/// `tol` (default 1e-9), starting from `guess`.
///
/// The result is snapped per-component to the atom quantum grid anchored at
/// the solution itself, so the snapped point still satisfies the residual
/// bound and a quantized run started there generates no events. Anchoring
/// the quantum grid elsewhere would displace the solution by up to half a
/// quantum and multiply the residual by the local Jacobian scale, which
/// would defeat the steady-state start.
pub fn solve_equilibrium(
    dense: &DenseSystem,
    guess: &[f64],
    u: &[f64],
    tol: f64,
    quanta: &[f64],
) -> Result<EquilibriumReport, SolverError> {
    const MAX_ITER: usize = 100;
    let n = dense.n();
    let mut x = DVector::from_column_slice(guess);
    let mut f = dense.f_vec(x.as_slice(), u);
    let mut history: Vec<f64> = vec![f.amax()];

    let mut iterations = 0;
    while f.amax() > tol && iterations < MAX_ITER {
        iterations += 1;
        let jac = dense.jacobian(x.as_slice(), u);
        let lu = jac.lu();
        let Some(step) = lu.solve(&(-&f)) else {
            return Err(SolverError::NewtonDiverged {
                iterations,
                history,
            });
        };
        // Backtracking line search on the residual norm.
        let norm0 = f.amax();
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = &x + &step * lambda;
            let f_trial = dense.f_vec(trial.as_slice(), u);
            if f_trial.amax() < norm0 || f_trial.amax() <= tol {
                x = trial;
                f = f_trial;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            history.push(norm0);
            return Err(SolverError::NewtonDiverged {
                iterations,
                history,
            });
        }
        history.push(f.amax());
    }

    if f.amax() > tol {
        return Err(SolverError::NewtonDiverged {
            iterations,
            history,
        });
    }

    // Snap onto the quantum grid anchored at the solution and re-verify.
    let anchors: Vec<f64> = x.as_slice().to_vec();
    let snapped = snap_to_quanta(x.as_slice(), &anchors, quanta);
    let mut f_snap = vec![0.0; n];
    dense.f(&snapped, u, &mut f_snap);
    let residual = f_snap.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let limit = (tol * 1e3).max(1e-6);
    if residual > limit {
        return Err(SolverError::SnapResidual { residual, limit });
    }
    Ok(EquilibriumReport {
        x: snapped,
        residual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qss::{DerivativeClosure, QdlSystem};
    use std::sync::Arc;

    #[test]
    fn linear_system_converges_to_fixed_point() {
        // xdot = A (x - x*) with x* = (2, -1).
        let sys = QdlSystem::new(
            vec![
                DerivativeClosure::new(
                    vec![0, 1],
                    vec![],
                    Arc::new(|s: &[f64], _: &[f64]| -3.0 * (s[0] - 2.0) + (s[1] + 1.0)),
                ),
                DerivativeClosure::new(
                    vec![0, 1],
                    vec![],
                    Arc::new(|s: &[f64], _: &[f64]| (s[0] - 2.0) - 2.0 * (s[1] + 1.0)),
                ),
            ],
            vec!["a".into(), "b".into()],
            vec![1e-6, 1e-6],
            vec![],
        );
        let dense = DenseSystem::new(&sys);
        let rep = solve_equilibrium(&dense, &[0.0, 0.0], &[], 1e-9, &[1e-6, 1e-6]).unwrap();
        assert!((rep.x[0] - 2.0).abs() < 1e-8);
        assert!((rep.x[1] + 1.0).abs() < 1e-8);
        assert!(rep.residual <= 1e-9);
    }

    #[test]
    fn no_equilibrium_reports_divergence() {
        // xdot = 1 has no fixed point.
        let sys = QdlSystem::new(
            vec![DerivativeClosure::new(
                vec![],
                vec![],
                Arc::new(|_: &[f64], _: &[f64]| 1.0),
            )],
            vec!["x".into()],
            vec![1e-3],
            vec![],
        );
        let dense = DenseSystem::new(&sys);
        let err = solve_equilibrium(&dense, &[0.0], &[], 1e-9, &[1e-3]).unwrap_err();
        match err {
            SolverError::NewtonDiverged { history, .. } => assert!(!history.is_empty()),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn snap_rounds_to_anchor_grid() {
        let x = [1.2349, -0.56];
        let anchors = [1.0, 0.0];
        let quanta = [0.01, 0.1];
        let s = snap_to_quanta(&x, &anchors, &quanta);
        assert!((s[0] - 1.23).abs() < 1e-12);
        assert!((s[1] + 0.6).abs() < 1e-12);
    }
}
