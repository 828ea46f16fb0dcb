//! Flattened state-space view of an assembled system.

use nalgebra::{DMatrix, DVector};

use crate::qss::QdlSystem;

/// Dense derivative and Jacobian over the assembled closures.
///
/// The derivative map evaluates every atom's closure at a common state
/// vector; the Jacobian is obtained by central differences with a
/// per-column step of `max(1e-6, 1e-6 |x_i|)`.
pub struct DenseSystem<'a> {
    sys: &'a QdlSystem,
}

impl<'a> DenseSystem<'a> {
    pub fn new(sys: &'a QdlSystem) -> Self {
        Self { sys }
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    pub fn labels(&self) -> &[String] {
        &self.sys.labels
    }

    pub fn system(&self) -> &QdlSystem {
        self.sys
    }

    /// Rate vector at `x` with inputs `u`.
    pub fn f(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        self.sys.eval_all(x, u, out);
    }

    pub fn f_vec(&self, x: &[f64], u: &[f64]) -> DVector<f64> {
        let mut out = vec![0.0; self.n()];
        self.f(x, u, &mut out);
        DVector::from_vec(out)
    }

    /// Central-difference Jacobian at `x`.
    pub fn jacobian(&self, x: &[f64], u: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let mut jac = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        let mut f_hi = vec![0.0; n];
        let mut f_lo = vec![0.0; n];
        for j in 0..n {
            let step = (1e-6_f64).max(1e-6 * x[j].abs());
            let saved = xp[j];
            xp[j] = saved + step;
            self.f(&xp, u, &mut f_hi);
            xp[j] = saved - step;
            self.f(&xp, u, &mut f_lo);
            xp[j] = saved;
            let inv = 1.0 / (2.0 * step);
            for i in 0..n {
                jac[(i, j)] = (f_hi[i] - f_lo[i]) * inv;
            }
        }
        jac
    }

    /// Eigenvalues of the Jacobian at `x` (complex, unordered).
    pub fn eigenvalues(&self, x: &[f64], u: &[f64]) -> Vec<nalgebra::Complex<f64>> {
        let jac = self.jacobian(x, u);
        jac.complex_eigenvalues().iter().copied().collect()
    }

    /// Largest eigenvalue magnitude of the Jacobian at `x`; used for the
    /// spectral step-size rule `h <= 0.1 / |lambda_max|`.
    pub fn lambda_max(&self, x: &[f64], u: &[f64]) -> f64 {
        self.eigenvalues(x, u)
            .iter()
            .map(|l| l.norm())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qss::DerivativeClosure;
    use std::sync::Arc;

    fn two_state_system() -> QdlSystem {
        // v' = (i - 0.5 v) / 2, i' = (-v - 3 i) / 0.1
        QdlSystem::new(
            vec![
                DerivativeClosure::new(
                    vec![0, 1],
                    vec![],
                    Arc::new(|s: &[f64], _: &[f64]| (s[1] - 0.5 * s[0]) / 2.0),
                ),
                DerivativeClosure::new(
                    vec![0, 1],
                    vec![],
                    Arc::new(|s: &[f64], _: &[f64]| (-s[0] - 3.0 * s[1]) / 0.1),
                ),
            ],
            vec!["v".into(), "i".into()],
            vec![1e-3, 1e-3],
            vec![],
        )
    }

    #[test]
    fn jacobian_matches_hand_derived_matrix() {
        let sys = two_state_system();
        let dense = DenseSystem::new(&sys);
        let jac = dense.jacobian(&[0.7, -0.3], &[]);
        let expected = [[-0.25, 0.5], [-10.0, -30.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (jac[(i, j)] - expected[i][j]).abs() < 1e-6,
                    "J[{i}][{j}] = {}",
                    jac[(i, j)]
                );
            }
        }
    }

    #[test]
    fn dense_f_equals_closure_sum() {
        let sys = two_state_system();
        let dense = DenseSystem::new(&sys);
        let x = [1.5, 2.5];
        let mut out = [0.0; 2];
        dense.f(&x, &[], &mut out);
        for i in 0..2 {
            let direct = sys.closures[i].eval(&x, &[]);
            assert_eq!(out[i], direct);
        }
    }

    #[test]
    fn eigenvalues_of_linear_system() {
        let sys = two_state_system();
        let dense = DenseSystem::new(&sys);
        let eigs = dense.eigenvalues(&[0.0, 0.0], &[]);
        // trace = -30.25, det = -0.25*-30 + 10*0.5 = 12.5
        let trace: f64 = eigs.iter().map(|l| l.re).sum();
        let det = eigs[0] * eigs[1];
        assert!((trace + 30.25).abs() < 1e-4, "trace = {trace}");
        assert!((det.re - 12.5).abs() < 1e-2, "det = {det}");
        assert!(det.im.abs() < 1e-8);
    }
}
