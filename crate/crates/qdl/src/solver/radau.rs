//! Fixed-step 3-stage Radau IIA (order 5) with simplified Newton stages.

use nalgebra::{DMatrix, DVector};

use crate::qss::InputEvent;

use super::{DenseSystem, SolverError};

const SQRT_6: f64 = 2.449489742783178;

/// Butcher tableau of the 3-stage Radau IIA method. The last stage sits at
/// c = 1 and its row equals the quadrature weights, so the step update is
/// `x + Z_3` (stiffly accurate).
fn tableau() -> ([f64; 3], [[f64; 3]; 3]) {
    let c = [
        (4.0 - SQRT_6) / 10.0,
        (4.0 + SQRT_6) / 10.0,
        1.0,
    ];
    let a = [
        [
            (88.0 - 7.0 * SQRT_6) / 360.0,
            (296.0 - 169.0 * SQRT_6) / 1800.0,
            (-2.0 + 3.0 * SQRT_6) / 225.0,
        ],
        [
            (296.0 + 169.0 * SQRT_6) / 1800.0,
            (88.0 + 7.0 * SQRT_6) / 360.0,
            (-2.0 - 3.0 * SQRT_6) / 225.0,
        ],
        [
            (16.0 - SQRT_6) / 36.0,
            (16.0 + SQRT_6) / 36.0,
            1.0 / 9.0,
        ],
    ];
    (c, a)
}

#[derive(Debug, Clone)]
pub struct RadauConfig {
    /// Fixed step (s, > 0).
    pub h: f64,
    /// Relative stage-increment tolerance for the simplified Newton.
    pub newton_tol: f64,
    pub max_newton_iter: usize,
    /// Record every k-th accepted step in the trajectory.
    pub record_every: usize,
}

impl RadauConfig {
    pub fn new(h: f64) -> Self {
        Self {
            h,
            newton_tol: 1e-10,
            max_newton_iter: 20,
            record_every: 1,
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.h > 0.0) {
            return Err(SolverError::BadConfig("step must be positive".into()));
        }
        if !(self.newton_tol > 0.0) {
            return Err(SolverError::BadConfig("tolerance must be positive".into()));
        }
        if self.max_newton_iter == 0 || self.record_every == 0 {
            return Err(SolverError::BadConfig(
                "iteration and record counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Default step from the spectral rule `h <= 0.1/|lambda_max|`, clamped to
/// a sane fraction of the horizon.
pub fn default_step(lambda_max: f64, horizon: f64) -> f64 {
    let cap = horizon / 50.0;
    if lambda_max > 0.0 {
        (0.1 / lambda_max).min(cap)
    } else {
        cap
    }
}

/// Uniformly sampled trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// One row of length n per sample.
    pub states: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Column of one state across all samples.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|row| row[i]).collect()
    }
}

struct StageSolver<'a, 'b> {
    dense: &'a DenseSystem<'b>,
    n: usize,
    a: [[f64; 3]; 3],
    z: DVector<f64>,
    g: DVector<f64>,
    f_stage: Vec<DVector<f64>>,
    x_stage: Vec<f64>,
}

impl<'a, 'b> StageSolver<'a, 'b> {
    fn new(dense: &'a DenseSystem<'b>) -> Self {
        let n = dense.n();
        let (_, a) = tableau();
        Self {
            dense,
            n,
            a,
            z: DVector::zeros(3 * n),
            g: DVector::zeros(3 * n),
            f_stage: (0..3).map(|_| DVector::zeros(n)).collect(),
            x_stage: vec![0.0; n],
        }
    }

    /// Builds and factorises `I - h (A ⊗ J)` for the step-start Jacobian.
    fn iteration_matrix(&self, h: f64, jac: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(3 * n, 3 * n);
        for bi in 0..3 {
            for bj in 0..3 {
                let coeff = -h * self.a[bi][bj];
                for r in 0..n {
                    for c in 0..n {
                        m[(bi * n + r, bj * n + c)] = coeff * jac[(r, c)];
                    }
                }
            }
        }
        for d in 0..3 * n {
            m[(d, d)] += 1.0;
        }
        m
    }

    /// One step from `x`; the stage equations are solved by simplified
    /// Newton with the Jacobian frozen at the step start.
    fn step(
        &mut self,
        t: f64,
        x: &[f64],
        u: &[f64],
        h: f64,
        jac: &DMatrix<f64>,
        tol: f64,
        max_iter: usize,
    ) -> Result<Vec<f64>, SolverError> {
        let n = self.n;
        let lu = self.iteration_matrix(h, jac).lu();
        self.z.fill(0.0);
        let scale = x
            .iter()
            .fold(1.0_f64, |m, v| m.max(v.abs()));

        let mut last_norm = f64::INFINITY;
        let mut bad_steps = 0;
        for _ in 0..max_iter {
            for s in 0..3 {
                for i in 0..n {
                    self.x_stage[i] = x[i] + self.z[s * n + i];
                }
                let fs = &mut self.f_stage[s];
                self.dense.f(&self.x_stage, u, fs.as_mut_slice());
            }
            for s in 0..3 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, fj) in self.f_stage.iter().enumerate() {
                        acc += self.a[s][j] * fj[i];
                    }
                    self.g[s * n + i] = self.z[s * n + i] - h * acc;
                }
            }
            let Some(dz) = lu.solve(&(-&self.g)) else {
                return Err(SolverError::SingularMatrix { t });
            };
            self.z += &dz;
            let norm = dz.amax();
            if norm <= tol * scale {
                let mut next = x.to_vec();
                for i in 0..n {
                    next[i] += self.z[2 * n + i];
                }
                return Ok(next);
            }
            if norm > 2.0 * last_norm {
                bad_steps += 1;
                if bad_steps >= 2 {
                    return Err(SolverError::StageDiverged {
                        t,
                        iterations: max_iter,
                    });
                }
            }
            last_norm = norm;
        }
        Err(SolverError::StageDiverged {
            t,
            iterations: max_iter,
        })
    }
}

/// A single Radau IIA step from `x` with step `h` from the configuration.
pub fn radau_step(
    dense: &DenseSystem,
    t: f64,
    x: &[f64],
    u: &[f64],
    cfg: &RadauConfig,
) -> Result<Vec<f64>, SolverError> {
    cfg.validate()?;
    let jac = dense.jacobian(x, u);
    let mut solver = StageSolver::new(dense);
    solver.step(t, x, u, cfg.h, &jac, cfg.newton_tol, cfg.max_newton_iter)
}

/// Fixed-step march from `t0` to `t_end` with piecewise-constant inputs.
///
/// Scheduled input changes split the run into segments; within each segment
/// the step is rounded down so an integer number of steps lands exactly on
/// the segment boundary, keeping the recorded grid uniform per segment.
pub fn integrate(
    dense: &DenseSystem,
    x0: &[f64],
    u0: &[f64],
    schedule: &[InputEvent],
    t0: f64,
    t_end: f64,
    cfg: &RadauConfig,
) -> Result<Trajectory, SolverError> {
    cfg.validate()?;
    for w in schedule.windows(2) {
        if w[1].t < w[0].t {
            return Err(SolverError::BadConfig("schedule not sorted".into()));
        }
    }
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![x0.to_vec()],
        labels: dense.labels().to_vec(),
    };
    let mut x = x0.to_vec();
    let mut u = u0.to_vec();
    let mut t = t0;
    let mut solver = StageSolver::new(dense);
    let mut sched_pos = 0usize;
    let mut step_counter = 0usize;

    while t < t_end - 1e-12 * t_end.max(1.0) {
        // Apply any disturbances scheduled at the current time.
        while sched_pos < schedule.len() && schedule[sched_pos].t <= t {
            let ev = schedule[sched_pos];
            u[ev.input] = ev.value;
            sched_pos += 1;
        }
        let seg_end = schedule
            .get(sched_pos)
            .map(|e| e.t)
            .unwrap_or(t_end)
            .min(t_end);
        let seg_len = seg_end - t;
        if seg_len <= 0.0 {
            t = seg_end;
            continue;
        }
        let steps = (seg_len / cfg.h).ceil().max(1.0) as usize;
        let h = seg_len / steps as f64;
        let seg_start = t;
        for k in 1..=steps {
            let jac = dense.jacobian(&x, &u);
            x = solver.step(t, &x, &u, h, &jac, cfg.newton_tol, cfg.max_newton_iter)?;
            t = seg_start + k as f64 * h;
            step_counter += 1;
            if step_counter % cfg.record_every == 0 || k == steps {
                traj.times.push(t);
                traj.states.push(x.clone());
            }
        }
    }
    Ok(traj)
}
