//! Deterministic LIQSS1 event loop.

use thiserror::Error;

use super::atom::{liqss1_select_q, time_to_boundary, DerivativeClosure, QdlAtom};
use super::queue::EventQueue;
use super::{AtomId, InputId};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("scheduling order violated for atom {atom}: event at t = {t} but t_last = {t_last}")]
    SchedulingOrder { atom: AtomId, t: f64, t_last: f64 },

    #[error("initial state has {got} entries, system has {expected} atoms")]
    DimensionMismatch { got: usize, expected: usize },

    #[error("input schedule is not sorted or references time outside [0, t_end)")]
    BadSchedule,

    #[error("input index {0} out of range")]
    BadInput(InputId),
}

/// A system of atoms ready for event simulation: one derivative closure per
/// state, plus the reverse dependency graph and the external input bank.
#[derive(Debug, Clone)]
pub struct QdlSystem {
    pub closures: Vec<DerivativeClosure>,
    pub labels: Vec<String>,
    pub quanta: Vec<f64>,
    /// Default values of the external input slots.
    pub input_values: Vec<f64>,
    /// For each atom, the atoms whose closures read its quantized output
    /// (ascending, excluding the atom itself).
    pub dependents: Vec<Vec<AtomId>>,
    /// For each input slot, the atoms whose closures read it (ascending).
    pub input_listeners: Vec<Vec<AtomId>>,
}

impl QdlSystem {
    pub fn new(
        closures: Vec<DerivativeClosure>,
        labels: Vec<String>,
        quanta: Vec<f64>,
        input_values: Vec<f64>,
    ) -> Self {
        let n = closures.len();
        assert_eq!(labels.len(), n);
        assert_eq!(quanta.len(), n);
        let mut dependents = vec![Vec::new(); n];
        let mut input_listeners = vec![Vec::new(); input_values.len()];
        for (id, c) in closures.iter().enumerate() {
            for &d in c.deps() {
                assert!(d < n, "closure {id} depends on unknown atom {d}");
                if d != id {
                    dependents[d].push(id);
                }
            }
            for &u in c.input_deps() {
                assert!(u < input_values.len(), "closure {id} reads unknown input {u}");
                input_listeners[u].push(id);
            }
        }
        for l in dependents.iter_mut().chain(input_listeners.iter_mut()) {
            l.sort_unstable();
            l.dedup();
        }
        Self {
            closures,
            labels,
            quanta,
            input_values,
            dependents,
            input_listeners,
        }
    }

    pub fn n(&self) -> usize {
        self.closures.len()
    }

    /// Evaluates every closure at a common point; shared by the dense
    /// reference solver so both integration paths see identical equations.
    pub fn eval_all(&self, state: &[f64], inputs: &[f64], out: &mut [f64]) {
        for (i, c) in self.closures.iter().enumerate() {
            out[i] = c.eval(state, inputs);
        }
    }
}

/// A scheduled external input change (disturbance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputEvent {
    pub t: f64,
    pub input: InputId,
    pub value: f64,
}

/// Output recording mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecordingMode {
    /// Record quantized-output changes only.
    Events,
    /// Record quantized-output changes plus uniform-grid samples of the
    /// continuous state at the given spacing (s).
    EventsWithGrid(f64),
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// Simulation horizon (s).
    pub t_end: f64,
    /// Maximum total updates before the run is truncated.
    pub event_cap: u64,
    pub recording: RecordingMode,
}

impl EngineConfig {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            event_cap: u64::MAX,
            recording: RecordingMode::Events,
        }
    }

    pub fn with_event_cap(mut self, cap: u64) -> Self {
        assert!(cap > 0, "event cap must be positive");
        self.event_cap = cap;
        self
    }

    pub fn with_grid(mut self, dt: f64) -> Self {
        assert!(dt > 0.0);
        self.recording = RecordingMode::EventsWithGrid(dt);
        self
    }
}

/// One recorded quantized-output change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub t: f64,
    pub atom: AtomId,
    /// Continuous internal value at the event.
    pub x: f64,
    /// Quantized output after the event.
    pub q: f64,
    /// Cumulative update count of the atom at the event.
    pub update_count: u64,
}

/// Chronological log of quantized-output changes, including one record per
/// atom at the initial time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub entries: Vec<EventRecord>,
}

impl EventLog {
    /// Piecewise-constant output trajectory of one atom: (times, values),
    /// starting with the initial value.
    pub fn q_trajectory(&self, atom: AtomId) -> (Vec<f64>, Vec<f64>) {
        let mut ts = Vec::new();
        let mut qs = Vec::new();
        for e in self.entries.iter().filter(|e| e.atom == atom) {
            ts.push(e.t);
            qs.push(e.q);
        }
        (ts, qs)
    }

    /// Cumulative update-count step series of one atom.
    pub fn update_series(&self, atom: AtomId) -> (Vec<f64>, Vec<u64>) {
        let mut ts = Vec::new();
        let mut cs = Vec::new();
        for e in self.entries.iter().filter(|e| e.atom == atom) {
            ts.push(e.t);
            cs.push(e.update_count);
        }
        (ts, cs)
    }
}

/// Uniform-grid samples of the continuous state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridSamples {
    pub times: Vec<f64>,
    /// Row-major, one row of length n per sample time.
    pub x: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub total_updates: u64,
    pub internal_updates: u64,
    pub external_updates: u64,
    /// Per-atom cumulative update counts at the end of the run.
    pub updates_per_atom: Vec<u64>,
    pub internal_per_atom: Vec<u64>,
    pub external_per_atom: Vec<u64>,
    /// Largest observed |x − q| / dq at an internal event (hysteretic band
    /// health check; 1.0 means the band was never exceeded).
    pub max_band_ratio: f64,
}

/// Result of an event-driven run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub log: EventLog,
    pub grid: Option<GridSamples>,
    pub stats: RunStats,
    /// True when the run stopped at the event cap rather than the horizon.
    pub truncated: bool,
    /// Time actually reached (equals the horizon unless truncated).
    pub t_reached: f64,
    pub final_x: Vec<f64>,
    pub final_q: Vec<f64>,
}

struct Engine<'a> {
    sys: &'a QdlSystem,
    atoms: Vec<QdlAtom>,
    q_vec: Vec<f64>,
    u: Vec<f64>,
    queue: EventQueue,
    log: EventLog,
    stats: RunStats,
}

impl<'a> Engine<'a> {
    fn new(sys: &'a QdlSystem, x0: &[f64]) -> Result<Self, EngineError> {
        let n = sys.n();
        if x0.len() != n {
            return Err(EngineError::DimensionMismatch {
                got: x0.len(),
                expected: n,
            });
        }
        let atoms: Vec<QdlAtom> = (0..n)
            .map(|i| QdlAtom::new(i, x0[i], sys.quanta[i]))
            .collect();
        let q_vec = x0.to_vec();
        Ok(Self {
            sys,
            atoms,
            q_vec,
            u: sys.input_values.clone(),
            queue: EventQueue::new(n),
            log: EventLog::default(),
            stats: RunStats {
                updates_per_atom: vec![0; n],
                internal_per_atom: vec![0; n],
                external_per_atom: vec![0; n],
                ..Default::default()
            },
        })
    }

    /// Evaluates atom `id`'s derivative with its own quantized slot
    /// overridden by `q_own`, neighbours frozen at their current outputs.
    fn eval_own(&mut self, id: AtomId, q_own: f64) -> f64 {
        let saved = self.q_vec[id];
        self.q_vec[id] = q_own;
        let v = self.sys.closures[id].eval(&self.q_vec, &self.u);
        self.q_vec[id] = saved;
        v
    }

    fn seed(&mut self) {
        for id in 0..self.sys.n() {
            let f0 = self.sys.closures[id].eval(&self.q_vec, &self.u);
            // One-sided perturbation of size dq initialises the diagonal
            // Jacobian estimate without requiring an analytic Jacobian.
            let dq = self.atoms[id].dq;
            let f_pert = self.eval_own(id, self.q_vec[id] + dq);
            let a0 = (f_pert - f0) / dq;
            let atom = &mut self.atoms[id];
            atom.dxdt = f0;
            atom.a_diag = if a0.is_finite() { a0 } else { 0.0 };
            atom.t_next = time_to_boundary(atom.x, atom.q, atom.dq, atom.dxdt);
            self.queue.schedule(id, atom.t_next);
            self.log.entries.push(EventRecord {
                t: 0.0,
                atom: id,
                x: atom.x,
                q: atom.q,
                update_count: 0,
            });
        }
    }

    /// Internal transition of `id` at its scheduled time; returns true when
    /// the quantized output changed.
    fn internal(&mut self, id: AtomId, t: f64) -> Result<bool, EngineError> {
        let (q_prev, dq, a_prev, f_prev) = {
            let atom = &mut self.atoms[id];
            if t < atom.t_last {
                return Err(EngineError::SchedulingOrder {
                    atom: id,
                    t,
                    t_last: atom.t_last,
                });
            }
            atom.x += atom.dxdt * (t - atom.t_last);
            atom.t_last = t;
            (atom.q, atom.dq, atom.a_diag, atom.dxdt)
        };
        let sel = {
            let sys = self.sys;
            let q_vec = &mut self.q_vec;
            let u = &self.u;
            liqss1_select_q(q_prev, dq, a_prev, f_prev, |q_cand| {
                let saved = q_vec[id];
                q_vec[id] = q_cand;
                let v = sys.closures[id].eval(q_vec, u);
                q_vec[id] = saved;
                v
            })
        };
        let atom = &mut self.atoms[id];
        atom.q = sel.q;
        atom.dxdt = sel.dxdt;
        atom.a_diag = sel.a_diag;
        atom.update_count += 1;
        atom.internal_count += 1;
        atom.t_next = t + time_to_boundary(atom.x, atom.q, atom.dq, atom.dxdt);
        let band = (atom.x - atom.q).abs() / atom.dq;
        if band > self.stats.max_band_ratio {
            self.stats.max_band_ratio = band;
        }
        self.stats.total_updates += 1;
        self.stats.internal_updates += 1;
        self.queue.schedule(id, atom.t_next);

        let changed = sel.q != q_prev;
        if changed {
            self.q_vec[id] = sel.q;
            self.log.entries.push(EventRecord {
                t,
                atom: id,
                x: self.atoms[id].x,
                q: sel.q,
                update_count: self.atoms[id].update_count,
            });
        }
        Ok(changed)
    }

    /// External transition of `id` at time `t`: some input of its closure
    /// changed. The quantized output is not altered.
    fn external(&mut self, id: AtomId, t: f64) -> Result<(), EngineError> {
        {
            let atom = &mut self.atoms[id];
            if t < atom.t_last {
                return Err(EngineError::SchedulingOrder {
                    atom: id,
                    t,
                    t_last: atom.t_last,
                });
            }
            atom.x += atom.dxdt * (t - atom.t_last);
            atom.t_last = t;
        }
        let f = self.sys.closures[id].eval(&self.q_vec, &self.u);
        let atom = &mut self.atoms[id];
        atom.dxdt = f;
        atom.update_count += 1;
        atom.external_count += 1;
        atom.t_next = t + time_to_boundary(atom.x, atom.q, atom.dq, atom.dxdt);
        self.stats.total_updates += 1;
        self.stats.external_updates += 1;
        self.queue.schedule(id, atom.t_next);
        Ok(())
    }

    fn sample(&self, t: f64, grid: &mut GridSamples) {
        grid.times.push(t);
        grid.x.push(
            self.atoms
                .iter()
                .map(|a| a.x + a.dxdt * (t - a.t_last))
                .collect(),
        );
        grid.q.push(self.q_vec.clone());
    }

    fn finish(mut self, t_reached: f64, truncated: bool, grid: Option<GridSamples>) -> RunResult {
        for (i, a) in self.atoms.iter().enumerate() {
            self.stats.updates_per_atom[i] = a.update_count;
            self.stats.internal_per_atom[i] = a.internal_count;
            self.stats.external_per_atom[i] = a.external_count;
        }
        let final_x: Vec<f64> = self
            .atoms
            .iter()
            .map(|a| a.x + a.dxdt * (t_reached - a.t_last))
            .collect();
        RunResult {
            log: self.log,
            grid,
            stats: self.stats,
            truncated,
            t_reached,
            final_x,
            final_q: self.q_vec,
        }
    }
}

/// Runs the event loop until the horizon or the event cap.
///
/// Atoms are initialised with `x = q = x0` (the caller chooses the quantum
/// anchor by choosing `x0`) and the queue is seeded from the initial
/// derivatives, so a system starting at an exact equilibrium generates no
/// events at all. Scheduled input changes are applied atomically between
/// events; every atom whose closure reads the changed input receives an
/// external transition at the disturbance time.
pub fn run(
    sys: &QdlSystem,
    x0: &[f64],
    schedule: &[InputEvent],
    cfg: &EngineConfig,
) -> Result<RunResult, EngineError> {
    for w in schedule.windows(2) {
        if w[1].t < w[0].t {
            return Err(EngineError::BadSchedule);
        }
    }
    for ev in schedule {
        if !(ev.t >= 0.0 && ev.t < cfg.t_end) {
            return Err(EngineError::BadSchedule);
        }
        if ev.input >= sys.input_values.len() {
            return Err(EngineError::BadInput(ev.input));
        }
    }

    let mut eng = Engine::new(sys, x0)?;
    eng.seed();

    let mut grid = match cfg.recording {
        RecordingMode::Events => None,
        RecordingMode::EventsWithGrid(_) => Some(GridSamples::default()),
    };
    let grid_dt = match cfg.recording {
        RecordingMode::EventsWithGrid(dt) => dt,
        RecordingMode::Events => f64::INFINITY,
    };
    let mut next_sample = 0.0_f64;
    let mut sample_idx: u64 = 0;

    let mut sched_pos = 0usize;
    let mut truncated = false;
    let mut t_now = 0.0_f64;

    loop {
        let t_event = eng.queue.peek().map(|(t, _)| t).unwrap_or(f64::INFINITY);
        let t_dist = schedule
            .get(sched_pos)
            .map(|e| e.t)
            .unwrap_or(f64::INFINITY);
        let t_next = t_event.min(t_dist);

        // Emit grid samples strictly before processing anything at t_next.
        if let Some(g) = grid.as_mut() {
            while next_sample <= t_next.min(cfg.t_end) {
                eng.sample(next_sample, g);
                sample_idx += 1;
                next_sample = sample_idx as f64 * grid_dt;
            }
        }

        if t_next > cfg.t_end {
            t_now = cfg.t_end;
            break;
        }
        t_now = t_next;

        if t_dist <= t_event {
            // Apply every disturbance scheduled at this instant, then give
            // each listener one external transition.
            let mut listeners: Vec<AtomId> = Vec::new();
            while sched_pos < schedule.len() && schedule[sched_pos].t == t_dist {
                let ev = schedule[sched_pos];
                eng.u[ev.input] = ev.value;
                listeners.extend_from_slice(&sys.input_listeners[ev.input]);
                sched_pos += 1;
            }
            listeners.sort_unstable();
            listeners.dedup();
            for id in listeners {
                eng.external(id, t_dist)?;
            }
        } else {
            let (t, id) = eng.queue.pop().expect("peeked event disappeared");
            let changed = eng.internal(id, t)?;
            if changed {
                // Dependents are stored ascending, so propagation order is
                // deterministic.
                for &dep in &sys.dependents[id] {
                    eng.external(dep, t)?;
                }
            }
        }

        if eng.stats.total_updates >= cfg.event_cap {
            truncated = true;
            break;
        }
    }

    // Trailing grid samples after the last event, up to the horizon.
    if !truncated {
        if let Some(g) = grid.as_mut() {
            while next_sample <= cfg.t_end {
                eng.sample(next_sample, g);
                sample_idx += 1;
                next_sample = sample_idx as f64 * grid_dt;
            }
        }
    }

    Ok(eng.finish(t_now, truncated, grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn closure(
        deps: Vec<AtomId>,
        inputs: Vec<InputId>,
        f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> DerivativeClosure {
        DerivativeClosure::new(deps, inputs, Arc::new(f))
    }

    #[test]
    fn empty_system_advances_to_horizon() {
        let sys = QdlSystem::new(vec![], vec![], vec![], vec![]);
        let res = run(&sys, &[], &[], &EngineConfig::new(2.0)).unwrap();
        assert_eq!(res.t_reached, 2.0);
        assert!(res.log.entries.is_empty());
        assert!(!res.truncated);
    }

    #[test]
    fn decay_first_event_matches_hand_trace() {
        // xdot = -x from x0 = q0 = 1 with dq = 0.1: slope -1, first event at
        // t = 0.1 advancing q to 0.9.
        let sys = QdlSystem::new(
            vec![closure(vec![0], vec![], |q, _| -q[0])],
            vec!["x".into()],
            vec![0.1],
            vec![],
        );
        let res = run(&sys, &[1.0], &[], &EngineConfig::new(0.15)).unwrap();
        let ev: Vec<_> = res.log.entries.iter().filter(|e| e.t > 0.0).collect();
        assert_eq!(ev.len(), 1);
        assert!((ev[0].t - 0.1).abs() < 1e-12);
        assert!((ev[0].q - 0.9).abs() < 1e-12);
        assert!((ev[0].x - 0.9).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_start_is_silent() {
        // x = q = 0 is an exact equilibrium of xdot = -x: zero updates over
        // any horizon.
        let sys = QdlSystem::new(
            vec![closure(vec![0], vec![], |q, _| -q[0])],
            vec!["x".into()],
            vec![0.001],
            vec![],
        );
        let res = run(&sys, &[0.0], &[], &EngineConfig::new(10.0)).unwrap();
        assert_eq!(res.stats.total_updates, 0);
        assert_eq!(res.log.entries.len(), 1); // initial record only
    }

    #[test]
    fn chain_propagates_one_external_per_output_change() {
        // x1dot = -x1, x2dot = x1 - x2: every q1 change reschedules x2
        // exactly once.
        let sys = QdlSystem::new(
            vec![
                closure(vec![0], vec![], |q, _| -q[0]),
                closure(vec![0, 1], vec![], |q, _| q[0] - q[1]),
            ],
            vec!["x1".into(), "x2".into()],
            vec![0.05, 0.05],
            vec![],
        );
        let res = run(&sys, &[1.0, 0.0], &[], &EngineConfig::new(3.0)).unwrap();
        let q1_changes = res
            .log
            .entries
            .iter()
            .filter(|e| e.atom == 0 && e.t > 0.0)
            .count() as u64;
        assert!(q1_changes > 5);
        assert_eq!(res.stats.external_per_atom[1], q1_changes);
        assert_eq!(res.stats.external_per_atom[0], 0);
    }

    #[test]
    fn stationary_atom_wakes_on_input_change() {
        // Atom 0 is stationary until the input steps; afterwards it sweeps.
        let sys = QdlSystem::new(
            vec![closure(vec![], vec![0], |_, u| u[0])],
            vec!["x".into()],
            vec![0.1],
            vec![0.0],
        );
        let dist = [InputEvent {
            t: 1.0,
            input: 0,
            value: 1.0,
        }];
        let res = run(&sys, &[0.0], &dist, &EngineConfig::new(2.0)).unwrap();
        // No events before the disturbance.
        assert!(res.log.entries.iter().all(|e| e.atom != 0 || e.t == 0.0 || e.t >= 1.0));
        // Roughly one second of motion at unit slope and dq = 0.1.
        let n_changes = res
            .log
            .entries
            .iter()
            .filter(|e| e.t > 0.0)
            .count();
        assert!((8..=12).contains(&n_changes), "changes = {n_changes}");
        assert!((res.final_x[0] - 1.0).abs() < 0.2);
    }

    #[test]
    fn monotone_sweep_update_count_band() {
        // Constant slope crossing R = 30 with dq = 0.01: the update count
        // must land between R/dq and 3R/dq.
        let sys = QdlSystem::new(
            vec![closure(vec![], vec![], |_, _| 3.0)],
            vec!["x".into()],
            vec![0.01],
            vec![],
        );
        let res = run(&sys, &[0.0], &[], &EngineConfig::new(10.0)).unwrap();
        let r_over_dq = 30.0 / 0.01;
        let n = res.stats.updates_per_atom[0] as f64;
        assert!(n >= r_over_dq * 0.99 && n <= 3.0 * r_over_dq, "n = {n}");
    }

    #[test]
    fn event_cap_truncates() {
        let sys = QdlSystem::new(
            vec![closure(vec![], vec![], |_, _| 1.0)],
            vec!["x".into()],
            vec![0.001],
            vec![],
        );
        let cfg = EngineConfig::new(100.0).with_event_cap(50);
        let res = run(&sys, &[0.0], &[], &cfg).unwrap();
        assert!(res.truncated);
        assert_eq!(res.stats.total_updates, 50);
        assert!(res.t_reached < 100.0);
    }

    #[test]
    fn identical_runs_produce_identical_logs() {
        let mk = || {
            QdlSystem::new(
                vec![
                    closure(vec![0, 1], vec![], |q, _| -3.0 * q[0] + q[1]),
                    closure(vec![0, 1], vec![], |q, _| q[0] - 2.0 * q[1]),
                ],
                vec!["a".into(), "b".into()],
                vec![0.01, 0.02],
                vec![],
            )
        };
        let cfg = EngineConfig::new(4.0);
        let r1 = run(&mk(), &[1.0, -0.5], &[], &cfg).unwrap();
        let r2 = run(&mk(), &[1.0, -0.5], &[], &cfg).unwrap();
        assert_eq!(r1.log, r2.log);
        assert_eq!(r1.stats, r2.stats);
    }

    #[test]
    fn hysteretic_band_holds_on_stiff_pair() {
        // Stiff two-state system (eigenvalues -1 and -1000).
        let sys = QdlSystem::new(
            vec![
                closure(vec![1], vec![], |q, _| q[1]),
                closure(vec![0, 1], vec![], |q, _| -1000.0 * q[0] - 1001.0 * q[1]),
            ],
            vec!["x1".into(), "x2".into()],
            vec![1e-3, 1e-3],
            vec![],
        );
        let res = run(&sys, &[1.0, 0.0], &[], &EngineConfig::new(1.0)).unwrap();
        assert!(
            res.stats.max_band_ratio <= 1.0 + 1e-9,
            "band ratio = {}",
            res.stats.max_band_ratio
        );
    }

    #[test]
    fn stiff_linear_pair_tracks_analytic_solution() {
        // Companion system with eigenvalues -1 and -1000 started at (1, 0):
        //   x(t) = c1 e^{-t} (1, -1) + c2 e^{-1000 t} (1, -1000)
        // with c1 = 1000/999, c2 = -1/999. Quantised solution must stay
        // within a small multiple of the quantum of the analytic solution.
        let dq = 1e-3;
        let sys = QdlSystem::new(
            vec![
                closure(vec![1], vec![], |q, _| q[1]),
                closure(vec![0, 1], vec![], |q, _| -1000.0 * q[0] - 1001.0 * q[1]),
            ],
            vec!["x1".into(), "x2".into()],
            vec![dq, dq],
            vec![],
        );
        let cfg = EngineConfig::new(10.0).with_grid(0.001);
        let res = run(&sys, &[1.0, 0.0], &[], &cfg).unwrap();
        let grid = res.grid.as_ref().unwrap();
        let c1 = 1000.0 / 999.0;
        let c2 = -1.0 / 999.0;
        let mut worst = 0.0_f64;
        for (k, &t) in grid.times.iter().enumerate() {
            let e1 = (-t).exp();
            let e2 = (-1000.0 * t).exp();
            let exact = [c1 * e1 + c2 * e2, -c1 * e1 - 1000.0 * c2 * e2];
            for i in 0..2 {
                worst = worst.max((grid.q[k][i] - exact[i]).abs());
            }
        }
        assert!(worst <= 4.0 * dq, "sup error = {worst}");
    }
}
