//! Scratch end-to-end run: equilibrium, quantized run, reference run.

use qdl::devices::{Microgrid, MicrogridParams};
use qdl::qss::{run, EngineConfig, InputEvent};
use qdl::solver::{integrate, solve_equilibrium, DenseSystem, RadauConfig};
use std::time::Instant;

fn main() {
    let params = MicrogridParams::default();
    let mg = Microgrid::build(&params).expect("build");
    let sys = &mg.assembly.system;
    let dense = DenseSystem::new(sys);
    let guess = mg.initial_guess();
    let u = sys.input_values.clone();
    let eq = solve_equilibrium(&dense, &guess, &u, 1e-9, &sys.quanta).expect("equilibrium");
    println!("equilibrium residual {:.2e}", eq.residual);

    // Silence check: 1 s, no disturbance.
    let t0 = Instant::now();
    let res = run(sys, &eq.x, &[], &EngineConfig::new(1.0)).expect("run");
    println!(
        "silent run: {} updates in {:?} (truncated {})",
        res.stats.total_updates,
        t0.elapsed(),
        res.truncated
    );

    // Load step +20% at t = 1 s, horizon 2 s.
    let scale = mg.handles.load_scale;
    let dist = [InputEvent {
        t: 1.0,
        input: scale,
        value: 1.2,
    }];
    let t0 = Instant::now();
    let res = run(sys, &eq.x, &dist, &EngineConfig::new(2.0)).expect("run");
    println!(
        "load step: {} updates ({} int / {} ext) in {:?}, band ratio {:.3}",
        res.stats.total_updates,
        res.stats.internal_updates,
        res.stats.external_updates,
        t0.elapsed(),
        res.stats.max_band_ratio,
    );
    let labels = &sys.labels;
    let mut counts: Vec<(u64, &String)> = res
        .stats
        .updates_per_atom
        .iter()
        .copied()
        .zip(labels.iter())
        .map(|(c, l)| (c, l))
        .collect();
    counts.sort_by(|a, b| b.0.cmp(&a.0));
    for (c, l) in counts.iter().take(8) {
        println!("  {l:>14} {c}");
    }

    // Reference run over the same window.
    let lmax = dense.lambda_max(&eq.x, &u);
    let h = qdl::solver::default_step(lmax, 2.0);
    println!("reference h = {h:.3e}");
    let cfg = RadauConfig::new(h);
    let t0 = Instant::now();
    let traj = integrate(&dense, &eq.x, &u, &dist, 0.0, 2.0, &cfg).expect("integrate");
    println!(
        "reference: {} samples in {:?}",
        traj.times.len(),
        t0.elapsed()
    );

    // Compare machine speeds at the end.
    for lbl in ["sm.omega", "im.omega", "bus1.vq", "load3.iq"] {
        let i = labels.iter().position(|l| l == lbl).unwrap();
        let qdl_val = res.final_q[i];
        let ref_val = traj.states.last().unwrap()[i];
        println!(
            "  {lbl:>10}: qdl {qdl_val:>12.5}  ref {ref_val:>12.5}  diff {:.2e}",
            (qdl_val - ref_val).abs()
        );
    }
}
