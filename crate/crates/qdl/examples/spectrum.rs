//! Prints the equilibrium and Jacobian spectrum of the bundled microgrid.
//!
//! Accepts `path=value` parameter overrides on the command line plus the
//! flags `--states` (dump equilibrium) and `--full` (dump all
//! eigenvalues). Useful when retuning device parameters: the target is an
//! electromechanical pair in the mid-teens of Hz, a governor pair near
//! 0.4 Hz, and everything in the left half plane.

use qdl::devices::{Microgrid, MicrogridParams};
use qdl::solver::{solve_equilibrium, DenseSystem};

fn main() {
    let mut params = MicrogridParams::default();
    let mut show_states = false;
    let mut show_full = false;
    for arg in std::env::args().skip(1) {
        match arg.as_str() {
            "--states" => show_states = true,
            "--full" => show_full = true,
            _ => {
                let (k, v) = arg.split_once('=').expect("override must be path=value");
                params
                    .set(k, v.parse().expect("override value must be numeric"))
                    .expect("unknown parameter path");
            }
        }
    }

    let mg = Microgrid::build(&params).expect("build");
    let dense = DenseSystem::new(&mg.assembly.system);
    let guess = mg.initial_guess();
    let u = mg.assembly.system.input_values.clone();

    let rep = match solve_equilibrium(&dense, &guess, &u, 1e-9, &mg.assembly.system.quanta) {
        Ok(rep) => rep,
        Err(e) => {
            println!("UNSOLVED: {e}");
            return;
        }
    };
    println!(
        "equilibrium: {} iterations, residual {:.3e}",
        rep.iterations, rep.residual
    );
    if show_states {
        for (lbl, v) in mg.assembly.system.labels.iter().zip(&rep.x) {
            println!("  {lbl:>14}  {v:>14.6}");
        }
    }

    let mut eigs = dense.eigenvalues(&rep.x, &u);
    eigs.sort_by(|a, b| b.im.abs().partial_cmp(&a.im.abs()).unwrap());
    if show_full {
        println!("eigenvalues (re, im, |im|/2pi Hz):");
        for l in &eigs {
            println!(
                "  {:>12.4}  {:>12.4}  {:>10.4}",
                l.re,
                l.im,
                l.im.abs() / (2.0 * std::f64::consts::PI)
            );
        }
    }

    let unstable: Vec<_> = eigs.iter().filter(|l| l.re > 0.0).collect();
    println!("unstable: {}", unstable.len());
    for l in &unstable {
        println!(
            "  re {:>10.3}  f {:>9.3} Hz",
            l.re,
            l.im.abs() / (2.0 * std::f64::consts::PI)
        );
    }
    println!("modes of interest (0.2..0.6 Hz and 3..30 Hz):");
    for l in eigs.iter().filter(|l| l.im > 0.0) {
        let f = l.im / (2.0 * std::f64::consts::PI);
        if (0.2..0.6).contains(&f) || (3.0..30.0).contains(&f) {
            println!("  f {f:>8.3} Hz  re {:>10.3}", l.re);
        }
    }
    let lmax = eigs.iter().map(|l| l.norm()).fold(0.0_f64, f64::max);
    println!("|lambda|max = {lmax:.4e} -> h = {:.3e}", 0.1 / lmax);
}
