//! Evolve the motion PDE from a smooth bump and watch it concentrate onto the
//! spike that generated the data.

use motion_deconv::experiments::{run_sparsify, support_size, SparsifySpec};

fn main() -> motion_deconv::Result<()> {
    let spec = SparsifySpec::default();
    let run = run_sparsify(&spec)?;
    println!(
        "spike at ({}, {}), bump centered at ({}, {})",
        spec.spike.row, spec.spike.col, spec.bump_center.0, spec.bump_center.1
    );
    println!(
        "{:>5} {:>12} {:>8} {:>12} {:>10}",
        "step", "time", "support", "l1", "argmax"
    );
    for (n, u) in &run.snapshots {
        let t = if *n == 0 {
            0.0
        } else {
            run.record.times[n - 1]
        };
        let (r, c) = u.argmax_abs();
        println!(
            "{n:>5} {t:>12.1} {:>8} {:>12.6} {:>10}",
            support_size(u),
            u.l1_norm(),
            format!("({r},{c})")
        );
    }
    let h = &run.record.residual_history;
    println!("H: {:.4e} -> {:.4e}", run.initial_energy, h[h.len() - 1]);
    Ok(())
}
