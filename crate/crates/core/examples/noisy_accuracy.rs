//! Best reconstruction error on the noisy eight-spike observation.

use motion_deconv::experiments::{make_instance, row_params, BenchOverrides, Preset, Variant};
use motion_deconv::solvers::solve;

fn main() -> motion_deconv::Result<()> {
    let preset = Preset::AccuracyNoisy;
    let inst = make_instance(&preset.instance_spec(1).expect("solver preset"))?;
    let truth = inst.truth_field();
    println!(
        "noise std {:.4e}, SNR {:.3} dB",
        inst.noise_std, inst.snr_db
    );

    // the small-mu rows show the gap most clearly
    for &row in &preset.rows()[5..] {
        for variant in [Variant::Fpc, Variant::PdeFpc] {
            let params = row_params(preset, &truth, row, variant, &BenchOverrides::default())?;
            let (_, rec) = solve(&inst.operator, &inst.f_observed, &params)?;
            println!(
                "mu {:<6} {:<16} best error {:.4e} at iteration {}",
                row.1,
                variant.name(),
                rec.best_error,
                rec.best_iterate_index + 1
            );
        }
    }
    Ok(())
}
