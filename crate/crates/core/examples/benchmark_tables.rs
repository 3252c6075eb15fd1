//! Print a benchmark table. Pass a preset name; defaults to speed_sigma4.

use motion_deconv::cli::output::format_bench_table;
use motion_deconv::experiments::{run_benchmark, BenchOutput, BenchOverrides, Preset};

fn main() -> motion_deconv::Result<()> {
    let preset: Preset = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "speed_sigma4".into())
        .parse()?;
    match run_benchmark(preset, &BenchOverrides::default())? {
        BenchOutput::Table(t) => print!("{}", format_bench_table(preset.name(), &t.rows)),
        BenchOutput::Evolution(run) => println!("{} steps evolved", run.record.len()),
    }
    Ok(())
}
