//! Solve the noiseless two-spike problem with and without the PDE stage.

use motion_deconv::experiments::{make_instance, Preset};
use motion_deconv::motion_pde::PdeStepConfig;
use motion_deconv::solvers::{solve, SolverParams, StoppingRule};

fn main() -> motion_deconv::Result<()> {
    let inst = make_instance(&Preset::SpeedSigma4.instance_spec(1).expect("solver preset"))?;
    let truth = inst.truth_field();
    for s in inst.truth.spikes() {
        println!("spike ({}, {}) amplitude {:.4}", s.row, s.col, s.amplitude);
    }

    for (mu, dt) in [(0.01, 300.0), (0.002, 800.0)] {
        let stop = StoppingRule::RelErrorBelow {
            reference: truth.clone(),
            tol: 1e-2,
        };
        let mut params = SolverParams::new(2.0, mu, stop);
        params.max_outer = 2000;
        let (_, fpc) = solve(&inst.operator, &inst.f_observed, &params)?;
        let (u, pde) = solve(
            &inst.operator,
            &inst.f_observed,
            &params.with_pde(PdeStepConfig::fixed(dt)?),
        )?;
        println!(
            "mu {mu}: FPC {} iterations ({:.2}s), PDE-FPC {} iterations ({:.2}s), {} nonzeros",
            fpc.total_inner_iterations,
            fpc.wall_seconds,
            pde.total_inner_iterations,
            pde.wall_seconds,
            u.count_above(0.0)
        );
    }
    Ok(())
}
