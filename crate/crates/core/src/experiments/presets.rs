use std::fmt;
use std::str::FromStr;

use crate::conv::{gaussian_kernel, ConvOperator};
use crate::error::{Error, Result};
use crate::experiments::instance::{
    make_instance, Instance, InstanceSpec, NoiseSpec, Spike, SpikeSpec,
};
use crate::field::{Field, Grid};
use crate::motion_pde::{evolve_with, EvolveRecord, PdeStepConfig};
use crate::solvers::{solve, RunRecord, SolverParams, StoppingRule, Termination};

pub const DEFAULT_SEED: u64 = 1;

/// Spike layout shared by the noiseless speed presets.
pub const TWO_SPIKES: [(usize, usize); 2] = [(20, 20), (30, 32)];

/// Spike layout of the noisy accuracy preset.
pub const EIGHT_SPIKES: [(usize, usize); 8] = [
    (8, 10),
    (12, 35),
    (20, 20),
    (24, 42),
    (30, 32),
    (36, 12),
    (41, 27),
    (44, 44),
];

/// `(δ, μ, dt)` rows for σ = 4.
pub const SPEED_SIGMA4_ROWS: [(f64, f64, f64); 7] = [
    (2.0, 0.5, 0.2),
    (2.0, 0.2, 0.5),
    (2.0, 0.1, 2.0),
    (2.0, 0.05, 4.5),
    (2.0, 0.01, 300.0),
    (2.0, 0.002, 800.0),
    (2.0, 0.001, 1200.0),
];

/// `(δ, μ, dt)` rows for σ = 4.5.
pub const SPEED_SIGMA4P5_ROWS: [(f64, f64, f64); 7] = [
    (2.0, 0.5, 0.25),
    (2.0, 0.2, 0.9),
    (2.0, 0.1, 2.0),
    (2.0, 0.05, 5.0),
    (2.0, 0.01, 300.0),
    (2.0, 0.002, 1500.0),
    (2.0, 0.001, 2000.0),
];

/// `(δ, μ, dt)` rows for the noisy observation.
pub const ACCURACY_ROWS: [(f64, f64, f64); 8] = [
    (2.0, 0.8, 0.01),
    (2.0, 0.5, 0.05),
    (2.0, 0.2, 0.5),
    (2.0, 0.05, 1.5),
    (2.0, 0.01, 3.0),
    (2.0, 0.005, 4.0),
    (2.0, 0.002, 45.0),
    (2.0, 0.001, 40.0),
];

pub const TARGET_SNR_DB: f64 = 15.87;
pub const SPEED_TOLERANCE: f64 = 1e-2;
pub const SPEED_ITERATION_LIMIT: usize = 20_000;
pub const ACCURACY_ITERATION_LIMIT: usize = 15_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    SpeedSigma4,
    SpeedSigma4p5,
    AccuracyNoisy,
    Figure1Sparsify,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::SpeedSigma4,
        Preset::SpeedSigma4p5,
        Preset::AccuracyNoisy,
        Preset::Figure1Sparsify,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::SpeedSigma4 => "speed_sigma4",
            Preset::SpeedSigma4p5 => "speed_sigma4p5",
            Preset::AccuracyNoisy => "accuracy_noisy",
            Preset::Figure1Sparsify => "figure1_sparsify",
        }
    }

    /// Default `(δ, μ, dt)` grid; empty for the evolution preset.
    pub fn rows(&self) -> &'static [(f64, f64, f64)] {
        match self {
            Preset::SpeedSigma4 => &SPEED_SIGMA4_ROWS,
            Preset::SpeedSigma4p5 => &SPEED_SIGMA4P5_ROWS,
            Preset::AccuracyNoisy => &ACCURACY_ROWS,
            Preset::Figure1Sparsify => &[],
        }
    }

    /// Instance for the solver presets.
    pub fn instance_spec(&self, seed: u64) -> Option<InstanceSpec> {
        let grid = Grid::square(50);
        let (spikes, size, sigma, noise) = match self {
            Preset::SpeedSigma4 => (TWO_SPIKES.to_vec(), 41, 4.0, NoiseSpec::None),
            Preset::SpeedSigma4p5 => (TWO_SPIKES.to_vec(), 41, 4.5, NoiseSpec::None),
            Preset::AccuracyNoisy => (
                EIGHT_SPIKES.to_vec(),
                21,
                5.5,
                NoiseSpec::TargetSnrDb(TARGET_SNR_DB),
            ),
            Preset::Figure1Sparsify => return None,
        };
        Some(InstanceSpec {
            grid,
            spikes: SpikeSpec::RandomAmplitudes(spikes),
            kernel_size: size,
            sigma,
            noise,
            seed,
        })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::param("preset", format!("unknown preset `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Fpc,
    PdeFpc,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Fpc => "fpc_bregman",
            Variant::PdeFpc => "pde_fpc_bregman",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fpc_bregman" => Ok(Variant::Fpc),
            "pde_fpc_bregman" => Ok(Variant::PdeFpc),
            _ => Err(Error::param("variant", format!("unknown variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Converged,
    LimitReached,
    Blowup,
}

impl RowStatus {
    pub fn name(&self) -> &'static str {
        match self {
            RowStatus::Converged => "converged",
            RowStatus::LimitReached => "limit",
            RowStatus::Blowup => "blowup",
        }
    }
}

/// One `(params, variant)` line of a benchmark table. `dt` repeats the
/// row's PDE step for both variants; plain FPC ignores it.
///
/// For speed presets `iterations` is the count at which the tolerance was
/// met; for the accuracy preset it is the iteration of least error, and
/// `wall_seconds` is the time at which that iterate appeared.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub delta: f64,
    pub mu: f64,
    pub dt: f64,
    pub variant: Variant,
    pub iterations: usize,
    pub wall_seconds: f64,
    pub best_error: f64,
    pub status: RowStatus,
}

/// Partial overrides of a preset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchOverrides {
    pub seed: Option<u64>,
    pub inner_n: Option<usize>,
    pub iteration_limit: Option<usize>,
    /// Replaces the preset's `(δ, μ, dt)` grid.
    pub rows: Option<Vec<(f64, f64, f64)>>,
    pub steps: Option<usize>,
}

/// Standalone evolution demo: a Gaussian bump of unit mass next to a single
/// spike, pulled onto the spike by the motion PDE.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsifySpec {
    pub grid: Grid,
    pub kernel_size: usize,
    pub sigma: f64,
    pub spike: Spike,
    pub bump_center: (f64, f64),
    pub bump_width: f64,
    pub steps: usize,
    pub pde: PdeStepConfig,
    pub snapshot_steps: Vec<usize>,
}

impl Default for SparsifySpec {
    fn default() -> Self {
        SparsifySpec {
            grid: Grid::square(50),
            kernel_size: 21,
            sigma: 3.0,
            spike: Spike {
                row: 25,
                col: 25,
                amplitude: 1.0,
            },
            bump_center: (22.0, 27.0),
            bump_width: 3.0,
            steps: 500,
            pde: PdeStepConfig::adaptive(0.25, 100.0).expect("valid constants"),
            snapshot_steps: vec![0, 125, 250, 375, 500],
        }
    }
}

impl SparsifySpec {
    pub fn operator(&self) -> Result<ConvOperator> {
        Ok(ConvOperator::new(
            self.grid,
            gaussian_kernel(self.kernel_size, self.kernel_size, self.sigma)?,
        ))
    }

    pub fn truth(&self) -> Result<Field> {
        if self.spike.row >= self.grid.rows() || self.spike.col >= self.grid.cols() {
            return Err(Error::param("spike", "lies outside the grid"));
        }
        Ok(
            Field::zeros(self.grid).with_value(
                self.spike.row,
                self.spike.col,
                self.spike.amplitude,
            ),
        )
    }

    /// Gaussian bump carrying the same ℓ1 mass as the spike.
    pub fn initial(&self) -> Result<Field> {
        if !(self.bump_width > 0.0) {
            return Err(Error::param("bump_width", "must be positive"));
        }
        let (r0, c0) = self.bump_center;
        let w2 = 2.0 * self.bump_width * self.bump_width;
        let bump = Field::from_fn(self.grid, |r, c| {
            let d2 = (r as f64 - r0).powi(2) + (c as f64 - c0).powi(2);
            (-d2 / w2).exp()
        });
        Ok(bump.scale(self.spike.amplitude.abs() / bump.l1_norm()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsifyOutcome {
    pub truth: Field,
    pub observed: Field,
    pub initial: Field,
    pub final_field: Field,
    pub record: EvolveRecord,
    /// `H(u0)`, the energy before the first step.
    pub initial_energy: f64,
    pub snapshots: Vec<(usize, Field)>,
}

pub fn run_sparsify(spec: &SparsifySpec) -> Result<SparsifyOutcome> {
    let op = spec.operator()?;
    let truth = spec.truth()?;
    let f = op.forward(&truth)?;
    let u0 = spec.initial()?;
    let initial_energy = crate::motion_pde::residual_energy(&op, &u0, &f)?;
    let mut snapshots = Vec::new();
    let (final_field, record) = evolve_with(&op, &u0, &f, spec.steps, &spec.pde, |n, u| {
        if spec.snapshot_steps.contains(&n) {
            snapshots.push((n, u.clone()));
        }
    })?;
    Ok(SparsifyOutcome {
        truth,
        observed: f,
        initial: u0,
        final_field,
        record,
        initial_energy,
        snapshots,
    })
}

/// Cells above `1e-3 · max|u|`.
pub fn support_size(u: &Field) -> usize {
    u.count_above(1e-3 * u.max_abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    pub preset: Preset,
    pub instance: Instance,
    pub rows: Vec<BenchRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BenchOutput {
    Table(BenchTable),
    Evolution(SparsifyOutcome),
}

/// Solver parameters for one benchmark row.
pub fn row_params(
    preset: Preset,
    truth: &Field,
    (delta, mu, dt): (f64, f64, f64),
    variant: Variant,
    overrides: &BenchOverrides,
) -> Result<SolverParams> {
    let stop = match preset {
        Preset::AccuracyNoisy => StoppingRule::TrackMinError {
            reference: truth.clone(),
            limit: overrides
                .iteration_limit
                .unwrap_or(ACCURACY_ITERATION_LIMIT),
        },
        _ => StoppingRule::RelErrorBelow {
            reference: truth.clone(),
            tol: SPEED_TOLERANCE,
        },
    };
    let mut params = SolverParams::new(delta, mu, stop);
    if let Some(n) = overrides.inner_n {
        params.inner_n = n;
    }
    if preset != Preset::AccuracyNoisy {
        let limit = overrides.iteration_limit.unwrap_or(SPEED_ITERATION_LIMIT);
        params.max_outer = limit.div_ceil(params.inner_n);
    }
    if variant == Variant::PdeFpc {
        params.pde = Some(PdeStepConfig::fixed(dt)?);
    }
    Ok(params)
}

fn bench_row(
    preset: Preset,
    instance: &Instance,
    truth: &Field,
    row: (f64, f64, f64),
    variant: Variant,
    overrides: &BenchOverrides,
) -> Result<BenchRow> {
    let params = row_params(preset, truth, row, variant, overrides)?;
    let (delta, mu, dt) = row;
    match solve(&instance.operator, &instance.f_observed, &params) {
        Ok((_, rec)) => Ok(summarize(preset, row, dt, variant, &rec)),
        Err(Error::Blowup { step, .. }) => Ok(BenchRow {
            delta,
            mu,
            dt,
            variant,
            iterations: step,
            wall_seconds: f64::NAN,
            best_error: f64::NAN,
            status: RowStatus::Blowup,
        }),
        Err(e) => Err(e),
    }
}

fn summarize(
    preset: Preset,
    (delta, mu, _): (f64, f64, f64),
    dt: f64,
    variant: Variant,
    rec: &RunRecord,
) -> BenchRow {
    let status = match rec.termination {
        Termination::Tolerance | Termination::Residual => RowStatus::Converged,
        _ if preset == Preset::AccuracyNoisy => RowStatus::Converged,
        _ => RowStatus::LimitReached,
    };
    let (iterations, wall_seconds) = if preset == Preset::AccuracyNoisy {
        (rec.best_iterate_index + 1, rec.wall_seconds_at_best)
    } else {
        (rec.total_inner_iterations, rec.wall_seconds)
    };
    BenchRow {
        delta,
        mu,
        dt,
        variant,
        iterations,
        wall_seconds,
        best_error: rec.best_error,
        status,
    }
}

/// Runs every `(δ, μ, dt)` row for both variants, FPC first.
pub fn run_benchmark(preset: Preset, overrides: &BenchOverrides) -> Result<BenchOutput> {
    let seed = overrides.seed.unwrap_or(DEFAULT_SEED);
    if preset == Preset::Figure1Sparsify {
        let mut spec = SparsifySpec::default();
        if let Some(steps) = overrides.steps {
            spec.steps = steps;
        }
        return run_sparsify(&spec).map(BenchOutput::Evolution);
    }
    let spec = preset.instance_spec(seed).expect("solver preset");
    let instance = make_instance(&spec)?;
    let truth = instance.truth_field();
    let grid: Vec<(f64, f64, f64)> = overrides
        .rows
        .clone()
        .unwrap_or_else(|| preset.rows().to_vec());
    let mut rows = Vec::with_capacity(2 * grid.len());
    for &row in &grid {
        for variant in [Variant::Fpc, Variant::PdeFpc] {
            rows.push(bench_row(
                preset, &instance, &truth, row, variant, overrides,
            )?);
        }
    }
    Ok(BenchOutput::Table(BenchTable {
        preset,
        instance,
        rows,
    }))
}
