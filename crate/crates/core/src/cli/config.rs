//! JSON run configurations. Unknown keys are rejected and every error names
//! the offending key path.

use std::path::PathBuf;

use serde::Deserialize;

use crate::experiments::{
    BenchOverrides, InstanceSpec, NoiseSpec, Preset, SparsifySpec, Spike, SpikeSpec,
};
use crate::field::Grid;
use crate::motion_pde::{DtPolicy, PdeStepConfig};
use crate::solvers::{SolverParams, StoppingRule};

/// Configuration problem, tagged with the key it concerns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.key.is_empty() || self.key == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "`{}`: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Parses a JSON document, reporting the key path on failure.
pub fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ConfigError {
        key: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub size: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpikeConfig {
    pub row: usize,
    pub col: usize,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum NoiseConfig {
    Std(f64),
    SnrDb(f64),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub grid: [usize; 2],
    /// Spikes with explicit amplitudes.
    #[serde(default)]
    pub spikes: Vec<SpikeConfig>,
    /// Locations whose amplitudes are drawn from `[0.5, 1]`.
    #[serde(default)]
    pub random_spikes: Vec<[usize; 2]>,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveConfig {
    pub safety: f64,
    pub dt_max: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum DtConfig {
    Fixed(f64),
    Adaptive(AdaptiveConfig),
}

impl DtConfig {
    fn to_pde(self, key: &str) -> Result<PdeStepConfig, ConfigError> {
        let cfg = PdeStepConfig {
            dt_policy: match self {
                DtConfig::Fixed(dt) => DtPolicy::Fixed(dt),
                DtConfig::Adaptive(a) => DtPolicy::Adaptive {
                    safety: a.safety,
                    dt_max: a.dt_max,
                },
            },
        };
        cfg.validate().map_err(|e| err(key, e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum StopConfig {
    RelErrorBelow(f64),
    MaxTotalIterations(usize),
    TrackMinError(usize),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub delta: f64,
    pub mu: f64,
    #[serde(default = "default_inner_n")]
    pub inner_n: usize,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    #[serde(default)]
    pub residual_tol: f64,
    /// Absent or null runs plain FPC Bregman.
    #[serde(default)]
    pub pde: Option<DtConfig>,
    pub stop: StopConfig,
}

fn default_inner_n() -> usize {
    10
}

fn default_max_outer() -> usize {
    2000
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub instance: InstanceConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn grid_from(key: &str, [rows, cols]: [usize; 2]) -> Result<Grid, ConfigError> {
    Grid::new(rows, cols).map_err(|e| err(key, e.to_string()))
}

fn check_kernel(key: &str, k: &KernelConfig) -> Result<(), ConfigError> {
    if k.size.is_multiple_of(2) {
        return Err(err(
            &format!("{key}.size"),
            format!("must be odd, got {}", k.size),
        ));
    }
    if !(k.sigma > 0.0 && k.sigma.is_finite()) {
        return Err(err(
            &format!("{key}.sigma"),
            format!("must be positive, got {}", k.sigma),
        ));
    }
    Ok(())
}

impl InstanceConfig {
    pub fn to_spec(&self, seed: u64) -> Result<InstanceSpec, ConfigError> {
        let grid = grid_from("instance.grid", self.grid)?;
        check_kernel("instance.kernel", &self.kernel)?;
        let spikes = match (self.spikes.is_empty(), self.random_spikes.is_empty()) {
            (_, true) => SpikeSpec::Explicit(
                self.spikes
                    .iter()
                    .map(|s| Spike {
                        row: s.row,
                        col: s.col,
                        amplitude: s.amplitude,
                    })
                    .collect(),
            ),
            (true, false) => SpikeSpec::RandomAmplitudes(
                self.random_spikes.iter().map(|&[r, c]| (r, c)).collect(),
            ),
            (false, false) => {
                return Err(err(
                    "instance.random_spikes",
                    "give either `spikes` or `random_spikes`, not both",
                ))
            }
        };
        let locs: Vec<(usize, usize)> = match &spikes {
            SpikeSpec::Explicit(s) => s.iter().map(|s| (s.row, s.col)).collect(),
            SpikeSpec::RandomAmplitudes(l) => l.clone(),
        };
        let key = if self.random_spikes.is_empty() {
            "instance.spikes"
        } else {
            "instance.random_spikes"
        };
        for (i, &(r, c)) in locs.iter().enumerate() {
            if r >= grid.rows() || c >= grid.cols() {
                return Err(err(
                    &format!("{key}[{i}]"),
                    format!("({r}, {c}) lies outside grid {grid}"),
                ));
            }
            if locs[..i].contains(&(r, c)) {
                return Err(err(
                    &format!("{key}[{i}]"),
                    format!("duplicate location ({r}, {c})"),
                ));
            }
        }
        if let SpikeSpec::Explicit(s) = &spikes {
            if let Some(i) = s.iter().position(|s| !s.amplitude.is_finite()) {
                return Err(err(
                    &format!("instance.spikes[{i}].amplitude"),
                    "must be finite",
                ));
            }
        }
        let noise = match self.noise {
            None => NoiseSpec::None,
            Some(NoiseConfig::Std(s)) => {
                if !(s >= 0.0 && s.is_finite()) {
                    return Err(err(
                        "instance.noise.std",
                        format!("must be nonnegative, got {s}"),
                    ));
                }
                NoiseSpec::Std(s)
            }
            Some(NoiseConfig::SnrDb(db)) => {
                if !db.is_finite() {
                    return Err(err("instance.noise.snr_db", "must be finite"));
                }
                NoiseSpec::TargetSnrDb(db)
            }
        };
        Ok(InstanceSpec {
            grid,
            spikes,
            kernel_size: self.kernel.size,
            sigma: self.kernel.sigma,
            noise,
            seed,
        })
    }
}

impl SolverConfig {
    /// Builds solver parameters; `truth` feeds the error-based stopping rules.
    pub fn to_params(&self, truth: &crate::Field) -> Result<SolverParams, ConfigError> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(err(key, format!("must be positive, got {v}")))
            }
        };
        positive("solver.delta", self.delta)?;
        positive("solver.mu", self.mu)?;
        if self.inner_n == 0 {
            return Err(err("solver.inner_n", "must be at least 1"));
        }
        if self.max_outer == 0 {
            return Err(err("solver.max_outer", "must be at least 1"));
        }
        if !(self.residual_tol >= 0.0) {
            return Err(err("solver.residual_tol", "must be nonnegative"));
        }
        let needs_truth = |key: &str| {
            if truth.l2_norm() == 0.0 {
                Err(err(key, "needs a nonzero ground truth"))
            } else {
                Ok(())
            }
        };
        let stop = match self.stop {
            StopConfig::RelErrorBelow(tol) => {
                positive("solver.stop.rel_error_below", tol)?;
                needs_truth("solver.stop.rel_error_below")?;
                StoppingRule::RelErrorBelow {
                    reference: truth.clone(),
                    tol,
                }
            }
            StopConfig::MaxTotalIterations(n) => {
                if n == 0 {
                    return Err(err(
                        "solver.stop.max_total_iterations",
                        "must be at least 1",
                    ));
                }
                StoppingRule::MaxTotalIterations(n)
            }
            StopConfig::TrackMinError(n) => {
                if n == 0 {
                    return Err(err("solver.stop.track_min_error", "must be at least 1"));
                }
                needs_truth("solver.stop.track_min_error")?;
                StoppingRule::TrackMinError {
                    reference: truth.clone(),
                    limit: n,
                }
            }
        };
        let mut params = SolverParams::new(self.delta, self.mu, stop);
        params.inner_n = self.inner_n;
        params.max_outer = self.max_outer;
        params.residual_tol = self.residual_tol;
        params.monitor = Some(truth.clone());
        if let Some(dt) = self.pde {
            params.pde = Some(dt.to_pde("solver.pde")?);
        }
        Ok(params)
    }
}

/// Evolution run; every key defaults to the `figure1_sparsify` preset.
#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    #[serde(default)]
    pub grid: Option<[usize; 2]>,
    #[serde(default)]
    pub kernel: Option<KernelConfig>,
    #[serde(default)]
    pub spike: Option<SpikeConfig>,
    #[serde(default)]
    pub bump_center: Option<[f64; 2]>,
    #[serde(default)]
    pub bump_width: Option<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub dt: Option<DtConfig>,
    #[serde(default)]
    pub snapshot_steps: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl EvolveConfig {
    pub fn to_spec(&self) -> Result<SparsifySpec, ConfigError> {
        let mut spec = SparsifySpec::default();
        if let Some(g) = self.grid {
            spec.grid = grid_from("grid", g)?;
        }
        if let Some(k) = &self.kernel {
            check_kernel("kernel", k)?;
            spec.kernel_size = k.size;
            spec.sigma = k.sigma;
        }
        if let Some(s) = self.spike {
            spec.spike = Spike {
                row: s.row,
                col: s.col,
                amplitude: s.amplitude,
            };
        }
        if spec.spike.row >= spec.grid.rows() || spec.spike.col >= spec.grid.cols() {
            return Err(err("spike", format!("lies outside grid {}", spec.grid)));
        }
        if !(spec.spike.amplitude != 0.0 && spec.spike.amplitude.is_finite()) {
            return Err(err("spike.amplitude", "must be finite and nonzero"));
        }
        if let Some([r, c]) = self.bump_center {
            spec.bump_center = (r, c);
        }
        if let Some(w) = self.bump_width {
            if !(w > 0.0 && w.is_finite()) {
                return Err(err("bump_width", format!("must be positive, got {w}")));
            }
            spec.bump_width = w;
        }
        if let Some(n) = self.steps {
            if n == 0 {
                return Err(err("steps", "must be at least 1"));
            }
            spec.steps = n;
        }
        if let Some(dt) = self.dt {
            spec.pde = dt.to_pde("dt")?;
        }
        if let Some(s) = &self.snapshot_steps {
            if let Some(i) = s.iter().position(|&n| n > spec.steps) {
                return Err(err(
                    &format!("snapshot_steps[{i}]"),
                    format!("exceeds the number of steps ({})", spec.steps),
                ));
            }
            spec.snapshot_steps = s.clone();
        } else {
            spec.snapshot_steps.retain(|&n| n <= spec.steps);
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_presets")]
    pub presets: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub inner_n: Option<usize>,
    #[serde(default)]
    pub iteration_limit: Option<usize>,
    /// `[delta, mu, dt]` triples replacing each preset's grid.
    #[serde(default)]
    pub rows: Option<Vec<[f64; 3]>>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            presets: default_presets(),
            seed: None,
            inner_n: None,
            iteration_limit: None,
            rows: None,
            steps: None,
            out: None,
        }
    }
}

fn default_presets() -> Vec<String> {
    Preset::ALL.iter().map(|p| p.name().to_string()).collect()
}

impl BenchConfig {
    pub fn presets(&self) -> Result<Vec<Preset>, ConfigError> {
        if self.presets.is_empty() {
            return Err(err("presets", "must name at least one preset"));
        }
        self.presets
            .iter()
            .enumerate()
            .map(|(i, name)| {
                name.parse::<Preset>()
                    .map_err(|_| err(&format!("presets[{i}]"), format!("unknown preset `{name}`")))
            })
            .collect()
    }

    pub fn overrides(&self, seed: Option<u64>) -> Result<BenchOverrides, ConfigError> {
        if self.inner_n == Some(0) {
            return Err(err("inner_n", "must be at least 1"));
        }
        if self.iteration_limit == Some(0) {
            return Err(err("iteration_limit", "must be at least 1"));
        }
        if self.steps == Some(0) {
            return Err(err("steps", "must be at least 1"));
        }
        let rows = match &self.rows {
            Some(rows) => {
                for (i, [delta, mu, dt]) in rows.iter().enumerate() {
                    for (name, v) in [("delta", delta), ("mu", mu), ("dt", dt)] {
                        if !(*v > 0.0 && v.is_finite()) {
                            return Err(err(
                                &format!("rows[{i}]"),
                                format!("{name} must be positive, got {v}"),
                            ));
                        }
                    }
                }
                Some(rows.iter().map(|&[a, b, c]| (a, b, c)).collect())
            }
            None => None,
        };
        Ok(BenchOverrides {
            seed: seed.or(self.seed),
            inner_n: self.inner_n,
            iteration_limit: self.iteration_limit,
            rows,
            steps: self.steps,
        })
    }
}
