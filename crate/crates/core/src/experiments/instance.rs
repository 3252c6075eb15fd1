use crate::conv::{gaussian_kernel, ConvOperator};
use crate::error::{Error, Result};
use crate::field::{Field, Grid};
use crate::rng::SplitMix64;

/// A single spike of the ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spike {
    pub row: usize,
    pub col: usize,
    pub amplitude: f64,
}

/// Sparse ground truth on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeSignal {
    grid: Grid,
    spikes: Vec<Spike>,
}

impl SpikeSignal {
    pub fn new(grid: Grid, spikes: Vec<Spike>) -> Result<Self> {
        for (i, s) in spikes.iter().enumerate() {
            if s.row >= grid.rows() || s.col >= grid.cols() {
                return Err(Error::param(
                    "spikes",
                    format!("spike ({}, {}) lies outside grid {grid}", s.row, s.col),
                ));
            }
            if !s.amplitude.is_finite() {
                return Err(Error::param("spikes", "amplitudes must be finite"));
            }
            if spikes[..i].iter().any(|t| t.row == s.row && t.col == s.col) {
                return Err(Error::param(
                    "spikes",
                    format!("duplicate spike location ({}, {})", s.row, s.col),
                ));
            }
        }
        Ok(SpikeSignal { grid, spikes })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn spikes(&self) -> &[Spike] {
        &self.spikes
    }

    pub fn to_field(&self) -> Field {
        make_spike_field(self)
    }
}

/// Zero field with each spike's amplitude at its cell.
pub fn make_spike_field(s: &SpikeSignal) -> Field {
    let mut out = Field::zeros(s.grid);
    let cols = s.grid.cols();
    let values = out.values_mut();
    for spike in &s.spikes {
        values[spike.row * cols + spike.col] = spike.amplitude;
    }
    out
}

/// How spike amplitudes are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum SpikeSpec {
    Explicit(Vec<Spike>),
    /// Amplitudes drawn uniformly from `[0.5, 1]` at the given locations.
    RandomAmplitudes(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    None,
    Std(f64),
    /// Scale a unit normal draw so the power-ratio SNR hits this value.
    TargetSnrDb(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub grid: Grid,
    pub spikes: SpikeSpec,
    /// Odd kernel side length.
    pub kernel_size: usize,
    pub sigma: f64,
    pub noise: NoiseSpec,
    pub seed: u64,
}

/// Ground truth, operator and observations for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub truth: SpikeSignal,
    pub operator: ConvOperator,
    pub f_clean: Field,
    pub f_observed: Field,
    pub noise_std: f64,
    /// NaN when noiseless.
    pub snr_db: f64,
    pub seed: u64,
}

impl Instance {
    pub fn truth_field(&self) -> Field {
        self.truth.to_field()
    }
}

pub const AMPLITUDE_RANGE: (f64, f64) = (0.5, 1.0);

/// Builds an instance; amplitudes are drawn first, then the noise field,
/// from one seeded stream.
pub fn make_instance(spec: &InstanceSpec) -> Result<Instance> {
    let mut rng = SplitMix64::new(spec.seed);
    let spikes = match &spec.spikes {
        SpikeSpec::Explicit(s) => s.clone(),
        SpikeSpec::RandomAmplitudes(locs) => locs
            .iter()
            .map(|&(row, col)| Spike {
                row,
                col,
                amplitude: rng.uniform_in(AMPLITUDE_RANGE.0, AMPLITUDE_RANGE.1),
            })
            .collect(),
    };
    let truth = SpikeSignal::new(spec.grid, spikes)?;
    let kernel = gaussian_kernel(spec.kernel_size, spec.kernel_size, spec.sigma)?;
    let operator = ConvOperator::new(spec.grid, kernel);
    let f_clean = operator.forward(&truth.to_field())?;

    let (noise_std, noise) = match spec.noise {
        NoiseSpec::None => (0.0, None),
        NoiseSpec::Std(0.0) => (0.0, None),
        NoiseSpec::Std(s) => {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::param(
                    "noise_std",
                    format!("must be nonnegative, got {s}"),
                ));
            }
            (s, Some(unit_noise(spec.grid, &mut rng).scale(s)))
        }
        NoiseSpec::TargetSnrDb(db) => {
            if !db.is_finite() {
                return Err(Error::param("snr_db", "must be finite"));
            }
            let n0 = unit_noise(spec.grid, &mut rng);
            let s = calibrate_noise(&f_clean, &n0, db)?;
            (s, Some(n0.scale(s)))
        }
    };
    let (f_observed, snr) = match noise {
        Some(n) => (f_clean.add(&n)?, snr_db(&f_clean, &n)?),
        None => (f_clean.clone(), f64::NAN),
    };
    Ok(Instance {
        truth,
        operator,
        f_clean,
        f_observed,
        noise_std,
        snr_db: snr,
        seed: spec.seed,
    })
}

fn unit_noise(grid: Grid, rng: &mut SplitMix64) -> Field {
    Field::from_fn(grid, |_, _| rng.normal())
}

/// Noise scale putting `scale · unit_noise` at `target_db`:
/// `‖f_clean‖ / (‖unit_noise‖ · 10^{target/20})`.
pub fn calibrate_noise(f_clean: &Field, unit_noise: &Field, target_db: f64) -> Result<f64> {
    let n = unit_noise.l2_norm();
    if n == 0.0 {
        return Err(Error::UndefinedSnr);
    }
    Ok(f_clean.l2_norm() / (n * 10f64.powf(target_db / 20.0)))
}

/// `10·log₁₀(Σ f_clean² / Σ noise²)`.
pub fn snr_db(f_clean: &Field, noise: &Field) -> Result<f64> {
    f_clean.grid().check(&noise.grid())?;
    let noise_power: f64 = noise.values().iter().map(|v| v * v).sum();
    if noise_power == 0.0 {
        return Err(Error::UndefinedSnr);
    }
    let signal_power: f64 = f_clean.values().iter().map(|v| v * v).sum();
    Ok(10.0 * (signal_power / noise_power).log10())
}

/// `‖u − truth‖₂ / ‖truth‖₂`.
pub fn rel_error(u: &Field, truth: &Field) -> Result<f64> {
    let denom = truth.l2_norm();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(u.sub(truth)?.l2_norm() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(noise: NoiseSpec) -> InstanceSpec {
        InstanceSpec {
            grid: Grid::square(20),
            spikes: SpikeSpec::RandomAmplitudes(vec![(5, 5), (12, 14), (3, 17)]),
            kernel_size: 9,
            sigma: 2.0,
            noise,
            seed: 11,
        }
    }

    #[test]
    fn spike_field_cases() {
        let g = Grid::square(10);
        let empty = SpikeSignal::new(g, vec![]).unwrap();
        assert_eq!(make_spike_field(&empty), Field::zeros(g));
        let one = SpikeSignal::new(
            g,
            vec![Spike {
                row: 5,
                col: 7,
                amplitude: 0.8,
            }],
        )
        .unwrap();
        let f = make_spike_field(&one);
        assert_eq!(f.count_above(0.0), 1);
        assert_eq!(f.get(5, 7), 0.8);
        let many = SpikeSignal::new(
            g,
            vec![
                Spike {
                    row: 1,
                    col: 1,
                    amplitude: 0.3,
                },
                Spike {
                    row: 2,
                    col: 8,
                    amplitude: -0.25,
                },
                Spike {
                    row: 9,
                    col: 0,
                    amplitude: 1.5,
                },
            ],
        )
        .unwrap();
        assert_eq!(make_spike_field(&many).l1_norm(), 0.3 + 0.25 + 1.5);
    }

    #[test]
    fn spike_validation() {
        let g = Grid::square(4);
        let oob = vec![Spike {
            row: 4,
            col: 0,
            amplitude: 1.0,
        }];
        assert!(SpikeSignal::new(g, oob).is_err());
        let dup = vec![
            Spike {
                row: 1,
                col: 1,
                amplitude: 1.0,
            },
            Spike {
                row: 1,
                col: 1,
                amplitude: 2.0,
            },
        ];
        assert!(SpikeSignal::new(g, dup).is_err());
        let mut s = spec(NoiseSpec::None);
        s.spikes = SpikeSpec::RandomAmplitudes(vec![(0, 25)]);
        assert!(make_instance(&s).is_err());
    }

    #[test]
    fn noiseless_instance() {
        let inst = make_instance(&spec(NoiseSpec::None)).unwrap();
        assert_eq!(inst.f_observed, inst.f_clean);
        assert!(inst.snr_db.is_nan());
        assert_eq!(inst.noise_std, 0.0);
        let again = make_instance(&spec(NoiseSpec::Std(0.0))).unwrap();
        assert_eq!(again.f_observed, again.f_clean);
    }

    #[test]
    fn amplitudes_in_range_and_deterministic() {
        let a = make_instance(&spec(NoiseSpec::Std(0.01))).unwrap();
        let b = make_instance(&spec(NoiseSpec::Std(0.01))).unwrap();
        assert_eq!(a, b);
        for s in a.truth.spikes() {
            assert!((0.5..=1.0).contains(&s.amplitude));
        }
    }

    #[test]
    fn target_snr_is_hit() {
        let inst = make_instance(&spec(NoiseSpec::TargetSnrDb(15.87))).unwrap();
        assert!((inst.snr_db - 15.87).abs() < 1e-9);
    }

    #[test]
    fn snr_cases() {
        let g = Grid::square(6);
        let f = Field::from_fn(g, |r, c| (r as f64 - c as f64 * 0.5).sin() + 0.1);
        assert!(snr_db(&f, &f).unwrap().abs() < 1e-12);
        assert!((snr_db(&f, &f.scale(0.1)).unwrap() - 20.0).abs() < 1e-10);
        assert_eq!(snr_db(&f, &Field::zeros(g)), Err(Error::UndefinedSnr));
    }

    #[test]
    fn rel_error_cases() {
        let g = Grid::square(5);
        let t = Field::from_fn(g, |r, c| (r * 5 + c) as f64 - 7.0);
        assert_eq!(rel_error(&t, &t).unwrap(), 0.0);
        assert_eq!(rel_error(&Field::zeros(g), &t).unwrap(), 1.0);
        assert!((rel_error(&t.scale(1.01), &t).unwrap() - 0.01).abs() < 1e-12);
        assert_eq!(rel_error(&t, &Field::zeros(g)), Err(Error::ZeroReference));
    }
}
