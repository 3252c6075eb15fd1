//! Conservative finite-difference scheme for the spatial motion equation
//!
//! ```text
//! u_t = ∇·( |u| ∇p ),   p = Aᵀ(Au − f),   u = 0 on ∂Ω
//! ```
//!
//! One explicit step reads
//!
//! ```text
//! uⁿ⁺¹ = uⁿ + dt·( D₋ˣ[ |u|_{i+½,j} D₊ˣp ] + D₋ʸ[ |u|_{i,j+½} D₊ʸp ] )
//! ```
//!
//! where the face coefficient `|u|_{i+½,j}` is the mean magnitude of the
//! two neighbours when they share a strict sign and zero otherwise (see
//! [`half_cell_abs`]). Zero faces stop mass from crossing sign changes, so
//! as long as no cell flips sign within a step, ‖u‖₁ is conserved exactly
//! up to rounding. Ghost cells outside the grid are zero, hence every
//! boundary face carries no flux and Σu is conserved for any `dt`.
//!
//! Here `i` indexes rows (x direction) and `j` columns (y direction).

use crate::conv::ConvOperator;
use crate::error::{Error, Result};
use crate::field::{Field, Grid};

/// Time-step selection for the explicit scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    Fixed(f64),
    /// `dt = min(dt_max, safety / max|D₊p|)`.
    Adaptive {
        safety: f64,
        dt_max: f64,
    },
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy::Adaptive {
            safety: 0.5,
            dt_max: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PdeStepConfig {
    pub dt_policy: DtPolicy,
}

impl PdeStepConfig {
    pub fn fixed(dt: f64) -> Result<Self> {
        let cfg = PdeStepConfig {
            dt_policy: DtPolicy::Fixed(dt),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn adaptive(safety: f64, dt_max: f64) -> Result<Self> {
        let cfg = PdeStepConfig {
            dt_policy: DtPolicy::Adaptive { safety, dt_max },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match self.dt_policy {
            DtPolicy::Fixed(dt) if !(dt > 0.0 && dt.is_finite()) => {
                Err(Error::param("dt", format!("must be positive, got {dt}")))
            }
            DtPolicy::Adaptive { safety, .. } if !(safety > 0.0 && safety <= 1.0) => Err(
                Error::param("safety", format!("must lie in (0, 1], got {safety}")),
            ),
            DtPolicy::Adaptive { dt_max, .. } if !(dt_max > 0.0) => Err(Error::param(
                "dt_max",
                format!("must be positive, got {dt_max}"),
            )),
            _ => Ok(()),
        }
    }

    /// Step size for the frozen potential `p`.
    pub fn dt_for(&self, p: &Field) -> f64 {
        match self.dt_policy {
            DtPolicy::Fixed(dt) => dt,
            DtPolicy::Adaptive { safety, dt_max } => cfl_dt(p, safety, dt_max),
        }
    }
}

/// Face coefficient: `(|a| + |b|) / 2` if `a·b > 0`, else 0.
#[inline]
pub fn half_cell_abs(a: f64, b: f64) -> f64 {
    if a * b > 0.0 {
        0.5 * (a.abs() + b.abs())
    } else {
        0.0
    }
}

/// `p = Aᵀ(Au − f)`, the gradient of `H(u) = ½‖Au − f‖²`.
pub fn pde_gradient_field(op: &ConvOperator, u: &Field, f: &Field) -> Result<Field> {
    op.grid().check(&f.grid())?;
    let residual = op.forward(u)?.sub(f)?;
    op.adjoint(&residual)
}

/// `H(u) = ½‖Au − f‖₂²`.
pub fn residual_energy(op: &ConvOperator, u: &Field, f: &Field) -> Result<f64> {
    let r = op.forward(u)?.sub(f)?;
    Ok(0.5 * r.values().iter().map(|v| v * v).sum::<f64>())
}

/// Largest |D₊ˣp| or |D₊ʸp| over interior faces.
pub fn max_forward_difference(p: &Field) -> f64 {
    let g = p.grid();
    let (rows, cols) = (g.rows(), g.cols());
    let v = p.values();
    let mut m: f64 = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let here = v[r * cols + c];
            if r + 1 < rows {
                m = m.max((v[(r + 1) * cols + c] - here).abs());
            }
            if c + 1 < cols {
                m = m.max((v[r * cols + c + 1] - here).abs());
            }
        }
    }
    m
}

/// CFL step `min(dt_max, safety / M)`, or `dt_max` when `M = 0`.
pub fn cfl_dt(p: &Field, safety: f64, dt_max: f64) -> f64 {
    let m = max_forward_difference(p);
    if m == 0.0 {
        dt_max
    } else {
        (safety / m).min(dt_max)
    }
}

/// One explicit step of the conservative scheme with `p` frozen.
pub fn pde_step(u: &Field, p: &Field, dt: f64) -> Result<Field> {
    u.grid().check(&p.grid())?;
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let mut out = u.clone();
    step_in_place(u.grid(), u.values(), p.values(), dt, out.values_mut());
    Ok(out)
}

/// Writes `u + dt·div(|u|∇p)` into `out`, which must already hold `u`.
pub(crate) fn step_in_place(grid: Grid, u: &[f64], p: &[f64], dt: f64, out: &mut [f64]) {
    let (rows, cols) = (grid.rows(), grid.cols());
    // flux through the face shared with the next cell, accumulated into both
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if r + 1 < rows {
                let n = i + cols;
                let coeff = half_cell_abs(u[n], u[i]);
                if coeff != 0.0 {
                    let flux = dt * coeff * (p[n] - p[i]);
                    out[i] += flux;
                    out[n] -= flux;
                }
            }
            if c + 1 < cols {
                let n = i + 1;
                let coeff = half_cell_abs(u[n], u[i]);
                if coeff != 0.0 {
                    let flux = dt * coeff * (p[n] - p[i]);
                    out[i] += flux;
                    out[n] -= flux;
                }
            }
        }
    }
}

/// Per-step trace of an [`evolve`] run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvolveRecord {
    pub times: Vec<f64>,
    pub dts: Vec<f64>,
    pub l1_history: Vec<f64>,
    /// `H(u)` after each step.
    pub residual_history: Vec<f64>,
}

impl EvolveRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Runs `steps` explicit steps from `u0`.
pub fn evolve(
    op: &ConvOperator,
    u0: &Field,
    f: &Field,
    steps: usize,
    cfg: &PdeStepConfig,
) -> Result<(Field, EvolveRecord)> {
    evolve_with(op, u0, f, steps, cfg, |_, _| {})
}

/// Like [`evolve`], calling `observe(n, &u)` with the initial field (`n = 0`)
/// and after every step `n = 1..=steps`.
pub fn evolve_with(
    op: &ConvOperator,
    u0: &Field,
    f: &Field,
    steps: usize,
    cfg: &PdeStepConfig,
    mut observe: impl FnMut(usize, &Field),
) -> Result<(Field, EvolveRecord)> {
    let grid = op.grid();
    grid.check(&u0.grid())?;
    grid.check(&f.grid())?;
    cfg.validate()?;
    if steps == 0 {
        return Err(Error::param("steps", "must be positive"));
    }

    let mut record = EvolveRecord::default();
    let mut u = u0.clone();
    let mut au = op.forward(&u)?;
    let mut t = 0.0;
    observe(0, &u);
    for n in 1..=steps {
        let p = op.adjoint(&au.sub(f)?)?;
        let dt = cfg.dt_for(&p);
        let mut next = u.clone();
        step_in_place(grid, u.values(), p.values(), dt, next.values_mut());
        if !next.is_finite() {
            return Err(Error::Blowup {
                stage: "motion PDE",
                step: n,
            });
        }
        u = next;
        au = op.forward(&u)?;
        t += dt;
        let r = au.sub(f)?;
        record.times.push(t);
        record.dts.push(dt);
        record.l1_history.push(u.l1_norm());
        record
            .residual_history
            .push(0.5 * r.values().iter().map(|v| v * v).sum::<f64>());
        observe(n, &u);
    }
    Ok((u, record))
}
