//! FPC Bregman iterations for `min ‖u‖₁ s.t. Au = f`, with an optional
//! motion-PDE stage inside every inner iteration.
//!
//! Outer loop (adding back the residual), starting from `u = 0`, `f⁰ = f`:
//!
//! ```text
//! repeat N times:   u ← inner_step(u, fᵏ)
//! fᵏ⁺¹ = fᵏ + f − Au
//! ```
//!
//! The plain inner step is `shrink(u − δ·p, μ)` with `p = Aᵀ(Au − fᵏ)`.
//! The PDE variant inserts `u ← u + dt·∇·(|u|∇p)` between the gradient step
//! and the shrink, reusing the same `p` evaluated at the start of the
//! iteration.

use std::time::Instant;

use crate::conv::ConvOperator;
use crate::error::{Error, Result};
use crate::field::{Field, Grid};
use crate::motion_pde::{step_in_place, PdeStepConfig};

/// Soft thresholding; `|x| ≤ mu` maps to 0.
#[inline]
pub fn shrink(x: f64, mu: f64) -> f64 {
    if x > mu {
        x - mu
    } else if x < -mu {
        x + mu
    } else {
        0.0
    }
}

/// When to stop the solver.
#[derive(Debug, Clone, PartialEq)]
pub enum StoppingRule {
    /// Stop as soon as `‖u − reference‖₂ / ‖reference‖₂ < tol`.
    RelErrorBelow {
        reference: Field,
        tol: f64,
    },
    MaxTotalIterations(usize),
    /// Run to `limit` inner iterations and return the iterate of least error.
    TrackMinError {
        reference: Field,
        limit: usize,
    },
}

impl StoppingRule {
    pub fn reference(&self) -> Option<&Field> {
        match self {
            StoppingRule::RelErrorBelow { reference, .. }
            | StoppingRule::TrackMinError { reference, .. } => Some(reference),
            StoppingRule::MaxTotalIterations(_) => None,
        }
    }

    fn iteration_limit(&self) -> Option<usize> {
        match *self {
            StoppingRule::MaxTotalIterations(n) | StoppingRule::TrackMinError { limit: n, .. } => {
                Some(n)
            }
            StoppingRule::RelErrorBelow { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    /// Gradient step δ.
    pub delta: f64,
    /// Shrinkage threshold μ.
    pub mu: f64,
    /// Inner iterations per Bregman refresh.
    pub inner_n: usize,
    pub max_outer: usize,
    /// Motion-PDE stage; `None` runs plain FPC Bregman.
    pub pde: Option<PdeStepConfig>,
    pub stop: StoppingRule,
    /// Early exit once `‖Au − f‖₂ ≤ residual_tol` at an outer boundary.
    pub residual_tol: f64,
    /// Ground truth for `error_history` when the stopping rule carries none.
    pub monitor: Option<Field>,
}

impl SolverParams {
    pub fn new(delta: f64, mu: f64, stop: StoppingRule) -> Self {
        SolverParams {
            delta,
            mu,
            inner_n: 10,
            max_outer: 100_000,
            pde: None,
            stop,
            residual_tol: 0.0,
            monitor: None,
        }
    }

    pub fn with_pde(mut self, pde: PdeStepConfig) -> Self {
        self.pde = Some(pde);
        self
    }

    pub fn validate(&self, grid: Grid) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::param(
                "delta",
                format!("must be positive, got {}", self.delta),
            ));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::param(
                "mu",
                format!("must be positive, got {}", self.mu),
            ));
        }
        if self.inner_n == 0 {
            return Err(Error::param("inner_n", "must be at least 1"));
        }
        if self.max_outer == 0 {
            return Err(Error::param("max_outer", "must be at least 1"));
        }
        if !(self.residual_tol >= 0.0) {
            return Err(Error::param("residual_tol", "must be nonnegative"));
        }
        if let Some(pde) = &self.pde {
            pde.validate()?;
        }
        match &self.stop {
            StoppingRule::RelErrorBelow { reference, tol } => {
                grid.check(&reference.grid())?;
                if !(*tol > 0.0) {
                    return Err(Error::param("tol", format!("must be positive, got {tol}")));
                }
                if reference.l2_norm() == 0.0 {
                    return Err(Error::ZeroReference);
                }
            }
            StoppingRule::TrackMinError { reference, limit } => {
                grid.check(&reference.grid())?;
                if *limit == 0 {
                    return Err(Error::param("limit", "must be at least 1"));
                }
                if reference.l2_norm() == 0.0 {
                    return Err(Error::ZeroReference);
                }
            }
            StoppingRule::MaxTotalIterations(0) => {
                return Err(Error::param("limit", "must be at least 1"));
            }
            StoppingRule::MaxTotalIterations(_) => {}
        }
        if let Some(m) = &self.monitor {
            grid.check(&m.grid())?;
        }
        Ok(())
    }

    fn error_reference(&self) -> Option<&Field> {
        self.stop
            .reference()
            .or(self.monitor.as_ref().filter(|m| m.l2_norm() > 0.0))
    }
}

/// Why a solve returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative error dropped below the tolerance.
    Tolerance,
    /// Residual reached `residual_tol` at an outer boundary.
    Residual,
    /// Iteration budget of the stopping rule was used up.
    IterationLimit,
    /// `max_outer` reached without meeting the stopping rule.
    OuterLimit,
}

/// Trajectory of one solve. Per-iteration histories are indexed by inner
/// iteration (entry `l` is measured after `l + 1` inner steps).
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub total_inner_iterations: usize,
    pub outer_iterations: usize,
    pub wall_seconds: f64,
    /// `‖Au − f‖₂` against the original data.
    pub residual_history: Vec<f64>,
    pub l1_history: Vec<f64>,
    /// Relative error against the reference; empty when the rule has none.
    pub error_history: Vec<f64>,
    /// `‖Au − f‖₂` at the end of each outer iteration.
    pub outer_residuals: Vec<f64>,
    /// PDE step sizes actually used; empty for plain FPC.
    pub dt_history: Vec<f64>,
    pub best_error: f64,
    /// Zero-based index into the histories of the best iterate.
    pub best_iterate_index: usize,
    /// Elapsed time when the best iterate was produced.
    pub wall_seconds_at_best: f64,
    pub termination: Termination,
}

impl RunRecord {
    pub fn limit_reached(&self) -> bool {
        matches!(
            self.termination,
            Termination::OuterLimit | Termination::IterationLimit
        )
    }

    pub fn converged(&self) -> bool {
        matches!(
            self.termination,
            Termination::Tolerance | Termination::Residual
        )
    }

    /// Equality of everything except wall time.
    pub fn same_numerics(&self, other: &RunRecord) -> bool {
        // best_error is NaN when nothing was tracked
        let strip = |r: &RunRecord| RunRecord {
            wall_seconds: 0.0,
            wall_seconds_at_best: 0.0,
            best_error: 0.0,
            ..r.clone()
        };
        self.best_error.to_bits() == other.best_error.to_bits() && strip(self) == strip(other)
    }
}

/// `shrink(u − δ·Aᵀ(Au − f_k), μ)`.
pub fn fpc_inner_step(
    u: &Field,
    f_k: &Field,
    op: &ConvOperator,
    delta: f64,
    mu: f64,
) -> Result<Field> {
    inner_step_public(u, f_k, op, delta, mu, None)
}

/// Gradient step, motion-PDE step with the same `p`, then shrink.
pub fn pde_fpc_inner_step(
    u: &Field,
    f_k: &Field,
    op: &ConvOperator,
    delta: f64,
    mu: f64,
    pde: &PdeStepConfig,
) -> Result<Field> {
    pde.validate()?;
    inner_step_public(u, f_k, op, delta, mu, Some(pde))
}

fn inner_step_public(
    u: &Field,
    f_k: &Field,
    op: &ConvOperator,
    delta: f64,
    mu: f64,
    pde: Option<&PdeStepConfig>,
) -> Result<Field> {
    let grid = op.grid();
    grid.check(&u.grid())?;
    grid.check(&f_k.grid())?;
    let au = op.forward(u)?;
    let mut ws = Workspace::new(grid);
    let mut out = Field::zeros(grid);
    inner_step(
        op,
        u.values(),
        au.values(),
        f_k.values(),
        delta,
        mu,
        pde,
        &mut ws,
        out.values_mut(),
    );
    if !out.is_finite() {
        let stage = if pde.is_some() {
            "PDE-FPC inner step"
        } else {
            "FPC inner step"
        };
        return Err(Error::Blowup { stage, step: 1 });
    }
    Ok(out)
}

/// `f_k + f − Au`.
pub fn bregman_refresh(f_k: &Field, f: &Field, u: &Field, op: &ConvOperator) -> Result<Field> {
    let grid = op.grid();
    grid.check(&f_k.grid())?;
    grid.check(&f.grid())?;
    let au = op.forward(u)?;
    f_k.add(f)?.sub(&au)
}

struct Workspace {
    residual: Vec<f64>,
    p: Vec<f64>,
    half: Vec<f64>,
    moved: Vec<f64>,
    dt: f64,
}

impl Workspace {
    fn new(grid: Grid) -> Self {
        let n = grid.len();
        Workspace {
            residual: vec![0.0; n],
            p: vec![0.0; n],
            half: vec![0.0; n],
            moved: vec![0.0; n],
            dt: 0.0,
        }
    }
}

/// Shared by both variants; only the optional PDE stage differs.
#[allow(clippy::too_many_arguments)]
fn inner_step(
    op: &ConvOperator,
    u: &[f64],
    au: &[f64],
    f_k: &[f64],
    delta: f64,
    mu: f64,
    pde: Option<&PdeStepConfig>,
    ws: &mut Workspace,
    out: &mut [f64],
) {
    for ((r, a), b) in ws.residual.iter_mut().zip(au).zip(f_k) {
        *r = a - b;
    }
    op.adjoint_into(&ws.residual, &mut ws.p);
    for ((h, x), g) in ws.half.iter_mut().zip(u).zip(&ws.p) {
        *h = x - delta * g;
    }
    let staged = match pde {
        Some(cfg) => {
            let grid = op.grid();
            // p is reused from the gradient stage
            let p = Field::from_vec(grid, ws.p.clone()).expect("workspace sized to grid");
            ws.dt = cfg.dt_for(&p);
            ws.moved.copy_from_slice(&ws.half);
            step_in_place(grid, &ws.half, &ws.p, ws.dt, &mut ws.moved);
            &ws.moved
        }
        None => &ws.half,
    };
    for (o, &x) in out.iter_mut().zip(staged) {
        *o = shrink(x, mu);
    }
}

fn sum_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Runs (PDE-)FPC Bregman from `u = 0`.
///
/// Returns the final iterate, or the least-error iterate under
/// [`StoppingRule::TrackMinError`].
pub fn solve(op: &ConvOperator, f: &Field, params: &SolverParams) -> Result<(Field, RunRecord)> {
    let grid = op.grid();
    grid.check(&f.grid())?;
    params.validate(grid)?;
    let start = Instant::now();

    let reference = params.error_reference();
    let ref_norm = reference.map(|r| r.l2_norm()).unwrap_or(1.0);
    let limit = params.stop.iteration_limit();
    let track_best = matches!(params.stop, StoppingRule::TrackMinError { .. });
    let stage = if params.pde.is_some() {
        "PDE-FPC inner step"
    } else {
        "FPC inner step"
    };

    let n = grid.len();
    let mut ws = Workspace::new(grid);
    let mut u = vec![0.0; n];
    let mut au = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut f_k = f.values().to_vec();

    let mut record = RunRecord {
        total_inner_iterations: 0,
        outer_iterations: 0,
        wall_seconds: 0.0,
        residual_history: Vec::new(),
        l1_history: Vec::new(),
        error_history: Vec::new(),
        outer_residuals: Vec::new(),
        dt_history: Vec::new(),
        best_error: f64::NAN,
        best_iterate_index: 0,
        wall_seconds_at_best: 0.0,
        termination: Termination::OuterLimit,
    };
    let mut best: Option<Vec<f64>> = None;

    'outer: for _ in 0..params.max_outer {
        record.outer_iterations += 1;
        for _ in 0..params.inner_n {
            inner_step(
                op,
                &u,
                &au,
                &f_k,
                params.delta,
                params.mu,
                params.pde.as_ref(),
                &mut ws,
                &mut next,
            );
            let step = record.total_inner_iterations + 1;
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Blowup { stage, step });
            }
            std::mem::swap(&mut u, &mut next);
            op.forward_into(&u, &mut au);
            record.total_inner_iterations = step;
            if params.pde.is_some() {
                record.dt_history.push(ws.dt);
            }
            record
                .residual_history
                .push(sum_sq_diff(&au, f.values()).sqrt());
            record.l1_history.push(u.iter().map(|v| v.abs()).sum());

            if let Some(reference) = reference {
                let err = sum_sq_diff(&u, reference.values()).sqrt() / ref_norm;
                record.error_history.push(err);
                if !(err >= record.best_error) {
                    record.best_error = err;
                    record.best_iterate_index = step - 1;
                    record.wall_seconds_at_best = start.elapsed().as_secs_f64();
                    if track_best {
                        best = Some(u.clone());
                    }
                }
                if let StoppingRule::RelErrorBelow { tol, .. } = params.stop {
                    if err < tol {
                        record.termination = Termination::Tolerance;
                        break 'outer;
                    }
                }
            }
            if limit == Some(step) {
                record.termination = Termination::IterationLimit;
                break 'outer;
            }
        }
        // add back the residual
        for ((fk, &fv), &a) in f_k.iter_mut().zip(f.values()).zip(&au) {
            *fk += fv - a;
        }
        let outer_res = sum_sq_diff(&au, f.values()).sqrt();
        record.outer_residuals.push(outer_res);
        if outer_res <= params.residual_tol {
            record.termination = Termination::Residual;
            break;
        }
    }

    record.wall_seconds = start.elapsed().as_secs_f64();
    let out = match best {
        Some(b) => b,
        None => u,
    };
    Ok((Field::from_vec(grid, out)?, record))
}
