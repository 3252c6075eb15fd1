//! Blur-and-restrict measurement operator `A = χ_S ∘ (K *)` and its adjoint.
//!
//! Convolution is zero padded: values outside the grid are treated as 0,
//! and the output lives on the same grid as the input. The adjoint is the
//! correlation with `K` applied after masking.
//!
//! Kernels built by [`gaussian_kernel`] carry their 1-D factors, which lets
//! the operator use a separable sweep. [`ConvOperator::forward_direct`] and
//! [`ConvOperator::adjoint_direct`] always run the full 2-D stencil and serve
//! as the reference path.

use crate::error::{Error, Result};
use crate::field::{Field, Grid};

/// Odd-sized convolution kernel with its center at `(half_h, half_w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    half_h: usize,
    half_w: usize,
    weights: Vec<f64>,
    sigma: Option<f64>,
    factors: Option<(Vec<f64>, Vec<f64>)>,
}

/// Gaussian weights `exp(-(i² + j²) / (2σ²))` on the centered integer window,
/// normalized to unit sum.
pub fn gaussian_kernel(rows: usize, cols: usize, sigma: f64) -> Result<Kernel> {
    check_odd(rows, cols)?;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::param(
            "sigma",
            format!("must be positive, got {sigma}"),
        ));
    }
    let (hh, hw) = ((rows / 2) as isize, (cols / 2) as isize);
    let two_s2 = 2.0 * sigma * sigma;
    let mut weights = Vec::with_capacity(rows * cols);
    for i in -hh..=hh {
        for j in -hw..=hw {
            weights.push((-((i * i + j * j) as f64) / two_s2).exp());
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let factor = |h: isize| {
        let g: Vec<f64> = (-h..=h)
            .map(|i| (-((i * i) as f64) / two_s2).exp())
            .collect();
        let s: f64 = g.iter().sum();
        g.into_iter().map(|v| v / s).collect::<Vec<_>>()
    };
    Ok(Kernel {
        half_h: hh as usize,
        half_w: hw as usize,
        weights,
        sigma: Some(sigma),
        factors: Some((factor(hh), factor(hw))),
    })
}

fn check_odd(rows: usize, cols: usize) -> Result<()> {
    if rows.is_multiple_of(2) || cols.is_multiple_of(2) {
        return Err(Error::param(
            "kernel size",
            format!("must be odd x odd, got {rows}x{cols}"),
        ));
    }
    Ok(())
}

impl Kernel {
    /// Generic kernel from row-major weights. No normalization is applied.
    pub fn from_weights(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        check_odd(rows, cols)?;
        if weights.len() != rows * cols {
            return Err(Error::Dimension {
                expected: format!("{} kernel weights", rows * cols),
                found: format!("{}", weights.len()),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::param("kernel weights", "must be finite"));
        }
        Ok(Kernel {
            half_h: rows / 2,
            half_w: cols / 2,
            weights,
            sigma: None,
            factors: None,
        })
    }

    pub fn half_h(&self) -> usize {
        self.half_h
    }

    pub fn half_w(&self) -> usize {
        self.half_w
    }

    pub fn rows(&self) -> usize {
        2 * self.half_h + 1
    }

    pub fn cols(&self) -> usize {
        2 * self.half_w + 1
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset `(di, dj)` from the center.
    pub fn weight(&self, di: isize, dj: isize) -> f64 {
        let r = (di + self.half_h as isize) as usize;
        let c = (dj + self.half_w as isize) as usize;
        self.weights[r * self.cols() + c]
    }

    /// Drops the separable factors, forcing the direct stencil.
    pub fn without_factors(mut self) -> Self {
        self.factors = None;
        self
    }

    pub fn is_separable(&self) -> bool {
        self.factors.is_some()
    }
}

/// Indicator of the sampling region `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    grid: Grid,
    indicator: Vec<bool>,
}

impl SamplingMask {
    pub fn new(grid: Grid, indicator: Vec<bool>) -> Result<Self> {
        if indicator.len() != grid.len() {
            return Err(Error::Dimension {
                expected: format!("{} mask flags", grid.len()),
                found: format!("{}", indicator.len()),
            });
        }
        if !indicator.iter().any(|&b| b) {
            return Err(Error::param("mask", "must select at least one cell"));
        }
        Ok(SamplingMask { grid, indicator })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn indicator(&self) -> &[bool] {
        &self.indicator
    }

    /// Zeroes every entry outside the region.
    pub fn apply(&self, v: &Field) -> Result<Field> {
        self.grid.check(&v.grid())?;
        let mut out = v.clone();
        self.apply_in_place(out.values_mut());
        Ok(out)
    }

    fn apply_in_place(&self, values: &mut [f64]) {
        for (v, &keep) in values.iter_mut().zip(&self.indicator) {
            if !keep {
                *v = 0.0;
            }
        }
    }
}

/// The measurement operator on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvOperator {
    kernel: Kernel,
    mask: Option<SamplingMask>,
    grid: Grid,
}

impl ConvOperator {
    /// Operator observing the full domain.
    pub fn new(grid: Grid, kernel: Kernel) -> Self {
        ConvOperator {
            kernel,
            mask: None,
            grid,
        }
    }

    pub fn with_mask(grid: Grid, kernel: Kernel, mask: SamplingMask) -> Result<Self> {
        grid.check(&mask.grid())?;
        Ok(ConvOperator {
            kernel,
            mask: Some(mask),
            grid,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn mask(&self) -> Option<&SamplingMask> {
        self.mask.as_ref()
    }

    /// `Au`.
    pub fn forward(&self, u: &Field) -> Result<Field> {
        self.grid.check(&u.grid())?;
        let mut out = Field::zeros(self.grid);
        self.forward_into(u.values(), out.values_mut());
        Ok(out)
    }

    /// `Aᵀv`.
    pub fn adjoint(&self, v: &Field) -> Result<Field> {
        self.grid.check(&v.grid())?;
        let mut out = Field::zeros(self.grid);
        self.adjoint_into(v.values(), out.values_mut());
        Ok(out)
    }

    /// `Au` through the full 2-D stencil regardless of separability.
    pub fn forward_direct(&self, u: &Field) -> Result<Field> {
        self.grid.check(&u.grid())?;
        let mut out = Field::zeros(self.grid);
        stencil_2d(&self.kernel, self.grid, u.values(), out.values_mut(), false);
        if let Some(m) = &self.mask {
            m.apply_in_place(out.values_mut());
        }
        Ok(out)
    }

    /// `Aᵀv` through the full 2-D stencil regardless of separability.
    pub fn adjoint_direct(&self, v: &Field) -> Result<Field> {
        self.grid.check(&v.grid())?;
        let masked = match &self.mask {
            Some(m) => m.apply(v)?,
            None => v.clone(),
        };
        let mut out = Field::zeros(self.grid);
        stencil_2d(
            &self.kernel,
            self.grid,
            masked.values(),
            out.values_mut(),
            true,
        );
        Ok(out)
    }

    pub(crate) fn forward_into(&self, u: &[f64], out: &mut [f64]) {
        self.blur(u, out, false);
        if let Some(m) = &self.mask {
            m.apply_in_place(out);
        }
    }

    pub(crate) fn adjoint_into(&self, v: &[f64], out: &mut [f64]) {
        match &self.mask {
            Some(m) => {
                let mut masked = v.to_vec();
                m.apply_in_place(&mut masked);
                self.blur(&masked, out, true);
            }
            None => self.blur(v, out, true),
        }
    }

    fn blur(&self, input: &[f64], out: &mut [f64], reflect: bool) {
        match &self.kernel.factors {
            Some((fr, fc)) => separable(fr, fc, self.grid, input, out, reflect),
            None => stencil_2d(&self.kernel, self.grid, input, out, reflect),
        }
    }
}

/// out(r,c) = Σ w(a,b) in(r∓a, c∓b); the lower sign is the reflected
/// (correlation) stencil used by the adjoint.
fn stencil_2d(k: &Kernel, grid: Grid, input: &[f64], out: &mut [f64], reflect: bool) {
    let (rows, cols) = (grid.rows() as isize, grid.cols() as isize);
    let (hh, hw) = (k.half_h as isize, k.half_w as isize);
    let s = if reflect { 1 } else { -1 };
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for a in -hh..=hh {
                let rr = r + s * a;
                if rr < 0 || rr >= rows {
                    continue;
                }
                let krow = ((a + hh) * (2 * hw + 1)) as usize;
                let irow = (rr * cols) as usize;
                for b in -hw..=hw {
                    let cc = c + s * b;
                    if cc < 0 || cc >= cols {
                        continue;
                    }
                    acc += k.weights[krow + (b + hw) as usize] * input[irow + cc as usize];
                }
            }
            out[(r * cols + c) as usize] = acc;
        }
    }
}

fn separable(fr: &[f64], fc: &[f64], grid: Grid, input: &[f64], out: &mut [f64], reflect: bool) {
    let (rows, cols) = (grid.rows() as isize, grid.cols() as isize);
    let hh = (fr.len() / 2) as isize;
    let hw = (fc.len() / 2) as isize;
    let s = if reflect { 1 } else { -1 };

    // along columns within each row
    let mut tmp = vec![0.0; input.len()];
    for r in 0..rows {
        let base = (r * cols) as usize;
        for c in 0..cols {
            let mut acc = 0.0;
            for b in -hw..=hw {
                let cc = c + s * b;
                if cc >= 0 && cc < cols {
                    acc += fc[(b + hw) as usize] * input[base + cc as usize];
                }
            }
            tmp[base + c as usize] = acc;
        }
    }
    // then along rows
    out.iter_mut().for_each(|v| *v = 0.0);
    for r in 0..rows {
        let obase = (r * cols) as usize;
        for a in -hh..=hh {
            let rr = r + s * a;
            if rr < 0 || rr >= rows {
                continue;
            }
            let w = fr[(a + hh) as usize];
            let ibase = (rr * cols) as usize;
            for c in 0..cols as usize {
                out[obase + c] += w * tmp[ibase + c];
            }
        }
    }
}
