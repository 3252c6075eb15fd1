//! Dense 2-D fields on a unit-spaced rectangular grid.
//!
//! Storage is row-major. All finite differences elsewhere in the crate
//! assume spacing 1 in both directions.

use std::fmt;

use crate::error::{Error, Result};

/// Rectangular pixel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    rows: usize,
    cols: usize,
}

impl Grid {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param(
                "grid",
                format!("rows and cols must be positive, got {rows}x{cols}"),
            ));
        }
        Ok(Grid { rows, cols })
    }

    /// Square grid; panics on zero size.
    pub fn square(n: usize) -> Self {
        Grid::new(n, n).expect("square grid needs a positive size")
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.rows && col < self.cols);
        row * self.cols + col
    }

    #[inline]
    pub fn contains(&self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.rows && (col as usize) < self.cols
    }

    pub(crate) fn check(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::Dimension {
                expected: self.to_string(),
                found: other.to_string(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

/// Real-valued field over a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Field {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Wraps row-major values; the length must match the grid.
    pub fn from_vec(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension {
                expected: format!("{} values for grid {grid}", grid.len()),
                found: format!("{} values", values.len()),
            });
        }
        Ok(Field { grid, values })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for r in 0..grid.rows() {
            for c in 0..grid.cols() {
                values.push(f(r, c));
            }
        }
        Field { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.grid.index(row, col)]
    }

    /// Copy of this field with one entry replaced.
    pub fn with_value(&self, row: usize, col: usize, value: f64) -> Field {
        let mut out = self.clone();
        let idx = self.grid.index(row, col);
        out.values[idx] = value;
        out
    }

    /// ‖u‖₁ = Σ|uᵢ|.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    /// ‖u‖₂.
    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Σuᵢ, the signed mass.
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Minimum and maximum entry.
    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Location of the entry with the largest magnitude (first one on ties).
    pub fn argmax_abs(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if v.abs() > self.values[best].abs() {
                best = i;
            }
        }
        (best / self.grid.cols(), best % self.grid.cols())
    }

    /// Number of entries whose magnitude exceeds `threshold`.
    pub fn count_above(&self, threshold: f64) -> usize {
        self.values.iter().filter(|v| v.abs() > threshold).count()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.grid.check(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn scale(&self, alpha: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `self - other`.
    pub fn sub(&self, other: &Field) -> Result<Field> {
        axpy(-1.0, other, self)
    }

    /// `self + other`.
    pub fn add(&self, other: &Field) -> Result<Field> {
        axpy(1.0, other, self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Returns `alpha * x + y`.
///
/// `alpha` of 0, 1 and -1 are special-cased so that the result is exact.
pub fn axpy(alpha: f64, x: &Field, y: &Field) -> Result<Field> {
    x.grid.check(&y.grid)?;
    let values = if alpha == 0.0 {
        y.values.clone()
    } else if alpha == 1.0 {
        x.values.iter().zip(&y.values).map(|(a, b)| a + b).collect()
    } else if alpha == -1.0 {
        x.values.iter().zip(&y.values).map(|(a, b)| b - a).collect()
    } else {
        x.values
            .iter()
            .zip(&y.values)
            .map(|(a, b)| alpha * a + b)
            .collect()
    };
    Ok(Field {
        grid: y.grid,
        values,
    })
}

pub fn l1_norm(u: &Field) -> f64 {
    u.l1_norm()
}

pub fn l2_norm(u: &Field) -> f64 {
    u.l2_norm()
}
