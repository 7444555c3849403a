//! Uniform grids and the vectors that live on them.
//!
//! Models are defined cell-wise on a 1-D or 2-D uniform grid. Gradient-space
//! quantities ([`GradField`]) carry one component array per spatial axis, each
//! of model length, so a 2-D field is twice the model dimension when stacked.

use crate::error::{Error, Result};

/// A uniform 1-D or 2-D grid: axis lengths in cells plus physical cell size.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: Vec<usize>,
    spacing: Vec<f64>,
}

impl Grid {
    pub fn new_1d(n: usize, spacing: f64) -> Result<Self> {
        Self::new(vec![n], vec![spacing])
    }

    pub fn new_2d(nx: usize, ny: usize, spacing_x: f64, spacing_y: f64) -> Result<Self> {
        Self::new(vec![nx, ny], vec![spacing_x, spacing_y])
    }

    fn new(dims: Vec<usize>, spacing: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 2 {
            return Err(Error::InvalidParameter {
                name: "grid.dims",
                message: format!("only 1-D and 2-D grids are supported, got {}-D", dims.len()),
            });
        }
        for (axis, &n) in dims.iter().enumerate() {
            if n < 2 {
                return Err(Error::InvalidParameter {
                    name: "grid.dims",
                    message: format!("axis {axis} has length {n}; every axis needs at least 2 cells"),
                });
            }
        }
        for (axis, &h) in spacing.iter().enumerate() {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "grid.spacing",
                    message: format!("axis {axis} has spacing {h}; spacing must be positive and finite"),
                });
            }
        }
        Ok(Self { dims, spacing })
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Total number of cells (product of axis lengths).
    pub fn cell_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Linear-index stride along `axis` (cells are stored with axis 0 contiguous).
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.dims[0],
            _ => unreachable!("grids are at most 2-D"),
        }
    }
}

/// A model defined cell-wise on a [`Grid`]. Values are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVector {
    pub(crate) grid: Grid,
    pub(crate) values: Vec<f64>,
}

impl ModelVector {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::DimensionMismatch {
                context: "ModelVector::new",
                expected: grid.cell_count(),
                actual: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("ModelVector::new"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.cell_count();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        let n = grid.cell_count();
        Self::new(grid, vec![value; n])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn norm2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Component-wise `self - other`.
    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Component-wise `self + other`.
    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    /// `self += a * x`.
    pub(crate) fn axpy(&mut self, a: f64, x: &Self) {
        debug_assert_eq!(self.len(), x.len());
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Gradient-space quantity: one array per spatial axis, each of model length.
///
/// The splitting variable `x` and its multiplier `b` both use this layout in
/// either TV mode; isotropic TV differs only in how shrinkage groups the
/// per-axis entries.
#[derive(Debug, Clone, PartialEq)]
pub struct GradField {
    pub(crate) grid: Grid,
    pub(crate) components: Vec<Vec<f64>>,
}

impl GradField {
    pub fn new(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.ndim() {
            return Err(Error::DimensionMismatch {
                context: "GradField::new (component count)",
                expected: grid.ndim(),
                actual: components.len(),
            });
        }
        for c in &components {
            if c.len() != grid.cell_count() {
                return Err(Error::DimensionMismatch {
                    context: "GradField::new (component length)",
                    expected: grid.cell_count(),
                    actual: c.len(),
                });
            }
            if !c.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("GradField::new"));
            }
        }
        Ok(Self { grid, components })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.cell_count();
        let components = vec![vec![0.0; n]; grid.ndim()];
        Self { grid, components }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    pub(crate) fn component_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.components[axis]
    }

    pub fn norm2(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }

    /// Sum of absolute values over all components.
    pub fn l1(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v.abs())
            .sum()
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        Self {
            grid: self.grid.clone(),
            components,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Self {
            grid: self.grid.clone(),
            components,
        }
    }

    /// `self += a * x`.
    pub(crate) fn axpy(&mut self, a: f64, x: &Self) {
        debug_assert_eq!(self.grid, x.grid);
        for (c, xc) in self.components.iter_mut().zip(&x.components) {
            for (s, v) in c.iter_mut().zip(xc) {
                *s += a * v;
            }
        }
    }
}

/// Component-wise box constraints `lower <= m <= upper` on a shared grid.
#[derive(Debug, Clone)]
pub struct Bounds {
    lower: ModelVector,
    upper: ModelVector,
}

impl Bounds {
    pub fn new(lower: ModelVector, upper: ModelVector) -> Result<Self> {
        if lower.grid != upper.grid {
            return Err(Error::InvalidParameter {
                name: "bounds",
                message: "lower and upper bounds must share a grid".into(),
            });
        }
        if lower
            .values
            .iter()
            .zip(&upper.values)
            .any(|(lo, hi)| lo > hi)
        {
            return Err(Error::InvalidParameter {
                name: "bounds",
                message: "lower bound exceeds upper bound at some cell".into(),
            });
        }
        Ok(Self { lower, upper })
    }

    /// Uniform box `[lo, hi]` on every cell.
    pub fn constant(grid: Grid, lo: f64, hi: f64) -> Result<Self> {
        let lower = ModelVector::constant(grid.clone(), lo)?;
        let upper = ModelVector::constant(grid, hi)?;
        Self::new(lower, upper)
    }

    pub fn grid(&self) -> &Grid {
        self.lower.grid()
    }

    pub fn lower(&self) -> &ModelVector {
        &self.lower
    }

    pub fn upper(&self) -> &ModelVector {
        &self.upper
    }

    /// Largest amount by which `m` escapes the box (0 when feasible).
    pub fn max_violation(&self, m: &ModelVector) -> f64 {
        m.values
            .iter()
            .zip(&self.lower.values)
            .zip(&self.upper.values)
            .fold(0.0f64, |acc, ((v, lo), hi)| {
                acc.max(lo - v).max(v - hi)
            })
            .max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_short_axes_and_bad_spacing() {
        assert!(Grid::new_1d(1, 1.0).is_err());
        assert!(Grid::new_1d(2, 0.0).is_err());
        assert!(Grid::new_1d(2, -1.0).is_err());
        assert!(Grid::new_2d(3, 1, 1.0, 1.0).is_err());
        assert!(Grid::new_1d(2, 1.0).is_ok());
    }

    #[test]
    fn model_vector_checks_length_and_finiteness() {
        let g = Grid::new_1d(3, 1.0).unwrap();
        assert!(ModelVector::new(g.clone(), vec![1.0, 2.0]).is_err());
        assert!(ModelVector::new(g.clone(), vec![1.0, f64::NAN, 2.0]).is_err());
        assert!(ModelVector::new(g, vec![1.0, 2.0, 3.0]).is_ok());
    }

    #[test]
    fn grad_field_component_count_matches_dimensionality() {
        let g2 = Grid::new_2d(2, 3, 1.0, 1.0).unwrap();
        let f = GradField::zeros(g2.clone());
        assert_eq!(f.components().len(), 2);
        assert_eq!(f.component(0).len(), 6);
        assert!(GradField::new(g2, vec![vec![0.0; 6]]).is_err());
    }

    #[test]
    fn bounds_require_ordering() {
        let g = Grid::new_1d(3, 1.0).unwrap();
        assert!(Bounds::constant(g.clone(), 1.0, 0.0).is_err());
        let b = Bounds::constant(g.clone(), 0.0, 2.0).unwrap();
        let m = ModelVector::new(g, vec![-1.0, 1.0, 5.0]).unwrap();
        assert_eq!(b.max_violation(&m), 3.0);
    }

    #[test]
    fn strides_follow_axis0_contiguous_layout() {
        let g = Grid::new_2d(4, 3, 1.0, 2.0).unwrap();
        assert_eq!(g.stride(0), 1);
        assert_eq!(g.stride(1), 4);
        assert_eq!(g.cell_count(), 12);
    }
}
