//! Discrete differential operators, the gradient map, shrinkage, and box
//! projection.
//!
//! The gradient uses one-sided forward differences scaled by cell size, with a
//! zero in the last cell along each axis (homogeneous Neumann boundary), so a
//! constant model has exactly zero gradient. `grad_adjoint` is the exact
//! algebraic transpose of `grad_forward`; the pairing is pinned by dot-product
//! tests rather than by duplicating the stencil formula.
//!
//! All functions here are pure and safe to call from multiple threads.

use serde::Deserialize;

use crate::grid::{Bounds, GradField, ModelVector};

/// Total-variation flavor. In 1-D the two coincide up to the sign of the
/// per-cell entries; in 2-D, `Isotropic` couples the axis components through
/// the per-cell Euclidean magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TvMode {
    Anisotropic,
    Isotropic,
}

impl TvMode {
    /// The shrinkage grouping that realizes this TV flavor.
    pub fn shrink_mode(self) -> ShrinkMode {
        match self {
            TvMode::Anisotropic => ShrinkMode::Componentwise,
            TvMode::Isotropic => ShrinkMode::Grouped,
        }
    }
}

impl std::fmt::Display for TvMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TvMode::Anisotropic => write!(f, "anisotropic"),
            TvMode::Isotropic => write!(f, "isotropic"),
        }
    }
}

/// How [`shrink`] treats the per-axis entries of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShrinkMode {
    /// Soft-threshold every scalar entry independently.
    Componentwise,
    /// Per cell, shrink the magnitude of the axis-component vector and keep
    /// its direction.
    Grouped,
}

/// Output of the gradient map: stacked per-axis gradients for anisotropic TV,
/// a per-cell gradient magnitude for isotropic TV.
#[derive(Debug, Clone)]
pub enum PhiField {
    Stacked(GradField),
    Magnitude(ModelVector),
}

impl PhiField {
    /// Sum of absolute values; this is the TV seminorm for either flavor.
    pub fn l1(&self) -> f64 {
        match self {
            PhiField::Stacked(g) => g.l1(),
            PhiField::Magnitude(m) => m.values().iter().map(|v| v.abs()).sum(),
        }
    }
}

/// Forward-difference gradient, one component per axis, zero in the last cell
/// along each axis.
pub fn grad_forward(m: &ModelVector) -> GradField {
    let grid = m.grid().clone();
    let mut out = GradField::zeros(grid.clone());
    let v = m.values();
    for axis in 0..grid.ndim() {
        let n_axis = grid.dims()[axis];
        let stride = grid.stride(axis);
        let h = grid.spacing()[axis];
        let comp = out.component_mut(axis);
        for (idx, g) in comp.iter_mut().enumerate() {
            let pos_along = (idx / stride) % n_axis;
            if pos_along + 1 < n_axis {
                *g = (v[idx + stride] - v[idx]) / h;
            }
        }
    }
    out
}

/// Exact algebraic adjoint of [`grad_forward`] (negative discrete divergence).
pub fn grad_adjoint(g: &GradField) -> ModelVector {
    let grid = g.grid().clone();
    let mut out = ModelVector::zeros(grid.clone());
    let v = out.values_mut();
    for axis in 0..grid.ndim() {
        let n_axis = grid.dims()[axis];
        let stride = grid.stride(axis);
        let h = grid.spacing()[axis];
        let comp = g.component(axis);
        for (idx, o) in v.iter_mut().enumerate() {
            let pos_along = (idx / stride) % n_axis;
            // Column idx of the forward-difference matrix touches row idx
            // (coefficient -1/h, absent on the last slice) and row idx-stride
            // (coefficient +1/h, absent on the first slice).
            if pos_along + 1 < n_axis {
                *o -= comp[idx] / h;
            }
            if pos_along > 0 {
                *o += comp[idx - stride] / h;
            }
        }
    }
    out
}

/// The gradient map: per-axis stack (anisotropic) or per-cell magnitude
/// (isotropic). In 1-D the magnitude is just the absolute gradient.
pub fn phi(m: &ModelVector, mode: TvMode) -> PhiField {
    let grad = grad_forward(m);
    match mode {
        TvMode::Anisotropic => PhiField::Stacked(grad),
        TvMode::Isotropic => {
            let grid = m.grid().clone();
            let n = grid.cell_count();
            let mut mag = vec![0.0; n];
            for comp in grad.components() {
                for (s, v) in mag.iter_mut().zip(comp) {
                    *s += v * v;
                }
            }
            for s in mag.iter_mut() {
                *s = s.sqrt();
            }
            let mut out = ModelVector::zeros(grid);
            out.values_mut().copy_from_slice(&mag);
            PhiField::Magnitude(out)
        }
    }
}

/// TV seminorm of a model under the given flavor.
pub fn tv_value(m: &ModelVector, mode: TvMode) -> f64 {
    phi(m, mode).l1()
}

/// Scalar soft threshold: `sign(t) * max(|t| - gamma, 0)`.
pub fn shrink_scalar(t: f64, gamma: f64) -> f64 {
    if t > gamma {
        t - gamma
    } else if t < -gamma {
        t + gamma
    } else {
        0.0
    }
}

/// Shrinkage (the prox of `gamma * ||.||_1`) on a gradient-space field.
///
/// `Grouped` shrinks the per-cell magnitude across axis components and keeps
/// the direction; a zero-magnitude cell maps to zero (the unique prox value
/// there, resolving the 0/0 in the direction factor).
pub fn shrink(v: &GradField, gamma: f64, mode: ShrinkMode) -> GradField {
    assert!(gamma > 0.0, "shrink requires gamma > 0, got {gamma}");
    let mut out = v.clone();
    match mode {
        ShrinkMode::Componentwise => {
            for axis in 0..out.grid().ndim() {
                for t in out.component_mut(axis) {
                    *t = shrink_scalar(*t, gamma);
                }
            }
        }
        ShrinkMode::Grouped => {
            let n = v.grid().cell_count();
            for idx in 0..n {
                let mut norm_sq = 0.0;
                for comp in v.components() {
                    norm_sq += comp[idx] * comp[idx];
                }
                let norm = norm_sq.sqrt();
                let scale = if norm > 0.0 {
                    (norm - gamma).max(0.0) / norm
                } else {
                    0.0
                };
                for axis in 0..out.grid().ndim() {
                    out.component_mut(axis)[idx] = v.component(axis)[idx] * scale;
                }
            }
        }
    }
    out
}

/// Component-wise clamp onto the box: `max(min(m, upper), lower)`.
pub fn project(m: &ModelVector, bounds: &Bounds) -> ModelVector {
    debug_assert_eq!(m.grid(), bounds.grid());
    let mut out = m.clone();
    for ((v, lo), hi) in out
        .values_mut()
        .iter_mut()
        .zip(bounds.lower().values())
        .zip(bounds.upper().values())
    {
        *v = v.min(*hi).max(*lo);
    }
    out
}
