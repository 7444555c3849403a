//! Linear forward modeling: the matrix-free operator interface, the
//! surface-uplift kernel, synthetic truth construction, and noisy-data
//! generation.
//!
//! The uplift operator maps a relative pressure change `m(xi)` along a buried
//! segment to vertical surface displacement through the smoothing kernel
//! `D^3 / (D^2 + (x - xi)^2)^(3/2)`, discretized with the midpoint rule on a
//! uniform grid over `[0, A]`. Observation points are collocated with the
//! model grid by default.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::{Grid, ModelVector};

/// Observed or simulated data samples (uplift, in proportional units).
#[derive(Debug, Clone, PartialEq)]
pub struct DataVector {
    values: Vec<f64>,
}

impl DataVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("DataVector::new"));
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
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

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// A linear map between model space and data space with an exact adjoint.
///
/// Implementations must be immutable after construction so that `apply` and
/// `adjoint` are safe to call concurrently. The solver only relies on this
/// interface, so richer (eventually nonlinear) operators can slot in behind
/// a broader trait later without touching the iteration.
pub trait LinearOperator {
    fn domain_size(&self) -> usize;
    fn range_size(&self) -> usize;
    /// Grid of the model space, used to shape adjoint outputs.
    fn model_grid(&self) -> &Grid;
    fn apply(&self, m: &ModelVector) -> Result<DataVector>;
    fn adjoint(&self, d: &DataVector) -> Result<ModelVector>;
}

/// Geometry of the uplift experiment: source depth, segment aperture, and
/// grid resolutions for model and data space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpliftGeometry {
    pub depth: f64,
    pub aperture: f64,
    pub n_model: usize,
    pub n_data: usize,
}

impl UpliftGeometry {
    pub fn new(depth: f64, aperture: f64, n_model: usize, n_data: usize) -> Result<Self> {
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(Error::InvalidParameter {
                name: "geometry.depth",
                message: format!("depth must be positive, got {depth}"),
            });
        }
        if !(aperture > 0.0) || !aperture.is_finite() {
            return Err(Error::InvalidParameter {
                name: "geometry.aperture",
                message: format!("aperture must be positive, got {aperture}"),
            });
        }
        if n_model < 2 || n_data < 2 {
            return Err(Error::InvalidParameter {
                name: "geometry.n_model/n_data",
                message: format!(
                    "at least 2 model and data points required, got {n_model}/{n_data}"
                ),
            });
        }
        Ok(Self {
            depth,
            aperture,
            n_model,
            n_data,
        })
    }

    /// Midpoint-rule source positions over `[0, aperture]`.
    pub fn model_coordinates(&self) -> Vec<f64> {
        midpoints(self.aperture, self.n_model)
    }

    /// Observation positions over `[0, aperture]`, collocated layout.
    pub fn data_coordinates(&self) -> Vec<f64> {
        midpoints(self.aperture, self.n_data)
    }
}

fn midpoints(extent: f64, n: usize) -> Vec<f64> {
    let h = extent / n as f64;
    (0..n).map(|i| (i as f64 + 0.5) * h).collect()
}

/// Point kernel `D^3 / (D^2 + (x - xi)^2)^(3/2)`; equals 1 at zero offset for
/// any depth.
pub fn uplift_kernel(x: f64, xi: f64, depth: f64) -> f64 {
    let d2 = depth * depth;
    let r2 = d2 + (x - xi) * (x - xi);
    depth * d2 / (r2 * r2.sqrt())
}

/// Discretized uplift operator: dense kernel matrix with midpoint quadrature
/// weights `aperture / n_model` baked in.
#[derive(Debug, Clone)]
pub struct UpliftOperator {
    geom: UpliftGeometry,
    model_grid: Grid,
    // Row-major n_data x n_model.
    kernel: Vec<f64>,
}

impl UpliftOperator {
    /// Build the operator for `geom` on the given 1-D model grid. The grid's
    /// spacing is the TV metric only; the quadrature uses the physical
    /// geometry.
    pub fn new(geom: UpliftGeometry, model_grid: Grid) -> Result<Self> {
        if model_grid.ndim() != 1 {
            return Err(Error::InvalidParameter {
                name: "model_grid",
                message: "the uplift operator is defined on 1-D model grids".into(),
            });
        }
        if model_grid.cell_count() != geom.n_model {
            return Err(Error::DimensionMismatch {
                context: "UpliftOperator::new",
                expected: geom.n_model,
                actual: model_grid.cell_count(),
            });
        }
        let xs = geom.data_coordinates();
        let xis = geom.model_coordinates();
        let w = geom.aperture / geom.n_model as f64;
        let mut kernel = Vec::with_capacity(geom.n_data * geom.n_model);
        for &x in &xs {
            for &xi in &xis {
                kernel.push(w * uplift_kernel(x, xi, geom.depth));
            }
        }
        Ok(Self {
            geom,
            model_grid,
            kernel,
        })
    }

    pub fn geometry(&self) -> &UpliftGeometry {
        &self.geom
    }

    /// Row-major discretized kernel (weights included), for inspection.
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }
}

impl LinearOperator for UpliftOperator {
    fn domain_size(&self) -> usize {
        self.geom.n_model
    }

    fn range_size(&self) -> usize {
        self.geom.n_data
    }

    fn model_grid(&self) -> &Grid {
        &self.model_grid
    }

    fn apply(&self, m: &ModelVector) -> Result<DataVector> {
        if m.len() != self.geom.n_model {
            return Err(Error::DimensionMismatch {
                context: "UpliftOperator::apply",
                expected: self.geom.n_model,
                actual: m.len(),
            });
        }
        let mut out = DataVector::zeros(self.geom.n_data);
        matvec(
            &self.kernel,
            self.geom.n_data,
            self.geom.n_model,
            m.values(),
            out.values_mut(),
        );
        Ok(out)
    }

    fn adjoint(&self, d: &DataVector) -> Result<ModelVector> {
        if d.len() != self.geom.n_data {
            return Err(Error::DimensionMismatch {
                context: "UpliftOperator::adjoint",
                expected: self.geom.n_data,
                actual: d.len(),
            });
        }
        let mut out = ModelVector::zeros(self.model_grid.clone());
        matvec_transposed(
            &self.kernel,
            self.geom.n_data,
            self.geom.n_model,
            d.values(),
            out.values_mut(),
        );
        Ok(out)
    }
}

fn matvec(a: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate().take(rows) {
        let row = &a[i * cols..(i + 1) * cols];
        *o = row.iter().zip(x).map(|(k, v)| k * v).sum();
    }
}

fn matvec_transposed(a: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for i in 0..rows {
        let row = &a[i * cols..(i + 1) * cols];
        let xi = x[i];
        for (o, k) in out.iter_mut().zip(row) {
            *o += k * xi;
        }
    }
}

/// The identity map; data space mirrors model space. Useful for denoising
/// problems and solver oracles.
#[derive(Debug, Clone)]
pub struct IdentityOperator {
    grid: Grid,
}

impl IdentityOperator {
    pub fn new(grid: Grid) -> Self {
        Self { grid }
    }
}

impl LinearOperator for IdentityOperator {
    fn domain_size(&self) -> usize {
        self.grid.cell_count()
    }

    fn range_size(&self) -> usize {
        self.grid.cell_count()
    }

    fn model_grid(&self) -> &Grid {
        &self.grid
    }

    fn apply(&self, m: &ModelVector) -> Result<DataVector> {
        if m.len() != self.grid.cell_count() {
            return Err(Error::DimensionMismatch {
                context: "IdentityOperator::apply",
                expected: self.grid.cell_count(),
                actual: m.len(),
            });
        }
        DataVector::new(m.values().to_vec())
    }

    fn adjoint(&self, d: &DataVector) -> Result<ModelVector> {
        if d.len() != self.grid.cell_count() {
            return Err(Error::DimensionMismatch {
                context: "IdentityOperator::adjoint",
                expected: self.grid.cell_count(),
                actual: d.len(),
            });
        }
        ModelVector::new(self.grid.clone(), d.values().to_vec())
    }
}

/// A dense matrix as a linear operator; handy for small test problems and
/// for exercising the solver against arbitrary maps.
#[derive(Debug, Clone)]
pub struct DenseMatrixOperator {
    grid: Grid,
    rows: usize,
    entries: Vec<f64>,
}

impl DenseMatrixOperator {
    /// Row-major `rows x grid.cell_count()` matrix.
    pub fn new(grid: Grid, rows: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * grid.cell_count() {
            return Err(Error::DimensionMismatch {
                context: "DenseMatrixOperator::new",
                expected: rows * grid.cell_count(),
                actual: entries.len(),
            });
        }
        if !entries.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("DenseMatrixOperator::new"));
        }
        Ok(Self {
            grid,
            rows,
            entries,
        })
    }
}

impl LinearOperator for DenseMatrixOperator {
    fn domain_size(&self) -> usize {
        self.grid.cell_count()
    }

    fn range_size(&self) -> usize {
        self.rows
    }

    fn model_grid(&self) -> &Grid {
        &self.grid
    }

    fn apply(&self, m: &ModelVector) -> Result<DataVector> {
        if m.len() != self.domain_size() {
            return Err(Error::DimensionMismatch {
                context: "DenseMatrixOperator::apply",
                expected: self.domain_size(),
                actual: m.len(),
            });
        }
        let mut out = DataVector::zeros(self.rows);
        matvec(
            &self.entries,
            self.rows,
            self.domain_size(),
            m.values(),
            out.values_mut(),
        );
        Ok(out)
    }

    fn adjoint(&self, d: &DataVector) -> Result<ModelVector> {
        if d.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "DenseMatrixOperator::adjoint",
                expected: self.rows,
                actual: d.len(),
            });
        }
        let mut out = ModelVector::zeros(self.grid.clone());
        matvec_transposed(
            &self.entries,
            self.rows,
            self.domain_size(),
            d.values(),
            out.values_mut(),
        );
        Ok(out)
    }
}

/// Piecewise-constant model from `(start, end, value)` intervals in physical
/// coordinates over `[0, extent]`; later intervals overwrite earlier ones,
/// cells outside every interval are zero.
///
/// A cell takes a value when its midpoint-rule center lies in `[start, end)`.
pub fn make_blocky_model(
    blocks: &[(f64, f64, f64)],
    grid: &Grid,
    extent: f64,
) -> Result<ModelVector> {
    if grid.ndim() != 1 {
        return Err(Error::InvalidParameter {
            name: "grid",
            message: "blocky models are built on 1-D grids".into(),
        });
    }
    if !(extent > 0.0) || !extent.is_finite() {
        return Err(Error::InvalidParameter {
            name: "extent",
            message: format!("extent must be positive, got {extent}"),
        });
    }
    for &(start, end, value) in blocks {
        if !(0.0..=extent).contains(&start) || !(0.0..=extent).contains(&end) || start > end {
            return Err(Error::InvalidParameter {
                name: "truth.blocks",
                message: format!(
                    "interval [{start}, {end}] must satisfy 0 <= start <= end <= {extent}"
                ),
            });
        }
        if !value.is_finite() {
            return Err(Error::NonFinite("truth.blocks value"));
        }
    }
    let n = grid.cell_count();
    let centers = midpoints(extent, n);
    let mut out = ModelVector::zeros(grid.clone());
    for &(start, end, value) in blocks {
        for (v, &c) in out.values_mut().iter_mut().zip(&centers) {
            if c >= start && c < end {
                *v = value;
            }
        }
    }
    Ok(out)
}

/// Add i.i.d. Gaussian noise with standard deviation
/// `sigma_frac * max|d|`, reproducible for a fixed seed.
pub fn add_noise(d: &DataVector, sigma_frac: f64, seed: u64) -> DataVector {
    assert!(
        sigma_frac >= 0.0,
        "sigma_frac must be non-negative, got {sigma_frac}"
    );
    let sigma = sigma_frac * d.max_abs();
    if sigma == 0.0 {
        return d.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("finite positive sigma");
    let values = d
        .values()
        .iter()
        .map(|v| v + normal.sample(&mut rng))
        .collect();
    DataVector { values }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> Grid {
        Grid::new_1d(n, 1.0).unwrap()
    }

    #[test]
    fn kernel_is_one_at_zero_offset() {
        for depth in [1.0, 100.0, 5000.0] {
            assert!((uplift_kernel(3.0, 3.0, depth) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_model_mid_aperture_approaches_analytic_limit() {
        // For an infinite aperture the uplift above a constant source of
        // strength c is exactly 2*D*c; at aperture 20*D the truncated
        // integral sits within 1%.
        let depth = 100.0;
        let aperture = 20.0 * depth;
        let n = 400;
        let geom = UpliftGeometry::new(depth, aperture, n, n).unwrap();
        let op = UpliftOperator::new(geom, unit_grid(n)).unwrap();
        let c = 0.7;
        let m = ModelVector::constant(unit_grid(n), c).unwrap();
        let u = op.apply(&m).unwrap();
        let mid = u.values()[n / 2];
        let analytic = 2.0 * depth * c;
        assert!(
            (mid - analytic).abs() / analytic < 0.01,
            "mid-aperture uplift {mid} vs analytic {analytic}"
        );
    }

    #[test]
    fn apply_matches_refined_quadrature() {
        // The coarse midpoint rule against the same rule on a 10x finer grid,
        // with the model held piecewise constant per coarse cell.
        let depth = 100.0;
        let aperture = 2000.0;
        let n = 200;
        let refine = 10;
        let geom = UpliftGeometry::new(depth, aperture, n, n).unwrap();
        let op = UpliftOperator::new(geom, unit_grid(n)).unwrap();

        let mut state = 0x853c49e6748fea9bu64;
        let mut next = || {
            state ^= state >> 12;
            state ^= state << 25;
            state ^= state >> 27;
            ((state.wrapping_mul(0x2545f4914f6cdd1d) >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = ModelVector::new(unit_grid(n), (0..n).map(|_| next() * 2.0).collect()).unwrap();
        let coarse = op.apply(&m).unwrap();

        let xs = geom.data_coordinates();
        let nf = n * refine;
        let wf = aperture / nf as f64;
        let fine_centers = (0..nf).map(|j| (j as f64 + 0.5) * wf).collect::<Vec<_>>();
        let mut err_sq = 0.0;
        let mut ref_sq = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let mut u = 0.0;
            for (j, &xi) in fine_centers.iter().enumerate() {
                u += wf * uplift_kernel(x, xi, depth) * m.values()[j / refine];
            }
            let d = coarse.values()[i] - u;
            err_sq += d * d;
            ref_sq += u * u;
        }
        let rel = (err_sq / ref_sq).sqrt();
        assert!(rel <= 0.005, "relative quadrature error {rel}");
    }

    #[test]
    fn adjoint_passes_dot_product_test() {
        let geom = UpliftGeometry::new(50.0, 1000.0, 40, 30).unwrap();
        let op = UpliftOperator::new(geom, unit_grid(40)).unwrap();
        let mut state = 0xda3e39cb94b95bdbu64;
        let mut next = || {
            state ^= state >> 12;
            state ^= state << 25;
            state ^= state >> 27;
            ((state.wrapping_mul(0x2545f4914f6cdd1d) >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for _ in 0..100 {
            let m = ModelVector::new(unit_grid(40), (0..40).map(|_| next()).collect()).unwrap();
            let d = DataVector::new((0..30).map(|_| next()).collect()).unwrap();
            let lhs: f64 = op
                .apply(&m)
                .unwrap()
                .values()
                .iter()
                .zip(d.values())
                .map(|(a, b)| a * b)
                .sum();
            let rhs = m.dot(&op.adjoint(&d).unwrap());
            let scale = m.norm2() * d.norm2();
            assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300));
        }
    }

    #[test]
    fn collocated_kernel_is_symmetric_so_adjoint_equals_apply() {
        let n = 25;
        let geom = UpliftGeometry::new(80.0, 500.0, n, n).unwrap();
        let op = UpliftOperator::new(geom, unit_grid(n)).unwrap();
        for i in 0..n {
            for j in 0..n {
                let a = op.kernel()[i * n + j];
                let b = op.kernel()[j * n + i];
                assert!((a - b).abs() <= 1e-15 * a.abs().max(b.abs()));
            }
        }
        let v: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let m = ModelVector::new(unit_grid(n), v.clone()).unwrap();
        let d = DataVector::new(v).unwrap();
        let fw = op.apply(&m).unwrap();
        let ad = op.adjoint(&d).unwrap();
        for (a, b) in fw.values().iter().zip(ad.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_is_linear() {
        let n = 30;
        let geom = UpliftGeometry::new(60.0, 900.0, n, n).unwrap();
        let op = UpliftOperator::new(geom, unit_grid(n)).unwrap();
        let u = ModelVector::new(unit_grid(n), (0..n).map(|i| (i as f64).sin()).collect()).unwrap();
        let v =
            ModelVector::new(unit_grid(n), (0..n).map(|i| (i as f64 * 0.3).cos()).collect())
                .unwrap();
        let lhs = op.apply(&u.add(&v)).unwrap();
        let fu = op.apply(&u).unwrap();
        let fv = op.apply(&v).unwrap();
        for i in 0..n {
            let sum = fu.values()[i] + fv.values()[i];
            assert!((lhs.values()[i] - sum).abs() <= 1e-12 * sum.abs().max(1.0));
        }
    }

    #[test]
    fn kernel_entries_are_strictly_positive() {
        let geom = UpliftGeometry::new(100.0, 2000.0, 50, 50).unwrap();
        let op = UpliftOperator::new(geom, unit_grid(50)).unwrap();
        assert!(op.kernel().iter().all(|&k| k > 0.0));
    }

    #[test]
    fn uplift_damps_total_variation_of_blocky_model() {
        // The smoothing kernel removes sharp contrasts; TV of the image is
        // below TV of the blocky source for the experiment geometry.
        let n = 200;
        let geom = UpliftGeometry::new(100.0, 2000.0, n, n).unwrap();
        let grid = unit_grid(n);
        let op = UpliftOperator::new(geom, grid.clone()).unwrap();
        let truth = make_blocky_model(
            &[(200.0, 500.0, 0.55), (500.0, 700.0, 1.0), (1200.0, 1500.0, 0.8)],
            &grid,
            2000.0,
        )
        .unwrap();
        let data = op.apply(&truth).unwrap();
        let image = ModelVector::new(grid, data.values().to_vec()).unwrap();
        let tv_model = crate::operators::tv_value(&truth, crate::operators::TvMode::Anisotropic);
        let tv_data = crate::operators::tv_value(&image, crate::operators::TvMode::Anisotropic);
        assert!(tv_data <= tv_model, "tv_data={tv_data} tv_model={tv_model}");
    }

    #[test]
    fn blocky_model_cases() {
        let grid = unit_grid(10);
        let empty = make_blocky_model(&[], &grid, 10.0).unwrap();
        assert!(empty.values().iter().all(|&v| v == 0.0));

        let full = make_blocky_model(&[(0.0, 10.0, 1.0)], &grid, 10.0).unwrap();
        assert!(full.values().iter().all(|&v| v == 1.0));

        assert!(make_blocky_model(&[(-1.0, 5.0, 1.0)], &grid, 10.0).is_err());
        assert!(make_blocky_model(&[(0.0, 11.0, 1.0)], &grid, 10.0).is_err());

        let two = make_blocky_model(&[(1.0, 3.0, 1.0), (6.0, 8.0, 0.5)], &grid, 10.0).unwrap();
        let jumps = crate::operators::grad_forward(&two)
            .component(0)
            .iter()
            .filter(|&&g| g != 0.0)
            .count();
        assert_eq!(jumps, 4);

        let overlap = make_blocky_model(&[(0.0, 10.0, 1.0), (4.0, 6.0, 0.2)], &grid, 10.0).unwrap();
        assert_eq!(overlap.values()[5], 0.2);
        assert_eq!(overlap.values()[0], 1.0);
    }

    #[test]
    fn noise_is_deterministic_and_scaled() {
        let d = DataVector::new((0..100_000).map(|i| ((i % 100) as f64) / 50.0).collect()).unwrap();

        let clean = add_noise(&d, 0.0, 7);
        assert_eq!(clean, d);

        let a = add_noise(&d, 0.15, 42);
        let b = add_noise(&d, 0.15, 42);
        assert_eq!(a, b);
        let c = add_noise(&d, 0.15, 43);
        assert_ne!(a, c);

        let sigma_target = 0.15 * d.max_abs();
        let diffs: Vec<f64> = a
            .values()
            .iter()
            .zip(d.values())
            .map(|(x, y)| x - y)
            .collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var =
            diffs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (diffs.len() - 1) as f64;
        let sd = var.sqrt();
        assert!(
            (sd - sigma_target).abs() / sigma_target < 0.02,
            "sample sd {sd} vs target {sigma_target}"
        );
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let geom = UpliftGeometry::new(10.0, 100.0, 5, 4).unwrap();
        let op = UpliftOperator::new(geom, unit_grid(5)).unwrap();
        let wrong = ModelVector::constant(unit_grid(6), 1.0).unwrap();
        assert!(op.apply(&wrong).is_err());
        let wrong_d = DataVector::zeros(5);
        assert!(op.adjoint(&wrong_d).is_err());
    }
}
