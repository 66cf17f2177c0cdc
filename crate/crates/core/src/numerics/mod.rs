//! Discrete substrate: uniform 1D grids, fields aligned to them, quadrature,
//! spectral differentiation and cubic interpolation.
//!
//! Two boundary conditions are supported. A `Periodic` grid of `n` points
//! covers `[x_min, x_max)` with nodes at `x_min + j*h`, `h = L/n`. A `Box`
//! grid stores only the `n` interior points of `[x_min, x_max]`, nodes at
//! `x_min + (j+1)*h` with `h = L/(n+1)`; fields vanish on both walls and are
//! expanded in the sine basis.

mod interp;
mod spectral;

pub use interp::{interpolate, CubicTable};
pub use spectral::{gradient, gradient_log, gradient_real, laplacian, laplacian_real, LogGradient, Transform};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MIN_GRID_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    Box,
}

impl Boundary {
    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::Box => "box",
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "box" => Ok(Boundary::Box),
            other => Err(format!("unknown boundary `{other}` (expected periodic or box)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    n_points: usize,
    x_min: f64,
    x_max: f64,
    boundary: Boundary,
}

impl SpatialGrid {
    pub fn new(n_points: usize, x_min: f64, x_max: f64, boundary: Boundary) -> Result<Self> {
        if n_points < MIN_GRID_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_GRID_POINTS} points, got {n_points}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::InvalidGrid(format!(
                "x_max ({x_max}) must exceed x_min ({x_min})"
            )));
        }
        Ok(Self {
            n_points,
            x_min,
            x_max,
            boundary,
        })
    }

    pub fn periodic(n_points: usize, x_min: f64, x_max: f64) -> Result<Self> {
        Self::new(n_points, x_min, x_max, Boundary::Periodic)
    }

    pub fn boxed(n_points: usize, x_min: f64, x_max: f64) -> Result<Self> {
        Self::new(n_points, x_min, x_max, Boundary::Box)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn spacing(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.length() / self.n_points as f64,
            Boundary::Box => self.length() / (self.n_points + 1) as f64,
        }
    }

    /// Position of node `j`.
    pub fn x(&self, j: usize) -> f64 {
        let h = self.spacing();
        match self.boundary {
            Boundary::Periodic => self.x_min + j as f64 * h,
            Boundary::Box => self.x_min + (j + 1) as f64 * h,
        }
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Maps a position back into the domain: wrap for periodic grids,
    /// clamp to the walls for box grids.
    pub fn confine(&self, x: f64) -> f64 {
        match self.boundary {
            Boundary::Periodic => {
                let l = self.length();
                let mut y = (x - self.x_min).rem_euclid(l);
                // rem_euclid can round up to exactly `l`
                if y >= l {
                    y = 0.0;
                }
                self.x_min + y
            }
            Boundary::Box => x.clamp(self.x_min, self.x_max),
        }
    }

    /// Fractional node index of `x`. Box walls sit at indices -1 and n.
    pub(crate) fn fractional_index(&self, x: f64) -> f64 {
        let s = (x - self.x_min) / self.spacing();
        match self.boundary {
            Boundary::Periodic => s,
            Boundary::Box => s - 1.0,
        }
    }

    /// Points per coarse cell when the grid is split into `cells` equal blocks.
    pub fn cell_width(&self, cells: usize) -> Result<usize> {
        if cells == 0 || !self.n_points.is_multiple_of(cells) {
            return Err(Error::CoarseCells {
                cells,
                n_points: self.n_points,
            });
        }
        Ok(self.n_points / cells)
    }
}

/// Values sampled on the nodes of a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    grid: SpatialGrid,
    values: Vec<T>,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: Copy> Field<T> {
    pub fn new(grid: SpatialGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::Alignment {
                expected: grid.n_points(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> T) -> Self {
        let values = (0..grid.n_points()).map(|j| f(grid.x(j))).collect();
        Self { grid, values }
    }

    pub fn filled(grid: SpatialGrid, value: T) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_points()],
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn ensure_aligned<U>(&self, other: &Field<U>) -> Result<()> {
        if self.grid != other.grid || self.values.len() != other.values.len() {
            return Err(Error::Alignment {
                expected: self.values.len(),
                got: other.values.len(),
            });
        }
        Ok(())
    }

    /// Pointwise combination of two aligned fields.
    pub fn zip_map<U: Copy, V: Copy>(&self, other: &Field<U>, f: impl Fn(T, U) -> V) -> Result<Field<V>> {
        self.ensure_aligned(other)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

impl RealField {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, factor: f64) -> RealField {
        self.map(|v| v * factor)
    }
}

impl ComplexField {
    /// |ψ|² at every node.
    pub fn norm_sqr(&self) -> RealField {
        self.map(|z| z.norm_sqr())
    }

    pub fn conj(&self) -> ComplexField {
        self.map(|z| z.conj())
    }

    pub fn real(&self) -> RealField {
        self.map(|z| z.re)
    }

    pub fn imag(&self) -> RealField {
        self.map(|z| z.im)
    }
}

/// Quadrature of a real field over the domain.
///
/// Periodic grids use the rectangle rule (exact for constants and
/// spectrally accurate for smooth periodic integrands); box grids use the
/// trapezoid rule with the implicit zero wall values.
pub fn integrate(f: &RealField) -> f64 {
    f.grid().spacing() * f.values().iter().sum::<f64>()
}

/// L2 norm `sqrt(∫|f|²)` of a complex field.
pub fn l2_norm(f: &ComplexField) -> f64 {
    integrate(&f.norm_sqr()).sqrt()
}

/// L2 distance between two aligned complex fields.
pub fn l2_distance(a: &ComplexField, b: &ComplexField) -> Result<f64> {
    let diff = a.zip_map(b, |x, y| (x - y).norm_sqr())?;
    Ok(integrate(&diff).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_rejects_degenerate_input() {
        assert!(SpatialGrid::periodic(7, 0.0, 1.0).is_err());
        assert!(SpatialGrid::periodic(8, 1.0, 1.0).is_err());
        assert!(SpatialGrid::boxed(8, 0.0, -1.0).is_err());
        assert!(SpatialGrid::boxed(8, 0.0, 1.0).is_ok());
    }

    #[test]
    fn spacing_depends_on_boundary() {
        let p = SpatialGrid::periodic(10, 0.0, 1.0).unwrap();
        let b = SpatialGrid::boxed(9, 0.0, 1.0).unwrap();
        assert_eq!(p.spacing(), 0.1);
        assert_eq!(b.spacing(), 0.1);
        assert_eq!(p.x(0), 0.0);
        assert!((b.x(0) - 0.1).abs() < 1e-15);
        assert!((b.x(8) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn misaligned_fields_are_rejected() {
        let g = SpatialGrid::periodic(16, 0.0, 1.0).unwrap();
        assert_eq!(
            RealField::new(g, vec![0.0; 15]),
            Err(Error::Alignment { expected: 16, got: 15 })
        );
        let other = SpatialGrid::periodic(16, 0.0, 2.0).unwrap();
        let a = RealField::filled(g, 1.0);
        let b = RealField::filled(other, 1.0);
        assert!(a.zip_map(&b, |x, y| x + y).is_err());
    }

    #[test]
    fn integrate_constant_on_periodic_grid_is_exact() {
        for n in [8, 13, 64, 1000] {
            let g = SpatialGrid::periodic(n, 0.0, 1.0).unwrap();
            let c = 3.25;
            assert!((integrate(&RealField::filled(g, c)) - c).abs() < 1e-13);
        }
    }

    #[test]
    fn integrate_sin_squared_on_box() {
        let g = SpatialGrid::boxed(512, 0.0, 1.0).unwrap();
        let f = RealField::from_fn(g, |x| (PI * x).sin().powi(2));
        assert!((integrate(&f) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn integrate_normalized_density() {
        let g = SpatialGrid::boxed(256, 0.0, 2.0).unwrap();
        let rho = RealField::from_fn(g, |x| (PI * x / 2.0).sin().powi(2));
        let rho = rho.scaled(1.0 / integrate(&rho));
        assert!((integrate(&rho) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn confine_wraps_and_clamps() {
        let p = SpatialGrid::periodic(8, -1.0, 1.0).unwrap();
        assert!((p.confine(1.25) + 0.75).abs() < 1e-15);
        assert!((p.confine(-3.5) - 0.5).abs() < 1e-15);
        let b = SpatialGrid::boxed(8, 0.0, 1.0).unwrap();
        assert_eq!(b.confine(1.5), 1.0);
        assert_eq!(b.confine(-0.1), 0.0);
    }
}
