use std::ops::{Add, Mul, Neg};

use super::{Boundary, Field, RealField, SpatialGrid};
use crate::error::{Error, Result};

/// Node value with the boundary extension applied: periodic wrap, or for
/// box grids zero on the walls (indices -1 and n) and odd reflection beyond,
/// which is the continuation implied by the sine basis.
fn extended<T>(values: &[T], boundary: Boundary, i: isize) -> T
where
    T: Copy + Default + Neg<Output = T>,
{
    let n = values.len() as isize;
    match boundary {
        Boundary::Periodic => values[i.rem_euclid(n) as usize],
        Boundary::Box => {
            if (0..n).contains(&i) {
                values[i as usize]
            } else if i == -1 || i == n {
                T::default()
            } else if i < -1 {
                -extended(values, boundary, -2 - i)
            } else {
                -extended(values, boundary, 2 * n - i)
            }
        }
    }
}

/// Cell index and offset in `[0, 1]` of position `x`.
fn locate(grid: &SpatialGrid, x: f64) -> Result<(isize, f64)> {
    let n = grid.n_points() as isize;
    match grid.boundary() {
        Boundary::Periodic => {
            let s = grid.fractional_index(grid.confine(x));
            let i = (s.floor() as isize).clamp(0, n - 1);
            Ok((i, s - i as f64))
        }
        Boundary::Box => {
            if !grid.contains(x) {
                return Err(Error::OutOfDomain {
                    x,
                    x_min: grid.x_min(),
                    x_max: grid.x_max(),
                });
            }
            let s = grid.fractional_index(x);
            let i = (s.floor() as isize).clamp(-1, n - 1);
            Ok((i, s - i as f64))
        }
    }
}

/// Four-point Lagrange weights for nodes at offsets -1, 0, 1, 2.
fn lagrange_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Cubic (four-point Lagrange) interpolation of a field at an off-grid position.
pub fn interpolate<T>(f: &Field<T>, x: f64) -> Result<T>
where
    T: Copy + Default + Neg<Output = T> + Add<Output = T> + Mul<f64, Output = T>,
{
    let grid = f.grid();
    let (i, t) = locate(grid, x)?;
    let w = lagrange_weights(t);
    let v = f.values();
    let b = grid.boundary();
    Ok(extended(v, b, i - 1) * w[0]
        + extended(v, b, i) * w[1]
        + extended(v, b, i + 1) * w[2]
        + extended(v, b, i + 2) * w[3])
}

/// Piecewise-cubic table of a real field: the same interpolant as
/// [`interpolate`], stored as per-cell monomial coefficients so repeated
/// evaluation is a lookup plus Horner's rule.
#[derive(Debug, Clone)]
pub struct CubicTable {
    grid: SpatialGrid,
    first_cell: isize,
    coeffs: Vec<[f64; 4]>,
    inv_h: f64,
}

impl CubicTable {
    pub fn new(f: &RealField) -> Self {
        let grid = *f.grid();
        let n = grid.n_points() as isize;
        let (first_cell, last_cell) = match grid.boundary() {
            Boundary::Periodic => (0, n - 1),
            Boundary::Box => (-1, n - 1),
        };
        let v = f.values();
        let b = grid.boundary();
        let coeffs = (first_cell..=last_cell)
            .map(|i| {
                let p = extended(v, b, i - 1);
                let q = extended(v, b, i);
                let r = extended(v, b, i + 1);
                let s = extended(v, b, i + 2);
                [
                    q,
                    -p / 3.0 - q / 2.0 + r - s / 6.0,
                    p / 2.0 - q + r / 2.0,
                    -p / 6.0 + q / 2.0 - r / 2.0 + s / 6.0,
                ]
            })
            .collect();
        Self {
            grid,
            first_cell,
            coeffs,
            inv_h: 1.0 / grid.spacing(),
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (i, t) = locate(&self.grid, x)?;
        Ok(self.eval_cell(i, t))
    }

    /// Evaluates after confining `x` to the domain; never fails.
    #[inline]
    pub fn eval_confined(&self, x: f64) -> f64 {
        let s = (self.grid.confine(x) - self.grid.x_min()) * self.inv_h;
        let last = self.coeffs.len() - 1;
        let cell = (s as usize).min(last);
        let t = s - cell as f64;
        let c = &self.coeffs[cell];
        c[0] + t * (c[1] + t * (c[2] + t * c[3]))
    }

    #[inline]
    fn eval_cell(&self, i: isize, t: f64) -> f64 {
        let c = &self.coeffs[(i - self.first_cell) as usize];
        c[0] + t * (c[1] + t * (c[2] + t * c[3]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn reproduces_node_values() {
        for g in [
            SpatialGrid::periodic(32, 0.0, 1.0).unwrap(),
            SpatialGrid::boxed(31, 0.0, 1.0).unwrap(),
        ] {
            let f = RealField::from_fn(g, |x| (5.0 * x).sin() + x);
            let table = CubicTable::new(&f);
            for (j, &v) in f.values().iter().enumerate() {
                assert_eq!(interpolate(&f, g.x(j)).unwrap(), v);
                assert!((table.eval(g.x(j)).unwrap() - v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn linear_field_midpoint_is_mean() {
        let g = SpatialGrid::boxed(20, 0.0, 1.0).unwrap();
        let f = RealField::from_fn(g, |x| 2.0 * x + 1.0);
        for j in 2..17 {
            let mid = 0.5 * (g.x(j) + g.x(j + 1));
            let expected = 0.5 * (f.values()[j] + f.values()[j + 1]);
            assert!((interpolate(&f, mid).unwrap() - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn gaussian_error_is_high_order() {
        // max error should fall by ~16x (fourth order, at least 8x) per halving
        let errors: Vec<f64> = [64usize, 128, 256]
            .iter()
            .map(|&n| {
                let g = SpatialGrid::periodic(n, -4.0, 4.0).unwrap();
                let f = RealField::from_fn(g, |x| (-x * x).exp());
                let table = CubicTable::new(&f);
                (0..1000)
                    .map(|i| -3.9 + 7.8 * i as f64 / 999.0)
                    .map(|x| (table.eval(x).unwrap() - (-x * x).exp()).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(errors[0] / errors[1] > 8.0, "{errors:?}");
        assert!(errors[1] / errors[2] > 8.0, "{errors:?}");
    }

    #[test]
    fn periodic_wraps() {
        let g = SpatialGrid::periodic(64, 0.0, 1.0).unwrap();
        let f = RealField::from_fn(g, |x| (2.0 * PI * x).cos());
        let a = interpolate(&f, 0.013).unwrap();
        let b = interpolate(&f, 1.013).unwrap();
        let c = interpolate(&f, -0.987).unwrap();
        assert!((a - b).abs() < 1e-12 && (a - c).abs() < 1e-12);
    }

    #[test]
    fn box_rejects_out_of_domain() {
        let g = SpatialGrid::boxed(16, 0.0, 1.0).unwrap();
        let f = RealField::filled(g, 1.0);
        assert!(matches!(interpolate(&f, 1.01), Err(Error::OutOfDomain { .. })));
        assert!(matches!(interpolate(&f, -0.5), Err(Error::OutOfDomain { .. })));
        assert_eq!(interpolate(&f, 0.0).unwrap(), 0.0);
        assert_eq!(interpolate(&f, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn box_sine_continuation_is_smooth_near_walls() {
        let g = SpatialGrid::boxed(127, 0.0, 1.0).unwrap();
        let f = Field::from_fn(g, |x| Complex64::new((PI * x).sin(), (2.0 * PI * x).sin()));
        for x in [0.0005, 0.003, 0.997, 0.9999] {
            let z = interpolate(&f, x).unwrap();
            assert!((z.re - (PI * x).sin()).abs() < 1e-7);
            assert!((z.im - (2.0 * PI * x).sin()).abs() < 1e-6);
        }
    }
}
