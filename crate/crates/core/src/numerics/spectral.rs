use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Boundary, ComplexField, RealField, SpatialGrid};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Spectral basis of a grid: plane waves on periodic grids, sine modes
/// `sin(kπ(x - x_min)/L)`, `k = 1..=n`, on box grids.
///
/// Box transforms run through a length `2(n+1)` FFT of the odd extension.
#[derive(Clone)]
pub struct Transform {
    grid: SpatialGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
    nyquist: Option<usize>,
}

impl std::fmt::Debug for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transform")
            .field("grid", &self.grid)
            .field("fft_len", &self.forward.len())
            .finish()
    }
}

impl Transform {
    pub fn new(grid: &SpatialGrid) -> Self {
        let n = grid.n_points();
        let l = grid.length();
        let fft_len = match grid.boundary() {
            Boundary::Periodic => n,
            Boundary::Box => 2 * (n + 1),
        };
        let (forward, inverse) = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            (p.plan_fft_forward(fft_len), p.plan_fft_inverse(fft_len))
        });
        let (wavenumbers, nyquist) = match grid.boundary() {
            Boundary::Periodic => {
                let k = (0..n)
                    .map(|m| {
                        let signed = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
                        2.0 * PI * signed / l
                    })
                    .collect();
                (k, n.is_multiple_of(2).then_some(n / 2))
            }
            Boundary::Box => ((1..=n).map(|k| k as f64 * PI / l).collect(), None),
        };
        Self {
            grid: *grid,
            forward,
            inverse,
            wavenumbers,
            nyquist,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// Wavenumber of each coefficient slot; the Laplacian eigenvalue is `-k²`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Node values to basis coefficients, normalized so that
    /// `synthesize(analyze(f)) == f`.
    pub fn analyze(&self, values: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.n_points();
        assert_eq!(values.len(), n);
        match self.grid.boundary() {
            Boundary::Periodic => {
                let mut buf = values.to_vec();
                self.forward.process(&mut buf);
                let scale = 1.0 / n as f64;
                buf.iter_mut().for_each(|c| *c *= scale);
                buf
            }
            Boundary::Box => {
                let scale = 2.0 / (n + 1) as f64;
                let mut out = self.sine_sum(values);
                out.iter_mut().for_each(|c| *c *= scale);
                out
            }
        }
    }

    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(coeffs.len(), self.grid.n_points());
        match self.grid.boundary() {
            Boundary::Periodic => {
                let mut buf = coeffs.to_vec();
                self.inverse.process(&mut buf);
                buf
            }
            Boundary::Box => self.sine_sum(coeffs),
        }
    }

    /// Node values of the derivative of the series with the given coefficients.
    pub fn synthesize_derivative(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(coeffs.len(), self.grid.n_points());
        match self.grid.boundary() {
            Boundary::Periodic => {
                let mut buf: Vec<Complex64> = coeffs
                    .iter()
                    .zip(&self.wavenumbers)
                    .map(|(&c, &k)| c * I * k)
                    .collect();
                if let Some(m) = self.nyquist {
                    buf[m] = Complex64::new(0.0, 0.0);
                }
                self.inverse.process(&mut buf);
                buf
            }
            Boundary::Box => {
                let scaled: Vec<Complex64> = coeffs
                    .iter()
                    .zip(&self.wavenumbers)
                    .map(|(&c, &k)| c * k)
                    .collect();
                self.cosine_sum(&scaled)
            }
        }
    }

    /// `out[k-1] = Σ_{m=1..n} a[m-1] sin(π k m / (n+1))` for `k = 1..=n`.
    fn sine_sum(&self, a: &[Complex64]) -> Vec<Complex64> {
        let n = a.len();
        let big_n = n + 1;
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * big_n];
        for (m, &v) in a.iter().enumerate() {
            buf[m + 1] = v;
            buf[2 * big_n - (m + 1)] = -v;
        }
        self.forward.process(&mut buf);
        // FFT of the odd extension equals -2i times the sine sum.
        buf[1..=n].iter().map(|&g| g * I * 0.5).collect()
    }

    /// `out[m-1] = Σ_{k=1..n} d[k-1] cos(π k m / (n+1))` for `m = 1..=n`.
    fn cosine_sum(&self, d: &[Complex64]) -> Vec<Complex64> {
        let n = d.len();
        let big_n = n + 1;
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * big_n];
        for (k, &v) in d.iter().enumerate() {
            buf[k + 1] = v;
            buf[2 * big_n - (k + 1)] = v;
        }
        self.forward.process(&mut buf);
        buf[1..=n].iter().map(|&e| e * 0.5).collect()
    }
}

/// Spectral Laplacian: FFT on periodic grids, sine basis on box grids.
pub fn laplacian(f: &ComplexField) -> ComplexField {
    let t = Transform::new(f.grid());
    let mut coeffs = t.analyze(f.values());
    for (c, &k) in coeffs.iter_mut().zip(t.wavenumbers()) {
        *c *= -k * k;
    }
    ComplexField::new(*f.grid(), t.synthesize(&coeffs)).expect("transform preserves length")
}

pub fn laplacian_real(f: &RealField) -> RealField {
    laplacian(&f.map(|v| Complex64::new(v, 0.0))).real()
}

/// Spectral first derivative.
pub fn gradient(f: &ComplexField) -> ComplexField {
    let t = Transform::new(f.grid());
    let coeffs = t.analyze(f.values());
    ComplexField::new(*f.grid(), t.synthesize_derivative(&coeffs)).expect("transform preserves length")
}

pub fn gradient_real(f: &RealField) -> RealField {
    gradient(&f.map(|v| Complex64::new(v, 0.0))).real()
}

/// `∇ψ/ψ` together with the number of nodes where `|ψ|²` hit the floor.
#[derive(Debug, Clone)]
pub struct LogGradient {
    pub values: ComplexField,
    pub floored_points: usize,
}

/// Logarithmic derivative `∇ψ/ψ = (∇ψ)ψ*/|ψ|²`, with `|ψ|²` floored at
/// `floor_rel * max|ψ|²` so nodes give a finite value.
pub fn gradient_log(psi: &ComplexField, floor_rel: f64) -> LogGradient {
    // Differentiate the parts separately so a real ψ yields an exactly real ratio.
    let d_re = gradient_real(&psi.real());
    let d_im = gradient_real(&psi.imag());
    let dpsi = d_re
        .zip_map(&d_im, Complex64::new)
        .expect("gradients share the grid");
    let floor = floor_rel * psi.norm_sqr().max();
    let mut floored_points = 0;
    let values = dpsi
        .values()
        .iter()
        .zip(psi.values())
        .map(|(&d, &p)| {
            let den = p.norm_sqr();
            let den = if den < floor {
                floored_points += 1;
                floor
            } else {
                den
            };
            d * p.conj() / den
        })
        .collect();
    LogGradient {
        values: ComplexField::new(*psi.grid(), values).expect("gradient is aligned with its input"),
        floored_points,
    }
}
