//! Guided particle ensemble: sampling, advection along the guidance
//! velocity, kernel density estimation on the grid, and the ratio field
//! `f_q = ρ / |ψ|²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{integrate, Boundary, CubicTable, RealField, SpatialGrid};
use crate::wave::{basis_mode, velocity_field, WaveState};

pub const DEFAULT_FQ_CAP: f64 = 1e3;
pub const DEFAULT_BANDWIDTH_SPACINGS: f64 = 4.0;

/// Kernel support in bandwidths; beyond this the Gaussian is below 2e-8.
const KERNEL_CUTOFF: f64 = 6.0;

/// Initial density, either closed form or sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub enum DensitySpec {
    Uniform,
    /// `|φ_k|²` for basis mode `k` of the grid.
    Mode(i64),
    Gaussian { center: f64, width: f64 },
    Field(RealField),
}

impl DensitySpec {
    fn eval(&self, grid: &SpatialGrid, x: f64) -> f64 {
        match self {
            DensitySpec::Uniform => 1.0 / grid.length(),
            DensitySpec::Mode(k) => basis_mode(grid, *k, x).norm_sqr(),
            DensitySpec::Gaussian { center, width } => (-(x - center).powi(2) / (2.0 * width * width)).exp(),
            DensitySpec::Field(_) => unreachable!("field densities are sampled on nodes"),
        }
    }

    /// Node values plus the values on the domain edges, as used by the
    /// inverse-CDF sampler: `(positions, values)` covering `[x_min, x_max]`.
    fn edge_resolved(&self, grid: &SpatialGrid) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = grid.n_points();
        let mut xs = Vec::with_capacity(n + 2);
        let mut ds = Vec::with_capacity(n + 2);
        let node = |j: usize| -> Result<f64> {
            match self {
                DensitySpec::Field(f) => {
                    if f.grid() != grid {
                        return Err(Error::Alignment {
                            expected: n,
                            got: f.len(),
                        });
                    }
                    Ok(f.values()[j])
                }
                _ => Ok(self.eval(grid, grid.x(j))),
            }
        };
        let edge = |x: f64| match self {
            DensitySpec::Field(_) => 0.0,
            _ => self.eval(grid, x),
        };
        match grid.boundary() {
            Boundary::Box => {
                xs.push(grid.x_min());
                ds.push(edge(grid.x_min()));
                for j in 0..n {
                    xs.push(grid.x(j));
                    ds.push(node(j)?);
                }
                xs.push(grid.x_max());
                ds.push(edge(grid.x_max()));
            }
            Boundary::Periodic => {
                for j in 0..n {
                    xs.push(grid.x(j));
                    ds.push(node(j)?);
                }
                xs.push(grid.x_max());
                ds.push(ds[0]);
            }
        }
        if let Some(bad) = ds.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::InvalidDensity(format!("density values must be finite and nonnegative, found {bad}")));
        }
        Ok((xs, ds))
    }

    /// The density on the grid nodes, normalized to unit integral.
    pub fn on_grid(&self, grid: &SpatialGrid) -> Result<RealField> {
        let field = match self {
            DensitySpec::Field(f) => {
                if f.grid() != grid {
                    return Err(Error::Alignment {
                        expected: grid.n_points(),
                        got: f.len(),
                    });
                }
                f.clone()
            }
            _ => RealField::from_fn(*grid, |x| self.eval(grid, x)),
        };
        if field.values().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidDensity("density values must be finite and nonnegative".into()));
        }
        let mass = integrate(&field);
        if mass <= 0.0 {
            return Err(Error::InvalidDensity("density is identically zero".into()));
        }
        Ok(field.scaled(1.0 / mass))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub positions: Vec<f64>,
    pub time: f64,
    pub seed: u64,
    grid: SpatialGrid,
}

impl ParticleEnsemble {
    pub fn new(grid: SpatialGrid, positions: Vec<f64>, time: f64, seed: u64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidDensity("an ensemble needs at least one particle".into()));
        }
        if let Some(&x) = positions.iter().find(|&&x| !grid.contains(x)) {
            return Err(Error::OutOfDomain {
                x,
                x_min: grid.x_min(),
                x_max: grid.x_max(),
            });
        }
        Ok(Self {
            positions,
            time,
            seed,
            grid,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// RK4 step of every particle through a velocity table frozen over the step.
    pub fn advance_with(&mut self, velocity: &CubicTable, dt: f64) {
        let grid = self.grid;
        self.positions.par_iter_mut().with_min_len(4096).for_each(|x| {
            let k1 = velocity.eval_confined(*x);
            let k2 = velocity.eval_confined(*x + 0.5 * dt * k1);
            let k3 = velocity.eval_confined(*x + 0.5 * dt * k2);
            let k4 = velocity.eval_confined(*x + dt * k3);
            *x = grid.confine(*x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
        });
        self.time += dt;
    }

    /// Moves every particle across one linear propagation step that took
    /// `|ψ|²` from `before` to `after`. In one dimension the guidance flow
    /// preserves the mass to the left of each trajectory, so the exact map is
    /// `x ← Q_after⁻¹(Q_before(x) + Φ)`, with `Φ` the time-integrated current
    /// entering through `x_min` (zero in a box).
    pub fn transport(&mut self, before: &RealField, after: &RealField, inflow: f64, dt: f64) -> Result<()> {
        let q0 = Cumulative::of_field(before)?;
        let q1 = Cumulative::of_field(after)?;
        let total = q1.total();
        // Absorbs the roundoff by which the two masses differ.
        let scale = total / q0.total();
        let grid = self.grid;
        let periodic = grid.boundary() == Boundary::Periodic;
        self.positions.par_iter_mut().with_min_len(4096).for_each(|x| {
            let mut q = (q0.at(*x) + inflow) * scale;
            if periodic {
                q = q.rem_euclid(total);
            }
            *x = grid.confine(q1.inverse(q));
        });
        self.time += dt;
        Ok(())
    }
}

/// Cumulative mass `Q(x) = ∫_{x_min}^x ρ` of a density linear between
/// knots, and its inverse.
#[derive(Debug, Clone)]
pub struct Cumulative {
    xs: Vec<f64>,
    ds: Vec<f64>,
    cdf: Vec<f64>,
}

impl Cumulative {
    fn from_knots(xs: Vec<f64>, ds: Vec<f64>) -> Self {
        let mut cdf = Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 0..xs.len() - 1 {
            acc += 0.5 * (xs[i + 1] - xs[i]) * (ds[i] + ds[i + 1]);
            cdf.push(acc);
        }
        Self { xs, ds, cdf }
    }

    pub fn new(rho: &DensitySpec, grid: &SpatialGrid) -> Result<Self> {
        let (xs, ds) = rho.edge_resolved(grid)?;
        Ok(Self::from_knots(xs, ds))
    }

    /// Cumulative of a nodal field; box walls count as zeros.
    pub fn of_field(f: &RealField) -> Result<Self> {
        Self::new(&DensitySpec::Field(f.clone()), f.grid())
    }

    pub fn total(&self) -> f64 {
        *self.cdf.last().expect("at least two knots")
    }

    fn cell(&self, x: f64) -> usize {
        self.xs.partition_point(|&k| k <= x).clamp(1, self.xs.len() - 1) - 1
    }

    pub fn at(&self, x: f64) -> f64 {
        let c = self.cell(x);
        let h = self.xs[c + 1] - self.xs[c];
        let t = ((x - self.xs[c]) / h).clamp(0.0, 1.0);
        let (d0, d1) = (self.ds[c], self.ds[c + 1]);
        self.cdf[c] + h * t * (d0 + 0.5 * (d1 - d0) * t)
    }

    /// Smallest `x` with `Q(x) = q`, for `q` clamped to `[0, total]`.
    pub fn inverse(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, self.total());
        let c = self.cdf.partition_point(|&v| v <= q).clamp(1, self.xs.len() - 1) - 1;
        let h = self.xs[c + 1] - self.xs[c];
        let (d0, d1) = (self.ds[c], self.ds[c + 1]);
        // h (d0 t + (d1 - d0) t² / 2) = q - cdf[c], solved in cancellation-free form
        let r = (q - self.cdf[c]) / h;
        let a = 0.5 * (d1 - d0);
        let disc = (d0 * d0 + 4.0 * a * r).max(0.0);
        let den = d0 + disc.sqrt();
        let t = match (r > 0.0, den > 0.0) {
            (false, _) => 0.0,
            (true, true) => 2.0 * r / den,
            (true, false) => 0.5,
        };
        self.xs[c] + h * t.clamp(0.0, 1.0)
    }
}

/// Draws `m` i.i.d. positions from `rho0` by inverting its cumulative
/// distribution, with the density linear between grid nodes.
pub fn sample_initial(rho0: &DensitySpec, grid: &SpatialGrid, m: usize, seed: u64) -> Result<ParticleEnsemble> {
    if m == 0 {
        return Err(Error::InvalidDensity("an ensemble needs at least one particle".into()));
    }
    let cumulative = Cumulative::new(rho0, grid)?;
    let total = cumulative.total();
    if total <= 0.0 {
        return Err(Error::InvalidDensity("density is identically zero".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = (0..m)
        .map(|_| grid.confine(cumulative.inverse(rng.random::<f64>() * total)))
        .collect();
    ParticleEnsemble::new(*grid, positions, 0.0, seed)
}

/// RK4 step of every particle through `v = Im(∇ψ/ψ)`, the wavefield held
/// fixed at `w` for the whole step.
pub fn advance(e: &ParticleEnsemble, w: &WaveState, dt: f64, node_floor: f64) -> ParticleEnsemble {
    let table = CubicTable::new(&velocity_field(w, node_floor));
    let mut next = e.clone();
    next.advance_with(&table, dt);
    next
}

/// Binned Gaussian density estimator with its kernel precomputed, for
/// repeated estimates on one grid. Periodic kernels wrap; box kernels see
/// mirror images about both walls.
#[derive(Debug, Clone)]
pub struct KernelSmoother {
    grid: SpatialGrid,
    reach: isize,
    kernel: Vec<f64>,
}

impl KernelSmoother {
    pub fn new(grid: &SpatialGrid, bandwidth: f64) -> Result<Self> {
        let h = grid.spacing();
        if !(bandwidth >= h) {
            return Err(Error::InvalidBandwidth { bandwidth, spacing: h });
        }
        let reach = (KERNEL_CUTOFF * bandwidth / h).ceil() as isize;
        let kernel = (-reach..=reach)
            .map(|d| {
                let u = d as f64 * h / bandwidth;
                (-0.5 * u * u).exp()
            })
            .collect();
        Ok(Self {
            grid: *grid,
            reach,
            kernel,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// Index window of the weight buffer: box walls sit at -1 and n, padded
    /// by the kernel reach.
    fn window(&self) -> (isize, isize) {
        let n = self.grid.n_points() as isize;
        (-1 - self.reach - 2, n + self.reach + 2)
    }

    fn buffer(&self) -> Vec<f64> {
        let (lo, hi) = self.window();
        vec![0.0; (hi - lo + 1) as usize]
    }

    fn slot(&self, i: isize) -> usize {
        (i - self.window().0) as usize
    }

    /// Linearly binned particle counts.
    fn bin(&self, positions: &[f64]) -> Vec<f64> {
        let grid = &self.grid;
        let n = grid.n_points() as isize;
        let first = match grid.boundary() {
            Boundary::Periodic => 0,
            Boundary::Box => -1,
        };
        let mut weights = self.buffer();
        for &x in positions {
            let s = grid.fractional_index(grid.confine(x));
            let i = (s.floor() as isize).clamp(first, n - 1);
            let t = s - i as f64;
            weights[self.slot(i)] += 1.0 - t;
            weights[self.slot(i + 1)] += t;
        }
        weights
    }

    /// Convolves node weights (indexed through `slot`) and returns the
    /// values at the grid nodes.
    fn convolve(&self, mut weights: Vec<f64>) -> Vec<f64> {
        let n = self.grid.n_points() as isize;
        let (lo, hi) = self.window();
        let reach = self.reach;
        match self.grid.boundary() {
            Boundary::Periodic => {
                // fold the wrap node back onto node 0
                let w = weights[self.slot(n)];
                weights[self.slot(0)] += w;
                weights[self.slot(n)] = 0.0;
            }
            Boundary::Box => {
                let mut mirrored = weights.clone();
                for b in -1..=n {
                    let w = weights[self.slot(b)];
                    if w == 0.0 {
                        continue;
                    }
                    let left = -2 - b;
                    let right = 2 * n - b;
                    if left >= lo {
                        mirrored[self.slot(left)] += w;
                    }
                    if right <= hi {
                        mirrored[self.slot(right)] += w;
                    }
                }
                weights = mirrored;
            }
        }

        // periodic kernels wider than the domain wrap more than once
        if self.grid.boundary() == Boundary::Periodic && 2 * reach + 1 > n {
            let mut wrapped = vec![0.0; n as usize];
            for b in 0..n {
                let w = weights[self.slot(b)];
                if w == 0.0 {
                    continue;
                }
                for (k, &kv) in self.kernel.iter().enumerate() {
                    let a = (b + k as isize - reach).rem_euclid(n);
                    wrapped[a as usize] += kv * w;
                }
            }
            return wrapped;
        }
        (0..n)
            .map(|a| {
                self.kernel
                    .iter()
                    .enumerate()
                    .map(|(k, &kv)| {
                        let b = a + k as isize - reach;
                        let src = match self.grid.boundary() {
                            Boundary::Periodic => b.rem_euclid(n),
                            Boundary::Box => b,
                        };
                        kv * weights[self.slot(src)]
                    })
                    .sum()
            })
            .collect()
    }

    /// Normalized density estimate of `positions`.
    pub fn density(&self, positions: &[f64]) -> Result<RealField> {
        let field = RealField::new(self.grid, self.convolve(self.bin(positions)))?;
        let mass = integrate(&field);
        Ok(field.scaled(1.0 / mass))
    }
}

/// Gaussian kernel density estimate of the ensemble on `grid`.
///
/// Particles are first linearly binned to the nodes (box walls included),
/// then the node weights are convolved with the kernel. Periodic kernels
/// wrap; box kernels are reflected at both walls. The result is rescaled so
/// that `integrate(ρ) == 1`.
pub fn estimate_density(e: &ParticleEnsemble, grid: &SpatialGrid, bandwidth: f64) -> Result<RealField> {
    KernelSmoother::new(grid, bandwidth)?.density(&e.positions)
}

/// Ratio field `f_q = ρ/|ψ|²` with its regularization record.
#[derive(Debug, Clone, PartialEq)]
pub struct FqField {
    pub values: RealField,
    pub rho: RealField,
    pub psi_sq: RealField,
    pub cap: f64,
    /// Nodes where `|ψ|²` was floored or the ratio was clipped to `[1/cap, cap]`.
    pub floored_points: usize,
}

/// Pointwise `ρ/|ψ|²`. Nodes with `|ψ|²` below `node_floor * max|ψ|²` get
/// `cap`; other ratios are clipped to `[1/cap, cap]` so that `f_q` and
/// `ln f_q` stay finite.
pub fn compute_fq(rho: &RealField, w: &WaveState, cap: f64, node_floor: f64) -> Result<FqField> {
    let psi_sq = w.psi_sq();
    let (values, floored_points) = clipped_ratio(rho, &psi_sq, cap, node_floor)?;
    Ok(FqField {
        values,
        rho: rho.clone(),
        psi_sq,
        cap,
        floored_points,
    })
}

/// `num/den` with the regularization of [`compute_fq`]; returns the ratio and
/// the number of floored or clipped nodes.
pub fn clipped_ratio(num: &RealField, den: &RealField, cap: f64, node_floor: f64) -> Result<(RealField, usize)> {
    num.ensure_aligned(den)?;
    let floor = node_floor * den.max();
    let lo = 1.0 / cap;
    let mut floored = 0;
    let values: Vec<f64> = num
        .values()
        .iter()
        .zip(den.values())
        .map(|(&r, &p)| {
            if p < floor {
                floored += 1;
                return cap;
            }
            let f = r / p;
            if f > cap {
                floored += 1;
                cap
            } else if f < lo {
                floored += 1;
                lo
            } else {
                f
            }
        })
        .collect();
    Ok((RealField::new(*num.grid(), values)?, floored))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn box_grid(n: usize) -> SpatialGrid {
        SpatialGrid::boxed(n, 0.0, 1.0).unwrap()
    }

    #[test]
    fn same_seed_same_sample() {
        let g = box_grid(128);
        let a = sample_initial(&DensitySpec::Mode(1), &g, 1000, 9).unwrap();
        let b = sample_initial(&DensitySpec::Mode(1), &g, 1000, 9).unwrap();
        let c = sample_initial(&DensitySpec::Mode(1), &g, 1000, 10).unwrap();
        assert_eq!(a.positions, b.positions);
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn zero_density_is_rejected() {
        let g = box_grid(32);
        let zero = DensitySpec::Field(RealField::filled(g, 0.0));
        assert!(matches!(sample_initial(&zero, &g, 10, 1), Err(Error::InvalidDensity(_))));
        let neg = DensitySpec::Field(RealField::filled(g, -1.0));
        assert!(sample_initial(&neg, &g, 10, 1).is_err());
        assert!(sample_initial(&DensitySpec::Uniform, &g, 0, 1).is_err());
    }

    #[test]
    fn uniform_sample_passes_ks_test() {
        let g = box_grid(64);
        let mut x = sample_initial(&DensitySpec::Uniform, &g, 100_000, 3).unwrap().positions;
        x.sort_by(f64::total_cmp);
        let m = x.len() as f64;
        let d = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| (xi - i as f64 / m).abs().max(((i + 1) as f64 / m - xi).abs()))
            .fold(0.0, f64::max);
        // 1% critical value of the one-sample KS statistic
        assert!(d < 1.628 / m.sqrt(), "D = {d}");
    }

    #[test]
    fn sin_squared_histogram_converges() {
        let g = box_grid(256);
        let bins = 32;
        let l1 = |m: usize| {
            let e = sample_initial(&DensitySpec::Mode(1), &g, m, 5).unwrap();
            let mut counts = vec![0.0; bins];
            for &x in &e.positions {
                counts[((x * bins as f64) as usize).min(bins - 1)] += 1.0;
            }
            (0..bins)
                .map(|b| {
                    let (a, c) = (b as f64 / bins as f64, (b + 1) as f64 / bins as f64);
                    // exact mass of 2 sin²(πx) on [a, c]
                    let mass = (c - a) - ((2.0 * PI * c).sin() - (2.0 * PI * a).sin()) / (2.0 * PI);
                    (counts[b] / m as f64 - mass).abs()
                })
                .sum::<f64>()
        };
        let (small, large) = (l1(10_000), l1(160_000));
        // O(M^-1/2): 16x more samples, about 4x smaller distance
        assert!(large < small / 2.0, "{small} {large}");
        assert!(large < 3.0 * (bins as f64 / 160_000.0).sqrt());
    }

    #[test]
    fn advance_is_static_for_real_wave() {
        let g = box_grid(128);
        let w = WaveState::from_modes(g, &[(1, 1.0.into())], 1.0).unwrap();
        let e = sample_initial(&DensitySpec::Mode(1), &g, 500, 1).unwrap();
        let next = advance(&e, &w, 0.01, 1e-12);
        assert_eq!(next.positions, e.positions);
        assert!((next.time - 0.01).abs() < 1e-15);
    }

    #[test]
    fn advance_translates_under_plane_wave() {
        let g = SpatialGrid::periodic(64, 0.0, 1.0).unwrap();
        let k = 2.0 * PI * 2.0;
        let psi = crate::numerics::ComplexField::from_fn(g, |x| Complex64::from_polar(1.0, k * x));
        let w = WaveState::new(psi, 0.0).unwrap();
        let e = ParticleEnsemble::new(g, vec![0.1, 0.5, 0.97], 0.0, 0).unwrap();
        let dt = 0.003;
        let next = advance(&e, &w, dt, 1e-12);
        for (a, b) in next.positions.iter().zip(&e.positions) {
            assert!((a - g.confine(b + k * dt)).abs() < 1e-10);
        }
    }

    #[test]
    fn cumulative_inverse_round_trips() {
        let g = box_grid(64);
        let c = Cumulative::new(&DensitySpec::Mode(2), &g).unwrap();
        assert!((c.total() - 1.0).abs() < 1e-3);
        for x in [0.0, 0.013, 0.25, 0.5, 0.77, 1.0] {
            let y = c.inverse(c.at(x));
            assert!((c.at(y) - c.at(x)).abs() < 1e-14, "{x} -> {y}");
        }
        assert!((c.inverse(0.3) - c.inverse(0.3 + 1e-9)).abs() < 1e-6);
        assert_eq!(c.inverse(2.0), 1.0);
    }

    #[test]
    fn transport_without_change_keeps_positions() {
        let g = box_grid(128);
        let rho = DensitySpec::Mode(3).on_grid(&g).unwrap();
        let mut e = sample_initial(&DensitySpec::Mode(3), &g, 1000, 4).unwrap();
        let start = e.positions.clone();
        e.transport(&rho, &rho, 0.0, 0.01).unwrap();
        for (a, b) in e.positions.iter().zip(&start) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn transport_shifts_uniform_density_by_inflow() {
        let g = SpatialGrid::periodic(64, 0.0, 1.0).unwrap();
        let flat = RealField::filled(g, 1.0);
        let mut e = ParticleEnsemble::new(g, vec![0.1, 0.5, 0.97], 0.0, 0).unwrap();
        let (k, dt) = (4.0 * PI, 0.003);
        // uniform |ψ|² with current j = k
        e.transport(&flat, &flat, k * dt, dt).unwrap();
        for (a, b) in e.positions.iter().zip([0.1, 0.5, 0.97]) {
            assert!((a - g.confine(b + k * dt)).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn transport_follows_spreading_gaussian() {
        // A free packet at rest spreads self-similarly: x(t) = x₀ σ(t)/σ(0).
        let g = SpatialGrid::boxed(2047, -10.0, 10.0).unwrap();
        let sigma0: f64 = 0.5;
        let sigma = |t: f64| sigma0 * (1.0 + (t / (2.0 * sigma0 * sigma0)).powi(2)).sqrt();
        let density = |s: f64| RealField::from_fn(g, move |x| (-x * x / (2.0 * s * s)).exp() / s);
        let starts = vec![-1.2, -0.4, 0.05, 0.3, 0.9, 1.5];
        let mut e = ParticleEnsemble::new(g, starts.clone(), 0.0, 0).unwrap();
        e.transport(&density(sigma(0.0)), &density(sigma(0.8)), 0.0, 0.8).unwrap();
        let scale = sigma(0.8) / sigma0;
        for (x, x0) in e.positions.iter().zip(&starts) {
            assert!((x - x0 * scale).abs() <= 1e-4 * (x0 * scale).abs(), "{x} vs {}", x0 * scale);
        }
    }

    #[test]
    fn kde_of_point_mass_concentrates() {
        let g = box_grid(127);
        let node = g.x(60);
        let e = ParticleEnsemble::new(g, vec![node; 50], 0.0, 0).unwrap();
        let rho = estimate_density(&e, &g, g.spacing()).unwrap();
        assert!((integrate(&rho) - 1.0).abs() < 1e-12);
        let peak = rho.values().iter().cloned().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert_eq!(peak.0, 60);
        let near: f64 = rho.values()[54..=66].iter().sum::<f64>() * g.spacing();
        assert!(near > 0.999);
    }

    #[test]
    fn kde_rejects_narrow_bandwidth() {
        let g = box_grid(64);
        let e = ParticleEnsemble::new(g, vec![0.5], 0.0, 0).unwrap();
        assert!(matches!(
            estimate_density(&e, &g, 0.5 * g.spacing()),
            Err(Error::InvalidBandwidth { .. })
        ));
    }

    #[test]
    fn kde_periodic_wraps_mass() {
        let g = SpatialGrid::periodic(64, 0.0, 1.0).unwrap();
        let e = ParticleEnsemble::new(g, vec![0.001, 0.999], 0.0, 0).unwrap();
        let rho = estimate_density(&e, &g, 3.0 * g.spacing()).unwrap();
        assert!((integrate(&rho) - 1.0).abs() < 1e-12);
        // symmetric about x = 0
        assert!((rho.values()[1] - rho.values()[63]).abs() < 1e-3 * rho.values()[0]);
        // wide kernel on a periodic domain tends to uniform
        let wide = estimate_density(&e, &g, 2.0).unwrap();
        assert!((wide.max() - wide.min()) < 1e-3);
    }

    #[test]
    fn kde_of_sin_squared_sample_is_accurate() {
        let g = box_grid(512);
        let e = sample_initial(&DensitySpec::Mode(1), &g, 100_000, 11).unwrap();
        let rho = estimate_density(&e, &g, 4.0 * g.spacing()).unwrap();
        let truth = DensitySpec::Mode(1).on_grid(&g).unwrap();
        let l1 = integrate(&rho.zip_map(&truth, |a, b| (a - b).abs()).unwrap());
        assert!(l1 <= 0.02, "L1 = {l1}");
    }

    #[test]
    fn kde_error_shrinks_with_more_particles() {
        let g = box_grid(256);
        let truth = DensitySpec::Mode(1).on_grid(&g).unwrap();
        let bw = 4.0 * g.spacing();
        let mean_l1 = |m: usize| {
            (0..5)
                .map(|seed| {
                    let e = sample_initial(&DensitySpec::Mode(1), &g, m, 100 + seed).unwrap();
                    let rho = estimate_density(&e, &g, bw).unwrap();
                    integrate(&rho.zip_map(&truth, |a, b| (a - b).abs()).unwrap())
                })
                .sum::<f64>()
                / 5.0
        };
        let errs: Vec<f64> = [5_000, 10_000, 20_000, 40_000].iter().map(|&m| mean_l1(m)).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn fq_identity_and_regularization() {
        let g = box_grid(64);
        let w = WaveState::from_modes(g, &[(1, 1.0.into()), (2, Complex64::new(0.0, 0.5))], 1.0).unwrap();
        let psi_sq = w.psi_sq();
        let eq = compute_fq(&psi_sq, &w, DEFAULT_FQ_CAP, 1e-12).unwrap();
        assert!(eq.values.values().iter().all(|f| (f - 1.0).abs() < 1e-14));
        assert_eq!(eq.floored_points, 0);

        let double = psi_sq.scaled(2.0);
        let fq = compute_fq(&double, &w, DEFAULT_FQ_CAP, 1e-12).unwrap();
        for ((f, p), r) in fq.values.values().iter().zip(fq.psi_sq.values()).zip(fq.rho.values()) {
            assert!((f - 2.0).abs() < 1e-14);
            assert!((f * p - r).abs() < 1e-14);
        }
    }

    #[test]
    fn fq_caps_below_node_floor() {
        let g = SpatialGrid::periodic(64, 0.0, 1.0).unwrap();
        // exact node at x = 0 and x = 1/2
        let psi = crate::numerics::ComplexField::from_fn(g, |x| Complex64::new((2.0 * PI * x).sin(), 0.0));
        let w = WaveState::new(psi, 0.0).unwrap();
        let rho = RealField::filled(g, 1.0);
        let fq = compute_fq(&rho, &w, 500.0, 1e-12).unwrap();
        assert_eq!(fq.values.values()[0], 500.0);
        assert_eq!(fq.values.values()[32], 500.0);
        assert!(fq.floored_points >= 2);
        assert!(fq.values.values().iter().all(|&f| f > 0.0 && f <= 500.0));
    }
}
