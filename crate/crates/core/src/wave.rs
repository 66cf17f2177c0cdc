//! Wavefield evolution in units ħ = m = 1.
//!
//! The linear part `i∂ψ/∂t = -½∇²ψ + Vψ` is advanced with the exact
//! exponential in the grid's spectral basis (potential, when present, by
//! Strang splitting). The nonlinear equation adds a real, pointwise damping
//! rate `g(f_q) = α(1 - f_q)`: `i(∂/∂t + g)ψ = -½∇²ψ`, so the damping
//! substep rescales amplitudes and leaves phases alone.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{
    gradient, gradient_log, gradient_real, integrate, laplacian_real, Boundary, ComplexField, RealField,
    SpatialGrid, Transform,
};

#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub psi: ComplexField,
    pub time: f64,
}

impl WaveState {
    pub fn new(psi: ComplexField, time: f64) -> Result<Self> {
        let n = integrate(&psi.norm_sqr());
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidDensity(format!("wavefield norm must be finite and positive, got {n}")));
        }
        Ok(Self { psi, time })
    }

    /// Superposition of normalized basis modes scaled so that `∫|ψ|² = norm`.
    ///
    /// Box grids use `sqrt(2/L) sin(kπ(x - x_min)/L)` with `k ≥ 1`; periodic
    /// grids use `e^{2πik(x - x_min)/L}/sqrt(L)` with any integer `k`.
    pub fn from_modes(grid: SpatialGrid, modes: &[(i64, Complex64)], norm: f64) -> Result<Self> {
        if modes.iter().all(|(_, c)| c.norm_sqr() == 0.0) {
            return Err(Error::InvalidDensity("all mode coefficients are zero".into()));
        }
        if let Some((k, _)) = modes.iter().find(|(k, _)| grid.boundary() == Boundary::Box && *k < 1) {
            return Err(Error::InvalidDensity(format!("box modes start at 1, got {k}")));
        }
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidDensity(format!("target norm must be positive, got {norm}")));
        }
        let psi = ComplexField::from_fn(grid, |x| {
            modes
                .iter()
                .map(|&(k, c)| c * basis_mode(&grid, k, x))
                .sum::<Complex64>()
        });
        let scale = (norm / integrate(&psi.norm_sqr())).sqrt();
        Self::new(psi.map(|z| z * scale), 0.0)
    }

    pub fn grid(&self) -> &SpatialGrid {
        self.psi.grid()
    }

    pub fn psi_sq(&self) -> RealField {
        self.psi.norm_sqr()
    }

    /// `∫|ψ|² dx`.
    pub fn norm(&self) -> f64 {
        integrate(&self.psi_sq())
    }
}

/// Normalized eigenmode `k` of the free Laplacian on the grid's domain.
pub fn basis_mode(grid: &SpatialGrid, k: i64, x: f64) -> Complex64 {
    let l = grid.length();
    let u = x - grid.x_min();
    match grid.boundary() {
        Boundary::Box => Complex64::new((2.0 / l).sqrt() * (k as f64 * PI * u / l).sin(), 0.0),
        Boundary::Periodic => Complex64::from_polar(1.0 / l.sqrt(), 2.0 * PI * k as f64 * u / l),
    }
}

/// Free-particle energy of basis mode `k`.
pub fn mode_energy(grid: &SpatialGrid, k: i64) -> f64 {
    let l = grid.length();
    let kappa = match grid.boundary() {
        Boundary::Box => k as f64 * PI / l,
        Boundary::Periodic => 2.0 * PI * k as f64 / l,
    };
    0.5 * kappa * kappa
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    None,
    /// Infinite walls at the edges of a box grid; zero inside.
    BoxWalls,
    /// `½ω²(x - x_c)²` about the domain centre.
    Harmonic { omega: f64 },
}

impl Potential {
    /// Node values of `V`, or `None` when `V ≡ 0` inside the domain.
    pub fn sample(&self, grid: &SpatialGrid) -> Option<RealField> {
        match *self {
            Potential::None | Potential::BoxWalls => None,
            Potential::Harmonic { omega } => {
                let xc = 0.5 * (grid.x_min() + grid.x_max());
                Some(RealField::from_fn(*grid, |x| 0.5 * omega * omega * (x - xc).powi(2)))
            }
        }
    }

    pub fn check_grid(&self, grid: &SpatialGrid) -> Result<()> {
        if *self == Potential::BoxWalls && grid.boundary() != Boundary::Box {
            return Err(Error::InvalidGrid("box_walls potential requires a box grid".into()));
        }
        Ok(())
    }
}

impl std::fmt::Display for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Potential::None => write!(f, "none"),
            Potential::BoxWalls => write!(f, "box_walls"),
            Potential::Harmonic { omega } => write!(f, "harmonic:{omega:?}"),
        }
    }
}

impl std::str::FromStr for Potential {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(Potential::None),
            "box_walls" => Ok(Potential::BoxWalls),
            _ => {
                let omega = s
                    .strip_prefix("harmonic:")
                    .ok_or_else(|| format!("unknown potential `{s}` (expected none, box_walls or harmonic:<omega>)"))?;
                let omega: f64 = omega.trim().parse().map_err(|_| format!("bad harmonic frequency `{omega}`"))?;
                if !(omega.is_finite() && omega > 0.0) {
                    return Err(format!("harmonic frequency must be positive, got {omega}"));
                }
                Ok(Potential::Harmonic { omega })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicsParams {
    /// Relaxation strength; zero recovers the linear equation exactly.
    pub alpha: f64,
    pub potential: Potential,
    /// Relative floor on `|ψ|²` wherever it appears in a denominator.
    pub node_floor: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            potential: Potential::None,
            node_floor: 1e-12,
        }
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidDensity(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if !(self.node_floor.is_finite() && self.node_floor > 0.0) {
            return Err(Error::InvalidDensity(format!("node floor must be positive, got {}", self.node_floor)));
        }
        Ok(())
    }
}

/// Guidance velocity `v = Im(∇ψ/ψ)` with the node floor applied.
pub fn velocity_field(w: &WaveState, node_floor: f64) -> RealField {
    velocity_field_counted(w, node_floor).0
}

/// Velocity together with the number of floored nodes.
pub fn velocity_field_counted(w: &WaveState, node_floor: f64) -> (RealField, usize) {
    let lg = gradient_log(&w.psi, node_floor);
    (lg.values.imag(), lg.floored_points)
}

/// `Q = -½ ∇²R / R` with `R = |ψ|`; `R²` is floored as in the velocity.
pub fn quantum_potential(w: &WaveState, node_floor: f64) -> RealField {
    let r = w.psi.map(|z| z.norm());
    let floor = (node_floor * w.psi_sq().max()).sqrt();
    let lap = laplacian_real(&r);
    lap.zip_map(&r, |l, r| -0.5 * l / r.max(floor))
        .expect("laplacian is aligned with its input")
}

/// Probability current `j = Im(ψ*∇ψ) = v|ψ|²`.
pub fn probability_current(psi: &ComplexField) -> RealField {
    gradient(psi)
        .zip_map(psi, |d, p| (p.conj() * d).im)
        .expect("gradient is aligned with its input")
}

/// Exact one-step propagator of the linear equation for a fixed `dt`.
#[derive(Debug, Clone)]
pub struct LinearPropagator {
    transform: Transform,
    kinetic: Vec<Complex64>,
    potential_half: Option<Vec<Complex64>>,
    dt: f64,
}

impl LinearPropagator {
    pub fn new(grid: &SpatialGrid, dt: f64, potential: Potential) -> Self {
        let transform = Transform::new(grid);
        let kinetic = transform
            .wavenumbers()
            .iter()
            .map(|&k| Complex64::from_polar(1.0, -0.5 * k * k * dt))
            .collect();
        let potential_half = potential.sample(grid).map(|v| {
            v.values()
                .iter()
                .map(|&v| Complex64::from_polar(1.0, -0.5 * v * dt))
                .collect()
        });
        Self {
            transform,
            kinetic,
            potential_half,
            dt,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &SpatialGrid {
        self.transform.grid()
    }

    pub fn apply(&self, psi: &ComplexField) -> ComplexField {
        let mut values = psi.values().to_vec();
        if let Some(ph) = &self.potential_half {
            values.iter_mut().zip(ph).for_each(|(z, p)| *z *= p);
        }
        let mut coeffs = self.transform.analyze(&values);
        coeffs.iter_mut().zip(&self.kinetic).for_each(|(c, p)| *c *= p);
        let mut values = self.transform.synthesize(&coeffs);
        if let Some(ph) = &self.potential_half {
            values.iter_mut().zip(ph).for_each(|(z, p)| *z *= p);
        }
        ComplexField::new(*psi.grid(), values).expect("propagator preserves length")
    }

    pub fn step(&self, w: &WaveState) -> WaveState {
        WaveState {
            psi: self.apply(&w.psi),
            time: w.time + self.dt,
        }
    }
}

/// One unitary step of the linear Schrödinger equation.
pub fn step_linear(w: &WaveState, dt: f64, potential: Potential) -> WaveState {
    LinearPropagator::new(w.grid(), dt, potential).step(w)
}

/// `g(f_q) = α(1 - f_q)`.
pub fn damping_rate(fq: &RealField, alpha: f64) -> RealField {
    fq.map(|f| alpha * (1.0 - f))
}

/// Exact solution of `∂ψ/∂t = -gψ` over `dt`: `ψ ← ψ e^{-g dt}`.
pub fn damp(psi: &mut ComplexField, g: &RealField, dt: f64) -> Result<()> {
    psi.ensure_aligned(g)?;
    psi.values_mut()
        .iter_mut()
        .zip(g.values())
        .for_each(|(z, &g)| *z *= (-g * dt).exp());
    Ok(())
}

/// Field held fixed while the amplitude relaxes during one step.
#[derive(Debug, Clone, Copy)]
pub enum Drive<'a> {
    /// Prescribed ratio field: `ψ ← ψ e^{-g(f_q)τ}`.
    Ratio(&'a RealField),
    /// Particle density. `f_q = ρ/|ψ|²` follows `|ψ|²` inside the substep,
    /// which then has the exact solution `|ψ|² ← ρ + (|ψ|² - ρ)e^{-2ατ}`
    /// with the phase untouched.
    Density(&'a RealField),
}

impl Drive<'_> {
    fn field(&self) -> &RealField {
        match self {
            Drive::Ratio(f) | Drive::Density(f) => f,
        }
    }
}

/// Amplitude relaxation of `ψ` toward `√ρ` over `tau` with `ρ` fixed.
pub fn relax_amplitude(psi: &mut ComplexField, rho: &RealField, alpha: f64, tau: f64) -> Result<()> {
    psi.ensure_aligned(rho)?;
    let keep = (-2.0 * alpha * tau).exp();
    let gain = -(-2.0 * alpha * tau).exp_m1();
    psi.values_mut().iter_mut().zip(rho.values()).for_each(|(z, &r)| {
        let p = z.norm_sqr();
        if p > 0.0 {
            *z *= ((keep * p + gain * r.max(0.0)) / p).sqrt();
        }
    });
    Ok(())
}

/// Strang-split stepper for the nonlinear equation: half damping, full
/// linear step, half damping.
#[derive(Debug, Clone)]
pub struct NonlinearStepper {
    propagator: LinearPropagator,
    alpha: f64,
}

impl NonlinearStepper {
    pub fn new(grid: &SpatialGrid, dt: f64, physics: &PhysicsParams) -> Self {
        Self {
            propagator: LinearPropagator::new(grid, dt, physics.potential),
            alpha: physics.alpha,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dt(&self) -> f64 {
        self.propagator.dt()
    }

    pub fn linear(&self) -> &LinearPropagator {
        &self.propagator
    }

    /// Step with `f_q` frozen.
    pub fn step(&self, w: &WaveState, fq: &RealField) -> Result<WaveState> {
        self.step_driven(w, Drive::Ratio(fq))
    }

    pub fn step_driven(&self, w: &WaveState, drive: Drive) -> Result<WaveState> {
        self.step_observed(w, drive, |_, _| Ok(()))
    }

    /// As `step_driven`, handing `kinetic` the fields just before and just
    /// after the linear propagation.
    pub fn step_observed(
        &self,
        w: &WaveState,
        drive: Drive,
        mut kinetic: impl FnMut(&ComplexField, &ComplexField) -> Result<()>,
    ) -> Result<WaveState> {
        w.psi.ensure_aligned(drive.field())?;
        if self.alpha == 0.0 {
            let next = self.propagator.step(w);
            kinetic(&w.psi, &next.psi)?;
            return Ok(next);
        }
        let half = 0.5 * self.propagator.dt();
        let mut psi = w.psi.clone();
        let apply = |psi: &mut ComplexField| match drive {
            Drive::Ratio(fq) => damp(psi, &damping_rate(fq, self.alpha), half),
            Drive::Density(rho) => relax_amplitude(psi, rho, self.alpha, half),
        };
        apply(&mut psi)?;
        let mut next = self.propagator.apply(&psi);
        kinetic(&psi, &next)?;
        apply(&mut next)?;
        Ok(WaveState {
            psi: next,
            time: w.time + self.propagator.dt(),
        })
    }
}

pub fn step_nonlinear(w: &WaveState, fq: &RealField, dt: f64, alpha: f64, potential: Potential) -> Result<WaveState> {
    let physics = PhysicsParams {
        alpha,
        potential,
        ..PhysicsParams::default()
    };
    NonlinearStepper::new(w.grid(), dt, &physics).step(w, fq)
}

/// L2 norm of the discrete residual of
/// `∂|ψ|²/∂t + ∇·(v|ψ|²) = -2g(f_q)|ψ|²`, centred on the step midpoint.
///
/// `drive` is what the step held fixed; for a density the source is
/// `2α(ρ - |ψ|²)`.
pub fn continuity_residual(before: &WaveState, after: &WaveState, drive: Drive, dt: f64, alpha: f64) -> Result<f64> {
    before.psi.ensure_aligned(&after.psi)?;
    before.psi.ensure_aligned(drive.field())?;
    let rho_b = before.psi_sq();
    let rho_a = after.psi_sq();
    let j_b = probability_current(&before.psi);
    let j_a = probability_current(&after.psi);
    let j_mid = j_b.zip_map(&j_a, |a, b| 0.5 * (a + b))?;
    let div = gradient_real(&j_mid);
    let source = |i: usize, mid: f64| match drive {
        Drive::Ratio(fq) => 2.0 * alpha * (1.0 - fq.values()[i]) * mid,
        Drive::Density(rho) => 2.0 * alpha * (mid - rho.values()[i]),
    };
    let residual: Vec<f64> = (0..rho_b.len())
        .map(|i| {
            let rb = rho_b.values()[i];
            let ra = rho_a.values()[i];
            (ra - rb) / dt + div.values()[i] + source(i, 0.5 * (ra + rb))
        })
        .collect();
    let r = RealField::new(*before.grid(), residual)?;
    Ok(integrate(&r.map(|v| v * v)).sqrt())
}

/// Spatial integral of the continuity source `-2g|ψ|²`. With `α = ½` and a
/// normalized density this equals `1 - ∫|ψ|²`.
pub fn integrated_source(fq: &RealField, psi_sq: &RealField, alpha: f64) -> Result<f64> {
    let g = damping_rate(fq, alpha);
    Ok(integrate(&g.zip_map(psi_sq, |g, p| -2.0 * g * p)?))
}
