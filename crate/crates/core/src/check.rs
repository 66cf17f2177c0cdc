//! Built-in oracle suite: closed-form and sign-definite checks on the
//! numerical kernels, independent of any simulation run.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::monitors::{dh_dt_analytic, h_bar, h_function};
use crate::numerics::{integrate, ComplexField, RealField, SpatialGrid};
use crate::wave::{quantum_potential, velocity_field, WaveState};

/// Number of random fields drawn by each sign check.
pub const RANDOM_TRIALS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
}

impl fmt::Display for OracleOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} (worst {:e}, tolerance {:e})", self.name, self.worst, self.tolerance)
    }
}

fn outcome(name: &'static str, worst: f64, tolerance: f64) -> OracleOutcome {
    OracleOutcome {
        name,
        passed: worst <= tolerance,
        worst,
        tolerance,
    }
}

/// Largest deviation of `Q` from `π²/2` for the box ground state `√2 sin πx`.
pub fn ground_state_potential_error(n: usize) -> Result<f64> {
    let grid = SpatialGrid::boxed(n, 0.0, 1.0)?;
    let w = WaveState::new(ComplexField::from_fn(grid, |x| Complex64::new(2f64.sqrt() * (PI * x).sin(), 0.0)), 0.0)?;
    let q = quantum_potential(&w, 1e-300);
    Ok(q.values().iter().map(|v| (v - 0.5 * PI * PI).abs()).fold(0.0, f64::max))
}

/// Largest deviation of the guidance velocity from `k` for `e^{ikx}` on a
/// periodic grid, relative to `k`.
pub fn plane_wave_velocity_error(n: usize, mode: i64) -> Result<f64> {
    let grid = SpatialGrid::periodic(n, 0.0, 1.0)?;
    let k = 2.0 * PI * mode as f64;
    let w = WaveState::new(ComplexField::from_fn(grid, |x| Complex64::from_polar(1.0, k * x)), 0.0)?;
    let v = velocity_field(&w, 1e-12);
    Ok(v.values().iter().map(|v| (v - k).abs()).fold(0.0, f64::max) / k.abs())
}

/// A positive random field of unit integral: the exponential of a random
/// low-order Fourier series, with amplitude up to `spread`.
fn random_density(grid: &SpatialGrid, rng: &mut ChaCha8Rng, spread: f64) -> RealField {
    let terms: Vec<(f64, f64, f64)> = (1..=6)
        .map(|k| (k as f64, rng.random::<f64>() * spread / k as f64, rng.random::<f64>() * 2.0 * PI))
        .collect();
    let (x0, len) = (grid.x_min(), grid.length());
    let f = RealField::from_fn(*grid, |x| {
        let s = (x - x0) / len;
        terms.iter().map(|&(k, a, p)| a * (2.0 * PI * k * s + p).cos()).sum::<f64>().exp()
    });
    let total = integrate(&f);
    f.scaled(1.0 / total)
}

fn random_grid(rng: &mut ChaCha8Rng) -> Result<SpatialGrid> {
    let n = 64 * rng.random_range(1..=4);
    if rng.random::<bool>() {
        SpatialGrid::periodic(n, 0.0, 1.0)
    } else {
        SpatialGrid::boxed(n, 0.0, 1.0)
    }
}

/// Most negative `H_q` over random density pairs, reported as `-min(H, 0)`.
pub fn h_function_sign_violation(trials: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let grid = random_grid(&mut rng)?;
        let spread = rng.random_range(0.0..6.0);
        let rho = random_density(&grid, &mut rng, spread);
        let psi_sq = random_density(&grid, &mut rng, spread);
        worst = worst.max(-h_function(&rho, &psi_sq)?);
    }
    Ok(worst)
}

/// Largest positive `dH/dt` over random ratio fields.
pub fn dh_dt_sign_violation(trials: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let grid = random_grid(&mut rng)?;
        let psi_sq = random_density(&grid, &mut rng, 4.0);
        let spread = rng.random_range(0.0..4.0);
        let fq = random_density(&grid, &mut rng, spread).scaled(rng.random_range(0.1..10.0));
        let alpha = rng.random_range(0.0..2.0);
        worst = worst.max(dh_dt_analytic(&fq, &psi_sq, alpha)?);
    }
    Ok(worst)
}

/// Largest `H̄ - H_q` relative to `H_q` over random pairs and cell counts.
pub fn coarse_excess(trials: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let grid = random_grid(&mut rng)?;
        let spread = rng.random_range(0.0..6.0);
        let rho = random_density(&grid, &mut rng, spread);
        let psi_sq = random_density(&grid, &mut rng, spread);
        let cells = grid.n_points() >> rng.random_range(1..=5);
        let fine = h_function(&rho, &psi_sq)?;
        let coarse = h_bar(&rho, &psi_sq, cells)?;
        worst = worst.max((coarse - fine) / fine.max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Runs every oracle; `seed` fixes the random fields.
pub fn run_checks(seed: u64) -> Result<Vec<OracleOutcome>> {
    Ok(vec![
        outcome("quantum potential of box ground state equals pi^2/2", ground_state_potential_error(512)?, 1e-6),
        outcome("plane-wave velocity equals k", plane_wave_velocity_error(512, 7)?, 1e-12),
        outcome("h_function >= 0 on random pairs", h_function_sign_violation(RANDOM_TRIALS, seed)?, 0.0),
        outcome("dh_dt_analytic <= 0 on random f_q", dh_dt_sign_violation(RANDOM_TRIALS, seed.wrapping_add(1))?, 0.0),
        outcome("h_bar <= h_q on random pairs", coarse_excess(RANDOM_TRIALS, seed.wrapping_add(2))?, 1e-12),
    ])
}
