use num_complex::Complex64;
use pilotwave::ensemble::{advance, ParticleEnsemble};
use pilotwave::numerics::{ComplexField, SpatialGrid};
use pilotwave::wave::{step_linear, Potential, WaveState};

/// A free Gaussian packet at rest spreads as `σ(t) = σ₀√(1 + (t/2σ₀²)²)` and
/// every trajectory scales with it: `x(t) = x₀ σ(t)/σ₀`.
#[test]
fn gaussian_packet_trajectories_follow_the_width() {
    let grid = SpatialGrid::boxed(2047, -10.0, 10.0).unwrap();
    let sigma0: f64 = 0.5;
    let psi = ComplexField::from_fn(grid, |x| Complex64::new((-x * x / (4.0 * sigma0 * sigma0)).exp(), 0.0));
    let mut w = WaveState::new(psi, 0.0).unwrap();
    let starts = vec![-1.2, -0.6, -0.1, 0.3, 0.8, 1.5];
    let mut e = ParticleEnsemble::new(grid, starts.clone(), 0.0, 0).unwrap();
    let (dt, steps) = (1e-4, 2000);
    for _ in 0..steps {
        e = advance(&e, &w, dt, 1e-300);
        w = step_linear(&w, dt, Potential::None);
    }
    let t = dt * steps as f64;
    let scale = (1.0 + (t / (2.0 * sigma0 * sigma0)).powi(2)).sqrt();
    for (x0, x) in starts.iter().zip(&e.positions) {
        let expected = x0 * scale;
        assert!((x - expected).abs() <= 1e-4 * expected.abs(), "x0 = {x0}: {x} vs {expected}");
    }
}

/// In the plane-wave state every particle moves at `k`.
#[test]
fn plane_wave_carries_particles_uniformly() {
    let grid = SpatialGrid::periodic(128, 0.0, 1.0).unwrap();
    let k = 2.0 * std::f64::consts::PI * 3.0;
    let w = WaveState::new(ComplexField::from_fn(grid, |x| Complex64::from_polar(1.0, k * x)), 0.0).unwrap();
    let e = ParticleEnsemble::new(grid, vec![0.1, 0.45, 0.9], 0.0, 0).unwrap();
    let moved = advance(&e, &w, 0.01, 1e-12);
    for (a, b) in e.positions.iter().zip(&moved.positions) {
        let shift = (b - a).rem_euclid(1.0);
        assert!((shift - (k * 0.01).rem_euclid(1.0)).abs() < 1e-10);
    }
}
