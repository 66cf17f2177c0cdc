//! Scenario drivers: relaxation, equilibrium control, linear baseline and
//! the conjugate-and-retrace reversal experiment.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensemble::{
    compute_fq, sample_initial, DensitySpec, FqField, KernelSmoother, ParticleEnsemble,
    DEFAULT_BANDWIDTH_SPACINGS, DEFAULT_FQ_CAP,
};
use crate::error::{Error, Result};
use crate::monitors::{dh_dt_analytic, fill_numeric_derivative, h_bar, h_function, l1_distance, MonitorRecord};
use crate::numerics::{l2_distance, Boundary, RealField, SpatialGrid};
use crate::wave::{continuity_residual, probability_current, Drive, NonlinearStepper, PhysicsParams, Potential, WaveState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Relax,
    /// Initial density replaced by `|ψ₀|²`.
    EquilibriumControl,
    /// `α` forced to zero.
    LinearBaseline,
    Reversal,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Relax => "relax",
            ExperimentKind::EquilibriumControl => "equilibrium_control",
            ExperimentKind::LinearBaseline => "linear_baseline",
            ExperimentKind::Reversal => "reversal",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "relax" => Ok(ExperimentKind::Relax),
            "equilibrium_control" => Ok(ExperimentKind::EquilibriumControl),
            "linear_baseline" => Ok(ExperimentKind::LinearBaseline),
            "reversal" => Ok(ExperimentKind::Reversal),
            other => Err(format!(
                "unknown experiment `{other}` (expected relax, equilibrium_control, linear_baseline or reversal)"
            )),
        }
    }
}

/// Where the density `ρ` entering `f_q` comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// Kernel density estimate of the guided ensemble, refreshed every step.
    Ensemble,
    /// The configured initial density, held fixed; no particles.
    Frozen,
    /// Prescribed `f_q(x,t) = 1 + A cos(2πk(x - x_min)/L) cos(ωt)`; no particles.
    Manufactured { amplitude: f64, wavenumber: f64, omega: f64 },
}

impl Coupling {
    pub fn name(&self) -> &'static str {
        match self {
            Coupling::Ensemble => "ensemble",
            Coupling::Frozen => "frozen",
            Coupling::Manufactured { .. } => "manufactured",
        }
    }

    pub fn manufactured_fq(grid: &SpatialGrid, amplitude: f64, wavenumber: f64, omega: f64, t: f64) -> RealField {
        let l = grid.length();
        let x0 = grid.x_min();
        let c = amplitude * (omega * t).cos();
        RealField::from_fn(*grid, |x| 1.0 + c * (2.0 * PI * wavenumber * (x - x0) / l).cos())
    }
}

/// Initial density of the ensemble (or of the frozen field).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoSpec {
    Mode(i64),
    Uniform,
    Gaussian { center: f64, width: f64 },
    /// `|ψ₀|²`, i.e. start in equilibrium.
    Born,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub grid: SpatialGrid,
    pub physics: PhysicsParams,
    pub fq_cap: f64,
    /// `(mode index, coefficient)` pairs of the initial wavefield.
    pub psi_modes: Vec<(i64, Complex64)>,
    /// Target `∫|ψ₀|²`.
    pub psi_norm: f64,
    pub rho: RhoSpec,
    pub ensemble_size: usize,
    pub seed: u64,
    /// KDE bandwidth in grid spacings.
    pub bandwidth: f64,
    pub dt: f64,
    pub steps: usize,
    pub sample_interval: usize,
    pub coarse_cells: Vec<usize>,
    pub kind: ExperimentKind,
    pub coupling: Coupling,
    pub t_reverse: f64,
    /// Steps between field snapshots; 0 keeps only the final state.
    pub snapshot_interval: usize,
}

/// `count` lowest modes with equal magnitudes and phases drawn from `phase_seed`.
pub fn equal_magnitude_modes(grid: &SpatialGrid, count: usize, phase_seed: u64) -> Vec<(i64, Complex64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(phase_seed);
    let magnitude = 1.0 / (count as f64).sqrt();
    let first = match grid.boundary() {
        crate::numerics::Boundary::Box => 1,
        crate::numerics::Boundary::Periodic => 0,
    };
    (0..count as i64)
        .map(|i| {
            let phase = 2.0 * PI * rng.random::<f64>();
            (first + i, Complex64::from_polar(magnitude, phase))
        })
        .collect()
}

pub const STANDARD_PHASE_SEED: u64 = 1;

impl ScenarioConfig {
    /// Box `[0, 1]`, 512 points, eight equal-magnitude modes, `ρ₀ = 2 sin²(πx)`,
    /// `M = 10⁵`, `dt = 10⁻³`, `T = 20`, `α = ½`.
    pub fn standard() -> Self {
        let grid = SpatialGrid::boxed(512, 0.0, 1.0).expect("standard grid is valid");
        Self {
            grid,
            physics: PhysicsParams {
                alpha: 0.5,
                potential: Potential::BoxWalls,
                node_floor: 1e-12,
            },
            fq_cap: DEFAULT_FQ_CAP,
            psi_modes: equal_magnitude_modes(&grid, 8, STANDARD_PHASE_SEED),
            psi_norm: 1.0,
            rho: RhoSpec::Mode(1),
            ensemble_size: 100_000,
            seed: 42,
            bandwidth: DEFAULT_BANDWIDTH_SPACINGS,
            dt: 1e-3,
            steps: 20_000,
            sample_interval: 100,
            coarse_cells: vec![grid.n_points() / 16, grid.n_points() / 32, grid.n_points() / 64],
            kind: ExperimentKind::Relax,
            coupling: Coupling::Ensemble,
            t_reverse: 2.0,
            snapshot_interval: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.physics.validate()?;
        self.physics.potential.check_grid(&self.grid)?;
        let bad = |m: &str| Err(Error::InvalidDensity(m.to_string()));
        if self.psi_modes.is_empty() || self.psi_modes.iter().all(|(_, c)| c.norm_sqr() == 0.0) {
            return bad("initial wavefield coefficients are all zero");
        }
        if !(self.fq_cap.is_finite() && self.fq_cap > 1.0) {
            return bad("f_q cap must exceed 1");
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.sample_interval == 0 {
            return bad("monitor interval must be at least one step");
        }
        if self.coupling == Coupling::Ensemble {
            if self.ensemble_size == 0 {
                return bad("ensemble size must be positive");
            }
            if !(self.bandwidth >= 1.0) {
                return Err(Error::InvalidBandwidth {
                    bandwidth: self.bandwidth * self.grid.spacing(),
                    spacing: self.grid.spacing(),
                });
            }
        }
        for &c in &self.coarse_cells {
            self.grid.cell_width(c)?;
        }
        if self.kind == ExperimentKind::Reversal && !(self.t_reverse > 0.0) {
            return bad("reversal time must be positive");
        }
        Ok(())
    }

    /// Physics with the experiment kind applied.
    pub fn effective_physics(&self) -> PhysicsParams {
        let mut p = self.physics;
        if self.kind == ExperimentKind::LinearBaseline {
            p.alpha = 0.0;
        }
        p
    }

    pub fn initial_wave(&self) -> Result<WaveState> {
        WaveState::from_modes(self.grid, &self.psi_modes, self.psi_norm)
    }

    fn initial_density(&self, psi0: &WaveState) -> DensitySpec {
        let rho = if self.kind == ExperimentKind::EquilibriumControl {
            RhoSpec::Born
        } else {
            self.rho
        };
        match rho {
            RhoSpec::Mode(k) => DensitySpec::Mode(k),
            RhoSpec::Uniform => DensitySpec::Uniform,
            RhoSpec::Gaussian { center, width } => DensitySpec::Gaussian { center, width },
            RhoSpec::Born => DensitySpec::Field(psi0.psi_sq()),
        }
    }
}

/// Field values at one sampled time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub rho: RealField,
    pub psi_sq: RealField,
    pub fq: RealField,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub records: Vec<MonitorRecord>,
    pub snapshots: Vec<Snapshot>,
    pub initial_wave: WaveState,
    pub final_wave: WaveState,
    pub final_ensemble: Option<ParticleEnsemble>,
}

#[derive(Debug, Clone)]
pub enum RunError {
    /// Configuration rejected before any step ran.
    Invalid(Error),
    /// Non-finite values appeared; carries everything recorded so far plus
    /// the offending state.
    Aborted {
        error: Error,
        partial: Box<ScenarioOutput>,
        snapshot: Option<Snapshot>,
    },
}

impl RunError {
    pub fn error(&self) -> &Error {
        match self {
            RunError::Invalid(e) => e,
            RunError::Aborted { error, .. } => error,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error().fmt(f)
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Invalid(e)
    }
}

/// Density and ratio fields at the current time.
struct Coupled {
    rho: RealField,
    fq: FqField,
}

/// The coupled state of one scenario and its stepping machinery.
struct Simulation<'a> {
    cfg: &'a ScenarioConfig,
    physics: PhysicsParams,
    stepper: NonlinearStepper,
    wave: WaveState,
    ensemble: Option<ParticleEnsemble>,
    smoother: Option<KernelSmoother>,
    frozen_rho: Option<RealField>,
    step: usize,
    last_residual: f64,
}

impl<'a> Simulation<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let physics = cfg.effective_physics();
        let wave = cfg.initial_wave()?;
        let spec = cfg.initial_density(&wave);
        let (ensemble, frozen_rho) = match cfg.coupling {
            Coupling::Ensemble => (
                Some(sample_initial(&spec, &cfg.grid, cfg.ensemble_size, cfg.seed)?),
                None,
            ),
            Coupling::Frozen => (None, Some(spec.on_grid(&cfg.grid)?)),
            Coupling::Manufactured { .. } => (None, None),
        };
        let smoother = match cfg.coupling {
            Coupling::Ensemble => Some(KernelSmoother::new(&cfg.grid, cfg.bandwidth * cfg.grid.spacing())?),
            _ => None,
        };
        Ok(Self {
            cfg,
            physics,
            stepper: NonlinearStepper::new(&cfg.grid, cfg.dt, &physics),
            wave,
            ensemble,
            smoother,
            frozen_rho,
            step: 0,
            last_residual: 0.0,
        })
    }

    fn time(&self) -> f64 {
        self.wave.time
    }

    fn coupled_at(&self, t: f64) -> Result<Coupled> {
        let cfg = self.cfg;
        let rho = match cfg.coupling {
            Coupling::Ensemble => {
                let e = self.ensemble.as_ref().expect("ensemble coupling carries particles");
                let smoother = self.smoother.as_ref().expect("ensemble coupling carries a smoother");
                smoother.density(&e.positions)?
            }
            Coupling::Frozen => self.frozen_rho.clone().expect("frozen coupling carries a density"),
            Coupling::Manufactured {
                amplitude,
                wavenumber,
                omega,
            } => {
                let f = Coupling::manufactured_fq(&cfg.grid, amplitude, wavenumber, omega, t);
                let psi_sq = self.wave.psi_sq();
                let rho = f.zip_map(&psi_sq, |f, p| f * p)?;
                return Ok(Coupled {
                    fq: FqField {
                        values: f,
                        rho: rho.clone(),
                        psi_sq,
                        cap: cfg.fq_cap,
                        floored_points: 0,
                    },
                    rho,
                });
            }
        };
        let fq = compute_fq(&rho, &self.wave, cfg.fq_cap, self.physics.node_floor)?;
        Ok(Coupled { rho, fq })
    }

    fn coupled(&self) -> Result<Coupled> {
        self.coupled_at(self.time())
    }

    fn record(&self, c: &Coupled) -> Result<MonitorRecord> {
        let psi_sq = &c.fq.psi_sq;
        let h_bar = self
            .cfg
            .coarse_cells
            .iter()
            .map(|&cells| Ok((cells, h_bar(&c.rho, psi_sq, cells)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(MonitorRecord {
            time: self.time(),
            h_q: h_function(&c.rho, psi_sq)?,
            h_bar,
            norm: crate::numerics::integrate(psi_sq),
            l1_dist: l1_distance(&c.rho, psi_sq)?,
            dh_dt_analytic: dh_dt_analytic(&c.fq.values, psi_sq, self.physics.alpha)?,
            dh_dt_numeric: 0.0,
            continuity_residual: self.last_residual,
            floored_points: c.fq.floored_points,
        })
    }

    fn snapshot(&self, c: &Coupled) -> Snapshot {
        Snapshot {
            step: self.step,
            time: self.time(),
            rho: c.rho.clone(),
            psi_sq: c.fq.psi_sq.clone(),
            fq: c.fq.values.clone(),
        }
    }

    /// Advances wave and particles by one step using the ratio field `c`.
    /// The continuity residual is evaluated only when `with_residual`.
    fn advance(&mut self, c: &Coupled, with_residual: bool) -> Result<()> {
        let dt = self.cfg.dt;
        // A prescribed ratio field is evaluated at the step midpoint.
        let prescribed = match self.cfg.coupling {
            Coupling::Manufactured {
                amplitude,
                wavenumber,
                omega,
            } => Some(Coupling::manufactured_fq(&self.cfg.grid, amplitude, wavenumber, omega, self.time() + 0.5 * dt)),
            _ => None,
        };
        let drive = match &prescribed {
            Some(f) => Drive::Ratio(f),
            None => Drive::Density(&c.rho),
        };
        // Particles move only with the linear propagation; the damping
        // substeps leave the phase, hence the velocity, untouched.
        let mut ensemble = self.ensemble.take();
        let next = self.stepper.step_observed(&self.wave, drive, |before, after| {
            if let Some(e) = ensemble.as_mut() {
                let inflow = match before.grid().boundary() {
                    Boundary::Box => 0.0,
                    Boundary::Periodic => {
                        0.5 * dt * (probability_current(before).values()[0] + probability_current(after).values()[0])
                    }
                };
                e.transport(&before.norm_sqr(), &after.norm_sqr(), inflow, dt)?;
            }
            Ok(())
        })?;
        if with_residual {
            self.last_residual = continuity_residual(&self.wave, &next, drive, dt, self.physics.alpha)?;
        }
        self.ensemble = ensemble;
        self.wave = next;
        self.step += 1;
        let norm = self.wave.norm();
        if !norm.is_finite() {
            return Err(Error::NumericalAbort {
                step: self.step,
                time: self.time(),
                reason: format!("wavefield norm became {norm}; reduce alpha*dt or the f_q cap"),
            });
        }
        Ok(())
    }

    fn finish(self, records: Vec<MonitorRecord>, snapshots: Vec<Snapshot>, initial_wave: WaveState) -> ScenarioOutput {
        ScenarioOutput {
            records,
            snapshots,
            initial_wave,
            final_wave: self.wave,
            final_ensemble: self.ensemble,
        }
    }
}

fn check_finite(c: &Coupled, step: usize, time: f64) -> Result<()> {
    if c.rho.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalAbort {
            step,
            time,
            reason: "density estimate is not finite".into(),
        });
    }
    Ok(())
}

/// Runs `steps` steps, sampling monitors every `sample_interval` steps
/// (including both ends when they fall on the interval).
fn drive(
    sim: &mut Simulation,
    steps: usize,
    records: &mut Vec<MonitorRecord>,
    snapshots: &mut Vec<Snapshot>,
) -> std::result::Result<(), (Error, Option<Snapshot>)> {
    let interval = sim.cfg.sample_interval;
    let snap_every = sim.cfg.snapshot_interval;
    let start = sim.step;
    for local in 0..=steps {
        let c = sim.coupled().map_err(|e| (e, None))?;
        check_finite(&c, sim.step, sim.time()).map_err(|e| (e, Some(sim.snapshot(&c))))?;
        if local % interval == 0 {
            records.push(sim.record(&c).map_err(|e| (e, None))?);
        }
        // The final state is always captured.
        if (snap_every > 0 && (sim.step - start).is_multiple_of(snap_every)) || local == steps {
            snapshots.push(sim.snapshot(&c));
        }
        if local == steps {
            break;
        }
        let with_residual = (local + 1) % interval == 0;
        if let Err(e) = sim.advance(&c, with_residual) {
            let snap = sim.coupled().ok().map(|c| sim.snapshot(&c));
            return Err((e, snap));
        }
    }
    Ok(())
}

/// Runs one scenario: per step estimate ρ, form `f_q`, take the split
/// nonlinear wave step, move the particles, and sample monitors.
pub fn run_scenario(cfg: &ScenarioConfig) -> std::result::Result<ScenarioOutput, RunError> {
    let mut sim = Simulation::new(cfg)?;
    let initial_wave = sim.wave.clone();
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    if let Err((error, snapshot)) = drive(&mut sim, cfg.steps, &mut records, &mut snapshots) {
        let _ = fill_numeric_derivative(&mut records);
        return Err(RunError::Aborted {
            error,
            partial: Box::new(sim.finish(records, snapshots, initial_wave)),
            snapshot,
        });
    }
    fill_numeric_derivative(&mut records)?;
    Ok(sim.finish(records, snapshots, initial_wave))
}

/// `ψ → ψ*`, which flips the guidance velocity pointwise.
pub fn conjugate_reverse(w: &WaveState) -> WaveState {
    WaveState {
        psi: w.psi.conj(),
        time: w.time,
    }
}

#[derive(Debug, Clone)]
pub struct ReversalReport {
    /// `(t, h_q)` samples before the reversal.
    pub forward_h_trace: Vec<(f64, f64)>,
    /// `(t, h_q)` samples after the reversal.
    pub backward_h_trace: Vec<(f64, f64)>,
    /// `‖ψ_final* - ψ₀‖₂`: zero for exactly reversible dynamics.
    pub retrace_l2_error: f64,
    /// `∫|ρ_final - ρ₀|`.
    pub retrace_rho_error: f64,
    pub forward_records: Vec<MonitorRecord>,
    pub backward_records: Vec<MonitorRecord>,
}

/// Evolves to `t_reverse`, conjugates ψ (particles keep their positions),
/// evolves for the same duration again and measures how far the final
/// state is from the time-reversed initial one.
pub fn reversal_experiment(cfg: &ScenarioConfig, t_reverse: f64) -> std::result::Result<ReversalReport, RunError> {
    if !(t_reverse > 0.0) {
        return Err(RunError::Invalid(Error::InvalidDensity("reversal time must be positive".into())));
    }
    let steps = (t_reverse / cfg.dt).round() as usize;
    let mut sim = Simulation::new(cfg)?;
    let initial_wave = sim.wave.clone();
    let rho0 = sim.coupled()?.rho;

    let abort = |sim: Simulation, records, error, snapshot| RunError::Aborted {
        error,
        partial: Box::new(sim.finish(records, Vec::new(), initial_wave.clone())),
        snapshot,
    };

    let mut forward = Vec::new();
    let mut ignored = Vec::new();
    if let Err((e, s)) = drive(&mut sim, steps, &mut forward, &mut ignored) {
        return Err(abort(sim, forward, e, s));
    }
    sim.wave = conjugate_reverse(&sim.wave);
    let mut backward = Vec::new();
    if let Err((e, s)) = drive(&mut sim, steps, &mut backward, &mut ignored) {
        return Err(abort(sim, backward, e, s));
    }
    fill_numeric_derivative(&mut forward)?;
    fill_numeric_derivative(&mut backward)?;

    let rho_final = sim.coupled()?.rho;
    let retrace_l2_error = l2_distance(&sim.wave.psi.conj(), &initial_wave.psi)?;
    let retrace_rho_error = l1_distance(&rho_final, &rho0)?;
    let trace = |r: &[MonitorRecord]| r.iter().map(|r| (r.time, r.h_q)).collect();
    Ok(ReversalReport {
        forward_h_trace: trace(&forward),
        backward_h_trace: trace(&backward),
        retrace_l2_error,
        retrace_rho_error,
        forward_records: forward,
        backward_records: backward,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wave::velocity_field;

    fn small(kind: ExperimentKind, coupling: Coupling) -> ScenarioConfig {
        let grid = SpatialGrid::boxed(128, 0.0, 1.0).unwrap();
        ScenarioConfig {
            grid,
            psi_modes: equal_magnitude_modes(&grid, 4, 3),
            ensemble_size: 5_000,
            steps: 200,
            sample_interval: 20,
            coarse_cells: vec![8, 4, 2],
            kind,
            coupling,
            t_reverse: 0.1,
            ..ScenarioConfig::standard()
        }
    }

    #[test]
    fn standard_scenario_is_valid() {
        let cfg = ScenarioConfig::standard();
        cfg.validate().unwrap();
        assert_eq!(cfg.coarse_cells, vec![32, 16, 8]);
        assert_eq!(cfg.psi_modes.len(), 8);
        let mags: Vec<f64> = cfg.psi_modes.iter().map(|(_, c)| c.norm()).collect();
        assert!(mags.iter().all(|m| (m - mags[0]).abs() < 1e-15));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = small(ExperimentKind::Relax, Coupling::Ensemble);
        cfg.coarse_cells = vec![7];
        assert!(matches!(run_scenario(&cfg), Err(RunError::Invalid(_))));
        let mut cfg = small(ExperimentKind::Relax, Coupling::Ensemble);
        cfg.psi_modes = vec![(1, Complex64::new(0.0, 0.0))];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn records_sample_both_ends() {
        let cfg = small(ExperimentKind::Relax, Coupling::Ensemble);
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.records.len(), cfg.steps / cfg.sample_interval + 1);
        assert_eq!(out.records[0].time, 0.0);
        assert!((out.records.last().unwrap().time - 0.2).abs() < 1e-12);
        assert_eq!(out.records[0].continuity_residual, 0.0);
        assert!(out.records[1].continuity_residual > 0.0);
        assert_eq!(out.final_ensemble.unwrap().len(), 5_000);
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = small(ExperimentKind::Relax, Coupling::Ensemble);
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn equilibrium_control_starts_near_equilibrium() {
        let eq = run_scenario(&small(ExperimentKind::EquilibriumControl, Coupling::Ensemble)).unwrap();
        let relax = run_scenario(&small(ExperimentKind::Relax, Coupling::Ensemble)).unwrap();
        assert!(eq.records[0].h_q < 0.1 * relax.records[0].h_q);
    }

    #[test]
    fn linear_baseline_preserves_norm() {
        let out = run_scenario(&small(ExperimentKind::LinearBaseline, Coupling::Ensemble)).unwrap();
        let n0 = out.records[0].norm;
        assert!(out.records.iter().all(|r| (r.norm - n0).abs() < 1e-12));
        assert!(out.records.iter().all(|r| r.dh_dt_analytic == 0.0));
    }

    #[test]
    fn conjugation_flips_velocity() {
        let cfg = small(ExperimentKind::Relax, Coupling::Frozen);
        let w = cfg.initial_wave().unwrap();
        let v = velocity_field(&w, 1e-12);
        let vr = velocity_field(&conjugate_reverse(&w), 1e-12);
        for (a, b) in v.values().iter().zip(vr.values()) {
            assert_eq!(*a, -*b);
        }
        // a real wave is its own reversal
        let real = WaveState::from_modes(cfg.grid, &[(2, 1.0.into())], 1.0).unwrap();
        assert_eq!(conjugate_reverse(&real), real);
    }

    #[test]
    fn linear_reversal_retraces_exactly() {
        let mut cfg = small(ExperimentKind::Reversal, Coupling::Frozen);
        cfg.physics.alpha = 0.0;
        let rep = reversal_experiment(&cfg, 0.1).unwrap();
        assert!(rep.retrace_l2_error < 1e-10, "{}", rep.retrace_l2_error);
        assert_eq!(rep.retrace_rho_error, 0.0);
    }

    #[test]
    fn damped_reversal_does_not_retrace() {
        let cfg = small(ExperimentKind::Reversal, Coupling::Frozen);
        let rep = reversal_experiment(&cfg, 0.1).unwrap();
        assert!(rep.retrace_l2_error > 1e-4, "{}", rep.retrace_l2_error);
        assert_eq!(rep.forward_h_trace.len(), rep.backward_h_trace.len());
    }

    #[test]
    fn abort_on_non_finite_wave() {
        let mut cfg = small(ExperimentKind::Relax, Coupling::Manufactured {
            amplitude: 0.0,
            wavenumber: 1.0,
            omega: 0.0,
        });
        cfg.physics.alpha = 1e300;
        cfg.coupling = Coupling::Manufactured {
            amplitude: 0.5,
            wavenumber: 1.0,
            omega: 0.0,
        };
        match run_scenario(&cfg) {
            Err(RunError::Aborted { error, partial, .. }) => {
                assert!(matches!(error, Error::NumericalAbort { .. }));
                assert!(!partial.records.is_empty());
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }
}
