//! Flat `section.key = value` scenario files.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Every key is optional and falls back to the standard scenario. Lists are
//! comma separated. Unknown and repeated keys are errors, reported with the
//! 1-based line number.
//!
//! | key                     | value                                                    |
//! |-------------------------|----------------------------------------------------------|
//! | `grid.n`                | number of grid points (box: interior points)             |
//! | `grid.x_min`, `grid.x_max` | domain ends                                           |
//! | `grid.boundary`         | `box` or `periodic`                                      |
//! | `physics.alpha`         | damping strength α ≥ 0                                   |
//! | `physics.potential`     | `none`, `box_walls` or `harmonic:<omega>`                |
//! | `physics.node_floor`    | relative `|ψ|²` floor for ratios and velocities          |
//! | `physics.fq_cap`        | upper clip of `f_q`                                      |
//! | `psi.modes`             | number of equal-magnitude modes with random phases       |
//! | `psi.phase_seed`        | seed of those phases                                     |
//! | `psi.coefficients`      | explicit `k:re:im` list; overrides `psi.modes`           |
//! | `psi.norm`              | initial `∫|ψ|²`                                          |
//! | `rho.kind`              | `mode`, `uniform`, `gaussian` or `born`                  |
//! | `rho.mode`              | mode index for `mode`                                    |
//! | `rho.center`, `rho.width` | parameters for `gaussian`                              |
//! | `ensemble.size`         | particle count                                           |
//! | `ensemble.seed`         | sampling seed                                            |
//! | `ensemble.bandwidth`    | KDE bandwidth in grid spacings                           |
//! | `time.dt`, `time.steps` | step size and count                                      |
//! | `monitor.interval`      | steps between monitor samples                            |
//! | `monitor.coarse_points` | grid points per coarse cell, e.g. `16,32,64`             |
//! | `monitor.snapshot_interval` | steps between field snapshots, 0 for the final one only |
//! | `run.kind`              | `relax`, `equilibrium_control`, `linear_baseline`, `reversal` |
//! | `run.coupling`          | `ensemble`, `frozen` or `manufactured`                   |
//! | `run.t_reverse`         | reversal time                                            |
//! | `manufactured.amplitude`, `manufactured.wavenumber`, `manufactured.omega` | prescribed `f_q` |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::experiments::{equal_magnitude_modes, Coupling, ExperimentKind, RhoSpec, ScenarioConfig, STANDARD_PHASE_SEED};
use crate::numerics::{Boundary, SpatialGrid};
use crate::wave::Potential;

const KEYS: &[&str] = &[
    "grid.n",
    "grid.x_min",
    "grid.x_max",
    "grid.boundary",
    "physics.alpha",
    "physics.potential",
    "physics.node_floor",
    "physics.fq_cap",
    "psi.modes",
    "psi.phase_seed",
    "psi.coefficients",
    "psi.norm",
    "rho.kind",
    "rho.mode",
    "rho.center",
    "rho.width",
    "ensemble.size",
    "ensemble.seed",
    "ensemble.bandwidth",
    "time.dt",
    "time.steps",
    "monitor.interval",
    "monitor.coarse_points",
    "monitor.snapshot_interval",
    "run.kind",
    "run.coupling",
    "run.t_reverse",
    "manufactured.amplitude",
    "manufactured.wavenumber",
    "manufactured.omega",
];

/// Parsed assignments, keyed by name, remembering the source line.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::config(line, format!("expected `section.key = value`, found `{content}`")));
            };
            let key = key.trim();
            let value = value.trim();
            if !KEYS.contains(&key) {
                return Err(Error::config(line, format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(Error::config(line, format!("missing value for `{key}`")));
            }
            if let Some((first, _)) = entries.get(key) {
                return Err(Error::config(line, format!("`{key}` already set on line {first}")));
            }
            entries.insert(key.to_string(), (line, value.to_string()));
        }
        Ok(Self { entries })
    }

    /// Sets `key`, replacing any earlier value. Used for command-line overrides.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::config(0, format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), (0, value.into()));
        Ok(())
    }

    pub fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |(l, _)| *l)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::config(*line, format!("`{key}`: cannot parse `{v}`: {e}"))),
        }
    }

    fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some((line, v)) = self.entries.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse()
                    .map_err(|e| Error::config(*line, format!("`{key}`: cannot parse `{s}`: {e}")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn err(&self, key: &str, message: impl Into<String>) -> Error {
        Error::config(self.line_of(key), message)
    }

    /// Resolves against the standard scenario and validates the result.
    pub fn resolve(&self) -> Result<ScenarioConfig> {
        let std = ScenarioConfig::standard();
        let sg = std.grid;

        let n = self.get_or("grid.n", sg.n_points())?;
        let x_min = self.get_or("grid.x_min", sg.x_min())?;
        let x_max = self.get_or("grid.x_max", sg.x_max())?;
        let boundary: Boundary = self.get_or("grid.boundary", sg.boundary())?;
        let grid = SpatialGrid::new(n, x_min, x_max, boundary).map_err(|e| {
            let key = ["grid.n", "grid.x_min", "grid.x_max", "grid.boundary"]
                .into_iter()
                .max_by_key(|k| self.line_of(k))
                .unwrap_or("grid.n");
            self.err(key, e.to_string())
        })?;

        let default_potential = match boundary {
            Boundary::Box => Potential::BoxWalls,
            Boundary::Periodic => Potential::None,
        };
        let mut physics = std.physics;
        physics.alpha = self.get_or("physics.alpha", physics.alpha)?;
        physics.potential = self.get_or("physics.potential", default_potential)?;
        physics.node_floor = self.get_or("physics.node_floor", physics.node_floor)?;
        physics
            .validate()
            .map_err(|e| self.err("physics.alpha", e.to_string()))?;
        physics
            .potential
            .check_grid(&grid)
            .map_err(|e| self.err("physics.potential", e.to_string()))?;
        let fq_cap = self.get_or("physics.fq_cap", std.fq_cap)?;
        if !(fq_cap.is_finite() && fq_cap > 1.0) {
            return Err(self.err("physics.fq_cap", "f_q cap must be a finite number above 1"));
        }

        let psi_modes = match self.entries.get("psi.coefficients") {
            Some((line, v)) => parse_coefficients(v).map_err(|m| Error::config(*line, m))?,
            None => {
                let count: usize = self.get_or("psi.modes", 8)?;
                if count == 0 {
                    return Err(self.err("psi.modes", "at least one mode is required"));
                }
                let seed = self.get_or("psi.phase_seed", STANDARD_PHASE_SEED)?;
                equal_magnitude_modes(&grid, count, seed)
            }
        };
        if psi_modes.iter().all(|(_, c)| c.norm_sqr() == 0.0) {
            return Err(self.err("psi.coefficients", "initial wavefield coefficients are all zero"));
        }
        if boundary == Boundary::Box {
            if let Some((k, _)) = psi_modes.iter().find(|(k, _)| *k < 1 || *k as usize > n) {
                return Err(self.err(
                    "psi.coefficients",
                    format!("box mode {k} outside 1..={n}"),
                ));
            }
        }
        let psi_norm = self.get_or("psi.norm", std.psi_norm)?;
        if !(psi_norm.is_finite() && psi_norm > 0.0) {
            return Err(self.err("psi.norm", "norm must be positive"));
        }

        let rho_kind: String = self.get_or("rho.kind", "mode".to_string())?;
        let rho = match rho_kind.as_str() {
            "mode" => RhoSpec::Mode(self.get_or("rho.mode", 1)?),
            "uniform" => RhoSpec::Uniform,
            "gaussian" => {
                let center = self.get_or("rho.center", 0.5 * (x_min + x_max))?;
                let width = self.get_or("rho.width", 0.1 * (x_max - x_min))?;
                if !(width > 0.0) {
                    return Err(self.err("rho.width", "gaussian width must be positive"));
                }
                RhoSpec::Gaussian { center, width }
            }
            "born" => RhoSpec::Born,
            other => {
                return Err(self.err(
                    "rho.kind",
                    format!("unknown density `{other}` (expected mode, uniform, gaussian or born)"),
                ))
            }
        };
        if let RhoSpec::Mode(k) = rho {
            if boundary == Boundary::Box && k < 1 {
                return Err(self.err("rho.mode", "box modes start at 1"));
            }
        }

        let ensemble_size = self.get_or("ensemble.size", std.ensemble_size)?;
        let seed = self.get_or("ensemble.seed", std.seed)?;
        let bandwidth: f64 = self.get_or("ensemble.bandwidth", std.bandwidth)?;
        if !(bandwidth >= 1.0 && bandwidth.is_finite()) {
            return Err(self.err("ensemble.bandwidth", "bandwidth must be at least one grid spacing"));
        }

        let dt: f64 = self.get_or("time.dt", std.dt)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(self.err("time.dt", "dt must be positive"));
        }
        let steps = self.get_or("time.steps", std.steps)?;

        let sample_interval = self.get_or("monitor.interval", std.sample_interval)?;
        if sample_interval == 0 {
            return Err(self.err("monitor.interval", "interval must be at least one step"));
        }
        let points = self.list::<usize>("monitor.coarse_points")?.unwrap_or(vec![16, 32, 64]);
        let mut coarse_cells = Vec::with_capacity(points.len());
        for p in points {
            if p == 0 || n % p != 0 {
                return Err(self.err(
                    "monitor.coarse_points",
                    format!("{p} points per cell does not divide {n} grid points"),
                ));
            }
            coarse_cells.push(n / p);
        }
        let snapshot_interval = self.get_or("monitor.snapshot_interval", 0)?;

        let kind: ExperimentKind = self.get_or("run.kind", std.kind)?;
        let coupling_name: String = self.get_or("run.coupling", "ensemble".to_string())?;
        let coupling = match coupling_name.as_str() {
            "ensemble" => Coupling::Ensemble,
            "frozen" => Coupling::Frozen,
            "manufactured" => Coupling::Manufactured {
                amplitude: self.get_or("manufactured.amplitude", 0.2)?,
                wavenumber: self.get_or("manufactured.wavenumber", 1.0)?,
                omega: self.get_or("manufactured.omega", 1.0)?,
            },
            other => {
                return Err(self.err(
                    "run.coupling",
                    format!("unknown coupling `{other}` (expected ensemble, frozen or manufactured)"),
                ))
            }
        };
        if let Coupling::Manufactured { amplitude, .. } = coupling {
            if !(amplitude.abs() < 1.0) {
                return Err(self.err("manufactured.amplitude", "|amplitude| must be below 1 to keep f_q positive"));
            }
        }
        if coupling == Coupling::Ensemble && ensemble_size == 0 {
            return Err(self.err("ensemble.size", "ensemble size must be positive"));
        }
        let t_reverse: f64 = self.get_or("run.t_reverse", std.t_reverse)?;
        if kind == ExperimentKind::Reversal && !(t_reverse.is_finite() && t_reverse > 0.0) {
            return Err(self.err("run.t_reverse", "reversal time must be positive"));
        }

        let cfg = ScenarioConfig {
            grid,
            physics,
            fq_cap,
            psi_modes,
            psi_norm,
            rho,
            ensemble_size,
            seed,
            bandwidth,
            dt,
            steps,
            sample_interval,
            coarse_cells,
            kind,
            coupling,
            t_reverse,
            snapshot_interval,
        };
        cfg.validate().map_err(|e| Error::config(0, e.to_string()))?;
        Ok(cfg)
    }
}

fn parse_coefficients(v: &str) -> std::result::Result<Vec<(i64, Complex64)>, String> {
    v.split(',')
        .map(|item| {
            let parts: Vec<&str> = item.trim().split(':').collect();
            let [k, re, im] = parts.as_slice() else {
                return Err(format!("`psi.coefficients`: expected `k:re:im`, found `{}`", item.trim()));
            };
            let bad = |s: &str| format!("`psi.coefficients`: cannot parse `{s}`");
            Ok((
                k.trim().parse().map_err(|_| bad(k))?,
                Complex64::new(re.trim().parse().map_err(|_| bad(re))?, im.trim().parse().map_err(|_| bad(im))?),
            ))
        })
        .collect()
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    RawConfig::parse(text)?.resolve()
}

/// Fully resolved config text. Floats are written in shortest round-trip
/// form and coefficients explicitly, so parsing the output reproduces `cfg`.
pub fn to_config_string(cfg: &ScenarioConfig) -> String {
    let g = &cfg.grid;
    let mut s = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    put("grid.n", g.n_points().to_string());
    put("grid.x_min", format!("{:?}", g.x_min()));
    put("grid.x_max", format!("{:?}", g.x_max()));
    put("grid.boundary", g.boundary().as_str().into());
    put("physics.alpha", format!("{:?}", cfg.physics.alpha));
    put("physics.potential", cfg.physics.potential.to_string());
    put("physics.node_floor", format!("{:?}", cfg.physics.node_floor));
    put("physics.fq_cap", format!("{:?}", cfg.fq_cap));
    let coeffs: Vec<String> = cfg
        .psi_modes
        .iter()
        .map(|(k, c)| format!("{k}:{:?}:{:?}", c.re, c.im))
        .collect();
    put("psi.coefficients", coeffs.join(","));
    put("psi.norm", format!("{:?}", cfg.psi_norm));
    match cfg.rho {
        RhoSpec::Mode(k) => {
            put("rho.kind", "mode".into());
            put("rho.mode", k.to_string());
        }
        RhoSpec::Uniform => put("rho.kind", "uniform".into()),
        RhoSpec::Gaussian { center, width } => {
            put("rho.kind", "gaussian".into());
            put("rho.center", format!("{center:?}"));
            put("rho.width", format!("{width:?}"));
        }
        RhoSpec::Born => put("rho.kind", "born".into()),
    }
    put("ensemble.size", cfg.ensemble_size.to_string());
    put("ensemble.seed", cfg.seed.to_string());
    put("ensemble.bandwidth", format!("{:?}", cfg.bandwidth));
    put("time.dt", format!("{:?}", cfg.dt));
    put("time.steps", cfg.steps.to_string());
    put("monitor.interval", cfg.sample_interval.to_string());
    let points: Vec<String> = cfg
        .coarse_cells
        .iter()
        .map(|c| (g.n_points() / c).to_string())
        .collect();
    put("monitor.coarse_points", points.join(","));
    put("monitor.snapshot_interval", cfg.snapshot_interval.to_string());
    put("run.kind", cfg.kind.as_str().into());
    put("run.coupling", cfg.coupling.name().into());
    put("run.t_reverse", format!("{:?}", cfg.t_reverse));
    if let Coupling::Manufactured {
        amplitude,
        wavenumber,
        omega,
    } = cfg.coupling
    {
        put("manufactured.amplitude", format!("{amplitude:?}"));
        put("manufactured.wavenumber", format!("{wavenumber:?}"));
        put("manufactured.omega", format!("{omega:?}"));
    }
    s
}
