//! Diagnostic functionals of a density/wavefield pair.

use crate::error::{Error, Result};
use crate::numerics::{integrate, RealField};

/// Relative level below which a field value counts as zero inside the
/// H integrands.
pub const MASK_FLOOR: f64 = 1e-12;

/// One time sample of every monitored quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorRecord {
    pub time: f64,
    pub h_q: f64,
    /// `(cells, H̄)` for each configured coarse-graining.
    pub h_bar: Vec<(usize, f64)>,
    pub norm: f64,
    pub l1_dist: f64,
    pub dh_dt_analytic: f64,
    pub dh_dt_numeric: f64,
    pub continuity_residual: f64,
    pub floored_points: usize,
}

impl MonitorRecord {
    pub fn h_bar_at(&self, cells: usize) -> Option<f64> {
        self.h_bar.iter().find(|(c, _)| *c == cells).map(|&(_, h)| h)
    }
}

/// `H_q = ∫(ρ - |ψ|²) ln(ρ/|ψ|²)`.
///
/// Both arguments of the logarithm are floored at `MASK_FLOOR` times the
/// larger field maximum, so nodes where both fields vanish contribute zero
/// and the integrand keeps the sign of `ρ - |ψ|²` everywhere.
pub fn h_function(rho: &RealField, psi_sq: &RealField) -> Result<f64> {
    let floor = MASK_FLOOR * rho.max().max(psi_sq.max());
    let integrand = rho.zip_map(psi_sq, |r, p| {
        let (lr, lp) = (r.max(floor), p.max(floor));
        if lr == lp {
            0.0
        } else {
            (r - p) * (lr / lp).ln()
        }
    })?;
    Ok(integrate(&integrand))
}

/// `dH_q/dt = ∫ (J/f_q)(f_q - 1 + ln f_q)|ψ|²` with `J = 2g f_q`,
/// `g = α(1 - f_q)`, i.e. the integrand `-2α(f_q - 1)(f_q - 1 + ln f_q)|ψ|²`,
/// which is nonpositive at every node.
pub fn dh_dt_analytic(fq: &RealField, psi_sq: &RealField, alpha: f64) -> Result<f64> {
    let integrand = fq.zip_map(psi_sq, |f, p| {
        let j_over_f = 2.0 * alpha * (1.0 - f);
        j_over_f * (f - 1.0 + f.ln()) * p
    })?;
    Ok(integrate(&integrand))
}

/// Forward difference of `h_q` between two samples.
pub fn dh_dt_numeric(earlier: &MonitorRecord, later: &MonitorRecord) -> Result<f64> {
    let dt = later.time - earlier.time;
    if dt == 0.0 {
        return Err(Error::IdenticalTimestamps(earlier.time));
    }
    Ok((later.h_q - earlier.h_q) / dt)
}

/// Fills `dh_dt_numeric` on a time series: centred differences inside,
/// one-sided at both ends.
pub fn fill_numeric_derivative(records: &mut [MonitorRecord]) -> Result<()> {
    let n = records.len();
    if n < 2 {
        if let Some(r) = records.first_mut() {
            r.dh_dt_numeric = 0.0;
        }
        return Ok(());
    }
    let slopes: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            dh_dt_numeric(&records[a], &records[b])
        })
        .collect::<Result<_>>()?;
    for (r, s) in records.iter_mut().zip(slopes) {
        r.dh_dt_numeric = s;
    }
    Ok(())
}

/// Ehrenfest coarse-graining: every node replaced by the mean of its cell.
pub fn coarse_grain(f: &RealField, cells: usize) -> Result<RealField> {
    let width = f.grid().cell_width(cells)?;
    let mut out = f.clone();
    for chunk in out.values_mut().chunks_mut(width) {
        let mean = chunk.iter().sum::<f64>() / width as f64;
        chunk.iter_mut().for_each(|v| *v = mean);
    }
    Ok(out)
}

/// `H̄`: the H-function of the coarse-grained pair.
pub fn h_bar(rho: &RealField, psi_sq: &RealField, cells: usize) -> Result<f64> {
    h_function(&coarse_grain(rho, cells)?, &coarse_grain(psi_sq, cells)?)
}

/// `∫|ρ - |ψ|²| dx`.
pub fn l1_distance(rho: &RealField, psi_sq: &RealField) -> Result<f64> {
    Ok(integrate(&rho.zip_map(psi_sq, |a, b| (a - b).abs())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SpatialGrid;
    use proptest::prelude::*;

    fn grid(n: usize) -> SpatialGrid {
        SpatialGrid::periodic(n, 0.0, 1.0).unwrap()
    }

    fn record(time: f64, h_q: f64) -> MonitorRecord {
        MonitorRecord {
            time,
            h_q,
            h_bar: vec![],
            norm: 1.0,
            l1_dist: 0.0,
            dh_dt_analytic: 0.0,
            dh_dt_numeric: 0.0,
            continuity_residual: 0.0,
            floored_points: 0,
        }
    }

    /// Midpoint-rule quadrature of `(X - Y) ln(X/Y)` for closed forms, used
    /// as an independent check of the grid functional.
    fn quadrature(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn h_of_equal_fields_is_zero() {
        let g = grid(64);
        let p = RealField::from_fn(g, |x| 1.0 + 0.5 * (6.0 * x).sin());
        assert_eq!(h_function(&p, &p).unwrap(), 0.0);
        assert_eq!(l1_distance(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn h_of_uniform_against_linear_ramp() {
        let n = 4096;
        let g = grid(n);
        let rho = RealField::filled(g, 1.0);
        // sample at cell midpoints, matching the oracle's nodes
        let h = 1.0 / n as f64;
        let p = RealField::new(g, (0..n).map(|j| 2.0 * (j as f64 + 0.5) * h).collect()).unwrap();
        let value = h_function(&rho, &p).unwrap();
        let oracle = quadrature(|x| (1.0 - 2.0 * x) * (1.0 / (2.0 * x)).ln(), 0.0, 1.0, n);
        assert!((value - oracle).abs() < 1e-12, "{value} vs {oracle}");
        // the integral itself converges to 1/2 + ... ; check against a much finer oracle
        let fine = quadrature(|x| (1.0 - 2.0 * x) * (1.0 / (2.0 * x)).ln(), 0.0, 1.0, 1 << 22);
        assert!((value - fine).abs() < 1e-3);
    }

    #[test]
    fn h_two_cell_case() {
        let g = SpatialGrid::periodic(8, 0.0, 1.0).unwrap();
        // two cells of width 1/2, each spanning four nodes
        let rho = RealField::new(g, vec![0.8, 0.8, 0.8, 0.8, 0.2, 0.2, 0.2, 0.2]).unwrap();
        let p = RealField::filled(g, 0.5);
        let oracle = 0.5 * (0.3 * (0.8f64 / 0.5).ln() + (-0.3) * (0.2f64 / 0.5).ln());
        assert!((h_function(&rho, &p).unwrap() - oracle).abs() < 1e-15);
    }

    #[test]
    fn h_with_zeros_stays_finite() {
        let g = grid(16);
        let mut rho = RealField::filled(g, 1.0);
        rho.values_mut()[3] = 0.0;
        let p = RealField::filled(g, 1.0);
        let h = h_function(&rho, &p).unwrap();
        assert!(h.is_finite() && h > 0.0);
        let both_zero = RealField::filled(g, 0.0);
        assert_eq!(h_function(&both_zero, &both_zero).unwrap(), 0.0);
    }

    #[test]
    fn dh_dt_at_equilibrium_is_zero() {
        let g = grid(32);
        let one = RealField::filled(g, 1.0);
        assert_eq!(dh_dt_analytic(&one, &one, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn dh_dt_uniform_double_ratio() {
        // α = ½, f_q = 2: J/f_q = 2α(1 - 2) = -1, integrand -(1 + ln 2)
        let g = grid(32);
        let fq = RealField::filled(g, 2.0);
        let p = RealField::filled(g, 1.0);
        let v = dh_dt_analytic(&fq, &p, 0.5).unwrap();
        assert!((v + (1.0 + 2f64.ln())).abs() < 1e-13);
        assert!((v + 1.6931471805599454).abs() < 1e-13);
    }

    #[test]
    fn numeric_derivative() {
        assert_eq!(dh_dt_numeric(&record(0.0, 2.0), &record(0.1, 2.0)).unwrap(), 0.0);
        assert!(matches!(
            dh_dt_numeric(&record(0.3, 1.0), &record(0.3, 2.0)),
            Err(Error::IdenticalTimestamps(_))
        ));
        let dt = 0.01;
        let mut series: Vec<_> = (-1..=1).map(|i| record(i as f64 * dt, (-(i as f64) * dt).exp())).collect();
        fill_numeric_derivative(&mut series).unwrap();
        assert!((series[1].dh_dt_numeric + 1.0).abs() < dt * dt);
    }

    #[test]
    fn coarse_grain_properties() {
        let g = grid(16);
        let step = RealField::from_fn(g, |x| if x < 0.5 { 1.0 } else { 3.0 });
        assert_eq!(coarse_grain(&step, 2).unwrap(), step);
        let f = RealField::new(g, (0..16).map(|i| i as f64).collect()).unwrap();
        let c = coarse_grain(&f, 8).unwrap();
        assert_eq!(c.values()[0], 0.5);
        assert_eq!(c.values()[1], 0.5);
        assert!((integrate(&c) - integrate(&f)).abs() < 1e-14);
        assert!(matches!(coarse_grain(&f, 3), Err(Error::CoarseCells { .. })));
        assert!(coarse_grain(&f, 0).is_err());
    }

    #[test]
    fn h_bar_vanishes_when_cell_means_agree() {
        let g = grid(16);
        let rho = RealField::new(g, (0..16).map(|i| if i % 2 == 0 { 0.5 } else { 1.5 }).collect()).unwrap();
        let p = RealField::filled(g, 1.0);
        assert!(h_function(&rho, &p).unwrap() > 0.0);
        assert_eq!(h_bar(&rho, &p, 8).unwrap(), 0.0);
        assert_eq!(h_bar(&p, &p, 4).unwrap(), 0.0);
    }

    #[test]
    fn l1_of_uniform_against_ramp() {
        let n = 4096;
        let g = grid(n);
        let h = 1.0 / n as f64;
        let rho = RealField::filled(g, 1.0);
        let p = RealField::new(g, (0..n).map(|j| 2.0 * (j as f64 + 0.5) * h).collect()).unwrap();
        assert!((l1_distance(&rho, &p).unwrap() - 0.5).abs() < 1e-6);
    }

    fn field_pair(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            proptest::collection::vec(0.0..5.0f64, n),
            proptest::collection::vec(0.0..5.0f64, n),
        )
    }

    proptest! {
        #[test]
        fn h_is_nonnegative((a, b) in field_pair(32)) {
            let g = grid(32);
            let h = h_function(&RealField::new(g, a).unwrap(), &RealField::new(g, b).unwrap()).unwrap();
            prop_assert!(h >= 0.0);
        }

        #[test]
        fn coarser_h_bar_never_exceeds_finer((a, b) in field_pair(64)) {
            let g = grid(64);
            let (rho, p) = (RealField::new(g, a).unwrap(), RealField::new(g, b).unwrap());
            let fine = h_function(&rho, &p).unwrap();
            let mut prev = fine;
            for cells in [32, 16, 8, 4, 2, 1] {
                let hb = h_bar(&rho, &p, cells).unwrap();
                prop_assert!(hb <= prev + 1e-12 * fine.max(1.0));
                prev = hb;
            }
        }

        #[test]
        fn dh_dt_is_nonpositive(f in proptest::collection::vec(1e-3..1e3f64, 32), p in proptest::collection::vec(0.0..3.0f64, 32), alpha in 0.0..2.0f64) {
            let g = grid(32);
            let v = dh_dt_analytic(&RealField::new(g, f).unwrap(), &RealField::new(g, p).unwrap(), alpha).unwrap();
            prop_assert!(v <= 0.0);
        }

        #[test]
        fn l1_triangle_inequality((a, b) in field_pair(16), c in proptest::collection::vec(0.0..5.0f64, 16)) {
            let g = grid(16);
            let (a, b, c) = (RealField::new(g, a).unwrap(), RealField::new(g, b).unwrap(), RealField::new(g, c).unwrap());
            let ab = l1_distance(&a, &b).unwrap();
            let bc = l1_distance(&b, &c).unwrap();
            let ac = l1_distance(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
