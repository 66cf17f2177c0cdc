//! File writers: monitor CSV, field snapshots, gnuplot script, manifest.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use pilotwave::experiments::Snapshot;
use pilotwave::monitors::MonitorRecord;
use pilotwave::numerics::SpatialGrid;

pub const MONITOR_HEADER: &str =
    "t,h_q,h_bar_16,h_bar_32,h_bar_64,norm,l1_dist,dh_dt_analytic,dh_dt_numeric,continuity_residual,floored_points";

/// Points per coarse cell behind the three `h_bar` columns.
const COARSE_POINTS: [usize; 3] = [16, 32, 64];

/// 17 significant digits, enough to round-trip every `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn monitors_csv(records: &[MonitorRecord], grid: &SpatialGrid) -> String {
    let mut out = String::with_capacity(256 * (records.len() + 1));
    out.push_str(MONITOR_HEADER);
    out.push('\n');
    for r in records {
        let bars = COARSE_POINTS.map(|p| {
            let cells = grid.n_points() / p;
            r.h_bar_at(cells).map_or_else(|| "nan".to_string(), num)
        });
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            num(r.time),
            num(r.h_q),
            bars[0],
            bars[1],
            bars[2],
            num(r.norm),
            num(r.l1_dist),
            num(r.dh_dt_analytic),
            num(r.dh_dt_numeric),
            num(r.continuity_residual),
            r.floored_points
        );
    }
    out
}

pub fn snapshot_csv(s: &Snapshot) -> String {
    let grid = s.rho.grid();
    let mut out = String::new();
    let _ = writeln!(out, "# grid.boundary = {}", grid.boundary().as_str());
    let _ = writeln!(out, "# grid.n = {}", grid.n_points());
    let _ = writeln!(out, "# grid.x_min = {}", num(grid.x_min()));
    let _ = writeln!(out, "# grid.x_max = {}", num(grid.x_max()));
    let _ = writeln!(out, "# grid.spacing = {}", num(grid.spacing()));
    let _ = writeln!(out, "# step = {}", s.step);
    let _ = writeln!(out, "# t = {}", num(s.time));
    out.push_str("x,rho,psi_sq,f_q\n");
    for (j, ((r, p), f)) in s.rho.values().iter().zip(s.psi_sq.values()).zip(s.fq.values()).enumerate() {
        let _ = writeln!(out, "{},{},{},{}", num(grid.x(j)), num(*r), num(*p), num(*f));
    }
    out
}

pub fn snapshot_name(s: &Snapshot) -> String {
    format!("snapshot_{:08}.csv", s.step)
}

/// Gnuplot script plotting the H traces, the two `dH/dt` forms, and the
/// last snapshot. `monitor_files` are plotted on the same axes.
pub fn gnuplot_script(monitor_files: &[&str], last_snapshot: Option<&str>) -> String {
    let mut gp = String::new();
    gp.push_str("set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnheader\n");
    gp.push_str("set terminal pngcairo size 1200,900\nset output 'plots.png'\n");
    let panels = if last_snapshot.is_some() { 3 } else { 2 };
    let _ = writeln!(gp, "set multiplot layout {panels},1");
    gp.push_str("set xlabel 't'\nset logscale y\nset ylabel 'H'\n");
    let h: Vec<String> = monitor_files
        .iter()
        .map(|f| format!("'{f}' using 1:2 with lines, '{f}' using 1:4 with lines"))
        .collect();
    let _ = writeln!(gp, "plot {}", h.join(", "));
    gp.push_str("unset logscale y\nset ylabel 'dH/dt'\n");
    let d: Vec<String> = monitor_files
        .iter()
        .map(|f| format!("'{f}' using 1:8 with lines, '{f}' using 1:9 with points"))
        .collect();
    let _ = writeln!(gp, "plot {}", d.join(", "));
    if let Some(s) = last_snapshot {
        gp.push_str("set xlabel 'x'\nset ylabel 'density'\n");
        let _ = writeln!(gp, "plot '{s}' using 1:2 with lines, '{s}' using 1:3 with lines");
    }
    gp.push_str("unset multiplot\n");
    gp
}

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub version: String,
    pub status: String,
    pub diagnostic: Option<String>,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    pub wall_seconds: f64,
    /// Resolved config; feeding it back reproduces the run.
    pub config: String,
    pub files: Vec<FileEntry>,
}

/// Collects written files so the manifest can list their checksums.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> io::Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.written.push(FileEntry {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(contents.as_bytes())),
        });
        Ok(())
    }

    /// Writes `manifest.json`, which is not itself in the inventory.
    pub fn finish(mut self, mut manifest: Manifest) -> io::Result<()> {
        self.written.sort_by(|a, b| a.path.cmp(&b.path));
        manifest.files = self.written;
        let json = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
        fs::write(self.root.join("manifest.json"), json + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
    }

    #[test]
    fn header_has_eleven_columns() {
        assert_eq!(MONITOR_HEADER.split(',').count(), 11);
    }
}
