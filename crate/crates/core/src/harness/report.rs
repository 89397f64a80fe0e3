//! Plain-text outputs: result tables, cost histories and slice images.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Volume;
use crate::harness::write_atomic;
use crate::solver::CostRecord;

pub const REPORT_HEADER: &str = "dataset,psnr_db,subsample,method,nrmse_percent,wall_seconds";

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub psnr_db: f64,
    pub subsample: f64,
    pub method: String,
    pub nrmse_percent: f64,
    pub wall_seconds: f64,
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.3}",
            r.dataset, r.psnr_db, r.subsample, r.method, r.nrmse_percent, r.wall_seconds
        );
    }
    out
}

pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    write_atomic(path, report_csv(rows).as_bytes())
}

/// Fixed-width table with one row per (psnr, subsample) cell and one column per method.
pub fn report_table(rows: &[ReportRow]) -> String {
    let mut methods: Vec<&str> = Vec::new();
    let mut cells: Vec<(&str, f64, f64)> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
        if !cells.iter().any(|c| c.0 == r.dataset && c.1 == r.psnr_db && c.2 == r.subsample) {
            cells.push((&r.dataset, r.psnr_db, r.subsample));
        }
    }
    let mut out = format!("{:<10} {:>8} {:>9}", "dataset", "psnr_db", "subsample");
    for m in &methods {
        let _ = write!(out, " {:>12}", format!("{m} NRMSE%"));
    }
    out.push('\n');
    for (d, psnr, sub) in cells {
        let _ = write!(out, "{d:<10} {psnr:>8.2} {sub:>9.2}");
        for m in &methods {
            match rows.iter().find(|r| r.dataset == d && r.psnr_db == psnr && r.subsample == sub && r.method == *m) {
                Some(r) => {
                    let _ = write!(out, " {:>12.3}", r.nrmse_percent);
                }
                None => {
                    let _ = write!(out, " {:>12}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn cost_history_csv(history: &[CostRecord]) -> String {
    let mut out = String::from("iteration,cost,data_term,prior_term\n");
    for r in history {
        let _ = writeln!(out, "{},{:.16e},{:.16e},{:.16e}", r.iteration, r.cost, r.data_term, r.prior_term);
    }
    out
}

pub fn write_cost_history(path: &Path, history: &[CostRecord]) -> Result<()> {
    write_atomic(path, cost_history_csv(history).as_bytes())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "yz",
            Axis::Y => "xz",
            Axis::Z => "xy",
        }
    }
}

/// Plane of `volume` normal to `axis` at `index`, as (width, height, row-major
/// values with the first in-plane axis fastest).
pub fn cross_section(volume: &Volume, axis: Axis, index: usize) -> Result<(usize, usize, Vec<f64>)> {
    let g = volume.grid();
    let depth = match axis {
        Axis::X => g.nx,
        Axis::Y => g.ny,
        Axis::Z => g.nz,
    };
    if index >= depth {
        return Err(Error::Dimension(format!("slice {index} outside 0..{depth}")));
    }
    Ok(match axis {
        Axis::Z => (g.nx, g.ny, (0..g.ny).flat_map(|y| (0..g.nx).map(move |x| (x, y))).map(|(x, y)| volume.get(x, y, index)).collect()),
        Axis::Y => (g.nx, g.nz, (0..g.nz).flat_map(|z| (0..g.nx).map(move |x| (x, z))).map(|(x, z)| volume.get(x, index, z)).collect()),
        Axis::X => (g.ny, g.nz, (0..g.nz).flat_map(|z| (0..g.ny).map(move |y| (y, z))).map(|(y, z)| volume.get(index, y, z)).collect()),
    })
}

/// 8-bit binary PGM, linearly mapped from `[lo, hi]`, last row at the top.
pub fn pgm_bytes(width: usize, height: usize, values: &[f64], lo: f64, hi: f64) -> Result<Vec<u8>> {
    if values.len() != width * height {
        return Err(Error::Dimension(format!("{} values for a {width}x{height} image", values.len())));
    }
    if !(hi > lo) {
        return Err(Error::Domain(format!("empty display range [{lo}, {hi}]")));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    for row in values.chunks(width.max(1)).rev() {
        out.extend(row.iter().map(|v| (((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    Ok(out)
}

/// Central slice normal to z as a PGM.
pub fn slice_pgm(volume: &Volume, z: usize, lo: f64, hi: f64) -> Result<Vec<u8>> {
    let (w, h, values) = cross_section(volume, Axis::Z, z)?;
    pgm_bytes(w, h, &values, lo, hi)
}

/// Writes the three central cross-sections as `<stem>_xy.pgm`, `<stem>_xz.pgm`
/// and `<stem>_yz.pgm` in `dir`, returning the paths.
pub fn write_cross_sections(dir: &Path, stem: &str, volume: &Volume, lo: f64, hi: f64) -> Result<Vec<std::path::PathBuf>> {
    let g = volume.grid();
    let mut paths = Vec::new();
    for (axis, index) in [(Axis::Z, g.nz / 2), (Axis::Y, g.ny / 2), (Axis::X, g.nx / 2)] {
        let (w, h, values) = cross_section(volume, axis, index)?;
        let path = dir.join(format!("{stem}_{}.pgm", axis.name()));
        write_atomic(&path, &pgm_bytes(w, h, &values, lo, hi)?)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Display range spanning the values of `volume`, widened when constant.
pub fn value_range(volume: &Volume) -> (f64, f64) {
    let lo = volume.data().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = volume.max();
    if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn row(method: &str, psnr: f64, sub: f64, e: f64) -> ReportRow {
        ReportRow { dataset: "spheres".into(), psnr_db: psnr, subsample: sub, method: method.into(), nrmse_percent: e, wall_seconds: 1.0 }
    }

    #[test]
    fn csv_and_table() {
        let rows = vec![row("mbir", 6.02, 1.0, 10.0), row("pr", 6.02, 1.0, 20.0), row("mbir", 0.0, 0.5, 30.0)];
        let csv = report_csv(&rows);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with(REPORT_HEADER));
        assert!(csv.contains("spheres,6.02,1,pr,20.000000,1.000"));
        let table = report_table(&rows);
        assert_eq!(table.lines().count(), 3);
        assert!(table.lines().nth(2).unwrap().trim_end().ends_with('-'));
    }

    #[test]
    fn pgm_layout() {
        let g = GridSpec::new(3, 2, 1, 1.0).unwrap();
        let v = Volume::from_fn(g, |x, y, _| (x + 3 * y) as f64);
        let bytes = slice_pgm(&v, 0, 0.0, 5.0).unwrap();
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[153, 204, 255, 0, 51, 102]);
        assert!(slice_pgm(&v, 1, 0.0, 1.0).is_err());
        assert!(slice_pgm(&v, 0, 1.0, 1.0).is_err());
    }

    #[test]
    fn cross_sections_pick_planes() {
        let g = GridSpec::new(2, 3, 4, 1.0).unwrap();
        let v = Volume::from_fn(g, |x, y, z| (100 * x + 10 * y + z) as f64);
        let (w, h, xz) = cross_section(&v, Axis::Y, 2).unwrap();
        assert_eq!((w, h), (2, 4));
        assert_eq!(&xz[..4], &[20.0, 120.0, 21.0, 121.0]);
        let (w, h, yz) = cross_section(&v, Axis::X, 1).unwrap();
        assert_eq!((w, h), (3, 4));
        assert_eq!(&yz[..3], &[100.0, 110.0, 120.0]);
        assert!(cross_section(&v, Axis::Z, 4).is_err());
        let dir = tempfile::tempdir().unwrap();
        let paths = write_cross_sections(dir.path(), "v", &v, 0.0, 200.0).unwrap();
        assert_eq!(paths.len(), 3);
        assert!(paths[1].ends_with("v_xz.pgm"));
        assert_eq!(value_range(&Volume::zeros(g)), (0.0, 1.0));
    }

    #[test]
    fn history_csv() {
        let h = vec![CostRecord { iteration: 0, cost: 3.0, data_term: 2.0, prior_term: 1.0 }];
        let text = cost_history_csv(&h);
        assert_eq!(text.lines().nth(1).unwrap(), "0,3.0000000000000000e0,2.0000000000000000e0,1.0000000000000000e0");
    }
}
