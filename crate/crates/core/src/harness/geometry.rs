//! Per-view geometry as CSV with the CTF table in trailing comment lines.
//!
//! ```text
//! index,phi,theta,psi,tx,ty,ctf_index
//! 0,1.2345678901234567e0,...,0
//! # ctf 0 1.0000000000000000e0 1.0000000000000000e2 1.0000000000000000e1
//! ```
//!
//! Angles are radians, offsets pixels; floats carry 17 significant digits. A
//! table entry of `# ctf <index> identity` means no CTF.

use std::fmt::Write as _;
use std::path::Path;

use crate::ctf::{CtfModel, CtfParams};
use crate::error::{Error, Result};
use crate::harness::write_atomic;
use crate::stack::ViewGeometry;

pub const HEADER: &str = "index,phi,theta,psi,tx,ty,ctf_index";

#[derive(Clone, Debug, PartialEq)]
pub struct GeometryFile {
    pub views: Vec<ViewGeometry>,
    pub ctf_table: Vec<CtfModel>,
}

impl GeometryFile {
    pub fn new(views: Vec<ViewGeometry>, ctf_table: Vec<CtfModel>) -> Result<Self> {
        let g = Self { views, ctf_table };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ctf_table.is_empty() {
            return Err(Error::Validation("geometry has an empty CTF table".into()));
        }
        for (i, v) in self.views.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Validation(format!("view {i} has non-finite geometry")));
            }
            if v.ctf_index >= self.ctf_table.len() {
                return Err(Error::Validation(format!(
                    "view {i} refers to CTF {} but the table has {} entries",
                    v.ctf_index,
                    self.ctf_table.len()
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(HEADER);
        out.push('\n');
        for (i, v) in self.views.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                v.euler[0], v.euler[1], v.euler[2], v.offset[0], v.offset[1], v.ctf_index
            );
        }
        for (i, m) in self.ctf_table.iter().enumerate() {
            match m {
                CtfModel::Identity => {
                    let _ = writeln!(out, "# ctf {i} identity");
                }
                CtfModel::Radial(p) => {
                    let _ = writeln!(out, "# ctf {i} {:.16e} {:.16e} {:.16e}", p.alpha, p.dz_lambda, p.cs_lambda3);
                }
            }
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), message: format!("line {line}: {msg}") };
        let mut views = Vec::new();
        let mut table: Vec<(usize, CtfModel)> = Vec::new();
        let mut seen_header = false;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let fields: Vec<&str> = comment.split_whitespace().collect();
                if fields.first() != Some(&"ctf") {
                    continue;
                }
                let index: usize = fields
                    .get(1)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err(line_no, "CTF entry needs an index".into()))?;
                let model = match &fields[2..] {
                    ["identity"] => CtfModel::Identity,
                    [a, d, c] => {
                        let num = |s: &str| s.parse::<f64>().map_err(|e| err(line_no, format!("bad CTF value '{s}': {e}")));
                        CtfModel::Radial(CtfParams::new(num(a)?, num(d)?, num(c)?).map_err(|e| err(line_no, e.to_string()))?)
                    }
                    _ => return Err(err(line_no, "CTF entry needs alpha, dz_lambda and cs_lambda3".into())),
                };
                table.push((index, model));
                continue;
            }
            if !seen_header {
                if line != HEADER {
                    return Err(err(line_no, format!("expected header '{HEADER}'")));
                }
                seen_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 7 {
                return Err(err(line_no, format!("expected 7 columns, found {}", fields.len())));
            }
            let index: usize = fields[0].parse().map_err(|e| err(line_no, format!("bad index: {e}")))?;
            if index != views.len() {
                return Err(err(line_no, format!("expected view index {}, found {index}", views.len())));
            }
            let mut vals = [0.0; 5];
            for (v, s) in vals.iter_mut().zip(&fields[1..6]) {
                *v = s.parse().map_err(|e| err(line_no, format!("bad number '{s}': {e}")))?;
            }
            let ctf_index = fields[6].parse().map_err(|e| err(line_no, format!("bad ctf_index: {e}")))?;
            views.push(ViewGeometry::new([vals[0], vals[1], vals[2]], [vals[3], vals[4]], ctf_index));
        }
        if !seen_header {
            return Err(err(0, "missing header row".into()));
        }
        table.sort_by_key(|(i, _)| *i);
        for (pos, (i, _)) in table.iter().enumerate() {
            if *i != pos {
                return Err(err(0, format!("CTF table indices must run 0..n, found {i} at position {pos}")));
            }
        }
        let file = Self { views, ctf_table: table.into_iter().map(|(_, m)| m).collect() };
        file.validate().map_err(|e| err(0, e.to_string()))?;
        Ok(file)
    }
}

pub fn write_geometry(path: &Path, geometry: &GeometryFile) -> Result<()> {
    geometry.validate()?;
    write_atomic(path, geometry.to_csv().as_bytes())
}

pub fn read_geometry(path: &Path) -> Result<GeometryFile> {
    let text = std::fs::read_to_string(path)?;
    GeometryFile::parse(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> GeometryFile {
        GeometryFile::new(
            vec![
                ViewGeometry::new([0.1, 2.0 / 3.0, 6.2], [0.5, 1.0 / 7.0], 0),
                ViewGeometry::new([std::f64::consts::PI, 1e-300, 0.0], [0.0, 1.6], 1),
            ],
            vec![CtfModel::Radial(CtfParams::default()), CtfModel::Identity],
        )
        .unwrap()
    }

    #[test]
    fn csv_layout() {
        let text = sample().to_csv();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(HEADER));
        assert!(lines.next().unwrap().starts_with("0,1.0000000000000001e-1,"));
        assert!(text.contains("# ctf 0 1.0000000000000000e0 1.0000000000000000e2 1.0000000000000000e1"));
        assert!(text.contains("# ctf 1 identity"));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        write_geometry(&path, &sample()).unwrap();
        assert_eq!(read_geometry(&path).unwrap(), sample());
    }

    #[test]
    fn rejects_bad_ctf_index_and_columns() {
        let p = Path::new("x.csv");
        let text = format!("{HEADER}\n0,0,0,0,0,0,3\n# ctf 0 identity\n");
        assert!(GeometryFile::parse(&text, p).is_err());
        let text = format!("{HEADER}\n0,0,0,0,0\n# ctf 0 identity\n");
        assert!(GeometryFile::parse(&text, p).is_err());
        let text = "0,0,0,0,0,0,0\n";
        assert!(GeometryFile::parse(text, p).is_err());
        let text = format!("{HEADER}\n1,0,0,0,0,0,0\n# ctf 0 identity\n");
        assert!(GeometryFile::parse(&text, p).is_err());
    }

    proptest! {
        #[test]
        fn full_precision_round_trip(vals in prop::collection::vec((any::<f64>(), any::<f64>(), any::<f64>(), -1e3f64..1e3, -1e3f64..1e3), 1..20)) {
            let views: Vec<ViewGeometry> = vals
                .into_iter()
                .filter(|v| v.0.is_finite() && v.1.is_finite() && v.2.is_finite())
                .map(|(a, b, c, x, y)| ViewGeometry::new([a, b, c], [x, y], 0))
                .collect();
            let g = GeometryFile::new(views, vec![CtfModel::Radial(CtfParams::new(0.3, -2.5, 1e-7).unwrap())]).unwrap();
            let back = GeometryFile::parse(&g.to_csv(), Path::new("p.csv")).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}
