//! Cell-centered snapshot files.
//!
//! CSV is the canonical format: `#`-prefixed header lines, a column line and
//! one row per cell in row-major order (`i` fastest). The legacy VTK writer
//! emits the same arrays as `CELL_DATA` of a `STRUCTURED_POINTS` dataset.
//! Numbers use the shortest representation that reads back to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use muskat_core::harness::Snapshot;
use muskat_core::{CellMask, Field, StaggeredGrid};

/// Names of the cell arrays, in file order.
pub const FIELDS: [&str; 7] = ["rho", "p", "u", "v", "mu", "phase", "chi"];

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: line {line}: {message}")]
    Format { path: String, line: usize, message: String },
}

/// A self-describing set of cell arrays on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotData {
    pub nx: usize,
    pub ny: usize,
    pub h1: f64,
    pub h2: f64,
    pub t: f64,
    pub step: usize,
    /// `(name, values)` with `nx * ny` row-major values each.
    pub fields: Vec<(String, Vec<f64>)>,
}

fn row_major(f: &Field) -> Vec<f64> {
    f.interior()
}

impl SnapshotData {
    /// Center values of a solver snapshot; face velocities are averaged to
    /// the cell centers.
    pub fn from_snapshot(s: &Snapshot, grid: &StaggeredGrid, mask: &CellMask) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let mut u = Vec::with_capacity(nx * ny);
        let mut v = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                u.push(0.5 * (s.u[(i, j)] + s.u[(i + 1, j)]));
                v.push(0.5 * (s.v[(i, j)] + s.v[(i, j + 1)]));
            }
        }
        let chi = mask.chi().iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
        let fields = vec![
            ("rho".to_string(), row_major(&s.rho)),
            ("p".to_string(), row_major(&s.p)),
            ("u".to_string(), u),
            ("v".to_string(), v),
            ("mu".to_string(), row_major(&s.mu)),
            ("phase".to_string(), row_major(&s.phase)),
            ("chi".to_string(), chi),
        ];
        Self { nx, ny, h1: grid.h1, h2: grid.h2, t: s.t, step: s.step, fields }
    }

    pub fn field(&self, name: &str) -> Option<&[f64]> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    fn check(&self) {
        for (name, values) in &self.fields {
            assert_eq!(values.len(), self.nx * self.ny, "field {name} has the wrong length");
        }
    }
}

pub fn to_csv(data: &SnapshotData) -> String {
    data.check();
    let mut s = String::new();
    let _ = writeln!(s, "# muskat snapshot");
    let _ = writeln!(s, "# nx = {}", data.nx);
    let _ = writeln!(s, "# ny = {}", data.ny);
    let _ = writeln!(s, "# h1 = {:?}", data.h1);
    let _ = writeln!(s, "# h2 = {:?}", data.h2);
    let _ = writeln!(s, "# t = {:?}", data.t);
    let _ = writeln!(s, "# step = {}", data.step);
    let _ = writeln!(s, "# x2 points downward, gravity along +x2, row j = 0 at the top");
    let names: Vec<&str> = data.fields.iter().map(|(n, _)| n.as_str()).collect();
    let _ = writeln!(s, "i,j,x1,x2,{}", names.join(","));
    for j in 0..data.ny {
        for i in 0..data.nx {
            let c = j * data.nx + i;
            let _ = write!(s, "{i},{j},{:?},{:?}", (i as f64 + 0.5) * data.h1, (j as f64 + 0.5) * data.h2);
            for (_, values) in &data.fields {
                let _ = write!(s, ",{:?}", values[c]);
            }
            s.push('\n');
        }
    }
    s
}

pub fn to_vtk(data: &SnapshotData) -> String {
    data.check();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "muskat snapshot t={:?} step={} (x2 points downward)", data.t, data.step);
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {} {} 1", data.nx + 1, data.ny + 1);
    let _ = writeln!(s, "ORIGIN 0 0 0");
    let _ = writeln!(s, "SPACING {:?} {:?} 1", data.h1, data.h2);
    let _ = writeln!(s, "CELL_DATA {}", data.nx * data.ny);
    for (name, values) in &data.fields {
        let _ = writeln!(s, "SCALARS {name} double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for row in values.chunks(data.nx) {
            let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
    }
    s
}

fn write_file(path: &Path, text: &str) -> Result<(), SnapshotError> {
    fs::write(path, text).map_err(|source| SnapshotError::Io { path: path.display().to_string(), source })
}

fn read_file(path: &Path) -> Result<String, SnapshotError> {
    fs::read_to_string(path).map_err(|source| SnapshotError::Io { path: path.display().to_string(), source })
}

pub fn write_csv(data: &SnapshotData, path: &Path) -> Result<(), SnapshotError> {
    write_file(path, &to_csv(data))
}

pub fn write_vtk(data: &SnapshotData, path: &Path) -> Result<(), SnapshotError> {
    write_file(path, &to_vtk(data))
}

struct Reader<'a> {
    path: &'a str,
}

impl Reader<'_> {
    fn err(&self, line: usize, message: impl Into<String>) -> SnapshotError {
        SnapshotError::Format { path: self.path.to_string(), line, message: message.into() }
    }

    fn num<T: std::str::FromStr>(&self, line: usize, s: &str) -> Result<T, SnapshotError> {
        s.trim().parse().map_err(|_| self.err(line, format!("cannot parse {s:?}")))
    }
}

pub fn parse_csv(text: &str, path: &str) -> Result<SnapshotData, SnapshotError> {
    let r = Reader { path };
    let (mut nx, mut ny, mut h1, mut h2, mut t, mut step) = (None, None, None, None, None, None);
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let mut columns = None;
    for (no, line) in lines.by_ref() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                match k.trim() {
                    "nx" => nx = Some(r.num::<usize>(no, v)?),
                    "ny" => ny = Some(r.num::<usize>(no, v)?),
                    "h1" => h1 = Some(r.num::<f64>(no, v)?),
                    "h2" => h2 = Some(r.num::<f64>(no, v)?),
                    "t" => t = Some(r.num::<f64>(no, v)?),
                    "step" => step = Some(r.num::<usize>(no, v)?),
                    _ => {}
                }
            }
            continue;
        }
        columns = Some((no, line));
        break;
    }
    let (cno, columns) = columns.ok_or_else(|| r.err(1, "missing column line"))?;
    let names: Vec<&str> = columns.split(',').collect();
    if names.len() < 4 || names[..4] != ["i", "j", "x1", "x2"] {
        return Err(r.err(cno, "columns must start with i,j,x1,x2"));
    }
    let missing = |k: &str| r.err(cno, format!("missing header `{k}`"));
    let nx = nx.ok_or_else(|| missing("nx"))?;
    let ny = ny.ok_or_else(|| missing("ny"))?;
    let mut fields: Vec<(String, Vec<f64>)> = names[4..].iter().map(|n| (n.to_string(), vec![f64::NAN; nx * ny])).collect();
    let mut seen = 0;
    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != names.len() {
            return Err(r.err(no, format!("expected {} values, found {}", names.len(), cells.len())));
        }
        let i: usize = r.num(no, cells[0])?;
        let j: usize = r.num(no, cells[1])?;
        if i >= nx || j >= ny {
            return Err(r.err(no, format!("cell ({i}, {j}) outside {nx}x{ny}")));
        }
        for (k, (_, values)) in fields.iter_mut().enumerate() {
            values[j * nx + i] = r.num(no, cells[4 + k])?;
        }
        seen += 1;
    }
    if seen != nx * ny {
        return Err(r.err(cno, format!("expected {} rows, found {seen}", nx * ny)));
    }
    Ok(SnapshotData {
        nx,
        ny,
        h1: h1.ok_or_else(|| missing("h1"))?,
        h2: h2.ok_or_else(|| missing("h2"))?,
        t: t.ok_or_else(|| missing("t"))?,
        step: step.ok_or_else(|| missing("step"))?,
        fields,
    })
}

pub fn parse_vtk(text: &str, path: &str) -> Result<SnapshotData, SnapshotError> {
    let r = Reader { path };
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() < 8 || !lines[0].starts_with("# vtk DataFile") {
        return Err(r.err(1, "not a legacy VTK file"));
    }
    let mut t = None;
    let mut step = None;
    for tok in lines[1].split_whitespace() {
        if let Some(v) = tok.strip_prefix("t=") {
            t = Some(r.num::<f64>(2, v)?);
        } else if let Some(v) = tok.strip_prefix("step=") {
            step = Some(r.num::<usize>(2, v)?);
        }
    }
    if lines[2].trim() != "ASCII" || lines[3].trim() != "DATASET STRUCTURED_POINTS" {
        return Err(r.err(3, "expected ASCII STRUCTURED_POINTS"));
    }
    let words = |k: usize, key: &str| -> Result<Vec<&str>, SnapshotError> {
        let w: Vec<&str> = lines[k].split_whitespace().collect();
        if w.first() != Some(&key) {
            return Err(r.err(k + 1, format!("expected {key}")));
        }
        Ok(w[1..].to_vec())
    };
    let dims = words(4, "DIMENSIONS")?;
    let spacing = words(6, "SPACING")?;
    if dims.len() != 3 || spacing.len() != 3 {
        return Err(r.err(5, "malformed DIMENSIONS or SPACING"));
    }
    let nx = r.num::<usize>(5, dims[0])?.checked_sub(1).ok_or_else(|| r.err(5, "DIMENSIONS must be positive"))?;
    let ny = r.num::<usize>(5, dims[1])?.checked_sub(1).ok_or_else(|| r.err(5, "DIMENSIONS must be positive"))?;
    let (h1, h2) = (r.num::<f64>(7, spacing[0])?, r.num::<f64>(7, spacing[1])?);
    let cells = words(7, "CELL_DATA")?;
    if cells.len() != 1 || r.num::<usize>(8, cells[0])? != nx * ny {
        return Err(r.err(8, format!("CELL_DATA must be {}", nx * ny)));
    }
    let mut fields = Vec::new();
    let mut k = 8;
    while k < lines.len() {
        let w: Vec<&str> = lines[k].split_whitespace().collect();
        if w.is_empty() {
            k += 1;
            continue;
        }
        if w[0] != "SCALARS" || w.len() < 2 {
            return Err(r.err(k + 1, "expected SCALARS"));
        }
        let name = w[1].to_string();
        k += 2;
        let mut values = Vec::with_capacity(nx * ny);
        while values.len() < nx * ny {
            let line = lines.get(k).ok_or_else(|| r.err(k, format!("field {name} is truncated")))?;
            for tok in line.split_whitespace() {
                values.push(r.num::<f64>(k + 1, tok)?);
            }
            k += 1;
        }
        if values.len() != nx * ny {
            return Err(r.err(k, format!("field {name} has {} values", values.len())));
        }
        fields.push((name, values));
    }
    Ok(SnapshotData { nx, ny, h1, h2, t: t.ok_or_else(|| r.err(2, "missing t="))?, step: step.ok_or_else(|| r.err(2, "missing step="))?, fields })
}

pub fn read_csv(path: &Path) -> Result<SnapshotData, SnapshotError> {
    parse_csv(&read_file(path)?, &path.display().to_string())
}

pub fn read_vtk(path: &Path) -> Result<SnapshotData, SnapshotError> {
    parse_vtk(&read_file(path)?, &path.display().to_string())
}
