//! Plain comma-separated point files.
//!
//! One point per line, `.` as decimal separator. An optional first line
//! `# labels=last` marks the final column as an integer class label. Other
//! lines starting with `#` and blank lines are ignored.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::DataSet;
use crate::error::{CamlError, Result};
use crate::scalar::{lit, Real};

const LABEL_HEADER: &str = "# labels=last";

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| CamlError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Serializes a matrix (one row per line) with optional trailing labels.
pub fn write_matrix_csv<T: Real>(path: &Path, m: &DMatrix<T>, labels: Option<&[i64]>) -> Result<()> {
    let mut out = String::with_capacity(m.nrows() * m.ncols() * 24);
    if labels.is_some() {
        out.push_str(LABEL_HEADER);
        out.push('\n');
    }
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            // Display of f32/f64 is the shortest string that round-trips.
            write!(out, "{}", m[(i, j)]).unwrap();
        }
        if let Some(l) = labels {
            write!(out, ",{}", l[i]).unwrap();
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn save_csv<T: Real>(data: &DataSet<T>, path: &Path) -> Result<()> {
    write_matrix_csv(path, &data.points, data.labels.as_deref())
}

pub fn load_csv<T: Real>(path: &Path) -> Result<DataSet<T>> {
    let text = std::fs::read_to_string(path).map_err(|source| CamlError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(&text, &name).map_err(|message| CamlError::Parse {
        path: path.to_path_buf(),
        message,
    })
}

/// Parses CSV text; errors are plain messages so callers can attach a path.
pub fn parse_csv<T: Real>(text: &str, name: &str) -> std::result::Result<DataSet<T>, String> {
    let mut labeled = false;
    let mut width: Option<usize> = None;
    let mut values: Vec<T> = Vec::new();
    let mut labels: Vec<i64> = Vec::new();
    let mut rows = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let k = lineno + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if rows == 0 && comment.trim().eq_ignore_ascii_case("labels=last") {
                labeled = true;
            }
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        match width {
            None => {
                if labeled && cells.len() < 2 {
                    return Err(format!("line {k}: labeled rows need at least one coordinate"));
                }
                width = Some(cells.len());
            }
            Some(w) if w != cells.len() => {
                return Err(format!("ragged row at line {k} ({} cells, expected {w})", cells.len()));
            }
            _ => {}
        }
        let ncoord = if labeled { cells.len() - 1 } else { cells.len() };
        for (c, cell) in cells[..ncoord].iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| format!("non-numeric cell `{cell}` at line {k}, column {}", c + 1))?;
            if !v.is_finite() {
                return Err(format!("non-finite value `{cell}` at line {k}, column {}", c + 1));
            }
            values.push(lit(v));
        }
        if labeled {
            let cell = cells[ncoord];
            let l: i64 = cell
                .parse()
                .map_err(|_| format!("non-integer label `{cell}` at line {k}"))?;
            labels.push(l);
        }
        rows += 1;
    }
    let Some(width) = width else {
        return Err("empty file".to_string());
    };
    let ncoord = if labeled { width - 1 } else { width };
    let points = DMatrix::from_row_slice(rows, ncoord, &values);
    DataSet::new(points, labeled.then_some(labels), name).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::DataSet;
    use proptest::prelude::*;

    #[test]
    fn labeled_rows_parse() {
        let ds: DataSet<f64> = parse_csv("# labels=last\n1,2,3,0\n4,5,6,1\n7,8,9,0\n", "t").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 3);
        assert_eq!(ds.labels, Some(vec![0, 1, 0]));
        assert_eq!(ds.points[(1, 2)], 6.0);
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = parse_csv::<f64>("1,2,3\n4,5\n", "t").unwrap_err();
        assert!(err.starts_with("ragged row at line 2"), "{err}");
    }

    #[test]
    fn non_numeric_and_empty_are_errors() {
        let err = parse_csv::<f64>("1,2\n3,abc\n", "t").unwrap_err();
        assert!(err.contains("non-numeric"), "{err}");
        assert_eq!(parse_csv::<f64>("", "t").unwrap_err(), "empty file");
        assert_eq!(parse_csv::<f64>("# labels=last\n\n", "t").unwrap_err(), "empty file");
    }

    #[test]
    fn save_load_random_matrix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = DMatrix::<f64>::from_fn(10, 3, |i, j| ((i * 31 + j * 7) as f64).sin() * 1e3 / (j as f64 + 0.3));
        let ds = DataSet::new(m, None, "m").unwrap();
        save_csv(&ds, &path).unwrap();
        let back: DataSet<f64> = load_csv(&path).unwrap();
        for (a, b) in ds.points.iter().zip(back.points.iter()) {
            assert!((a - b).abs() <= 1e-15 * a.abs());
        }
        assert_eq!(back.labels, None);
    }

    proptest! {
        #[test]
        fn round_trip_preserves_points_and_labels(
            rows in 1usize..12,
            cols in 1usize..5,
            seed in any::<u64>(),
            labeled in any::<bool>(),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.csv");
            let mut s = seed | 1;
            let mut next = || { s ^= s << 13; s ^= s >> 7; s ^= s << 17; s };
            let m = DMatrix::<f64>::from_fn(rows, cols, |_, _| {
                let bits = next();
                (bits as f64 / u64::MAX as f64 - 0.5) * 10f64.powi((bits % 13) as i32 - 6)
            });
            let labels = labeled.then(|| (0..rows).map(|i| (next() % 7) as i64 - 3 + i as i64).collect::<Vec<_>>());
            let ds = DataSet::new(m, labels, "p").unwrap();
            save_csv(&ds, &path).unwrap();
            let back: DataSet<f64> = load_csv(&path).unwrap();
            prop_assert_eq!(&back.labels, &ds.labels);
            for (a, b) in ds.points.iter().zip(back.points.iter()) {
                prop_assert!((a - b).abs() <= 1e-15 * a.abs());
            }
        }
    }
}
