//! Curve CSV files and atomic report writing.
//!
//! A curve file has the grid abscissae on its first row and one curve per
//! following row, all with the same number of comma-separated fields.
//! Numbers are written with 17 significant digits so a save/load round trip
//! reproduces every value exactly.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use kdepth::{CovOperator, FunctionalSample, Grid};
use nalgebra::DMatrix;

use crate::error::CliError;

/// Decimal rendering with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_row(path: &Path, row: usize, line: &str) -> Result<Vec<f64>, CliError> {
    line.split(',')
        .map(|field| {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| CliError::Parse {
                path: path.to_path_buf(),
                row,
                msg: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(CliError::Format {
                    path: path.to_path_buf(),
                    row,
                    msg: format!("non-finite value `{field}`"),
                });
            }
            Ok(v)
        })
        .collect()
}

/// Parses curve CSV text; `path` is only used in error messages.
pub fn parse_curves(path: &Path, text: &str) -> Result<FunctionalSample, CliError> {
    let mut rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    let (header_row, header) = rows.next().ok_or_else(|| CliError::Format {
        path: path.to_path_buf(),
        row: 1,
        msg: "empty file".into(),
    })?;
    let points = parse_row(path, header_row, header)?;
    if points.len() < 2 {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            row: header_row,
            msg: format!("need at least two grid abscissae, got {}", points.len()),
        });
    }
    if points.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            row: header_row,
            msg: "grid abscissae must be strictly increasing".into(),
        });
    }
    let m = points.len();
    let grid = Arc::new(Grid::from_points(points)?);
    let mut data = Vec::new();
    let mut count = 0;
    for (row, line) in rows {
        let values = parse_row(path, row, line)?;
        if values.len() != m {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                row,
                msg: format!("expected {m} fields, found {}", values.len()),
            });
        }
        data.extend(values);
        count += 1;
    }
    if count == 0 {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            row: header_row,
            msg: "no curves after the grid row".into(),
        });
    }
    Ok(FunctionalSample::from_flat(grid, data)?)
}

pub fn load_curves(path: &Path) -> Result<FunctionalSample, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_curves(path, &text)
}

/// Renders a sample in the curve CSV format.
pub fn render_curves(s: &FunctionalSample) -> String {
    let mut out = String::new();
    let header: Vec<String> = s.grid().points().iter().map(|v| fmt_f64(*v)).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in s.rows() {
        let fields: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn save_curves(path: &Path, s: &FunctionalSample) -> Result<(), CliError> {
    write_atomic(path, render_curves(s).as_bytes())
}

/// Loads a covariance operator stored as a curve file whose `m` rows are the
/// kernel values `k_C(sᵢ, ·)` on the header grid.
pub fn load_cov(path: &Path) -> Result<CovOperator, CliError> {
    let s = load_curves(path)?;
    let m = s.m();
    if s.n() != m {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            row: 1,
            msg: format!("a covariance file needs {m} kernel rows for {m} grid points, found {}", s.n()),
        });
    }
    let kernel = DMatrix::from_row_slice(m, m, s.as_flat());
    Ok(CovOperator::new(s.grid().clone(), kernel)?)
}

/// Renders a header row and data rows as CSV.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir: PathBuf = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err(&dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use kdepth::make_uniform_grid;

    fn p() -> &'static Path {
        Path::new("mem.csv")
    }

    #[test]
    fn test_single_constant_curve() {
        let s = parse_curves(p(), "0,0.5,1\n1,1,1\n").unwrap();
        assert_eq!(s.n(), 1);
        assert_eq!(s.m(), 3);
        assert_eq!(s.row(0), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn test_two_column_grid_weights() {
        let s = parse_curves(p(), "0,2\n5,6\n").unwrap();
        assert_eq!(s.grid().weights(), &[1.0, 1.0]);
    }

    #[test]
    fn test_nonuniform_grid_accepted() {
        let s = parse_curves(p(), "0,0.1,1\r\n1,2,3\r\n").unwrap();
        let w = s.grid().weights();
        assert!((w[0] - 0.05).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15 && (w[2] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn test_ragged_row_reports_row_number() {
        match parse_curves(p(), "0,1,2\n1,2,3\n4,5\n") {
            Err(CliError::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn test_non_increasing_grid() {
        assert!(matches!(parse_curves(p(), "0,1,1\n1,2,3\n"), Err(CliError::Format { row: 1, .. })));
    }

    #[test]
    fn test_non_finite_value() {
        assert!(matches!(parse_curves(p(), "0,1\n1,NaN\n"), Err(CliError::Format { row: 2, .. })));
        assert!(matches!(parse_curves(p(), "0,1\n1,inf\n"), Err(CliError::Format { row: 2, .. })));
    }

    #[test]
    fn test_garbage_field() {
        assert!(matches!(parse_curves(p(), "0,1\n1,x\n"), Err(CliError::Parse { row: 2, .. })));
        assert!(matches!(parse_curves(p(), ""), Err(CliError::Format { .. })));
        assert!(matches!(parse_curves(p(), "0,1\n"), Err(CliError::Format { .. })));
    }

    #[test]
    fn test_round_trip_exact() {
        let g = make_uniform_grid(7, -1.0, 2.0).unwrap();
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..7).map(|j| ((i * 7 + j) as f64 * 0.37).sin() / 3.0 + 1e-9 * i as f64).collect())
            .collect();
        let s = FunctionalSample::new(g, rows).unwrap();
        let back = parse_curves(p(), &render_curves(&s)).unwrap();
        assert_eq!(back.as_flat(), s.as_flat());
        assert_eq!(back.grid().points(), s.grid().points());
    }

    #[test]
    fn test_atomic_write_and_cov() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cov.csv");
        write_atomic(&path, b"0,1\n2,1\n1,2\n").unwrap();
        let c = load_cov(&path).unwrap();
        assert_eq!(c.kernel_matrix()[(0, 1)], 1.0);
        write_atomic(&path, b"0,1\n2,1\n").unwrap();
        assert!(matches!(load_cov(&path), Err(CliError::Format { .. })));
    }
}
