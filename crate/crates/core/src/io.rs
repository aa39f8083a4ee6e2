//! CSV and JSON-lines files.
//!
//! Dialect: comma separated, `.` decimal point, one header row, LF line
//! endings. Floats are written with Rust's shortest round-trip formatting.
//! Readers skip lines starting with `#`, which reference files use for
//! provenance notes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::bench::{BenchRecord, MembenchResult, SpectrumResult};
use crate::solver::Profile;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Format { path: PathBuf, line: u64, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_owned(), source }
}

fn csv_err(path: &Path, e: csv::Error) -> IoError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => IoError::Io { path: path.to_owned(), source },
        kind => IoError::Format { path: path.to_owned(), line, message: format!("{kind:?}") },
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>, IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new().delimiter(b',').terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), IoError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// Numeric columns of a CSV file, header checked by column count only.
fn read_numeric(path: &Path, columns: usize) -> Result<Vec<Vec<f64>>, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = csv::ReaderBuilder::new().delimiter(b',').has_headers(true).comment(Some(b'#')).from_reader(file);
    let header_len = r.headers().map_err(|e| csv_err(path, e))?.len();
    if header_len < columns {
        return Err(IoError::Format {
            path: path.to_owned(),
            line: 1,
            message: format!("expected {columns} columns, header has {header_len}"),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let mut row = Vec::with_capacity(columns);
        for c in 0..columns {
            let field = rec.get(c).unwrap_or("").trim();
            let v = field.parse::<f64>().map_err(|_| IoError::Format {
                path: path.to_owned(),
                line,
                message: format!("column {} is not a number: {field:?}", c + 1),
            })?;
            row.push(v);
        }
        out.push(row);
    }
    Ok(out)
}

/// `coordinate,normalized_velocity`, node centres only.
pub fn write_profile(path: &Path, profile: &Profile) -> Result<(), IoError> {
    write_rows(
        path,
        &["coordinate", "normalized_velocity"],
        profile.coords.iter().zip(&profile.values).map(|(c, v)| [c.to_string(), v.to_string()]),
    )
}

/// `(coordinate, normalized velocity)` pairs from a profile or reference
/// file.
pub fn read_profile(path: &Path) -> Result<Vec<(f64, f64)>, IoError> {
    Ok(read_numeric(path, 2)?.into_iter().map(|r| (r[0], r[1])).collect())
}

/// `iteration,seconds`.
pub fn write_series(path: &Path, seconds: &[f64]) -> Result<(), IoError> {
    write_rows(path, &["iteration", "seconds"], seconds.iter().enumerate().map(|(k, s)| [k.to_string(), s.to_string()]))
}

pub fn read_series(path: &Path) -> Result<Vec<f64>, IoError> {
    Ok(read_numeric(path, 2)?.into_iter().map(|r| r[1]).collect())
}

pub fn write_bench_csv(path: &Path, records: &[BenchRecord]) -> Result<(), IoError> {
    write_rows(
        path,
        &[
            "domain", "ordering", "strategy", "tile_width", "lane_width", "layout", "precision", "workers", "warmup",
            "iterations", "mlups_mean", "mlups_std", "bandwidth", "warning",
        ],
        records.iter().map(|r| {
            [
                r.domain.to_string(),
                r.ordering.to_string(),
                r.strategy.kind.to_string(),
                r.strategy.tile_width.to_string(),
                r.strategy.lane_width.to_string(),
                r.layout.to_string(),
                r.precision.to_string(),
                r.workers.to_string(),
                r.warmup_iterations.to_string(),
                r.per_iteration_seconds.len().to_string(),
                r.mlups_mean.to_string(),
                r.mlups_std.to_string(),
                r.measured_bandwidth.map(|b| b.to_string()).unwrap_or_default(),
                r.warning.clone().unwrap_or_default(),
            ]
        }),
    )
}

/// `pattern,bytes,seconds,bandwidth,ratio`; ratio is against the aligned
/// counterpart.
pub fn write_membench_csv(path: &Path, rows: &[(MembenchResult, f64)]) -> Result<(), IoError> {
    write_rows(
        path,
        &["pattern", "bytes", "seconds", "bandwidth", "ratio"],
        rows.iter().map(|(r, ratio)| {
            [r.pattern.to_string(), r.bytes.to_string(), r.seconds.to_string(), r.bandwidth.to_string(), ratio.to_string()]
        }),
    )
}

pub fn write_spectrum_csv(path: &Path, s: &SpectrumResult) -> Result<(), IoError> {
    write_rows(
        path,
        &["frequency_hz", "magnitude"],
        s.frequencies.iter().zip(&s.magnitudes).map(|(f, m)| [f.to_string(), m.to_string()]),
    )
}

/// Numeric table with the given header.
pub fn write_table<I: IntoIterator<Item = Vec<f64>>>(path: &Path, header: &[&str], rows: I) -> Result<(), IoError> {
    write_rows(path, header, rows.into_iter().map(|r| r.into_iter().map(|v| v.to_string())))
}

/// One JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item)
            .map_err(|e| IoError::Format { path: path.to_owned(), line: 0, message: e.to_string() })?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let p = Profile {
            coords: vec![0.125, 0.375, 0.625, 0.875],
            values: vec![-0.1234567890123456, 1e-300, 0.0, std::f64::consts::PI],
            walls: [0.0, 1.0],
        };
        write_profile(&path, &p).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("coordinate,normalized_velocity\n"));
        assert!(!text.contains('\r'));
        let back = read_profile(&path).unwrap();
        assert_eq!(back.iter().map(|r| r.1.to_bits()).collect::<Vec<_>>(), p.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn series_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = vec![0.005, 0.0051, 4.9e-3];
        write_series(&path, &s).unwrap();
        assert_eq!(read_series(&path).unwrap(), s);
    }

    #[test]
    fn comments_skipped_and_bad_numbers_located() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, "# digitised\ncoordinate,u\n0.5,-0.2\n0.6,abc\n").unwrap();
        match read_profile(&path) {
            Err(IoError::Format { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("abc"));
            }
            other => panic!("{other:?}"),
        }
        std::fs::write(&path, "coordinate,u\n# note\n0.5,-0.2\n").unwrap();
        assert_eq!(read_profile(&path).unwrap(), vec![(0.5, -0.2)]);
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = read_series(Path::new("/nonexistent/series.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/series.csv"));
    }
}
