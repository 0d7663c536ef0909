//! Observation-file and state-file formats.
//!
//! CSV observation files carry one observation per ROW (the common data-file
//! convention); loading transposes into the internal columns-as-observations
//! layout. Values are written with 17 significant digits so a csv→bin→csv
//! trip drifts by at most one ulp.
//!
//! Binary observation files (`COVS`): magic `COVS`, version u16 = 1, `m` u32,
//! `n` u32, then `m·n` little-endian f64 column-major.
//!
//! Binary covariance-state files (`COVC`): magic `COVC`, version u16 = 1,
//! `m` u32, `count` u64, the mean (`m` f64), then the scatter (`m·m` f64
//! column-major), all little-endian. Write-then-read is bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::matrix::{DataMatrix, Matrix};
use crate::moments::CovarianceState;

const MATRIX_MAGIC: &[u8; 4] = b"COVS";
const STATE_MAGIC: &[u8; 4] = b"COVC";
const FORMAT_VERSION: u16 = 1;

/// Errors from reading or writing data files. The CLI maps every variant to
/// exit code 2 (malformed input), as opposed to exit code 1 for operation
/// errors.
#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("unsupported format version {0}")]
    BadVersion(u16),
    #[error("payload length does not match declared dimensions")]
    LengthMismatch,
    #[error("non-finite value in file at position {index}")]
    NonFinite { index: usize },
    #[error("inconsistent row width at line {line}: expected {expected}, got {got}")]
    RaggedRow {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("file contains no observations")]
    Empty,
}

pub type FileResult<T> = std::result::Result<T, FileError>;

/// Formats one value with 17 significant digits (round-trips f64 exactly).
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

// ---------------------------------------------------------------------------
// CSV observations
// ---------------------------------------------------------------------------

/// Reads a CSV of observations (one per row, comma-separated features).
pub fn read_observations_csv(path: &Path, has_header: bool) -> FileResult<DataMatrix> {
    let file = File::open(path)?;
    read_observations_csv_from(BufReader::new(file), has_header)
}

pub fn read_observations_csv_from<R: BufRead>(
    reader: R,
    has_header: bool,
) -> FileResult<DataMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if idx == 0 && has_header {
            continue;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in trimmed.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| FileError::Parse {
                line: lineno,
                msg: format!("cannot parse {:?} as a number", field.trim()),
            })?;
            row.push(v);
        }
        if let Some(w) = width {
            if row.len() != w {
                return Err(FileError::RaggedRow {
                    line: lineno,
                    expected: w,
                    got: row.len(),
                });
            }
        } else {
            width = Some(row.len());
        }
        rows.push(row);
    }
    let m = width.ok_or(FileError::Empty)?;
    let n = rows.len();
    // transpose rows-as-observations into the internal column layout
    let mut data = vec![0.0; m * n];
    for (j, row) in rows.iter().enumerate() {
        data[j * m..(j + 1) * m].copy_from_slice(row);
    }
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(FileError::NonFinite { index });
    }
    DataMatrix::new(m, n, data).map_err(|_| FileError::LengthMismatch)
}

/// Writes observations as CSV, one per row. `header` emits `f0,f1,...`.
pub fn write_observations_csv<W: Write>(
    w: &mut W,
    data: &DataMatrix,
    header: bool,
) -> FileResult<()> {
    if header {
        let names: Vec<String> = (0..data.rows()).map(|i| format!("f{i}")).collect();
        writeln!(w, "{}", names.join(","))?;
    }
    for j in 0..data.cols() {
        let fields: Vec<String> = data.col(j).iter().map(|&v| format_value(v)).collect();
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Binary observations (COVS)
// ---------------------------------------------------------------------------

pub fn read_observations_bin(path: &Path) -> FileResult<DataMatrix> {
    let file = File::open(path)?;
    read_observations_bin_from(BufReader::new(file))
}

pub fn read_observations_bin_from<R: Read>(mut r: R) -> FileResult<DataMatrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(FileError::BadMagic { expected: "COVS" });
    }
    let version = read_u16(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(FileError::BadVersion(version));
    }
    let m = read_u32(&mut r)? as usize;
    let n = read_u32(&mut r)? as usize;
    if m == 0 {
        return Err(FileError::LengthMismatch);
    }
    let data = read_f64s(&mut r, m * n)?;
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(FileError::NonFinite { index });
    }
    DataMatrix::new(m, n, data).map_err(|_| FileError::LengthMismatch)
}

pub fn write_observations_bin(path: &Path, data: &DataMatrix) -> FileResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_observations_bin_to(&mut w, data)
}

pub fn write_observations_bin_to<W: Write>(w: &mut W, data: &DataMatrix) -> FileResult<()> {
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(data.rows() as u32).to_le_bytes())?;
    w.write_all(&(data.cols() as u32).to_le_bytes())?;
    for &v in data.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads an observation file, picking the format from the extension
/// (`.bin` binary, anything else CSV).
pub fn read_observations_auto(path: &Path, csv_header: bool) -> FileResult<DataMatrix> {
    if path.extension().map(|e| e == "bin").unwrap_or(false) {
        read_observations_bin(path)
    } else {
        read_observations_csv(path, csv_header)
    }
}

// ---------------------------------------------------------------------------
// Covariance state (COVC)
// ---------------------------------------------------------------------------

pub fn read_state(path: &Path) -> FileResult<CovarianceState> {
    let file = File::open(path)?;
    read_state_from(BufReader::new(file))
}

pub fn read_state_from<R: Read>(mut r: R) -> FileResult<CovarianceState> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != STATE_MAGIC {
        return Err(FileError::BadMagic { expected: "COVC" });
    }
    let version = read_u16(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(FileError::BadVersion(version));
    }
    let m = read_u32(&mut r)? as usize;
    if m == 0 {
        return Err(FileError::LengthMismatch);
    }
    let count = read_u64(&mut r)? as usize;
    let mean = read_f64s(&mut r, m)?;
    let scatter = read_f64s(&mut r, m * m)?;
    if let Some(index) = mean
        .iter()
        .chain(scatter.iter())
        .position(|v| !v.is_finite())
    {
        return Err(FileError::NonFinite { index });
    }
    CovarianceState::from_raw_parts(count, mean, Matrix::from_vec(m, m, scatter))
        .map_err(|_| FileError::LengthMismatch)
}

pub fn write_state(path: &Path, state: &CovarianceState) -> FileResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_state_to(&mut w, state)
}

pub fn write_state_to<W: Write>(w: &mut W, state: &CovarianceState) -> FileResult<()> {
    w.write_all(STATE_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(state.dim() as u32).to_le_bytes())?;
    w.write_all(&(state.count() as u64).to_le_bytes())?;
    for &v in state.mean() {
        w.write_all(&v.to_le_bytes())?;
    }
    for &v in state.scatter().data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Writes a general matrix as CSV rows (used for covariance and factor
/// output on standard output).
pub fn write_matrix_csv<W: Write>(w: &mut W, mat: &Matrix) -> FileResult<()> {
    for i in 0..mat.rows() {
        let fields: Vec<String> = (0..mat.cols())
            .map(|j| format_value(mat[(i, j)]))
            .collect();
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

fn read_u16<R: Read>(r: &mut R) -> FileResult<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> FileResult<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> FileResult<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> FileResult<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn dm(rows: usize, vals: &[f64]) -> DataMatrix {
        DataMatrix::new(rows, vals.len() / rows, vals.to_vec()).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let data = dm(3, &[0.1, -2.0 / 3.0, 1e-17, 42.0, f64::MIN_POSITIVE, -1e300]);
        let mut buf = Vec::new();
        write_observations_csv(&mut buf, &data, true).unwrap();
        let back = read_observations_csv_from(Cursor::new(buf), true).unwrap();
        assert_eq!(back.rows(), 3);
        assert_eq!(back.cols(), 2);
        for (a, b) in back.data().iter().zip(data.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn csv_rows_are_observations() {
        let text = "1.0,2.0\n3.0,4.0\n5.0,6.0\n";
        let d = read_observations_csv_from(Cursor::new(text), false).unwrap();
        assert_eq!(d.rows(), 2);
        assert_eq!(d.cols(), 3);
        assert_eq!(d.col(0), &[1.0, 2.0]);
        assert_eq!(d.col(2), &[5.0, 6.0]);
    }

    #[test]
    fn csv_rejects_garbage() {
        let text = "1.0,2.0\n3.0,oops\n";
        match read_observations_csv_from(Cursor::new(text), false) {
            Err(FileError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let ragged = "1.0,2.0\n3.0\n";
        assert!(matches!(
            read_observations_csv_from(Cursor::new(ragged), false),
            Err(FileError::RaggedRow { line: 2, .. })
        ));
        let nan = "1.0\nnan\n";
        assert!(matches!(
            read_observations_csv_from(Cursor::new(nan), false),
            Err(FileError::NonFinite { .. })
        ));
    }

    #[test]
    fn bin_round_trip_is_bit_exact() {
        let data = dm(2, &[0.1, 0.2, -0.3, 1e-300, 4.0, 5.0]);
        let mut buf = Vec::new();
        write_observations_bin_to(&mut buf, &data).unwrap();
        let back = read_observations_bin_from(Cursor::new(&buf)).unwrap();
        assert_eq!(back.rows(), data.rows());
        assert_eq!(back.cols(), data.cols());
        for (a, b) in back.data().iter().zip(data.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn bin_rejects_corruption() {
        let data = dm(1, &[1.0]);
        let mut buf = Vec::new();
        write_observations_bin_to(&mut buf, &data).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            read_observations_bin_from(Cursor::new(&bad_magic)),
            Err(FileError::BadMagic { .. })
        ));

        let mut bad_version = buf.clone();
        bad_version[4] = 9;
        assert!(matches!(
            read_observations_bin_from(Cursor::new(&bad_version)),
            Err(FileError::BadVersion(9))
        ));

        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(
            read_observations_bin_from(Cursor::new(truncated)),
            Err(FileError::Io(_))
        ));
    }

    #[test]
    fn state_round_trip_is_bit_exact() {
        let st = CovarianceState::from_columns(&dm(2, &[0.1, 0.9, -2.0, 0.4, 0.7, 1.3]));
        let mut buf = Vec::new();
        write_state_to(&mut buf, &st).unwrap();
        let back = read_state_from(Cursor::new(&buf)).unwrap();
        assert_eq!(back.count(), st.count());
        for (a, b) in back.mean().iter().zip(st.mean()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in back.scatter().data().iter().zip(st.scatter().data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
