//! Matrix file formats.
//!
//! * CSV: a `# rows=<m> cols=<n>` header line, then `m` lines of `n`
//!   comma-separated values. Values are written in the shortest form that
//!   parses back to the same bits.
//! * Binary: magic `SDEM`, version byte `0x01`, rows and cols as `u64`
//!   little-endian, then `m·n` little-endian IEEE-754 doubles, row-major.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::error::{Result, SdeError};
use crate::matrix::Matrix;

pub const BINARY_MAGIC: &[u8; 4] = b"SDEM";
pub const BINARY_VERSION: u8 = 0x01;
const BINARY_HEADER_LEN: usize = 4 + 1 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::Binary => "bin",
        }
    }
}

pub fn encode_csv(m: &Matrix<f64>) -> String {
    let mut out = format!("# rows={} cols={}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn decode_csv(text: &str) -> Result<Matrix<f64>> {
    let mut offset = 0u64;
    let mut lines = text.split_inclusive('\n');
    let header = lines.next().ok_or_else(|| format_err(0, "empty file"))?;
    let (rows, cols) = parse_header(header.trim_end())?;
    offset += header.len() as u64;

    let mut data = Vec::with_capacity(rows.saturating_mul(cols).min(1 << 24));
    let mut seen_rows = 0usize;
    for line in lines {
        let content = line.trim_end_matches(['\n', '\r']);
        if content.trim().is_empty() {
            offset += line.len() as u64;
            continue;
        }
        if seen_rows == rows {
            return Err(format_err(offset, format!("more than the declared {rows} rows")));
        }
        let mut field_offset = offset;
        let mut count = 0usize;
        for field in content.split(',') {
            let value: f64 = field
                .trim()
                .parse()
                .map_err(|_| format_err(field_offset, format!("not a number: {:?}", field.trim())))?;
            data.push(value);
            count += 1;
            field_offset += field.len() as u64 + 1;
        }
        if count != cols {
            return Err(format_err(offset, format!("row {seen_rows} has {count} values, expected {cols}")));
        }
        seen_rows += 1;
        offset += line.len() as u64;
    }
    if seen_rows != rows {
        return Err(format_err(offset, format!("found {seen_rows} rows, header declares {rows}")));
    }
    Matrix::from_vec(rows, cols, data)
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let bad = || format_err(0, format!("expected `# rows=<m> cols=<n>`, got {line:?}"));
    let rest = line.strip_prefix('#').ok_or_else(bad)?;
    let mut rows = None;
    let mut cols = None;
    for token in rest.split_whitespace() {
        match token.split_once('=') {
            Some(("rows", v)) => rows = Some(v.parse::<usize>().map_err(|_| bad())?),
            Some(("cols", v)) => cols = Some(v.parse::<usize>().map_err(|_| bad())?),
            _ => return Err(bad()),
        }
    }
    match (rows, cols) {
        (Some(r), Some(c)) if r > 0 && c > 0 => Ok((r, c)),
        (Some(_), Some(_)) => Err(format_err(0, "dimensions must be at least 1")),
        _ => Err(bad()),
    }
}

pub fn encode_binary(m: &Matrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(BINARY_HEADER_LEN + 8 * m.as_slice().len());
    out.extend_from_slice(BINARY_MAGIC);
    out.push(BINARY_VERSION);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<Matrix<f64>> {
    if bytes.len() < 4 || &bytes[..4] != BINARY_MAGIC {
        return Err(format_err(0, "missing SDEM magic"));
    }
    if bytes.len() < BINARY_HEADER_LEN {
        return Err(truncated(bytes.len() as u64, "header"));
    }
    if bytes[4] != BINARY_VERSION {
        return Err(format_err(4, format!("unsupported version byte {:#04x}", bytes[4])));
    }
    let read_u64 = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let rows = read_u64(5);
    let cols = read_u64(13);
    if rows == 0 || cols == 0 {
        return Err(format_err(5, "dimensions must be at least 1"));
    }
    let count = rows
        .checked_mul(cols)
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| format_err(5, "dimensions overflow"))?;
    let payload = &bytes[BINARY_HEADER_LEN..];
    let needed = count.checked_mul(8).ok_or_else(|| format_err(5, "dimensions overflow"))?;
    if payload.len() < needed {
        // report where the first incomplete value starts
        let complete = payload.len() / 8;
        return Err(truncated((BINARY_HEADER_LEN + complete * 8) as u64, "payload"));
    }
    if payload.len() > needed {
        return Err(format_err((BINARY_HEADER_LEN + needed) as u64, "trailing bytes after payload"));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Matrix::from_vec(rows as usize, cols as usize, data)
}

/// Reads a matrix, detecting the binary format by its magic bytes.
pub fn read_matrix(path: &Path) -> Result<Matrix<f64>> {
    let bytes = fs::read(path).map_err(|source| SdeError::Io { offset: 0, source })?;
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|e| SdeError::Io {
            offset: e.valid_up_to() as u64,
            source: io::Error::new(io::ErrorKind::InvalidData, "file is neither SDEM binary nor UTF-8 text"),
        })?;
        decode_csv(text)
    }
}

pub fn write_matrix(path: &Path, m: &Matrix<f64>, format: MatrixFormat) -> Result<()> {
    let bytes = match format {
        MatrixFormat::Csv => encode_csv(m).into_bytes(),
        MatrixFormat::Binary => encode_binary(m),
    };
    let mut file = fs::File::create(path).map_err(|source| SdeError::Io { offset: 0, source })?;
    file.write_all(&bytes).map_err(|source| SdeError::Io { offset: 0, source })
}

fn format_err(offset: u64, message: impl Into<String>) -> SdeError {
    SdeError::Format { offset, message: message.into() }
}

fn truncated(offset: u64, what: &str) -> SdeError {
    SdeError::Io {
        offset,
        source: io::Error::new(io::ErrorKind::UnexpectedEof, format!("truncated {what}")),
    }
}
