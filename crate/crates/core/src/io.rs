//! File formats: matrix CSV, the `SMST` sensitivity stack, per-pixel CSVs.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::forward::SensitivityStack;
use crate::linalg::SymMatrix;

const STACK_MAGIC: &[u8; 4] = b"SMST";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("{what}: cannot parse {s:?} as a number")))
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// `# n=<N>` followed by `N` comma-separated rows.
pub fn matrix_to_csv(a: &SymMatrix<f64>) -> String {
    let n = a.dim();
    let mut s = format!("# n={n}\n");
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| fmt_f64(a.get(i, j))).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn matrix_from_csv(text: &str) -> Result<SymMatrix<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Format("empty matrix file".into()))?;
    let n: usize = header
        .trim()
        .strip_prefix("# n=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Format(format!("bad matrix header {header:?}")))?;
    let mut data = Vec::with_capacity(n * n);
    let mut rows = 0;
    for line in lines {
        let vals = line
            .split(',')
            .map(|v| parse_f64(v, "matrix entry"))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != n {
            return Err(Error::Format(format!("row {rows} has {} entries, expected {n}", vals.len())));
        }
        data.extend(vals);
        rows += 1;
    }
    if rows != n {
        return Err(Error::Format(format!("{rows} rows, expected {n}")));
    }
    SymMatrix::new(n, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_matrix_csv(path: &Path, a: &SymMatrix<f64>) -> Result<()> {
    write_file(path, matrix_to_csv(a).as_bytes())
}

pub fn read_matrix_csv(path: &Path) -> Result<SymMatrix<f64>> {
    matrix_from_csv(&read_to_string(path)?)
}

/// `SMST`, `u32` LE pixel count, `u32` LE basis size, then the blocks as
/// `f64` LE, block-major and row-major within a block.
pub fn stack_to_bytes(s: &SensitivityStack<f64>) -> Vec<u8> {
    let (m, n) = (s.len(), s.dim());
    let mut out = Vec::with_capacity(12 + 8 * m * n * n);
    out.extend_from_slice(STACK_MAGIC);
    out.extend_from_slice(&(m as u32).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    for b in s.blocks() {
        for &v in b.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn stack_from_bytes(bytes: &[u8]) -> Result<SensitivityStack<f64>> {
    if bytes.len() < 12 || &bytes[..4] != STACK_MAGIC {
        return Err(Error::Format("sensitivity stack: missing SMST magic".into()));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let (m, n) = (word(4), word(8));
    if m == 0 || n == 0 {
        return Err(Error::Format("sensitivity stack: empty dimensions".into()));
    }
    let expect = 12 + 8 * m * n * n;
    if bytes.len() != expect {
        return Err(Error::Format(format!(
            "sensitivity stack: {} bytes, expected {expect} for M={m}, N={n}",
            bytes.len()
        )));
    }
    let vals: Vec<f64> = bytes[12..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let blocks = vals
        .chunks_exact(n * n)
        .map(|c| SymMatrix::new(n, c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    SensitivityStack::new(n, blocks).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_stack(path: &Path, s: &SensitivityStack<f64>) -> Result<()> {
    write_file(path, &stack_to_bytes(s))
}

pub fn read_stack(path: &Path) -> Result<SensitivityStack<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    stack_from_bytes(&bytes)
}

/// Per-pixel table: a header line and one row per pixel, first three columns
/// `pixel,centroid_x,centroid_y`.
pub fn write_pixel_csv(path: &Path, header: &str, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let go = || -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        for r in rows {
            writeln!(w, "{}", r.join(","))?;
        }
        w.flush()
    };
    go().map_err(|e| Error::io(path, e))
}

/// Reads one numeric column of a per-pixel CSV written by [`write_pixel_csv`],
/// checking the header and that pixel indices run `0..`.
pub fn read_pixel_column(path: &Path, expected_header: &str, column: &str) -> Result<Vec<f64>> {
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default().trim();
    if header != expected_header {
        return Err(Error::Format(format!(
            "{}: header {header:?}, expected {expected_header:?}",
            path.display()
        )));
    }
    let col = header
        .split(',')
        .position(|c| c == column)
        .ok_or_else(|| Error::Format(format!("no column {column}")))?;
    let mut out = Vec::new();
    for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != header.split(',').count() || f[0].trim().parse::<usize>().ok() != Some(i) {
            return Err(Error::Format(format!("{}: malformed row {i}", path.display())));
        }
        out.push(parse_f64(f[col], column)?);
    }
    Ok(out)
}
