//! Text file formats for points and labels, and atomic file writes.
//!
//! Points CSV: comma-separated decimal floats, one point per row, an
//! optional header line (detected by its first field not parsing as a
//! number). A final integer column named `label` holds ground truth when
//! present; without a header, no column is treated as labels.
//!
//! Labels file: one nonnegative integer per line.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use neuncut_core::{DataMatrix, Matrix};

use crate::error::{Error, ParseError, Result};

/// `x` with 17 significant digits, enough to read back the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `contents` to a temporary file in the target directory and
/// renames it over `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    ParseError { path: path.to_path_buf(), line, message: message.into() }.into()
}

/// Parses the points CSV format.
pub fn parse_csv(text: &str, path: &Path) -> Result<DataMatrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    let mut label_col = None;
    if let Some((_, first)) = lines.peek() {
        let head = first.split(',').next().unwrap_or("").trim();
        if head.parse::<f64>().is_err() {
            let names: Vec<&str> = first.split(',').map(str::trim).collect();
            if names.last() == Some(&"label") {
                label_col = Some(names.len() - 1);
            }
            lines.next();
        }
    }
    let mut width = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(parse_err(path, lineno, format!("expected {w} fields, found {}", fields.len())));
            }
            _ => {}
        }
        for (c, field) in fields.iter().enumerate() {
            if Some(c) == label_col {
                let l = field
                    .parse::<usize>()
                    .map_err(|_| parse_err(path, lineno, format!("label {field:?} is not a nonnegative integer")))?;
                labels.push(l);
            } else {
                let v = field
                    .parse::<f64>()
                    .map_err(|_| parse_err(path, lineno, format!("field {} ({field:?}) is not a number", c + 1)))?;
                if !v.is_finite() {
                    return Err(parse_err(path, lineno, format!("field {} is not finite", c + 1)));
                }
                values.push(v);
            }
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| parse_err(path, 1, "no data rows"))?;
    let dim = width - usize::from(label_col.is_some());
    if dim == 0 {
        return Err(parse_err(path, 1, "no feature columns"));
    }
    let points = Matrix::from_vec(rows, dim, values)?;
    Ok(DataMatrix::new(points, label_col.map(|_| labels))?)
}

pub fn load_csv(path: &Path) -> Result<DataMatrix> {
    parse_csv(&read_text(path)?, path)
}

/// Header `x0,x1,…[,label]`, then one row per point.
pub fn format_csv(data: &DataMatrix) -> String {
    let mut out = String::new();
    let header: Vec<String> = (0..data.dim()).map(|j| format!("x{j}")).collect();
    out.push_str(&header.join(","));
    if data.labels().is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for (i, row) in data.points().row_iter().enumerate() {
        let fields: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&fields.join(","));
        if let Some(labels) = data.labels() {
            let _ = write!(out, ",{}", labels[i]);
        }
        out.push('\n');
    }
    out
}

pub fn save_csv(data: &DataMatrix, path: &Path) -> Result<()> {
    write_atomic(path, format_csv(data).as_bytes())
}

pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| parse_err(path, i + 1, format!("{:?} is not a nonnegative integer", l.trim())))
        })
        .collect()
}

pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    parse_labels(&read_text(path)?, path)
}

pub fn format_labels(labels: &[usize]) -> String {
    let mut out = String::with_capacity(labels.len() * 2);
    for l in labels {
        let _ = writeln!(out, "{l}");
    }
    out
}

pub fn save_labels(labels: &[usize], path: &Path) -> Result<()> {
    write_atomic(path, format_labels(labels).as_bytes())
}

/// Labels from either a labels file or a points CSV with a `label` column.
pub fn load_any_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.contains(',') || first.trim().parse::<usize>().is_err() {
        let data = parse_csv(&text, path)?;
        return data.labels().map(<[usize]>::to_vec).ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            message: "no `label` column".into(),
        });
    }
    parse_labels(&text, path)
}
