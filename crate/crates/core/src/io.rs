//! Matrix files, generated instances, and JSON reports.
//!
//! Matrices load from CSV (optional header line) or MatrixMarket `array` and
//! `coordinate` files of `real general` matrices. Reports and metadata are
//! JSON with every float written to 17 significant digits, so parsing a
//! report back reproduces its numbers exactly.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, DenseVector};
use crate::pipeline::{reference_instance, NoiseModel, ReferenceInstance, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixFormat {
    Csv,
    MatrixMarketArray,
    MatrixMarketCoordinate,
}

const MM_BANNER: &str = "%%MatrixMarket";

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Guesses the format from the first line.
pub fn detect_format(text: &str) -> MatrixFormat {
    let first = text.lines().next().unwrap_or("").trim_start();
    if first.starts_with(MM_BANNER) {
        if first.to_ascii_lowercase().contains("coordinate") {
            MatrixFormat::MatrixMarketCoordinate
        } else {
            MatrixFormat::MatrixMarketArray
        }
    } else {
        MatrixFormat::Csv
    }
}

/// Reads a matrix; `format = None` detects it from the contents.
pub fn load_matrix(path: &Path, format: Option<MatrixFormat>) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix(&text, format.unwrap_or_else(|| detect_format(&text)))
}

/// Reads a single row or column as a vector.
pub fn load_vector(path: &Path) -> Result<DenseVector> {
    let m = load_matrix(path, None)?;
    match m.shape() {
        (_, 1) => Ok(m.into_vec()),
        (1, _) => Ok(m.into_vec()),
        (r, c) => Err(Error::DimensionMismatch(format!(
            "{}: expected a vector, found a {r} x {c} matrix",
            path.display()
        ))),
    }
}

pub fn parse_matrix(text: &str, format: MatrixFormat) -> Result<DenseMatrix> {
    match format {
        MatrixFormat::Csv => parse_csv(text),
        MatrixFormat::MatrixMarketArray | MatrixFormat::MatrixMarketCoordinate => parse_matrix_market(text),
    }
}

fn parse_number(cell: &str, line: usize) -> Result<f64> {
    let cell = cell.trim();
    let v: f64 = cell
        .parse()
        .map_err(|_| parse_err(line, format!("not a number: {cell:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value: {cell:?}")));
    }
    Ok(v)
}

/// Comma-separated rows. A first line with any non-numeric cell is a header.
/// Blank lines are ignored.
pub fn parse_csv(text: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut seen_first = false;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let cells: Vec<&str> = raw.split(',').collect();
        if !seen_first {
            seen_first = true;
            if cells.iter().any(|c| c.trim().parse::<f64>().is_err()) {
                continue;
            }
        }
        let row = cells.iter().map(|c| parse_number(c, line)).collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(line, format!("expected {w} columns, found {}", row.len())));
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    DenseMatrix::from_rows(&rows)
}

/// MatrixMarket `array` or `coordinate` files with `real` or `integer`
/// fields and `general` symmetry. Duplicate coordinate entries are summed.
pub fn parse_matrix_market(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    let (_, banner) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let words: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != MM_BANNER.to_ascii_lowercase() || words[1] != "matrix" {
        return Err(parse_err(1, format!("bad MatrixMarket header: {banner:?}")));
    }
    let coordinate = match words[2].as_str() {
        "array" => false,
        "coordinate" => true,
        other => return Err(parse_err(1, format!("unsupported layout {other:?}"))),
    };
    if words[3] != "real" && words[3] != "integer" {
        return Err(parse_err(1, format!("unsupported field {:?}", words[3])));
    }
    if words[4] != "general" {
        return Err(parse_err(1, format!("unsupported symmetry {:?}", words[4])));
    }
    let mut data = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (size_line, size) = data.next().ok_or_else(|| parse_err(1, "missing size line"))?;
    let dims = size
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| parse_err(size_line, format!("bad size entry {t:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let want = if coordinate { 3 } else { 2 };
    if dims.len() != want {
        return Err(parse_err(size_line, format!("expected {want} size entries, found {}", dims.len())));
    }
    let (rows, cols) = (dims[0], dims[1]);
    let mut m = DenseMatrix::zeros(rows, cols);
    if coordinate {
        let nnz = dims[2];
        let mut count = 0;
        for (line, l) in data {
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 3 {
                return Err(parse_err(line, format!("expected 'row col value', found {l:?}")));
            }
            let index = |s: &str, bound: usize| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(i) if (1..=bound).contains(&i) => Ok(i - 1),
                    _ => Err(parse_err(line, format!("index {s:?} outside 1..={bound}"))),
                }
            };
            let (i, j) = (index(t[0], rows)?, index(t[1], cols)?);
            m[(i, j)] += parse_number(t[2], line)?;
            count += 1;
        }
        if count != nnz {
            return Err(parse_err(size_line, format!("header declares {nnz} entries, found {count}")));
        }
    } else {
        let mut k = 0;
        for (line, l) in data {
            for t in l.split_whitespace() {
                if k >= rows * cols {
                    return Err(parse_err(line, format!("more than {} entries", rows * cols)));
                }
                m[(k % rows.max(1), k / rows.max(1))] = parse_number(t, line)?;
                k += 1;
            }
        }
        if k != rows * cols {
            return Err(parse_err(size_line, format!("expected {} entries, found {k}", rows * cols)));
        }
    }
    Ok(m)
}

/// Shortest round-trip decimal for each entry.
pub fn to_csv_string(m: &DenseMatrix) -> String {
    let mut s = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn to_matrix_market_string(m: &DenseMatrix, format: MatrixFormat) -> String {
    let mut s = String::new();
    match format {
        MatrixFormat::MatrixMarketCoordinate => {
            let nnz = m.as_slice().iter().filter(|v| **v != 0.0).count();
            s.push_str("%%MatrixMarket matrix coordinate real general\n");
            s.push_str(&format!("{} {} {nnz}\n", m.rows(), m.cols()));
            for j in 0..m.cols() {
                for i in 0..m.rows() {
                    if m[(i, j)] != 0.0 {
                        s.push_str(&format!("{} {} {:?}\n", i + 1, j + 1, m[(i, j)]));
                    }
                }
            }
        }
        _ => {
            s.push_str("%%MatrixMarket matrix array real general\n");
            s.push_str(&format!("{} {}\n", m.rows(), m.cols()));
            for j in 0..m.cols() {
                for i in 0..m.rows() {
                    s.push_str(&format!("{:?}\n", m[(i, j)]));
                }
            }
        }
    }
    s
}

pub fn write_matrix(m: &DenseMatrix, path: &Path, format: MatrixFormat) -> Result<()> {
    let text = match format {
        MatrixFormat::Csv => to_csv_string(m),
        other => to_matrix_market_string(m, other),
    };
    write_text_file(path, &text)
}

pub fn write_text_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Pretty-printed JSON with floats as `{:.16e}`.
struct FixedDigits<'a>(PrettyFormatter<'a>);

impl Formatter for FixedDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write!(w, "{:.16e}", f64::from(v))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes any value in the report JSON style, with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| Error::Io(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| parse_err(e.line(), e.to_string()))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_text_file(path, &to_json(value)?)
}

pub fn emit_report(report: &SolveReport, path: &Path) -> Result<()> {
    write_json(report, path)
}

pub fn parse_report(text: &str) -> Result<SolveReport> {
    from_json(text)
}

/// Generator parameters and planted truth, written as `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub family: String,
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub rho: f64,
    pub noise: NoiseModel,
    pub seed: u64,
    pub x_star: Vec<f64>,
    pub corrupted_count: usize,
    pub corrupted_rows: Vec<usize>,
}

impl From<&ReferenceInstance> for InstanceMeta {
    fn from(r: &ReferenceInstance) -> Self {
        Self {
            family: "reference".into(),
            n: r.instance.n(),
            d: r.instance.m(),
            p: r.instance.p(),
            rho: r.rho,
            noise: r.noise,
            seed: r.seed,
            x_star: r.x_star.clone(),
            corrupted_count: r.corrupted.len(),
            corrupted_rows: r.corrupted.clone(),
        }
    }
}

/// Writes `A.csv`, `b.csv` and `meta.json` for a reference-family instance
/// into `dir`, creating it if needed.
pub fn generate_instance(
    dir: &Path,
    n: usize,
    d: usize,
    p: f64,
    noise: NoiseModel,
    rho: f64,
    seed: u64,
) -> Result<ReferenceInstance> {
    let r = reference_instance(n, d, p, rho, noise, seed)?;
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    write_matrix(r.instance.a(), &dir.join("A.csv"), MatrixFormat::Csv)?;
    write_matrix(r.instance.b(), &dir.join("b.csv"), MatrixFormat::Csv)?;
    write_json(&InstanceMeta::from(&r), &dir.join("meta.json"))?;
    Ok(r)
}
