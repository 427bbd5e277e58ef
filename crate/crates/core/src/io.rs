//! Text formats shared by the library and the command-line tool.
//!
//! Matrices: first line `rows cols`, then row-major whitespace-separated
//! values, written with 17 significant digits so they round-trip exactly.
//! Vectors use the same format with one column. Scalars are a single value.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::l2reg::L2Trace;
use crate::linalg::Matrix;
use crate::qp::ResidualTrace;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// 17 significant digits, the shortest width that round-trips every `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_matrix<W: Write>(mut w: W, a: &Matrix) -> Result<()> {
    writeln!(w, "{} {}", a.rows(), a.cols())?;
    for i in 0..a.rows() {
        let row: Vec<String> = a.row(i).iter().map(|v| format_value(*v)).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<Matrix> {
    let mut tokens: Vec<(usize, String)> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("");
        tokens.extend(body.split_whitespace().map(|t| (i + 1, t.to_owned())));
    }
    let mut it = tokens.into_iter();
    let mut dim = |what: &str| -> Result<usize> {
        let (line, t) = it.next().ok_or_else(|| parse_err(1, format!("missing {what}")))?;
        t.parse().map_err(|_| parse_err(line, format!("bad {what} `{t}`")))
    };
    let (rows, cols) = (dim("row count")?, dim("column count")?);
    let mut data = Vec::with_capacity(rows * cols);
    let mut last_line = 1;
    for (line, t) in it {
        last_line = line;
        let v: f64 = t.parse().map_err(|_| parse_err(line, format!("bad value `{t}`")))?;
        if !v.is_finite() {
            return Err(parse_err(line, "non-finite value"));
        }
        data.push(v);
    }
    if data.len() != rows * cols {
        return Err(parse_err(
            last_line,
            format!("expected {} values, found {}", rows * cols, data.len()),
        ));
    }
    Matrix::from_row_major(rows, cols, data)
}

pub fn write_vector<W: Write>(w: W, v: &[f64]) -> Result<()> {
    write_matrix(w, &Matrix::column(v))
}

/// Accepts a single row or a single column.
pub fn read_vector<R: BufRead>(r: R) -> Result<Vec<f64>> {
    let m = read_matrix(r)?;
    if m.cols() != 1 && m.rows() != 1 {
        return Err(parse_err(
            1,
            format!("expected a vector, found {}x{}", m.rows(), m.cols()),
        ));
    }
    Ok(m.into_vec())
}

pub fn write_scalar<W: Write>(mut w: W, v: f64) -> Result<()> {
    writeln!(w, "{}", format_value(v))?;
    Ok(())
}

pub fn read_scalar<R: BufRead>(r: R) -> Result<f64> {
    let mut text = String::new();
    for line in r.lines() {
        let line = line?;
        text.push_str(line.split('#').next().unwrap_or(""));
        text.push(' ');
    }
    let mut it = text.split_whitespace();
    let t = it.next().ok_or_else(|| parse_err(1, "empty scalar file"))?;
    if it.next().is_some() {
        return Err(parse_err(1, "expected a single value"));
    }
    let v: f64 = t.parse().map_err(|_| parse_err(1, format!("bad value `{t}`")))?;
    if !v.is_finite() {
        return Err(parse_err(1, "non-finite value"));
    }
    Ok(v)
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    Ok(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn load_matrix(path: &Path) -> Result<Matrix> {
    read_matrix(open(path)?)
}

pub fn load_vector(path: &Path) -> Result<Vec<f64>> {
    read_vector(open(path)?)
}

pub fn load_scalar(path: &Path) -> Result<f64> {
    read_scalar(open(path)?)
}

pub fn save_matrix(path: &Path, a: &Matrix) -> Result<()> {
    write_matrix(std::io::BufWriter::new(std::fs::File::create(path)?), a)
}

pub fn save_vector(path: &Path, v: &[f64]) -> Result<()> {
    write_vector(std::io::BufWriter::new(std::fs::File::create(path)?), v)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_default()
}

/// Lines of the form `# key=value` ahead of the CSV header.
pub fn write_header_comments<W: Write>(w: &mut W, comments: &[(String, String)]) -> Result<()> {
    for (k, v) in comments {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

/// Columns `k, dual_error, x_error`, one row per iterate from `k = 0`.
pub fn write_l2_trace<W: Write>(mut w: W, trace: &L2Trace, comments: &[(String, String)]) -> Result<()> {
    write_header_comments(&mut w, comments)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "dual_error", "x_error"]).map_err(csv_err)?;
    for (k, d) in trace.dual_error.iter().enumerate() {
        let x = trace.x_error.get(k).copied();
        out.write_record([k.to_string(), format_value(*d), opt(x)])
            .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `k, r_norm, s_norm, fv_norm, eps_k, delta_k, zeta_lb_k`. Undefined
/// lower-bound diagnostics are left empty.
pub fn write_qp_trace<W: Write>(mut w: W, trace: &ResidualTrace, comments: &[(String, String)]) -> Result<()> {
    write_header_comments(&mut w, comments)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "r_norm", "s_norm", "fv_norm", "eps_k", "delta_k", "zeta_lb_k"])
        .map_err(csv_err)?;
    for s in &trace.steps {
        out.write_record([
            s.k.to_string(),
            format_value(s.r_norm),
            format_value(s.s_norm),
            format_value(s.fv_norm),
            opt(s.eps),
            opt(s.delta),
            opt(s.zeta_lb),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// One batch instance: its initial state and the files holding `q` and `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: usize,
    pub x0: Vec<f64>,
    pub q: PathBuf,
    pub b: PathBuf,
}

/// Batch of QPs sharing `Q` and `A`. Paths are relative to the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub q_matrix: PathBuf,
    pub a_matrix: PathBuf,
    pub instances: Vec<ManifestEntry>,
    pub infeasible: Vec<Vec<f64>>,
    pub undetermined: Vec<Vec<f64>>,
    /// Generator settings, kept verbatim for provenance.
    #[serde(default)]
    pub generator: serde_json::Value,
}

impl BatchManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidParameter(format!("manifest encoding: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| parse_err(e.line(), e.to_string()))
    }

    /// Loads every instance, resolving paths against `base`.
    pub fn load_problems(&self, base: &Path) -> Result<Vec<crate::qp::QpProblem>> {
        let q_mat = crate::linalg::SymMatrix::new(load_matrix(&base.join(&self.q_matrix))?)?;
        let a = load_matrix(&base.join(&self.a_matrix))?;
        self.instances
            .iter()
            .map(|e| {
                crate::qp::QpProblem::from_parts(
                    q_mat.clone(),
                    load_vector(&base.join(&e.q))?,
                    a.clone(),
                    load_vector(&base.join(&e.b))?,
                )
            })
            .collect()
    }
}
