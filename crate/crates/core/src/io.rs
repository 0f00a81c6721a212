//! File formats: system descriptions (JSON), certificates (JSON), traces (CSV)
//! and binary state dumps.
//!
//! A system file looks like
//!
//! ```json
//! {
//!   "n": 2, "a": 0.0, "b": 1.0,
//!   "P1": [[0, 1], [1, 0]], "P0": [[0, 0], [0, 0]], "G0": [[0, 0], [0, 0]],
//!   "L": {"expr": [["1", "0"], ["0", "1"]]},
//!   "W1": [[1, 0]], "W2": [[1, 0]], "Wt1": [[0, 1]], "K": [[1]]
//! }
//! ```
//!
//! Matrices may be nested row arrays or flat row-major arrays. `L` is either
//! `{"expr": [[...]], "derivative": "analytic" | "finite-difference"}` or
//! `{"samples": {"x": [...], "values": [matrix, ...]}}`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::certifier::Certificate;
use crate::coefficient::{CoefficientFunction, DerivativeMode};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::Mat;
use crate::simulator::SimulationTrace;
use crate::system::PhSystem;

pub const TOOL_NAME: &str = "phs-decay";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixJson {
    Nested(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl MatrixJson {
    fn from_mat(m: &Mat) -> Self {
        MatrixJson::Nested((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
    }

    fn into_mat(self, name: &str, rows: usize, cols: usize) -> Result<Mat> {
        let data: Vec<f64> = match self {
            MatrixJson::Nested(r) => {
                if r.len() != rows || r.iter().any(|row| row.len() != cols) {
                    return Err(Error::Structural(format!(
                        "{name} must be {rows}x{cols}, got {} rows of lengths {:?}",
                        r.len(),
                        r.iter().map(Vec::len).collect::<Vec<_>>()
                    )));
                }
                r.concat()
            }
            MatrixJson::Flat(v) => {
                if v.len() != rows * cols {
                    return Err(Error::Structural(format!(
                        "{name} must have {} entries ({rows}x{cols}), got {}",
                        rows * cols,
                        v.len()
                    )));
                }
                v
            }
        };
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structural(format!("{name} has non-finite entries")));
        }
        Ok(Mat::from_row_slice(rows, cols, &data))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum EntryJson {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleTable {
    x: Vec<f64>,
    values: Vec<MatrixJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum DensityJson {
    Expr {
        expr: Vec<Vec<EntryJson>>,
        #[serde(default)]
        derivative: DerivativeMode,
    },
    Samples {
        samples: SampleTable,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    n: usize,
    a: f64,
    b: f64,
    #[serde(rename = "P1")]
    p1: MatrixJson,
    #[serde(rename = "P0")]
    p0: MatrixJson,
    #[serde(rename = "G0")]
    g0: MatrixJson,
    #[serde(rename = "L")]
    l: DensityJson,
    #[serde(rename = "W1")]
    w1: MatrixJson,
    #[serde(rename = "W2")]
    w2: MatrixJson,
    #[serde(rename = "Wt1")]
    wt1: MatrixJson,
    #[serde(rename = "K")]
    k: MatrixJson,
}

fn density_from_json(d: DensityJson, n: usize) -> Result<CoefficientFunction> {
    match d {
        DensityJson::Expr { expr, derivative } => {
            let rows = expr
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|e| match e {
                            EntryJson::Number(v) => Ok(Expr::constant(v)),
                            EntryJson::Text(s) => Expr::parse(&s),
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            if rows.len() != n {
                return Err(Error::Structural(format!("L must be {n}x{n}, got {} rows", rows.len())));
            }
            CoefficientFunction::from_parsed(rows, derivative)
        }
        DensityJson::Samples { samples } => {
            let values = samples
                .values
                .into_iter()
                .enumerate()
                .map(|(i, m)| m.into_mat(&format!("L sample {i}"), n, n))
                .collect::<Result<Vec<_>>>()?;
            CoefficientFunction::from_samples(samples.x, values)
        }
    }
}

fn density_to_json(l: &CoefficientFunction) -> DensityJson {
    match l {
        CoefficientFunction::Expr { entries, mode } => DensityJson::Expr {
            expr: entries
                .iter()
                .map(|row| row.iter().map(|e| EntryJson::Text(e.source().to_string())).collect())
                .collect(),
            derivative: *mode,
        },
        CoefficientFunction::Samples { x, values, .. } => DensityJson::Samples {
            samples: SampleTable { x: x.clone(), values: values.iter().map(MatrixJson::from_mat).collect() },
        },
    }
}

pub fn parse_system(text: &str) -> Result<PhSystem> {
    let f: SystemFile = serde_json::from_str(text)?;
    let n = f.n;
    if n == 0 || n % 2 != 0 {
        return Err(Error::Structural(format!("n = {n} must be even and positive")));
    }
    let h = n / 2;
    let sys = PhSystem {
        n,
        a: f.a,
        b: f.b,
        p1: f.p1.into_mat("P1", n, n)?,
        p0: f.p0.into_mat("P0", n, n)?,
        g0: f.g0.into_mat("G0", n, n)?,
        l: density_from_json(f.l, n)?,
        w1: f.w1.into_mat("W1", h, n)?,
        w2: f.w2.into_mat("W2", h, n)?,
        wt1: f.wt1.into_mat("Wt1", h, n)?,
        k: f.k.into_mat("K", h, h)?,
    };
    sys.check_shapes()?;
    Ok(sys)
}

pub fn read_system(path: &Path) -> Result<PhSystem> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_system(&text)
}

fn system_file(sys: &PhSystem) -> SystemFile {
    SystemFile {
        n: sys.n,
        a: sys.a,
        b: sys.b,
        p1: MatrixJson::from_mat(&sys.p1),
        p0: MatrixJson::from_mat(&sys.p0),
        g0: MatrixJson::from_mat(&sys.g0),
        l: density_to_json(&sys.l),
        w1: MatrixJson::from_mat(&sys.w1),
        w2: MatrixJson::from_mat(&sys.w2),
        wt1: MatrixJson::from_mat(&sys.wt1),
        k: MatrixJson::from_mat(&sys.k),
    }
}

pub fn system_to_json(sys: &PhSystem) -> String {
    serde_json::to_string_pretty(&system_file(sys)).expect("system serializes")
}

/// SHA-256 of the compact JSON form; identifies the system a certificate belongs to.
pub fn system_hash(sys: &PhSystem) -> String {
    let compact = serde_json::to_string(&system_file(sys)).expect("system serializes");
    hex::encode(Sha256::digest(compact.as_bytes()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateFile {
    pub tool: String,
    pub version: String,
    pub system: String,
    pub system_sha256: String,
    pub certificate: Certificate,
}

impl CertificateFile {
    pub fn new(system_name: &str, sys: &PhSystem, cert: Certificate) -> Self {
        CertificateFile {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            system: system_name.into(),
            system_sha256: system_hash(sys),
            certificate: cert,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Human-readable certificate summary.
pub fn certificate_summary(name: &str, cert: &Certificate) -> String {
    let mut s = String::new();
    s.push_str(&format!("system      {name}\n"));
    s.push_str(&format!("multiplier  {}\n", describe_multiplier(&cert.multiplier)));
    for (k, v) in cert.params.table() {
        s.push_str(&format!("{k:<11} {v:.10}\n"));
    }
    s.push_str(&format!("c           {:.10}\n", cert.c));
    s.push_str(&format!("eps0        {:.10}\n", cert.eps0));
    s.push_str(&format!("eps1        {:.10}\n", cert.eps1));
    s.push_str(&format!("xi          {:.10}\n", cert.xi));
    s.push_str(&format!("eps         {:.10}\n", cert.eps));
    s.push_str(&format!("M={:.10}\n", cert.overshoot));
    s.push_str(&format!("alpha={:.10}\n", cert.alpha));
    s.push_str(&format!("margin      {:.3e}\n", cert.positivity_margin));
    s.push_str(&format!("grid        {} ({})\n", cert.grid_size, if cert.converged { "converged" } else { "NOT converged" }));
    for w in &cert.warnings {
        s.push_str(&format!("warning: {w}\n"));
    }
    s
}

pub fn describe_multiplier(m: &crate::multiplier::MultiplierSpec) -> String {
    use crate::multiplier::MultiplierSpec::*;
    match m {
        Linear { x0 } => format!("linear, m(x) = x - {x0}"),
        Exponential { scale, beta } => format!("exponential, m(x) = {scale} exp({beta} (x - a))"),
        Affine { q, d } => format!("affine, m(x) = {q} x + {d}"),
        Sampled { x, .. } => format!("sampled, {} points", x.len()),
    }
}

pub const SWEEP_HEADER: [&str; 7] = ["sweep_var", "eps0", "eps1", "c", "M", "alpha", "margin"];

/// One sweep row: the swept value and the resulting certificate.
pub fn write_sweep_csv<W: Write>(out: W, rows: &[(f64, Certificate)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for (v, c) in rows {
        w.write_record([v, &c.eps0, &c.eps1, &c.c, &c.overshoot, &c.alpha, &c.positivity_margin].map(|x| x.to_string()))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(out: W, trace: &SimulationTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let ports = trace.yb.first().map(Vec::len).unwrap_or(0);
    let mut header = vec!["t".to_string(), "H".to_string()];
    header.extend((1..=ports).map(|j| format!("yb_{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..trace.times.len() {
        let mut rec = vec![trace.times[i].to_string(), trace.energy[i].to_string()];
        rec.extend(trace.yb[i].iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub const STATE_MAGIC: &[u8; 8] = b"PHSSTATE";

/// Binary snapshot dump, little-endian: magic, `N` (u64), `n` (u64), `dt` (f64),
/// snapshot count (u64), then per snapshot the time (f64) and the
/// `(N + 1) x n` state in row-major (node-major) order.
pub fn write_state_dump<W: Write>(mut out: W, trace: &SimulationTrace) -> Result<()> {
    out.write_all(STATE_MAGIC)?;
    out.write_all(&(trace.cells as u64).to_le_bytes())?;
    out.write_all(&(trace.n as u64).to_le_bytes())?;
    out.write_all(&trace.dt.to_le_bytes())?;
    out.write_all(&(trace.snapshots.len() as u64).to_le_bytes())?;
    for s in &trace.snapshots {
        out.write_all(&s.time.to_le_bytes())?;
        for v in s.state.values.iter().flatten() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}
