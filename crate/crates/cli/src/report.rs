//! JSON and CSV output. Every reported number carries the `method` that
//! produced it.

use crate::error::{CliError, CliResult};
use critrace::numerics::Poly;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use std::io::Write;
use std::path::Path;

#[derive(Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    MonteCarlo,
    Fit,
    /// Numerical integration of the flow or its variational equations.
    Ode,
    /// Dense eigenvalue computation.
    Diagonalization,
}

pub fn tag(value: impl Serialize, method: Method) -> Value {
    json!({ "value": value, "method": method })
}

pub fn complex(z: Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

pub fn tag_c(z: Complex64, method: Method) -> Value {
    tag(complex(z), method)
}

pub fn tag_opt_c(z: Option<Complex64>, method: Method) -> Value {
    z.map_or(Value::Null, |z| tag_c(z, method))
}

pub fn matrix(m: &DMatrix<f64>) -> Value {
    Value::from((0..m.nrows()).map(|i| m.row(i).iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>())
}

/// Term list `[{exponents, coefficient}]` in the polynomial's term order.
pub fn poly(p: &Poly) -> Value {
    Value::from(p.terms().map(|(e, c)| json!({ "exponents": e, "coefficient": c })).collect::<Vec<_>>())
}

fn write_bytes(bytes: &[u8], out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::io(p.display().to_string(), e)),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(bytes).and_then(|_| so.flush()).map_err(|e| CliError::io("stdout", e))
        }
    }
}

pub fn write_json(v: &Value, out: Option<&Path>) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    write_bytes(s.as_bytes(), out)
}

/// Rows of numbers under a header; `trailer` lines are appended as `# ` comments.
pub fn write_csv(header: &[&str], rows: &[Vec<f64>], trailer: &[String], out: Option<&Path>) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|x| format!("{x:e}")))?;
    }
    let mut bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    for t in trailer {
        bytes.extend_from_slice(format!("# {t}\n").as_bytes());
    }
    write_bytes(&bytes, out)
}
