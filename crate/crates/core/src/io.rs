//! Deterministic CSV and JSON output.
//!
//! Floats are written in shortest round-trip form, CSV uses `,` with a
//! header row and LF line endings.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::continuation::ContinuationTrace;
use crate::discretize::OperatorAssembly;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const TRACE_HEADER: [&str; 9] = ["stage", "alpha", "p", "Q", "sup_v", "argmax_r", "residual", "iterations", "norm_pcrit"];
pub const FIELD_HEADER: [&str; 3] = ["r", "v", "rho_alpha_v"];

/// Shortest decimal string that parses back to `x`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// CSV document from a header and rows of already formatted cells.
pub fn csv_document<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: AsRef<[String]>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.as_ref().join(","));
        out.push('\n');
    }
    out
}

pub fn trace_csv<T: Real>(trace: &ContinuationTrace<T>) -> String {
    let rows = trace.records.iter().map(|r| {
        vec![
            r.stage.to_string(),
            fmt_f64(r.alpha.as_f64()),
            fmt_f64(r.p.as_f64()),
            fmt_f64(r.q.as_f64()),
            fmt_f64(r.sup_v.as_f64()),
            fmt_f64(r.argmax_r.as_f64()),
            fmt_f64(r.residual.as_f64()),
            r.iterations.to_string(),
            fmt_f64(r.norm_pcrit_unweighted.as_f64()),
        ]
    });
    csv_document(&TRACE_HEADER, rows)
}

/// Nodal values `r, v, ρ^α v`.
pub fn field_csv<T: Real>(a: &OperatorAssembly<T>, v: &[T], alpha: T) -> Result<String> {
    if v.len() != a.len() {
        return Err(Error::Dimension { expected: a.len(), got: v.len() });
    }
    let w = a.weight_spec();
    let mut rows = Vec::with_capacity(v.len());
    for (&r, &x) in a.radii().iter().zip(v) {
        let rho = w.weight(r, alpha)?;
        rows.push(vec![fmt_f64(r.as_f64()), fmt_f64(x.as_f64()), fmt_f64((rho * x).as_f64())]);
    }
    Ok(csv_document(&FIELD_HEADER, rows))
}

/// Pretty JSON with a trailing newline.
pub fn json_document(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Fixed-width text table for terminal summaries.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  "));
    };
    line(header.to_vec(), &mut out);
    for row in rows {
        line(row.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0, 43.82323, 1e-300, -2.5e17, 6.0 / 7.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert!(!s.contains(' '));
        }
        assert_eq!(fmt_f64(0.5), "0.5");
    }

    #[test]
    fn csv_layout() {
        let doc = csv_document(&["a", "b"], vec![vec!["1".to_string(), "2.5".to_string()]]);
        assert_eq!(doc, "a,b\n1,2.5\n");
        assert!(!doc.contains('\r'));
    }
}
