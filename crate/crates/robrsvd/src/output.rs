//! Text output. CSV numbers use 17 significant digits in scientific
//! notation so that files are byte-stable and every value round-trips;
//! JSON uses the shortest round-trip representation.

use std::fmt::Write as _;
use std::path::Path;

use robrsvd_core::bench::SummaryRow;
use robrsvd_core::GcvTrace;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn csv_number(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// Columns `lambda,gcv,hat_trace,chosen`.
pub fn gcv_trace_csv(trace: &GcvTrace) -> String {
    let mut out = String::from("lambda,gcv,hat_trace,chosen\n");
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            csv_number(r.lambda),
            csv_number(r.gcv),
            csv_number(r.hat_trace),
            r.chosen
        );
    }
    out
}

/// Columns `<label name>,grid,value`.
pub fn vector_csv(label_name: &str, labels: &[String], grid: &[f64], values: &[f64]) -> String {
    let mut out = format!("{label_name},grid,value\n");
    for ((l, t), v) in labels.iter().zip(grid).zip(values) {
        let _ = writeln!(out, "{l},{},{}", csv_number(*t), csv_number(*v));
    }
    out
}

/// Columns `t,value` of a sampled curve.
pub fn curve_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("t,value\n");
    for &(t, v) in points {
        let _ = writeln!(out, "{},{}", csv_number(t), csv_number(v));
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("scenario,method,sigma2,metric,median,q1,q3,replications,failures\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.method,
            csv_number(r.sigma2),
            r.metric,
            csv_number(r.median),
            csv_number(r.q1),
            csv_number(r.q3),
            r.replications,
            r.failures
        );
    }
    out
}
