//! Result rows and their CSV encoding.

use std::io::Write;

use serde::Serialize;
use toml::Value;

/// One measure at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    /// Swept parameter values, already formatted.
    pub values: Vec<String>,
    pub measure: String,
    /// `None` for rows without an analytic counterpart (some warnings).
    pub analytic: Option<f64>,
    pub sim: Option<SimCell>,
    pub runtime_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimCell {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    /// Runs that never ramped up within the horizon (ramp-up rows only).
    pub truncated: u64,
}

/// 17 significant digits; infinities as `inf`/`-inf`.
pub fn format_float(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn format_value(v: &Value) -> String {
    match v {
        Value::Float(x) => format_float(*x),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub fn write_csv<W: Write>(out: W, names: &[String], rows: &[ResultRow]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    header.extend(["measure", "analytic", "sim_mean", "sim_stderr", "runtime_s"]);
    w.write_record(&header)?;
    for row in rows {
        let mut record = row.values.clone();
        record.push(row.measure.clone());
        record.push(opt(row.analytic));
        // A ramp-up estimate with censored runs has no finite mean to report.
        let sim = row.sim.filter(|s| s.truncated == 0);
        record.push(opt(sim.map(|s| s.mean)));
        record.push(opt(sim.map(|s| s.stderr)));
        record.push(opt(row.runtime_s));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
