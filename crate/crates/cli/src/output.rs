use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rqr3d::scene::{self, Document};
use rqr3d::Result;
use serde::Serialize;
use serde_json::Value;

/// Rounds to 9 significant digits so reports stay stable across platforms.
pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().unwrap_or(v)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(xs) => xs.iter_mut().for_each(round_value),
        Value::Object(m) => m.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 9 significant digits.
pub fn report_json<T: Serialize>(report: &T) -> Result<String> {
    let mut v = serde_json::to_value(report)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_bytes(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p)?);
            f.write_all(bytes)?;
            f.flush()?;
        }
        None => {
            let mut s = io::stdout().lock();
            s.write_all(bytes)?;
            s.flush()?;
        }
    }
    Ok(())
}

/// Documents keep full precision; `.gz` paths are compressed.
pub fn write_document<F: Serialize>(out: Option<&Path>, doc: &Document<F>) -> Result<()> {
    match out {
        Some(p) => scene::save(doc, p),
        None => write_bytes(None, scene::to_json_string(doc)?.as_bytes()),
    }
}

pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| rqr3d::Error::Io(e.into_error()))
}

fn csv_err(e: csv::Error) -> rqr3d::Error {
    rqr3d::Error::Io(io::Error::other(e))
}

/// Shortest round-trip form for CSV cells.
pub fn num(v: f64) -> String {
    format!("{v}")
}
