//! Deterministic serialization: JSON with every float printed at 17
//! significant digits (so parsing recovers the exact f64 and reruns are
//! byte-comparable), and headered CSV for per-replica data.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

/// Compact JSON formatter that renders f64 as `{:.16e}` (17 significant
/// digits, always round-trippable).
struct F17;

impl Formatter for F17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        debug_assert!(value.is_finite(), "non-finite float in output: {value}");
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.8e}")
    }
}

/// Serialize `value` as deterministic JSON text.
pub fn to_json_string<T: Serialize>(value: &T) -> io::Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, F17);
    value
        .serialize(&mut ser)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    String::from_utf8(buf).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = to_json_string(value)?;
    text.push('\n');
    std::fs::write(path, text)
}

/// One CSV per series: header `replica_index,n,value`, floats at 17
/// significant digits.
pub fn write_replica_csv(path: &Path, rows: &[mrw_core::stats::ReplicaStat]) -> io::Result<()> {
    let mut out = String::with_capacity(rows.len() * 32 + 32);
    out.push_str("replica_index,n,value\n");
    for r in rows {
        out.push_str(&format!("{},{},{:.16e}\n", r.replica, r.n, r.value));
    }
    std::fs::write(path, out)
}

/// Generic numeric table with a caller-supplied header.
pub fn write_table_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> io::Result<()> {
    let mut out = String::with_capacity(rows.len() * 32 + header.len() + 2);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            out.push_str(&format!("{v:.16e}"));
            first = false;
        }
        out.push('\n');
    }
    std::fs::write(path, out)
}
