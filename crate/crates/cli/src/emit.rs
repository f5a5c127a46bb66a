//! Deterministic output: compact JSON with every float written to 17 significant digits,
//! and CSV tables of spectrum samples.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;
use torus_spectral::tracer::SpectrumSample;
use torus_spectral::Complex64;

/// Writes floats as `d.dddddddddddddddde±x` and non-finite values as `null`. The other
/// methods keep serde_json's compact defaults.
struct SigFormatter;

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{}", sig17(value))
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter);
    value.serialize(&mut ser).expect("serialising to memory cannot fail");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

pub fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// One CSV row per sample.
pub struct Row {
    pub a: Complex64,
    pub b: Complex64,
    pub sigma_min: f64,
    pub kernel_dim: usize,
    pub branch_tag: String,
}

impl From<&SpectrumSample<f64>> for Row {
    fn from(s: &SpectrumSample<f64>) -> Self {
        Row {
            a: s.a,
            b: s.b,
            sigma_min: s.sigma_min,
            kernel_dim: s.kernel_dim,
            branch_tag: s.tag.as_str().to_string(),
        }
    }
}

pub const CSV_HEADER: [&str; 7] = ["a_re", "a_im", "b_re", "b_im", "sigma_min", "kernel_dim", "branch_tag"];

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            sig17(r.a.re),
            sig17(r.a.im),
            sig17(r.b.re),
            sig17(r.b.im),
            sig17(r.sigma_min),
            r.kernel_dim.to_string(),
            r.branch_tag.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
