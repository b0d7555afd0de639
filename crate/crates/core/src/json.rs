//! JSON output with every float written to 17 significant digits, so that
//! artifacts are byte-identical across runs and platforms and round-trip
//! exactly.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

use crate::error::Result;

/// `v` in scientific notation with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FixedDigits;

impl Formatter for FixedDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_vec<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedDigits);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

pub fn to_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(String::from_utf8(to_vec(value)?).expect("serde_json emits utf-8"))
}

pub fn write_file<T: Serialize + ?Sized>(path: impl AsRef<std::path::Path>, value: &T) -> Result<()> {
    std::fs::write(path, to_vec(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_digits() {
        let s = to_string(&serde_json::json!({"x": 10f64.ln(), "n": 3, "z": 0.0})).unwrap();
        assert_eq!(s, "{\"x\":2.3025850929940459e0,\"n\":3,\"z\":0.0000000000000000e0}\n");
    }

    #[test]
    fn round_trip_is_exact() {
        for v in [0.1, 1.0 / 3.0, -7.25e-300, 1.7976931348623157e308, 5e-324] {
            let back: f64 = serde_json::from_str(format_f64(v).as_str()).unwrap();
            assert_eq!(back.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn non_finite_becomes_null() {
        assert_eq!(to_string(&[f64::NAN]).unwrap(), "[null]\n");
    }
}
