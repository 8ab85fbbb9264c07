//! JSON serialisation helpers: fixed-width float formatting for output files.

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::Serializer;
use std::io;

/// A `serde_json` formatter that prints every float with 17 significant
/// digits, so emitted values round-trip exactly.
#[derive(Default)]
pub struct Float17Formatter {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl Formatter for Float17Formatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{}", format_float(value))
    }

    // delegate layout to the pretty formatter
    fn begin_array<W>(&mut self, w: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_array(w)
    }
    fn end_array<W>(&mut self, w: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.end_array(w)
    }
    fn begin_array_value<W>(&mut self, w: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W>(&mut self, w: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.end_array_value(w)
    }
    fn begin_object<W>(&mut self, w: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_object(w)
    }
    fn end_object<W>(&mut self, w: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.end_object(w)
    }
    fn begin_object_key<W>(&mut self, w: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_object_key(w, first)
    }
    fn end_object_key<W>(&mut self, w: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.end_object_key(w)
    }
    fn begin_object_value<W>(&mut self, w: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W>(&mut self, w: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.inner.end_object_value(w)
    }
}

/// One float with 17 significant digits in scientific notation.
pub fn format_float(value: f64) -> String {
    if value == 0.0 && value.is_sign_positive() {
        "0.0".to_string()
    } else if value.is_finite() {
        format!("{value:.16e}")
    } else {
        // JSON has no inf/nan literals
        "null".to_string()
    }
}

/// Serialise to a pretty JSON string with 17-significant-digit floats.
pub fn to_string_f17<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, Float17Formatter::default());
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, std::f64::consts::PI, 1e-300, -7.25e17] {
            let s = format_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn serializes_with_17_digits() {
        let s = to_string_f17(&serde_json::json!({"x": 0.1})).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
    }
}
