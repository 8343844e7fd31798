//! Serialization with round-trip float precision and atomic file writes.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

/// Wraps a JSON formatter so every float is written with 17 significant
/// digits.
pub struct Digits17<F>(pub F);

macro_rules! delegate {
    ($($name:ident),*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
            self.0.$name(w)
        })*
    };
}

impl<F: Formatter> Formatter for Digits17<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    delegate!(begin_array, end_array, end_array_value, begin_object, end_object, begin_object_value, end_object_value);
}

fn to_bytes<T: Serialize, F: Formatter>(value: &T, formatter: F) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(formatter));
    value.serialize(&mut ser).expect("in-memory JSON serialization");
    buf
}

/// Indented JSON document with a trailing newline.
pub fn pretty_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = to_bytes(value, PrettyFormatter::new());
    out.push(b'\n');
    out
}

/// Single-line JSON.
pub fn compact_json<T: Serialize>(value: &T) -> String {
    String::from_utf8(to_bytes(value, CompactFormatter)).expect("JSON is UTF-8")
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_round_trip() {
        let v = json!({"a": 0.1, "b": [1.0 / 3.0, 1e-300, -2.5], "n": 3});
        let text = compact_json(&v);
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["b"][0].as_f64(), Some(1.0 / 3.0));
        assert_eq!(back["b"][1].as_f64(), Some(1e-300));
        assert_eq!(back["n"].as_u64(), Some(3));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
    }
}
