//! Deterministic output helpers: every float is written with 17 significant
//! digits so files round-trip exactly.

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};
use std::io::{self, Write};

/// Formats a float as `d.dddddddddddddddde±x`; non-finite values become `null` in JSON
/// and `nan`/`inf` in CSV.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

struct Precise<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident($($arg:ident : $ty:ty),*)),* $(,)?) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(w $(, $arg)*)
            }
        )*
    };
}

impl Formatter for Precise<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            w.write_all(fmt_f64(v).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        end_object_key(),
        begin_object_value(),
        end_object_value(),
    );
}

pub fn to_string_precise<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, Precise(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes utf-8"))
}

/// Joins a row of floats for CSV output.
pub fn csv_row(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        let xs: [f64; 5] = [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0];
        let s = to_string_precise(&serde_json::json!({ "x": xs })).unwrap();
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            assert_eq!(back["x"][i].as_f64().unwrap().to_bits(), x.to_bits());
        }
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        let row = csv_row(&[1.0 / 7.0, f64::NAN]);
        let first: f64 = row.split(',').next().unwrap().parse().unwrap();
        assert_eq!(first, 1.0 / 7.0);
        assert!(row.ends_with("nan"));
    }

    #[test]
    fn non_finite_is_null() {
        let s = to_string_precise(&[f64::INFINITY]).unwrap();
        assert!(s.contains("null"));
    }
}
