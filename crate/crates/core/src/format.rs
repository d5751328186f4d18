//! Fixed-precision number output shared by every serialised report.
//!
//! Numbers are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` and keeps output byte-stable across platforms.

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// `x` with 17 significant digits; non-finite values as `inf`, `-inf`, `nan`.
pub fn sig17(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// A float that serialises as a 17-digit JSON number, or as a string when
/// not finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let raw = RawValue::from_string(sig17(self.0)).map_err(serde::ser::Error::custom)?;
            raw.serialize(s)
        } else {
            s.serialize_str(&sig17(self.0))
        }
    }
}

/// For `#[serde(serialize_with = "ser_num")]` on `f64` fields.
pub fn ser_num<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    Num(*x).serialize(s)
}

/// For `#[serde(serialize_with = "ser_opt_num")]` on `Option<f64>` fields.
pub fn ser_opt_num<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => Num(*v).serialize(s),
        None => s.serialize_none(),
    }
}

/// For `#[serde(serialize_with = "ser_vec_num")]` on `Vec<f64>` fields.
pub fn ser_vec_num<S: Serializer>(x: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(x.len()))?;
    for v in x {
        seq.serialize_element(&Num(*v))?;
    }
    seq.end()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(sig17(0.1), "1.0000000000000001e-1");
        assert_eq!(sig17(1.0), "1.0000000000000000e0");
        assert_eq!(sig17(f64::INFINITY), "inf");
        for x in [std::f64::consts::PI, 1e-300, -2.5e17, 5e-324] {
            assert_eq!(sig17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_numbers() {
        let v = vec![Num(0.5), Num(f64::INFINITY)];
        assert_eq!(
            serde_json::to_string(&v).unwrap(),
            "[5.0000000000000000e-1,\"inf\"]"
        );
        let back: Vec<serde_json::Value> = serde_json::from_str("[5.0000000000000000e-1]").unwrap();
        assert_eq!(back[0].as_f64(), Some(0.5));
    }
}
