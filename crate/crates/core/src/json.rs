//! JSON numbers at 17 significant digits.

use serde::ser::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::Matrix;

/// An `f64` that serializes as `d.dddddddddddddddde±x`, or `null` when not
/// finite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

pub fn nums(v: &[f64]) -> Vec<Num> {
    v.iter().map(|&x| Num(x)).collect()
}

/// Row-major nested arrays.
pub fn matrix(m: &Matrix<f64>) -> Vec<Vec<Num>> {
    (0..m.nrows()).map(|i| nums(m.row(i))).collect()
}
