//! Path-aware decoding of the JSON interchange formats.
//!
//! Errors carry a JSON-pointer-like path such as `povms[1][0][2][1]` so the
//! command line can point at the offending entry.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::hermitian::{CMatrix, HermitianOperator, C64};

pub(crate) fn err(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("at `{path}`: {msg}"))
}

pub(crate) fn field<'a>(v: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| err(path, format!("missing field `{key}`")))
}

pub(crate) fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| err(path, "expected an array"))
}

pub(crate) fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| err(path, "expected a non-negative integer"))
}

pub(crate) fn as_f64(v: &Value, path: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| err(path, "expected a number"))
}

/// Decodes `[[[re, im], ...], ...]` into a Hermitian operator.
pub fn matrix_from_value(v: &Value, path: &str) -> Result<HermitianOperator> {
    let rows = as_array(v, path)?;
    let n = rows.len();
    if n == 0 {
        return Err(err(path, "empty matrix"));
    }
    let mut m = CMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let rp = format!("{path}[{i}]");
        let cols = as_array(row, &rp)?;
        if cols.len() != n {
            return Err(err(&rp, format!("row has {} entries, expected {n}", cols.len())));
        }
        for (j, entry) in cols.iter().enumerate() {
            let ep = format!("{rp}[{j}]");
            let pair = as_array(entry, &ep)?;
            if pair.len() != 2 {
                return Err(err(&ep, "expected a [re, im] pair"));
            }
            m[(i, j)] = C64::new(as_f64(&pair[0], &format!("{ep}[0]"))?, as_f64(&pair[1], &format!("{ep}[1]"))?);
        }
    }
    HermitianOperator::new(m).map_err(|e| err(path, e))
}

/// SHA-256 of the JSON serialization, hex encoded.
pub fn digest<T: serde::Serialize + ?Sized>(value: &T) -> String {
    use sha2::{Digest, Sha256};
    let bytes = serde_json::to_vec(value).expect("value serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn matrix_to_value(op: &HermitianOperator) -> Value {
    serde_json::to_value(op.to_pairs()).expect("pairs serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn decodes_pairs() {
        let v = json!([[[1.0, 0.0], [0.0, -1.0]], [[0.0, 1.0], [2.0, 0.0]]]);
        let m = matrix_from_value(&v, "m").unwrap();
        assert_eq!(m.matrix()[(0, 1)], C64::new(0.0, -1.0));
        assert_eq!(matrix_to_value(&m), v);
    }

    #[test]
    fn reports_path() {
        let v = json!([[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], ["x", 0.0]]]);
        let e = matrix_from_value(&v, "povms[0][1]").unwrap_err();
        assert!(e.to_string().contains("povms[0][1][1][1][0]"), "{e}");
        let v = json!([[[1.0, 0.0], [0.0, 1.0]], [[0.0, 0.0], [1.0, 0.0]]]);
        let e = matrix_from_value(&v, "m").unwrap_err();
        assert!(e.to_string().contains("Hermitian"), "{e}");
    }
}
