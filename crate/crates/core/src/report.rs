//! JSON and CSV encodings shared by the reports.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{CMat, C64};

/// Row-major matrix with split real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&CMat> for MatrixJson {
    fn from(m: &CMat) -> Self {
        let (rows, cols) = m.shape();
        MatrixJson {
            rows,
            cols,
            re: (0..rows)
                .map(|i| (0..cols).map(|j| m[(i, j)].re).collect())
                .collect(),
            im: (0..rows)
                .map(|i| (0..cols).map(|j| m[(i, j)].im).collect())
                .collect(),
        }
    }
}

impl From<&MatrixJson> for CMat {
    fn from(m: &MatrixJson) -> Self {
        CMat::from_fn(m.rows, m.cols, |i, j| C64::new(m.re[i][j], m.im[i][j]))
    }
}

/// `#[serde(with = "crate::report::cmat")]` adapter.
pub mod cmat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        Ok(CMat::from(&j))
    }
}

/// Flattens a matrix row-major into `re, im` pairs.
pub fn flatten_re_im(m: &CMat) -> Vec<f64> {
    let (rows, cols) = m.shape();
    let mut out = Vec::with_capacity(2 * rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    out
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> crate::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
