//! JSON form of loops and matrices:
//! `{schema_version, n, N, parity, coefficients: [{k, re, im}]}`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::mloop::{MatrixLoop, Parity};
use crate::error::{DpwError, Result};
use crate::linalg::{c, CMatrix};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

/// Dense complex matrix as separate real and imaginary row arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        let rows = |f: fn(&num_complex::Complex64) -> f64| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
                .collect()
        };
        Self {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.re.len();
        if self.im.len() != n {
            return Err(DpwError::Schema("re/im row counts differ".into()));
        }
        let m = self.re.first().map_or(0, |r| r.len());
        for (r, i) in self.re.iter().zip(&self.im) {
            if r.len() != m || i.len() != m {
                return Err(DpwError::Schema("ragged matrix rows".into()));
            }
        }
        Ok(CMatrix::from_fn(n, m, |i, j| c(self.re[i][j], self.im[i][j])))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientJson {
    pub k: i32,
    #[serde(flatten)]
    pub value: MatrixJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopJson {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub n: usize,
    #[serde(rename = "N")]
    pub degree_bound: usize,
    #[serde(default)]
    pub parity: Parity,
    pub coefficients: Vec<CoefficientJson>,
}

impl From<&MatrixLoop> for LoopJson {
    fn from(g: &MatrixLoop) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n: g.size(),
            degree_bound: g.bound(),
            parity: g.parity(),
            coefficients: g
                .modes()
                .filter(|(_, m)| m.iter().any(|z| z.norm() != 0.0))
                .map(|(k, m)| CoefficientJson {
                    k,
                    value: m.into(),
                })
                .collect(),
        }
    }
}

impl TryFrom<LoopJson> for MatrixLoop {
    type Error = DpwError;

    fn try_from(j: LoopJson) -> Result<Self> {
        if j.schema_version != SCHEMA_VERSION {
            return Err(DpwError::Schema(format!(
                "unsupported schema_version {}",
                j.schema_version
            )));
        }
        let modes = j
            .coefficients
            .iter()
            .map(|cj| {
                let m = cj.value.to_matrix()?;
                if m.nrows() != j.n || m.ncols() != j.n {
                    return Err(DpwError::Schema(format!(
                        "coefficient k = {} is not {n}x{n}",
                        cj.k,
                        n = j.n
                    )));
                }
                Ok((cj.k, m))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MatrixLoop::from_modes(j.n, j.degree_bound, modes)?.with_parity(j.parity))
    }
}

impl Serialize for MatrixLoop {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LoopJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for MatrixLoop {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = LoopJson::deserialize(d)?;
        MatrixLoop::try_from(j).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_matrix;

    #[test]
    fn field_names_are_fixed() {
        let g = MatrixLoop::from_modes(2, 3, [(-1, real_matrix(&[&[0.0, 1.0], &[2.0, 0.0]]))])
            .unwrap();
        let v = serde_json::to_value(&g).unwrap();
        assert_eq!(v["n"], 2);
        assert_eq!(v["N"], 3);
        assert_eq!(v["coefficients"][0]["k"], -1);
        assert_eq!(v["coefficients"][0]["re"][1][0], 2.0);
        let back: MatrixLoop = serde_json::from_value(v).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn rejects_out_of_range_modes() {
        let text = r#"{"n":2,"N":1,"coefficients":[{"k":2,"re":[[1,0],[0,1]],"im":[[0,0],[0,0]]}]}"#;
        assert!(serde_json::from_str::<MatrixLoop>(text).is_err());
    }
}
