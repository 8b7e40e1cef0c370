//! Base-point move files:
//! `{schema_version, type: "conjugation" | "dressing", h?, ring_g?,
//! z_source, z_target, gauge?}`.
//!
//! A conjugation without `h` uses `h = F₀(z_target, λ = 1)`. A dressing
//! without `ring_g` uses `g̊ = (F₀(z_target) k₀)⁻¹`. `gauge` is a matrix
//! `k₀`, or the string `"normalize_at_target"` for conjugations.

use serde::{Deserialize, Serialize};

use dpwkit::linalg::{self, c, CMatrix};
use dpwkit::loopcore::json::{LoopJson, MatrixJson};

use crate::config::SCHEMA_VERSION;
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveType {
    Conjugation,
    Dressing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GaugeJson {
    Named(String),
    Matrix(MatrixJson),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoveJson {
    pub schema_version: u32,
    #[serde(rename = "type")]
    pub move_type: MoveType,
    #[serde(default)]
    pub h: Option<MatrixJson>,
    #[serde(default)]
    pub ring_g: Option<LoopJson>,
    pub z_source: [f64; 2],
    pub z_target: [f64; 2],
    #[serde(default)]
    pub gauge: Option<GaugeJson>,
}

pub enum Gauge {
    Matrix(CMatrix),
    NormalizeAtTarget,
}

impl MoveJson {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::schema(format!("unsupported schema_version {}", self.schema_version)));
        }
        match self.move_type {
            MoveType::Conjugation if self.ring_g.is_some() => {
                Err(CliError::schema("ring_g is only meaningful for dressing moves"))
            }
            MoveType::Dressing if self.h.is_some() => Err(CliError::schema("h is only meaningful for conjugation moves")),
            _ => Ok(()),
        }
    }

    pub fn gauge(&self, n: usize) -> Result<Gauge, CliError> {
        match &self.gauge {
            None => Ok(Gauge::Matrix(linalg::identity(n))),
            Some(GaugeJson::Matrix(m)) => Ok(Gauge::Matrix(m.to_matrix()?)),
            Some(GaugeJson::Named(s)) if s == "normalize_at_target" && self.move_type == MoveType::Conjugation => {
                Ok(Gauge::NormalizeAtTarget)
            }
            Some(GaugeJson::Named(s)) => Err(CliError::schema(format!("unknown gauge `{s}` for this move type"))),
        }
    }

    pub fn z_source(&self) -> num_complex::Complex64 {
        c(self.z_source[0], self.z_source[1])
    }

    pub fn z_target(&self) -> num_complex::Complex64 {
        c(self.z_target[0], self.z_target[1])
    }
}
