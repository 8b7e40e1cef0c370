use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use dpwkit::grid::RectGrid;
use dpwkit::loopcore::{GroupModel, RealForm};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

/// Declarative run settings. Every field has a default, so `{}` is a valid
/// config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    /// Degree bound `N` of every loop.
    #[serde(rename = "N")]
    pub truncation: usize,
    pub structural_tol: f64,
    pub pipeline_tol: f64,
    pub grid: RectGrid,
    pub model: RealForm,
    /// Sample points `λ = e^{iπt}`, given by `t`.
    pub lambda_samples: Vec<f64>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            truncation: 8,
            structural_tol: 1e-10,
            pipeline_tol: 1e-8,
            grid: RectGrid::square(0.25, 21).expect("valid default grid"),
            model: RealForm::Compact,
            lambda_samples: vec![0.0, 0.5, 1.0, 0.25],
            output_dir: PathBuf::from("dpwkit-out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::json(&e, None))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::schema(format!("unsupported schema_version {}", self.schema_version)));
        }
        if self.truncation < 1 {
            return Err(CliError::schema("N must be at least 1"));
        }
        for (name, t) in [("structural_tol", self.structural_tol), ("pipeline_tol", self.pipeline_tol)] {
            if !(t > 0.0) {
                return Err(CliError::schema(format!("{name} must be positive")));
            }
        }
        self.grid.validate().map_err(CliError::from)?;
        if self.grid.nx < 3 || self.grid.ny < 3 {
            return Err(CliError::schema("grid resolution must be at least 3 per axis"));
        }
        if self.lambda_samples.is_empty() || self.lambda_samples.iter().any(|t| !t.is_finite()) {
            return Err(CliError::schema("lambda_samples must be a non-empty list of finite angles"));
        }
        Ok(())
    }

    pub fn lambdas(&self) -> Vec<Complex64> {
        self.lambda_samples
            .iter()
            .map(|t| Complex64::from_polar(1.0, std::f64::consts::PI * t))
            .collect()
    }

    pub fn group_model(&self) -> GroupModel {
        GroupModel::rank_one(self.model)
    }
}

/// `x_min,x_max,y_min,y_max,nx,ny`.
pub fn parse_grid(s: &str) -> Result<RectGrid, CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return Err(CliError::schema("--grid expects x_min,x_max,y_min,y_max,nx,ny"));
    }
    let f = |i: usize| {
        parts[i]
            .parse::<f64>()
            .map_err(|_| CliError::schema(format!("--grid: `{}` is not a number", parts[i])))
    };
    let u = |i: usize| {
        parts[i]
            .parse::<usize>()
            .map_err(|_| CliError::schema(format!("--grid: `{}` is not a point count", parts[i])))
    };
    RectGrid::new(f(0)?, f(1)?, f(2)?, f(3)?, u(4)?, u(5)?).map_err(CliError::from)
}

/// Comma-separated angles in units of π.
pub fn parse_lambda_samples(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::schema(format!("--lambda-samples: `{t}` is not a number")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        assert_eq!(RunConfig::from_json_str("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_fields_and_bad_values_are_schema_errors() {
        assert_eq!(RunConfig::from_json_str(r#"{"bogus": 1}"#).unwrap_err().kind, "schema");
        assert_eq!(RunConfig::from_json_str(r#"{"N": 0}"#).unwrap_err().kind, "schema");
        assert_eq!(RunConfig::from_json_str(r#"{"pipeline_tol": -1}"#).unwrap_err().kind, "schema");
    }

    #[test]
    fn grid_flag() {
        let g = parse_grid("-1,1,-0.5,0.5,11,5").unwrap();
        assert_eq!((g.nx, g.ny), (11, 5));
        assert!(parse_grid("1,2,3").is_err());
        assert_eq!(parse_lambda_samples("0, 0.5").unwrap(), vec![0.0, 0.5]);
    }
}
