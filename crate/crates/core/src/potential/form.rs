use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DpwError, Result};
use crate::linalg::{self, c, CMatrix};
use crate::loopcore::json::{MatrixJson, SCHEMA_VERSION};
use crate::loopcore::{GroupModel, MatrixLoop, Parity};

/// Default radius of the disks excised around poles.
pub const DEFAULT_POLE_RADIUS: f64 = 0.05;

/// A denominator this small (relative to its coefficients) counts as a pole.
const POLE_EPS: f64 = 1e-13;

/// `ξ(z) = (Σ_m A_m z^m) / (Σ_m d_m z^m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalMatrix {
    numerator: Vec<CMatrix>,
    denominator: Vec<Complex64>,
}

impl RationalMatrix {
    pub fn new(numerator: Vec<CMatrix>, denominator: Vec<Complex64>) -> Result<Self> {
        let first = numerator
            .first()
            .ok_or_else(|| DpwError::Schema("empty numerator polynomial".into()))?;
        let n = first.nrows();
        if numerator.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(DpwError::Schema("numerator coefficients must be square of one size".into()));
        }
        let denominator = if denominator.is_empty() {
            vec![c(1.0, 0.0)]
        } else {
            denominator
        };
        if denominator.iter().all(|d| d.norm() == 0.0) {
            return Err(DpwError::Schema("denominator polynomial is identically zero".into()));
        }
        Ok(Self {
            numerator,
            denominator,
        })
    }

    pub fn polynomial(numerator: Vec<CMatrix>) -> Result<Self> {
        Self::new(numerator, vec![c(1.0, 0.0)])
    }

    pub fn constant(m: CMatrix) -> Self {
        Self {
            numerator: vec![m],
            denominator: vec![c(1.0, 0.0)],
        }
    }

    pub fn size(&self) -> usize {
        self.numerator[0].nrows()
    }

    pub fn numerator(&self) -> &[CMatrix] {
        &self.numerator
    }

    pub fn denominator(&self) -> &[Complex64] {
        &self.denominator
    }

    pub fn denominator_at(&self, z: Complex64) -> Complex64 {
        self.denominator.iter().rev().fold(c(0.0, 0.0), |acc, d| acc * z + d)
    }

    pub fn evaluate(&self, z: Complex64) -> Result<CMatrix> {
        let den = self.denominator_at(z);
        let scale: f64 = self
            .denominator
            .iter()
            .enumerate()
            .map(|(m, d)| d.norm() * z.norm().powi(m as i32))
            .sum();
        if den.norm() <= POLE_EPS * scale.max(f64::MIN_POSITIVE) {
            return Err(DpwError::PoleOnPath { pole: z });
        }
        let n = self.size();
        let num = self
            .numerator
            .iter()
            .rev()
            .fold(linalg::zeros(n), |acc, a| acc * z + a);
        Ok(num / den)
    }

    fn map_numerator<F: Fn(&CMatrix) -> CMatrix>(&self, f: F) -> Self {
        Self {
            numerator: self.numerator.iter().map(f).collect(),
            denominator: self.denominator.clone(),
        }
    }
}

/// `λ^mode ξ(z) dz`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialTerm {
    pub mode: i32,
    pub xi: RationalMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    Rect {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
    Disk {
        center: [f64; 2],
        radius: f64,
    },
}

impl Domain {
    pub fn contains(&self, z: Complex64, slack: f64) -> bool {
        match *self {
            Domain::Rect {
                x_min,
                x_max,
                y_min,
                y_max,
            } => {
                z.re >= x_min - slack
                    && z.re <= x_max + slack
                    && z.im >= y_min - slack
                    && z.im <= y_max + slack
            }
            Domain::Disk { center, radius } => {
                (z - c(center[0], center[1])).norm() <= radius + slack
            }
        }
    }
}

/// `η(z, λ) = Σ_j λ^j ξ_j(z) dz` with rational coefficient functions.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialOneForm {
    n: usize,
    pub basepoint: Complex64,
    pub domain: Domain,
    pub terms: Vec<PotentialTerm>,
    pub poles: Vec<Complex64>,
    pub pole_radius: f64,
}

impl PotentialOneForm {
    pub fn new(n: usize, basepoint: Complex64, domain: Domain, terms: Vec<PotentialTerm>) -> Result<Self> {
        for t in &terms {
            if t.xi.size() != n {
                return Err(DpwError::DimensionMismatch {
                    expected: n,
                    found: t.xi.size(),
                });
            }
        }
        Ok(Self {
            n,
            basepoint,
            domain,
            terms,
            poles: Vec::new(),
            pole_radius: DEFAULT_POLE_RADIUS,
        })
    }

    pub fn with_poles(mut self, poles: Vec<Complex64>) -> Self {
        self.poles = poles;
        self
    }

    pub fn zero(n: usize, basepoint: Complex64, domain: Domain) -> Self {
        Self::new(n, basepoint, domain, Vec::new()).expect("no terms to check")
    }

    /// `λ⁻¹ ξ(z) dz` with polynomial `ξ(z) = Σ_m A_m z^m`.
    pub fn normalized_polynomial(
        numerator: Vec<CMatrix>,
        basepoint: Complex64,
        domain: Domain,
    ) -> Result<Self> {
        let xi = RationalMatrix::polynomial(numerator)?;
        Self::new(xi.size(), basepoint, domain, vec![PotentialTerm { mode: -1, xi }])
    }

    /// The vacuum `λ⁻¹ [[0,1],[1,0]] dz` based at 0.
    pub fn vacuum(domain: Domain) -> Self {
        let a = linalg::real_matrix(&[&[0.0, 1.0], &[1.0, 0.0]]);
        Self::normalized_polynomial(vec![a], c(0.0, 0.0), domain).expect("valid vacuum")
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn min_mode(&self) -> i32 {
        self.terms.iter().map(|t| t.mode).min().unwrap_or(0)
    }

    pub fn max_mode(&self) -> i32 {
        self.terms.iter().map(|t| t.mode).max().unwrap_or(0)
    }

    /// `η(z, ·)` as a loop at the given bound.
    pub fn loop_at(&self, z: Complex64, bound: usize) -> Result<MatrixLoop> {
        let mut out = MatrixLoop::zero(self.n, bound);
        for t in &self.terms {
            if t.mode.unsigned_abs() as usize > bound {
                return Err(DpwError::Schema(format!(
                    "potential mode {} exceeds bound {bound}",
                    t.mode
                )));
            }
            let mut m = out.coeff_or_zero(t.mode);
            m += t.xi.evaluate(z)?;
            out.set_coeff(t.mode, m);
        }
        Ok(out.with_parity(Parity::Algebra))
    }

    /// Sampled `ξ_j(z)` for one mode (zero if the mode is absent).
    pub fn xi_at(&self, mode: i32, z: Complex64) -> Result<CMatrix> {
        let mut acc = linalg::zeros(self.n);
        for t in self.terms.iter().filter(|t| t.mode == mode) {
            acc += t.xi.evaluate(z)?;
        }
        Ok(acc)
    }

    /// Largest violation of `σ(ξ_j) = (-1)^j ξ_j` over the numerator
    /// coefficients (the scalar denominators do not affect it).
    pub fn twist_violation(&self, model: &GroupModel) -> f64 {
        self.terms
            .iter()
            .flat_map(|t| {
                let sign = if t.mode % 2 == 0 { 1.0 } else { -1.0 };
                t.xi.numerator
                    .iter()
                    .map(move |a| (model.apply_sigma(a) - a * c(sign, 0.0)).norm())
            })
            .fold(0.0, f64::max)
    }

    /// Checks the normalized-potential shape: only mode −1, twisted, and
    /// finite at the base point.
    pub fn validate_normalized(&self, model: &GroupModel, tol: f64) -> Result<()> {
        if let Some(t) = self.terms.iter().find(|t| t.mode != -1) {
            return Err(DpwError::Schema(format!(
                "normalized potential has a term of mode {}",
                t.mode
            )));
        }
        let v = self.twist_violation(model);
        if v > tol {
            return Err(DpwError::NotLieAlgebraValued { residual: v });
        }
        for t in &self.terms {
            t.xi.evaluate(self.basepoint)?;
        }
        Ok(())
    }

    /// `h ξ_j h⁻¹` for every term.
    pub fn conjugated(&self, h: &CMatrix, h_inv: &CMatrix) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| PotentialTerm {
                    mode: t.mode,
                    xi: t.xi.map_numerator(|a| h * a * h_inv),
                })
                .collect(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermJson {
    pub mode: i32,
    pub numerator_poly: Vec<MatrixJson>,
    #[serde(default)]
    pub denominator_poly: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialJson {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default)]
    pub n: Option<usize>,
    pub basepoint: [f64; 2],
    pub domain: Domain,
    pub terms: Vec<TermJson>,
    #[serde(default)]
    pub poles: Vec<[f64; 2]>,
    #[serde(default)]
    pub pole_radius: Option<f64>,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

impl From<&PotentialOneForm> for PotentialJson {
    fn from(p: &PotentialOneForm) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n: Some(p.n),
            basepoint: [p.basepoint.re, p.basepoint.im],
            domain: p.domain.clone(),
            terms: p
                .terms
                .iter()
                .map(|t| TermJson {
                    mode: t.mode,
                    numerator_poly: t.xi.numerator.iter().map(MatrixJson::from).collect(),
                    denominator_poly: t.xi.denominator.iter().map(|d| [d.re, d.im]).collect(),
                })
                .collect(),
            poles: p.poles.iter().map(|z| [z.re, z.im]).collect(),
            pole_radius: Some(p.pole_radius),
        }
    }
}

impl TryFrom<PotentialJson> for PotentialOneForm {
    type Error = DpwError;

    fn try_from(j: PotentialJson) -> Result<Self> {
        if j.schema_version != SCHEMA_VERSION {
            return Err(DpwError::Schema(format!(
                "unsupported schema_version {}",
                j.schema_version
            )));
        }
        let mut terms = Vec::with_capacity(j.terms.len());
        for t in &j.terms {
            if t.mode < -1 {
                return Err(DpwError::Schema(format!("mode {} < -1 is not supported", t.mode)));
            }
            let num = t
                .numerator_poly
                .iter()
                .map(MatrixJson::to_matrix)
                .collect::<Result<Vec<_>>>()?;
            let den = t.denominator_poly.iter().map(|d| c(d[0], d[1])).collect();
            terms.push(PotentialTerm {
                mode: t.mode,
                xi: RationalMatrix::new(num, den)?,
            });
        }
        let n = match (j.n, terms.first()) {
            (Some(n), _) => n,
            (None, Some(t)) => t.xi.size(),
            (None, None) => {
                return Err(DpwError::Schema("empty potential needs an explicit n".into()))
            }
        };
        let radius = j.pole_radius.unwrap_or(DEFAULT_POLE_RADIUS);
        if !(radius > 0.0) {
            return Err(DpwError::Schema("pole_radius must be positive".into()));
        }
        let mut p = PotentialOneForm::new(n, c(j.basepoint[0], j.basepoint[1]), j.domain, terms)?
            .with_poles(j.poles.iter().map(|z| c(z[0], z[1])).collect());
        p.pole_radius = radius;
        Ok(p)
    }
}

impl PotentialOneForm {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let j: PotentialJson = serde_json::from_str(s).map_err(|e| DpwError::Schema(e.to_string()))?;
        j.try_into()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&PotentialJson::from(self)).expect("serializable potential")
    }
}
