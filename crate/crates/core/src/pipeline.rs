//! The DPW correspondence in both directions: normalized potential →
//! extended frame, extended frame → normalized potential, and the
//! associated family in the Cartan embedding.

use log::{info, warn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DpwError, Result};
use crate::factor::{birkhoff_split, gauge_normalize, iwasawa_split};
use crate::fd::DiffScheme;
use crate::grid::{GridField, RectGrid};
use crate::linalg::{self, c, CMatrix};
use crate::loopcore::{GroupModel, MatrixLoop, Parity};
use crate::potential::{
    decompose_mc, evaluate_forms, evaluate_frames, flatness_field, integrate_to, loopify, mc_form, IntegratorOptions,
    PotentialOneForm,
};

/// Grid nodes closer than this to the base point are treated as the base
/// point itself.
const BASEPOINT_SNAP: f64 = 1e-12;

/// A grid node skipped because a step of the computation failed there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlaggedPoint {
    pub index: usize,
    pub z: [f64; 2],
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

impl FlaggedPoint {
    pub fn new(index: usize, z: Complex64, err: &DpwError) -> Self {
        Self {
            index,
            z: [z.re, z.im],
            kind: err.kind().to_string(),
            message: err.to_string(),
            residual: err.residual(),
        }
    }
}

/// Extended frame `F(z, z̄, λ)` sampled on a grid, normalized at `z₀`.
#[derive(Clone, Debug)]
pub struct ExtendedFrameField {
    pub values: GridField<MatrixLoop>,
    pub basepoint: Complex64,
    pub model: GroupModel,
    pub bound: usize,
    pub flagged: Vec<FlaggedPoint>,
}

impl ExtendedFrameField {
    pub fn new(values: GridField<MatrixLoop>, basepoint: Complex64, model: GroupModel, bound: usize) -> Self {
        Self {
            values,
            basepoint,
            model,
            bound,
            flagged: Vec::new(),
        }
    }

    pub fn identity(grid: RectGrid, basepoint: Complex64, model: GroupModel, bound: usize) -> Self {
        let id = MatrixLoop::identity(model.size(), bound);
        Self::new(GridField::new(grid, vec![Some(id); grid.len()]), basepoint, model, bound)
    }

    pub fn grid(&self) -> RectGrid {
        self.values.grid
    }

    /// Value at a grid node that coincides with `z`.
    pub fn at(&self, z: Complex64) -> Option<&MatrixLoop> {
        let idx = self.grid().locate(z, 1e-9)?;
        self.values.values[idx].as_ref()
    }

    pub fn basepoint_index(&self) -> Option<usize> {
        self.grid().locate(self.basepoint, BASEPOINT_SNAP)
    }

    pub fn max_twist_violation(&self) -> f64 {
        self.max_twist_violation_for(&self.model)
    }

    pub fn max_twist_violation_for(&self, model: &GroupModel) -> f64 {
        self.values
            .iter()
            .map(|(_, _, f)| f.twist_violation(model))
            .fold(0.0, f64::max)
    }

    /// Largest pointwise real-form violation over the grid.
    pub fn max_realform_violation(&self) -> Result<f64> {
        let mut worst = 0.0_f64;
        for (_, _, f) in self.values.iter() {
            worst = worst.max(crate::factor::realform_violation(f, &self.model)?);
        }
        Ok(worst)
    }

    /// Largest coefficientwise jump between horizontally or vertically
    /// adjacent nodes.
    pub fn neighbor_jump(&self) -> f64 {
        let g = self.grid();
        let mut worst = 0.0_f64;
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let Some(f) = self.values.get(ix, iy) else { continue };
                if ix + 1 < g.nx {
                    if let Some(r) = self.values.get(ix + 1, iy) {
                        worst = worst.max(f.max_coeff_dist(r));
                    }
                }
                if iy + 1 < g.ny {
                    if let Some(u) = self.values.get(ix, iy + 1) {
                        worst = worst.max(f.max_coeff_dist(u));
                    }
                }
            }
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForwardOptions {
    pub bound: usize,
    pub integrator: IntegratorOptions,
    /// Tolerance on the twisting of the input potential.
    pub structural_tol: f64,
}

impl ForwardOptions {
    pub fn new(bound: usize) -> Self {
        Self {
            bound,
            integrator: IntegratorOptions::default(),
            structural_tol: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ForwardDiagnostics {
    /// `‖F̂(z₀) − I‖` before the base-point correction.
    pub basepoint_drift: f64,
    /// Largest truncation tail over integration and splitting.
    pub max_tail: f64,
    pub max_reconstruction: f64,
    pub max_realform_violation: f64,
    pub max_twist_violation: f64,
    pub neighbor_jump: f64,
    pub flagged: usize,
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub frame: ExtendedFrameField,
    /// `F₋(z)` from the holomorphic integration.
    pub normalized: GridField<MatrixLoop>,
    /// `V₊(z)` with `F₋ = F V₊`.
    pub plus: GridField<MatrixLoop>,
    pub diagnostics: ForwardDiagnostics,
}

struct PointResult {
    minus: MatrixLoop,
    frame: MatrixLoop,
    plus: MatrixLoop,
    tail: f64,
    reconstruction: f64,
    realform: f64,
}

fn forward_point(
    eta: &PotentialOneForm,
    z: Complex64,
    model: &GroupModel,
    opts: &ForwardOptions,
) -> Result<PointResult> {
    let minus = integrate_to(eta, eta.basepoint, z, opts.bound, &opts.integrator)?;
    let pair = gauge_normalize(&iwasawa_split(&minus.value, model)?)?;
    Ok(PointResult {
        minus: minus.value,
        frame: pair.real_part,
        plus: pair.plus_part,
        tail: minus.tail.max(pair.diagnostics.tail),
        reconstruction: pair.diagnostics.reconstruction,
        realform: pair.diagnostics.realform_violation,
    })
}

/// Normalized potential → extended frame: integrate `dF₋ = F₋η` from the
/// base point, then Iwasawa-split `F₋ = F V₊` at every node independently.
/// Failures are flagged per node; the field is then left-multiplied by
/// `F̂(z₀)⁻¹` to remove any numerical drift at the base point.
pub fn forward_dpw(
    eta: &PotentialOneForm,
    grid: RectGrid,
    model: &GroupModel,
    opts: &ForwardOptions,
) -> Result<ForwardOutput> {
    grid.validate()?;
    if eta.size() != model.size() {
        return Err(DpwError::DimensionMismatch {
            expected: model.size(),
            found: eta.size(),
        });
    }
    eta.validate_normalized(model, opts.structural_tol)?;
    let z0 = eta.basepoint;

    let results: Vec<Result<PointResult>> = grid
        .points()
        .par_iter()
        .map(|&z| forward_point(eta, z, model, opts))
        .collect();

    let base = forward_point(eta, z0, model, opts)?;
    let drift = base.frame.max_coeff_dist(&MatrixLoop::identity(model.size(), opts.bound));
    let correction = if drift > 0.0 {
        Some(base.frame.inverse()?)
    } else {
        None
    };

    let mut diag = ForwardDiagnostics {
        basepoint_drift: drift,
        ..Default::default()
    };
    let mut flagged = Vec::new();
    let mut frames = Vec::with_capacity(grid.len());
    let mut minus = Vec::with_capacity(grid.len());
    let mut plus = Vec::with_capacity(grid.len());
    let base_idx = grid.locate(z0, BASEPOINT_SNAP);
    for (idx, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => {
                diag.max_tail = diag.max_tail.max(p.tail);
                diag.max_reconstruction = diag.max_reconstruction.max(p.reconstruction);
                diag.max_realform_violation = diag.max_realform_violation.max(p.realform);
                let mut f = match &correction {
                    Some(corr) => corr.multiply(&p.frame)?.with_parity(Parity::Group),
                    None => p.frame,
                };
                if Some(idx) == base_idx {
                    f = MatrixLoop::identity(model.size(), opts.bound);
                }
                frames.push(Some(f));
                minus.push(Some(p.minus));
                plus.push(Some(p.plus));
            }
            Err(e) => {
                let z = grid.point_at(idx);
                warn!("forward: flagged node {idx} at {z}: {e}");
                flagged.push(FlaggedPoint::new(idx, z, &e));
                frames.push(None);
                minus.push(None);
                plus.push(None);
            }
        }
    }
    let mut frame = ExtendedFrameField::new(GridField::new(grid, frames), z0, model.clone(), opts.bound);
    frame.flagged = flagged;
    diag.max_twist_violation = frame.max_twist_violation();
    diag.neighbor_jump = frame.neighbor_jump();
    diag.flagged = frame.flagged.len();
    info!(
        "forward: {} nodes, {} flagged, drift {:.3e}, tail {:.3e}",
        grid.len(),
        diag.flagged,
        drift,
        diag.max_tail
    );
    Ok(ForwardOutput {
        frame,
        normalized: GridField::new(grid, minus),
        plus: GridField::new(grid, plus),
        diagnostics: diag,
    })
}

/// Flatness residual at each `λ` of the loopified Maurer–Cartan form of
/// `F(·, λ = 1)`: zero up to discretization exactly when the frame comes
/// from a harmonic map.
pub fn harmonicity_residuals(frame: &ExtendedFrameField, lambdas: &[Complex64], scheme: DiffScheme) -> Result<Vec<f64>> {
    Ok(harmonicity_fields(frame, lambdas, scheme)?
        .iter()
        .map(|f| f.iter().map(|(_, _, &r)| r).fold(0.0, f64::max))
        .collect())
}

/// Pointwise version of [`harmonicity_residuals`].
pub fn harmonicity_fields(
    frame: &ExtendedFrameField,
    lambdas: &[Complex64],
    scheme: DiffScheme,
) -> Result<Vec<GridField<f64>>> {
    let at_one = evaluate_frames(&frame.values, c(1.0, 0.0))?;
    let alpha = mc_form(&at_one, scheme)?;
    // The trace of F⁻¹dF is pure discretization error here; it stays in the
    // 𝔨 part and so shows up in the residual instead of being rejected.
    let looped = loopify(&decompose_mc(&alpha, &frame.model, f64::INFINITY)?);
    lambdas
        .iter()
        .map(|&lam| flatness_field(&evaluate_forms(&looped, lam)?, scheme))
        .collect()
}

/// `ξ(z)` sampled on a grid: the potential is `λ⁻¹ ξ(z) dz`.
#[derive(Clone, Debug)]
pub struct SampledPotential {
    pub xi: GridField<CMatrix>,
    pub basepoint: Complex64,
}

/// Structural checks on a recovered potential.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BackwardAudit {
    /// Largest Wiener mass of the `dz` component outside mode −1.
    pub mode_leak: f64,
    /// Largest Wiener mass of the `dz̄` component.
    pub dzbar_mass: f64,
    /// Largest `𝔨`-part of `ξ`.
    pub p_violation: f64,
    /// `‖F₋(z₀) − I‖` when the base point is a grid node.
    pub basepoint_residual: Option<f64>,
    pub max_reconstruction: f64,
}

impl BackwardAudit {
    pub fn max_residual(&self) -> f64 {
        self.mode_leak
            .max(self.dzbar_mass)
            .max(self.p_violation)
            .max(self.basepoint_residual.unwrap_or(0.0))
    }
}

#[derive(Clone, Debug)]
pub struct BackwardOutput {
    pub normalized: GridField<MatrixLoop>,
    pub potential: SampledPotential,
    pub audit: BackwardAudit,
    pub flagged: Vec<FlaggedPoint>,
}

/// Extended frame → normalized potential: Birkhoff-split every node,
/// differentiate the minus part and read off `ξ` from mode −1 of
/// `F₋⁻¹ ∂_z F₋`.
pub fn backward_dpw(frame: &ExtendedFrameField, scheme: DiffScheme) -> Result<BackwardOutput> {
    let grid = frame.grid();
    let splits: Vec<Option<Result<(MatrixLoop, f64)>>> = frame
        .values
        .values
        .par_iter()
        .map(|v| {
            v.as_ref().map(|f| {
                birkhoff_split(f).map(|s| (s.minus, s.diagnostics.reconstruction))
            })
        })
        .collect();
    let mut flagged = Vec::new();
    let mut minus = Vec::with_capacity(grid.len());
    let mut audit = BackwardAudit::default();
    for (idx, s) in splits.into_iter().enumerate() {
        match s {
            Some(Ok((m, recon))) => {
                audit.max_reconstruction = audit.max_reconstruction.max(recon);
                minus.push(Some(m));
            }
            Some(Err(e)) => {
                let z = grid.point_at(idx);
                warn!("backward: flagged node {idx} at {z}: {e}");
                flagged.push(FlaggedPoint::new(idx, z, &e));
                minus.push(None);
            }
            None => minus.push(None),
        }
    }
    let normalized = GridField::new(grid, minus);
    let alpha = mc_form(&normalized, scheme)?;
    let model = &frame.model;
    let mut xi = Vec::with_capacity(grid.len());
    for v in &alpha.values {
        xi.push(v.as_ref().map(|f| {
            audit.mode_leak = audit.mode_leak.max(f.dz.mass_outside_mode(-1));
            audit.dzbar_mass = audit.dzbar_mass.max(f.dzbar.wiener_norm());
            let x = f.dz.coeff_or_zero(-1);
            audit.p_violation = audit.p_violation.max(model.k_part(&x).norm());
            x
        }));
    }
    audit.basepoint_residual = grid
        .locate(frame.basepoint, BASEPOINT_SNAP)
        .and_then(|i| normalized.values[i].as_ref())
        .map(|m| m.max_coeff_dist(&MatrixLoop::identity(model.size(), m.bound())));
    Ok(BackwardOutput {
        normalized,
        potential: SampledPotential {
            xi: GridField::new(grid, xi),
            basepoint: frame.basepoint,
        },
        audit,
        flagged,
    })
}

/// Cartan-embedding representatives `P(z, λ) = F(z, λ) Q F(z, λ)⁻¹`.
#[derive(Clone, Debug)]
pub struct AssociatedFamilySample {
    pub lambdas: Vec<Complex64>,
    pub values: Vec<GridField<CMatrix>>,
    /// Largest deviation of `tr P^k` from `tr Q^k`, `k = 1..n`.
    pub spectrum_deviation: f64,
    /// Largest `‖P(z₀, λ) − Q‖` (when `z₀` is a grid node).
    pub basepoint_deviation: f64,
}

pub fn cartan_representative(f: &CMatrix, q: &CMatrix) -> Result<CMatrix> {
    let inv = linalg::try_inverse(f).ok_or(DpwError::SingularFrame { index: 0 })?;
    Ok(f * q * inv)
}

pub fn associated_family(frame: &ExtendedFrameField, lambdas: &[Complex64]) -> Result<AssociatedFamilySample> {
    let q = frame.model.twist_matrix().clone();
    let n = q.nrows();
    let q_traces: Vec<Complex64> = (1..=n).map(|k| power(&q, k).trace()).collect();
    let base_idx = frame.basepoint_index();
    let mut values = Vec::with_capacity(lambdas.len());
    let mut spectrum_deviation = 0.0_f64;
    let mut basepoint_deviation = 0.0_f64;
    for &lam in lambdas {
        let mut field = Vec::with_capacity(frame.grid().len());
        for (idx, v) in frame.values.values.iter().enumerate() {
            let Some(f) = v else {
                field.push(None);
                continue;
            };
            let p = cartan_representative(&f.evaluate(lam)?, &q)
                .map_err(|_| DpwError::SingularFrame { index: idx })?;
            for (k, tq) in q_traces.iter().enumerate() {
                spectrum_deviation = spectrum_deviation.max((power(&p, k + 1).trace() - tq).norm());
            }
            if Some(idx) == base_idx {
                basepoint_deviation = basepoint_deviation.max(linalg::dist(&p, &q));
            }
            field.push(Some(p));
        }
        values.push(GridField::new(frame.grid(), field));
    }
    Ok(AssociatedFamilySample {
        lambdas: lambdas.to_vec(),
        values,
        spectrum_deviation,
        basepoint_deviation,
    })
}

fn power(m: &CMatrix, k: usize) -> CMatrix {
    let mut acc = linalg::identity(m.nrows());
    for _ in 0..k {
        acc = &acc * m;
    }
    acc
}

/// The default `λ` samples `{1, i, −1, e^{iπ/4}}`.
pub fn default_lambdas() -> Vec<Complex64> {
    vec![
        c(1.0, 0.0),
        c(0.0, 1.0),
        c(-1.0, 0.0),
        Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loopcore::RealForm;
    use crate::potential::Domain;

    fn domain() -> Domain {
        Domain::Rect {
            x_min: -0.5,
            x_max: 0.5,
            y_min: -0.5,
            y_max: 0.5,
        }
    }

    #[test]
    fn zero_potential_gives_identity_frames() {
        let model = GroupModel::rank_one(RealForm::Compact);
        let eta = PotentialOneForm::zero(2, c(0.0, 0.0), domain());
        let grid = RectGrid::square(0.5, 5).unwrap();
        let out = forward_dpw(&eta, grid, &model, &ForwardOptions::new(4)).unwrap();
        let id = MatrixLoop::identity(2, 4);
        for (_, _, f) in out.frame.values.iter() {
            assert!(f.max_coeff_dist(&id) < 1e-14);
        }
        let fam = associated_family(&out.frame, &default_lambdas()).unwrap();
        for field in &fam.values {
            for (_, _, p) in field.iter() {
                assert!(linalg::dist(p, model.twist_matrix()) < 1e-14);
            }
        }
        let back = backward_dpw(&out.frame, DiffScheme::default()).unwrap();
        for (_, _, x) in back.potential.xi.iter() {
            assert!(x.norm() < 1e-12);
        }
    }

    #[test]
    fn vacuum_family_fixes_real_axis_at_lambda_one() {
        let model = GroupModel::rank_one(RealForm::Compact);
        let eta = PotentialOneForm::vacuum(domain());
        let grid = RectGrid::square(0.5, 5).unwrap();
        let out = forward_dpw(&eta, grid, &model, &ForwardOptions::new(12)).unwrap();
        let fam = associated_family(&out.frame, &[c(1.0, 0.0)]).unwrap();
        assert!(fam.spectrum_deviation < 1e-10);
        assert!(fam.basepoint_deviation < 1e-14);
        for (idx, z, p) in fam.values[0].iter() {
            if z.im.abs() < 1e-15 {
                assert!(linalg::dist(p, model.twist_matrix()) < 1e-10, "node {idx}");
            }
        }
    }
}
