//! Moving the DPW data to a new base point, either by conjugating with a
//! real group element `h` (the quotient realization changes with it) or by
//! dressing with the twisted loop `g̊` (the realization stays fixed).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DpwError, Result};
use crate::factor::{birkhoff_split, gauge_normalize, iwasawa_split};
use crate::fd::DiffScheme;
use crate::grid::GridField;
use crate::linalg::{self, CMatrix};
use crate::loopcore::{GroupModel, Involution, MatrixLoop, Parity};
use crate::pipeline::{cartan_representative, ExtendedFrameField, FlaggedPoint, SampledPotential};
use crate::potential::mc_form;

/// Circle samples used for pointwise audits.
const AUDIT_SAMPLES: usize = 16;

/// One audited identity: the largest residual found and whether it is
/// within tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl AuditEntry {
    pub fn new(name: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }

    /// Passes when the residual is at least `threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            residual: value,
            tolerance: threshold,
            pass: value >= threshold,
        }
    }
}

/// Distance of a constant matrix from `K₀`: its off-block part with respect
/// to the twist classes plus its real-form violation.
pub fn isotropy_residual(k: &CMatrix, model: &GroupModel) -> Result<f64> {
    let classes = model
        .twist_classes()
        .ok_or_else(|| DpwError::UnsupportedModel("twist matrix is not diagonal ±q".into()))?;
    Ok(linalg::off_block_norm(k, &classes) + model.realform_violation(k))
}

/// How the constant `K₀` gauge `k₀` of a conjugation transport is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum GaugeChoice {
    /// A fixed `k₀ ∈ K₀` (the identity by default).
    Constant(CMatrix),
    /// `k₀ = F₀(z₁)⁻¹`, which makes `F₁(z₁) = I`; only admissible when that
    /// loop is a constant element of `K₀`.
    NormalizeAtTarget,
}

#[derive(Clone, Debug)]
pub struct ConjugationMove {
    pub h: CMatrix,
    pub h_inv: CMatrix,
    pub z_source: Complex64,
    pub z_target: Complex64,
    pub gauge: GaugeChoice,
    /// Model at the source base point (`σ₀`, `τ`, `θ₀`).
    pub source_model: GroupModel,
    /// Model at the target base point (`σ₁`, `τ`, `θ₁`).
    pub target_model: GroupModel,
    /// `‖h P₀(z₀) h⁻¹ − P₀(z₁)‖` at `λ = 1`.
    pub orbit_residual: f64,
    pub realform_residual: f64,
}

fn frame_at<'a>(frame: &'a ExtendedFrameField, z: Complex64, what: &str) -> Result<&'a MatrixLoop> {
    frame.at(z).ok_or_else(|| DpwError::InvalidMove {
        reason: format!("{what} {z} is not an unflagged grid node"),
        residual: f64::NAN,
    })
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

impl ConjugationMove {
    /// Validates `h`: it must lie in the real form and carry `f₀(z₀)` to
    /// `f₀(z₁)` in the Cartan embedding.
    pub fn new(
        h: CMatrix,
        frame: &ExtendedFrameField,
        z_target: Complex64,
        gauge: GaugeChoice,
        tol: f64,
    ) -> Result<Self> {
        let model = &frame.model;
        if h.nrows() != model.size() || h.ncols() != model.size() {
            return Err(DpwError::DimensionMismatch {
                expected: model.size(),
                found: h.nrows(),
            });
        }
        let h_inv = linalg::try_inverse(&h).ok_or(DpwError::InvalidMove {
            reason: "h is singular".into(),
            residual: 0.0,
        })?;
        let realform_residual = model.realform_violation(&h);
        if realform_residual > tol {
            return Err(DpwError::InvalidMove {
                reason: "h is not in the real form".into(),
                residual: realform_residual,
            });
        }
        let q = model.twist_matrix();
        let p_source = match frame.at(frame.basepoint) {
            Some(f) => cartan_representative(&f.evaluate(one())?, q)?,
            None => q.clone(),
        };
        let p_target = cartan_representative(&frame_at(frame, z_target, "target base point")?.evaluate(one())?, q)?;
        let orbit_residual = linalg::dist(&(&h * p_source * &h_inv), &p_target);
        if orbit_residual > tol {
            return Err(DpwError::InvalidMove {
                reason: "h does not map f(z0) to f(z1)".into(),
                residual: orbit_residual,
            });
        }
        let target_model = model.conjugated(&h)?;
        Ok(Self {
            h,
            h_inv,
            z_source: frame.basepoint,
            z_target,
            gauge,
            source_model: model.clone(),
            target_model,
            orbit_residual,
            realform_residual,
        })
    }

    /// `h = F₀(z₁, λ = 1)`, which satisfies the orbit condition by
    /// construction.
    pub fn synthesize(frame: &ExtendedFrameField, z_target: Complex64, gauge: GaugeChoice, tol: f64) -> Result<Self> {
        let h = frame_at(frame, z_target, "target base point")?.evaluate(one())?;
        Self::new(h, frame, z_target, gauge, tol)
    }
}

#[derive(Clone, Debug)]
pub struct InvolutionTransport {
    pub sigma: Involution,
    pub theta: Involution,
    /// Largest pairwise commutator of `σ₁`, `τ`, `θ₁` on a Lie-algebra basis.
    pub commutation_residual: f64,
    /// Largest `‖ι(ι(x)) − x‖` for `ι ∈ {σ₁, τ, θ₁}` on the same basis.
    pub involutivity_residual: f64,
}

/// `σ₁ = Ad(h) σ₀ Ad(h)⁻¹` and `θ₁ = Ad(h) θ₀ Ad(h)⁻¹`, checked for
/// pairwise commutation with `τ`.
pub fn involution_transport(mv: &ConjugationMove, tol: f64) -> Result<InvolutionTransport> {
    let m = &mv.target_model;
    let commutation_residual = m.commutation_residual();
    let involutivity_residual = m.involutivity_residual();
    if commutation_residual > tol {
        return Err(DpwError::CommutationFailure {
            residual: commutation_residual,
        });
    }
    Ok(InvolutionTransport {
        sigma: m.sigma().clone(),
        theta: m.theta().clone(),
        commutation_residual,
        involutivity_residual,
    })
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ConjugationAudit {
    /// Largest `σ₁`-twisting violation of the transported frames.
    pub sigma1_twist: f64,
    /// Largest `‖F₁,₋ − h F₀,₋ h⁻¹‖` from independent Birkhoff splits.
    pub normalized_relation: f64,
    /// `‖F₁(z₁) − I‖`.
    pub target_identity: f64,
    pub realform: f64,
    /// Residual of the chosen gauge from `K₀`.
    pub gauge_residual: f64,
    pub flagged: Vec<FlaggedPoint>,
}

impl ConjugationAudit {
    pub fn entries(&self, structural_tol: f64, pipeline_tol: f64) -> Vec<AuditEntry> {
        vec![
            AuditEntry::new("conjugation.sigma1_twisting", self.sigma1_twist, structural_tol),
            AuditEntry::new("conjugation.normalized_frame_relation", self.normalized_relation, pipeline_tol),
            AuditEntry::new("conjugation.frame_identity_at_target", self.target_identity, structural_tol),
            AuditEntry::new("conjugation.real_form", self.realform, pipeline_tol),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct ConjugationOutput {
    pub frame: ExtendedFrameField,
    pub k0: CMatrix,
    pub audit: ConjugationAudit,
}

/// `F₁(z, z̄, λ) = h F₀(z, z̄, λ) k₀ h⁻¹` with a constant `k₀ ∈ K₀`.
///
/// The audit records whether the result is `σ₁`-twisted, whether its
/// Birkhoff minus part is `h F₀,₋ h⁻¹`, and how far `F₁(z₁)` is from `I`.
/// A constant gauge cannot in general normalize `F₁(z₁)` because
/// `F₀(z₁, λ)` depends on `λ`; that residual is reported, not hidden.
pub fn conjugate_transport(f0: &ExtendedFrameField, mv: &ConjugationMove, tol: f64) -> Result<ConjugationOutput> {
    let n = f0.model.size();
    let (k0, gauge_residual) = match &mv.gauge {
        GaugeChoice::Constant(k) => {
            let r = isotropy_residual(k, &f0.model)?;
            if r > tol {
                return Err(DpwError::GaugeNotInIsotropy { residual: r });
            }
            (k.clone(), r)
        }
        GaugeChoice::NormalizeAtTarget => {
            let required = frame_at(f0, mv.z_target, "target base point")?.inverse()?;
            let k = required.coeff_or_zero(0);
            let r = required.mass_outside_mode(0) + isotropy_residual(&k, &f0.model)?;
            if r > tol {
                return Err(DpwError::GaugeNotInIsotropy { residual: r });
            }
            (k, r)
        }
    };
    let right = &k0 * &mv.h_inv;
    let values = f0
        .values
        .map(|f| f.left_mul(&mv.h).right_mul(&right).with_parity(Parity::Group));
    let mut frame = ExtendedFrameField::new(values, mv.z_target, mv.target_model.clone(), f0.bound);

    let mut audit = ConjugationAudit {
        gauge_residual,
        sigma1_twist: frame.max_twist_violation(),
        realform: frame.max_realform_violation()?,
        target_identity: frame
            .at(mv.z_target)
            .map(|f| f.max_coeff_dist(&MatrixLoop::identity(n, f.bound())))
            .unwrap_or(f64::NAN),
        ..Default::default()
    };
    let grid = f0.grid();
    let rel: Vec<Option<Result<f64>>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (Some(a), Some(b)) = (&f0.values.values[idx], &frame.values.values[idx]) else {
                return None;
            };
            Some((|| {
                let m0 = birkhoff_split(a)?.minus.conjugate(&mv.h, &mv.h_inv);
                let m1 = birkhoff_split(b)?.minus;
                Ok(m1.max_coeff_dist(&m0))
            })())
        })
        .collect();
    for (idx, r) in rel.into_iter().enumerate() {
        match r {
            Some(Ok(d)) => audit.normalized_relation = audit.normalized_relation.max(d),
            Some(Err(e)) => audit.flagged.push(FlaggedPoint::new(idx, grid.point_at(idx), &e)),
            None => {}
        }
    }
    frame.flagged = audit.flagged.clone();
    Ok(ConjugationOutput { frame, k0, audit })
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct DressingMoveDiagnostics {
    /// `max_k ‖(g̊ · F₀(z₂) k₀ − I)_k‖`.
    pub construction_residual: f64,
    pub realform_violation: f64,
    pub twist_violation: f64,
    /// `max_k ‖(g̊₋ g̊₊ − g̊)_k‖`.
    pub birkhoff_reconstruction: f64,
    /// `‖g̊(1) P₀(z₂) g̊(1)⁻¹ − P₀(z₀)‖` when both are grid nodes.
    pub orbit_residual: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct DressingMove {
    pub ring_g: MatrixLoop,
    pub ring_g_inv: MatrixLoop,
    pub minus: MatrixLoop,
    pub plus: MatrixLoop,
    pub plus_inv: MatrixLoop,
    pub z_source: Complex64,
    pub z_target: Complex64,
    pub gauge: CMatrix,
    pub diagnostics: DressingMoveDiagnostics,
}

impl DressingMove {
    /// Builds the move from a given `g̊`, splitting it as `g̊ = g̊₋ g̊₊`.
    pub fn from_ring_g(
        ring_g: MatrixLoop,
        z_source: Complex64,
        z_target: Complex64,
        gauge: CMatrix,
        model: &GroupModel,
    ) -> Result<Self> {
        let ring_g = ring_g.with_parity(Parity::Group);
        let split = birkhoff_split(&ring_g)?;
        let ring_g_inv = ring_g.inverse()?;
        let plus_inv = split.plus.inverse()?;
        let diagnostics = DressingMoveDiagnostics {
            construction_residual: f64::NAN,
            realform_violation: crate::factor::realform_violation(&ring_g, model)?,
            twist_violation: ring_g.twist_violation(model),
            birkhoff_reconstruction: split.diagnostics.reconstruction,
            orbit_residual: None,
        };
        Ok(Self {
            ring_g,
            ring_g_inv,
            minus: split.minus,
            plus: split.plus,
            plus_inv,
            z_source,
            z_target,
            gauge,
            diagnostics,
        })
    }
}

/// `g̊ = (F₀(z₂) k₀)⁻¹` together with its Birkhoff parts.
pub fn compute_ring_g(f0: &ExtendedFrameField, z2: Complex64, k0: &CMatrix, tol: f64) -> Result<DressingMove> {
    let r = isotropy_residual(k0, &f0.model)?;
    if r > tol {
        return Err(DpwError::GaugeNotInIsotropy { residual: r });
    }
    let f_z2 = frame_at(f0, z2, "dressing target")?.right_mul(k0);
    let ring_g = f_z2.inverse()?;
    let mut mv = DressingMove::from_ring_g(ring_g, f0.basepoint, z2, k0.clone(), &f0.model)?;
    mv.diagnostics.construction_residual = mv
        .ring_g
        .multiply(&f_z2)?
        .max_coeff_dist(&MatrixLoop::identity(f0.model.size(), f0.bound));
    if let (Some(a), Some(b)) = (f0.at(f0.basepoint), f0.at(z2)) {
        let q = f0.model.twist_matrix();
        let p0 = cartan_representative(&a.evaluate(one())?, q)?;
        let p2 = cartan_representative(&b.evaluate(one())?, q)?;
        let g1 = mv.ring_g.evaluate(one())?;
        let g1_inv = linalg::try_inverse(&g1).ok_or(DpwError::NotInvertible { bound: f0.bound })?;
        mv.diagnostics.orbit_residual = Some(linalg::dist(&(&g1 * p2 * g1_inv), &p0));
    }
    Ok(mv)
}

/// Dressing of a normalized frame by a positive loop: the minus part of
/// `g₊ F₋ g₊⁻¹`.
pub fn dress(f_minus: &MatrixLoop, g_plus: &MatrixLoop) -> Result<MatrixLoop> {
    let conj = g_plus.multiply(f_minus)?.multiply(&g_plus.inverse()?)?;
    Ok(birkhoff_split(&conj)?.minus)
}

fn dress_with_inverse(f_minus: &MatrixLoop, g_plus: &MatrixLoop, g_plus_inv: &MatrixLoop) -> Result<MatrixLoop> {
    let conj = g_plus.multiply(f_minus)?.multiply(g_plus_inv)?;
    Ok(birkhoff_split(&conj)?.minus)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DressingAudit {
    /// Largest difference between the two routes over compared nodes.
    pub max_route_difference: f64,
    /// Fraction of all grid nodes on which the routes agree within tolerance.
    pub agreement_fraction: f64,
    pub compared: usize,
    /// `‖F₂,₋(z₂) − I‖` (both routes).
    pub target_identity: f64,
    /// Largest off-block part of `g̊⁻¹ F₂(z₀)` over circle samples.
    pub source_block_residual: f64,
    /// Wiener mass of `g̊⁻¹ F₂(z₀)` outside mode 0.
    pub source_lambda_dependence: f64,
    pub construction_residual: f64,
    /// Largest Wiener mass of the recovered potential outside mode −1.
    pub potential_mode_leak: f64,
    pub flagged: Vec<FlaggedPoint>,
}

impl DressingAudit {
    pub fn entries(&self, structural_tol: f64, pipeline_tol: f64, min_fraction: f64) -> Vec<AuditEntry> {
        vec![
            AuditEntry::new("dressing.construction", self.construction_residual, structural_tol),
            AuditEntry::at_least("dressing.route_agreement_fraction", self.agreement_fraction, min_fraction),
            AuditEntry::new("dressing.route_difference", self.max_route_difference, pipeline_tol),
            AuditEntry::new("dressing.normalized_at_target", self.target_identity, pipeline_tol),
            AuditEntry::new("dressing.block_diagonal_at_source", self.source_block_residual, 1e-9),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct DressingOutput {
    /// `F₂ = g̊ F₀ k₀`, based at `z₂`.
    pub frame: ExtendedFrameField,
    /// `F₂,₋ = g̊₋ · (g̊₊ F₀,₋ g̊₊⁻¹)₋`.
    pub minus_dressing: GridField<MatrixLoop>,
    /// `F₂,₋` from a direct Birkhoff split of `F₂`.
    pub minus_direct: GridField<MatrixLoop>,
    /// Normalized potential of the dressed map.
    pub potential: Option<SampledPotential>,
    pub audit: DressingAudit,
}

/// Per-node dressing transport by two independent routes, plus the
/// consistency audits at both base points.
pub fn dressed_transport(f0: &ExtendedFrameField, mv: &DressingMove, tol: f64) -> Result<DressingOutput> {
    let grid = f0.grid();
    let n = f0.model.size();
    struct Node {
        f2: MatrixLoop,
        dressing: Result<MatrixLoop>,
        direct: Result<MatrixLoop>,
    }
    let nodes: Vec<Option<Result<Node>>> = f0
        .values
        .values
        .par_iter()
        .map(|v| {
            v.as_ref().map(|f| -> Result<Node> {
                let f2 = mv.ring_g.multiply(f)?.right_mul(&mv.gauge).with_parity(Parity::Group);
                let dressing = birkhoff_split(f).and_then(|s| {
                    let x = dress_with_inverse(&s.minus, &mv.plus, &mv.plus_inv)?;
                    mv.minus.multiply(&x)
                });
                let direct = birkhoff_split(&f2).map(|s| s.minus);
                Ok(Node { f2, dressing, direct })
            })
        })
        .collect();

    let mut audit = DressingAudit {
        construction_residual: mv.diagnostics.construction_residual,
        ..Default::default()
    };
    let mut frames = Vec::with_capacity(grid.len());
    let mut via_dressing = Vec::with_capacity(grid.len());
    let mut via_direct = Vec::with_capacity(grid.len());
    let mut agree = 0usize;
    for (idx, node) in nodes.into_iter().enumerate() {
        let z = grid.point_at(idx);
        match node {
            None => {
                frames.push(None);
                via_dressing.push(None);
                via_direct.push(None);
            }
            Some(Err(e)) => {
                audit.flagged.push(FlaggedPoint::new(idx, z, &e));
                frames.push(None);
                via_dressing.push(None);
                via_direct.push(None);
            }
            Some(Ok(node)) => {
                frames.push(Some(node.f2));
                let a = node.dressing.map_err(|e| audit.flagged.push(FlaggedPoint::new(idx, z, &e))).ok();
                let b = node.direct.map_err(|e| audit.flagged.push(FlaggedPoint::new(idx, z, &e))).ok();
                if let (Some(a), Some(b)) = (&a, &b) {
                    let d = a.max_coeff_dist(b);
                    audit.compared += 1;
                    audit.max_route_difference = audit.max_route_difference.max(d);
                    if d <= tol {
                        agree += 1;
                    }
                }
                via_dressing.push(a);
                via_direct.push(b);
            }
        }
    }
    audit.agreement_fraction = agree as f64 / grid.len() as f64;
    let minus_dressing = GridField::new(grid, via_dressing);
    let minus_direct = GridField::new(grid, via_direct);

    let id = MatrixLoop::identity(n, f0.bound);
    audit.target_identity = match grid.locate(mv.z_target, 1e-9) {
        Some(i) => [&minus_dressing.values[i], &minus_direct.values[i]]
            .iter()
            .map(|v| v.as_ref().map_or(f64::NAN, |m| m.max_coeff_dist(&id)))
            .fold(0.0, f64::max),
        None => f64::NAN,
    };

    let mut frame = ExtendedFrameField::new(GridField::new(grid, frames), mv.z_target, f0.model.clone(), f0.bound);
    frame.flagged = audit.flagged.clone();
    if let Some(f2_z0) = frame.at(mv.z_source) {
        let probe = mv.ring_g_inv.multiply(f2_z0)?;
        let classes = f0
            .model
            .twist_classes()
            .ok_or_else(|| DpwError::UnsupportedModel("twist matrix is not diagonal ±q".into()))?;
        let mut worst = 0.0_f64;
        for j in 0..AUDIT_SAMPLES {
            let v = probe.evaluate(linalg::circle_point(j, AUDIT_SAMPLES))?;
            worst = worst.max(linalg::off_block_norm(&v, &classes));
        }
        audit.source_block_residual = worst;
        audit.source_lambda_dependence = probe.mass_outside_mode(0);
    } else {
        audit.source_block_residual = f64::NAN;
        audit.source_lambda_dependence = f64::NAN;
    }

    let potential = if grid.nx >= 3 && grid.ny >= 3 {
        let alpha = mc_form(&minus_dressing, DiffScheme::default())?;
        for (_, _, f) in alpha.iter() {
            audit.potential_mode_leak = audit.potential_mode_leak.max(f.dz.mass_outside_mode(-1));
        }
        let xi = alpha.map(|f| f.dz.coeff_or_zero(-1));
        Some(SampledPotential {
            xi,
            basepoint: mv.z_target,
        })
    } else {
        None
    };

    Ok(DressingOutput {
        frame,
        minus_dressing,
        minus_direct,
        potential,
        audit,
    })
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DualAudit {
    /// Largest Wiener mass of `W₊` in negative modes.
    pub max_negative_mass: f64,
    /// Largest coefficientwise distance between `F₀,U` and `F₂,U`.
    pub max_frame_distance: f64,
    pub flagged: Vec<FlaggedPoint>,
}

#[derive(Clone, Debug)]
pub struct DualOutput {
    pub f0_u: GridField<MatrixLoop>,
    pub f2_u: GridField<MatrixLoop>,
    pub w_plus: GridField<MatrixLoop>,
    pub audit: DualAudit,
}

/// Compact-form Iwasawa splits `F₀ = F₀,U V₀,₊` and `F₂ = F₂,U V₂,₊`, and
/// the residual `W₊ = F₀,U⁻¹ g̊⁻¹ F₂,U`, which must be a positive loop.
pub fn dual_frame_transport(
    f0: &ExtendedFrameField,
    f2: &ExtendedFrameField,
    mv: &DressingMove,
) -> Result<DualOutput> {
    if f0.grid() != f2.grid() {
        return Err(DpwError::Schema("frame fields live on different grids".into()));
    }
    let grid = f0.grid();
    let u_model = f0.model.compact_dual();
    let nodes: Vec<Option<Result<(MatrixLoop, MatrixLoop, MatrixLoop)>>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (Some(a), Some(b)) = (&f0.values.values[idx], &f2.values.values[idx]) else {
                return None;
            };
            Some((|| {
                let a_u = gauge_normalize(&iwasawa_split(a, &u_model)?)?.real_part;
                let b_u = gauge_normalize(&iwasawa_split(b, &u_model)?)?.real_part;
                let w = a_u.inverse()?.multiply_full(&mv.ring_g_inv)?.multiply_full(&b_u)?;
                Ok((a_u, b_u, w))
            })())
        })
        .collect();
    let mut audit = DualAudit::default();
    let (mut fa, mut fb, mut fw) = (Vec::new(), Vec::new(), Vec::new());
    for (idx, node) in nodes.into_iter().enumerate() {
        match node {
            Some(Ok((a, b, w))) => {
                audit.max_negative_mass = audit.max_negative_mass.max(w.negative_mass());
                audit.max_frame_distance = audit.max_frame_distance.max(a.max_coeff_dist(&b));
                fa.push(Some(a));
                fb.push(Some(b));
                fw.push(Some(w));
            }
            Some(Err(e)) => {
                audit.flagged.push(FlaggedPoint::new(idx, grid.point_at(idx), &e));
                fa.push(None);
                fb.push(None);
                fw.push(None);
            }
            None => {
                fa.push(None);
                fb.push(None);
                fw.push(None);
            }
        }
    }
    Ok(DualOutput {
        f0_u: GridField::new(grid, fa),
        f2_u: GridField::new(grid, fb),
        w_plus: GridField::new(grid, fw),
        audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RectGrid;
    use crate::linalg::c;
    use crate::loopcore::RealForm;
    use crate::pipeline::{forward_dpw, ForwardOptions};
    use crate::potential::{Domain, PotentialOneForm};

    fn vacuum_frame(form: RealForm, n: usize) -> ExtendedFrameField {
        let eta = PotentialOneForm::vacuum(Domain::Rect {
            x_min: -0.5,
            x_max: 0.5,
            y_min: -0.5,
            y_max: 0.5,
        });
        let model = GroupModel::rank_one(form);
        forward_dpw(&eta, RectGrid::square(0.5, n).unwrap(), &model, &ForwardOptions::new(10))
            .unwrap()
            .frame
    }

    #[test]
    fn identity_conjugation_is_trivial() {
        let f0 = vacuum_frame(RealForm::Compact, 5);
        let mv = ConjugationMove::new(linalg::identity(2), &f0, c(0.0, 0.0), GaugeChoice::Constant(linalg::identity(2)), 1e-9)
            .unwrap();
        let out = conjugate_transport(&f0, &mv, 1e-9).unwrap();
        for (i, _, f) in out.frame.values.iter() {
            assert_eq!(f, f0.values.values[i].as_ref().unwrap());
        }
        assert!(out.audit.target_identity < 1e-15);
    }

    #[test]
    fn invalid_h_is_rejected() {
        let f0 = vacuum_frame(RealForm::Compact, 5);
        let h = linalg::real_matrix(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let err = ConjugationMove::new(h, &f0, c(0.25, 0.25), GaugeChoice::Constant(linalg::identity(2)), 1e-9)
            .unwrap_err();
        assert_eq!(err.kind(), "move_invalid");
        let not_real = linalg::diag(&[c(2.0, 0.0), c(0.5, 0.0)]);
        let err = ConjugationMove::new(not_real, &f0, c(0.0, 0.0), GaugeChoice::Constant(linalg::identity(2)), 1e-9)
            .unwrap_err();
        assert_eq!(err.kind(), "move_invalid");
    }

    #[test]
    fn diagonal_h_keeps_sigma() {
        let f0 = vacuum_frame(RealForm::Compact, 5);
        let h = linalg::diag(&[Complex64::from_polar(1.0, 0.3), Complex64::from_polar(1.0, -0.3)]);
        let mv = ConjugationMove::new(h, &f0, c(0.0, 0.0), GaugeChoice::Constant(linalg::identity(2)), 1e-9).unwrap();
        let inv = involution_transport(&mv, 1e-12).unwrap();
        assert!(linalg::dist(inv.sigma.matrix(), mv.source_model.sigma().matrix()) < 1e-15);
    }

    #[test]
    fn normalize_at_target_is_refused_off_the_base_point() {
        let f0 = vacuum_frame(RealForm::Compact, 5);
        let err = ConjugationMove::synthesize(&f0, c(0.25, 0.25), GaugeChoice::NormalizeAtTarget, 1e-9)
            .and_then(|mv| conjugate_transport(&f0, &mv, 1e-9))
            .unwrap_err();
        assert_eq!(err.kind(), "gauge_not_in_isotropy");
    }

    #[test]
    fn trivial_dressing() {
        let f0 = vacuum_frame(RealForm::Compact, 5);
        let mv = compute_ring_g(&f0, c(0.0, 0.0), &linalg::identity(2), 1e-9).unwrap();
        assert!(mv.ring_g.max_coeff_dist(&MatrixLoop::identity(2, 10)) < 1e-14);
        let out = dressed_transport(&f0, &mv, 1e-8).unwrap();
        assert!(out.audit.max_route_difference < 1e-12);
        assert_eq!(out.audit.agreement_fraction, 1.0);
    }

    #[test]
    fn dress_by_constant_diagonal() {
        let nil = linalg::real_matrix(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let f = MatrixLoop::from_modes(2, 4, [(0, linalg::identity(2)), (-1, nil.clone())]).unwrap();
        let d = linalg::diag(&[c(2.0, 0.0), c(0.5, 0.0)]);
        let out = dress(&f, &MatrixLoop::constant(d.clone(), 4)).unwrap();
        let expect = MatrixLoop::from_modes(2, 4, [(0, linalg::identity(2)), (-1, &d * nil * linalg::try_inverse(&d).unwrap())])
            .unwrap();
        assert!(out.max_coeff_dist(&expect) < 1e-14);
    }
}
