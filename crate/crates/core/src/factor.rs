//! Birkhoff and Iwasawa splittings of truncated matrix loops.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{DpwError, Result};
use crate::linalg::{self, c, CMatrix, Factorized};
use crate::loopcore::{GroupModel, MatrixLoop, Parity, RealForm};

/// Below this reciprocal condition estimate the Toeplitz section is treated
/// as singular, i.e. the loop is outside the big cell.
pub const DEFAULT_RCOND_THRESHOLD: f64 = 1e-12;

/// Number of circle samples used for pointwise checks of a factorization.
const CHECK_SAMPLES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffOptions {
    /// Number of negative modes kept for `g₋⁻¹`; `None` picks `2·support + 8`.
    pub sections: Option<usize>,
    pub rcond_threshold: f64,
}

impl Default for BirkhoffOptions {
    fn default() -> Self {
        Self {
            sections: None,
            rcond_threshold: DEFAULT_RCOND_THRESHOLD,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitDiagnostics {
    pub sections: usize,
    pub rcond: f64,
    /// Mass of the negative modes left in `g₋⁻¹ g` (zero for an exact split).
    pub leak: f64,
    /// `max_k ‖(g₋ g₊ − g)_k‖` at the input bound.
    pub reconstruction: f64,
}

/// `g = minus · plus`, with `minus(∞) = I`.
#[derive(Clone, Debug)]
pub struct BirkhoffPair {
    pub minus: MatrixLoop,
    pub plus: MatrixLoop,
    pub diagnostics: SplitDiagnostics,
}

pub fn birkhoff_split(g: &MatrixLoop) -> Result<BirkhoffPair> {
    birkhoff_split_with(g, &BirkhoffOptions::default())
}

/// Birkhoff factorization by a finite block-Toeplitz section.
///
/// With `u = g₋⁻¹ = I + Σ_{j=1..M} u_{-j} λ^{-j}` the negative modes of
/// `u·g` must vanish: `Σ_j u_{-j} g_{j-i} = −g_{-i}` for `i = 1..M`.
/// Then `g₊` is the nonnegative part of `u·g` and `g₋ = u⁻¹`.
pub fn birkhoff_split_with(g: &MatrixLoop, opts: &BirkhoffOptions) -> Result<BirkhoffPair> {
    let n = g.size();
    let bound = g.bound();
    let support = g.support_bound();
    let m = opts.sections.unwrap_or(2 * support + 8).max(1);

    // Transposed system A X = R with block (i, j) of A equal to g_{j-i}^T.
    let dim = n * m;
    let mut a = CMatrix::zeros(dim, dim);
    let mut r = CMatrix::zeros(dim, n);
    for i in 1..=m {
        for j in 1..=m {
            if let Some(gk) = g.coeff(j as i32 - i as i32) {
                a.view_mut(((i - 1) * n, (j - 1) * n), (n, n))
                    .copy_from(&gk.transpose());
            }
        }
        if let Some(gk) = g.coeff(-(i as i32)) {
            r.view_mut(((i - 1) * n, 0), (n, n))
                .copy_from(&(-gk.transpose()));
        }
    }
    let solver = Factorized::new(a);
    let rcond = solver.rcond_estimate();
    if rcond < opts.rcond_threshold {
        return Err(DpwError::OutsideBigCell { rcond });
    }
    let x = solver
        .solve(&r)
        .ok_or(DpwError::OutsideBigCell { rcond: 0.0 })?;

    let mut u = MatrixLoop::identity(n, m);
    for j in 1..=m {
        u.set_coeff(-(j as i32), x.view(((j - 1) * n, 0), (n, n)).transpose());
    }
    let ug = u.multiply_full(g)?;
    let leak: f64 = ug
        .modes()
        .filter(|(k, _)| *k < 0)
        .map(|(_, cm)| cm.norm())
        .sum();

    let mut plus = MatrixLoop::zero(n, bound);
    for k in 0..=bound as i32 {
        plus.set_coeff(k, ug.coeff_or_zero(k));
    }
    let plus_c0 = plus.coeff_or_zero(0);
    let c0_rcond = linalg::rcond(&plus_c0);
    if c0_rcond < opts.rcond_threshold {
        return Err(DpwError::OutsideBigCell { rcond: c0_rcond });
    }
    let minus = u.inverse()?.resized(bound);

    let parity = match g.parity() {
        Parity::Group => Parity::Group,
        _ => Parity::Untagged,
    };
    let minus = minus.with_parity(parity);
    let plus = plus.with_parity(parity);
    let reconstruction = minus.multiply(&plus)?.max_coeff_dist(g);
    debug!("birkhoff: sections={m} rcond={rcond:.3e} leak={leak:.3e} recon={reconstruction:.3e}");
    Ok(BirkhoffPair {
        minus,
        plus,
        diagnostics: SplitDiagnostics {
            sections: m,
            rcond,
            leak,
            reconstruction,
        },
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IwasawaDiagnostics {
    pub birkhoff: SplitDiagnostics,
    /// `max_j ‖real(λ_j)^* real(λ_j) − I‖` over circle samples.
    pub realform_violation: f64,
    /// `max_k ‖(real · plus − g)_k‖`.
    pub reconstruction: f64,
    /// Wiener mass of `g V₊⁻¹` beyond the bound, dropped from the real part.
    pub tail: f64,
}

/// `g = real_part · plus_part` with `real_part` in the real form of the
/// model and `plus_part(0)` upper triangular with positive diagonal.
#[derive(Clone, Debug)]
pub struct IwasawaPair {
    pub real_part: MatrixLoop,
    pub plus_part: MatrixLoop,
    pub diagnostics: IwasawaDiagnostics,
}

/// Iwasawa factorization through a spectral factorization of
/// `P = τ*(g)·g`.
///
/// `P` is self-adjoint for the star, so its Birkhoff split has the form
/// `P = τ*(P₊) D⁻¹ P₊` with `D = P₊(0)`. Writing `D = V₀* V₀` (a Cholesky
/// factorization on each sign class of the twist) gives
/// `V₊ = (V₀*)⁻¹ P₊` and `real = g V₊⁻¹`.
pub fn iwasawa_split(g: &MatrixLoop, model: &GroupModel) -> Result<IwasawaPair> {
    let n = g.size();
    if model.size() != n {
        return Err(DpwError::DimensionMismatch {
            expected: model.size(),
            found: n,
        });
    }
    let bound = g.bound();
    let classes = model
        .twist_classes()
        .ok_or_else(|| DpwError::UnsupportedModel("twist matrix is not diagonal ±q".into()))?;
    let signs = star_signs(model, &classes)?;

    let p_full = g.tau_star(model).multiply_full(g)?;
    let p = p_full.resized(p_full.support_bound());

    if model.real_form() == Some(RealForm::Compact) {
        for j in 0..CHECK_SAMPLES {
            let pv = p.evaluate(linalg::circle_point(j, CHECK_SAMPLES))?;
            if linalg::upper_cholesky(&pv).is_none() {
                return Err(DpwError::OutsideIwasawaCell {
                    reason: "τ*(g)g is not pointwise positive (numerical breakdown)".into(),
                });
            }
        }
    }

    let split = birkhoff_split(&p).map_err(|e| match e {
        DpwError::OutsideBigCell { rcond } => DpwError::OutsideIwasawaCell {
            reason: format!("τ*(g)g has no Birkhoff factorization (rcond {rcond:.3e})"),
        },
        other => other,
    })?;
    let d = split.plus.coeff_or_zero(0);

    let mut v0 = linalg::zeros(n);
    let mut class_ids: Vec<i8> = classes.clone();
    class_ids.sort_unstable();
    class_ids.dedup();
    for &cls in &class_ids {
        let idx: Vec<usize> = (0..n).filter(|&i| classes[i] == cls).collect();
        let block = CMatrix::from_fn(idx.len(), idx.len(), |a, b| d[(idx[a], idx[b])]);
        let r = linalg::upper_cholesky(&block).ok_or_else(|| DpwError::OutsideIwasawaCell {
            reason: format!("constant term of the spectral factor is not positive on class {cls}"),
        })?;
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                v0[(ia, ib)] = r[(a, b)];
            }
        }
    }
    // V₀* = s V₀^H s⁻¹ with s = diag(signs).
    let v0_star = CMatrix::from_fn(n, n, |i, j| v0[(j, i)].conj() * signs[i] * signs[j]);
    let v0_star_inv = linalg::try_inverse(&v0_star).ok_or(DpwError::OutsideIwasawaCell {
        reason: "gauge constant is singular".into(),
    })?;

    let plus_part = split.plus.left_mul(&v0_star_inv).resized(bound);
    let (real_part, tail) = g.multiply_full(&plus_part.inverse()?)?.truncated(bound);
    let real_part = real_part.with_parity(g.parity());
    let plus_part = plus_part.with_parity(g.parity());

    let reconstruction = real_part.multiply(&plus_part)?.max_coeff_dist(g);
    let realform_violation = realform_violation(&real_part, model)?;
    Ok(IwasawaPair {
        real_part,
        plus_part,
        diagnostics: IwasawaDiagnostics {
            birkhoff: split.diagnostics,
            realform_violation,
            reconstruction,
            tail,
        },
    })
}

/// `max_j ‖F(λ_j)^* F(λ_j) − I‖` over equispaced circle samples.
pub fn realform_violation(f: &MatrixLoop, model: &GroupModel) -> Result<f64> {
    let mut worst = 0.0_f64;
    for j in 0..CHECK_SAMPLES {
        let v = f.evaluate(linalg::circle_point(j, CHECK_SAMPLES))?;
        worst = worst.max(model.realform_violation(&v));
    }
    Ok(worst)
}

/// Diagonal of the star matrix, which must be `±1` and constant on each
/// sign class of the twist.
fn star_signs(model: &GroupModel, classes: &[i8]) -> Result<Vec<f64>> {
    let s = model.star_matrix();
    let n = model.size();
    let mut signs = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && s[(i, j)].norm() > 1e-14 {
                return Err(DpwError::UnsupportedModel("star matrix is not diagonal".into()));
            }
        }
        let v = s[(i, i)];
        if (v - c(1.0, 0.0)).norm() < 1e-12 {
            signs.push(1.0);
        } else if (v + c(1.0, 0.0)).norm() < 1e-12 {
            signs.push(-1.0);
        } else {
            return Err(DpwError::UnsupportedModel("star matrix entries must be ±1".into()));
        }
    }
    for i in 0..n {
        for j in 0..n {
            if classes[i] == classes[j] && signs[i] != signs[j] {
                return Err(DpwError::UnsupportedModel(
                    "star signature varies inside a twist class".into(),
                ));
            }
        }
    }
    Ok(signs)
}

/// Moves the diagonal phases of `plus_part(0)` into the real part so that
/// the diagonal becomes real positive.
pub fn gauge_normalize(pair: &IwasawaPair) -> Result<IwasawaPair> {
    let c0 = pair.plus_part.coeff_or_zero(0);
    let n = c0.nrows();
    let mut d = Vec::with_capacity(n);
    for i in 0..n {
        let v = c0[(i, i)];
        if v.norm() < 1e-300 {
            return Err(DpwError::DegenerateGauge { index: i });
        }
        d.push(v.conj() / v.norm());
    }
    let dm = linalg::diag(&d);
    let dm_inv = linalg::diag(&d.iter().map(|z| z.conj()).collect::<Vec<_>>());
    Ok(IwasawaPair {
        real_part: pair.real_part.right_mul(&dm_inv),
        plus_part: pair.plus_part.left_mul(&dm),
        diagnostics: pair.diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{real_matrix, I};

    fn a_off() -> CMatrix {
        real_matrix(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    fn exp_loop(bound: usize, f: impl Fn(num_complex::Complex64) -> CMatrix) -> MatrixLoop {
        MatrixLoop::from_fn(2, bound, 64, |lam| linalg::expm(&f(lam)))
    }

    #[test]
    fn identity_splits_trivially() {
        let g = MatrixLoop::identity(2, 6);
        let s = birkhoff_split(&g).unwrap();
        assert!(s.minus.max_coeff_dist(&g) < 1e-15);
        assert!(s.plus.max_coeff_dist(&g) < 1e-15);
    }

    #[test]
    fn commuting_exponentials_split_in_closed_form() {
        let a = a_off() * c(0.7, 0.2);
        let b = a_off() * c(-0.3, 0.5);
        let bound = 12;
        let g = exp_loop(bound, |lam| &a / lam + &b * lam);
        let s = birkhoff_split(&g).unwrap();
        let minus = exp_loop(bound, |lam| &a / lam);
        let plus = exp_loop(bound, |lam| &b * lam);
        assert!(s.minus.max_coeff_dist(&minus) < 1e-10);
        assert!(s.plus.max_coeff_dist(&plus) < 1e-10);
        assert!(s.diagnostics.reconstruction < 1e-10);
    }

    #[test]
    fn singular_section_is_outside_big_cell() {
        // [[0, λ], [−λ⁻¹, 0]] has Birkhoff indices ±1.
        let g = MatrixLoop::from_modes(
            2,
            2,
            [
                (1, real_matrix(&[&[0.0, 1.0], &[0.0, 0.0]])),
                (-1, real_matrix(&[&[0.0, 0.0], &[-1.0, 0.0]])),
            ],
        )
        .unwrap();
        assert!(matches!(
            birkhoff_split(&g),
            Err(DpwError::OutsideBigCell { .. })
        ));
    }

    #[test]
    fn compact_vacuum_iwasawa_matches_closed_form() {
        let model = GroupModel::rank_one(RealForm::Compact);
        let z = c(0.3, -0.2);
        let bound = 14;
        let fm = exp_loop(bound, |lam| a_off() * (z / lam));
        let pair = gauge_normalize(&iwasawa_split(&fm, &model).unwrap()).unwrap();
        let f = exp_loop(bound, |lam| a_off() * (z / lam) - a_off() * (z.conj() * lam));
        let vp = exp_loop(bound, |lam| a_off() * (z.conj() * lam));
        assert!(pair.real_part.max_coeff_dist(&f) < 1e-10);
        assert!(pair.plus_part.max_coeff_dist(&vp) < 1e-10);
        assert!(pair.diagnostics.realform_violation < 1e-10);
    }

    #[test]
    fn unitary_loop_is_its_own_real_part() {
        let model = GroupModel::rank_one(RealForm::Compact);
        let f = exp_loop(10, |lam| a_off() * (c(0.2, 0.1) / lam) - a_off() * (c(0.2, -0.1) * lam));
        let pair = iwasawa_split(&f, &model).unwrap();
        assert!(pair.real_part.max_coeff_dist(&f) < 1e-10);
        assert!(pair
            .plus_part
            .max_coeff_dist(&MatrixLoop::identity(2, 10))
            < 1e-10);
    }

    #[test]
    fn indefinite_cell_boundary() {
        let model = GroupModel::rank_one(RealForm::Indefinite);
        let e12 = real_matrix(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let g = |t: f64| {
            MatrixLoop::from_modes(2, 4, [(0, linalg::identity(2)), (-1, &e12 * c(t, 0.0))])
                .unwrap()
        };
        let inside = iwasawa_split(&g(0.5), &model).unwrap();
        assert!(inside.diagnostics.realform_violation < 1e-10);
        let c0 = inside.plus_part.coeff_or_zero(0);
        assert!((c0[(0, 0)].re - (1.0f64 / 0.75).sqrt()).abs() < 1e-10);
        assert!(matches!(
            iwasawa_split(&g(2.0), &model),
            Err(DpwError::OutsideIwasawaCell { .. })
        ));
    }

    #[test]
    fn gauge_normalize_absorbs_signs() {
        let model = GroupModel::rank_one(RealForm::Compact);
        let plus = MatrixLoop::constant(linalg::diag(&[c(-1.0, 0.0), I]), 3);
        let pair = IwasawaPair {
            real_part: MatrixLoop::identity(2, 3),
            plus_part: plus.clone(),
            diagnostics: IwasawaDiagnostics::default(),
        };
        let fixed = gauge_normalize(&pair).unwrap();
        let c0 = fixed.plus_part.coeff_or_zero(0);
        assert!((c0[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((c0[(1, 1)] - c(1.0, 0.0)).norm() < 1e-15);
        let prod = fixed.real_part.multiply(&fixed.plus_part).unwrap();
        assert!(prod.max_coeff_dist(&plus) < 1e-15);
        assert!(realform_violation(&fixed.real_part, &model).unwrap() < 1e-15);
    }
}
