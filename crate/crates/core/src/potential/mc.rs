//! Maurer–Cartan forms of sampled frames, their `𝔨 ⊕ 𝔭` decomposition,
//! loopification and the flatness (integrability) residual.

use num_complex::Complex64;

use crate::error::{DpwError, Result};
use crate::fd::{partials, wirtinger, DiffScheme, FieldValue};
use crate::grid::GridField;
use crate::linalg::{self, CMatrix};
use crate::loopcore::{GroupModel, MatrixLoop, Parity};

/// `dz` and `dz̄` components of a 1-form.
#[derive(Clone, Debug, PartialEq)]
pub struct OneForm<T> {
    pub dz: T,
    pub dzbar: T,
}

/// `F⁻¹ ∂_z F` and `F⁻¹ ∂_z̄ F` by finite differences with spacing equal
/// to the grid step.
pub fn mc_form<T: FieldValue>(field: &GridField<T>, scheme: DiffScheme) -> Result<GridField<OneForm<T>>> {
    let d = partials(field, scheme)?;
    let mut values = Vec::with_capacity(field.values.len());
    for (idx, (f, df)) in field.values.iter().zip(&d.values).enumerate() {
        let (Some(f), Some((dx, dy))) = (f, df) else {
            values.push(None);
            continue;
        };
        let f_inv = f.inverse().ok_or(DpwError::SingularFrame { index: idx })?;
        let (dz, dzb) = wirtinger(dx, dy);
        values.push(Some(OneForm {
            dz: f_inv.product(&dz),
            dzbar: f_inv.product(&dzb),
        }));
    }
    Ok(GridField::new(field.grid, values))
}

/// Values of a loop-valued 1-form field at one `λ`.
pub fn evaluate_forms(field: &GridField<OneForm<MatrixLoop>>, lambda: Complex64) -> Result<GridField<OneForm<CMatrix>>> {
    let mut values = Vec::with_capacity(field.values.len());
    for v in &field.values {
        values.push(match v {
            Some(f) => Some(OneForm {
                dz: f.dz.evaluate(lambda)?,
                dzbar: f.dzbar.evaluate(lambda)?,
            }),
            None => None,
        });
    }
    Ok(GridField::new(field.grid, values))
}

pub fn evaluate_frames(field: &GridField<MatrixLoop>, lambda: Complex64) -> Result<GridField<CMatrix>> {
    let mut values = Vec::with_capacity(field.values.len());
    for v in &field.values {
        values.push(match v {
            Some(g) => Some(g.evaluate(lambda)?),
            None => None,
        });
    }
    Ok(GridField::new(field.grid, values))
}

/// `α = α′ + α_𝔨 + α″`: the `𝔭`-part of the `dz` component, the `𝔨`-part
/// of both components, and the `𝔭`-part of the `dz̄` component.
#[derive(Clone, Debug)]
pub struct MaurerCartanDecomposition {
    pub alpha_prime: GridField<CMatrix>,
    pub alpha_k: GridField<OneForm<CMatrix>>,
    pub alpha_doubleprime: GridField<CMatrix>,
}

impl MaurerCartanDecomposition {
    pub fn reassemble(&self) -> GridField<OneForm<CMatrix>> {
        let values = (0..self.alpha_k.values.len())
            .map(|i| {
                let p = self.alpha_prime.values[i].as_ref()?;
                let k = self.alpha_k.values[i].as_ref()?;
                let pp = self.alpha_doubleprime.values[i].as_ref()?;
                Some(OneForm {
                    dz: p + &k.dz,
                    dzbar: pp + &k.dzbar,
                })
            })
            .collect();
        GridField::new(self.alpha_k.grid, values)
    }
}

/// Splits a sampled `𝔤`-valued 1-form. `𝔤 = 𝔰𝔩(n)` here, so a trace above
/// `tol` means the form is not Lie-algebra valued.
pub fn decompose_mc(
    alpha: &GridField<OneForm<CMatrix>>,
    model: &GroupModel,
    tol: f64,
) -> Result<MaurerCartanDecomposition> {
    let mut worst = 0.0_f64;
    for (_, _, f) in alpha.iter() {
        worst = worst
            .max(linalg::trace(&f.dz).norm())
            .max(linalg::trace(&f.dzbar).norm());
    }
    if worst > tol {
        return Err(DpwError::NotLieAlgebraValued { residual: worst });
    }
    Ok(MaurerCartanDecomposition {
        alpha_prime: alpha.map(|f| model.p_part(&f.dz)),
        alpha_k: alpha.map(|f| OneForm {
            dz: model.k_part(&f.dz),
            dzbar: model.k_part(&f.dzbar),
        }),
        alpha_doubleprime: alpha.map(|f| model.p_part(&f.dzbar)),
    })
}

/// `α_λ = λ⁻¹ α′ + α_𝔨 + λ α″`.
pub fn loopify(d: &MaurerCartanDecomposition) -> GridField<OneForm<MatrixLoop>> {
    let values = (0..d.alpha_k.values.len())
        .map(|i| {
            let p = d.alpha_prime.values[i].as_ref()?;
            let k = d.alpha_k.values[i].as_ref()?;
            let pp = d.alpha_doubleprime.values[i].as_ref()?;
            let n = p.nrows();
            let dz = MatrixLoop::from_modes(n, 1, [(-1, p.clone()), (0, k.dz.clone())]).ok()?;
            let dzbar = MatrixLoop::from_modes(n, 1, [(0, k.dzbar.clone()), (1, pp.clone())]).ok()?;
            Some(OneForm {
                dz: dz.with_parity(Parity::Algebra),
                dzbar: dzbar.with_parity(Parity::Algebra),
            })
        })
        .collect();
    GridField::new(d.alpha_k.grid, values)
}

/// `max ‖∂_z α_z̄ − ∂_z̄ α_z + [α_z, α_z̄]‖` over interior nodes of a sampled
/// matrix 1-form; zero for the Maurer–Cartan form of a smooth frame.
pub fn flatness_residual_sampled(alpha: &GridField<OneForm<CMatrix>>, scheme: DiffScheme) -> Result<f64> {
    Ok(flatness_field(alpha, scheme)?.iter().map(|(_, _, &r)| r).fold(0.0, f64::max))
}

/// Pointwise flatness residual; `None` on the boundary ring and wherever the
/// form or its stencil is missing.
pub fn flatness_field(alpha: &GridField<OneForm<CMatrix>>, scheme: DiffScheme) -> Result<GridField<f64>> {
    let g = alpha.grid;
    for points in [g.nx, g.ny] {
        if points < 3 {
            return Err(DpwError::GridTooCoarse { points, required: 3 });
        }
    }
    let a_z = alpha.map(|f| f.dz.clone());
    let a_zb = alpha.map(|f| f.dzbar.clone());
    let d_az = partials(&a_z, scheme)?;
    let d_azb = partials(&a_zb, scheme)?;
    let mut values = vec![None; g.len()];
    for iy in 1..g.ny - 1 {
        for ix in 1..g.nx - 1 {
            let idx = g.index(ix, iy);
            let (Some(f), Some((azx, azy)), Some((abx, aby))) =
                (&alpha.values[idx], &d_az.values[idx], &d_azb.values[idx])
            else {
                continue;
            };
            let (_, dzb_of_az) = wirtinger(azx, azy);
            let (dz_of_azb, _) = wirtinger(abx, aby);
            let r = dz_of_azb - dzb_of_az + linalg::commutator(&f.dz, &f.dzbar);
            values[idx] = Some(r.norm());
        }
    }
    Ok(GridField::new(g, values))
}

/// Flatness residual of a loop-valued 1-form field at `λ₀`.
pub fn flatness_residual(
    alpha: &GridField<OneForm<MatrixLoop>>,
    lambda: Complex64,
    scheme: DiffScheme,
) -> Result<f64> {
    flatness_residual_sampled(&evaluate_forms(alpha, lambda)?, scheme)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RectGrid;
    use crate::linalg::{c, real_matrix};
    use crate::loopcore::RealForm;

    fn grid() -> RectGrid {
        RectGrid::square(0.5, 21).unwrap()
    }

    fn constant_form(a: CMatrix, b: CMatrix) -> GridField<OneForm<CMatrix>> {
        let g = grid();
        GridField::new(
            g,
            (0..g.len())
                .map(|_| Some(OneForm { dz: a.clone(), dzbar: b.clone() }))
                .collect(),
        )
    }

    #[test]
    fn identity_frame_has_zero_form() {
        let g = grid();
        let f = GridField::new(g, vec![Some(linalg::identity(2)); g.len()]);
        let a = mc_form(&f, DiffScheme::default()).unwrap();
        for (_, _, v) in a.iter() {
            assert!(v.dz.norm() < 1e-12 && v.dzbar.norm() < 1e-12);
        }
    }

    #[test]
    fn exponential_frame_recovers_generator() {
        let a = real_matrix(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let g = grid();
        let f = GridField::new(
            g,
            (0..g.len()).map(|i| Some(linalg::expm(&(&a * g.point_at(i))))).collect(),
        );
        for scheme in [DiffScheme::SECOND_ORDER, DiffScheme::default()] {
            let alpha = mc_form(&f, scheme).unwrap();
            let err = alpha
                .iter()
                .map(|(_, _, v)| linalg::dist(&v.dz, &a).max(v.dzbar.norm()))
                .fold(0.0, f64::max);
            let bound = if scheme.accuracy == 2 { 2e-2 } else { 1e-9 };
            assert!(err < bound, "accuracy {}: {err}", scheme.accuracy);
        }
    }

    #[test]
    fn flatness_of_constant_forms() {
        let nil = real_matrix(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let r = flatness_residual_sampled(&constant_form(nil.clone(), linalg::zeros(2)), DiffScheme::default())
            .unwrap();
        assert!(r < 1e-12);
        let b = real_matrix(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let r = flatness_residual_sampled(&constant_form(nil.clone(), b.clone()), DiffScheme::default())
            .unwrap();
        assert!((r - linalg::commutator(&nil, &b).norm()).abs() < 1e-12);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let g = RectGrid::square(0.5, 2).unwrap();
        let f = GridField::new(g, vec![Some(OneForm { dz: linalg::zeros(2), dzbar: linalg::zeros(2) }); 4]);
        assert!(matches!(
            flatness_residual_sampled(&f, DiffScheme::default()),
            Err(DpwError::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn decomposition_examples() {
        let model = GroupModel::rank_one(RealForm::Compact);
        let a = real_matrix(&[&[0.0, 1.0], &[2.0, 0.0]]);
        let d = linalg::diag(&[c(0.5, 0.0), c(-0.5, 0.0)]);
        let b = real_matrix(&[&[0.0, -1.0], &[3.0, 0.0]]);
        let alpha = constant_form(&a + &d, b.clone());
        let dec = decompose_mc(&alpha, &model, 1e-12).unwrap();
        let i = 5;
        assert!(linalg::dist(dec.alpha_prime.values[i].as_ref().unwrap(), &a) < 1e-15);
        assert!(linalg::dist(&dec.alpha_k.values[i].as_ref().unwrap().dz, &d) < 1e-15);
        assert!(dec.alpha_k.values[i].as_ref().unwrap().dzbar.norm() < 1e-15);
        assert!(linalg::dist(dec.alpha_doubleprime.values[i].as_ref().unwrap(), &b) < 1e-15);
        let back = dec.reassemble();
        assert_eq!(back.values[i], alpha.values[i]);
        let looped = loopify(&dec);
        let at_one = evaluate_forms(&looped, c(1.0, 0.0)).unwrap();
        let v = at_one.values[i].as_ref().unwrap();
        let orig = alpha.values[i].as_ref().unwrap();
        assert!(linalg::dist(&v.dz, &orig.dz) < 1e-15 && linalg::dist(&v.dzbar, &orig.dzbar) < 1e-15);
        let bad = constant_form(linalg::identity(2), linalg::zeros(2));
        assert!(matches!(
            decompose_mc(&bad, &model, 1e-12),
            Err(DpwError::NotLieAlgebraValued { .. })
        ));
    }
}
