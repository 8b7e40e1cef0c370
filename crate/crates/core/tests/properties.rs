use proptest::prelude::*;

use dpwkit::factor::{birkhoff_split, gauge_normalize, iwasawa_split, realform_violation};
use dpwkit::linalg::{self, c, CMatrix};
use dpwkit::loopcore::{GroupModel, MatrixLoop, Parity, RealForm};
use dpwkit::oracle::ORACLE_SAMPLES;

const N: usize = 10;
const SAMPLES: usize = 16;

/// Twisted algebra loop with modes `|k| ≤ support`: diagonal traceless
/// coefficients in even modes, off-diagonal ones in odd modes.
fn algebra_loop(support: usize, entries: &[f64]) -> MatrixLoop {
    let s = support as i32;
    let mut it = entries.chunks(2).map(|p| c(p[0], p[1]));
    let modes: Vec<(i32, CMatrix)> = (-s..=s)
        .map(|k| {
            let (u, v) = (it.next().unwrap(), it.next().unwrap());
            let m = if k % 2 == 0 {
                linalg::diag(&[u, -u])
            } else {
                CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), u, v, c(0.0, 0.0)])
            };
            (k, m)
        })
        .collect();
    MatrixLoop::from_modes(2, N, modes).unwrap().with_parity(Parity::Algebra)
}

fn entries(support: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, 4 * (2 * support + 1))
}

fn algebra(support: usize, scale: f64) -> impl Strategy<Value = MatrixLoop> {
    entries(support, scale).prop_map(move |e| algebra_loop(support, &e))
}

/// `exp` of a small single-mode-support algebra loop; well inside the big cell.
fn group() -> impl Strategy<Value = MatrixLoop> {
    algebra(1, 0.1).prop_map(|x| {
        MatrixLoop::from_fn(2, N, ORACLE_SAMPLES, |lam| linalg::expm(&x.evaluate(lam).unwrap()))
            .with_parity(Parity::Group)
    })
}

fn compact() -> GroupModel {
    GroupModel::rank_one(RealForm::Compact)
}

fn real_form() -> impl Strategy<Value = RealForm> {
    prop_oneof![Just(RealForm::Compact), Just(RealForm::Indefinite)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn products_are_associative(a in algebra(3, 0.5), b in algebra(3, 0.5), d in algebra(3, 0.5)) {
        let left = a.multiply_full(&b)?.multiply_full(&d)?;
        let right = a.multiply_full(&b.multiply_full(&d)?)?;
        prop_assert!(left.max_coeff_dist(&right) < 1e-12);
    }

    #[test]
    fn twisted_loops_are_closed(g in group(), h in group()) {
        let model = compact();
        prop_assert!(g.multiply(&h)?.twist_violation(&model) < 1e-12);
        prop_assert!(g.inverse()?.twist_violation(&model) < 1e-12);
    }

    #[test]
    fn coefficient_products_match_pointwise(a in algebra(3, 0.5), b in algebra(3, 0.5), g in group()) {
        let ab = a.multiply_full(&b)?;
        let g_inv = g.inverse()?;
        for j in 0..SAMPLES {
            let lam = linalg::circle_point(j, SAMPLES);
            prop_assert!(linalg::dist(&ab.evaluate(lam)?, &(a.evaluate(lam)? * b.evaluate(lam)?)) < 1e-12);
            prop_assert!(linalg::dist(&(g_inv.evaluate(lam)? * g.evaluate(lam)?), &linalg::identity(2)) < 1e-9);
        }
    }

    #[test]
    fn tau_star_reverses_products(a in algebra(3, 0.5), b in algebra(3, 0.5), form in real_form()) {
        let model = GroupModel::rank_one(form);
        let lhs = a.multiply_full(&b)?.tau_star(&model);
        let rhs = b.tau_star(&model).multiply_full(&a.tau_star(&model))?;
        prop_assert!(lhs.max_coeff_dist(&rhs) < 1e-12);
        prop_assert!(a.tau_star(&model).tau_star(&model).max_coeff_dist(&a) < 1e-15);
    }

    #[test]
    fn birkhoff_is_idempotent(g in group()) {
        let s = birkhoff_split(&g)?;
        prop_assert!(s.diagnostics.reconstruction < 1e-9);
        let again = birkhoff_split(&s.minus)?;
        prop_assert!(again.minus.max_coeff_dist(&s.minus) < 1e-9);
        prop_assert!(again.plus.max_coeff_dist(&MatrixLoop::identity(2, N)) < 1e-9);
        prop_assert!(s.minus.coeff_or_zero(0).iter().zip(linalg::identity(2).iter()).all(|(x, y)| (x - y).norm() < 1e-12));
    }

    #[test]
    fn iwasawa_real_part_is_in_the_real_form(g in group()) {
        let model = compact();
        let iw = gauge_normalize(&iwasawa_split(&g, &model)?)?;
        prop_assert!(iw.diagnostics.reconstruction < 1e-9);
        prop_assert!(realform_violation(&iw.real_part, &model)? < 1e-9);
        prop_assert!(iw.plus_part.negative_mass() == 0.0);
    }

    #[test]
    fn splittings_are_deterministic(g in group()) {
        let a = birkhoff_split(&g)?;
        let b = birkhoff_split(&g)?;
        prop_assert_eq!(&a.minus, &b.minus);
        prop_assert_eq!(&a.plus, &b.plus);
        let model = compact();
        let x = iwasawa_split(&g, &model)?;
        let y = iwasawa_split(&g, &model)?;
        prop_assert_eq!(&x.real_part, &y.real_part);
        prop_assert_eq!(&x.plus_part, &y.plus_part);
    }
}
