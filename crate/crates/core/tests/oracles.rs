use dpwkit::factor::{birkhoff_split, gauge_normalize, iwasawa_split};
use dpwkit::fd::DiffScheme;
use dpwkit::grid::RectGrid;
use dpwkit::linalg::{c, real_matrix};
use dpwkit::loopcore::{GroupModel, RealForm};
use dpwkit::oracle;
use dpwkit::pipeline::{backward_dpw, forward_dpw, ForwardOptions};
use dpwkit::potential::{Domain, PotentialOneForm};

const N: usize = 12;

fn square(half: f64) -> Domain {
    Domain::Rect {
        x_min: -half,
        x_max: half,
        y_min: -half,
        y_max: half,
    }
}

#[test]
fn commuting_exponential_splits_into_its_factors() {
    let a = real_matrix(&[&[0.0, 1.0], &[0.0, 0.0]]) * c(0.3, 0.1);
    let b = real_matrix(&[&[0.0, 1.0], &[0.0, 0.0]]) * c(-0.2, 0.2);
    let (g, minus, plus) = oracle::commuting_exponential(&a, &b, N);
    let s = birkhoff_split(&g).unwrap();
    assert!(s.minus.max_coeff_dist(&minus) < 1e-12);
    assert!(s.plus.max_coeff_dist(&plus) < 1e-12);
}

#[test]
fn off_big_cell_loop_is_refused() {
    let err = birkhoff_split(&oracle::off_big_cell_loop(N)).unwrap_err();
    assert_eq!(err.kind(), "outside_big_cell");
}

#[test]
fn indefinite_iwasawa_cell_boundary() {
    let model = GroupModel::rank_one(RealForm::Indefinite);
    assert!(iwasawa_split(&oracle::indefinite_probe_loop(0.5, N), &model).is_ok());
    let err = iwasawa_split(&oracle::indefinite_probe_loop(2.0, N), &model).unwrap_err();
    assert_eq!(err.kind(), "outside_iwasawa_cell");
}

#[test]
fn vacuum_frame_is_its_own_iwasawa_real_part() {
    let model = GroupModel::rank_one(RealForm::Compact);
    let f = oracle::vacuum_frame(c(0.2, -0.1), N);
    let iw = gauge_normalize(&iwasawa_split(&f, &model).unwrap()).unwrap();
    assert!(iw.real_part.max_coeff_dist(&f) < 1e-9);
}

#[test]
fn forward_vacuum_matches_closed_form_and_round_trips() {
    let eta = PotentialOneForm::vacuum(square(0.3));
    let grid = RectGrid::square(0.25, 9).unwrap();
    let model = GroupModel::rank_one(RealForm::Compact);
    let out = forward_dpw(&eta, grid, &model, &ForwardOptions::new(N)).unwrap();
    assert_eq!(out.diagnostics.flagged, 0);
    for (_, z, f) in out.frame.values.iter() {
        assert!(f.max_coeff_dist(&oracle::vacuum_frame(z, N)) < 1e-8, "z = {z}");
    }
    let back = backward_dpw(&out.frame, DiffScheme::default()).unwrap();
    for (_, z, xi) in back.potential.xi.iter() {
        assert!(dpwkit::linalg::dist(xi, &oracle::vacuum_generator()) < 1e-9, "z = {z}");
    }
}
