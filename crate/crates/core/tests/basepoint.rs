use dpwkit::basepoint::*;
use dpwkit::factor::birkhoff_split;
use dpwkit::grid::RectGrid;
use dpwkit::linalg::{self, c};
use dpwkit::loopcore::{GroupModel, MatrixLoop, RealForm};
use dpwkit::pipeline::{forward_dpw, ExtendedFrameField, ForwardOptions};
use dpwkit::potential::{Domain, PotentialOneForm};
use num_complex::Complex64;

const N: usize = 12;

fn frame(form: RealForm) -> ExtendedFrameField {
    let dom = Domain::Rect {
        x_min: -0.5,
        x_max: 0.5,
        y_min: -0.5,
        y_max: 0.5,
    };
    let eta = PotentialOneForm::vacuum(dom);
    let grid = RectGrid::square(0.25, 9).unwrap();
    forward_dpw(&eta, grid, &GroupModel::rank_one(form), &ForwardOptions::new(N))
        .unwrap()
        .frame
}

#[test]
fn conjugation_audit() {
    let f0 = frame(RealForm::Compact);
    let z1 = c(0.125, 0.1875);
    let mv = ConjugationMove::synthesize(&f0, z1, GaugeChoice::Constant(linalg::identity(2)), 1e-9).unwrap();
    let inv = involution_transport(&mv, 1e-12).unwrap();
    assert!(inv.involutivity_residual < 1e-12);
    let out = conjugate_transport(&f0, &mv, 1e-9).unwrap();
    assert!(out.audit.flagged.is_empty());
    assert!(out.audit.sigma1_twist < 1e-12, "{}", out.audit.sigma1_twist);
    assert!(out.audit.normalized_relation < 1e-8, "{}", out.audit.normalized_relation);
    assert!(out.audit.realform < 1e-8);
    // F₀(z₁, λ) is not λ-constant, so a constant gauge leaves F₁(z₁) ≠ I.
    assert!(out.audit.target_identity > 1e-3);
}

#[test]
fn real_axis_conjugation_is_trivial() {
    let f0 = frame(RealForm::Compact);
    let mv = ConjugationMove::synthesize(&f0, c(0.1875, 0.0), GaugeChoice::Constant(linalg::identity(2)), 1e-9).unwrap();
    assert!(linalg::dist(&mv.h, &linalg::identity(2)) < 1e-10);
}

#[test]
fn gauge_freedom_in_conjugation() {
    let f0 = frame(RealForm::Compact);
    let z1 = c(-0.0625, 0.125);
    let base = ConjugationMove::synthesize(&f0, z1, GaugeChoice::Constant(linalg::identity(2)), 1e-9).unwrap();
    let k = linalg::diag(&[Complex64::from_polar(1.0, 0.7), Complex64::from_polar(1.0, -0.7)]);
    let hk = &base.h * &k;
    let moved = ConjugationMove::new(hk.clone(), &f0, z1, GaugeChoice::Constant(linalg::identity(2)), 1e-9).unwrap();
    let f1 = conjugate_transport(&f0, &base, 1e-9).unwrap().frame;
    let f1k = conjugate_transport(&f0, &moved, 1e-9).unwrap().frame;
    let hk_inv = linalg::try_inverse(&hk).unwrap();
    let u = &hk * linalg::try_inverse(&base.h).unwrap();
    let u_inv = linalg::try_inverse(&u).unwrap();
    let mut worst_a = 0.0_f64;
    let mut worst_b = 0.0_f64;
    for (i, _, f) in f1k.values.iter() {
        let m = birkhoff_split(f).unwrap().minus;
        let m0 = birkhoff_split(f0.values.values[i].as_ref().unwrap()).unwrap().minus;
        let m1 = birkhoff_split(f1.values.values[i].as_ref().unwrap()).unwrap().minus;
        worst_a = worst_a.max(m.max_coeff_dist(&m0.conjugate(&hk, &hk_inv)));
        worst_b = worst_b.max(m.max_coeff_dist(&m1.conjugate(&u, &u_inv)));
    }
    assert!(worst_a < 1e-9, "{worst_a}");
    assert!(worst_b < 1e-9, "{worst_b}");
}

#[test]
fn dressing_two_routes_agree() {
    let f0 = frame(RealForm::Compact);
    let z2 = c(0.1875, -0.125);
    let mv = compute_ring_g(&f0, z2, &linalg::identity(2), 1e-9).unwrap();
    assert!(mv.diagnostics.construction_residual < 1e-12);
    assert!(mv.diagnostics.orbit_residual.unwrap() < 1e-9);
    let out = dressed_transport(&f0, &mv, 1e-8).unwrap();
    let a = &out.audit;
    assert!(a.agreement_fraction >= 0.95, "{}", a.agreement_fraction);
    assert!(a.max_route_difference < 1e-8, "{}", a.max_route_difference);
    assert!(a.target_identity < 1e-8, "{}", a.target_identity);
    assert!(a.source_block_residual < 1e-9, "{}", a.source_block_residual);
    assert!(a.potential_mode_leak < 1e-6, "{}", a.potential_mode_leak);
    // F₂(z₂) = I exactly by construction up to truncation.
    let id = MatrixLoop::identity(2, N);
    assert!(out.frame.at(z2).unwrap().max_coeff_dist(&id) < 1e-10);
}

#[test]
fn dual_frames_of_indefinite_dressing() {
    let f0 = frame(RealForm::Indefinite);
    let z2 = c(0.125, 0.125);
    let mv = compute_ring_g(&f0, z2, &linalg::identity(2), 1e-9).unwrap();
    let f2 = dressed_transport(&f0, &mv, 1e-8).unwrap().frame;
    let dual = dual_frame_transport(&f0, &f2, &mv).unwrap();
    assert!(dual.audit.flagged.is_empty(), "{:?}", dual.audit.flagged);
    assert!(dual.audit.max_negative_mass < 1e-9, "{}", dual.audit.max_negative_mass);
    assert!(dual.audit.max_frame_distance > 1e-3);
}

#[test]
fn off_grid_target_is_rejected() {
    let f0 = frame(RealForm::Compact);
    let err = compute_ring_g(&f0, c(0.1, 0.1), &linalg::identity(2), 1e-9).unwrap_err();
    assert_eq!(err.kind(), "move_invalid");
    let bad_k = linalg::real_matrix(&[&[0.0, 1.0], &[-1.0, 0.0]]);
    let err = compute_ring_g(&f0, c(0.125, 0.125), &bad_k, 1e-9).unwrap_err();
    assert_eq!(err.kind(), "gauge_not_in_isotropy");
}
