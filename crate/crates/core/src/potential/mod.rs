//! Meromorphic potentials, holomorphic integration and Maurer–Cartan forms.

mod form;
mod integrate;
mod mc;
mod route;

pub use form::{
    Domain, PotentialJson, PotentialOneForm, PotentialTerm, RationalMatrix, TermJson,
    DEFAULT_POLE_RADIUS,
};
pub use integrate::{integrate_along, integrate_holomorphic, integrate_to, Integrated, IntegratorOptions};
pub use mc::{
    decompose_mc, evaluate_forms, evaluate_frames, flatness_field, flatness_residual,
    flatness_residual_sampled,
    loopify, mc_form, MaurerCartanDecomposition, OneForm,
};
pub use route::{check_path, route};
