//! Closed-form reference loops used by the verification suite.
//!
//! Loops given pointwise are turned into coefficients by a DFT over
//! `ORACLE_SAMPLES` circle points, far more than the degree bounds in use,
//! so aliasing is below double precision for the arguments involved.

use num_complex::Complex64;

use crate::linalg::{self, c, real_matrix, CMatrix};
use crate::loopcore::{MatrixLoop, Parity};

pub const ORACLE_SAMPLES: usize = 128;

/// `A = [[0,1],[1,0]]`, the vacuum generator.
pub fn vacuum_generator() -> CMatrix {
    real_matrix(&[&[0.0, 1.0], &[1.0, 0.0]])
}

/// Coefficients of `λ ↦ exp(f(λ))`.
pub fn exp_loop(n: usize, bound: usize, f: impl Fn(Complex64) -> CMatrix) -> MatrixLoop {
    MatrixLoop::from_fn(n, bound, ORACLE_SAMPLES, |lam| linalg::expm(&f(lam)))
}

/// Extended frame of the vacuum based at 0: `exp(z λ⁻¹ A − z̄ λ A)`.
pub fn vacuum_frame(z: Complex64, bound: usize) -> MatrixLoop {
    let a = vacuum_generator();
    exp_loop(2, bound, |lam| &a * (z / lam) - &a * (z.conj() * lam)).with_parity(Parity::Group)
}

/// `exp(λ⁻¹ A + λ B)` for commuting `A`, `B` together with its Birkhoff
/// factors `exp(λ⁻¹ A)` and `exp(λ B)`.
pub fn commuting_exponential(a: &CMatrix, b: &CMatrix, bound: usize) -> (MatrixLoop, MatrixLoop, MatrixLoop) {
    let n = a.nrows();
    (
        exp_loop(n, bound, |lam| a / lam + b * lam),
        exp_loop(n, bound, |lam| a / lam),
        exp_loop(n, bound, |lam| b * lam),
    )
}

/// `[[0, λ], [−λ⁻¹, 0]]`: partial indices `±1`, so outside the big cell.
pub fn off_big_cell_loop(bound: usize) -> MatrixLoop {
    MatrixLoop::from_modes(
        2,
        bound.max(1),
        [
            (1, real_matrix(&[&[0.0, 1.0], &[0.0, 0.0]])),
            (-1, real_matrix(&[&[0.0, 0.0], &[-1.0, 0.0]])),
        ],
    )
    .expect("modes within bound")
}

/// `I + t λ⁻¹ E₁₂`. For the indefinite form it lies in the Iwasawa cell
/// exactly when `|t| < 1`.
pub fn indefinite_probe_loop(t: f64, bound: usize) -> MatrixLoop {
    let e12 = real_matrix(&[&[0.0, 1.0], &[0.0, 0.0]]);
    MatrixLoop::from_modes(2, bound.max(1), [(0, linalg::identity(2)), (-1, e12 * c(t, 0.0))])
        .expect("modes within bound")
}
