use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::model::GroupModel;
use crate::error::{DpwError, Result};
use crate::linalg::{self, c, CMatrix};

/// Declared twisting class of a loop.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    /// Element of the twisted loop group.
    Group,
    /// Element of the twisted loop algebra.
    Algebra,
    #[default]
    Untagged,
}

/// Outcome of a twisting check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwistCheck {
    pub twisted: bool,
    pub violation: f64,
}

/// Truncated Laurent series `Σ_{|k| ≤ N} c_k λ^k` with `n × n` complex
/// coefficients.
///
/// All loops of a computation share one degree bound `N`; products are
/// formed exactly and then cut back to `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixLoop {
    n: usize,
    bound: usize,
    coeffs: Vec<CMatrix>,
    parity: Parity,
}

impl MatrixLoop {
    pub fn zero(n: usize, bound: usize) -> Self {
        Self {
            n,
            bound,
            coeffs: vec![linalg::zeros(n); 2 * bound + 1],
            parity: Parity::Untagged,
        }
    }

    pub fn identity(n: usize, bound: usize) -> Self {
        Self::constant(linalg::identity(n), bound).with_parity(Parity::Group)
    }

    pub fn constant(m: CMatrix, bound: usize) -> Self {
        let mut out = Self::zero(m.nrows(), bound);
        out.coeffs[bound] = m;
        out
    }

    /// `m λ^k`.
    pub fn monomial(m: CMatrix, k: i32, bound: usize) -> Result<Self> {
        Self::from_modes(m.nrows(), bound, [(k, m)])
    }

    pub fn from_modes<I>(n: usize, bound: usize, modes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i32, CMatrix)>,
    {
        let mut out = Self::zero(n, bound);
        for (k, m) in modes {
            if m.nrows() != n || m.ncols() != n {
                return Err(DpwError::DimensionMismatch {
                    expected: n,
                    found: m.nrows(),
                });
            }
            if k.unsigned_abs() as usize > bound {
                return Err(DpwError::Schema(format!(
                    "mode {k} exceeds degree bound {bound}"
                )));
            }
            out.coeffs[(k + bound as i32) as usize] += m;
        }
        Ok(out)
    }

    /// Coefficients of `λ ↦ f(λ)` by a discrete Fourier transform over
    /// `samples` equispaced points of the unit circle.
    pub fn from_fn<F>(n: usize, bound: usize, samples: usize, f: F) -> Self
    where
        F: Fn(Complex64) -> CMatrix,
    {
        let samples = samples.max(2 * bound + 1);
        let values: Vec<(Complex64, CMatrix)> = (0..samples)
            .map(|j| {
                let lam = linalg::circle_point(j, samples);
                (lam, f(lam))
            })
            .collect();
        let mut out = Self::zero(n, bound);
        let scale = c(1.0 / samples as f64, 0.0);
        for k in -(bound as i32)..=(bound as i32) {
            let mut acc = linalg::zeros(n);
            for (lam, v) in &values {
                acc += v * lam.powi(-k);
            }
            out.coeffs[(k + bound as i32) as usize] = acc * scale;
        }
        out
    }

    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// Coefficient of `λ^k`; `None` outside `[-N, N]`.
    pub fn coeff(&self, k: i32) -> Option<&CMatrix> {
        if k.unsigned_abs() as usize > self.bound {
            None
        } else {
            Some(&self.coeffs[(k + self.bound as i32) as usize])
        }
    }

    pub fn coeff_or_zero(&self, k: i32) -> CMatrix {
        self.coeff(k).cloned().unwrap_or_else(|| linalg::zeros(self.n))
    }

    pub fn set_coeff(&mut self, k: i32, m: CMatrix) {
        assert!(k.unsigned_abs() as usize <= self.bound, "mode {k} out of range");
        self.coeffs[(k + self.bound as i32) as usize] = m;
    }

    /// `(k, c_k)` for every stored mode, in increasing `k`.
    pub fn modes(&self) -> impl Iterator<Item = (i32, &CMatrix)> {
        let b = self.bound as i32;
        self.coeffs.iter().enumerate().map(move |(i, m)| (i as i32 - b, m))
    }

    pub fn evaluate(&self, lambda: Complex64) -> Result<CMatrix> {
        if lambda.norm() == 0.0 {
            return Err(DpwError::ZeroLambda);
        }
        let mut acc = linalg::zeros(self.n);
        for (k, m) in self.modes() {
            acc += m * lambda.powi(k);
        }
        Ok(acc)
    }

    /// Exact Cauchy product; the result has bound `N_a + N_b`.
    pub fn multiply_full(&self, other: &Self) -> Result<Self> {
        self.check_size(other)?;
        let bound = self.bound + other.bound;
        let mut out = Self::zero(self.n, bound);
        let one = c(1.0, 0.0);
        for (i, a) in self.modes() {
            if is_zero(a) {
                continue;
            }
            for (j, b) in other.modes() {
                if is_zero(b) {
                    continue;
                }
                let slot = &mut out.coeffs[(i + j + bound as i32) as usize];
                slot.gemm(one, a, b, one);
            }
        }
        out.parity = combine(self.parity, other.parity);
        Ok(out)
    }

    /// Cauchy product truncated to the larger of the two bounds.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        let bound = self.bound.max(other.bound);
        Ok(self.multiply_full(other)?.truncated(bound).0)
    }

    /// Keeps modes in `[-bound, bound]`; returns the Wiener mass dropped.
    pub fn truncated(&self, bound: usize) -> (Self, f64) {
        let mut out = Self::zero(self.n, bound);
        out.parity = self.parity;
        let mut tail = 0.0;
        for (k, m) in self.modes() {
            if k.unsigned_abs() as usize <= bound {
                out.coeffs[(k + bound as i32) as usize] = m.clone();
            } else {
                tail += m.norm();
            }
        }
        (out, tail)
    }

    /// Largest `|k|` carrying a nonzero coefficient.
    pub fn support_bound(&self) -> usize {
        self.modes()
            .filter(|(_, m)| !is_zero(m))
            .map(|(k, _)| k.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Same loop stored at a different bound (padding or truncating).
    pub fn resized(&self, bound: usize) -> Self {
        self.truncated(bound).0
    }

    /// Inverse loop at the same bound.
    ///
    /// One-sided loops are inverted by the exact triangular recursion.
    /// Two-sided loops solve the block convolution system `g·x = I` on the
    /// mode window `[-S, S]` with `S = N + 8`, then cut back to `N`.
    pub fn inverse(&self) -> Result<Self> {
        let out = if self.negative_mass() == 0.0 {
            self.one_sided_inverse(1)?
        } else if self.positive_mass() == 0.0 {
            self.one_sided_inverse(-1)?
        } else {
            self.convolution_inverse(self.bound + 8)?
        };
        Ok(out.with_parity(self.parity))
    }

    fn one_sided_inverse(&self, dir: i32) -> Result<Self> {
        let bound = self.bound;
        let c0_inv = linalg::try_inverse(&self.coeffs[bound])
            .ok_or(DpwError::NotInvertible { bound })?;
        let mut out = Self::zero(self.n, bound);
        out.coeffs[bound] = c0_inv.clone();
        let one = c(1.0, 0.0);
        for m in 1..=bound as i32 {
            let mut acc = linalg::zeros(self.n);
            for j in 1..=m {
                let g = &self.coeffs[(dir * j + bound as i32) as usize];
                if is_zero(g) {
                    continue;
                }
                let x = &out.coeffs[(dir * (m - j) + bound as i32) as usize];
                acc.gemm(one, g, x, one);
            }
            out.coeffs[(dir * m + bound as i32) as usize] = -(&c0_inv * acc);
        }
        Ok(out)
    }

    fn convolution_inverse(&self, section: usize) -> Result<Self> {
        let n = self.n;
        let blocks = 2 * section + 1;
        let s = section as i32;
        // Row block m, column block k: g_{m-k}.
        let mut t = CMatrix::zeros(blocks * n, blocks * n);
        for mi in 0..blocks {
            for ki in 0..blocks {
                let d = mi as i32 - ki as i32;
                if let Some(g) = self.coeff(d) {
                    t.view_mut((mi * n, ki * n), (n, n)).copy_from(g);
                }
            }
        }
        let mut rhs = CMatrix::zeros(blocks * n, n);
        rhs.view_mut((section * n, 0), (n, n))
            .copy_from(&linalg::identity(n));
        let sol = t
            .lu()
            .solve(&rhs)
            .ok_or(DpwError::NotInvertible { bound: self.bound })?;
        if sol.iter().any(|z| !z.is_finite()) {
            return Err(DpwError::NotInvertible { bound: self.bound });
        }
        let mut out = Self::zero(n, self.bound);
        for k in -(self.bound as i32)..=(self.bound as i32) {
            let row = ((k + s) as usize) * n;
            out.coeffs[(k + self.bound as i32) as usize] = sol.view((row, 0), (n, n)).into_owned();
        }
        Ok(out)
    }

    /// Star with respect to the model's real form:
    /// `c_k ↦ s · c_{-k}^H · s⁻¹`.
    pub fn tau_star(&self, model: &GroupModel) -> Self {
        let s = model.star_matrix();
        let s_inv = model.tau().inverse_matrix();
        let mut out = Self::zero(self.n, self.bound);
        out.parity = self.parity;
        for (k, m) in self.modes() {
            out.coeffs[(-k + self.bound as i32) as usize] = s * m.adjoint() * s_inv;
        }
        out
    }

    /// `max_k ‖σ(c_k) − (−1)^k c_k‖`.
    pub fn twist_violation(&self, model: &GroupModel) -> f64 {
        self.modes()
            .map(|(k, m)| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                (model.apply_sigma(m) - m * c(sign, 0.0)).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn check_twisted(&self, model: &GroupModel, tol: f64) -> TwistCheck {
        let violation = self.twist_violation(model);
        TwistCheck {
            twisted: violation <= tol,
            violation,
        }
    }

    /// `Σ_k ‖c_k‖` (Frobenius).
    pub fn wiener_norm(&self) -> f64 {
        self.coeffs.iter().map(|m| m.norm()).sum()
    }

    pub fn negative_mass(&self) -> f64 {
        self.modes().filter(|(k, _)| *k < 0).map(|(_, m)| m.norm()).sum()
    }

    pub fn positive_mass(&self) -> f64 {
        self.modes().filter(|(k, _)| *k > 0).map(|(_, m)| m.norm()).sum()
    }

    /// Wiener mass in every mode except `k`.
    pub fn mass_outside_mode(&self, keep: i32) -> f64 {
        self.modes().filter(|(k, _)| *k != keep).map(|(_, m)| m.norm()).sum()
    }

    /// Wiener mass of the outermost retained modes `±N`; a cheap proxy for
    /// how much a truncation is discarding.
    pub fn edge_mass(&self) -> f64 {
        let b = self.bound as i32;
        if b == 0 {
            return 0.0;
        }
        self.coeffs[0].norm() + self.coeffs[(2 * b) as usize].norm()
    }

    /// Largest coefficientwise Frobenius distance, over the union of modes.
    pub fn max_coeff_dist(&self, other: &Self) -> f64 {
        let b = self.bound.max(other.bound) as i32;
        (-b..=b)
            .map(|k| linalg::dist(&self.coeff_or_zero(k), &other.coeff_or_zero(k)))
            .fold(0.0, f64::max)
    }

    /// Largest pointwise distance at `count` unit-circle samples.
    pub fn max_circle_dist(&self, other: &Self, count: usize) -> f64 {
        (0..count)
            .map(|j| {
                let lam = linalg::circle_point(j, count);
                let a = self.evaluate(lam).expect("unit-circle sample");
                let b = other.evaluate(lam).expect("unit-circle sample");
                linalg::dist(&a, &b)
            })
            .fold(0.0, f64::max)
    }

    /// `h · g · h_inv`.
    pub fn conjugate(&self, h: &CMatrix, h_inv: &CMatrix) -> Self {
        self.map_coeffs(|m| h * m * h_inv)
    }

    pub fn left_mul(&self, m: &CMatrix) -> Self {
        self.map_coeffs(|x| m * x)
    }

    pub fn right_mul(&self, m: &CMatrix) -> Self {
        self.map_coeffs(|x| x * m)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map_coeffs(|x| x * s)
    }

    /// `self += s · other`; the bound grows to the larger of the two.
    pub fn axpy(&mut self, s: Complex64, other: &Self) {
        assert_eq!(self.n, other.n, "loop sizes differ");
        if other.bound > self.bound {
            *self = self.resized(other.bound);
        }
        for (k, m) in other.modes() {
            if is_zero(m) {
                continue;
            }
            let slot = &mut self.coeffs[(k + self.bound as i32) as usize];
            *slot += m * s;
        }
    }

    pub fn map_coeffs<F: Fn(&CMatrix) -> CMatrix>(&self, f: F) -> Self {
        Self {
            n: self.n,
            bound: self.bound,
            coeffs: self.coeffs.iter().map(f).collect(),
            parity: self.parity,
        }
    }

    fn check_size(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            Err(DpwError::DimensionMismatch {
                expected: self.n,
                found: other.n,
            })
        } else {
            Ok(())
        }
    }

    fn zip_with<F: Fn(&CMatrix, &CMatrix) -> CMatrix>(&self, other: &Self, f: F) -> Self {
        assert_eq!(self.n, other.n, "loop sizes differ");
        let bound = self.bound.max(other.bound);
        let zero = linalg::zeros(self.n);
        let b = bound as i32;
        let coeffs = (-b..=b)
            .map(|k| f(self.coeff(k).unwrap_or(&zero), other.coeff(k).unwrap_or(&zero)))
            .collect();
        Self {
            n: self.n,
            bound,
            coeffs,
            parity: combine(self.parity, other.parity),
        }
    }
}

fn is_zero(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

fn combine(a: Parity, b: Parity) -> Parity {
    if a == b {
        a
    } else {
        Parity::Untagged
    }
}

impl Add for &MatrixLoop {
    type Output = MatrixLoop;
    fn add(self, rhs: &MatrixLoop) -> MatrixLoop {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &MatrixLoop {
    type Output = MatrixLoop;
    fn sub(self, rhs: &MatrixLoop) -> MatrixLoop {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &MatrixLoop {
    type Output = MatrixLoop;
    fn neg(self) -> MatrixLoop {
        self.map_coeffs(|m| -m)
    }
}

/// Truncated product; panics on a size mismatch (use
/// [`MatrixLoop::multiply`] for the fallible version).
impl Mul for &MatrixLoop {
    type Output = MatrixLoop;
    fn mul(self, rhs: &MatrixLoop) -> MatrixLoop {
        self.multiply(rhs).expect("loop sizes differ")
    }
}
