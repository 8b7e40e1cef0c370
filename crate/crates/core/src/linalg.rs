//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(n: usize) -> CMatrix {
    CMatrix::zeros(n, n)
}

/// Builds a matrix from real row slices.
pub fn real_matrix(rows: &[&[f64]]) -> CMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(n, m, |i, j| c(rows[i][j], 0.0))
}

pub fn diag(entries: &[Complex64]) -> CMatrix {
    let n = entries.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { entries[i] } else { c(0.0, 0.0) })
}

/// Frobenius norm.
#[inline]
pub fn norm(m: &CMatrix) -> f64 {
    m.norm()
}

pub fn dist(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn try_inverse(m: &CMatrix) -> Option<CMatrix> {
    m.clone().lu().try_inverse()
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.trace()
}

/// Ratio of the smallest to the largest singular value; 0 for a zero matrix.
pub fn rcond(m: &CMatrix) -> f64 {
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 || !max.is_finite() {
        0.0
    } else {
        min / max
    }
}

/// Upper-triangular `R` with positive diagonal and `R^H R = a` for a
/// Hermitian positive-definite `a`.
pub fn upper_cholesky(a: &CMatrix) -> Option<CMatrix> {
    let n = a.nrows();
    let herm = (a + a.adjoint()) * c(0.5, 0.0);
    let scale = herm.norm().max(f64::MIN_POSITIVE);
    let mut r = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = herm[(j, j)].re;
        for k in 0..j {
            d -= r[(k, j)].norm_sqr();
        }
        if !(d > 1e-14 * scale) {
            return None;
        }
        let djj = d.sqrt();
        r[(j, j)] = c(djj, 0.0);
        for i in j + 1..n {
            let mut v = herm[(j, i)];
            for k in 0..j {
                v -= r[(k, j)].conj() * r[(k, i)];
            }
            r[(j, i)] = v / djj;
        }
    }
    Some(r)
}

/// Matrix exponential (Padé with scaling and squaring, via nalgebra).
pub fn expm(m: &CMatrix) -> CMatrix {
    m.exp()
}

/// Largest absolute value of the off-block-diagonal entries with respect to
/// the sign pattern `classes` (entry `(i, j)` is off-block when the classes
/// of `i` and `j` differ).
pub fn off_block_norm(m: &CMatrix, classes: &[i8]) -> f64 {
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if classes[i] != classes[j] {
                acc += m[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// LU factorization of a square matrix with a 1-norm condition estimate.
pub struct Factorized {
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    norm1: f64,
    n: usize,
}

impl Factorized {
    pub fn new(a: CMatrix) -> Self {
        let n = a.nrows();
        let norm1 = one_norm(&a);
        Self {
            lu: a.lu(),
            norm1,
            n,
        }
    }

    pub fn solve(&self, b: &CMatrix) -> Option<CMatrix> {
        let x = self.lu.solve(b)?;
        x.iter().all(|z| z.is_finite()).then_some(x)
    }

    /// Solves `A^H x = b` from the same factorization (`PA = LU`).
    fn solve_adjoint(&self, b: &CMatrix) -> Option<CMatrix> {
        let u_h = self.lu.u().adjoint();
        let l_h = self.lu.l().adjoint();
        let y = u_h.solve_lower_triangular(b)?;
        let mut x = l_h.solve_upper_triangular(&y)?;
        self.lu.p().inv_permute_rows(&mut x);
        Some(x)
    }

    /// Reciprocal 1-norm condition number estimate (Hager–Higham).
    /// Returns 0 for numerically singular matrices.
    pub fn rcond_estimate(&self) -> f64 {
        if self.n == 0 {
            return 1.0;
        }
        if self.norm1 == 0.0 {
            return 0.0;
        }
        match self.inverse_norm1_estimate() {
            Some(est) if est.is_finite() && est > 0.0 => 1.0 / (self.norm1 * est),
            _ => 0.0,
        }
    }

    fn inverse_norm1_estimate(&self) -> Option<f64> {
        let n = self.n;
        let mut x = CMatrix::from_element(n, 1, c(1.0 / n as f64, 0.0));
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve(&x)?;
            est = y.iter().map(|z| z.norm()).sum::<f64>();
            let xi = y.map(|z| if z.norm() == 0.0 { c(1.0, 0.0) } else { z / z.norm() });
            let z = self.solve_adjoint(&xi)?;
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            let ztx = (z.adjoint() * &x)[(0, 0)].re;
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x = CMatrix::zeros(n, 1);
            x[(j, 0)] = c(1.0, 0.0);
        }
        // Higham's alternating test vector guards against the rare cases
        // where the iteration stalls.
        let alt = CMatrix::from_fn(n, 1, |i, _| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
            c(sign * (1.0 + i as f64 / denom), 0.0)
        });
        let y = self.solve(&alt)?;
        let alt_est = 2.0 * y.iter().map(|z| z.norm()).sum::<f64>() / (3.0 * n as f64);
        Some(est.max(alt_est))
    }
}

/// Maximum absolute column sum.
pub fn one_norm(a: &CMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Unit-circle sample `exp(2πi k / count)`.
pub fn circle_point(k: usize, count: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_is_upper_with_positive_diagonal() {
        let a = real_matrix(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let r = upper_cholesky(&a).unwrap();
        assert!(r[(1, 0)].norm() < 1e-15);
        assert!(r[(0, 0)].re > 0.0 && r[(1, 1)].re > 0.0);
        assert!(dist(&(r.adjoint() * &r), &a) < 1e-13);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = real_matrix(&[&[1.0, 0.0], &[0.0, -1.0]]);
        assert!(upper_cholesky(&a).is_none());
    }

    #[test]
    fn condition_estimate_tracks_svd() {
        let a = CMatrix::from_fn(6, 6, |i, j| {
            c(1.0 / (1.0 + i as f64 + j as f64), 0.1 * (i as f64 - j as f64))
        });
        let est = Factorized::new(a.clone()).rcond_estimate();
        let exact = rcond(&a);
        // 1-norm and 2-norm condition numbers agree within a factor of n.
        assert!(est > exact / 36.0 && est < exact * 36.0, "{est} vs {exact}");
        let singular = real_matrix(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(Factorized::new(singular).rcond_estimate() < 1e-15);
    }

    #[test]
    fn adjoint_solve_matches_dense() {
        let a = CMatrix::from_fn(4, 4, |i, j| c((i * 3 + j) as f64 % 5.0 + 1.0, i as f64 - j as f64));
        let f = Factorized::new(a.clone());
        let b = CMatrix::from_fn(4, 1, |i, _| c(i as f64, 1.0));
        let x = f.solve_adjoint(&b).unwrap();
        assert!(dist(&(a.adjoint() * x), &b) < 1e-12);
    }

    #[test]
    fn rcond_of_singular_is_tiny() {
        let a = real_matrix(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(rcond(&a) < 1e-15);
        assert!((rcond(&identity(3)) - 1.0).abs() < 1e-15);
    }
}
