//! Finite-difference stencils on uniform grids.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DpwError, Result};
use crate::grid::GridField;
use crate::linalg::{c, CMatrix};
use crate::loopcore::MatrixLoop;

/// Formal accuracy order of the first-derivative stencils. Interior points
/// use centred stencils; near the boundary the same number of points is
/// shifted to one side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffScheme {
    pub accuracy: usize,
}

impl Default for DiffScheme {
    fn default() -> Self {
        Self { accuracy: 8 }
    }
}

impl DiffScheme {
    pub const SECOND_ORDER: DiffScheme = DiffScheme { accuracy: 2 };

    /// Stencils for every node of an axis with `n` points, as
    /// `(first index, weights)`; weights are per unit spacing.
    pub fn axis_stencils(&self, n: usize) -> Result<Vec<(usize, Vec<f64>)>> {
        if n < 3 {
            return Err(DpwError::GridTooCoarse {
                points: n,
                required: 3,
            });
        }
        let mut p = self.accuracy.max(2).min(n - 1);
        if p % 2 == 1 {
            p -= 1;
        }
        let width = p + 1;
        Ok((0..n)
            .map(|i| {
                let start = i.saturating_sub(p / 2).min(n - width);
                let offsets: Vec<f64> = (start..start + width).map(|j| j as f64 - i as f64).collect();
                (start, fornberg_first_derivative(&offsets))
            })
            .collect())
    }
}

/// First-derivative weights at 0 for the given node offsets (Fornberg).
pub fn fornberg_first_derivative(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = 1;
    // delta[k][j]: weight of node j for the k-th derivative.
    let mut delta = vec![vec![0.0; n]; m + 1];
    delta[0][0] = 1.0;
    let mut c1 = 1.0;
    for i in 1..n {
        let mut c2 = 1.0;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            for k in (0..=m.min(i)).rev() {
                let prev = if k > 0 { delta[k - 1][i - 1] } else { 0.0 };
                delta[k][i] = c1 * (k as f64 * prev - x[i - 1] * delta[k][i - 1]) / c2;
            }
            for k in (0..=m.min(i)).rev() {
                let prev = if k > 0 { delta[k - 1][j] } else { 0.0 };
                delta[k][j] = (x[i] * delta[k][j] - k as f64 * prev) / c3;
            }
        }
        c1 = c2;
    }
    delta.swap_remove(m)
}

/// Values that can be differentiated and used as frames.
pub trait FieldValue: Clone + Send + Sync {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, s: Complex64, other: &Self);
    fn product(&self, other: &Self) -> Self;
    fn inverse(&self) -> Option<Self>;
}

impl FieldValue for CMatrix {
    fn zero_like(&self) -> Self {
        CMatrix::zeros(self.nrows(), self.ncols())
    }
    fn add_scaled(&mut self, s: Complex64, other: &Self) {
        *self += other * s;
    }
    fn product(&self, other: &Self) -> Self {
        self * other
    }
    fn inverse(&self) -> Option<Self> {
        crate::linalg::try_inverse(self)
    }
}

impl FieldValue for MatrixLoop {
    fn zero_like(&self) -> Self {
        MatrixLoop::zero(self.size(), self.bound())
    }
    fn add_scaled(&mut self, s: Complex64, other: &Self) {
        self.axpy(s, other);
    }
    fn product(&self, other: &Self) -> Self {
        self * other
    }
    fn inverse(&self) -> Option<Self> {
        MatrixLoop::inverse(self).ok()
    }
}

/// `(∂_x f, ∂_y f)` at every node; `None` wherever a stencil touches a
/// flagged node.
pub fn partials<T: FieldValue>(field: &GridField<T>, scheme: DiffScheme) -> Result<GridField<(T, T)>> {
    let g = field.grid;
    let sx = scheme.axis_stencils(g.nx)?;
    let sy = scheme.axis_stencils(g.ny)?;
    let (hx, hy) = (g.hx(), g.hy());
    let values = (0..g.len())
        .map(|idx| {
            let (ix, iy) = g.coords(idx);
            field.values[idx].as_ref()?;
            let dx = apply(&sx[ix], hx, |j| field.get(j, iy))?;
            let dy = apply(&sy[iy], hy, |j| field.get(ix, j))?;
            Some((dx, dy))
        })
        .collect();
    Ok(GridField::new(g, values))
}

fn apply<'a, T: FieldValue + 'a>(
    stencil: &(usize, Vec<f64>),
    h: f64,
    at: impl Fn(usize) -> Option<&'a T>,
) -> Option<T> {
    let (start, w) = stencil;
    let mut acc = at(*start)?.zero_like();
    for (j, wj) in w.iter().enumerate() {
        acc.add_scaled(c(wj / h, 0.0), at(start + j)?);
    }
    Some(acc)
}

/// `∂_z = (∂_x − i∂_y)/2` and `∂_z̄ = (∂_x + i∂_y)/2`.
pub fn wirtinger<T: FieldValue>(dx: &T, dy: &T) -> (T, T) {
    let half = c(0.5, 0.0);
    let mut dz = dx.zero_like();
    dz.add_scaled(half, dx);
    dz.add_scaled(c(0.0, -0.5), dy);
    let mut dzb = dx.zero_like();
    dzb.add_scaled(half, dx);
    dzb.add_scaled(c(0.0, 0.5), dy);
    (dz, dzb)
}
