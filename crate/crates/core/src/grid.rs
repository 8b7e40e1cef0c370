//! Rectangular sampling grids and per-point fields with flagged entries.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DpwError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl RectGrid {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Result<Self> {
        let grid = Self {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// `[-half, half]²` with `n` points per axis.
    pub fn square(half: f64, n: usize) -> Result<Self> {
        Self::new(-half, half, -half, half, n, n)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_max < self.x_min || self.y_max < self.y_min {
            return Err(DpwError::Schema("grid corners are not an ordered rectangle".into()));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(DpwError::GridTooCoarse {
                points: self.nx.min(self.ny),
                required: 1,
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hx(&self) -> f64 {
        spacing(self.x_min, self.x_max, self.nx)
    }

    pub fn hy(&self) -> f64 {
        spacing(self.y_min, self.y_max, self.ny)
    }

    /// Row-major index, `x` fastest.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn point(&self, ix: usize, iy: usize) -> Complex64 {
        Complex64::new(
            self.x_min + ix as f64 * self.hx(),
            self.y_min + iy as f64 * self.hy(),
        )
    }

    pub fn point_at(&self, idx: usize) -> Complex64 {
        let (ix, iy) = self.coords(idx);
        self.point(ix, iy)
    }

    pub fn points(&self) -> Vec<Complex64> {
        (0..self.len()).map(|i| self.point_at(i)).collect()
    }

    /// Index of the grid node within `tol` of `z`, if any.
    pub fn locate(&self, z: Complex64, tol: f64) -> Option<usize> {
        let ix = axis_index(z.re, self.x_min, self.hx(), self.nx)?;
        let iy = axis_index(z.im, self.y_min, self.hy(), self.ny)?;
        let idx = self.index(ix, iy);
        ((self.point_at(idx) - z).norm() <= tol).then_some(idx)
    }

    /// Same rectangle at a different resolution.
    pub fn with_resolution(&self, nx: usize, ny: usize) -> Self {
        Self { nx, ny, ..*self }
    }
}

fn spacing(lo: f64, hi: f64, n: usize) -> f64 {
    if n > 1 {
        (hi - lo) / (n - 1) as f64
    } else {
        0.0
    }
}

fn axis_index(v: f64, lo: f64, h: f64, n: usize) -> Option<usize> {
    if n == 1 || h == 0.0 {
        return Some(0);
    }
    let r = ((v - lo) / h).round();
    (r >= 0.0 && (r as usize) < n).then_some(r as usize)
}

/// One value per grid node; `None` marks a flagged (skipped) node.
#[derive(Clone, Debug)]
pub struct GridField<T> {
    pub grid: RectGrid,
    pub values: Vec<Option<T>>,
}

impl<T> GridField<T> {
    pub fn new(grid: RectGrid, values: Vec<Option<T>>) -> Self {
        assert_eq!(grid.len(), values.len(), "field size does not match grid");
        Self { grid, values }
    }

    pub fn get(&self, ix: usize, iy: usize) -> Option<&T> {
        self.values[self.grid.index(ix, iy)].as_ref()
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Complex64, &T)> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.as_ref().map(|v| (i, self.grid.point_at(i), v)))
    }

    pub fn map<U, F: Fn(&T) -> U>(&self, f: F) -> GridField<U> {
        GridField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.as_ref().map(&f)).collect(),
        }
    }
}

impl<T: Sync> GridField<T> {
    /// Parallel map over nodes; the output order is the grid order, so the
    /// result does not depend on scheduling.
    pub fn par_map<U: Send, F>(&self, f: F) -> GridField<U>
    where
        F: Fn(usize, Complex64, &T) -> Option<U> + Sync,
    {
        let values = self
            .values
            .par_iter()
            .enumerate()
            .map(|(i, v)| v.as_ref().and_then(|v| f(i, self.grid.point_at(i), v)))
            .collect();
        GridField {
            grid: self.grid,
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_recovers_nodes() {
        let g = RectGrid::square(0.5, 21).unwrap();
        assert!((g.hx() - 0.05).abs() < 1e-15);
        let idx = g.locate(Complex64::new(0.3, 0.0), 1e-9).unwrap();
        assert_eq!(g.coords(idx), (16, 10));
        assert!(g.locate(Complex64::new(0.31, 0.0), 1e-9).is_none());
        assert!(g.locate(Complex64::new(0.9, 0.0), 1e-9).is_none());
    }
}
