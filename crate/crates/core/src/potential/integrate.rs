//! Adaptive Dormand–Prince integration of `dF₋ = F₋ η` along complex paths.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::form::PotentialOneForm;
use super::route::{check_path, route};
use crate::error::{DpwError, Result};
use crate::linalg::{c, CMatrix};
use crate::loopcore::{MatrixLoop, Parity};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Extra modes carried during integration and dropped at the end.
    pub guard_modes: usize,
    pub max_steps: usize,
    /// Smallest admissible step as a fraction of a path segment.
    pub min_step: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-13,
            atol: 1e-15,
            guard_modes: 4,
            max_steps: 200_000,
            min_step: 1e-12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Integrated {
    pub value: MatrixLoop,
    /// Wiener mass of the guard modes dropped when cutting back to `N`.
    pub tail: f64,
    pub steps: usize,
    pub path: Vec<Complex64>,
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Loop coefficients stored flat: `data[(k + B) n² + i n + j]`.
struct Flat {
    n: usize,
    bound: usize,
    data: Vec<Complex64>,
}

impl Flat {
    fn identity(n: usize, bound: usize) -> Self {
        let mut data = vec![c(0.0, 0.0); (2 * bound + 1) * n * n];
        for i in 0..n {
            data[bound * n * n + i * n + i] = c(1.0, 0.0);
        }
        Self { n, bound, data }
    }

    fn zeros_like(&self) -> Self {
        Self {
            n: self.n,
            bound: self.bound,
            data: vec![c(0.0, 0.0); self.data.len()],
        }
    }

    fn axpy(&mut self, s: f64, other: &Flat) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `self · Σ_j λ^{m_j} ξ_j · d`, truncated to the bound.
    fn times_terms(&self, terms: &[(i32, CMatrix)], d: Complex64, out: &mut Flat) {
        let n = self.n;
        let nn = n * n;
        let b = self.bound as i32;
        out.data.iter_mut().for_each(|z| *z = c(0.0, 0.0));
        for (mode, xi) in terms {
            let xd = xi * d;
            for k in -b..=b {
                let t = k + mode;
                if t < -b || t > b {
                    continue;
                }
                let src = &self.data[((k + b) as usize) * nn..((k + b) as usize + 1) * nn];
                if src.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                    continue;
                }
                let dst = ((t + b) as usize) * nn;
                for i in 0..n {
                    for l in 0..n {
                        let f = src[i * n + l];
                        if f.re == 0.0 && f.im == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            out.data[dst + i * n + j] += f * xd[(l, j)];
                        }
                    }
                }
            }
        }
    }

    fn to_loop(&self) -> MatrixLoop {
        let n = self.n;
        let nn = n * n;
        let b = self.bound as i32;
        let modes = (-b..=b).map(|k| {
            let off = ((k + b) as usize) * nn;
            (k, CMatrix::from_fn(n, n, |i, j| self.data[off + i * n + j]))
        });
        MatrixLoop::from_modes(n, self.bound, modes).expect("consistent sizes")
    }
}

fn sampled_terms(eta: &PotentialOneForm, z: Complex64) -> Result<Vec<(i32, CMatrix)>> {
    eta.terms
        .iter()
        .map(|t| Ok((t.mode, t.xi.evaluate(z)?)))
        .collect()
}

/// Integrates from `path[0]` (where `F₋ = I`) along the polyline.
pub fn integrate_along(
    eta: &PotentialOneForm,
    path: &[Complex64],
    bound: usize,
    opts: &IntegratorOptions,
) -> Result<Integrated> {
    check_path(path, &eta.poles, eta.pole_radius)?;
    let n = eta.size();
    let work = bound + opts.guard_modes;
    if let Some(t) = eta.terms.iter().find(|t| t.mode.unsigned_abs() as usize > work) {
        return Err(DpwError::Schema(format!("potential mode {} exceeds bound {work}", t.mode)));
    }
    let mut y = Flat::identity(n, work);
    let mut steps = 0;
    let mut k: Vec<Flat> = (0..7).map(|_| y.zeros_like()).collect();
    let mut ys = y.zeros_like();
    for seg in path.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let d = b - a;
        if d.norm() == 0.0 {
            continue;
        }
        let rhs = |t: f64, y: &Flat, out: &mut Flat| -> Result<()> {
            let terms = sampled_terms(eta, a + d * t)?;
            y.times_terms(&terms, d, out);
            Ok(())
        };
        let mut t = 0.0;
        let mut h = 0.1_f64.min(0.05 / d.norm().max(1e-300)).min(1.0);
        rhs(0.0, &y, &mut k[0])?;
        while t < 1.0 {
            if steps >= opts.max_steps {
                return Err(DpwError::IntegrationFailure {
                    at: a + d * t,
                    reason: "step budget exhausted".into(),
                });
            }
            if h < opts.min_step {
                return Err(DpwError::IntegrationFailure {
                    at: a + d * t,
                    reason: format!("step size underflow (h = {h:.3e})"),
                });
            }
            h = h.min(1.0 - t);
            for s in 1..7 {
                ys.data.copy_from_slice(&y.data);
                for (j, aj) in A[s].iter().enumerate() {
                    if *aj != 0.0 {
                        ys.axpy(h * aj, &k[j]);
                    }
                }
                let (_, rest) = k.split_at_mut(s);
                rhs(t + C[s] * h, &ys, &mut rest[0])?;
            }
            // Stage 7 is evaluated at the fifth-order solution.
            let y5 = ys.data.clone();
            let mut err = y.zeros_like();
            for s in 0..7 {
                let e = B5[s] - B4[s];
                if e != 0.0 {
                    err.axpy(h * e, &k[s]);
                }
            }
            let scale = opts.atol + opts.rtol * y.max_abs().max(ys.max_abs());
            let ratio = err.max_abs() / scale;
            if ratio <= 1.0 {
                t += h;
                y.data = y5;
                // First-same-as-last: stage 7 is the derivative at the new point.
                k.swap(0, 6);
                steps += 1;
            }
            let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        }
    }
    let (value, tail) = y.to_loop().truncated(bound);
    Ok(Integrated {
        value: value.with_parity(Parity::Group),
        tail,
        steps,
        path: path.to_vec(),
    })
}

/// `F₋(z)` for every target, started from `F₋(z₀) = I` and routed around
/// the potential's poles. Targets are independent and run in parallel.
pub fn integrate_holomorphic(
    eta: &PotentialOneForm,
    z0: Complex64,
    targets: &[Complex64],
    bound: usize,
    opts: &IntegratorOptions,
) -> Vec<Result<Integrated>> {
    targets
        .par_iter()
        .map(|&z| integrate_to(eta, z0, z, bound, opts))
        .collect()
}

pub fn integrate_to(
    eta: &PotentialOneForm,
    z0: Complex64,
    z: Complex64,
    bound: usize,
    opts: &IntegratorOptions,
) -> Result<Integrated> {
    if z == z0 {
        check_path(&[z0, z0], &eta.poles, eta.pole_radius)?;
        return Ok(Integrated {
            value: MatrixLoop::identity(eta.size(), bound),
            tail: 0.0,
            steps: 0,
            path: vec![z0],
        });
    }
    let path = route(z0, z, &eta.poles, eta.pole_radius)?;
    integrate_along(eta, &path, bound, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, real_matrix};
    use crate::potential::form::Domain;

    fn square() -> Domain {
        Domain::Rect {
            x_min: -1.0,
            x_max: 1.0,
            y_min: -1.0,
            y_max: 1.0,
        }
    }

    #[test]
    fn zero_potential_gives_identity() {
        let eta = PotentialOneForm::zero(2, c(0.0, 0.0), square());
        let r = integrate_to(&eta, c(0.0, 0.0), c(0.3, 0.4), 6, &IntegratorOptions::default()).unwrap();
        assert!(r.value.max_coeff_dist(&MatrixLoop::identity(2, 6)) < 1e-15);
    }

    #[test]
    fn constant_potential_is_an_exponential() {
        let eta = PotentialOneForm::vacuum(square());
        let z = c(0.4, -0.3);
        let r = integrate_to(&eta, c(0.0, 0.0), z, 12, &IntegratorOptions::default()).unwrap();
        let a = real_matrix(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let exact = MatrixLoop::from_fn(2, 12, 64, |lam| linalg::expm(&(&a * (z / lam))));
        assert!(r.value.max_coeff_dist(&exact) < 1e-12, "{}", r.value.max_coeff_dist(&exact));
    }

    #[test]
    fn nilpotent_linear_potential_matches_quadrature() {
        let nil = real_matrix(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let z0 = c(0.1, 0.1);
        let eta = PotentialOneForm::normalized_polynomial(
            vec![linalg::zeros(2), nil.clone()],
            z0,
            square(),
        )
        .unwrap();
        let z = c(-0.3, 0.5);
        let r = integrate_to(&eta, z0, z, 4, &IntegratorOptions::default()).unwrap();
        let expect = MatrixLoop::from_modes(
            2,
            4,
            [(0, linalg::identity(2)), (-1, &nil * ((z * z - z0 * z0) / 2.0))],
        )
        .unwrap();
        assert!(r.value.max_coeff_dist(&expect) < 1e-13);
    }

    #[test]
    fn homotopic_paths_agree() {
        let a = real_matrix(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let b = real_matrix(&[&[0.0, 0.0], &[1.0, 0.0]]);
        // ξ = [[0, 1], [z, 0]] / (z − 0.6), pole at 0.6.
        let xi = crate::potential::form::RationalMatrix::new(
            vec![a, b],
            vec![c(-0.6, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let eta = PotentialOneForm::new(
            2,
            c(0.0, 0.0),
            square(),
            vec![crate::potential::form::PotentialTerm { mode: -1, xi }],
        )
        .unwrap()
        .with_poles(vec![c(0.6, 0.0)]);
        let opts = IntegratorOptions::default();
        let target = c(0.3, 0.3);
        let direct = integrate_along(&eta, &[c(0.0, 0.0), target], 10, &opts).unwrap();
        let detour = integrate_along(&eta, &[c(0.0, 0.0), c(0.0, 0.4), c(0.2, 0.45), target], 10, &opts)
            .unwrap();
        assert!(direct.value.max_coeff_dist(&detour.value) < 1e-10);
        let blocked = integrate_along(&eta, &[c(0.0, 0.0), c(1.0, 0.0)], 10, &opts);
        assert!(matches!(blocked, Err(DpwError::PoleOnPath { .. })));
    }
}
