use serde::{Deserialize, Serialize};

use crate::error::{DpwError, Result};
use crate::linalg::{self, c, CMatrix};

/// Which real form the star map `g ↦ s g^H s⁻¹` selects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealForm {
    /// `s = I`: unitary loops (sphere-type targets).
    Compact,
    /// `s = diag(1, -1)`: pseudo-unitary loops (hyperbolic-type targets).
    Indefinite,
}

impl std::str::FromStr for RealForm {
    type Err = DpwError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compact" => Ok(RealForm::Compact),
            "indefinite" => Ok(RealForm::Indefinite),
            other => Err(DpwError::Schema(format!("unknown real form `{other}`"))),
        }
    }
}

/// An involution of the complexified Lie algebra realized by a matrix.
///
/// Holomorphic: `x ↦ M x M⁻¹`. Anti-holomorphic: `x ↦ -M x^H M⁻¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct Involution {
    matrix: CMatrix,
    inverse: CMatrix,
    antiholomorphic: bool,
}

impl Involution {
    pub fn holomorphic(matrix: CMatrix) -> Result<Self> {
        Self::build(matrix, false)
    }

    pub fn antiholomorphic(matrix: CMatrix) -> Result<Self> {
        Self::build(matrix, true)
    }

    fn build(matrix: CMatrix, antiholomorphic: bool) -> Result<Self> {
        if !matrix.is_square() {
            return Err(DpwError::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let inverse = linalg::try_inverse(&matrix)
            .ok_or(DpwError::UnsupportedModel("involution matrix is singular".into()))?;
        Ok(Self {
            matrix,
            inverse,
            antiholomorphic,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn inverse_matrix(&self) -> &CMatrix {
        &self.inverse
    }

    pub fn is_antiholomorphic(&self) -> bool {
        self.antiholomorphic
    }

    /// Action on the Lie algebra.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        if self.antiholomorphic {
            -(&self.matrix * x.adjoint() * &self.inverse)
        } else {
            &self.matrix * x * &self.inverse
        }
    }

    /// `Ad(h) ∘ self ∘ Ad(h)⁻¹`.
    pub fn transported(&self, h: &CMatrix, h_inv: &CMatrix) -> Result<Self> {
        let m = if self.antiholomorphic {
            h * &self.matrix * h.adjoint()
        } else {
            h * &self.matrix * h_inv
        };
        Self::build(m, self.antiholomorphic)
    }
}

/// A concrete inner symmetric-space setup in `n × n` matrices.
///
/// `sigma` is the inner involution `X ↦ Q X Q⁻¹`, `tau` the real-form
/// involution and `theta` a Cartan involution. The default rank-one model has
/// `Q = diag(1, -1)`, so `K^C` is the diagonal torus and `p^C` the
/// off-diagonal matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupModel {
    n: usize,
    sigma: Involution,
    tau: Involution,
    theta: Involution,
    form: Option<RealForm>,
}

impl GroupModel {
    pub fn new(twist: CMatrix, star: CMatrix, cartan: CMatrix) -> Result<Self> {
        let n = twist.nrows();
        for m in [&star, &cartan] {
            if m.nrows() != n || m.ncols() != n {
                return Err(DpwError::DimensionMismatch {
                    expected: n,
                    found: m.nrows(),
                });
            }
        }
        Ok(Self {
            n,
            sigma: Involution::holomorphic(twist)?,
            tau: Involution::antiholomorphic(star)?,
            theta: Involution::antiholomorphic(cartan)?,
            form: None,
        })
    }

    /// The 2×2 model: `Q = diag(1,-1)`, star `I` or `diag(1,-1)`, `θ` the
    /// compact star.
    pub fn rank_one(form: RealForm) -> Self {
        let q = linalg::diag(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        let s = match form {
            RealForm::Compact => linalg::identity(2),
            RealForm::Indefinite => q.clone(),
        };
        let mut model = Self::new(q, s, linalg::identity(2)).expect("rank-one model is valid");
        model.form = Some(form);
        model
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Tags the model with a named real form; the Iwasawa split then applies
    /// the pointwise positivity test of the compact case.
    pub fn with_real_form(mut self, form: Option<RealForm>) -> Self {
        self.form = form;
        self
    }

    pub fn real_form(&self) -> Option<RealForm> {
        self.form
    }

    pub fn sigma(&self) -> &Involution {
        &self.sigma
    }

    pub fn tau(&self) -> &Involution {
        &self.tau
    }

    pub fn theta(&self) -> &Involution {
        &self.theta
    }

    pub fn twist_matrix(&self) -> &CMatrix {
        self.sigma.matrix()
    }

    pub fn star_matrix(&self) -> &CMatrix {
        self.tau.matrix()
    }

    /// σ on group or algebra elements (both are conjugation by `Q`).
    pub fn apply_sigma(&self, x: &CMatrix) -> CMatrix {
        self.sigma.apply(x)
    }

    pub fn k_part(&self, x: &CMatrix) -> CMatrix {
        (x + self.apply_sigma(x)) * c(0.5, 0.0)
    }

    pub fn p_part(&self, x: &CMatrix) -> CMatrix {
        (x - self.apply_sigma(x)) * c(0.5, 0.0)
    }

    /// Distance of a matrix from `K^C` (the σ-fixed part).
    pub fn k_violation(&self, x: &CMatrix) -> f64 {
        self.p_part(x).norm()
    }

    /// Group-level star `g ↦ s g^H s⁻¹`.
    pub fn star(&self, g: &CMatrix) -> CMatrix {
        self.tau.matrix() * g.adjoint() * self.tau.inverse_matrix()
    }

    /// `‖g* g − I‖`: zero exactly on the real form.
    pub fn realform_violation(&self, g: &CMatrix) -> f64 {
        linalg::dist(&(self.star(g) * g), &linalg::identity(self.n))
    }

    /// Sign class of each basis vector when `Q` is diagonal with entries ±q;
    /// `None` otherwise.
    pub fn twist_classes(&self) -> Option<Vec<i8>> {
        let q = self.twist_matrix();
        let scale = q[(0, 0)];
        if scale.norm() == 0.0 {
            return None;
        }
        let mut classes = Vec::with_capacity(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && q[(i, j)].norm() > 1e-14 {
                    return None;
                }
            }
            let r = q[(i, i)] / scale;
            if (r - c(1.0, 0.0)).norm() < 1e-12 {
                classes.push(1);
            } else if (r + c(1.0, 0.0)).norm() < 1e-12 {
                classes.push(-1);
            } else {
                return None;
            }
        }
        Some(classes)
    }

    /// Model for the base point moved by `h`: `σ₁ = Ad(h)σ₀Ad(h)⁻¹`,
    /// `θ₁ = Ad(h)θ₀Ad(h)⁻¹`, `τ` unchanged.
    pub fn conjugated(&self, h: &CMatrix) -> Result<Self> {
        let h_inv = linalg::try_inverse(h).ok_or(DpwError::InvalidMove {
            reason: "h is singular".into(),
            residual: 0.0,
        })?;
        Ok(Self {
            n: self.n,
            sigma: self.sigma.transported(h, &h_inv)?,
            tau: self.tau.clone(),
            theta: self.theta.transported(h, &h_inv)?,
            form: self.form,
        })
    }

    /// Same σ and θ with the real form replaced by the compact real form
    /// defined by θ; this is the `U` of the compact-dual construction.
    pub fn compact_dual(&self) -> Self {
        Self {
            n: self.n,
            sigma: self.sigma.clone(),
            tau: self.theta.clone(),
            theta: self.theta.clone(),
            form: Some(RealForm::Compact),
        }
    }

    /// Basis of `sl(n, C)`: off-diagonal units and `E_ii − E_{i+1,i+1}`.
    pub fn lie_basis(&self) -> Vec<CMatrix> {
        let n = self.n;
        let mut basis = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let mut e = linalg::zeros(n);
                    e[(i, j)] = c(1.0, 0.0);
                    basis.push(e);
                }
            }
        }
        for i in 0..n.saturating_sub(1) {
            let mut h = linalg::zeros(n);
            h[(i, i)] = c(1.0, 0.0);
            h[(i + 1, i + 1)] = c(-1.0, 0.0);
            basis.push(h);
        }
        basis
    }

    /// Maximum over the Lie basis (and its `i`-multiples, which matter for
    /// the anti-holomorphic maps) of `‖a(b(x)) − b(a(x))‖` over the three
    /// pairs among σ, τ, θ.
    pub fn commutation_residual(&self) -> f64 {
        let pairs = [
            (&self.sigma, &self.tau),
            (&self.sigma, &self.theta),
            (&self.tau, &self.theta),
        ];
        let mut worst: f64 = 0.0;
        for x in self.test_vectors() {
            for (a, b) in pairs {
                let ab = a.apply(&b.apply(&x));
                let ba = b.apply(&a.apply(&x));
                worst = worst.max(linalg::dist(&ab, &ba));
            }
        }
        worst
    }

    /// Maximum of `‖ι(ι(x)) − x‖` over the three involutions.
    pub fn involutivity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in self.test_vectors() {
            for inv in [&self.sigma, &self.tau, &self.theta] {
                worst = worst.max(linalg::dist(&inv.apply(&inv.apply(&x)), &x));
            }
        }
        worst
    }

    fn test_vectors(&self) -> Vec<CMatrix> {
        let basis = self.lie_basis();
        let mut out = basis.clone();
        out.extend(basis.into_iter().map(|b| b * c(0.0, 1.0)));
        out
    }
}
