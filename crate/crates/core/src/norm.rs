//! Vector norms and their duals.
//!
//! Every norm here has a closed-form dual: L1 and L∞ are dual to each other,
//! L2 is self-dual, and the ellipsoidal norm whose unit ball is
//! `{x : xᵀΣ⁻¹x ≤ 1}` has dual `z ↦ √(zᵀΣz)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};

/// Ellipsoidal norm `‖x‖ = √(xᵀΣ⁻¹x)`, stored with the Cholesky factor of Σ.
#[derive(Debug, Clone)]
pub struct Ellipsoidal {
    shape: DMatrix<f64>,
    lower: DMatrix<f64>,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
}

impl Ellipsoidal {
    /// Builds the norm from a symmetric positive-definite shape matrix Σ
    /// given row-major. Fails if Σ is asymmetric, singular or indefinite.
    pub fn new(n: usize, row_major: &[f64]) -> Result<Self> {
        check_dim(n * n, row_major.len())?;
        check_finite(row_major, "ellipsoid shape matrix")?;
        let shape = DMatrix::from_row_slice(n, n, row_major);
        let scale = shape.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (shape[(i, j)] - shape[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotPositiveDefinite(format!(
                        "entry ({i},{j}) differs from ({j},{i})"
                    )));
                }
            }
        }
        let eig = shape.clone().symmetric_eigen();
        let min_eigenvalue = eig.eigenvalues.min();
        let max_eigenvalue = eig.eigenvalues.max();
        if !(min_eigenvalue > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "smallest eigenvalue {min_eigenvalue:e}"
            )));
        }
        let chol = shape
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("cholesky factorization failed".into()))?;
        Ok(Self {
            lower: chol.l(),
            shape,
            min_eigenvalue,
            max_eigenvalue,
        })
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut m = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            m[i * n + i] = *d;
        }
        Self::new(n, &m)
    }

    pub fn dim(&self) -> usize {
        self.shape.nrows()
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.max_eigenvalue
    }

    // L⁻¹x, so that ‖L⁻¹x‖₂² = xᵀΣ⁻¹x.
    fn whiten(&self, x: &[f64]) -> DVector<f64> {
        let v = DVector::from_column_slice(x);
        self.lower
            .solve_lower_triangular(&v)
            .expect("cholesky factor has a positive diagonal")
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        self.whiten(x).norm()
    }

    pub(crate) fn dual(&self, z: &[f64]) -> f64 {
        let v = DVector::from_column_slice(z);
        (self.lower.transpose() * v).norm()
    }

    fn value_subgradient(&self, x: &[f64]) -> Vec<f64> {
        let y = self.whiten(x);
        let norm = y.norm();
        if norm == 0.0 {
            return vec![0.0; x.len()];
        }
        let g = self
            .lower
            .transpose()
            .solve_upper_triangular(&y)
            .expect("cholesky factor has a positive diagonal");
        g.iter().map(|v| v / norm).collect()
    }

    pub(crate) fn dual_subgradient(&self, z: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(z);
        let sz = &self.shape * &v;
        let norm = self.dual(z);
        if norm == 0.0 {
            return vec![0.0; z.len()];
        }
        sz.iter().map(|s| s / norm).collect()
    }
}

impl PartialEq for Ellipsoidal {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape
    }
}

/// Which norm a regularizer or disturbance budget uses.
#[derive(Debug, Clone, PartialEq)]
pub enum NormSpec {
    L1,
    L2,
    Linf,
    Ellipsoidal(Ellipsoidal),
}

/// Serializable tag for the plain norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    L2,
    Linf,
    Ellipsoidal,
}

pub(crate) fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub(crate) fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn linf(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn l1_subgradient(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| sign(*v)).collect()
}

fn l2_subgradient(x: &[f64]) -> Vec<f64> {
    let n = l2(x);
    if n == 0.0 {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| v / n).collect()
}

fn linf_subgradient(x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut best = 0.0;
    let mut arg = None;
    for (i, v) in x.iter().enumerate() {
        if v.abs() > best {
            best = v.abs();
            arg = Some(i);
        }
    }
    if let Some(i) = arg {
        g[i] = sign(x[i]);
    }
    g
}

impl NormSpec {
    pub fn kind(&self) -> NormKind {
        match self {
            NormSpec::L1 => NormKind::L1,
            NormSpec::L2 => NormKind::L2,
            NormSpec::Linf => NormKind::Linf,
            NormSpec::Ellipsoidal(_) => NormKind::Ellipsoidal,
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if let NormSpec::Ellipsoidal(e) = self {
            check_dim(e.dim(), x.len())?;
        }
        Ok(())
    }

    /// `‖x‖`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(match self {
            NormSpec::L1 => l1(x),
            NormSpec::L2 => l2(x),
            NormSpec::Linf => linf(x),
            NormSpec::Ellipsoidal(e) => e.value(x),
        })
    }

    /// `‖z‖* = sup{zᵀx : ‖x‖ ≤ 1}`, in closed form.
    pub fn dual(&self, z: &[f64]) -> Result<f64> {
        self.check(z)?;
        Ok(match self {
            NormSpec::L1 => linf(z),
            NormSpec::L2 => l2(z),
            NormSpec::Linf => l1(z),
            NormSpec::Ellipsoidal(e) => e.dual(z),
        })
    }

    /// A subgradient of `‖·‖` at `x`; the zero vector at `x = 0`.
    pub fn value_subgradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(match self {
            NormSpec::L1 => l1_subgradient(x),
            NormSpec::L2 => l2_subgradient(x),
            NormSpec::Linf => linf_subgradient(x),
            NormSpec::Ellipsoidal(e) => e.value_subgradient(x),
        })
    }

    /// A subgradient of `‖·‖*` at `z`; the zero vector at `z = 0`.
    pub fn dual_subgradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        Ok(match self {
            NormSpec::L1 => linf_subgradient(z),
            NormSpec::L2 => l2_subgradient(z),
            NormSpec::Linf => l1_subgradient(z),
            NormSpec::Ellipsoidal(e) => e.dual_subgradient(z),
        })
    }

    /// Constant κ with `‖x‖₂ ≤ κ·‖x‖` in dimension `n`.
    pub(crate) fn l2_bound_factor(&self, n: usize) -> f64 {
        match self {
            NormSpec::L1 | NormSpec::L2 => 1.0,
            NormSpec::Linf => (n as f64).sqrt(),
            NormSpec::Ellipsoidal(e) => e.max_eigenvalue().sqrt(),
        }
    }

    /// Constant κ with `‖z‖₂ ≤ κ·‖z‖*` in dimension `n`.
    pub(crate) fn dual_l2_bound_factor(&self, n: usize) -> f64 {
        match self {
            NormSpec::L1 => (n as f64).sqrt(),
            NormSpec::L2 | NormSpec::Linf => 1.0,
            NormSpec::Ellipsoidal(e) => 1.0 / e.min_eigenvalue().sqrt(),
        }
    }
}

/// Free-function form of [`NormSpec::dual`].
pub fn dual_norm(norm: &NormSpec, z: &[f64]) -> Result<f64> {
    norm.dual(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn dual_norm_examples() {
        assert_eq!(dual_norm(&NormSpec::L2, &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(dual_norm(&NormSpec::Linf, &[1.0, -2.0, 3.0]).unwrap(), 6.0);
        let e = NormSpec::Ellipsoidal(Ellipsoidal::diagonal(&[4.0, 1.0]).unwrap());
        assert_abs_diff_eq!(dual_norm(&e, &[1.0, 1.0]).unwrap(), 5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn ellipsoid_value_uses_inverse_shape() {
        let e = NormSpec::Ellipsoidal(Ellipsoidal::diagonal(&[4.0, 1.0]).unwrap());
        // xᵀΣ⁻¹x = 4/4 + 1
        assert_abs_diff_eq!(e.value(&[2.0, 1.0]).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_pd_shapes() {
        assert!(matches!(
            Ellipsoidal::new(2, &[1.0, 2.0, 2.0, 1.0]),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(Ellipsoidal::new(2, &[1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(Ellipsoidal::diagonal(&[1.0, 0.0]).is_err());
        assert!(Ellipsoidal::new(2, &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn ellipsoid_dimension_checked() {
        let e = NormSpec::Ellipsoidal(Ellipsoidal::diagonal(&[4.0, 1.0]).unwrap());
        assert!(matches!(
            e.value(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    fn norms() -> Vec<NormSpec> {
        vec![
            NormSpec::L1,
            NormSpec::L2,
            NormSpec::Linf,
            NormSpec::Ellipsoidal(
                Ellipsoidal::new(3, &[2.0, 0.3, 0.0, 0.3, 1.0, -0.2, 0.0, -0.2, 0.5]).unwrap(),
            ),
        ]
    }

    proptest! {
        #[test]
        fn norm_axioms(
            x in prop::collection::vec(-10.0..10.0f64, 3),
            y in prop::collection::vec(-10.0..10.0f64, 3),
            lambda in -5.0..5.0f64,
        ) {
            for norm in norms() {
                let nx = norm.value(&x).unwrap();
                prop_assert!(nx >= 0.0);
                let scaled: Vec<f64> = x.iter().map(|v| lambda * v).collect();
                let ns = norm.value(&scaled).unwrap();
                prop_assert!((ns - lambda.abs() * nx).abs() <= 1e-9 * (1.0 + nx));
                let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
                prop_assert!(norm.value(&sum).unwrap() <= nx + norm.value(&y).unwrap() + 1e-9);
                prop_assert_eq!(norm.value(&[0.0; 3]).unwrap(), 0.0);
            }
        }

        #[test]
        fn dual_of_dual_round_trips(x in prop::collection::vec(-10.0..10.0f64, 1..6)) {
            // the dual of L1 is L∞, whose dual is L1 again
            let l1_value = NormSpec::L1.value(&x).unwrap();
            prop_assert!((NormSpec::Linf.dual(&x).unwrap() - l1_value).abs() <= 1e-12);
            let linf_value = NormSpec::Linf.value(&x).unwrap();
            prop_assert!((NormSpec::L1.dual(&x).unwrap() - linf_value).abs() <= 1e-12);
        }

        #[test]
        fn dual_is_sup_over_unit_ball(
            z in prop::collection::vec(-10.0..10.0f64, 3),
            x in prop::collection::vec(-10.0..10.0f64, 3),
        ) {
            // Hölder: zᵀx ≤ ‖z‖*‖x‖
            for norm in norms() {
                let dot: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
                let bound = norm.dual(&z).unwrap() * norm.value(&x).unwrap();
                prop_assert!(dot <= bound + 1e-9 * (1.0 + bound.abs()));
            }
        }

        #[test]
        fn subgradients_attain_the_norm(x in prop::collection::vec(-10.0..10.0f64, 3)) {
            for norm in norms() {
                let g = norm.value_subgradient(&x).unwrap();
                let gx: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
                prop_assert!((gx - norm.value(&x).unwrap()).abs() <= 1e-9);
                let h = norm.dual_subgradient(&x).unwrap();
                let hx: f64 = h.iter().zip(&x).map(|(a, b)| a * b).sum();
                prop_assert!((hx - norm.dual(&x).unwrap()).abs() <= 1e-9);
            }
        }
    }
}
