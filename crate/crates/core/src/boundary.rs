//! Self-adjoint boundary conditions `-B†ψ(0) + A†ψ'(0) = 0` at the origin.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};

/// A validated boundary pair (A, B).
#[derive(Clone, Debug)]
pub struct BoundaryPair {
    a: ComplexMatrix,
    b: ComplexMatrix,
    angles: Option<Vec<f64>>,
}

impl BoundaryPair {
    /// Accept `(a, b)` if `B†A = A†B` and `A†A + B†B` is positive definite.
    pub fn validate(a: ComplexMatrix, b: ComplexMatrix) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch(format!(
                "A is {0}x{0} but B is {1}x{1}",
                a.dim(),
                b.dim()
            )));
        }
        let ad = a.adjoint();
        let bd = b.adjoint();
        let herm = (&(&bd * &a) - &(&ad * &b)).norm_fro();
        let scale = a.norm_fro().powi(2) + b.norm_fro().powi(2);
        if herm > 1e-12 * scale.max(1.0) {
            return Err(Error::BoundaryHermiticity(herm));
        }
        let gram = &(&ad * &a) + &(&bd * &b);
        let (vals, _) = gram.eig_hermitian()?;
        let smallest = vals[0];
        if smallest <= 1e-10 * scale.max(1.0) {
            return Err(Error::BoundaryPositivity(smallest));
        }
        Ok(Self { a, b, angles: None })
    }

    /// Diagonal form `A = -diag(sin θ)`, `B = diag(cos θ)`, i.e.
    /// `cos θ_j ψ_j(0) + sin θ_j ψ_j'(0) = 0`.
    pub fn from_angles(thetas: &[f64]) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::InvalidInput("need at least one angle".into()));
        }
        for &t in thetas {
            if !(t > 0.0 && t <= PI + 1e-15) {
                return Err(Error::AngleOutOfRange(t));
            }
        }
        let a = ComplexMatrix::from_real_diag(&thetas.iter().map(|t| -t.sin()).collect::<Vec<_>>());
        let b = ComplexMatrix::from_real_diag(&thetas.iter().map(|t| t.cos()).collect::<Vec<_>>());
        let mut p = Self::validate(a, b)?;
        p.angles = Some(thetas.to_vec());
        Ok(p)
    }

    pub fn dirichlet(n: usize) -> Self {
        Self::validate(ComplexMatrix::zeros(n), ComplexMatrix::identity(n)).expect("Dirichlet pair is valid")
    }

    pub fn neumann(n: usize) -> Self {
        Self::validate(ComplexMatrix::identity(n), ComplexMatrix::zeros(n)).expect("Neumann pair is valid")
    }

    pub fn a(&self) -> &ComplexMatrix {
        &self.a
    }

    pub fn b(&self) -> &ComplexMatrix {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Angles if the pair was built by [`BoundaryPair::from_angles`].
    pub fn angles(&self) -> Option<&[f64]> {
        self.angles.as_deref()
    }

    /// `‖-B†v + A†v'‖` for boundary values `v = ψ(0)`, `v' = ψ'(0)`.
    pub fn residual(&self, value: &[C64], derivative: &[C64]) -> f64 {
        let bv = self.b.adjoint().mul_vec(value);
        let ad = self.a.adjoint().mul_vec(derivative);
        bv.iter().zip(&ad).map(|(x, y)| (y - x).norm_sqr()).sum::<f64>().sqrt()
    }

    /// Number of Dirichlet channels, `n - rank(A)`.
    pub fn dirichlet_count(&self) -> usize {
        let scale = self.a.norm_fro().max(self.b.norm_fro());
        if self.a.norm_fro() <= 1e-14 * scale {
            return self.dim();
        }
        let sv = self.a.singular_values();
        self.dim() - sv.iter().filter(|&&s| s > 1e-10 * scale).count()
    }

    /// Per-channel Robin coefficients `ψ_j'(0) = c_j ψ_j(0)` when both A and B
    /// are diagonal; Dirichlet channels report `None`.
    pub fn diagonal_robin(&self) -> Option<Vec<Option<f64>>> {
        let scale = self.a.max_abs().max(self.b.max_abs());
        if !self.a.is_diagonal(1e-14 * scale) || !self.b.is_diagonal(1e-14 * scale) {
            return None;
        }
        Some(
            (0..self.dim())
                .map(|j| {
                    let a = self.a[(j, j)];
                    let b = self.b[(j, j)];
                    if a.norm() <= 1e-14 * scale {
                        None
                    } else {
                        Some((b.conj() / a.conj()).re)
                    }
                })
                .collect(),
        )
    }
}

/// True iff `[A;B]` of both pairs span the same column space, i.e. the
/// pairs differ by right multiplication with an invertible matrix.
pub fn equivalent(p: &BoundaryPair, q: &BoundaryPair) -> bool {
    let n = p.dim();
    if q.dim() != n {
        return false;
    }
    let mut cat = ComplexMatrix::zeros(2 * n);
    for r in 0..n {
        for c in 0..n {
            cat[(r, c)] = p.a[(r, c)];
            cat[(r + n, c)] = p.b[(r, c)];
            cat[(r, c + n)] = q.a[(r, c)];
            cat[(r + n, c + n)] = q.b[(r, c)];
        }
    }
    cat.rank(1e-10) == n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::I;

    #[test]
    fn dirichlet_and_unit_pair_are_valid() {
        assert!(BoundaryPair::validate(ComplexMatrix::zeros(2), ComplexMatrix::identity(2)).is_ok());
        assert!(BoundaryPair::validate(ComplexMatrix::identity(2), ComplexMatrix::identity(2)).is_ok());
    }

    #[test]
    fn imaginary_b_breaks_hermiticity() {
        let r = BoundaryPair::validate(ComplexMatrix::identity(1), ComplexMatrix::scalar(1, I));
        assert!(matches!(r, Err(Error::BoundaryHermiticity(_))));
    }

    #[test]
    fn zero_pair_breaks_positivity() {
        let r = BoundaryPair::validate(ComplexMatrix::zeros(1), ComplexMatrix::zeros(1));
        assert!(matches!(r, Err(Error::BoundaryPositivity(_))));
    }

    #[test]
    fn angle_constructors() {
        let d = BoundaryPair::from_angles(&[PI]).unwrap();
        assert!(d.a().norm_fro() < 1e-15);
        assert!((d.b()[(0, 0)].re + 1.0).abs() < 1e-15);
        let nm = BoundaryPair::from_angles(&[PI / 2.0]).unwrap();
        assert!((nm.a()[(0, 0)].re + 1.0).abs() < 1e-15 && nm.b().norm_fro() < 1e-15);
        let r = BoundaryPair::from_angles(&[PI / 4.0, PI / 4.0]).unwrap();
        let h = 0.5f64.sqrt();
        assert!((r.a()[(1, 1)].re + h).abs() < 1e-15 && (r.b()[(0, 0)].re - h).abs() < 1e-15);
        assert!(BoundaryPair::from_angles(&[0.0]).is_err());
        assert!(BoundaryPair::from_angles(&[4.0]).is_err());
    }

    #[test]
    fn equivalence_under_scaling_only() {
        let p = BoundaryPair::from_angles(&[1.0, 2.0]).unwrap();
        let q = BoundaryPair::validate(p.a().scale_real(2.0), p.b().scale_real(2.0)).unwrap();
        assert!(equivalent(&p, &q));
        assert!(!equivalent(&BoundaryPair::dirichlet(2), &BoundaryPair::neumann(2)));
    }

    #[test]
    fn dirichlet_channels_counted() {
        assert_eq!(BoundaryPair::dirichlet(3).dirichlet_count(), 3);
        assert_eq!(BoundaryPair::neumann(3).dirichlet_count(), 0);
        assert_eq!(BoundaryPair::from_angles(&[PI, 1.0]).unwrap().dirichlet_count(), 1);
    }

    #[test]
    fn robin_coefficients_from_angles() {
        let p = BoundaryPair::from_angles(&[PI / 4.0, PI]).unwrap();
        let r = p.diagonal_robin().unwrap();
        assert!((r[0].unwrap() + 1.0).abs() < 1e-14);
        assert!(r[1].is_none());
    }
}
