//! Dense complex matrices of small dimension.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Square n×n complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: SmallVec<[C64; 16]>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix{}x{}[", self.dim, self.dim)?;
        for r in 0..self.dim {
            if r > 0 {
                write!(f, "; ")?;
            }
            for c in 0..self.dim {
                if c > 0 {
                    write!(f, ", ")?;
                }
                let z = self[(r, c)];
                write!(f, "{:.6}{:+.6}i", z.re, z.im)?;
            }
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self { dim, data: SmallVec::from_elem(ZERO, dim * dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, ONE)
    }

    pub fn scalar(dim: usize, c: C64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = c;
        }
        m
    }

    pub fn from_diag(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &z) in d.iter().enumerate() {
            m.data[i * d.len() + i] = z;
        }
        m
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let v: Vec<C64> = d.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diag(&v)
    }

    /// Build from row-major entries; `entries.len()` must be a perfect square.
    pub fn from_row_major(entries: &[C64]) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim != entries.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} entries do not form a square matrix",
                entries.len()
            )));
        }
        Ok(Self { dim, data: SmallVec::from_slice(entries) })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("rows do not form a square matrix".into()));
        }
        let flat: Vec<C64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(&flat)
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let c: Vec<Vec<C64>> =
            rows.iter().map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
        Self::from_rows(&c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!("{} vs {}", self.dim, other.dim)));
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        mat_mul_into(&self.data, &other.data, &mut out.data, n);
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim;
        assert_eq!(v.len(), n);
        (0..n).map(|r| (0..n).map(|c| self.data[r * n + c] * v[c]).sum()).collect()
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= c);
        out
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.data[c * n + r] = self.data[r * n + c].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// (a + a†)/2.
    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_real(0.5)
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Spectral norm (largest singular value).
    pub fn norm2(&self) -> f64 {
        if self.dim == 1 {
            return self.data[0].norm();
        }
        self.singular_values().into_iter().fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermiticity_residual() <= rel_tol * self.norm_fro().max(f64::MIN_POSITIVE)
    }

    pub fn hermiticity_residual(&self) -> f64 {
        (self - &self.adjoint()).norm_fro()
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim;
        (0..n).all(|r| (0..n).all(|c| r == c || self.data[r * n + c].norm() <= tol))
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.dim;
        let norm = self.norm_fro();
        let tol = 1e-13 * norm;
        let mut a = self.data.clone();
        let mut inv = Self::identity(n).data;
        for col in 0..n {
            let (piv, pmag) = (col..n)
                .map(|r| (r, a[r * n + col].norm()))
                .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmag <= tol || pmag == 0.0 {
                return Err(Error::Singular { pivot: pmag, norm });
            }
            if piv != col {
                for c in 0..n {
                    a.swap(piv * n + c, col * n + c);
                    inv.swap(piv * n + c, col * n + c);
                }
            }
            let d = ONE / a[col * n + col];
            for c in 0..n {
                a[col * n + c] *= d;
                inv[col * n + c] *= d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[r * n + col];
                if f == ZERO {
                    continue;
                }
                for c in 0..n {
                    let ac = a[col * n + c];
                    let ic = inv[col * n + c];
                    a[r * n + c] -= f * ac;
                    inv[r * n + c] -= f * ic;
                }
            }
        }
        Ok(Self { dim: n, data: inv })
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> C64 {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut det = ONE;
        for col in 0..n {
            let (piv, pmag) = (col..n)
                .map(|r| (r, a[r * n + col].norm()))
                .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmag == 0.0 {
                return ZERO;
            }
            if piv != col {
                for c in 0..n {
                    a.swap(piv * n + c, col * n + c);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for r in col + 1..n {
                let f = a[r * n + col] / p;
                for c in col..n {
                    let ac = a[col * n + c];
                    a[r * n + c] -= f * ac;
                }
            }
        }
        det
    }

    /// Singular values by one-sided Jacobi rotations, in no particular order.
    pub fn singular_values(&self) -> Vec<f64> {
        let n = self.dim;
        // columns stored contiguously
        let mut cols: Vec<Vec<C64>> =
            (0..n).map(|c| (0..n).map(|r| self.data[r * n + c]).collect()).collect();
        for _sweep in 0..60 {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let alpha: f64 = cols[p].iter().map(|z| z.norm_sqr()).sum();
                    let beta: f64 = cols[q].iter().map(|z| z.norm_sqr()).sum();
                    let gamma: C64 = cols[p].iter().zip(&cols[q]).map(|(a, b)| a.conj() * b).sum();
                    let g = gamma.norm();
                    if g <= 1e-16 * (alpha * beta).sqrt() || g == 0.0 {
                        continue;
                    }
                    rotated = true;
                    let phase = gamma / g;
                    let zeta = (beta - alpha) / (2.0 * g);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for r in 0..n {
                        let ap = cols[p][r];
                        let bq = cols[q][r] * phase.conj();
                        cols[p][r] = ap * c - bq * s;
                        cols[q][r] = ap * s + bq * c;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        cols.iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect()
    }

    pub fn smallest_singular_value(&self) -> f64 {
        if self.dim == 1 {
            return self.data[0].norm();
        }
        self.singular_values().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Numerical rank relative to `tol · σ_max`.
    pub fn rank(&self, tol: f64) -> usize {
        let sv = self.singular_values();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        sv.iter().filter(|&&s| s > tol * smax && s > 0.0).count()
    }

    /// Matrix exponential by scaling and squaring with a Taylor core.
    pub fn matrix_exp(&self) -> Self {
        let n = self.dim;
        let norm = self.norm_fro();
        let mut s = 0u32;
        if norm > 0.5 {
            s = (norm / 0.5).log2().ceil() as u32;
        }
        let a = self.scale_real(0.5f64.powi(s as i32));
        let mut term = Self::identity(n);
        let mut sum = Self::identity(n);
        for j in 1..=20 {
            term = (&term * &a).scale_real(1.0 / j as f64);
            sum = &sum + &term;
            if term.norm_fro() < 1e-18 * sum.norm_fro() {
                break;
            }
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    /// Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues in ascending order and the matrix whose columns are
    /// the corresponding orthonormal eigenvectors.
    pub fn eig_hermitian(&self) -> Result<(Vec<f64>, ComplexMatrix)> {
        let n = self.dim;
        let scale = self.norm_fro();
        let res = self.hermiticity_residual();
        if res > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NotHermitian(res));
        }
        let mut a = self.hermitian_part();
        let mut v = Self::identity(n);
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
                .map(|(r, c)| a[(r, c)].norm_sqr())
                .sum::<f64>()
                .sqrt();
            if off <= 1e-15 * scale || off == 0.0 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    let g = apq.norm();
                    if g <= 1e-300 {
                        continue;
                    }
                    let phase = apq / g;
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let theta = (aqq - app) / (2.0 * g);
                    let t = if theta == 0.0 {
                        1.0
                    } else {
                        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    // U = diag(1, conj(phase)) · [[c, s], [-s, c]] on the (p, q) plane
                    let upp = C64::new(c, 0.0);
                    let upq = C64::new(s, 0.0);
                    let uqp = -phase.conj() * s;
                    let uqq = phase.conj() * c;
                    for r in 0..n {
                        let arp = a[(r, p)];
                        let arq = a[(r, q)];
                        a[(r, p)] = arp * upp + arq * uqp;
                        a[(r, q)] = arp * upq + arq * uqq;
                        let vrp = v[(r, p)];
                        let vrq = v[(r, q)];
                        v[(r, p)] = vrp * upp + vrq * uqp;
                        v[(r, q)] = vrp * upq + vrq * uqq;
                    }
                    for col in 0..n {
                        let apc = a[(p, col)];
                        let aqc = a[(q, col)];
                        a[(p, col)] = upp.conj() * apc + uqp.conj() * aqc;
                        a[(q, col)] = upq.conj() * apc + uqq.conj() * aqc;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
        let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
        let mut vecs = Self::zeros(n);
        for (new_c, &old_c) in order.iter().enumerate() {
            for r in 0..n {
                vecs[(r, new_c)] = v[(r, old_c)];
            }
        }
        Ok((values, vecs))
    }

    /// Orthogonal projector onto the span of the given eigenvector columns.
    pub fn projector_from_columns(vecs: &ComplexMatrix, columns: &[usize]) -> ComplexMatrix {
        let n = vecs.dim;
        let mut p = Self::zeros(n);
        for &c in columns {
            for r in 0..n {
                for s in 0..n {
                    p[(r, s)] += vecs[(r, c)] * vecs[(s, c)].conj();
                }
            }
        }
        p
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.dim + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.dim + c]
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix dimensions must agree")
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimensions must agree");
        let mut out = self.clone();
        out.data.iter_mut().zip(rhs.data.iter()).for_each(|(a, b)| *a += b);
        out
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimensions must agree");
        let mut out = self.clone();
        out.data.iter_mut().zip(rhs.data.iter()).for_each(|(a, b)| *a -= b);
        out
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

/// `out = a · b` for row-major n×n slices.
#[inline]
pub fn mat_mul_into(a: &[C64], b: &[C64], out: &mut [C64], n: usize) {
    if n == 1 {
        out[0] = a[0] * b[0];
        return;
    }
    for r in 0..n {
        for c in 0..n {
            let mut acc = ZERO;
            for k in 0..n {
                acc += a[r * n + k] * b[k * n + c];
            }
            out[r * n + c] = acc;
        }
    }
}

/// `y += alpha · x` on flat slices.
#[inline]
pub fn axpy(y: &mut [C64], alpha: C64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Complex `exp(z) - 1` without cancellation for small |z|.
pub fn expm1(z: C64) -> C64 {
    let (sb, cb) = z.im.sin_cos();
    let ea = z.re.exp();
    let half = (0.5 * z.im).sin();
    C64::new(z.re.exp_m1() * cb - 2.0 * half * half, ea * sb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_times_identity() {
        let i3 = ComplexMatrix::identity(3);
        assert_eq!(&i3 * &i3, i3);
    }

    #[test]
    fn scalar_diagonal_product() {
        let a = ComplexMatrix::from_real_diag(&[2.0]);
        let b = ComplexMatrix::from_real_diag(&[3.0]);
        assert_eq!((&a * &b)[(0, 0)], c(6.0, 0.0));
    }

    #[test]
    fn swap_matrix_is_its_own_inverse() {
        let s = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(s.inverse().unwrap(), s);
        assert_eq!(ComplexMatrix::identity(4).inverse().unwrap(), ComplexMatrix::identity(4));
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let s = ComplexMatrix::from_real_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(s.inverse(), Err(Error::Singular { .. })));
    }

    #[test]
    fn adjoint_of_i_identity() {
        let a = ComplexMatrix::scalar(2, I);
        assert_eq!(a.adjoint(), ComplexMatrix::scalar(2, -I));
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = ComplexMatrix::zeros(3).matrix_exp();
        assert!((&e - &ComplexMatrix::identity(3)).norm_fro() < 1e-15);
    }

    #[test]
    fn exp_of_rotation_generator() {
        let a = ComplexMatrix::from_real_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap().scale_real(0.7);
        let e = a.matrix_exp();
        let (s, co) = 0.7f64.sin_cos();
        let want = ComplexMatrix::from_real_rows(&[vec![co, -s], vec![s, co]]).unwrap();
        assert!((&e - &want).norm_fro() < 1e-14);
    }

    #[test]
    fn eig_of_diag_is_standard_basis() {
        let a = ComplexMatrix::from_real_diag(&[1.0, -1.0]);
        let (vals, vecs) = a.eig_hermitian().unwrap();
        assert_eq!(vals, vec![-1.0, 1.0]);
        assert!((vecs[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((vecs[(0, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_of_complex_hermitian() {
        let a = ComplexMatrix::from_rows(&[
            vec![c(2.0, 0.0), c(1.0, -1.0)],
            vec![c(1.0, 1.0), c(3.0, 0.0)],
        ])
        .unwrap();
        let (vals, vecs) = a.eig_hermitian().unwrap();
        // trace 5, det 6 - 2 = 4 → eigenvalues 1 and 4
        assert!((vals[0] - 1.0).abs() < 1e-13 && (vals[1] - 4.0).abs() < 1e-13);
        let lam = ComplexMatrix::from_real_diag(&vals);
        let rebuilt = &(&vecs * &lam) * &vecs.adjoint();
        assert!((&rebuilt - &a).norm_fro() < 1e-13);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let a = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(a.eig_hermitian(), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn singular_values_of_rank_one() {
        let a = ComplexMatrix::from_real_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(a.smallest_singular_value() < 1e-14 * a.norm_fro());
        assert!((a.norm2() - 5.0).abs() < 1e-13);
    }

    #[test]
    fn determinant_of_triangular() {
        let a = ComplexMatrix::from_rows(&[
            vec![c(2.0, 0.0), c(5.0, 1.0)],
            vec![c(0.0, 0.0), c(0.0, 3.0)],
        ])
        .unwrap();
        assert!((a.det() - c(0.0, 6.0)).norm() < 1e-14);
    }

    #[test]
    fn expm1_small_and_large() {
        let z = c(1e-9, -2e-9);
        assert!((expm1(z) - z).norm() < 1e-17);
        let z = c(0.3, 1.2);
        assert!((expm1(z) - (z.exp() - ONE)).norm() < 1e-15);
    }
}
