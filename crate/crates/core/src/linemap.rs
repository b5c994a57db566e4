//! Line problems with a point interaction at the origin, mapped to
//! half-line problems of twice the size by folding `x ↦ -x`.

use serde::Serialize;

use crate::boundary::BoundaryPair;
use crate::error::{Error, Result};
use crate::evolve::NonlinearitySpec;
use crate::grid::{l2_norm, UniformGrid};
use crate::jost::{scattering_matrix, solve_m, Classification, JostOptions};
use crate::linalg::{ComplexMatrix, C64, ZERO};
use crate::potential::PotentialSpec;
use crate::spectral::FieldState;

/// `-v'' + Q v` on the line with the transmission condition
/// `-B₁†v(0+) - B₂†v(0-) + A₁†v'(0+) - A₂†v'(0-) = 0`, where `A₁, A₂` are the
/// top and bottom `n×2n` halves of the `2n×2n` matrix `A` (same for `B`).
#[derive(Clone, Debug)]
pub struct LineProblem {
    dim: usize,
    /// `Q(x)` for `x ≥ 0`.
    right: PotentialSpec,
    /// `Q(-x)` for `x ≥ 0`.
    left: PotentialSpec,
    boundary: BoundaryPair,
    nl_plus: NonlinearitySpec,
    nl_minus: NonlinearitySpec,
}

impl LineProblem {
    pub fn new(
        right: PotentialSpec,
        left: PotentialSpec,
        a: ComplexMatrix,
        b: ComplexMatrix,
        nl_plus: NonlinearitySpec,
        nl_minus: NonlinearitySpec,
    ) -> Result<Self> {
        let n = right.dim();
        if left.dim() != n {
            return Err(Error::DimensionMismatch("the two halves of Q differ in size".into()));
        }
        if a.dim() != 2 * n {
            return Err(Error::DimensionMismatch(format!("transmission matrices must be {0}x{0}", 2 * n)));
        }
        for nl in [&nl_plus, &nl_minus] {
            if nl.fixed_dim().is_some_and(|d| d != n) {
                return Err(Error::DimensionMismatch("nonlinearity size differs from the line system".into()));
            }
        }
        let boundary = BoundaryPair::validate(a, b)?;
        Ok(Self { dim: n, right, left, boundary, nl_plus, nl_minus })
    }

    /// Assemble from the four `n×2n` blocks, each row-major.
    pub fn from_blocks(
        right: PotentialSpec,
        left: PotentialSpec,
        blocks: [&[C64]; 4],
        nl_plus: NonlinearitySpec,
        nl_minus: NonlinearitySpec,
    ) -> Result<Self> {
        let n = right.dim();
        if blocks.iter().any(|b| b.len() != 2 * n * n) {
            return Err(Error::DimensionMismatch(format!("each block must hold {} entries", 2 * n * n)));
        }
        let stack = |top: &[C64], bottom: &[C64]| {
            let mut e = top.to_vec();
            e.extend_from_slice(bottom);
            ComplexMatrix::from_row_major(&e)
        };
        let a = stack(blocks[0], blocks[1])?;
        let b = stack(blocks[2], blocks[3])?;
        Self::new(right, left, a, b, nl_plus, nl_minus)
    }

    /// `Q` even, δ interaction of strength `Λ`, linear.
    pub fn delta(q: PotentialSpec, lambda: &ComplexMatrix) -> Result<Self> {
        let bp = delta_boundary(q.dim(), lambda)?;
        Self::new(q.clone(), q, bp.a().clone(), bp.b().clone(), NonlinearitySpec::zero(), NonlinearitySpec::zero())
    }

    pub fn with_nonlinearity(mut self, plus: NonlinearitySpec, minus: NonlinearitySpec) -> Self {
        self.nl_plus = plus;
        self.nl_minus = minus;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boundary(&self) -> &BoundaryPair {
        &self.boundary
    }

    /// `Q(x)` on the whole line.
    pub fn q(&self, x: f64) -> ComplexMatrix {
        if x >= 0.0 {
            self.right.value(x)
        } else {
            self.left.value(-x)
        }
    }

    /// `A_j` or `B_j` as an `n×2n` row-major block (`top` selects j = 1).
    fn block(m: &ComplexMatrix, n: usize, top: bool) -> Vec<C64> {
        let off = if top { 0 } else { n };
        (0..n).flat_map(|r| (0..2 * n).map(move |c| (r, c))).map(|(r, c)| m[(r + off, c)]).collect()
    }

    /// Residual of the transmission condition for boundary values at `0±`.
    pub fn transmission_residual(&self, v_plus: &[C64], v_minus: &[C64], d_plus: &[C64], d_minus: &[C64]) -> f64 {
        let n = self.dim;
        let (a, b) = (self.boundary.a(), self.boundary.b());
        let terms: [(Vec<C64>, &[C64], f64); 4] = [
            (Self::block(b, n, true), v_plus, -1.0),
            (Self::block(b, n, false), v_minus, -1.0),
            (Self::block(a, n, true), d_plus, 1.0),
            (Self::block(a, n, false), d_minus, -1.0),
        ];
        let mut out = vec![ZERO; 2 * n];
        for (blk, v, sign) in &terms {
            // blk† v: (2n×n)(n)
            for (c, o) in out.iter_mut().enumerate() {
                let mut acc = ZERO;
                for r in 0..n {
                    acc += blk[r * 2 * n + c].conj() * v[r];
                }
                *o += acc * *sign;
            }
        }
        out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `A = [[0, I], [0, I]]`, `B = [[-I, Λ], [I, 0]]`: continuity at the origin
/// and `v'(0+) - v'(0-) = Λ v(0)`.
pub fn delta_boundary(n: usize, lambda: &ComplexMatrix) -> Result<BoundaryPair> {
    if lambda.dim() != n {
        return Err(Error::DimensionMismatch(format!("coupling must be {n}x{n}")));
    }
    let res = lambda.hermiticity_residual();
    if res > 1e-12 * lambda.norm_fro().max(1.0) {
        return Err(Error::NotHermitian(res));
    }
    let mut a = ComplexMatrix::zeros(2 * n);
    let mut b = ComplexMatrix::zeros(2 * n);
    for i in 0..n {
        a[(i, n + i)] = C64::new(1.0, 0.0);
        a[(n + i, n + i)] = C64::new(1.0, 0.0);
        b[(i, i)] = C64::new(-1.0, 0.0);
        b[(n + i, i)] = C64::new(1.0, 0.0);
        for j in 0..n {
            b[(i, n + j)] = lambda[(i, j)];
        }
    }
    BoundaryPair::validate(a, b)
}

/// The half-line problem of size `2n`: `V = diag(Q(x), Q(-x))`, the stacked
/// transmission matrices and `N = diag(N₊, N₋)`, each block acting on its
/// own components.
pub fn to_halfline(lp: &LineProblem) -> Result<(PotentialSpec, BoundaryPair, NonlinearitySpec)> {
    let v = PotentialSpec::block_diagonal(vec![lp.right.clone(), lp.left.clone()])?;
    let nl = NonlinearitySpec::block_diagonal(vec![(lp.dim, lp.nl_plus.clone()), (lp.dim, lp.nl_minus.clone())])?;
    Ok((v, lp.boundary.clone(), nl))
}

/// A field on the line sampled at `±x_j` for a nonnegative grid, with separate
/// values at `0+` and `0-`.
#[derive(Clone, Debug)]
pub struct LineField {
    pub t: f64,
    pub grid: UniformGrid,
    pub dim: usize,
    /// `v(x_j)`, `[node][dim]`.
    pub plus: Vec<C64>,
    /// `v(-x_j)`.
    pub minus: Vec<C64>,
}

impl LineField {
    pub fn from_fn(t: f64, grid: UniformGrid, dim: usize, f: impl Fn(f64) -> Vec<C64>) -> Result<Self> {
        if grid.start != 0.0 {
            return Err(Error::InvalidGrid("line grids are built from a grid starting at 0".into()));
        }
        let plus = FieldState::from_fn(t, grid, dim, &f)?.values;
        let minus = FieldState::from_fn(t, grid, dim, |x| f(-x))?.values;
        Ok(Self { t, grid, dim, plus, minus })
    }

    /// `‖v‖_{L²(ℝ)}` with trapezoid weights on each side.
    pub fn l2_norm(&self) -> f64 {
        let w = self.grid.trapezoid_weights();
        (l2_norm(&self.plus, &w, self.dim).powi(2) + l2_norm(&self.minus, &w, self.dim).powi(2)).sqrt()
    }

    pub fn l2_distance(&self, other: &LineField) -> f64 {
        let diff = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
        let w = self.grid.trapezoid_weights();
        (l2_norm(&diff(&self.plus, &other.plus), &w, self.dim).powi(2)
            + l2_norm(&diff(&self.minus, &other.minus), &w, self.dim).powi(2))
        .sqrt()
    }

    /// Signed points `-x_N, ..., -0, +0, ..., x_N` with the matching values.
    pub fn signed_samples(&self) -> Vec<(f64, &[C64])> {
        let n = self.dim;
        let mut out: Vec<(f64, &[C64])> = (0..self.grid.count)
            .rev()
            .map(|j| (-self.grid.point(j), &self.minus[j * n..(j + 1) * n]))
            .collect();
        out.extend((0..self.grid.count).map(|j| (self.grid.point(j), &self.plus[j * n..(j + 1) * n])));
        out
    }

    /// Values and one-sided derivatives `(v(0+), v(0-), v'(0+), v'(0-))`.
    pub fn origin_values(&self) -> (Vec<C64>, Vec<C64>, Vec<C64>, Vec<C64>) {
        let f = fold(self);
        let n = self.dim;
        let (v, d) = f.boundary_values();
        let d_minus = d[n..].iter().map(|z| -z).collect();
        (v[..n].to_vec(), v[n..].to_vec(), d[..n].to_vec(), d_minus)
    }
}

/// `ψ = U†v`: `ψ₁(x) = v(x)`, `ψ₂(x) = v(-x)` for `x ≥ 0`.
pub fn fold(v: &LineField) -> FieldState {
    let n = v.dim;
    let mut values = Vec::with_capacity(2 * v.plus.len());
    for j in 0..v.grid.count {
        values.extend_from_slice(&v.plus[j * n..(j + 1) * n]);
        values.extend_from_slice(&v.minus[j * n..(j + 1) * n]);
    }
    FieldState { t: v.t, grid: v.grid, dim: 2 * n, values }
}

/// `v = Uψ`, the inverse of [`fold`].
pub fn unfold(psi: &FieldState) -> Result<LineField> {
    if psi.dim % 2 != 0 {
        return Err(Error::DimensionMismatch("folded fields have an even number of components".into()));
    }
    let n = psi.dim / 2;
    let mut plus = Vec::with_capacity(psi.values.len() / 2);
    let mut minus = Vec::with_capacity(psi.values.len() / 2);
    for j in 0..psi.grid.count {
        let s = psi.at(j);
        plus.extend_from_slice(&s[..n]);
        minus.extend_from_slice(&s[n..]);
    }
    Ok(LineField { t: psi.t, grid: psi.grid, dim: n, plus, minus })
}

/// Transmission residual of a line field, one-sided differences at `0±`.
pub fn jump_residual(lp: &LineProblem, v: &LineField) -> f64 {
    let (vp, vm, dp, dm) = v.origin_values();
    lp.transmission_residual(&vp, &vm, &dp, &dm)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parity {
    Even,
    Odd,
}

/// Restrict to even (`ψ₂ = ψ₁`) or odd (`ψ₂ = -ψ₁`) data: the `n×n` pair whose
/// condition `-b†φ(0) + a†φ'(0) = 0` is what remains of the `2n×2n` one, and
/// `Q` on `x ≥ 0`. Needs `Q` even and a parity-invariant condition.
pub fn parity_reduction(lp: &LineProblem, parity: Parity) -> Result<(PotentialSpec, BoundaryPair, NonlinearitySpec)> {
    let n = lp.dim;
    let grid = lp.right.default_grid();
    for x in grid.points() {
        let d = (&lp.right.value(x) - &lp.left.value(x)).max_abs();
        if d > 1e-12 * (1.0 + lp.right.value(x).max_abs()) {
            return Err(Error::InvalidInput(format!("Q is not even (differs by {d:.3e} at x = {x})")));
        }
    }
    let sign = if parity == Parity::Even { 1.0 } else { -1.0 };
    // ψ = Eφ with E = [I; ±I]; the condition reads M (φ; φ') = 0 with
    // M = [-B†E | A†E], a 2n×2n matrix of rank n for an admissible reduction.
    let (a, b) = (lp.boundary.a(), lp.boundary.b());
    let mut m = ComplexMatrix::zeros(2 * n);
    for r in 0..2 * n {
        for c in 0..n {
            let bt = b[(c, r)].conj() + sign * b[(c + n, r)].conj();
            let at = a[(c, r)].conj() + sign * a[(c + n, r)].conj();
            m[(r, c)] = -bt;
            m[(r, c + n)] = at;
        }
    }
    let (vals, vecs) = (&m.adjoint() * &m).eig_hermitian()?;
    let top = vals.last().copied().unwrap_or(0.0).max(1e-300);
    let rank = vals.iter().filter(|&&v| v > 1e-12 * top).count();
    if rank != n {
        return Err(Error::InvalidInput(format!(
            "transmission condition does not reduce on {parity:?} data (rank {rank}, expected {n})"
        )));
    }
    // the reduced condition's rows span the complement of the null space:
    // R = [-b† | a†] with rows the conjugated eigenvectors of the n largest
    // eigenvalues
    let mut ra = ComplexMatrix::zeros(n);
    let mut rb = ComplexMatrix::zeros(n);
    for (i, col) in (n..2 * n).enumerate() {
        for c in 0..n {
            rb[(c, i)] = -vecs[(c, col)];
            ra[(c, i)] = vecs[(c + n, col)];
        }
    }
    let bp = BoundaryPair::validate(ra, rb)?;
    Ok((lp.right.clone(), bp, lp.nl_plus.clone()))
}

/// Extend a half-line field evenly or oddly to the line.
pub fn extend_parity(psi: &FieldState, parity: Parity) -> LineField {
    let sign = if parity == Parity::Even { 1.0 } else { -1.0 };
    LineField {
        t: psi.t,
        grid: psi.grid,
        dim: psi.dim,
        plus: psi.values.clone(),
        minus: psi.values.iter().map(|z| z * sign).collect(),
    }
}

/// One row of the line scattering comparison.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LineScatteringRow {
    pub k: f64,
    /// `(re, im)` of the computed coefficients.
    pub transmission: [f64; 2],
    pub reflection: [f64; 2],
    pub transmission_error: f64,
    pub reflection_error: f64,
    pub unitarity_defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LineScatteringReport {
    pub lambda: f64,
    pub rows: Vec<LineScatteringRow>,
    pub max_transmission_error: f64,
    pub max_reflection_error: f64,
    pub max_unitarity_defect: f64,
}

/// Scalar free line with a δ of strength `Λ`: the folded 2×2 scattering
/// matrix gives, for a wave incident from the left, `t = S₁₂` and `r = S₂₂`.
/// These are compared with `t = 2ik/(2ik - Λ)`, `r = Λ/(2ik - Λ)` at every
/// positive k of `kgrid`.
pub fn verify_line_scattering(lambda: f64, kgrid: &UniformGrid) -> Result<LineScatteringReport> {
    let lp = LineProblem::delta(PotentialSpec::zero(1), &ComplexMatrix::scalar(1, C64::new(lambda, 0.0)))?;
    let (v, bp, _) = to_halfline(&lp)?;
    let jt = solve_m(&v, kgrid, &JostOptions { k_derivative: false, ..JostOptions::default() })?;
    let sd = scattering_matrix(&jt, &bp)?;
    let mut rows = Vec::new();
    for i in 0..kgrid.count {
        let k = kgrid.point(i);
        if k <= 0.0 {
            continue;
        }
        let s = &sd.s[i];
        let t = s[(0, 1)];
        let r = s[(1, 1)];
        let den = C64::new(-lambda, 2.0 * k);
        let t_ref = C64::new(0.0, 2.0 * k) / den;
        let r_ref = C64::new(lambda, 0.0) / den;
        rows.push(LineScatteringRow {
            k,
            transmission: [t.re, t.im],
            reflection: [r.re, r.im],
            transmission_error: (t - t_ref).norm(),
            reflection_error: (r - r_ref).norm(),
            unitarity_defect: (t.norm_sqr() + r.norm_sqr() - 1.0).abs(),
        });
    }
    let max = |f: fn(&LineScatteringRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    Ok(LineScatteringReport {
        lambda,
        max_transmission_error: max(|r| r.transmission_error),
        max_reflection_error: max(|r| r.reflection_error),
        max_unitarity_defect: max(|r| r.unitarity_defect),
        rows,
    })
}

/// Zero-energy behaviour of `-v'' + Qv = 0` on the line (no point
/// interaction): the number of independent bounded solutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineClass {
    Generic,
    Exceptional,
    PurelyExceptional,
}

/// Shoot the `n` solutions that are constant to the right of `x_end` back to
/// `-x_end`; bounded solutions are those whose slope also vanishes there.
pub fn line_zero_energy_class(lp: &LineProblem, x_end: f64, h: f64) -> Result<(LineClass, usize)> {
    let n = lp.dim;
    if !(x_end > 0.0 && h > 0.0) {
        return Err(Error::InvalidInput("shooting range and step must be positive".into()));
    }
    // an even number of steps puts a node at 0, so no step straddles it
    let half = (x_end / h).ceil() as usize;
    let h = x_end / half as f64;
    let mut y = ComplexMatrix::identity(n);
    let mut dy = ComplexMatrix::zeros(n);
    for i in 0..2 * half {
        let x = x_end - i as f64 * h;
        let right = i < half;
        let q = |s: f64| if right { lp.right.value(s.max(0.0)) } else { lp.left.value((-s).max(0.0)) };
        // y'' = Q y, stepping toward -x_end
        let (q0, qm, q1) = (q(x), q(x - 0.5 * h), q(x - h));
        let k1y = dy.clone();
        let k1d = &q0 * &y;
        let k2y = &dy - &k1d.scale_real(0.5 * h);
        let k2d = &qm * &(&y - &k1y.scale_real(0.5 * h));
        let k3y = &dy - &k2d.scale_real(0.5 * h);
        let k3d = &qm * &(&y - &k2y.scale_real(0.5 * h));
        let k4y = &dy - &k3d.scale_real(h);
        let k4d = &q1 * &(&y - &k3y.scale_real(h));
        let comb = |a: &ComplexMatrix, b: &ComplexMatrix, c: &ComplexMatrix, d: &ComplexMatrix| {
            &(&(a + &b.scale_real(2.0)) + &c.scale_real(2.0)) + d
        };
        y = &y - &comb(&k1y, &k2y, &k3y, &k4y).scale_real(h / 6.0);
        dy = &dy - &comb(&k1d, &k2d, &k3d, &k4d).scale_real(h / 6.0);
    }
    let scale = y.norm2().max(1.0);
    let sv = dy.singular_values();
    let bounded = sv.iter().filter(|&&s| s <= 1e-8 * scale).count();
    let class = match bounded {
        0 => LineClass::Generic,
        b if b == n => LineClass::PurelyExceptional,
        _ => LineClass::Exceptional,
    };
    Ok((class, bounded))
}

/// The half-line classification of the folded problem next to the line's
/// zero-energy class; they should agree as generic/exceptional.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClassificationComparison {
    pub halfline: Classification,
    pub line: LineClass,
    pub bounded_solutions: usize,
    pub consistent: bool,
}

pub fn compare_classification(lp: &LineProblem, kgrid: &UniformGrid) -> Result<ClassificationComparison> {
    let (v, bp, _) = to_halfline(lp)?;
    let jt = solve_m(&v, kgrid, &JostOptions { k_derivative: false, ..JostOptions::default() })?;
    let sd = scattering_matrix(&jt, &bp)?;
    let x_end = lp.right.x_max().max(lp.left.x_max());
    let (line, bounded) = line_zero_energy_class(lp, x_end, 1e-3)?;
    let consistent = matches!(
        (sd.classification, line),
        (Classification::Generic, LineClass::Generic)
            | (Classification::Exceptional, LineClass::Exceptional)
            | (Classification::Exceptional, LineClass::PurelyExceptional)
    );
    Ok(ClassificationComparison { halfline: sd.classification, line, bounded_solutions: bounded, consistent })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_roundtrip_and_norm() {
        let g = UniformGrid::new(0.0, 0.05, 200).unwrap();
        let v = LineField::from_fn(0.0, g, 1, |x| vec![C64::new((-(x - 1.0) * (x - 1.0)).exp(), x)]).unwrap();
        let f = fold(&v);
        assert!((f.l2_norm() - v.l2_norm()).abs() < 1e-12);
        let back = unfold(&f).unwrap();
        assert_eq!(back.plus, v.plus);
        assert_eq!(back.minus, v.minus);
    }

    #[test]
    fn odd_function_folds_to_opposite_components() {
        let g = UniformGrid::new(0.0, 0.1, 50).unwrap();
        let v = LineField::from_fn(0.0, g, 1, |x| vec![C64::new(x.sin(), 0.0)]).unwrap();
        let f = fold(&v);
        for j in 0..g.count {
            assert!((f.at(j)[0] + f.at(j)[1]).norm() < 1e-15);
        }
    }

    #[test]
    fn non_hermitian_coupling_is_rejected() {
        let l = ComplexMatrix::from_rows(&[vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)], vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]])
            .unwrap();
        assert!(matches!(delta_boundary(2, &l), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn delta_reduces_to_robin_and_dirichlet() {
        let lp = LineProblem::delta(PotentialSpec::zero(1), &ComplexMatrix::scalar(1, C64::new(3.0, 0.0))).unwrap();
        let (_, even, _) = parity_reduction(&lp, Parity::Even).unwrap();
        let robin = BoundaryPair::validate(ComplexMatrix::identity(1), ComplexMatrix::scalar(1, C64::new(1.5, 0.0))).unwrap();
        assert!(crate::boundary::equivalent(&even, &robin));
        let (_, odd, _) = parity_reduction(&lp, Parity::Odd).unwrap();
        assert!(crate::boundary::equivalent(&odd, &BoundaryPair::dirichlet(1)));
    }

    #[test]
    fn free_line_is_exceptional_and_barrier_generic() {
        let free = LineProblem::delta(PotentialSpec::zero(1).with_x_max(5.0), &ComplexMatrix::zeros(1)).unwrap();
        assert_eq!(line_zero_energy_class(&free, 5.0, 1e-2).unwrap().0, LineClass::PurelyExceptional);
        let well = PotentialSpec::builtin(
            "barrier",
            &crate::potential::BuiltinParams { dim: 1, strength: 1.0, length: 1.0, x_max: 5.0, ..Default::default() },
        )
        .unwrap();
        let lp = LineProblem::delta(well, &ComplexMatrix::zeros(1)).unwrap();
        assert_eq!(line_zero_energy_class(&lp, 5.0, 1e-2).unwrap().0, LineClass::Generic);
    }
}
