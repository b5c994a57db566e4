//! Jost solutions, Jost and scattering matrices, and the bound-state scan.
//!
//! The faded Jost solution `m(k,x) = e^{-ikx} f(k,x)` solves
//! `m(x) = I + ∫_x^∞ D(k, y-x) V(y) m(y) dy` with `D(k,z) = (e^{2ikz}-1)/(2ik)`.
//! The discretized equation (composite trapezoid rule on a uniform grid) is
//! lower-triangular and is solved from the far end inward. Because
//! `D(k,(n+1)h) = e^{2ikh} D(k,nh) + D(k,h)` the substitution collapses into
//! an O(N) recursion. Two solves at `h` and `h/2` are combined by Richardson
//! extrapolation to remove the O(h²) quadrature error.

use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::BoundaryPair;
use crate::error::{Error, Result};
use crate::grid::{interpolate_cubic, UniformGrid};
use crate::linalg::{expm1, ComplexMatrix, C64, I, ONE, ZERO};
use crate::potential::PotentialSpec;

/// Numerical controls for the Volterra solve.
#[derive(Clone, Debug)]
pub struct JostOptions {
    /// Spatial step of the coarse solve.
    pub h: f64,
    /// Combine solves at `h` and `h/2` to cancel the O(h²) error.
    pub richardson: bool,
    /// Also compute `∂_k m` at the origin.
    pub k_derivative: bool,
    /// Store `m(k, ·)` every `profile_stride` coarse nodes.
    pub profile_stride: Option<usize>,
}

impl Default for JostOptions {
    fn default() -> Self {
        Self { h: 0.005, richardson: true, k_derivative: true, profile_stride: None }
    }
}

/// `D(k,h)` and `∂_k D(k,h)` for complex `k`.
pub fn kernel_step(k: C64, h: f64) -> (C64, C64) {
    let a = 2.0 * I * k * h;
    if a.norm() < 0.5 {
        // D = h Σ a^n/(n+1)!,  ∂kD = 2ih² Σ_{n≥1} n a^{n-1}/(n+1)!
        let mut d = ZERO;
        let mut dd = ZERO;
        let mut pow = ONE; // a^n
        let mut fact = 1.0; // (n+1)!
        for n in 0..24 {
            fact *= (n + 1) as f64;
            d += pow / fact;
            if n + 1 < 24 {
                dd += pow * ((n + 1) as f64) / (fact * (n + 2) as f64);
            }
            pow *= a;
        }
        (d * h, dd * 2.0 * I * h * h)
    } else {
        let em1 = expm1(a);
        let d = em1 / (2.0 * I * k);
        let e = em1 + 1.0;
        let dd = (a * e - em1) / (2.0 * I * k * k);
        (d, dd)
    }
}

/// Boundary data of one Jost solve and optionally a stored profile.
#[derive(Clone, Debug)]
pub struct PointSolution {
    pub k: C64,
    pub m0: ComplexMatrix,
    pub dm_dx0: ComplexMatrix,
    pub dm_dk0: ComplexMatrix,
    /// `m` at every stored node, `[node][dim²]`.
    pub profile: Vec<C64>,
}

/// Potential samples on one uniform grid, with the support end located.
pub struct SampledPotential {
    pub dim: usize,
    pub grid: UniformGrid,
    pub values: Vec<C64>,
    /// Index of the last node where `V` is nonzero.
    pub support: Option<usize>,
}

impl SampledPotential {
    pub fn new(v: &PotentialSpec, grid: UniformGrid) -> Self {
        let nn = v.dim() * v.dim();
        let values = v.sample(&grid);
        let support = values.chunks(nn).rposition(|c| c.iter().any(|z| *z != ZERO));
        Self { dim: v.dim(), grid, values, support }
    }

    /// `10·exp(∫ y |V| dy)`, the divergence bound for `|m|`.
    fn divergence_bound(&self) -> f64 {
        let nn = self.dim * self.dim;
        let w = self.grid.trapezoid_weights();
        let moment: f64 = self
            .values
            .chunks(nn)
            .enumerate()
            .map(|(i, c)| {
                let norm = if self.dim == 1 {
                    c[0].norm()
                } else {
                    ComplexMatrix::from_row_major(c).map(|m| m.norm2()).unwrap_or(f64::INFINITY)
                };
                w[i] * self.grid.point(i) * norm
            })
            .sum();
        10.0 * moment.exp()
    }
}

fn identity_flat(n: usize) -> Vec<C64> {
    let mut v = vec![ZERO; n * n];
    for i in 0..n {
        v[i * n + i] = ONE;
    }
    v
}

/// Plain trapezoid solve at one `k`, returning boundary values and the
/// profile every `stride` nodes.
fn trapezoid_solve(
    sp: &SampledPotential,
    k: C64,
    want_dk: bool,
    stride: Option<usize>,
    bound: f64,
) -> Result<PointSolution> {
    match sp.dim {
        1 => recursion::<1, 1>(sp, k, want_dk, stride, bound),
        2 => recursion::<2, 4>(sp, k, want_dk, stride, bound),
        3 => recursion::<3, 9>(sp, k, want_dk, stride, bound),
        4 => recursion::<4, 16>(sp, k, want_dk, stride, bound),
        5 => recursion::<5, 25>(sp, k, want_dk, stride, bound),
        6 => recursion::<6, 36>(sp, k, want_dk, stride, bound),
        7 => recursion::<7, 49>(sp, k, want_dk, stride, bound),
        8 => recursion::<8, 64>(sp, k, want_dk, stride, bound),
        n => Err(Error::InvalidInput(format!("matrix dimension {n} exceeds the supported maximum of 8"))),
    }
}

#[inline(always)]
fn mul<const N: usize, const NN: usize>(a: &[C64], b: &[C64; NN]) -> [C64; NN] {
    let mut out = [ZERO; NN];
    for r in 0..N {
        for c in 0..N {
            let mut acc = ZERO;
            for q in 0..N {
                acc += a[r * N + q] * b[q * N + c];
            }
            out[r * N + c] = acc;
        }
    }
    out
}

fn recursion<const N: usize, const NN: usize>(
    sp: &SampledPotential,
    k: C64,
    want_dk: bool,
    stride: Option<usize>,
    bound: f64,
) -> Result<PointSolution> {
    let h = sp.grid.step;
    let last = sp.grid.count - 1;
    let mut id = [ZERO; NN];
    for i in 0..N {
        id[i * N + i] = ONE;
    }
    let stored = stride.map(|s| last / s + 1).unwrap_or(0);
    let mut profile: Vec<C64> = id.iter().copied().cycle().take(stored * NN).collect();
    let Some(support) = sp.support else {
        return Ok(PointSolution {
            k,
            m0: ComplexMatrix::identity(N),
            dm_dx0: ComplexMatrix::zeros(N),
            dm_dk0: ComplexMatrix::zeros(N),
            profile,
        });
    };

    let e = (2.0 * I * k * h).exp();
    let (d, dd) = kernel_step(k, h);
    let de = 2.0 * I * h * e;
    let vs = &sp.values;
    let node = |j: usize| &vs[j * NN..(j + 1) * NN];

    let mut m = id;
    let mut mdot = [ZERO; NN];
    let mut t = [ZERO; NN];
    let mut p = [ZERO; NN];
    let mut r = [ZERO; NN];
    let mut ex = [ZERO; NN];
    let mut gsum = [ZERO; NN];
    let mut qsum = [ZERO; NN];
    let check = (bound * bound) * N as f64;

    let mut dm_dx = [ZERO; NN];
    if support < last {
        let vm = mul::<N, NN>(node(support), &m);
        for i in 0..NN {
            dm_dx[i] = -0.5 * h * vm[i];
        }
    }
    for j in (0..support).rev() {
        let wl = if j + 1 == last { 0.5 * h } else { h };
        let g = mul::<N, NN>(node(j + 1), &m);
        for i in 0..NN {
            gsum[i] += wl * g[i];
        }
        if want_dk {
            let q = mul::<N, NN>(node(j + 1), &mdot);
            for i in 0..NN {
                qsum[i] += wl * q[i];
                p[i] = de * t[i] + e * p[i] + dd * gsum[i];
                r[i] = e * r[i] + d * qsum[i];
            }
        }
        let mut norm = 0.0;
        for i in 0..NN {
            t[i] = e * t[i] + d * gsum[i];
            ex[i] = e * (ex[i] + wl * g[i]);
            m[i] = id[i] + t[i];
            norm += m[i].norm_sqr();
        }
        if want_dk {
            for i in 0..NN {
                mdot[i] = p[i] + r[i];
            }
        }
        if !(norm <= check) {
            return Err(Error::JostDivergence { k: format!("{k}"), norm: norm.sqrt(), bound });
        }
        if let Some(s) = stride {
            if j % s == 0 {
                profile[(j / s) * NN..(j / s + 1) * NN].copy_from_slice(&m);
            }
        }
        if j == 0 {
            let vm = mul::<N, NN>(node(0), &m);
            for i in 0..NN {
                dm_dx[i] = -(ex[i] + 0.5 * h * vm[i]);
            }
        }
    }
    Ok(PointSolution {
        k,
        m0: ComplexMatrix::from_row_major(&m)?,
        dm_dx0: ComplexMatrix::from_row_major(&dm_dx)?,
        dm_dk0: ComplexMatrix::from_row_major(&mdot)?,
        profile,
    })
}

/// Coarse and fine samplings used by one solve configuration.
pub struct JostSampling {
    pub coarse: SampledPotential,
    pub fine: Option<SampledPotential>,
    bound: f64,
}

impl JostSampling {
    pub fn new(v: &PotentialSpec, opts: &JostOptions) -> Result<Self> {
        let grid = UniformGrid::span(0.0, v.x_max(), opts.h)?;
        if let Some(s) = opts.profile_stride {
            if s == 0 || (grid.count - 1) % s != 0 {
                return Err(Error::InvalidGrid(format!(
                    "profile stride {s} does not divide the {} solve intervals",
                    grid.count - 1
                )));
            }
        }
        let mut coarse = SampledPotential::new(v, grid);
        let fine = if opts.richardson {
            let fg = UniformGrid::new(0.0, 0.5 * opts.h, 2 * (grid.count - 1) + 1)?;
            let mut f = SampledPotential::new(v, fg);
            // both solves must start from the same support end
            if let Some(s) = f.support {
                let c = s.div_ceil(2);
                coarse.support = Some(c);
                f.support = Some(2 * c);
            } else {
                coarse.support = None;
            }
            Some(f)
        } else {
            None
        };
        let bound = coarse.divergence_bound();
        Ok(Self { coarse, fine, bound })
    }

    pub fn dim(&self) -> usize {
        self.coarse.dim
    }

    /// Solve at one complex `k`.
    pub fn solve(&self, k: C64, want_dk: bool, stride: Option<usize>) -> Result<PointSolution> {
        let c = trapezoid_solve(&self.coarse, k, want_dk, stride, self.bound)?;
        let Some(fine) = &self.fine else {
            return Ok(c);
        };
        let f = trapezoid_solve(fine, k, want_dk, stride.map(|s| 2 * s), self.bound)?;
        let comb = |a: &ComplexMatrix, b: &ComplexMatrix| (&b.scale_real(4.0) - a).scale_real(1.0 / 3.0);
        let profile = c.profile.iter().zip(&f.profile).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
        Ok(PointSolution {
            k,
            m0: comb(&c.m0, &f.m0),
            dm_dx0: comb(&c.dm_dx0, &f.dm_dx0),
            dm_dk0: comb(&c.dm_dk0, &f.dm_dk0),
            profile,
        })
    }
}

/// Which sign of `k` a stored solution belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// `m(k, ·)` for grid value `k ≥ 0`.
    Plus,
    /// `m(-k, ·)`.
    Minus,
}

/// Jost solutions at `±k` for every `k` of a nonnegative grid.
#[derive(Clone, Debug)]
pub struct JostTable {
    dim: usize,
    kgrid: UniformGrid,
    plus: Vec<PointSolution>,
    minus: Vec<PointSolution>,
    profile_grid: Option<UniformGrid>,
    x_max: f64,
}

/// Solve the Volterra equation at `±k` for every `k` of `kgrid` (`k ≥ 0`).
pub fn solve_m(v: &PotentialSpec, kgrid: &UniformGrid, opts: &JostOptions) -> Result<JostTable> {
    if kgrid.start < 0.0 {
        return Err(Error::InvalidGrid("the Jost k-grid must be nonnegative".into()));
    }
    let kmax = kgrid.end();
    if 2.0 * kmax * opts.h >= 0.5 {
        return Err(Error::Resolution(format!(
            "2·K_max·h = {:.4} must be below 0.5 (K_max = {kmax}, h = {})",
            2.0 * kmax * opts.h,
            opts.h
        )));
    }
    let sampling = JostSampling::new(v, opts)?;
    let ks = kgrid.points();
    let solve = |k: f64| sampling.solve(C64::new(k, 0.0), opts.k_derivative, opts.profile_stride);
    let plus: Vec<PointSolution> = ks.par_iter().map(|&k| solve(k)).collect::<Result<_>>()?;
    let minus: Vec<PointSolution> = ks.par_iter().map(|&k| solve(-k)).collect::<Result<_>>()?;
    let profile_grid = opts.profile_stride.map(|s| {
        let g = &sampling.coarse.grid;
        UniformGrid { start: 0.0, step: g.step * s as f64, count: (g.count - 1) / s + 1 }
    });
    Ok(JostTable { dim: v.dim(), kgrid: *kgrid, plus, minus, profile_grid, x_max: v.x_max() })
}

impl JostTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kgrid(&self) -> &UniformGrid {
        &self.kgrid
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn solution(&self, i: usize, branch: Branch) -> &PointSolution {
        match branch {
            Branch::Plus => &self.plus[i],
            Branch::Minus => &self.minus[i],
        }
    }

    pub fn profile_grid(&self) -> Option<&UniformGrid> {
        self.profile_grid.as_ref()
    }

    /// `m(±k_i, y)` flat row-major: cubic interpolation of the stored
    /// profile, even in `y`, identity beyond the stored range.
    pub fn m_at(&self, i: usize, branch: Branch, y: f64) -> Result<Vec<C64>> {
        let grid = self
            .profile_grid
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("Jost table was built without profiles".into()))?;
        let y = y.abs();
        let nn = self.dim * self.dim;
        if y >= grid.end() {
            return Ok(identity_flat(self.dim));
        }
        Ok(interpolate_cubic(grid, &self.solution(i, branch).profile, nn, y))
    }

    /// Stored profile node value `m(±k_i, x_j)`; identity past the table.
    pub fn m_node(&self, i: usize, branch: Branch, j: usize) -> &[C64] {
        let nn = self.dim * self.dim;
        &self.solution(i, branch).profile[j * nn..(j + 1) * nn]
    }
}

/// `J` from the boundary values of `m(-k, ·)`:
/// `J(k) = m(-k,0)†B - (-ik·m(-k,0) + ∂x m(-k,0))†A`.
pub fn jost_matrix_from(k: C64, m_neg: &ComplexMatrix, dm_neg: &ComplexMatrix, bp: &BoundaryPair) -> ComplexMatrix {
    let deriv = &m_neg.scale(-I * k) + dm_neg;
    &(&m_neg.adjoint() * bp.b()) - &(&deriv.adjoint() * bp.a())
}

/// `J(k)` for real `k` of either sign whose modulus lies on the table's
/// grid (or between nodes, by cubic interpolation in `k`).
pub fn jost_matrix(jt: &JostTable, bp: &BoundaryPair, k: f64) -> Result<ComplexMatrix> {
    if bp.dim() != jt.dim {
        return Err(Error::DimensionMismatch(format!("boundary is {}x{}, table is {}x{}", bp.dim(), bp.dim(), jt.dim, jt.dim)));
    }
    let g = &jt.kgrid;
    if let Some(i) = g.index_of(k.abs()) {
        // J(k) needs m(-k, ·): the Minus branch for k > 0, Plus for k < 0
        let s = jt.solution(i, if k >= 0.0 { Branch::Minus } else { Branch::Plus });
        return Ok(jost_matrix_from(C64::new(k, 0.0), &s.m0, &s.dm_dx0, bp));
    }
    BoundaryTables::new(jt).jost(k, bp)
}

/// Boundary values `m(±k,0)`, `∂x m(±k,0)` stacked over the k-grid for
/// interpolation in `k`.
struct BoundaryTables<'a> {
    grid: &'a UniformGrid,
    dim: usize,
    plus: (Vec<C64>, Vec<C64>),
    minus: (Vec<C64>, Vec<C64>),
}

impl<'a> BoundaryTables<'a> {
    fn new(jt: &'a JostTable) -> Self {
        let stack = |sols: &[PointSolution]| {
            let m = sols.iter().flat_map(|s| s.m0.as_slice().to_vec()).collect();
            let d = sols.iter().flat_map(|s| s.dm_dx0.as_slice().to_vec()).collect();
            (m, d)
        };
        Self { grid: &jt.kgrid, dim: jt.dim, plus: stack(&jt.plus), minus: stack(&jt.minus) }
    }

    fn jost(&self, k: f64, bp: &BoundaryPair) -> Result<ComplexMatrix> {
        let g = self.grid;
        let kk = k.abs();
        if kk < g.start - 1e-12 || kk > g.end() + 1e-12 {
            return Err(Error::OutOfRange { value: k, lo: g.start, hi: g.end() });
        }
        let nn = self.dim * self.dim;
        let (mv, dv) = if k >= 0.0 { &self.minus } else { &self.plus };
        let m = ComplexMatrix::from_row_major(&interpolate_cubic(g, mv, nn, kk))?;
        let d = ComplexMatrix::from_row_major(&interpolate_cubic(g, dv, nn, kk))?;
        Ok(jost_matrix_from(C64::new(k, 0.0), &m, &d, bp))
    }
}

/// Low-energy classification of the scattering matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Generic,
    Exceptional,
    PurelyExceptional,
}

/// Scattering matrix on a nonnegative k-grid plus its limits.
#[derive(Clone, Debug)]
pub struct ScatteringData {
    pub kgrid: UniformGrid,
    /// `S(k_i)`; at `k = 0` the extrapolated limit is stored.
    pub s: Vec<ComplexMatrix>,
    pub s0: ComplexMatrix,
    pub s_inf: ComplexMatrix,
    pub p_plus: ComplexMatrix,
    pub p_minus: ComplexMatrix,
    pub classification: Classification,
    /// `max_k |S S† - I|` over grid nodes and interval midpoints, the latter
    /// from k-interpolated boundary values.
    pub unitarity_residual: f64,
    /// Difference between quadratic and linear extrapolation of `S(0)`.
    pub extrapolation_residual: f64,
    pub s0_eigenvalues: Vec<f64>,
}

impl ScatteringData {
    /// `S(k)` for real `k` on the grid (either sign, `S(-k) = S(k)†`).
    pub fn at(&self, k: f64) -> Result<ComplexMatrix> {
        let i = self
            .kgrid
            .index_of(k.abs())
            .ok_or(Error::OutOfRange { value: k, lo: self.kgrid.start, hi: self.kgrid.end() })?;
        Ok(if k >= 0.0 { self.s[i].clone() } else { self.s[i].adjoint() })
    }

    pub fn dim(&self) -> usize {
        self.s0.dim()
    }
}

/// `S(k) = -J(-k) J(k)^{-1}` on the grid, with `S(0)` extrapolated from the
/// three smallest positive grid values.
pub fn scattering_matrix(jt: &JostTable, bp: &BoundaryPair) -> Result<ScatteringData> {
    if bp.dim() != jt.dim {
        return Err(Error::DimensionMismatch(format!("boundary is {}x{}, table is {}x{}", bp.dim(), bp.dim(), jt.dim, jt.dim)));
    }
    let g = jt.kgrid;
    let s: Vec<Option<ComplexMatrix>> = (0..g.count)
        .into_par_iter()
        .map(|i| {
            let k = g.point(i);
            if k == 0.0 {
                return Ok(None);
            }
            let kc = C64::new(k, 0.0);
            let jk = jost_matrix_from(kc, &jt.minus[i].m0, &jt.minus[i].dm_dx0, bp);
            let jmk = jost_matrix_from(-kc, &jt.plus[i].m0, &jt.plus[i].dm_dx0, bp);
            let inv = jk.inverse().map_err(|_| Error::SingularJost(k))?;
            Ok(Some(-&(&jmk * &inv)))
        })
        .collect::<Result<_>>()?;

    let positive: Vec<usize> = (0..g.count).filter(|&i| g.point(i) > 0.0).collect();
    if positive.len() < 3 {
        return Err(Error::InvalidGrid("need at least three positive k values".into()));
    }
    let idx = [positive[0], positive[1], positive[2]];
    let kx = idx.map(|i| g.point(i));
    let sv = idx.map(|i| s[i].clone().unwrap());
    // Lagrange weights at 0
    let lw = |a: usize, b: usize, c: usize| kx[b] * kx[c] / ((kx[a] - kx[b]) * (kx[a] - kx[c]));
    let w = [lw(0, 1, 2), lw(1, 0, 2), lw(2, 0, 1)];
    let s0 = &(&sv[0].scale_real(w[0]) + &sv[1].scale_real(w[1])) + &sv[2].scale_real(w[2]);
    let lin = &sv[0].scale_real(kx[1] / (kx[1] - kx[0])) - &sv[1].scale_real(kx[0] / (kx[1] - kx[0]));
    let extrapolation_residual = (&s0 - &lin).norm2();

    let s: Vec<ComplexMatrix> = s.into_iter().map(|m| m.unwrap_or_else(|| s0.clone())).collect();
    let n = jt.dim;
    let id = ComplexMatrix::identity(n);
    let node_residual = s
        .iter()
        .zip(g.points())
        .filter(|(_, k)| *k > 0.0)
        .map(|(m, _)| (&(m * &m.adjoint()) - &id).norm2())
        .fold(0.0, f64::max);
    // between nodes S(k) is represented through k-interpolated boundary values
    let tables = BoundaryTables::new(jt);
    let mid_residual = (0..g.count - 1)
        .into_par_iter()
        .map(|i| {
            let k = g.point(i) + 0.5 * g.step;
            let jk = tables.jost(k, bp)?;
            let jmk = tables.jost(-k, bp)?;
            let sm = -&(&jmk * &jk.inverse().map_err(|_| Error::SingularJost(k))?);
            Ok((&(&sm * &sm.adjoint()) - &id).norm2())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let unitarity_residual = node_residual.max(mid_residual);
    let s_inf = s[g.count - 1].clone();

    let (vals, vecs) = s0.hermitian_part().eig_hermitian()?;
    let mut plus_cols = Vec::new();
    let mut minus_cols = Vec::new();
    for (c, &l) in vals.iter().enumerate() {
        if (l - 1.0).abs() < 0.2 {
            plus_cols.push(c);
        } else if (l + 1.0).abs() < 0.2 {
            minus_cols.push(c);
        } else {
            return Err(Error::Classification(l));
        }
    }
    let classification = if plus_cols.is_empty() {
        Classification::Generic
    } else if minus_cols.is_empty() {
        Classification::PurelyExceptional
    } else {
        Classification::Exceptional
    };
    Ok(ScatteringData {
        kgrid: g,
        s,
        s0,
        s_inf,
        p_plus: ComplexMatrix::projector_from_columns(&vecs, &plus_cols),
        p_minus: ComplexMatrix::projector_from_columns(&vecs, &minus_cols),
        classification,
        unitarity_residual,
        extrapolation_residual,
        s0_eigenvalues: vals,
    })
}

/// `J(iκ)` from the Volterra solve at imaginary momentum:
/// `J(iκ) = m(iκ,0)†B - (-κ·m(iκ,0) + ∂x m(iκ,0))†A`.
pub fn jost_matrix_imaginary(sampling: &JostSampling, bp: &BoundaryPair, kappa: f64) -> Result<ComplexMatrix> {
    let sol = sampling.solve(C64::new(0.0, kappa), false, None)?;
    let deriv = &sol.m0.scale_real(-kappa) + &sol.dm_dx0;
    Ok(&(&sol.m0.adjoint() * bp.b()) - &(&deriv.adjoint() * bp.a()))
}

/// Result of [`bound_state_scan`].
#[derive(Clone, Debug, Serialize)]
pub struct BoundStateScan {
    /// Refined `κ` of each detected eigenvalue `-κ²`.
    pub kappas: Vec<f64>,
    pub kappa_grid: Vec<f64>,
    pub sigma_min: Vec<f64>,
    pub threshold: f64,
}

/// Scan `σ_min(J(iκ))` over `κ_i = κ_max·i/count`, `i = 1..=count`. Interior
/// local minima are refined by golden-section search and reported when the
/// refined value drops below `1e-4·median`.
pub fn bound_state_scan(
    v: &PotentialSpec,
    bp: &BoundaryPair,
    kappa_max: f64,
    count: usize,
    opts: &JostOptions,
) -> Result<BoundStateScan> {
    if !(kappa_max > 0.0) || count < 3 {
        return Err(Error::InvalidInput("bound-state scan needs kappa_max > 0 and at least 3 points".into()));
    }
    if 2.0 * kappa_max * opts.h >= 0.5 {
        return Err(Error::Resolution(format!("2·κ_max·h = {:.4} must be below 0.5", 2.0 * kappa_max * opts.h)));
    }
    if bp.dim() != v.dim() {
        return Err(Error::DimensionMismatch("boundary and potential dimensions differ".into()));
    }
    let sampling = JostSampling::new(v, &JostOptions { profile_stride: None, ..opts.clone() })?;
    let sigma = |kappa: f64| jost_matrix_imaginary(&sampling, bp, kappa).map(|j| j.smallest_singular_value());
    let kappa_grid: Vec<f64> = (1..=count).map(|i| kappa_max * i as f64 / count as f64).collect();
    let sigma_min: Vec<f64> = kappa_grid.par_iter().map(|&k| sigma(k)).collect::<Result<_>>()?;
    let mut sorted = sigma_min.clone();
    sorted.sort_by(f64::total_cmp);
    let threshold = 1e-4 * sorted[sorted.len() / 2];

    let mut kappas = Vec::new();
    for i in 1..count - 1 {
        if sigma_min[i] < sigma_min[i - 1] && sigma_min[i] <= sigma_min[i + 1] {
            let (mut a, mut b) = (kappa_grid[i - 1], kappa_grid[i + 1]);
            let r = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = b - r * (b - a);
            let mut d = a + r * (b - a);
            let mut fc = sigma(c)?;
            let mut fd = sigma(d)?;
            for _ in 0..60 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - r * (b - a);
                    fc = sigma(c)?;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + r * (b - a);
                    fd = sigma(d)?;
                }
                if b - a < 1e-12 * b {
                    break;
                }
            }
            let (kbest, fbest) = if fc < fd { (c, fc) } else { (d, fd) };
            if fbest < threshold {
                kappas.push(kbest);
            }
        }
    }
    Ok(BoundStateScan { kappas, kappa_grid, sigma_min, threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn kernel_branches_agree() {
        for &k in &[0.0, 1e-6, 0.1, 5.0, 49.0, 50.5, 80.0] {
            let h = 0.005;
            for kc in [C64::new(k, 0.0), C64::new(0.0, k), C64::new(-k, 0.0)] {
                let (d, dd) = kernel_step(kc, h);
                if kc.norm() > 1e-3 {
                    let exact = ((2.0 * I * kc * h).exp() - 1.0) / (2.0 * I * kc);
                    assert!((d - exact).norm() < 1e-15, "D at {kc}");
                    let eps = 1e-4;
                    let fd = (kernel_step(kc + eps, h).0 - kernel_step(kc - eps, h).0) / (2.0 * eps);
                    assert!((dd - fd).norm() < 1e-12, "dD at {kc}: {dd} vs {fd}");
                } else {
                    assert!((d - h).norm() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn free_table_is_identity() {
        let v = PotentialSpec::zero(2);
        let g = UniformGrid::span(0.0, 5.0, 0.5).unwrap();
        let jt = solve_m(&v, &g, &JostOptions::default()).unwrap();
        for i in 0..g.count {
            let s = jt.solution(i, Branch::Plus);
            assert_eq!(s.m0, ComplexMatrix::identity(2));
            assert_eq!(s.dm_dx0, ComplexMatrix::zeros(2));
        }
    }

    #[test]
    fn resolution_guard() {
        let v = PotentialSpec::zero(1);
        let g = UniformGrid::span(0.0, 30.0, 0.5).unwrap();
        let r = solve_m(&v, &g, &JostOptions { h: 0.01, ..Default::default() });
        assert!(matches!(r, Err(Error::Resolution(_))));
    }

    #[test]
    fn robin_free_scattering() {
        let theta = PI / 3.0;
        let bp = BoundaryPair::from_angles(&[theta]).unwrap();
        let g = UniformGrid::span(0.0, 2.0, 0.01).unwrap();
        let jt = solve_m(&PotentialSpec::zero(1), &g, &JostOptions::default()).unwrap();
        let sd = scattering_matrix(&jt, &bp).unwrap();
        for (i, k) in g.points().into_iter().enumerate().skip(1) {
            let (c, s) = (theta.cos(), theta.sin());
            let exact = -(C64::new(c, -k * s)) / C64::new(c, k * s);
            assert!((sd.s[i][(0, 0)] - exact).norm() < 1e-14);
        }
        assert_eq!(sd.classification, Classification::Generic);
    }
}
