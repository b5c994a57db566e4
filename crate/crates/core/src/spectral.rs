//! Physical solutions, the generalized Fourier transform `F` and its adjoint,
//! the exact linear propagator and the energy quadratic form.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::BoundaryPair;
use crate::error::{Error, Result};
use crate::grid::{l2_norm, UniformGrid};
use crate::jost::{bound_state_scan, scattering_matrix, solve_m, BoundStateScan, Branch, JostOptions, JostTable, ScatteringData};
use crate::linalg::{ComplexMatrix, C64, I, ZERO};
use crate::potential::PotentialSpec;

/// A vector-valued field on a uniform x-grid, `values` laid out `[node][dim]`.
#[derive(Clone, Debug)]
pub struct FieldState {
    pub t: f64,
    pub grid: UniformGrid,
    pub dim: usize,
    pub values: Vec<C64>,
}

impl FieldState {
    pub fn new(t: f64, grid: UniformGrid, dim: usize, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.count * dim {
            return Err(Error::DimensionMismatch(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.count * dim
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("field contains non-finite values".into()));
        }
        Ok(Self { t, grid, dim, values })
    }

    /// Sample `f(x)` (returning `dim` components) on `grid`.
    pub fn from_fn(t: f64, grid: UniformGrid, dim: usize, f: impl Fn(f64) -> Vec<C64>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.count * dim);
        for i in 0..grid.count {
            let v = f(grid.point(i));
            if v.len() != dim {
                return Err(Error::DimensionMismatch("initial data returned the wrong number of components".into()));
            }
            values.extend(v);
        }
        Self::new(t, grid, dim, values)
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.values, &self.grid.trapezoid_weights(), self.dim)
    }

    pub fn sup_norm(&self) -> f64 {
        crate::grid::sup_norm(&self.values, self.dim)
    }

    pub fn at(&self, i: usize) -> &[C64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// `ψ(0)` and a fifth-order one-sided difference for `ψ'(0)`.
    pub fn boundary_values(&self) -> (Vec<C64>, Vec<C64>) {
        let h = self.grid.step;
        let c = [-137.0 / 60.0, 5.0, -5.0, 10.0 / 3.0, -5.0 / 4.0, 1.0 / 5.0];
        let n = self.dim;
        let v0 = self.at(0).to_vec();
        let d0 = (0..n)
            .map(|j| c.iter().enumerate().map(|(i, &ci)| self.values[i * n + j] * ci).sum::<C64>() / h)
            .collect();
        (v0, d0)
    }

    /// `|-B†ψ(0) + A†ψ'(0)|` with the derivative from finite differences.
    pub fn boundary_residual(&self, bp: &BoundaryPair) -> f64 {
        let (v, d) = self.boundary_values();
        bp.residual(&v, &d)
    }

    pub fn l2_distance(&self, other: &FieldState) -> f64 {
        let diff: Vec<C64> = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        l2_norm(&diff, &self.grid.trapezoid_weights(), self.dim)
    }
}

/// `Ψ(k,x) = e^{-ikx} m(-k,x) + e^{ikx} m(k,x) S(k)` for the grid value
/// `k = ±k_i`, using the table's stored profiles.
pub fn physical_solution(jt: &JostTable, sd: &ScatteringData, i: usize, negative: bool, x: f64) -> Result<ComplexMatrix> {
    let k = sd.kgrid.point(i);
    let s = if negative { sd.s[i].adjoint() } else { sd.s[i].clone() };
    // for -k the roles of the branches swap
    let (b_in, b_out) = if negative { (Branch::Plus, Branch::Minus) } else { (Branch::Minus, Branch::Plus) };
    let kk = if negative { -k } else { k };
    let m_in = ComplexMatrix::from_row_major(&jt.m_at(i, b_in, x)?)?;
    let m_out = ComplexMatrix::from_row_major(&jt.m_at(i, b_out, x)?)?;
    let a = m_in.scale(C64::from_polar(1.0, -kk * x));
    let b = (&m_out * &s).scale(C64::from_polar(1.0, kk * x));
    Ok(&a + &b)
}

/// Controls for [`SpectralTransform::build`].
#[derive(Clone, Debug)]
pub struct TransformOptions {
    pub jost: JostOptions,
    /// Upper end of the bound-state scan; chosen from the data when `None`.
    pub scan_kappa_max: Option<f64>,
    pub scan_count: usize,
}

impl Default for TransformOptions {
    fn default() -> Self {
        Self { jost: JostOptions { k_derivative: false, ..JostOptions::default() }, scan_kappa_max: None, scan_count: 400 }
    }
}

/// A κ range that contains every bound state: `-κ²` is above `-sup|V|`
/// shifted by the boundary's own attraction.
pub fn default_scan_range(v: &PotentialSpec, bp: &BoundaryPair, h: f64) -> f64 {
    let vmax = v.norms(&v.default_grid()).into_iter().fold(0.0, f64::max);
    let a_sv = bp.a().singular_values();
    let smallest_nonzero = a_sv.iter().copied().filter(|&s| s > 1e-10 * bp.a().norm_fro().max(1e-300)).fold(f64::INFINITY, f64::min);
    let boundary = if smallest_nonzero.is_finite() { bp.b().norm2() / smallest_nonzero } else { 0.0 };
    (1.5 * vmax.sqrt() + 1.5 * boundary + 1.0).min(0.24 / h)
}

/// Quadrature realization of `F` and `F†` on fixed x and k grids.
#[derive(Clone, Debug)]
pub struct SpectralTransform {
    dim: usize,
    xgrid: UniformGrid,
    kgrid: UniformGrid,
    wx: Vec<f64>,
    wk: Vec<f64>,
    /// `Ψ(-k_i, x_j)` as `[i][j][dim²]`.
    psi: Vec<C64>,
    /// `Ψ(-k_i, 0)` and `∂xΨ(-k_i, 0)`, `[i][dim²]`.
    psi0: Vec<C64>,
    dpsi0: Vec<C64>,
    pub bound_states: Vec<f64>,
    pub has_bound_states: bool,
    /// `| |Fψ|/|ψ| - 1 |` for a smooth probe function.
    pub isometry_residual: f64,
    pub scattering: ScatteringData,
    pub boundary: BoundaryPair,
    /// The Jost table the transform was assembled from.
    pub table: JostTable,
}

/// Summary of a transform for reports.
#[derive(Clone, Debug, Serialize)]
pub struct TransformSummary {
    pub x_points: usize,
    pub k_points: usize,
    pub has_bound_states: bool,
    pub bound_states: Vec<f64>,
    pub isometry_residual: f64,
}

impl SpectralTransform {
    /// Solve for the Jost table on `kgrid` (which must start at 0), form the
    /// scattering data, scan for bound states and assemble the transform.
    pub fn build(
        v: &PotentialSpec,
        bp: &BoundaryPair,
        xgrid: &UniformGrid,
        kgrid: &UniformGrid,
        opts: &TransformOptions,
    ) -> Result<Self> {
        let stride = (xgrid.step / opts.jost.h).round();
        if stride < 1.0 || (stride * opts.jost.h - xgrid.step).abs() > 1e-9 * xgrid.step {
            return Err(Error::InvalidGrid(format!(
                "x step {} is not a multiple of the Jost step {}",
                xgrid.step, opts.jost.h
            )));
        }
        let stride = stride as usize;
        let jopts = JostOptions { profile_stride: Some(stride), ..opts.jost.clone() };
        // x_max of the potential must fall on the transform grid
        let cells = v.x_max() / xgrid.step;
        if (cells - cells.round()).abs() > 1e-9 {
            return Err(Error::InvalidGrid(format!(
                "potential cutoff {} is not a multiple of the x step {}",
                v.x_max(),
                xgrid.step
            )));
        }
        let jt = solve_m(v, kgrid, &jopts)?;
        let sd = scattering_matrix(&jt, bp)?;
        let kmax = opts.scan_kappa_max.unwrap_or_else(|| default_scan_range(v, bp, opts.jost.h));
        let scan = bound_state_scan(v, bp, kmax, opts.scan_count, &opts.jost)?;
        Self::from_table(&jt, sd, bp, xgrid, &scan)
    }

    /// Assemble from an existing table (built with profiles on a grid that
    /// refines `xgrid`) and scattering data on the same k-grid.
    pub fn from_table(
        jt: &JostTable,
        sd: ScatteringData,
        bp: &BoundaryPair,
        xgrid: &UniformGrid,
        scan: &BoundStateScan,
    ) -> Result<Self> {
        let n = jt.dim();
        let nn = n * n;
        let kgrid = *jt.kgrid();
        if kgrid.start != 0.0 {
            return Err(Error::InvalidGrid("the transform k-grid must start at 0".into()));
        }
        if xgrid.start != 0.0 {
            return Err(Error::InvalidGrid("the transform x-grid must start at 0".into()));
        }
        if kgrid.end() * xgrid.step > 1.0 {
            return Err(Error::Resolution(format!(
                "K_max·h_x = {:.3} exceeds 1; the x quadrature would alias",
                kgrid.end() * xgrid.step
            )));
        }
        let pg = *jt
            .profile_grid()
            .ok_or_else(|| Error::InvalidInput("Jost table was built without profiles".into()))?;
        let ratio = (xgrid.step / pg.step).round() as usize;
        if ratio == 0 || ((ratio as f64) * pg.step - xgrid.step).abs() > 1e-9 * xgrid.step {
            return Err(Error::InvalidGrid("profile grid does not refine the x-grid".into()));
        }
        let stored = (pg.count - 1) / ratio + 1;
        let nx = xgrid.count;
        let nk = kgrid.count;

        let mut psi = vec![ZERO; nk * nx * nn];
        let mut psi0 = vec![ZERO; nk * nn];
        let mut dpsi0 = vec![ZERO; nk * nn];
        psi.par_chunks_mut(nx * nn)
            .zip(psi0.par_chunks_mut(nn))
            .zip(dpsi0.par_chunks_mut(nn))
            .enumerate()
            .for_each(|(i, ((row, p0), d0))| {
                let k = kgrid.point(i);
                let sdag = sd.s[i].adjoint();
                let id = ComplexMatrix::identity(n);
                for j in 0..nx {
                    let x = xgrid.point(j);
                    let (mp, mm): (&[C64], &[C64]) = if j < stored {
                        (jt.m_node(i, Branch::Plus, j * ratio), jt.m_node(i, Branch::Minus, j * ratio))
                    } else {
                        (id.as_slice(), id.as_slice())
                    };
                    let ep = C64::from_polar(1.0, k * x);
                    let em = ep.conj();
                    let out = &mut row[j * nn..(j + 1) * nn];
                    for r in 0..n {
                        for c in 0..n {
                            let mut acc = ZERO;
                            for q in 0..n {
                                acc += mm[r * n + q] * sdag[(q, c)];
                            }
                            out[r * n + c] = ep * mp[r * n + c] + em * acc;
                        }
                    }
                }
                let sp = jt.solution(i, Branch::Plus);
                let sm = jt.solution(i, Branch::Minus);
                let ik = I * k;
                let a = &sp.m0 + &(&sm.m0 * &sdag);
                let b = &(&sp.m0.scale(ik) + &sp.dm_dx0) + &(&(&sm.m0.scale(-ik) + &sm.dm_dx0) * &sdag);
                p0.copy_from_slice(a.as_slice());
                d0.copy_from_slice(b.as_slice());
            });

        let mut st = Self {
            dim: n,
            xgrid: *xgrid,
            kgrid,
            wx: xgrid.trapezoid_weights(),
            wk: kgrid.trapezoid_weights(),
            psi,
            psi0,
            dpsi0,
            bound_states: scan.kappas.clone(),
            has_bound_states: !scan.kappas.is_empty(),
            isometry_residual: 0.0,
            scattering: sd,
            boundary: bp.clone(),
            table: jt.clone(),
        };
        let xc = (0.25 * xgrid.end()).min(5.0);
        let probe = FieldState::from_fn(0.0, *xgrid, n, |x| {
            vec![C64::new((-(x - xc) * (x - xc) / 2.0).exp() / (n as f64).sqrt(), 0.0); n]
        })?;
        let fk = st.forward(&probe.values);
        st.isometry_residual = (st.k_norm(&fk) / probe.l2_norm() - 1.0).abs();
        Ok(st)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn xgrid(&self) -> &UniformGrid {
        &self.xgrid
    }

    pub fn kgrid(&self) -> &UniformGrid {
        &self.kgrid
    }

    pub fn k_weights(&self) -> &[f64] {
        &self.wk
    }

    pub fn summary(&self) -> TransformSummary {
        TransformSummary {
            x_points: self.xgrid.count,
            k_points: self.kgrid.count,
            has_bound_states: self.has_bound_states,
            bound_states: self.bound_states.clone(),
            isometry_residual: self.isometry_residual,
        }
    }

    /// `(Fψ)(k_i) = (2π)^{-1/2} Σ_j w_j Ψ(-k_i, x_j)† ψ(x_j)`.
    pub fn forward(&self, values: &[C64]) -> Vec<C64> {
        let n = self.dim;
        let nn = n * n;
        let nx = self.xgrid.count;
        let norm = 1.0 / (2.0 * PI).sqrt();
        let mut out = vec![ZERO; self.kgrid.count * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i, o)| {
            let row = &self.psi[i * nx * nn..(i + 1) * nx * nn];
            if n == 1 {
                let mut acc = ZERO;
                for j in 0..nx {
                    acc += row[j].conj() * values[j] * self.wx[j];
                }
                o[0] = acc * norm;
                return;
            }
            for j in 0..nx {
                let p = &row[j * nn..(j + 1) * nn];
                let v = &values[j * n..(j + 1) * n];
                let w = self.wx[j];
                for c in 0..n {
                    let mut acc = ZERO;
                    for r in 0..n {
                        acc += p[r * n + c].conj() * v[r];
                    }
                    o[c] += acc * w;
                }
            }
            for z in o.iter_mut() {
                *z *= norm;
            }
        });
        out
    }

    /// `(F†z)(x_j) = (2π)^{-1/2} Σ_i w_i Ψ(-k_i, x_j) z(k_i)`.
    pub fn adjoint(&self, z: &[C64]) -> Vec<C64> {
        let n = self.dim;
        let nn = n * n;
        let nx = self.xgrid.count;
        let norm = 1.0 / (2.0 * PI).sqrt();
        let weighted: Vec<C64> = z.iter().enumerate().map(|(a, v)| v * self.wk[a / n] * norm).collect();
        const BLOCK: usize = 512;
        let mut out = vec![ZERO; nx * n];
        out.par_chunks_mut(BLOCK * n).enumerate().for_each(|(b, o)| {
            let j0 = b * BLOCK;
            let len = o.len() / n;
            for i in 0..self.kgrid.count {
                let row = &self.psi[(i * nx + j0) * nn..(i * nx + j0 + len) * nn];
                let zi = &weighted[i * n..(i + 1) * n];
                if n == 1 {
                    let zz = zi[0];
                    for (oj, p) in o.iter_mut().zip(row) {
                        *oj += p * zz;
                    }
                    continue;
                }
                for j in 0..len {
                    let p = &row[j * nn..(j + 1) * nn];
                    for r in 0..n {
                        let mut acc = ZERO;
                        for c in 0..n {
                            acc += p[r * n + c] * zi[c];
                        }
                        o[j * n + r] += acc;
                    }
                }
            }
        });
        out
    }

    /// `L²(k ≥ 0)` norm with the transform's k weights.
    pub fn k_norm(&self, z: &[C64]) -> f64 {
        l2_norm(z, &self.wk, self.dim)
    }

    /// `(F†z)(0)` and `∂x(F†z)(0)` from the stored boundary values of `Ψ`.
    pub fn boundary_values(&self, z: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let n = self.dim;
        let nn = n * n;
        let norm = 1.0 / (2.0 * PI).sqrt();
        let mut v = vec![ZERO; n];
        let mut d = vec![ZERO; n];
        for i in 0..self.kgrid.count {
            let w = self.wk[i] * norm;
            for r in 0..n {
                for c in 0..n {
                    v[r] += self.psi0[i * nn + r * n + c] * z[i * n + c] * w;
                    d[r] += self.dpsi0[i * nn + r * n + c] * z[i * n + c] * w;
                }
            }
        }
        (v, d)
    }

    /// Boundary residual of `F†z`.
    pub fn boundary_residual(&self, z: &[C64]) -> f64 {
        let (v, d) = self.boundary_values(z);
        self.boundary.residual(&v, &d)
    }

    /// `e^{-itk²}` applied to a k-space function.
    pub fn phase(&self, z: &[C64], t: f64) -> Vec<C64> {
        let n = self.dim;
        z.iter()
            .enumerate()
            .map(|(a, v)| {
                let k = self.kgrid.point(a / n);
                v * C64::from_polar(1.0, -t * k * k)
            })
            .collect()
    }

    /// `u(t) = F† e^{-itk²} F ψ`.
    pub fn propagate(&self, psi: &FieldState, t: f64) -> Result<FieldState> {
        if self.has_bound_states {
            return Err(Error::BoundStatesPresent(self.bound_states.clone()));
        }
        if psi.grid != self.xgrid || psi.dim != self.dim {
            return Err(Error::DimensionMismatch("field grid differs from the transform grid".into()));
        }
        let z = self.phase(&self.forward(&psi.values), t);
        FieldState::new(psi.t + t, self.xgrid, self.dim, self.adjoint(&z))
    }
}

/// Standalone form of [`SpectralTransform::propagate`].
pub fn propagate_linear(st: &SpectralTransform, psi: &FieldState, t: f64) -> Result<FieldState> {
    st.propagate(psi, t)
}

/// Value of the energy form and whether its boundary term was included.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergyForm {
    pub value: f64,
    /// False for non-diagonal boundary pairs, whose term is omitted.
    pub boundary_term_included: bool,
}

/// `h(ψ,ψ) = ∫|ψ'|² + ⟨Vψ,ψ⟩ + Σ_j c_j |ψ_j(0)|²` where `ψ_j'(0) = c_j ψ_j(0)`
/// for diagonal boundary pairs; derivatives by centered differences.
pub fn energy_form(bp: &BoundaryPair, v: &PotentialSpec, psi: &FieldState) -> Result<EnergyForm> {
    let n = psi.dim;
    if bp.dim() != n || v.dim() != n {
        return Err(Error::DimensionMismatch("field, boundary and potential dimensions differ".into()));
    }
    let g = psi.grid;
    let h = g.step;
    let w = g.trapezoid_weights();
    let count = g.count;
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for j in 0..count {
        let (a, b, s) = if j == 0 {
            (0, 1, h)
        } else if j == count - 1 {
            (count - 2, count - 1, h)
        } else {
            (j - 1, j + 1, 2.0 * h)
        };
        let mut d2 = 0.0;
        for c in 0..n {
            d2 += ((psi.values[b * n + c] - psi.values[a * n + c]) / s).norm_sqr();
        }
        kinetic += w[j] * d2;
        let vm = v.value(g.point(j));
        let u = psi.at(j);
        let vu = vm.mul_vec(u);
        potential += w[j] * vu.iter().zip(u).map(|(p, q)| (p * q.conj()).re).sum::<f64>();
    }
    let (value0, _) = psi.boundary_values();
    let (boundary, included) = match bp.diagonal_robin() {
        Some(coeffs) => (
            coeffs.iter().zip(&value0).map(|(c, u)| c.map(|c| c * u.norm_sqr()).unwrap_or(0.0)).sum::<f64>(),
            true,
        ),
        None => (0.0, false),
    };
    Ok(EnergyForm { value: kinetic + potential + boundary, boundary_term_included: included })
}

/// Build a transform for the zero potential with the same boundary pair.
pub fn free_transform(bp: &BoundaryPair, xgrid: &UniformGrid, kgrid: &UniformGrid, opts: &TransformOptions) -> Result<SpectralTransform> {
    let v = PotentialSpec::zero(bp.dim()).with_x_max(xgrid.step * ((crate::potential::DEFAULT_X_MAX / xgrid.step).round()));
    SpectralTransform::build(&v, bp, xgrid, kgrid, opts)
}
