//! Nonlinearities, the operators of the long-time factorization
//! `U(t)F†φ = M D_t W(t) E φ`, and the nonlinear time stepper.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{interpolate_cubic, l2_norm, UniformGrid};
use crate::jost::{Branch, JostTable, ScatteringData};
use crate::linalg::{ComplexMatrix, C64, I, ZERO};
pub use crate::spectral::FieldState;
use crate::spectral::SpectralTransform;

/// `(it)^{-1/2}` on the principal branch, `t > 0`.
fn inv_sqrt_it(t: f64) -> C64 {
    C64::from_polar(t.powf(-0.5), -PI / 4.0)
}

fn require_positive_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time must be positive, got {t}")));
    }
    Ok(())
}

/// Multiply by the chirp `e^{ix²/4t}`.
pub fn op_m(t: f64, grid: &UniformGrid, dim: usize, values: &[C64]) -> Result<Vec<C64>> {
    require_positive_time(t)?;
    Ok(values
        .chunks(dim)
        .enumerate()
        .flat_map(|(j, v)| {
            let x = grid.point(j);
            let p = C64::from_polar(1.0, x * x / (4.0 * t));
            v.iter().map(move |z| z * p)
        })
        .collect())
}

/// Dilation `(D_t φ)(x) = (it)^{-1/2} φ(x/t)`, evaluated on `target` by cubic
/// interpolation of `values` given on `source`; zero outside `source`.
pub fn op_dt(t: f64, source: &UniformGrid, values: &[C64], dim: usize, target: &UniformGrid) -> Result<Vec<C64>> {
    require_positive_time(t)?;
    let c = inv_sqrt_it(t);
    let mut out = Vec::with_capacity(target.count * dim);
    for j in 0..target.count {
        out.extend(interpolate_cubic(source, values, dim, target.point(j) / t).into_iter().map(|z| z * c));
    }
    Ok(out)
}

/// A vector function on a k-grid symmetric about zero, `[node][dim]`.
#[derive(Clone, Debug)]
pub struct WholeLine {
    pub grid: UniformGrid,
    pub dim: usize,
    pub values: Vec<C64>,
}

impl WholeLine {
    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.values, &self.grid.trapezoid_weights(), self.dim)
    }

    pub fn at(&self, i: usize) -> &[C64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Index of the node `k = 0`.
    pub fn origin(&self) -> usize {
        self.grid.count / 2
    }

    /// The `k ≥ 0` half.
    pub fn positive_half(&self) -> Vec<C64> {
        self.values[self.origin() * self.dim..].to_vec()
    }

    /// `max_k |S(k) f(-k) - f(k)|`, with `S(-k) = S(k)†`.
    pub fn symmetry_residual(&self, sd: &ScatteringData) -> f64 {
        let o = self.origin();
        let mut worst: f64 = 0.0;
        for i in 0..self.grid.count {
            let (idx, neg) = if i >= o { (i - o, false) } else { (o - i, true) };
            let s = if neg { sd.s[idx].adjoint() } else { sd.s[idx].clone() };
            let mirrored = s.mul_vec(self.at(2 * o - i));
            let r: f64 = mirrored.iter().zip(self.at(i)).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max(r);
        }
        worst
    }
}

/// Symmetric grid with the same nodes as `half` (which starts at 0) mirrored.
fn mirrored_grid(half: &UniformGrid) -> UniformGrid {
    UniformGrid { start: -half.end(), step: half.step, count: 2 * half.count - 1 }
}

/// Extend `φ` from `k ≥ 0` by `(Eφ)(-k) = S(-k)φ(k) = S(k)†φ(k)`.
pub fn extend_e(sd: &ScatteringData, phi: &[C64]) -> Result<WholeLine> {
    let n = sd.dim();
    let nk = sd.kgrid.count;
    if sd.kgrid.start != 0.0 {
        return Err(Error::InvalidGrid("scattering data must start at k = 0".into()));
    }
    if phi.len() != nk * n {
        return Err(Error::DimensionMismatch(format!("expected {} k-values, got {}", nk * n, phi.len())));
    }
    let grid = mirrored_grid(&sd.kgrid);
    let mut values = Vec::with_capacity(grid.count * n);
    for i in (1..nk).rev() {
        values.extend(sd.s[i].adjoint().mul_vec(&phi[i * n..(i + 1) * n]));
    }
    values.extend_from_slice(phi);
    Ok(WholeLine { grid, dim: n, values })
}

/// Node `i` of a mirrored grid as a table index and branch.
fn branch_of(origin: usize, i: usize) -> (usize, Branch) {
    if i >= origin {
        (i - origin, Branch::Plus)
    } else {
        (origin - i, Branch::Minus)
    }
}

fn check_table(jt: &JostTable, grid: &UniformGrid) -> Result<UniformGrid> {
    let kg = jt.kgrid();
    if (kg.step - grid.step).abs() > 1e-12 * grid.step || kg.start != 0.0 || 2 * kg.count - 1 != grid.count {
        return Err(Error::InvalidGrid("Jost table k-grid does not match the symmetric grid".into()));
    }
    jt.profile_grid()
        .copied()
        .ok_or_else(|| Error::InvalidInput("Jost table was built without profiles".into()))
}

/// `Σ_a w_a m(k_i, y_{s+a})`, the interpolated profile for a stencil.
fn profile_value(jt: &JostTable, idx: usize, br: Branch, stencil: &(usize, [f64; 4]), out: &mut [C64]) {
    out.iter_mut().for_each(|z| *z = ZERO);
    for (a, &wa) in stencil.1.iter().enumerate() {
        if wa == 0.0 {
            continue;
        }
        for (o, m) in out.iter_mut().zip(jt.m_node(idx, br, stencil.0 + a)) {
            *o += m * wa;
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Kernel {
    Full,
    Free,
    Deviation,
}

/// `√(it/2π) Σ_k w_k e^{-it(k-x'/2)²} K(k, t|x'|) φ(k)` with `K = m`, `I` or `m - I`.
fn w_sum(table: Option<&JostTable>, t: f64, phi: &WholeLine, xs: &[f64], kernel: Kernel) -> Result<Vec<C64>> {
    require_positive_time(t)?;
    let n = phi.dim;
    let nn = n * n;
    let pg = match (table, kernel) {
        (Some(jt), Kernel::Full | Kernel::Deviation) => Some(check_table(jt, &phi.grid)?),
        (None, Kernel::Free) => None,
        _ => return Err(Error::InvalidInput("a Jost table is required for W".into())),
    };
    if let Some(jt) = table {
        if jt.dim() != n {
            return Err(Error::DimensionMismatch("Jost table and k-function dimensions differ".into()));
        }
    }
    let kmax = phi.grid.end();
    let dk = phi.grid.step;
    let active = |x: f64| kernel != Kernel::Deviation || pg.map(|g| t * x.abs() < g.end()).unwrap_or(false);
    let xmax = xs.iter().copied().filter(|&x| active(x)).fold(0.0, |a: f64, x| a.max(x.abs()));
    let guard = 2.0 * (kmax + 0.5 * xmax) * t * dk;
    if guard >= 0.5 {
        return Err(Error::Resolution(format!(
            "2·(K + |x|/2)·t·dk = {guard:.3} must be below 0.5 (K = {kmax}, |x| ≤ {xmax}, t = {t}, dk = {dk})"
        )));
    }
    let wk = phi.grid.trapezoid_weights();
    let origin = phi.origin();
    let pref = C64::from_polar((t / (2.0 * PI)).sqrt(), PI / 4.0);
    let mut out = vec![ZERO; xs.len() * n];
    out.par_chunks_mut(n).zip(xs.par_iter()).for_each(|(o, &x)| {
        if !active(x) {
            return;
        }
        let y = t * x.abs();
        let stencil = pg.and_then(|g| if y < g.end() { g.cubic_stencil(y) } else { None });
        let mut m = vec![ZERO; nn];
        for i in 0..phi.grid.count {
            let k = phi.grid.point(i);
            let d = k - 0.5 * x;
            let e = C64::from_polar(wk[i], -t * d * d);
            let f = phi.at(i);
            match (&stencil, table) {
                (Some(st), Some(jt)) => {
                    let (idx, br) = branch_of(origin, i);
                    profile_value(jt, idx, br, st, &mut m);
                    if kernel == Kernel::Deviation {
                        for r in 0..n {
                            m[r * n + r] -= 1.0;
                        }
                    }
                    for r in 0..n {
                        let mut acc = ZERO;
                        for c in 0..n {
                            acc += m[r * n + c] * f[c];
                        }
                        o[r] += e * acc;
                    }
                }
                _ => {
                    if kernel != Kernel::Deviation {
                        for r in 0..n {
                            o[r] += e * f[r];
                        }
                    }
                }
            }
        }
        for z in o.iter_mut() {
            *z *= pref;
        }
    });
    Ok(out)
}

/// `(W(t)φ)(x')` at the points `xs`, `m` taken from the table's profiles
/// (even in x, identity past the potential's support).
pub fn op_w(jt: &JostTable, t: f64, phi: &WholeLine, xs: &[f64]) -> Result<Vec<C64>> {
    w_sum(Some(jt), t, phi, xs, Kernel::Full)
}

/// The free operator `V(t)`, i.e. `W(t)` with `m ≡ I`.
pub fn op_v(t: f64, phi: &WholeLine, xs: &[f64]) -> Result<Vec<C64>> {
    w_sum(None, t, phi, xs, Kernel::Free)
}

/// `((W(t) - V(t))φ)(x')`, summed with `m - I` so there is no cancellation.
/// It vanishes once `t|x'|` leaves the support; those points are returned as
/// zero and exempt from the resolution guard.
pub fn op_w_minus_v(jt: &JostTable, t: f64, phi: &WholeLine, xs: &[f64]) -> Result<Vec<C64>> {
    w_sum(Some(jt), t, phi, xs, Kernel::Deviation)
}

/// `W_±(t)φ(k) = √(t/2πi) ∫₀^∞ e^{it(k±x/2)²} m(∓k, tx)† φ(x) dx` on the
/// symmetric grid `kgrid`; `φ` lives on `xgrid ⊂ [0, ∞)`.
fn wpm_sum(
    table: Option<&JostTable>,
    t: f64,
    plus: bool,
    xgrid: &UniformGrid,
    phi: &[C64],
    dim: usize,
    kgrid: &UniformGrid,
) -> Result<WholeLine> {
    require_positive_time(t)?;
    let n = dim;
    let nn = n * n;
    if phi.len() != xgrid.count * n {
        return Err(Error::DimensionMismatch("x-function length does not match its grid".into()));
    }
    if xgrid.start < 0.0 {
        return Err(Error::InvalidGrid("W± integrates over x ≥ 0".into()));
    }
    let pg = match table {
        Some(jt) => Some(check_table(jt, kgrid)?),
        None => None,
    };
    let kmax = kgrid.end();
    let guard = t * (kmax + 0.5 * xgrid.end()) * xgrid.step;
    if guard >= 0.5 {
        return Err(Error::Resolution(format!(
            "t·(K + X/2)·dx = {guard:.3} must be below 0.5 (t = {t}, K = {kmax}, X = {}, dx = {})",
            xgrid.end(),
            xgrid.step
        )));
    }
    let wx = xgrid.trapezoid_weights();
    let stencils: Vec<Option<(usize, [f64; 4])>> = (0..xgrid.count)
        .map(|j| {
            let y = t * xgrid.point(j);
            pg.and_then(|g| if y < g.end() { g.cubic_stencil(y) } else { None })
        })
        .collect();
    let origin = kgrid.count / 2;
    let sign = if plus { 1.0 } else { -1.0 };
    let pref = C64::from_polar((t / (2.0 * PI)).sqrt(), -PI / 4.0);
    let mut values = vec![ZERO; kgrid.count * n];
    values.par_chunks_mut(n).enumerate().for_each(|(i, o)| {
        let k = kgrid.point(i);
        // m(-k) for W+, m(k) for W-
        let node = if plus { 2 * origin - i } else { i };
        let (idx, br) = branch_of(origin, node);
        let mut m = vec![ZERO; nn];
        for j in 0..xgrid.count {
            let x = xgrid.point(j);
            let d = k + sign * 0.5 * x;
            let e = C64::from_polar(wx[j], t * d * d);
            let f = &phi[j * n..(j + 1) * n];
            match (&stencils[j], table) {
                (Some(st), Some(jt)) => {
                    profile_value(jt, idx, br, st, &mut m);
                    for r in 0..n {
                        let mut acc = ZERO;
                        for c in 0..n {
                            acc += m[c * n + r].conj() * f[c];
                        }
                        o[r] += e * acc;
                    }
                }
                _ => {
                    for r in 0..n {
                        o[r] += e * f[r];
                    }
                }
            }
        }
        for z in o.iter_mut() {
            *z *= pref;
        }
    });
    Ok(WholeLine { grid: *kgrid, dim: n, values })
}

/// `W₊(t)` or `W₋(t)` applied to `φ` on `xgrid`, evaluated on the table's
/// mirrored k-grid.
pub fn op_wpm(jt: &JostTable, t: f64, plus: bool, xgrid: &UniformGrid, phi: &[C64]) -> Result<WholeLine> {
    wpm_sum(Some(jt), t, plus, xgrid, phi, jt.dim(), &mirrored_grid(jt.kgrid()))
}

/// Free `V₊(t)` / `V₋(t)` on the mirrored version of `kgrid_half`.
pub fn op_vpm(t: f64, plus: bool, xgrid: &UniformGrid, phi: &[C64], dim: usize, kgrid_half: &UniformGrid) -> Result<WholeLine> {
    wpm_sum(None, t, plus, xgrid, phi, dim, &mirrored_grid(kgrid_half))
}

fn combine_hat(sd: &ScatteringData, plus: WholeLine, minus: WholeLine) -> Result<WholeLine> {
    if 2 * sd.kgrid.count - 1 != plus.grid.count {
        return Err(Error::InvalidGrid("scattering data and k-grid differ".into()));
    }
    let n = plus.dim;
    let origin = plus.origin();
    let mut values = minus.values;
    for i in 0..plus.grid.count {
        let (idx, br) = branch_of(origin, i);
        let s = if br == Branch::Plus { sd.s[idx].clone() } else { sd.s[idx].adjoint() };
        let sp = s.mul_vec(plus.at(i));
        for (v, a) in values[i * n..(i + 1) * n].iter_mut().zip(sp) {
            *v += a;
        }
    }
    Ok(WholeLine { grid: plus.grid, dim: n, values })
}

/// `Ŵ(t)φ(k) = S(k)W₊(t)φ(k) + W₋(t)φ(k)`.
pub fn op_what(jt: &JostTable, sd: &ScatteringData, t: f64, xgrid: &UniformGrid, phi: &[C64]) -> Result<WholeLine> {
    let p = op_wpm(jt, t, true, xgrid, phi)?;
    let m = op_wpm(jt, t, false, xgrid, phi)?;
    combine_hat(sd, p, m)
}

/// `V̂(t)φ = S V₊(t)φ + V₋(t)φ` with the scattering matrix `sd` of the free
/// problem.
pub fn op_vhat(sd: &ScatteringData, t: f64, xgrid: &UniformGrid, phi: &[C64]) -> Result<WholeLine> {
    let n = sd.dim();
    let p = op_vpm(t, true, xgrid, phi, n, &sd.kgrid)?;
    let m = op_vpm(t, false, xgrid, phi, n, &sd.kgrid)?;
    combine_hat(sd, p, m)
}

/// `Q(t)φ = W(t)Eφ` at the points `xs`.
pub fn op_q(jt: &JostTable, sd: &ScatteringData, t: f64, phi: &[C64], xs: &[f64]) -> Result<Vec<C64>> {
    let e = extend_e(sd, phi)?;
    op_w(jt, t, &e, xs)
}

/// `M D_t Q(t)φ` on the transform's x-grid. `Q` is evaluated at `x' = x/t`
/// for `x' ≤ x_prime_max` and taken as zero beyond.
pub fn factorized_linear(st: &SpectralTransform, phi: &[C64], t: f64, x_prime_max: f64) -> Result<Vec<C64>> {
    require_positive_time(t)?;
    let g = st.xgrid();
    let n = st.dim();
    let count = g.points().iter().take_while(|&&x| x / t <= x_prime_max * (1.0 + 1e-12)).count();
    let source = UniformGrid { start: 0.0, step: g.step / t, count: count.max(1) };
    let q = op_q(&st.table, &st.scattering, t, phi, &source.points())?;
    let d = op_dt(t, &source, &q, n, g)?;
    op_m(t, g, n, &d)
}

/// `μ ↦ N(μ)` supplied by the caller.
pub type NonlinearMap = Arc<dyn Fn(&[f64]) -> ComplexMatrix + Send + Sync>;

/// Shape of the nonlinearity `N(|u₁|, ..., |uₙ|)`.
#[derive(Clone)]
pub enum NonlinearForm {
    /// `λ|μ|^α I` with the Euclidean `|μ|`.
    ScalarPower,
    /// `λ diag(c_j μ_j^α)`.
    DiagonalScalar(Vec<f64>),
    /// Independent nonlinearities on consecutive blocks of components.
    Blocks(Vec<(usize, NonlinearitySpec)>),
    /// `λ N(μ)` for a user map.
    Map(NonlinearMap),
}

impl fmt::Debug for NonlinearForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ScalarPower => write!(f, "ScalarPower"),
            Self::DiagonalScalar(c) => f.debug_tuple("DiagonalScalar").field(c).finish(),
            Self::Blocks(b) => f.debug_tuple("Blocks").field(b).finish(),
            Self::Map(_) => write!(f, "Map(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NonlinearitySpec {
    pub alpha: f64,
    pub lambda: f64,
    pub form: NonlinearForm,
}

/// Result of the small-amplitude growth sweep.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GrowthReport {
    /// Largest `‖N(μ)‖ / |μ|^α` seen for `|μ| ≤ 1`.
    pub constant: f64,
    /// The same ratio at the smallest and largest sampled radius.
    pub ratio_small: f64,
    pub ratio_unit: f64,
}

impl NonlinearitySpec {
    pub fn new(alpha: f64, lambda: f64, form: NonlinearForm) -> Result<Self> {
        if !(alpha > 2.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("nonlinearity power must exceed 2, got {alpha}")));
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidInput("nonlinearity coupling is not finite".into()));
        }
        if let NonlinearForm::DiagonalScalar(c) = &form {
            if c.is_empty() || c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("diagonal coefficients must be finite and nonempty".into()));
            }
        }
        if let NonlinearForm::Blocks(b) = &form {
            if b.is_empty() || b.iter().any(|(d, _)| *d == 0) {
                return Err(Error::InvalidInput("nonlinearity blocks must be nonempty".into()));
            }
        }
        Ok(Self { alpha, lambda, form })
    }

    pub fn scalar_power(alpha: f64, lambda: f64) -> Result<Self> {
        Self::new(alpha, lambda, NonlinearForm::ScalarPower)
    }

    /// The linear problem, `N ≡ 0`.
    pub fn zero() -> Self {
        Self { alpha: 3.0, lambda: 0.0, form: NonlinearForm::ScalarPower }
    }

    /// Block-diagonal combination, one nonlinearity per block.
    pub fn block_diagonal(blocks: Vec<(usize, NonlinearitySpec)>) -> Result<Self> {
        let alpha = blocks.iter().map(|(_, s)| s.alpha).fold(f64::INFINITY, f64::min);
        Self::new(alpha, 1.0, NonlinearForm::Blocks(blocks))
    }

    /// Number of components the form is tied to, if any.
    pub fn fixed_dim(&self) -> Option<usize> {
        match &self.form {
            NonlinearForm::DiagonalScalar(c) => Some(c.len()),
            NonlinearForm::Blocks(b) => Some(b.iter().map(|(d, _)| d).sum()),
            _ => None,
        }
    }

    /// True when `N(μ)` is real diagonal, so a substep only rotates phases.
    pub fn is_phase_only(&self) -> bool {
        match &self.form {
            NonlinearForm::ScalarPower | NonlinearForm::DiagonalScalar(_) => true,
            NonlinearForm::Blocks(b) => b.iter().all(|(_, s)| s.is_phase_only()),
            NonlinearForm::Map(_) => false,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.lambda == 0.0 && !matches!(self.form, NonlinearForm::Blocks(_))
    }

    /// `N(μ)` as a matrix.
    pub fn matrix(&self, mu: &[f64]) -> ComplexMatrix {
        let n = mu.len();
        match &self.form {
            NonlinearForm::ScalarPower => {
                let r = mu.iter().map(|m| m * m).sum::<f64>().sqrt();
                ComplexMatrix::scalar(n, C64::new(self.lambda * r.powf(self.alpha), 0.0))
            }
            NonlinearForm::DiagonalScalar(c) => ComplexMatrix::from_real_diag(
                &mu.iter().zip(c).map(|(m, c)| self.lambda * c * m.powf(self.alpha)).collect::<Vec<_>>(),
            ),
            NonlinearForm::Blocks(b) => {
                let mut out = ComplexMatrix::zeros(n);
                let mut off = 0;
                for (d, s) in b {
                    let blk = s.matrix(&mu[off..off + d]);
                    for r in 0..*d {
                        for c in 0..*d {
                            out[(off + r, off + c)] = blk[(r, c)] * self.lambda;
                        }
                    }
                    off += d;
                }
                out
            }
            NonlinearForm::Map(f) => f(mu).scale_real(self.lambda),
        }
    }

    /// `exp(-i s N(|u|)) u` with the coefficient frozen at the input.
    pub fn substep(&self, u: &[C64], s: f64) -> Vec<C64> {
        match &self.form {
            NonlinearForm::ScalarPower => {
                let r = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let p = C64::from_polar(1.0, -s * self.lambda * r.powf(self.alpha));
                u.iter().map(|z| z * p).collect()
            }
            NonlinearForm::DiagonalScalar(c) => u
                .iter()
                .zip(c)
                .map(|(z, c)| z * C64::from_polar(1.0, -s * self.lambda * c * z.norm().powf(self.alpha)))
                .collect(),
            NonlinearForm::Blocks(b) => {
                let mut out = Vec::with_capacity(u.len());
                let mut off = 0;
                for (d, sp) in b {
                    out.extend(sp.substep(&u[off..off + d], s * self.lambda));
                    off += d;
                }
                out
            }
            NonlinearForm::Map(_) => {
                let mu: Vec<f64> = u.iter().map(|z| z.norm()).collect();
                self.matrix(&mu).scale(-I * s).matrix_exp().mul_vec(u)
            }
        }
    }

    fn sample_directions(dim: usize) -> Vec<Vec<f64>> {
        let mut dirs = Vec::new();
        for j in 0..dim {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            dirs.push(e);
        }
        let s = 1.0 / (dim as f64).sqrt();
        dirs.push(vec![s; dim]);
        // a fixed irrational-slope direction
        let raw: Vec<f64> = (0..dim).map(|j| 1.0 + ((j as f64 + 1.0) * 0.618_033_988_7).fract()).collect();
        let r = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        dirs.push(raw.into_iter().map(|v| v / r).collect());
        dirs
    }

    /// Sweep `|μ| ∈ [1e-4, 1]` and check `‖N(μ)‖ ≤ C|μ|^α`. A ratio that keeps
    /// growing as `|μ| → 0` means `N` vanishes more slowly than required.
    pub fn growth_check(&self, dim: usize) -> Result<GrowthReport> {
        if let Some(d) = self.fixed_dim() {
            if d != dim {
                return Err(Error::DimensionMismatch(format!("nonlinearity acts on {d} components, field has {dim}")));
            }
        }
        let radii: Vec<f64> = (0..=16).map(|i| 10f64.powf(-4.0 + 0.25 * i as f64)).collect();
        let mut constant: f64 = 0.0;
        let mut small: f64 = 0.0;
        let mut unit: f64 = 0.0;
        let mut mid: f64 = 0.0;
        for dir in Self::sample_directions(dim) {
            for (i, &r) in radii.iter().enumerate() {
                let mu: Vec<f64> = dir.iter().map(|d| d * r).collect();
                let nm = self.matrix(&mu);
                if nm.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::InvalidInput(format!("nonlinearity is not finite at |μ| = {r}")));
                }
                let ratio = nm.norm2() / r.powf(self.alpha);
                constant = constant.max(ratio);
                if i == 0 {
                    small = small.max(ratio);
                }
                if i == 8 {
                    mid = mid.max(ratio);
                }
                if i == radii.len() - 1 {
                    unit = unit.max(ratio);
                }
            }
        }
        if small > 10.0 * mid.max(1e-300) && small > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "nonlinearity decays more slowly than |μ|^{}: ratio {small:.3e} at |μ| = 1e-4 vs {mid:.3e} at 1e-2",
                self.alpha
            )));
        }
        Ok(GrowthReport { constant, ratio_small: small, ratio_unit: unit })
    }

    /// `max ‖N(μ)P - PN(μ)‖ < 1e-10` over the sweep samples.
    pub fn commutes_with(&self, p: &ComplexMatrix) -> bool {
        let dim = p.dim();
        let scale = p.norm2().max(1.0);
        Self::sample_directions(dim).iter().all(|dir| {
            [1e-3, 0.1, 0.5, 1.0].iter().all(|&r| {
                let mu: Vec<f64> = dir.iter().map(|d| d * r).collect();
                let nm = self.matrix(&mu);
                (&(&nm * p) - &(p * &nm)).norm_fro() < 1e-10 * scale * nm.norm_fro().max(1.0)
            })
        })
    }
}

/// Settings for [`evolve_nls`].
#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Times at which to record the state; every 0.5 when empty. `t_end`
    /// is always recorded.
    pub sample_times: Vec<f64>,
    /// Abort once `‖u‖_{H¹}` exceeds this multiple of its initial value.
    pub growth_limit: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { t_end: 10.0, dt: 0.01, sample_times: Vec::new(), growth_limit: 10.0 }
    }
}

/// One recorded state.
#[derive(Clone, Debug)]
pub struct Sample {
    pub t: f64,
    pub u: FieldState,
    /// Interaction-picture variable `e^{itk²}(Fu)(k)` on `k ≥ 0`.
    pub w: Vec<C64>,
    pub l2_norm: f64,
    pub sup_norm: f64,
    pub h1_norm: f64,
    pub boundary_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleSummary {
    pub t: f64,
    pub l2_norm: f64,
    pub sup_norm: f64,
    pub h1_norm: f64,
    pub boundary_residual: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dim: usize,
    pub samples: Vec<Sample>,
    pub steps: usize,
    pub max_boundary_residual: f64,
    /// Largest `‖u(t)‖_{H¹}/‖u₀‖_{H¹}` over all steps.
    pub max_growth: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn summary(&self) -> Vec<SampleSummary> {
        self.samples
            .iter()
            .map(|s| SampleSummary {
                t: s.t,
                l2_norm: s.l2_norm,
                sup_norm: s.sup_norm,
                h1_norm: s.h1_norm,
                boundary_residual: s.boundary_residual,
            })
            .collect()
    }

    /// Sample closest to `t`.
    pub fn nearest(&self, t: f64) -> Option<&Sample> {
        self.samples.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }

    /// Columns `t, x, re_u1, im_u1, ...`, one row per sample and node.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["t".to_string(), "x".to_string()];
        for j in 1..=self.dim {
            header.push(format!("re_u{j}"));
            header.push(format!("im_u{j}"));
        }
        w.write_record(&header)?;
        for s in &self.samples {
            for i in 0..s.u.grid.count {
                let mut row = vec![format!("{:.16e}", s.t), format!("{:.16e}", s.u.grid.point(i))];
                for z in s.u.at(i) {
                    row.push(format!("{:.16e}", z.re));
                    row.push(format!("{:.16e}", z.im));
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Boundary residual of `u0` from one-sided differences, together with an
/// estimate of the difference error (fifth- minus fourth-order stencil).
fn initial_boundary_check(u0: &FieldState, st: &SpectralTransform) -> (f64, f64) {
    let n = u0.dim;
    let h = u0.grid.step;
    let c4 = [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -1.0 / 4.0];
    let (v, d5) = u0.boundary_values();
    let d4: Vec<C64> = (0..n)
        .map(|j| c4.iter().enumerate().map(|(i, &ci)| u0.values[i * n + j] * ci).sum::<C64>() / h)
        .collect();
    let est = d5.iter().zip(&d4).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    (st.boundary.residual(&v, &d5), est * st.boundary.a().norm2())
}

/// Time-dependent phase `e^{±itk²}` applied in place.
fn apply_phase(st: &SpectralTransform, z: &mut [C64], t: f64) {
    let n = st.dim();
    let kg = *st.kgrid();
    z.par_chunks_mut(n).enumerate().for_each(|(i, v)| {
        let k = kg.point(i);
        let p = C64::from_polar(1.0, t * k * k);
        v.iter_mut().for_each(|x| *x *= p);
    });
}

fn k_h1(st: &SpectralTransform, w: &[C64]) -> f64 {
    let n = st.dim();
    let kg = st.kgrid();
    w.chunks(n)
        .zip(st.k_weights())
        .enumerate()
        .map(|(i, (v, &wt))| {
            let k = kg.point(i);
            wt * (1.0 + k * k) * v.iter().map(|z| z.norm_sqr()).sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// Nonlinear kick at time `t` of duration `s`, applied to the interaction
/// variable: `w += e^{itk²} F(exp(-isN)u - u)` with `u = F† e^{-itk²} w`.
fn kick(st: &SpectralTransform, nl: &NonlinearitySpec, w: &mut [C64], t: f64, s: f64) {
    let n = st.dim();
    let mut z = w.to_vec();
    apply_phase(st, &mut z, -t);
    let u = st.adjoint(&z);
    let mut du = vec![ZERO; u.len()];
    du.par_chunks_mut(n).zip(u.par_chunks(n)).for_each(|(d, v)| {
        let nv = nl.substep(v, s);
        for ((d, a), b) in d.iter_mut().zip(nv).zip(v) {
            *d = a - b;
        }
    });
    let mut dz = st.forward(&du);
    apply_phase(st, &mut dz, t);
    for (a, b) in w.iter_mut().zip(dz) {
        *a += b;
    }
}

fn record(st: &SpectralTransform, w: &[C64], t: f64) -> Result<Sample> {
    let mut z = w.to_vec();
    apply_phase(st, &mut z, -t);
    let residual = st.boundary_residual(&z);
    let u = FieldState::new(t, *st.xgrid(), st.dim(), st.adjoint(&z))?;
    Ok(Sample {
        t,
        l2_norm: u.l2_norm(),
        sup_norm: u.sup_norm(),
        h1_norm: k_h1(st, w),
        boundary_residual: residual,
        w: w.to_vec(),
        u,
    })
}

/// Strang splitting for `i∂ₜu = Hu + N(|u|)u`. The linear flow is exact in
/// the spectral representation, so the state is carried as the interaction
/// variable `w = e^{itk²}Fu` and only the nonlinear kicks change it.
/// Consecutive half kicks are merged for phase-only nonlinearities and split
/// at the requested sample times.
pub fn evolve_nls(st: &SpectralTransform, nl: &NonlinearitySpec, u0: &FieldState, opts: &EvolveOptions) -> Result<Trajectory> {
    if st.has_bound_states {
        return Err(Error::BoundStatesPresent(st.bound_states.clone()));
    }
    if u0.grid != *st.xgrid() || u0.dim != st.dim() {
        return Err(Error::DimensionMismatch("initial data grid differs from the transform grid".into()));
    }
    if let Some(d) = nl.fixed_dim() {
        if d != u0.dim {
            return Err(Error::DimensionMismatch(format!("nonlinearity acts on {d} components, field has {}", u0.dim)));
        }
    }
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {}", opts.dt)));
    }
    let t0 = u0.t;
    if !(opts.t_end > t0) {
        return Err(Error::InvalidInput(format!("end time {} is not after the start {t0}", opts.t_end)));
    }
    let (res, est) = initial_boundary_check(u0, st);
    if res > 1e-8 * u0.sup_norm().max(1.0) + 10.0 * est {
        return Err(Error::BoundaryResidual(res));
    }

    let mut marks: Vec<f64> = if opts.sample_times.is_empty() {
        let count = ((opts.t_end - t0) / 0.5).floor() as usize;
        (1..=count).map(|i| t0 + 0.5 * i as f64).collect()
    } else {
        opts.sample_times.iter().copied().filter(|&t| t > t0 && t < opts.t_end).collect()
    };
    marks.push(opts.t_end);
    marks.sort_by(f64::total_cmp);
    marks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut w = st.forward(&u0.values);
    apply_phase(st, &mut w, t0);
    let h1_0 = k_h1(st, &w).max(1e-300);
    let mut samples = vec![record(st, &w, t0)?];
    let mut steps = 0;
    let mut max_growth: f64 = 1.0;
    let mut start = t0;
    let merge = nl.is_phase_only();
    for &end in &marks {
        let count = (((end - start) / opts.dt) - 1e-9).ceil().max(1.0) as usize;
        let tau = (end - start) / count as f64;
        if !nl.is_zero() {
            kick(st, nl, &mut w, start, 0.5 * tau);
            for s in 0..count {
                let t = start + (s + 1) as f64 * tau;
                if merge && s + 1 < count {
                    kick(st, nl, &mut w, t, tau);
                } else {
                    kick(st, nl, &mut w, t, 0.5 * tau);
                    if s + 1 < count {
                        kick(st, nl, &mut w, t, 0.5 * tau);
                    }
                }
                let growth = k_h1(st, &w) / h1_0;
                max_growth = max_growth.max(growth);
                if !growth.is_finite() || growth > opts.growth_limit {
                    return Err(Error::BlowUp { initial: h1_0, current: growth * h1_0, t });
                }
            }
        }
        steps += count;
        samples.push(record(st, &w, end)?);
        start = end;
    }
    let max_boundary_residual = samples.iter().map(|s| s.boundary_residual).fold(0.0, f64::max);
    Ok(Trajectory { dim: u0.dim, samples, steps, max_boundary_residual, max_growth })
}

/// Log-spaced sample times `a·2^{i/per_octave}` up to `t_end`.
pub fn log_spaced_times(a: f64, t_end: f64, per_octave: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 0;
    loop {
        let t = a * 2f64.powf(i as f64 / per_octave as f64);
        if t > t_end * (1.0 + 1e-12) {
            break;
        }
        out.push(t);
        i += 1;
    }
    out
}
