//! Independent reference computations used to cross-check the main solvers.
//! None of these share code paths with the production algorithms beyond the
//! matrix type and potential evaluation.

use crate::error::Result;
use crate::linalg::{expm1, ComplexMatrix, C64, I, ONE, ZERO};
use crate::potential::PotentialSpec;

fn segments(v: &PotentialSpec, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = v.breakpoints().iter().copied().filter(|&b| b > lo && b < hi).collect();
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut a = lo;
    for c in cuts {
        out.push((a, c));
        a = c;
    }
    out.push((a, hi));
    out
}

/// `V` evaluated strictly inside `(lo, hi)` so jumps at segment ends are
/// taken from the correct side.
fn one_sided(v: &PotentialSpec, x: f64, lo: f64, hi: f64) -> ComplexMatrix {
    let eps = 1e-9 * (hi - lo);
    v.value(x.clamp(lo + eps, hi - eps))
}

/// Integrate `m'' + 2ik m' = V m` from `x_start` (with `m = I`, `m' = 0`) back
/// to 0 by classical RK4, splitting at the potential's breakpoints. Returns
/// `(m(k,0), ∂x m(k,0))`. `V` must vanish beyond `x_start`.
pub fn jost_by_ode(v: &PotentialSpec, k: f64, x_start: f64, h_max: f64) -> (ComplexMatrix, ComplexMatrix) {
    let n = v.dim();
    let ik2 = 2.0 * I * k;
    let mut m = ComplexMatrix::identity(n);
    let mut dm = ComplexMatrix::zeros(n);
    let h_lim = if k.abs() > 0.0 { h_max.min(0.02 / k.abs()) } else { h_max };
    let rhs = |vx: &ComplexMatrix, m: &ComplexMatrix, dm: &ComplexMatrix| -> (ComplexMatrix, ComplexMatrix) {
        (dm.clone(), &(vx * m) - &dm.scale(ik2))
    };
    for &(lo, hi) in segments(v, 0.0, x_start).iter().rev() {
        let steps = ((hi - lo) / h_lim).ceil().max(1.0) as usize;
        let h = -(hi - lo) / steps as f64;
        for s in 0..steps {
            let x = hi + s as f64 * h;
            let v0 = one_sided(v, x, lo, hi);
            let vh = one_sided(v, x + 0.5 * h, lo, hi);
            let v1 = one_sided(v, x + h, lo, hi);
            let (a1, b1) = rhs(&v0, &m, &dm);
            let (a2, b2) = rhs(&vh, &(&m + &a1.scale_real(0.5 * h)), &(&dm + &b1.scale_real(0.5 * h)));
            let (a3, b3) = rhs(&vh, &(&m + &a2.scale_real(0.5 * h)), &(&dm + &b2.scale_real(0.5 * h)));
            let (a4, b4) = rhs(&v1, &(&m + &a3.scale_real(h)), &(&dm + &b3.scale_real(h)));
            let sum_a = &(&(&a1 + &a2.scale_real(2.0)) + &a3.scale_real(2.0)) + &a4;
            let sum_b = &(&(&b1 + &b2.scale_real(2.0)) + &b3.scale_real(2.0)) + &b4;
            m = &m + &sum_a.scale_real(h / 6.0);
            dm = &dm + &sum_b.scale_real(h / 6.0);
        }
    }
    (m, dm)
}

/// Successive approximations `m_{p+1}(x_j) = I + Σ_{l>j} w_l D(k,(l-j)h) V_l m_p(x_l)`
/// on the trapezoid grid `[0, x_end]`, summed directly in O(N²) per term.
/// Returns `m(k, 0)` after `terms` iterations.
pub fn jost_by_neumann(v: &PotentialSpec, k: f64, x_end: f64, h: f64, terms: usize) -> Result<ComplexMatrix> {
    let n = v.dim();
    let nn = n * n;
    let grid = crate::grid::UniformGrid::span(0.0, x_end, h)?;
    let count = grid.count;
    let vs = v.sample(&grid);
    let kern: Vec<C64> = (0..count)
        .map(|l| {
            let z = l as f64 * h;
            if k == 0.0 {
                C64::new(z, 0.0)
            } else {
                expm1(2.0 * I * k * z) / (2.0 * I * k)
            }
        })
        .collect();
    let mut w = vec![h; count];
    w[count - 1] = 0.5 * h;
    // iterate on the increments: term_{p+1} = K term_p, m = Σ term_p
    let mut term: Vec<C64> = (0..count).flat_map(|_| ComplexMatrix::identity(n).as_slice().to_vec()).collect();
    let mut total = term.clone();
    let mut vt = vec![ZERO; count * nn];
    for _ in 0..terms {
        for l in 0..count {
            let a = &vs[l * nn..(l + 1) * nn];
            let b = &term[l * nn..(l + 1) * nn];
            for r in 0..n {
                for c in 0..n {
                    let mut acc = ZERO;
                    for q in 0..n {
                        acc += a[r * n + q] * b[q * n + c];
                    }
                    vt[l * nn + r * n + c] = acc * w[l];
                }
            }
        }
        let mut next = vec![ZERO; count * nn];
        for j in 0..count {
            let out = &mut next[j * nn..(j + 1) * nn];
            for l in j + 1..count {
                let d = kern[l - j];
                for (o, x) in out.iter_mut().zip(&vt[l * nn..(l + 1) * nn]) {
                    *o += d * x;
                }
            }
        }
        for (t, x) in total.iter_mut().zip(&next) {
            *t += x;
        }
        term = next;
    }
    ComplexMatrix::from_row_major(&total[0..nn])
}

/// Number of terms after which the successive approximations are converged
/// to double precision: `⌈e·∫ y|V| dy⌉ + 10`.
pub fn neumann_terms(v: &PotentialSpec) -> usize {
    let g = v.default_grid();
    let w = g.trapezoid_weights();
    let moment: f64 = v.norms(&g).iter().enumerate().map(|(i, n)| w[i] * g.point(i) * n).sum();
    (std::f64::consts::E * moment).ceil() as usize + 10
}

/// Scalar shooting for `-ψ'' + Vψ = -κ²ψ` with `cos θ ψ(0) + sin θ ψ'(0) = 0`.
/// Returns the coefficient of the growing mode `e^{κx}` at `x_end`, scaled by
/// `e^{-κ x_end}`; it changes sign at every bound state.
pub fn growing_coefficient(v: &PotentialSpec, theta: f64, kappa: f64, x_end: f64, h_max: f64) -> f64 {
    let mut psi = theta.sin();
    let mut dpsi = -theta.cos();
    let k2 = kappa * kappa;
    for (lo, hi) in segments(v, 0.0, x_end) {
        let steps = ((hi - lo) / h_max).ceil().max(1.0) as usize;
        let h = (hi - lo) / steps as f64;
        let f = |x: f64| one_sided(v, x, lo, hi)[(0, 0)].re + k2;
        for s in 0..steps {
            let x = lo + s as f64 * h;
            let (q0, qh, q1) = (f(x), f(x + 0.5 * h), f(x + h));
            let (a1, b1) = (dpsi, q0 * psi);
            let (a2, b2) = (dpsi + 0.5 * h * b1, qh * (psi + 0.5 * h * a1));
            let (a3, b3) = (dpsi + 0.5 * h * b2, qh * (psi + 0.5 * h * a2));
            let (a4, b4) = (dpsi + h * b3, q1 * (psi + h * a3));
            psi += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            dpsi += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
            // keep the magnitude bounded; only the sign pattern matters
            let scale = psi.abs().max(dpsi.abs());
            if scale > 1e100 {
                psi /= scale;
                dpsi /= scale;
            }
        }
    }
    (kappa * psi + dpsi) / (2.0 * kappa)
}

/// Bound-state count by sign changes of [`growing_coefficient`] over `κ`.
pub fn count_bound_states(v: &PotentialSpec, theta: f64, kappas: &[f64], x_end: f64) -> usize {
    let vals: Vec<f64> = kappas.iter().map(|&k| growing_coefficient(v, theta, k, x_end, 1e-3)).collect();
    vals.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
}

/// Free whole-line evolution `i u_t = -u_xx` by dense Fourier quadrature:
/// `û(ξ) = Σ_y w u0(y) e^{-iξy}`, `u(t,x) = (1/2π) Σ_ξ w û(ξ) e^{-iξ²t + iξx}`.
pub fn free_line_evolution(
    initial: impl Fn(f64) -> C64,
    y_range: f64,
    dy: f64,
    xi_range: f64,
    dxi: f64,
    t: f64,
    xs: &[f64],
) -> Vec<C64> {
    let ny = (2.0 * y_range / dy).round() as usize + 1;
    let ys: Vec<f64> = (0..ny).map(|i| -y_range + i as f64 * dy).collect();
    let u0: Vec<C64> = ys.iter().map(|&y| initial(y)).collect();
    let nxi = (2.0 * xi_range / dxi).round() as usize + 1;
    let hat: Vec<C64> = (0..nxi)
        .map(|i| {
            let xi = -xi_range + i as f64 * dxi;
            let s: C64 = ys.iter().zip(&u0).map(|(&y, &u)| u * C64::from_polar(1.0, -xi * y)).sum();
            s * dy * C64::from_polar(1.0, -xi * xi * t)
        })
        .collect();
    xs.iter()
        .map(|&x| {
            let s: C64 = hat
                .iter()
                .enumerate()
                .map(|(i, &h)| h * C64::from_polar(1.0, (-xi_range + i as f64 * dxi) * x))
                .sum();
            s * dxi / (2.0 * std::f64::consts::PI)
        })
        .collect()
}

/// Reflection and transmission of `e^{ikx}` incident from the left on the
/// line with `v'(0+) - v'(0-) = λ v(0)`, from the 2×2 matching system
/// `1 + r = t`, `ik t - ik(1 - r) = λ t`.
pub fn delta_matching(lambda: f64, k: f64) -> Result<(C64, C64)> {
    let ik = I * k;
    let a = ComplexMatrix::from_rows(&[vec![ONE, -ONE], vec![ik, ik - lambda]])?;
    let rhs = [-ONE, ik];
    let sol = a.inverse()?.mul_vec(&rhs);
    Ok((sol[0], sol[1]))
}
