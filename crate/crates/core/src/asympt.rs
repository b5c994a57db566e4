//! Large-time diagnostics: interaction-picture extraction, the final state,
//! power-law fits of decay rates and the asymptotic profile checks.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{extend_e, Trajectory, WholeLine};
use crate::grid::{interpolate_cubic, l2_norm, sup_norm};
use crate::jost::Branch;
use crate::linalg::{C64, ZERO};
use crate::spectral::{FieldState, SpectralTransform};

/// `w(t, k) = e^{itk²}(Fu(t))(k)` for `k ≥ 0`, extended to `k < 0` by the
/// scattering symmetry.
pub fn extract_w(st: &SpectralTransform, u: &FieldState) -> Result<WholeLine> {
    if u.grid != *st.xgrid() || u.dim != st.dim() {
        return Err(Error::DimensionMismatch("field grid differs from the transform grid".into()));
    }
    let half = st.phase(&st.forward(&u.values), -u.t);
    extend_e(&st.scattering, &half)
}

/// Least-squares fit of `log y = c + p log t`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Two standard errors of the exponent.
    pub band: f64,
    pub points: usize,
}

/// Fit `y ~ C t^p` to the positive entries with `t` in `[lo, hi]`.
pub fn fit_power_law(table: &[(f64, f64)], lo: f64, hi: f64) -> Result<PowerFit> {
    let pts: Vec<(f64, f64)> = table
        .iter()
        .filter(|(t, y)| *t >= lo * (1.0 - 1e-12) && *t <= hi * (1.0 + 1e-12) && *y > 0.0 && y.is_finite())
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 samples in [{lo}, {hi}] to fit, have {}", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("fit window contains a single time".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    Ok(PowerFit { exponent: slope, intercept, band: 2.0 * se, points: pts.len() })
}

/// True if the table never rises by more than `slack` (relative).
fn non_increasing(table: &[(f64, f64)], slack: f64) -> bool {
    table.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + slack))
}

/// Fitted decay of `‖u(t)‖_∞` over the window.
pub fn verify_decay(traj: &Trajectory, lo: f64, hi: f64) -> Result<PowerFit> {
    let table: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t, s.sup_norm)).collect();
    fit_power_law(&table, lo, hi)
}

/// Final state and the Cauchy behaviour of `w(t)`.
#[derive(Clone, Debug)]
pub struct FinalState {
    /// `w` at the last sample, `k ≥ 0`.
    pub w_final: Vec<C64>,
    /// `(t, ‖w(2t) - w(t)‖)` for sampled pairs.
    pub cauchy: Vec<(f64, f64)>,
    pub fit: Option<PowerFit>,
    /// Differences failed to decrease.
    pub non_cauchy: bool,
}

/// `w_final` is the last snapshot; dyadic differences `‖w(2t) - w(t)‖_{L²(k≥0)}`
/// are tabulated and fitted over `[lo, hi]` (by the earlier time of a pair).
pub fn final_state(st: &SpectralTransform, traj: &Trajectory, lo: f64, hi: f64) -> Result<FinalState> {
    let s = &traj.samples;
    let last = s.last().ok_or_else(|| Error::InvalidInput("empty trajectory".into()))?;
    let n = st.dim();
    let mut cauchy = Vec::new();
    for a in s.iter().filter(|a| a.t > 0.0) {
        let target = 2.0 * a.t;
        if let Some(b) = s.iter().find(|b| (b.t - target).abs() <= 1e-9 * target) {
            let d: Vec<C64> = b.w.iter().zip(&a.w).map(|(x, y)| x - y).collect();
            cauchy.push((a.t, l2_norm(&d, st.k_weights(), n)));
        }
    }
    let fit = fit_power_law(&cauchy, lo, hi).ok();
    let non_cauchy = !non_increasing(&cauchy, 0.05);
    Ok(FinalState { w_final: last.w.clone(), cauchy, fit, non_cauchy })
}

/// `(1/√2) e^{ix²/4t} (it)^{-1/2} m(x/2t, x) w(x/2t)` on the transform's
/// x-grid, with `m` interpolated in `k` from the stored profiles and zero
/// where `x/2t` leaves the k-grid.
pub fn modified_profile(st: &SpectralTransform, w: &[C64], t: f64) -> Result<Vec<C64>> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput("profile time must be positive".into()));
    }
    let n = st.dim();
    let nn = n * n;
    let xg = *st.xgrid();
    let kg = *st.kgrid();
    let jt = &st.table;
    let pg = *jt.profile_grid().ok_or_else(|| Error::InvalidInput("Jost table has no profiles".into()))?;
    let ratio = (xg.step / pg.step).round() as usize;
    let c = C64::from_polar(t.powf(-0.5) / 2f64.sqrt(), -std::f64::consts::FRAC_PI_4);
    let mut out = vec![ZERO; xg.count * n];
    out.par_chunks_mut(n).enumerate().for_each(|(j, o)| {
        let x = xg.point(j);
        let k = x / (2.0 * t);
        let Some((s, wts)) = kg.cubic_stencil(k) else {
            return;
        };
        let wk = interpolate_cubic(&kg, w, n, k);
        let node = j * ratio;
        let mut m = vec![ZERO; nn];
        if node < pg.count && x < pg.end() {
            for (a, &wa) in wts.iter().enumerate() {
                if wa != 0.0 {
                    for (mi, v) in m.iter_mut().zip(jt.m_node(s + a, Branch::Plus, node)) {
                        *mi += v * wa;
                    }
                }
            }
        } else {
            for r in 0..n {
                m[r * n + r] = C64::new(1.0, 0.0);
            }
        }
        let p = c * C64::from_polar(1.0, x * x / (4.0 * t));
        for r in 0..n {
            let mut acc = ZERO;
            for q in 0..n {
                acc += m[r * n + q] * wk[q];
            }
            o[r] = p * acc;
        }
    });
    Ok(out)
}

/// `(t, ‖u(t) - profile(t)‖_∞)` for the samples in `[lo, hi]`.
pub fn verify_profile(st: &SpectralTransform, traj: &Trajectory, w_final: &[C64], lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
    traj.samples
        .iter()
        .filter(|s| s.t >= lo * (1.0 - 1e-12) && s.t <= hi * (1.0 + 1e-12))
        .map(|s| {
            let p = modified_profile(st, w_final, s.t)?;
            let d: Vec<C64> = s.u.values.iter().zip(&p).map(|(a, b)| a - b).collect();
            Ok((s.t, sup_norm(&d, st.dim())))
        })
        .collect()
}

/// `(t, ‖u(t) - e^{-itH₀}F₀†w_final‖_{L²})` where `free` is the transform of
/// the zero potential with the same boundary pair and grids.
pub fn verify_free_state(
    free: &SpectralTransform,
    traj: &Trajectory,
    w_final: &[C64],
    lo: f64,
    hi: f64,
) -> Result<Vec<(f64, f64)>> {
    if free.kgrid().count * free.dim() != w_final.len() {
        return Err(Error::DimensionMismatch("final state and free transform k-grids differ".into()));
    }
    traj.samples
        .iter()
        .filter(|s| s.t >= lo * (1.0 - 1e-12) && s.t <= hi * (1.0 + 1e-12))
        .map(|s| {
            if s.u.grid != *free.xgrid() {
                return Err(Error::DimensionMismatch("trajectory and free transform x-grids differ".into()));
            }
            let v = free.adjoint(&free.phase(w_final, s.t));
            let other = FieldState::new(s.t, s.u.grid, s.u.dim, v)?;
            Ok((s.t, s.u.l2_distance(&other)))
        })
        .collect()
}

/// Everything the large-time checks produce for one run.
#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticsReport {
    pub times: Vec<f64>,
    pub sup_norms: Vec<(f64, f64)>,
    pub decay: PowerFit,
    pub cauchy_residuals: Vec<(f64, f64)>,
    pub cauchy_fit: Option<PowerFit>,
    pub profile_errors: Vec<(f64, f64)>,
    pub profile_fit: Option<PowerFit>,
    pub free_state_errors: Vec<(f64, f64)>,
    pub free_state_fit: Option<PowerFit>,
    /// Tables expected to decay that rose somewhere (soft check).
    pub monotonicity_flags: Vec<String>,
    #[serde(skip)]
    pub w_snapshots: Vec<(f64, Vec<C64>)>,
    #[serde(skip)]
    pub w_final: Vec<C64>,
}

/// Run every large-time check over the window `[lo, hi]`. `free` is the
/// zero-potential transform used for the free comparison.
pub fn analyze(st: &SpectralTransform, free: &SpectralTransform, traj: &Trajectory, lo: f64, hi: f64) -> Result<AsymptoticsReport> {
    let decay = verify_decay(traj, lo, hi)?;
    let fs = final_state(st, traj, lo, hi)?;
    let profile = verify_profile(st, traj, &fs.w_final, lo, hi)?;
    let free_errs = verify_free_state(free, traj, &fs.w_final, lo, hi)?;
    let sup: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t, s.sup_norm)).collect();
    let mut flags = Vec::new();
    let window: Vec<(f64, f64)> = sup.iter().copied().filter(|(t, _)| *t >= lo && *t <= hi).collect();
    if !non_increasing(&window, 0.01) {
        flags.push("sup_norm".to_string());
    }
    if fs.non_cauchy {
        flags.push("cauchy_residuals".to_string());
    }
    if !non_increasing(&profile, 0.05) {
        flags.push("profile_errors".to_string());
    }
    if !non_increasing(&free_errs, 0.05) {
        flags.push("free_state_errors".to_string());
    }
    Ok(AsymptoticsReport {
        times: traj.times(),
        sup_norms: sup,
        decay,
        cauchy_fit: fs.fit,
        cauchy_residuals: fs.cauchy,
        profile_fit: fit_power_law(&profile, lo, hi).ok(),
        profile_errors: profile,
        free_state_fit: fit_power_law(&free_errs, lo, hi).ok(),
        free_state_errors: free_errs,
        monotonicity_flags: flags,
        w_snapshots: traj.samples.iter().map(|s| (s.t, s.w.clone())).collect(),
        w_final: fs.w_final,
    })
}
