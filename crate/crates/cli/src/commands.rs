use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use halfline::asympt::{final_state, fit_power_law, verify_decay, verify_free_state, verify_profile, PowerFit};
use halfline::evolve::{evolve_nls, EvolveOptions, GrowthReport, NonlinearitySpec, Trajectory};
use halfline::jost::{bound_state_scan, scattering_matrix, solve_m, JostOptions};
use halfline::linemap::{
    compare_classification, extend_parity, fold, jump_residual, parity_reduction, to_halfline, unfold, verify_line_scattering,
    ClassificationComparison, LineProblem, LineScatteringReport, Parity,
};
use halfline::spectral::{default_scan_range, free_transform, SpectralTransform, TransformSummary};
use halfline::{ComplexMatrix, UniformGrid, C64};
use serde::Serialize;

use crate::config::{Check, ConfigError, Format, RunConfig};

/// Decay exponent of `‖u(t)‖_∞` and how far the fit may stray from it.
const DECAY_EXPONENT: f64 = -0.5;
const DECAY_TOLERANCE: f64 = 0.05;
/// Upper bounds on the fitted exponents of the remaining large-time tables.
const CAUCHY_BOUND: f64 = -0.3;
const FREE_STATE_BOUND: f64 = -0.2;
const PROFILE_BOUND: f64 = -0.6;
/// Line checks.
const LINE_SCATTERING_TOL: f64 = 1e-6;
const LINE_UNITARITY_TOL: f64 = 1e-8;
const FOLD_TOL: f64 = 1e-4;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Lib(halfline::Error),
    Io(String),
    /// The run finished but a check failed.
    Check(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Check(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Lib(e) => e.category(),
            CliError::Io(_) => "io",
            CliError::Check(_) => "check",
        }
    }

    pub fn exit_code(&self) -> u8 {
        if self.category() == "config" {
            2
        } else {
            1
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<halfline::Error> for CliError {
    fn from(e: halfline::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn complex_columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).flat_map(|j| [format!("re_{prefix}{j}"), format!("im_{prefix}{j}")]).collect()
}

fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(num).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn flat(values: &[C64]) -> Vec<f64> {
    values.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn matrix_json(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    let n = m.dim();
    (0..n).map(|r| (0..n).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}

fn status(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

fn check_dims(cfg: &RunConfig) -> Result<(halfline::PotentialSpec, halfline::BoundaryPair), CliError> {
    let v = cfg.potential()?;
    let bp = cfg.boundary()?;
    if v.dim() != bp.dim() {
        return Err(CliError::Config(format!("potential is {0}x{0} but the boundary pair is {1}x{1}", v.dim(), bp.dim())));
    }
    Ok((v, bp))
}

#[derive(Serialize)]
struct ScatterReport {
    dim: usize,
    classification: halfline::jost::Classification,
    s0: Vec<Vec<[f64; 2]>>,
    s0_eigenvalues: Vec<f64>,
    s_inf: Vec<Vec<[f64; 2]>>,
    unitarity_residual: f64,
    extrapolation_residual: f64,
    scan_kappa_max: f64,
    scan_threshold: f64,
    bound_state_kappas: Vec<f64>,
    bound_state_energies: Vec<f64>,
}

pub fn cmd_scatter(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let (v, bp) = check_dims(cfg)?;
    let kg = cfg.kgrid()?;
    let opts = JostOptions { h: cfg.grids.h, k_derivative: false, ..JostOptions::default() };
    let jt = solve_m(&v, &kg, &opts)?;
    let sd = scattering_matrix(&jt, &bp)?;
    let kappa_max = default_scan_range(&v, &bp, cfg.grids.h);
    let scan = bound_state_scan(&v, &bp, kappa_max, 400, &opts)?;
    let n = v.dim();

    if cfg.writes(Format::Csv) {
        let mut header = vec!["k".to_string()];
        for r in 1..=n {
            for c in 1..=n {
                header.push(format!("re_s{r}{c}"));
                header.push(format!("im_s{r}{c}"));
            }
        }
        header.push("unitarity_defect".into());
        let ident = ComplexMatrix::identity(n);
        let rows = (0..kg.count).filter(|&i| kg.point(i) >= cfg.grids.k_min - 1e-12).map(|i| {
            let s = &sd.s[i];
            let mut row = vec![kg.point(i)];
            row.extend(flat(s.as_slice()));
            row.push((&(s * &s.adjoint()) - &ident).max_abs());
            row
        });
        write_csv(&out.join("scattering.csv"), &header, rows)?;
        write_csv(
            &out.join("bound_scan.csv"),
            &["kappa".into(), "sigma_min".into()],
            scan.kappa_grid.iter().zip(&scan.sigma_min).map(|(k, s)| vec![*k, *s]),
        )?;
    }
    let report = ScatterReport {
        dim: n,
        classification: sd.classification,
        s0: matrix_json(&sd.s0),
        s0_eigenvalues: sd.s0_eigenvalues.clone(),
        s_inf: matrix_json(&sd.s_inf),
        unitarity_residual: sd.unitarity_residual,
        extrapolation_residual: sd.extrapolation_residual,
        scan_kappa_max: kappa_max,
        scan_threshold: scan.threshold,
        bound_state_energies: scan.kappas.iter().map(|k| -k * k).collect(),
        bound_state_kappas: scan.kappas,
    };
    if cfg.writes(Format::Json) {
        write_json(&out.join("scatter.json"), &report)?;
    }
    println!("classification      {:?}", report.classification);
    println!("unitarity residual  {:.3e}", report.unitarity_residual);
    println!("S(0) eigenvalues    {:?}", report.s0_eigenvalues);
    println!("bound states        {}", report.bound_state_kappas.len());
    Ok(())
}

/// Transform, nonlinearity and initial data shared by `evolve` and `verify`.
fn evolution_setup(cfg: &RunConfig) -> Result<(SpectralTransform, NonlinearitySpec, halfline::spectral::FieldState), CliError> {
    let (v, bp) = check_dims(cfg)?;
    let nl = cfg.nonlinearity()?;
    let xg = cfg.xgrid()?;
    let st = SpectralTransform::build(&v, &bp, &xg, &cfg.kgrid()?, &cfg.transform_options())?;
    let u0 = cfg.initial(&bp, xg)?;
    Ok((st, nl, u0))
}

fn growth(nl: &NonlinearitySpec, dim: usize) -> Result<Option<GrowthReport>, CliError> {
    if nl.is_zero() {
        return Ok(None);
    }
    Ok(Some(nl.growth_check(dim)?))
}

fn write_trajectory(cfg: &RunConfig, out: &Path, traj: &Trajectory) -> Result<(), CliError> {
    if cfg.writes(Format::Csv) {
        traj.write_csv(&out.join("trajectory.csv")).map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvolveReport {
    transform: TransformSummary,
    growth: Option<GrowthReport>,
    steps: usize,
    max_boundary_residual: f64,
    max_growth: f64,
    samples: Vec<halfline::evolve::SampleSummary>,
}

pub fn cmd_evolve(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let (st, nl, u0) = evolution_setup(cfg)?;
    let growth = growth(&nl, st.dim())?;
    let e = &cfg.evolution;
    let opts = EvolveOptions { t_end: e.t_end, dt: e.dt, sample_times: cfg.sample_times(), growth_limit: e.growth_limit };
    let traj = evolve_nls(&st, &nl, &u0, &opts)?;
    write_trajectory(cfg, out, &traj)?;
    let report = EvolveReport {
        transform: st.summary(),
        growth,
        steps: traj.steps,
        max_boundary_residual: traj.max_boundary_residual,
        max_growth: traj.max_growth,
        samples: traj.summary(),
    };
    if cfg.writes(Format::Json) {
        write_json(&out.join("evolve.json"), &report)?;
    }
    let first = &traj.samples[0];
    let last = traj.samples.last().unwrap_or(first);
    println!("steps               {}", traj.steps);
    println!("L2 norm             {:.12} -> {:.12}", first.l2_norm, last.l2_norm);
    println!("sup norm            {:.6e} -> {:.6e}", first.sup_norm, last.sup_norm);
    println!("boundary residual   {:.3e}", traj.max_boundary_residual);
    println!("max H1 growth       {:.6}", traj.max_growth);
    Ok(())
}

#[derive(Serialize)]
struct CheckOutcome {
    check: Check,
    exponent: f64,
    band: f64,
    /// `[lo, hi]` the exponent had to fall in.
    accepted: [f64; 2],
    passed: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    transform: TransformSummary,
    growth: Option<GrowthReport>,
    fit_window: [f64; 2],
    steps: usize,
    max_boundary_residual: f64,
    max_growth: f64,
    outcomes: Vec<CheckOutcome>,
    decay: Option<PowerFit>,
    cauchy_fit: Option<PowerFit>,
    profile_fit: Option<PowerFit>,
    free_state_fit: Option<PowerFit>,
    sup_norms: Vec<(f64, f64)>,
    cauchy_residuals: Vec<(f64, f64)>,
    profile_errors: Vec<(f64, f64)>,
    free_state_errors: Vec<(f64, f64)>,
}

fn outcome(check: Check, fit: &Option<PowerFit>, accepted: [f64; 2]) -> CheckOutcome {
    let (exponent, band) = fit.map_or((f64::NAN, f64::NAN), |f| (f.exponent, f.band));
    CheckOutcome { check, exponent, band, accepted, passed: exponent >= accepted[0] && exponent <= accepted[1] }
}

fn pairs_csv(path: &Path, name: &str, table: &[(f64, f64)]) -> Result<(), CliError> {
    write_csv(path, &["t".into(), name.into()], table.iter().map(|&(t, y)| vec![t, y]))
}

pub fn cmd_verify(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let (st, nl, u0) = evolution_setup(cfg)?;
    let growth = growth(&nl, st.dim())?;
    let e = &cfg.evolution;
    let opts = EvolveOptions { t_end: e.t_end, dt: e.dt, sample_times: cfg.verify_sample_times(), growth_limit: e.growth_limit };
    let traj = evolve_nls(&st, &nl, &u0, &opts)?;
    write_trajectory(cfg, out, &traj)?;
    let (lo, hi) = cfg.fit_window();
    let wants = |c: Check| cfg.verify.checks.contains(&c);

    let mut report = VerifyReport {
        transform: st.summary(),
        growth,
        fit_window: [lo, hi],
        steps: traj.steps,
        max_boundary_residual: traj.max_boundary_residual,
        max_growth: traj.max_growth,
        outcomes: Vec::new(),
        decay: None,
        cauchy_fit: None,
        profile_fit: None,
        free_state_fit: None,
        sup_norms: traj.samples.iter().map(|s| (s.t, s.sup_norm)).collect(),
        cauchy_residuals: Vec::new(),
        profile_errors: Vec::new(),
        free_state_errors: Vec::new(),
    };
    if wants(Check::Decay) {
        report.decay = Some(verify_decay(&traj, lo, hi)?);
        let band = [DECAY_EXPONENT - DECAY_TOLERANCE, DECAY_EXPONENT + DECAY_TOLERANCE];
        report.outcomes.push(outcome(Check::Decay, &report.decay, band));
    }
    if wants(Check::FinalState) || wants(Check::Profile) || wants(Check::FreeState) {
        let fs = final_state(&st, &traj, lo, hi)?;
        if wants(Check::FinalState) {
            report.cauchy_fit = fs.fit;
            report.cauchy_residuals = fs.cauchy.clone();
            report.outcomes.push(outcome(Check::FinalState, &fs.fit, [f64::NEG_INFINITY, CAUCHY_BOUND]));
        }
        if wants(Check::Profile) {
            report.profile_errors = verify_profile(&st, &traj, &fs.w_final, lo, hi)?;
            report.profile_fit = fit_power_law(&report.profile_errors, lo, hi).ok();
            report.outcomes.push(outcome(Check::Profile, &report.profile_fit, [f64::NEG_INFINITY, PROFILE_BOUND]));
        }
        if wants(Check::FreeState) {
            let free = free_transform(&st.boundary, st.xgrid(), st.kgrid(), &cfg.transform_options())?;
            report.free_state_errors = verify_free_state(&free, &traj, &fs.w_final, lo, hi)?;
            report.free_state_fit = fit_power_law(&report.free_state_errors, lo, hi).ok();
            report.outcomes.push(outcome(Check::FreeState, &report.free_state_fit, [f64::NEG_INFINITY, FREE_STATE_BOUND]));
        }
        if cfg.writes(Format::Csv) {
            let kg = st.kgrid();
            let mut header = vec!["k".to_string()];
            header.extend(complex_columns("w", st.dim()));
            let n = st.dim();
            let rows = (0..kg.count).map(|i| {
                let mut row = vec![kg.point(i)];
                row.extend(flat(&fs.w_final[i * n..(i + 1) * n]));
                row
            });
            write_csv(&out.join("w_final.csv"), &header, rows)?;
        }
    }
    if cfg.writes(Format::Csv) {
        let norms = traj.samples.iter().map(|s| vec![s.t, s.sup_norm, s.l2_norm, s.h1_norm, s.boundary_residual]);
        write_csv(
            &out.join("norms.csv"),
            &["t", "sup_norm", "l2_norm", "h1_norm", "boundary_residual"].map(String::from),
            norms,
        )?;
        pairs_csv(&out.join("cauchy.csv"), "cauchy_residual", &report.cauchy_residuals)?;
        pairs_csv(&out.join("profile.csv"), "profile_error", &report.profile_errors)?;
        pairs_csv(&out.join("free_state.csv"), "free_state_error", &report.free_state_errors)?;
    }
    if cfg.writes(Format::Json) {
        write_json(&out.join("report.json"), &report)?;
    }
    for o in &report.outcomes {
        println!(
            "{} {:<12} exponent {:+.4} ± {:.4}, accepted [{}, {}]",
            status(o.passed),
            o.check.name(),
            o.exponent,
            o.band,
            o.accepted[0],
            o.accepted[1]
        );
    }
    let failed = report.outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(CliError::Check(format!("{failed} large-time check(s) failed")));
    }
    Ok(())
}

#[derive(Serialize)]
struct ParityRun {
    parity: Parity,
    /// `‖unfold(full run) - parity extension of the reduced run‖` at `t_end`.
    discrepancy: f64,
    norm: f64,
    jump_residual: f64,
    boundary_residual: f64,
    passed: bool,
}

#[derive(Serialize)]
struct LineReport {
    scattering: Vec<LineScatteringSummary>,
    parity_runs: Vec<ParityRun>,
    /// Parities for which the transmission condition does not reduce.
    skipped: Vec<(Parity, String)>,
    /// Computed for `Q` with no point interaction.
    classification: ClassificationComparison,
}

#[derive(Serialize)]
struct LineScatteringSummary {
    lambda: f64,
    max_transmission_error: f64,
    max_reflection_error: f64,
    max_unitarity_defect: f64,
    passed: bool,
}

pub fn cmd_line(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let defaults = Default::default();
    let line = cfg.line.as_ref().unwrap_or(&defaults);
    let q = cfg.potential()?;
    let n = q.dim();
    let nl = cfg.nonlinearity()?;
    let lp = match cfg.line_matrices()? {
        Some((a, b)) => LineProblem::new(q.clone(), q.clone(), a, b, nl.clone(), nl.clone())?,
        None => LineProblem::delta(q.clone(), &ComplexMatrix::scalar(n, C64::new(line.strength, 0.0)))?.with_nonlinearity(nl.clone(), nl),
    };

    // closed-form δ scattering
    let skg = UniformGrid::span(0.0, line.scatter_k_max, line.scatter_dk).map_err(|e| CliError::Config(format!("line: {e}")))?;
    let reports: Vec<LineScatteringReport> =
        line.scatter_strengths.iter().map(|&l| verify_line_scattering(l, &skg)).collect::<Result<_, _>>()?;
    if cfg.writes(Format::Csv) {
        let header = ["lambda", "k", "re_t", "im_t", "re_r", "im_r", "transmission_error", "reflection_error", "unitarity_defect"]
            .map(String::from);
        let rows = reports.iter().flat_map(|r| {
            r.rows.iter().map(move |row| {
                vec![
                    r.lambda,
                    row.k,
                    row.transmission[0],
                    row.transmission[1],
                    row.reflection[0],
                    row.reflection[1],
                    row.transmission_error,
                    row.reflection_error,
                    row.unitarity_defect,
                ]
            })
        });
        write_csv(&out.join("line_scattering.csv"), &header, rows)?;
    }
    let scattering: Vec<LineScatteringSummary> = reports
        .iter()
        .map(|r| LineScatteringSummary {
            lambda: r.lambda,
            max_transmission_error: r.max_transmission_error,
            max_reflection_error: r.max_reflection_error,
            max_unitarity_defect: r.max_unitarity_defect,
            passed: r.max_transmission_error.max(r.max_reflection_error) < LINE_SCATTERING_TOL
                && r.max_unitarity_defect < LINE_UNITARITY_TOL,
        })
        .collect();

    // fold, solve, unfold against the parity-reduced half-line problems
    let xg = cfg.xgrid()?;
    let kg = cfg.kgrid()?;
    let topts = cfg.transform_options();
    let (v2, bp2, nl2) = to_halfline(&lp)?;
    let full = SpectralTransform::build(&v2, &bp2, &xg, &kg, &topts)?;
    let e = &cfg.evolution;
    let opts = EvolveOptions { t_end: e.t_end, dt: e.dt, sample_times: cfg.sample_times(), growth_limit: e.growth_limit };
    let mut parity_runs = Vec::new();
    let mut skipped = Vec::new();
    for parity in [Parity::Even, Parity::Odd] {
        let (v1, bp1, nl1) = match parity_reduction(&lp, parity) {
            Ok(r) => r,
            Err(err) if err.is_input_error() => {
                skipped.push((parity, err.to_string()));
                continue;
            }
            Err(err) => return Err(err.into()),
        };
        let reduced = SpectralTransform::build(&v1, &bp1, &xg, &kg, &topts)?;
        let phi0 = cfg.initial(&bp1, xg)?;
        let folded = fold(&extend_parity(&phi0, parity));
        let t_full = evolve_nls(&full, &nl2, &folded, &opts)?;
        let t_red = evolve_nls(&reduced, &nl1, &phi0, &opts)?;
        let unfolded = unfold(&t_full.samples.last().expect("trajectory records t_end").u)?;
        let reference = extend_parity(&t_red.samples.last().expect("trajectory records t_end").u, parity);
        let discrepancy = unfolded.l2_distance(&reference);
        if cfg.writes(Format::Csv) {
            let mut header = vec!["x".to_string()];
            header.extend(complex_columns("v", n));
            let rows = unfolded.signed_samples().into_iter().map(|(x, v)| {
                let mut row = vec![x];
                row.extend(flat(v));
                row
            });
            let name = if parity == Parity::Even { "line_even.csv" } else { "line_odd.csv" };
            write_csv(&out.join(name), &header, rows)?;
        }
        parity_runs.push(ParityRun {
            parity,
            discrepancy,
            norm: unfolded.l2_norm(),
            jump_residual: jump_residual(&lp, &unfolded),
            boundary_residual: t_full.max_boundary_residual,
            passed: discrepancy < FOLD_TOL,
        });
    }

    // the line's zero-energy class is that of Q alone, so compare against the
    // problem without a point interaction
    let plain = LineProblem::delta(q, &ComplexMatrix::zeros(n))?;
    let classification = compare_classification(&plain, &kg)?;
    let report = LineReport { scattering, parity_runs, skipped, classification };
    if cfg.writes(Format::Json) {
        write_json(&out.join("line_report.json"), &report)?;
    }
    for s in &report.scattering {
        println!(
            "{} delta {:<6} t/r error {:.3e}, unitarity {:.3e}",
            status(s.passed),
            s.lambda,
            s.max_transmission_error.max(s.max_reflection_error),
            s.max_unitarity_defect
        );
    }
    for r in &report.parity_runs {
        println!("{} {:?} fold/unfold discrepancy {:.3e}, jump residual {:.3e}", status(r.passed), r.parity, r.discrepancy, r.jump_residual);
    }
    for (p, why) in &report.skipped {
        println!("SKIP {p:?}: {why}");
    }
    let c = &report.classification;
    println!(
        "{} zero energy without point interaction: half-line {:?}, line {:?} ({} bounded)",
        status(c.consistent),
        c.halfline,
        c.line,
        c.bounded_solutions
    );
    let failed = report.scattering.iter().filter(|s| !s.passed).count()
        + report.parity_runs.iter().filter(|r| !r.passed).count()
        + usize::from(!c.consistent);
    if failed > 0 {
        return Err(CliError::Check(format!("{failed} line check(s) failed")));
    }
    Ok(())
}

pub fn cmd_selftest(out: Option<&Path>) -> Result<(), CliError> {
    let results = halfline::selftest::run();
    for r in &results {
        println!("{} {:<20} {:.3e} (tolerance {:.0e})", status(r.passed), r.name, r.value, r.tolerance);
    }
    if let Some(dir) = out {
        write_json(&dir.join("selftest.json"), &results)?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::Check(format!("{failed} self-test check(s) failed")));
    }
    Ok(())
}
