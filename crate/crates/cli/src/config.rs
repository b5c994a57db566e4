//! Run configuration: a TOML file with `problem`, `grids`, `evolution`,
//! `verify`, `output` and optional `line` tables.

use std::path::{Path, PathBuf};

use halfline::evolve::{log_spaced_times, NonlinearForm, NonlinearitySpec};
use halfline::potential::BuiltinParams;
use halfline::spectral::{FieldState, TransformOptions};
use halfline::{BoundaryPair, ComplexMatrix, PotentialSpec, UniformGrid, C64};
use serde::{Deserialize, Serialize};

/// Problems with the configuration itself; always exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub grids: GridConfig,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub line: Option<LineConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub potential: PotentialConfig,
    /// Not needed by `line`, which carries its own transmission condition.
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub nonlinearity: Option<NonlinearityConfig>,
    #[serde(default)]
    pub initial: InitialConfig,
}

/// Exactly one of `bundled`, `shape` or `csv`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub bundled: Option<String>,
    /// `zero`, `well`, `barrier`, `exponential`, `gaussian`.
    pub shape: Option<String>,
    pub csv: Option<PathBuf>,
    pub dim: Option<usize>,
    pub strength: Option<f64>,
    pub length: Option<f64>,
    pub center: Option<f64>,
    pub matrix: Option<Vec<Vec<Entry>>>,
    pub x_max: Option<f64>,
}

/// Either `theta = [..]` or the matrices `A`, `B`. `dirichlet`/`neumann`
/// are shorthands taking the dimension.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub theta: Option<Vec<f64>>,
    #[serde(rename = "A")]
    pub a: Option<Vec<Vec<Entry>>>,
    #[serde(rename = "B")]
    pub b: Option<Vec<Vec<Entry>>>,
    pub dirichlet: Option<usize>,
    pub neumann: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub alpha: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    /// `λ diag(c_j |u_j|^α)` instead of `λ|u|^α`.
    pub diagonal: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `ε e^{-x²/2w²}(A + xB)d`, which satisfies the boundary condition for
    /// every admissible pair.
    #[default]
    Adapted,
    /// `ε e^{-(x-c)²/2w²} e^{ipx} d`, compatible only up to its tail at 0.
    Packet,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub profile: Profile,
    #[serde(default = "initial_amplitude")]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default)]
    pub momentum: f64,
    /// Component vector `d`; the first unit vector when absent.
    pub direction: Option<Vec<Entry>>,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { profile: Profile::Adapted, amplitude: initial_amplitude(), width: 1.0, center: 0.0, momentum: 0.0, direction: None }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// End of the x-grid for fields.
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    /// Step of the x-grid for fields.
    #[serde(default = "default_dx")]
    pub dx: f64,
    /// Step of the Volterra solve for the Jost function.
    #[serde(default = "default_h")]
    pub h: f64,
    /// Scattering output starts here; the transform always uses `[0, k_max]`.
    #[serde(default)]
    pub k_min: f64,
    #[serde(default = "default_k_max")]
    pub k_max: f64,
    #[serde(default = "default_dk")]
    pub dk: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { x_max: default_x_max(), dx: default_dx(), h: default_h(), k_min: 0.0, k_max: default_k_max(), dk: default_dk() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Start of the log-spaced sample times and of the fit windows.
    #[serde(default = "default_a")]
    pub a: f64,
    pub sample_times: Option<Vec<f64>>,
    pub samples_per_octave: Option<usize>,
    #[serde(default = "default_growth_limit")]
    pub growth_limit: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            t_end: default_t_end(),
            a: default_a(),
            sample_times: None,
            samples_per_octave: None,
            growth_limit: default_growth_limit(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Decay,
    FinalState,
    Profile,
    FreeState,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Decay => "decay",
            Check::FinalState => "final-state",
            Check::Profile => "profile",
            Check::FreeState => "free-state",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "all_checks")]
    pub checks: Vec<Check>,
    /// `[lo, hi]`; defaults to `[a, t_end]`.
    pub fit_window: Option<[f64; 2]>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { checks: all_checks(), fit_window: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: default_directory(), formats: all_formats() }
    }
}

/// Line problem with the problem potential on both sides and a δ interaction
/// `Λ·I` at the origin, unless `A`, `B` (both `2n×2n`) are given.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    #[serde(default = "one")]
    pub strength: f64,
    #[serde(rename = "A")]
    pub a: Option<Vec<Vec<Entry>>>,
    #[serde(rename = "B")]
    pub b: Option<Vec<Vec<Entry>>>,
    /// Scalar δ strengths compared against the closed-form line scattering.
    #[serde(default = "default_scatter_strengths")]
    pub scatter_strengths: Vec<f64>,
    #[serde(default = "default_line_k_max")]
    pub scatter_k_max: f64,
    #[serde(default = "default_dk")]
    pub scatter_dk: f64,
}

impl Default for LineConfig {
    fn default() -> Self {
        Self {
            strength: 1.0,
            a: None,
            b: None,
            scatter_strengths: default_scatter_strengths(),
            scatter_k_max: default_line_k_max(),
            scatter_dk: default_dk(),
        }
    }
}

/// A matrix entry: a number or a complex literal such as `"1.5-2i"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Int(i64),
    Real(f64),
    Text(String),
}

impl Entry {
    pub fn value(&self) -> Result<C64, ConfigError> {
        match self {
            Entry::Int(v) => Ok(C64::new(*v as f64, 0.0)),
            Entry::Real(v) => Ok(C64::new(*v, 0.0)),
            Entry::Text(s) => parse_complex(s),
        }
    }
}

/// Parse `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i` (spaces ignored).
pub fn parse_complex(text: &str) -> Result<C64, ConfigError> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || ConfigError(format!("cannot parse complex literal '{text}'"));
    if s.is_empty() {
        return Err(err());
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| err());
    };
    // split at the last sign that is not leading and not an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&j| (bytes[j] == b'+' || bytes[j] == b'-') && !matches!(bytes[j - 1], b'e' | b'E'));
    let (re_part, im_part) = match split {
        Some(j) => (&body[..j], &body[j..]),
        None => ("", body),
    };
    let im = match im_part {
        "" | "+" => 1.0,
        "-" => -1.0,
        t => t.parse::<f64>().map_err(|_| err())?,
    };
    let re = if re_part.is_empty() { 0.0 } else { re_part.parse::<f64>().map_err(|_| err())? };
    Ok(C64::new(re, im))
}

fn matrix(rows: &[Vec<Entry>], what: &str) -> Result<ComplexMatrix, ConfigError> {
    let parsed: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(Entry::value).collect()).collect::<Result<_, _>>()?;
    ComplexMatrix::from_rows(&parsed).map_err(|e| ConfigError(format!("{what}: {e}")))
}

fn one() -> f64 {
    1.0
}
fn initial_amplitude() -> f64 {
    0.05
}
fn default_x_max() -> f64 {
    40.0
}
fn default_dx() -> f64 {
    0.05
}
fn default_h() -> f64 {
    0.005
}
fn default_k_max() -> f64 {
    10.0
}
fn default_dk() -> f64 {
    0.01
}
fn default_dt() -> f64 {
    0.01
}
fn default_t_end() -> f64 {
    10.0
}
fn default_a() -> f64 {
    2.0
}
fn default_growth_limit() -> f64 {
    10.0
}
fn default_directory() -> PathBuf {
    PathBuf::from("out")
}
fn all_checks() -> Vec<Check> {
    vec![Check::Decay, Check::FinalState, Check::Profile, Check::FreeState]
}
fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}
fn default_scatter_strengths() -> Vec<f64> {
    vec![0.0, 1.0, 4.0]
}
fn default_line_k_max() -> f64 {
    30.0
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        // relative CSV paths are relative to the config file
        if let (Some(csv), Some(dir)) = (cfg.problem.potential.csv.as_mut(), path.parent()) {
            if csv.is_relative() {
                *csv = dir.join(&*csv);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError(format!("parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The invariants that can be checked without building anything.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grids;
        for (name, v) in [("x_max", g.x_max), ("dx", g.dx), ("h", g.h), ("k_max", g.k_max), ("dk", g.dk)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("grids.{name} must be positive, got {v}"));
            }
        }
        if !(g.k_min >= 0.0 && g.k_min < g.k_max) {
            return bad(format!("grids.k_min must lie in [0, k_max), got {}", g.k_min));
        }
        if 2.0 * g.k_max * g.h >= 0.5 {
            return bad(format!("grid guard violated: 2·k_max·h = {} must be below 0.5", 2.0 * g.k_max * g.h));
        }
        let e = &self.evolution;
        if !(e.dt > 0.0 && e.dt.is_finite()) {
            return bad(format!("evolution.dt must be positive, got {}", e.dt));
        }
        if !(e.a > 0.0 && e.t_end > e.a && e.t_end.is_finite()) {
            return bad(format!("need t_end > a > 0, got a = {}, t_end = {}", e.a, e.t_end));
        }
        if !(e.growth_limit > 1.0) {
            return bad("evolution.growth_limit must exceed 1");
        }
        if e.samples_per_octave == Some(0) {
            return bad("evolution.samples_per_octave must be positive");
        }
        if let Some([lo, hi]) = self.verify.fit_window {
            if !(lo > 0.0 && hi > lo) {
                return bad(format!("verify.fit_window must satisfy 0 < lo < hi, got [{lo}, {hi}]"));
            }
        }
        let p = &self.problem.potential;
        let sources = [p.bundled.is_some(), p.shape.is_some(), p.csv.is_some()].iter().filter(|&&b| b).count();
        if sources != 1 {
            return bad("problem.potential needs exactly one of 'bundled', 'shape' or 'csv'");
        }
        let b = &self.problem.boundary;
        let forms = [b.theta.is_some(), b.a.is_some() || b.b.is_some(), b.dirichlet.is_some(), b.neumann.is_some()]
            .iter()
            .filter(|&&x| x)
            .count();
        if forms > 1 {
            return bad("problem.boundary takes only one of 'theta', 'A'/'B', 'dirichlet' or 'neumann'");
        }
        let i = &self.problem.initial;
        if !(i.width > 0.0) || !i.amplitude.is_finite() {
            return bad("problem.initial needs a positive width and a finite amplitude");
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<PotentialSpec, ConfigError> {
        let p = &self.problem.potential;
        let lift = |r: halfline::Result<PotentialSpec>| r.map_err(|e| ConfigError(format!("problem.potential: {e}")));
        let v = if let Some(name) = &p.bundled {
            lift(PotentialSpec::bundled(name))?
        } else if let Some(path) = &p.csv {
            let x_max = p.x_max.ok_or_else(|| ConfigError("problem.potential.x_max is required with 'csv'".into()))?;
            lift(PotentialSpec::from_csv(path, x_max))?
        } else {
            let m = p.matrix.as_ref().map(|rows| matrix(rows, "problem.potential.matrix")).transpose()?;
            let dim = p.dim.or(m.as_ref().map(ComplexMatrix::dim)).unwrap_or(1);
            let defaults = BuiltinParams::default();
            let params = BuiltinParams {
                dim,
                strength: p.strength.unwrap_or(defaults.strength),
                length: p.length.unwrap_or(defaults.length),
                center: p.center.unwrap_or(defaults.center),
                matrix: m,
                x_max: p.x_max.unwrap_or(defaults.x_max),
            };
            lift(PotentialSpec::builtin(p.shape.as_deref().unwrap_or("zero"), &params))?
        };
        Ok(match (p.x_max, &p.csv) {
            (Some(x), None) => v.with_x_max(x),
            _ => v,
        })
    }

    pub fn boundary(&self) -> Result<BoundaryPair, ConfigError> {
        let b = &self.problem.boundary;
        let lift = |r: halfline::Result<BoundaryPair>| r.map_err(|e| ConfigError(format!("problem.boundary: {e}")));
        if let Some(th) = &b.theta {
            return lift(BoundaryPair::from_angles(th));
        }
        if let Some(n) = b.dirichlet {
            return if n >= 1 { Ok(BoundaryPair::dirichlet(n)) } else { bad("problem.boundary.dirichlet must be positive") };
        }
        if let Some(n) = b.neumann {
            return if n >= 1 { Ok(BoundaryPair::neumann(n)) } else { bad("problem.boundary.neumann must be positive") };
        }
        match (&b.a, &b.b) {
            (Some(a), Some(bm)) => lift(BoundaryPair::validate(matrix(a, "problem.boundary.A")?, matrix(bm, "problem.boundary.B")?)),
            (None, None) => bad("problem.boundary is missing"),
            _ => bad("problem.boundary needs both 'A' and 'B'"),
        }
    }

    pub fn nonlinearity(&self) -> Result<NonlinearitySpec, ConfigError> {
        let Some(n) = &self.problem.nonlinearity else {
            return Ok(NonlinearitySpec::zero());
        };
        let form = match &n.diagonal {
            Some(c) => NonlinearForm::DiagonalScalar(c.clone()),
            None => NonlinearForm::ScalarPower,
        };
        NonlinearitySpec::new(n.alpha, n.lambda, form).map_err(|e| ConfigError(format!("problem.nonlinearity: {e}")))
    }

    pub fn xgrid(&self) -> Result<UniformGrid, ConfigError> {
        UniformGrid::span(0.0, self.grids.x_max, self.grids.dx).map_err(|e| ConfigError(format!("grids: {e}")))
    }

    pub fn kgrid(&self) -> Result<UniformGrid, ConfigError> {
        UniformGrid::span(0.0, self.grids.k_max, self.grids.dk).map_err(|e| ConfigError(format!("grids: {e}")))
    }

    pub fn transform_options(&self) -> TransformOptions {
        let mut opts = TransformOptions::default();
        opts.jost.h = self.grids.h;
        opts
    }

    /// Initial data on `xgrid` for the pair `bp`.
    pub fn initial(&self, bp: &BoundaryPair, xgrid: UniformGrid) -> Result<FieldState, ConfigError> {
        let i = &self.problem.initial;
        let n = bp.dim();
        let d: Vec<C64> = match &i.direction {
            Some(v) => v.iter().map(Entry::value).collect::<Result<_, _>>()?,
            None => (0..n).map(|j| C64::new(if j == 0 { 1.0 } else { 0.0 }, 0.0)).collect(),
        };
        if d.len() != n {
            return bad(format!("problem.initial.direction has {} entries, the system has {n}", d.len()));
        }
        let (ad, bd) = (bp.a().mul_vec(&d), bp.b().mul_vec(&d));
        let (eps, w, c, p, profile) = (i.amplitude, i.width, i.center, i.momentum, i.profile);
        FieldState::from_fn(0.0, xgrid, n, |x| match profile {
            Profile::Adapted => {
                let g = eps * (-x * x / (2.0 * w * w)).exp();
                (0..n).map(|j| (ad[j] + bd[j] * x) * g).collect()
            }
            Profile::Packet => {
                let g = C64::from_polar(eps * (-(x - c) * (x - c) / (2.0 * w * w)).exp(), p * x);
                d.iter().map(|dj| dj * g).collect()
            }
        })
        .map_err(|e| ConfigError(format!("problem.initial: {e}")))
    }

    /// Sample times for `evolve`: explicit, log-spaced from `a`, or every 0.5.
    pub fn sample_times(&self) -> Vec<f64> {
        let e = &self.evolution;
        if let Some(t) = &e.sample_times {
            return t.clone();
        }
        match e.samples_per_octave {
            Some(per) => log_spaced_times(e.a, e.t_end, per),
            None => Vec::new(),
        }
    }

    /// Sample times for `verify`: always log-spaced from `a`.
    pub fn verify_sample_times(&self) -> Vec<f64> {
        let e = &self.evolution;
        match &e.sample_times {
            Some(t) => t.clone(),
            None => log_spaced_times(e.a, e.t_end, e.samples_per_octave.unwrap_or(6)),
        }
    }

    pub fn fit_window(&self) -> (f64, f64) {
        self.verify.fit_window.map(|[lo, hi]| (lo, hi)).unwrap_or((self.evolution.a, self.evolution.t_end))
    }

    pub fn writes(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }

    pub fn line_matrices(&self) -> Result<Option<(ComplexMatrix, ComplexMatrix)>, ConfigError> {
        let Some(l) = &self.line else { return Ok(None) };
        match (&l.a, &l.b) {
            (Some(a), Some(b)) => Ok(Some((matrix(a, "line.A")?, matrix(b, "line.B")?))),
            (None, None) => Ok(None),
            _ => bad("line needs both 'A' and 'B' or neither"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[problem.potential]\nbundled = \"barrier\"\n[problem.boundary]\ndirichlet = 1\n";

    #[test]
    fn complex_literals() {
        let cases = [
            ("1", C64::new(1.0, 0.0)),
            ("2i", C64::new(0.0, 2.0)),
            ("-i", C64::new(0.0, -1.0)),
            ("1.5-2i", C64::new(1.5, -2.0)),
            ("0.5 + 0.5i", C64::new(0.5, 0.5)),
            ("1e-3+2e+1i", C64::new(1e-3, 20.0)),
            ("-3-i", C64::new(-3.0, -1.0)),
        ];
        for (s, want) in cases {
            assert_eq!(parse_complex(s).unwrap(), want, "{s}");
        }
        assert!(parse_complex("1+2j").is_err());
        assert!(parse_complex("").is_err());
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.grids.h, 0.005);
        assert_eq!(cfg.boundary().unwrap().dirichlet_count(), 1);
        assert!(cfg.nonlinearity().unwrap().is_zero());
        assert_eq!(cfg.fit_window(), (2.0, 10.0));
    }

    #[test]
    fn rejects_unknown_keys_and_guard() {
        assert!(RunConfig::parse(&format!("{MINIMAL}[grids]\nbogus = 1\n")).is_err());
        assert!(RunConfig::parse(&format!("{MINIMAL}[grids]\nk_max = 60\n")).is_err());
        assert!(RunConfig::parse(&format!("{MINIMAL}[evolution]\na = 5\nt_end = 4\n")).is_err());
        assert!(RunConfig::parse(&format!("{MINIMAL}[evolution]\ndt = 0\n")).is_err());
    }

    #[test]
    fn matrix_boundary() {
        let text = "[problem.potential]\nshape = \"zero\"\ndim = 2\n[problem.boundary]\nA = [[\"1\", 0], [0, 0]]\nB = [[0, 0], [0, \"1+0i\"]]\n";
        let cfg = RunConfig::parse(text).unwrap();
        let bp = cfg.boundary().unwrap();
        assert_eq!(bp.dirichlet_count(), 1);
    }

    #[test]
    fn adapted_initial_data_satisfies_the_condition() {
        let text = "[problem.potential]\nshape = \"zero\"\n[problem.boundary]\ntheta = [2.0]\n";
        let cfg = RunConfig::parse(text).unwrap();
        let bp = cfg.boundary().unwrap();
        let psi = cfg.initial(&bp, UniformGrid::span(0.0, 10.0, 0.01).unwrap()).unwrap();
        assert!(psi.boundary_residual(&bp) < 1e-6);
    }
}
