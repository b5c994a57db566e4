//! Matrix potentials on `[0, ∞)`: closed forms, tables, weighted norms and the
//! piecewise-regularity check.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::linalg::{ComplexMatrix, C64, ZERO};

pub const DEFAULT_X_MAX: f64 = 40.0;
pub const DEFAULT_H: f64 = 0.005;

/// Radial profile of a potential. Closed forms multiply a fixed Hermitian
/// matrix; piecewise and tabulated shapes carry their own matrices.
#[derive(Clone, Debug)]
pub enum Shape {
    Zero,
    /// `c·χ_[0,a)(x)·M`
    Well { strength: f64, width: f64, matrix: ComplexMatrix },
    /// `c·e^{-μx}·M`
    Exponential { strength: f64, rate: f64, matrix: ComplexMatrix },
    /// `V_ij = M_ij·e^{-μ_ij x}` with a symmetric matrix of rates.
    EntrywiseExponential { matrix: ComplexMatrix, rates: Vec<f64> },
    /// `c·exp(-((x - x0)/w)²)·M`
    Gaussian { strength: f64, center: f64, width: f64, matrix: ComplexMatrix },
    /// Constant `matrix` on `[previous end, end)`, zero beyond the last end.
    Step { pieces: Vec<(f64, ComplexMatrix)> },
    /// Linear interpolation between samples, zero beyond the last sample.
    Table { xs: Vec<f64>, values: Vec<ComplexMatrix> },
    /// `diag(V_1, V_2, ...)`
    BlockDiagonal(Vec<PotentialSpec>),
}

/// A Hermitian matrix potential truncated at `x_max`.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    dim: usize,
    shape: Shape,
    x_max: f64,
    breakpoints: Vec<f64>,
    decay_delta: Option<f64>,
}

/// Outcome of [`PotentialSpec::check_regular_decomposition`].
#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub passed: bool,
    /// Nodes where a jump was detected away from declared breakpoints.
    pub jump_nodes: Vec<f64>,
    /// `∫_{x_N}^{x_max} ⟨x⟩^{2+δ} |V'(x)| dx` by finite differences.
    pub tail_integral: f64,
    pub tail_finite: bool,
    /// `max_{x ≥ x_N} |V(x)|·⟨x⟩^{2+δ}`.
    pub tail_constant: f64,
}

fn check_hermitian(m: &ComplexMatrix, x: f64) -> Result<()> {
    let r = m.hermiticity_residual();
    if r > 1e-12 * m.max_abs().max(1.0) {
        return Err(Error::PotentialNotHermitian { x, residual: r });
    }
    Ok(())
}

fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

impl PotentialSpec {
    pub fn new(shape: Shape, x_max: f64) -> Result<Self> {
        if !(x_max > 0.0) || !x_max.is_finite() {
            return Err(Error::InvalidInput(format!("x_max must be positive, got {x_max}")));
        }
        let (dim, breakpoints) = match &shape {
            Shape::Zero => return Err(Error::InvalidInput("use PotentialSpec::zero for the zero potential".into())),
            Shape::Well { width, matrix, strength } => {
                if !(*width > 0.0) || !strength.is_finite() {
                    return Err(Error::InvalidInput(format!("well width must be positive, got {width}")));
                }
                check_hermitian(matrix, 0.0)?;
                (matrix.dim(), vec![*width])
            }
            Shape::Exponential { strength, rate, matrix } => {
                if !(*rate > 0.0) || !strength.is_finite() {
                    return Err(Error::InvalidInput(format!("decay rate must be positive, got {rate}")));
                }
                check_hermitian(matrix, 0.0)?;
                (matrix.dim(), vec![])
            }
            Shape::EntrywiseExponential { matrix, rates } => {
                let n = matrix.dim();
                if rates.len() != n * n {
                    return Err(Error::DimensionMismatch(format!("need {} rates, got {}", n * n, rates.len())));
                }
                for r in 0..n {
                    for c in 0..n {
                        let (a, b) = (rates[r * n + c], rates[c * n + r]);
                        if !(a > 0.0) || a != b {
                            return Err(Error::InvalidInput("rates must be positive and symmetric".into()));
                        }
                    }
                }
                check_hermitian(matrix, 0.0)?;
                (n, vec![])
            }
            Shape::Gaussian { strength, width, matrix, center } => {
                if !(*width > 0.0) || !strength.is_finite() || !center.is_finite() {
                    return Err(Error::InvalidInput(format!("Gaussian width must be positive, got {width}")));
                }
                check_hermitian(matrix, 0.0)?;
                (matrix.dim(), vec![])
            }
            Shape::Step { pieces } => {
                if pieces.is_empty() {
                    return Err(Error::InvalidInput("step potential needs at least one piece".into()));
                }
                let dim = pieces[0].1.dim();
                let mut prev = 0.0;
                for (end, m) in pieces {
                    if !(*end > prev) {
                        return Err(Error::InvalidInput("step ends must be increasing and positive".into()));
                    }
                    if m.dim() != dim {
                        return Err(Error::DimensionMismatch("step pieces differ in dimension".into()));
                    }
                    check_hermitian(m, prev)?;
                    prev = *end;
                }
                (dim, pieces.iter().map(|p| p.0).collect())
            }
            Shape::Table { xs, values } => {
                if xs.len() < 2 || xs.len() != values.len() {
                    return Err(Error::InvalidInput("table needs at least two rows of matching length".into()));
                }
                if xs[0] < 0.0 || xs.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidInput("table x values must be nonnegative and increasing".into()));
                }
                let dim = values[0].dim();
                for (x, m) in xs.iter().zip(values) {
                    if m.dim() != dim {
                        return Err(Error::DimensionMismatch("table rows differ in dimension".into()));
                    }
                    check_hermitian(m, *x)?;
                }
                (dim, vec![])
            }
            Shape::BlockDiagonal(blocks) => {
                if blocks.is_empty() {
                    return Err(Error::InvalidInput("block-diagonal potential needs blocks".into()));
                }
                let mut bp: Vec<f64> = blocks.iter().flat_map(|b| b.breakpoints.iter().copied()).collect();
                bp.sort_by(f64::total_cmp);
                bp.dedup();
                (blocks.iter().map(|b| b.dim).sum(), bp)
            }
        };
        Ok(Self { dim, shape, x_max, breakpoints, decay_delta: None })
    }

    pub fn zero(dim: usize) -> Self {
        assert!(dim >= 1);
        Self { dim, shape: Shape::Zero, x_max: DEFAULT_X_MAX, breakpoints: vec![], decay_delta: None }
    }

    /// Named constructor: `zero`, `well`, `exponential`, `gaussian`.
    /// `matrix` defaults to the identity of dimension `dim`.
    pub fn builtin(name: &str, params: &BuiltinParams) -> Result<Self> {
        let m = params.matrix.clone().unwrap_or_else(|| ComplexMatrix::identity(params.dim));
        let shape = match name {
            "zero" => return Ok(Self::zero(params.dim).with_x_max(params.x_max)),
            "well" | "barrier" => Shape::Well { strength: params.strength, width: params.length, matrix: m },
            "exponential" => Shape::Exponential { strength: params.strength, rate: 1.0 / params.length, matrix: m },
            "gaussian" => Shape::Gaussian { strength: params.strength, center: params.center, width: params.length, matrix: m },
            other => return Err(Error::InvalidInput(format!("unknown potential '{other}'"))),
        };
        Self::new(shape, params.x_max)
    }

    /// Potentials shipped with the library: `scalar-well`, `exp-2x2`,
    /// `step-2x2`, `barrier`.
    pub fn bundled(name: &str) -> Result<Self> {
        let c = |re: f64, im: f64| C64::new(re, im);
        match name {
            "scalar-well" => Self::new(
                Shape::Well { strength: -0.5, width: 1.5, matrix: ComplexMatrix::identity(1) },
                DEFAULT_X_MAX,
            ),
            "exp-2x2" => Self::new(
                Shape::EntrywiseExponential {
                    matrix: ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.5, -0.5)], vec![c(0.5, 0.5), c(2.0, 0.0)]])?,
                    rates: vec![1.0, 1.5, 1.5, 2.0],
                },
                DEFAULT_X_MAX,
            ),
            "step-2x2" => Self::new(
                Shape::Step {
                    pieces: vec![
                        (1.0, ComplexMatrix::from_real_rows(&[vec![1.0, 0.5], vec![0.5, -0.5]])?),
                        (2.5, ComplexMatrix::from_real_rows(&[vec![0.3, 0.0], vec![0.0, 0.8]])?),
                    ],
                },
                DEFAULT_X_MAX,
            ),
            "barrier" => Self::new(
                Shape::Exponential { strength: 1.0, rate: 1.0, matrix: ComplexMatrix::identity(1) },
                DEFAULT_X_MAX,
            ),
            other => Err(Error::InvalidInput(format!("unknown bundled potential '{other}'"))),
        }
    }

    /// Read a table from CSV with columns `x, Re V_11, Im V_11, Re V_12, ...`
    /// (row-major entries). A non-numeric first row is treated as a header.
    pub fn from_csv(path: &Path, x_max: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let nums: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            let nums = match nums {
                Ok(v) => v,
                Err(_) if row == 0 => continue,
                Err(e) => return Err(Error::InvalidInput(format!("row {}: {e}", row + 1))),
            };
            let entries = (nums.len().saturating_sub(1)) / 2;
            let n = (entries as f64).sqrt().round() as usize;
            if n == 0 || n * n != entries || nums.len() != 1 + 2 * entries {
                return Err(Error::InvalidInput(format!(
                    "row {}: expected 1 + 2n² columns, got {}",
                    row + 1,
                    nums.len()
                )));
            }
            xs.push(nums[0]);
            let e: Vec<C64> = (0..entries).map(|i| C64::new(nums[1 + 2 * i], nums[2 + 2 * i])).collect();
            values.push(ComplexMatrix::from_row_major(&e)?);
        }
        Self::new(Shape::Table { xs, values }, x_max)
    }

    pub fn block_diagonal(blocks: Vec<PotentialSpec>) -> Result<Self> {
        let x_max = blocks.iter().map(|b| b.x_max).fold(0.0, f64::max);
        Self::new(Shape::BlockDiagonal(blocks), x_max)
    }

    pub fn with_x_max(mut self, x_max: f64) -> Self {
        self.x_max = x_max;
        self
    }

    /// Replace the declared fragmentation points.
    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self
    }

    pub fn with_decay_delta(mut self, delta: f64) -> Self {
        self.decay_delta = Some(delta);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn decay_delta(&self) -> Option<f64> {
        self.decay_delta
    }

    pub fn is_zero(&self) -> bool {
        match &self.shape {
            Shape::Zero => true,
            Shape::BlockDiagonal(b) => b.iter().all(|p| p.is_zero()),
            _ => false,
        }
    }

    /// `V(x)`, with the mean of the one-sided limits at jumps and zero beyond
    /// `x_max`.
    pub fn value(&self, x: f64) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim);
        self.value_into(x, out.as_mut_slice());
        out
    }

    /// Row-major `V(x)` written into `out` (length `dim²`).
    pub fn value_into(&self, x: f64, out: &mut [C64]) {
        let n = self.dim;
        out.iter_mut().for_each(|z| *z = ZERO);
        if x > self.x_max * (1.0 + 1e-12) || x < 0.0 {
            return;
        }
        let tol = 1e-12 * x.abs().max(1.0);
        let put = |out: &mut [C64], m: &ComplexMatrix, s: f64| {
            for (o, v) in out.iter_mut().zip(m.as_slice()) {
                *o += v * s;
            }
        };
        match &self.shape {
            Shape::Zero => {}
            Shape::Well { strength, width, matrix } => {
                let s = if (x - width).abs() <= tol {
                    0.5
                } else if x < *width {
                    1.0
                } else {
                    0.0
                };
                if s > 0.0 {
                    put(out, matrix, strength * s);
                }
            }
            Shape::Exponential { strength, rate, matrix } => put(out, matrix, strength * (-rate * x).exp()),
            Shape::EntrywiseExponential { matrix, rates } => {
                for ((o, v), r) in out.iter_mut().zip(matrix.as_slice()).zip(rates) {
                    *o = v * (-r * x).exp();
                }
            }
            Shape::Gaussian { strength, center, width, matrix } => {
                let u = (x - center) / width;
                put(out, matrix, strength * (-u * u).exp());
            }
            Shape::Step { pieces } => {
                let mut start = 0.0;
                for (i, (end, m)) in pieces.iter().enumerate() {
                    if (x - end).abs() <= tol {
                        put(out, m, 0.5);
                        if let Some((_, next)) = pieces.get(i + 1) {
                            put(out, next, 0.5);
                        }
                        break;
                    }
                    if x >= start && x < *end {
                        put(out, m, 1.0);
                        break;
                    }
                    start = *end;
                }
            }
            Shape::Table { xs, values } => {
                let last = xs.len() - 1;
                if x < xs[0] || x > xs[last] {
                    return;
                }
                let j = match xs.binary_search_by(|p| p.total_cmp(&x)) {
                    Ok(j) => {
                        put(out, &values[j], 1.0);
                        return;
                    }
                    Err(j) => j - 1,
                };
                let t = (x - xs[j]) / (xs[j + 1] - xs[j]);
                put(out, &values[j], 1.0 - t);
                put(out, &values[j + 1], t);
            }
            Shape::BlockDiagonal(blocks) => {
                let mut off = 0;
                for b in blocks {
                    let m = b.value(x);
                    let d = b.dim;
                    for r in 0..d {
                        for c in 0..d {
                            out[(off + r) * n + off + c] = m[(r, c)];
                        }
                    }
                    off += d;
                }
            }
        }
    }

    /// Samples `[node][dim²]` on `grid`.
    pub fn sample(&self, grid: &UniformGrid) -> Vec<C64> {
        let nn = self.dim * self.dim;
        let mut out = vec![ZERO; grid.count * nn];
        for (i, chunk) in out.chunks_mut(nn).enumerate() {
            self.value_into(grid.point(i), chunk);
        }
        out
    }

    /// Default sampling grid `[0, x_max]` with step [`DEFAULT_H`].
    pub fn default_grid(&self) -> UniformGrid {
        let cells = (self.x_max / DEFAULT_H).ceil().max(1.0) as usize;
        UniformGrid { start: 0.0, step: self.x_max / cells as f64, count: cells + 1 }
    }

    /// Operator norms `|V(x_j)|` on `grid`.
    pub fn norms(&self, grid: &UniformGrid) -> Vec<f64> {
        let n = self.dim;
        self.sample(grid)
            .chunks(n * n)
            .map(|c| if n == 1 { c[0].norm() } else { ComplexMatrix::from_row_major(c).map(|m| m.norm2()).unwrap_or(f64::NAN) })
            .collect()
    }

    /// Trapezoid approximation of `∫_0^{x_max} (1+x)^σ |V(x)| dx`.
    pub fn weighted_l1_norm(&self, sigma: f64) -> Result<f64> {
        self.weighted_l1_norm_on(&self.default_grid(), sigma)
    }

    pub fn weighted_l1_norm_on(&self, grid: &UniformGrid, sigma: f64) -> Result<f64> {
        if !(sigma >= 0.0) {
            return Err(Error::InvalidInput(format!("weight exponent must be nonnegative, got {sigma}")));
        }
        if grid.count < 2 {
            return Err(Error::InvalidGrid("empty sample grid".into()));
        }
        let w = grid.trapezoid_weights();
        Ok(self
            .norms(grid)
            .iter()
            .enumerate()
            .map(|(i, v)| w[i] * (1.0 + grid.point(i)).powf(sigma) * v)
            .sum())
    }

    /// Check the piecewise-regular structure: continuity away from declared
    /// breakpoints and a finite weighted derivative tail beyond the last one.
    pub fn check_regular_decomposition(&self, delta: f64) -> RegularityReport {
        self.check_regular_decomposition_on(&self.default_grid(), delta)
    }

    pub fn check_regular_decomposition_on(&self, grid: &UniformGrid, delta: f64) -> RegularityReport {
        let n = self.dim;
        let nn = n * n;
        let samples = self.sample(grid);
        let diffs: Vec<f64> = samples
            .chunks(nn)
            .zip(samples.chunks(nn).skip(1))
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (q - p).norm_sqr()).sum::<f64>().sqrt())
            .collect();
        let vmax = samples.chunks(nn).map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max);
        let floor = 1e-8 * vmax.max(1e-300);
        const WINDOW: usize = 10;

        let near_breakpoint = |j: usize| {
            let (a, b) = (grid.point(j), grid.point(j + 1));
            let tol = 1e-9 * grid.step;
            self.breakpoints.iter().any(|&p| p >= a - tol && p <= b + tol)
        };

        let mut flagged = vec![false; diffs.len()];
        for j in 0..diffs.len() {
            let lo = j.saturating_sub(WINDOW);
            let hi = (j + WINDOW + 1).min(diffs.len());
            let mut neigh: Vec<f64> = (lo..hi).filter(|&i| i + 1 < j || i > j + 1).map(|i| diffs[i]).collect();
            if neigh.is_empty() {
                continue;
            }
            neigh.sort_by(f64::total_cmp);
            let median = neigh[neigh.len() / 2];
            if diffs[j] > 10.0 * median + floor && !near_breakpoint(j) {
                flagged[j] = true;
            }
        }
        // a jump at a node splits across the two adjacent intervals
        let mut jump_nodes = Vec::new();
        let mut j = 0;
        while j < flagged.len() {
            if flagged[j] {
                let start = j;
                while j + 1 < flagged.len() && flagged[j + 1] {
                    j += 1;
                }
                let node = if j > start { (start + j + 1) / 2 } else { start };
                jump_nodes.push(grid.point(node));
            }
            j += 1;
        }

        let last_break = self.breakpoints.iter().copied().fold(0.0, f64::max);
        let weight = |x: f64| japanese(x).powf(2.0 + delta);
        let mut tail_integral = 0.0;
        let mut tail_constant: f64 = 0.0;
        for (j, d) in diffs.iter().enumerate() {
            let mid = grid.point(j) + 0.5 * grid.step;
            if grid.point(j) >= last_break - 1e-12 && !near_breakpoint(j) {
                tail_integral += weight(mid) * d;
            }
        }
        for (i, c) in samples.chunks(nn).enumerate() {
            let x = grid.point(i);
            if x > last_break {
                let v = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                tail_constant = tail_constant.max(v * weight(x));
            }
        }
        let tail_finite = tail_integral.is_finite();
        RegularityReport { passed: jump_nodes.is_empty() && tail_finite, jump_nodes, tail_integral, tail_finite, tail_constant }
    }
}

/// Parameters for [`PotentialSpec::builtin`].
#[derive(Clone, Debug)]
pub struct BuiltinParams {
    pub dim: usize,
    pub strength: f64,
    /// Width for wells and Gaussians, decay length `1/μ` for exponentials.
    pub length: f64,
    pub center: f64,
    pub matrix: Option<ComplexMatrix>,
    pub x_max: f64,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        Self { dim: 1, strength: 1.0, length: 1.0, center: 0.0, matrix: None, x_max: DEFAULT_X_MAX }
    }
}
