//! Uniform grids, quadrature weights and local interpolation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};

/// Uniform grid `start + i·step`, `i = 0..count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

pub type XGrid = UniformGrid;
pub type KGrid = UniformGrid;

impl UniformGrid {
    pub fn new(start: f64, step: f64, count: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() || !start.is_finite() {
            return Err(Error::InvalidGrid(format!("step must be positive and finite, got {step}")));
        }
        if count < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {count}")));
        }
        Ok(Self { start, step, count })
    }

    /// Grid from `start` to `end` inclusive; `end - start` must be a whole
    /// number of steps (to 1e-9 relative).
    pub fn span(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(end > start) {
            return Err(Error::InvalidGrid(format!("empty range [{start}, {end}]")));
        }
        let cells = (end - start) / step;
        let n = cells.round();
        if (cells - n).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "range [{start}, {end}] is not a whole number of steps of {step}"
            )));
        }
        Self::new(start, step, n as usize + 1)
    }

    /// Symmetric grid `[-end, end]` with a node at 0.
    pub fn symmetric(end: f64, step: f64) -> Result<Self> {
        let half = Self::span(0.0, end, step)?;
        Self::new(-end, step, 2 * half.count - 1)
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.point(self.count - 1)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }

    /// Composite trapezoid weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![self.step; self.count];
        w[0] *= 0.5;
        w[self.count - 1] *= 0.5;
        w
    }

    /// Composite Simpson weights (odd point count required).
    pub fn simpson_weights(&self) -> Result<Vec<f64>> {
        if self.count % 2 == 0 {
            return Err(Error::InvalidGrid("Simpson rule needs an odd number of points".into()));
        }
        let h3 = self.step / 3.0;
        Ok((0..self.count)
            .map(|i| {
                if i == 0 || i == self.count - 1 {
                    h3
                } else if i % 2 == 1 {
                    4.0 * h3
                } else {
                    2.0 * h3
                }
            })
            .collect())
    }

    /// Index of the node equal to `x` (within 1e-9 steps), if any.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let f = (x - self.start) / self.step;
        let i = f.round();
        if (f - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < self.count {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Stencil start and Lagrange weights of the 4-point cubic interpolant
    /// through the nodes surrounding `x`. `None` outside the grid.
    pub fn cubic_stencil(&self, x: f64) -> Option<(usize, [f64; 4])> {
        let f = (x - self.start) / self.step;
        let last = (self.count - 1) as f64;
        if f < -1e-9 || f > last + 1e-9 {
            return None;
        }
        if let Some(i) = self.index_of(x) {
            let mut w = [0.0; 4];
            let s = i.saturating_sub(1).min(self.count.saturating_sub(4));
            w[i - s] = 1.0;
            return Some((s, w));
        }
        let base = f.floor() as isize;
        let s = (base - 1).clamp(0, self.count as isize - 4) as usize;
        if self.count < 4 {
            // linear fallback
            let i0 = (base.max(0) as usize).min(self.count - 2);
            let t = f - i0 as f64;
            let mut w = [0.0; 4];
            w[i0] = 1.0 - t;
            w[i0 + 1] = t;
            return Some((0, w));
        }
        let mut w = [0.0; 4];
        for (a, wa) in w.iter_mut().enumerate() {
            let xa = (s + a) as f64;
            let mut l = 1.0;
            for b in 0..4 {
                if b != a {
                    let xb = (s + b) as f64;
                    l *= (f - xb) / (xa - xb);
                }
            }
            *wa = l;
        }
        Some((s, w))
    }
}

/// Cubic interpolation of a vector-valued grid function (`values` laid out as
/// `[node][component]`). Returns zeros outside the grid.
pub fn interpolate_cubic(grid: &UniformGrid, values: &[C64], components: usize, x: f64) -> Vec<C64> {
    let mut out = vec![ZERO; components];
    if let Some((s, w)) = grid.cubic_stencil(x) {
        for (a, &wa) in w.iter().enumerate() {
            if wa == 0.0 {
                continue;
            }
            let node = s + a;
            if node >= grid.count {
                continue;
            }
            for c in 0..components {
                out[c] += values[node * components + c] * wa;
            }
        }
    }
    out
}

/// Weighted L² norm of a `[node][component]` array.
pub fn l2_norm(values: &[C64], weights: &[f64], components: usize) -> f64 {
    values
        .chunks(components)
        .zip(weights)
        .map(|(v, &w)| w * v.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Largest pointwise Euclidean norm of a `[node][component]` array.
pub fn sup_norm(values: &[C64], components: usize) -> f64 {
    values
        .chunks(components)
        .map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}
