//! A quick battery of closed-form and cross-method checks, small enough to
//! run in a few seconds from the command line.

use std::f64::consts::PI;

use serde::Serialize;

use crate::boundary::BoundaryPair;
use crate::error::Result;
use crate::grid::UniformGrid;
use crate::jost::{scattering_matrix, solve_m, JostOptions};
use crate::linalg::{ComplexMatrix, C64};
use crate::linemap::verify_line_scattering;
use crate::oracles::jost_by_ode;
use crate::potential::PotentialSpec;
use crate::spectral::{FieldState, SpectralTransform, TransformOptions};

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.to_string(), value, tolerance, passed: value.is_finite() && value < tolerance }
    }
}

fn free_closed_form(bp: &BoundaryPair, expected: impl Fn(f64) -> C64) -> Result<f64> {
    let kg = UniformGrid::span(0.0, 10.0, 0.01)?;
    let jt = solve_m(&PotentialSpec::zero(1), &kg, &JostOptions::default())?;
    let sd = scattering_matrix(&jt, bp)?;
    Ok((1..kg.count).map(|i| (sd.s[i][(0, 0)] - expected(kg.point(i))).norm()).fold(0.0, f64::max))
}

/// Run every check; errors inside a check count as failures.
pub fn run() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut push = |name: &str, r: Result<f64>, tol: f64| {
        out.push(CheckResult::new(name, r.unwrap_or(f64::INFINITY), tol));
    };

    push("free-dirichlet", free_closed_form(&BoundaryPair::dirichlet(1), |_| C64::new(-1.0, 0.0)), 1e-8);
    push("free-neumann", free_closed_form(&BoundaryPair::neumann(1), |_| C64::new(1.0, 0.0)), 1e-8);
    let th = PI / 4.0;
    push(
        "free-robin",
        BoundaryPair::from_angles(&[th]).and_then(|bp| {
            free_closed_form(&bp, |k| -C64::new(th.cos(), -k * th.sin()) / C64::new(th.cos(), k * th.sin()))
        }),
        1e-8,
    );

    push(
        "unitarity-exp-2x2",
        (|| {
            let v = PotentialSpec::bundled("exp-2x2")?;
            let kg = UniformGrid::span(0.0, 5.0, 0.01)?;
            let jt = solve_m(&v, &kg, &JostOptions::default())?;
            Ok(scattering_matrix(&jt, &BoundaryPair::dirichlet(2))?.unitarity_residual)
        })(),
        1e-6,
    );

    push(
        "jost-vs-ode",
        (|| {
            let v = PotentialSpec::bundled("scalar-well")?;
            let kg = UniformGrid::span(0.0, 4.0, 0.5)?;
            let jt = solve_m(&v, &kg, &JostOptions::default())?;
            let mut worst: f64 = 0.0;
            for i in 0..kg.count {
                let (m0, _) = jost_by_ode(&v, kg.point(i), 2.0, 1e-3);
                worst = worst.max((&jt.solution(i, crate::jost::Branch::Plus).m0 - &m0).max_abs());
            }
            Ok(worst)
        })(),
        1e-6,
    );

    push(
        "transform-roundtrip",
        (|| {
            let v = PotentialSpec::bundled("barrier")?;
            let xg = UniformGrid::span(0.0, 40.0, 0.1)?;
            let kg = UniformGrid::span(0.0, 5.0, 0.02)?;
            let st = SpectralTransform::build(&v, &BoundaryPair::dirichlet(1), &xg, &kg, &TransformOptions::default())?;
            let psi = FieldState::from_fn(0.0, xg, 1, |x| vec![C64::new(x * (-x * x / 2.0).exp(), 0.0)])?;
            let back = FieldState::new(0.0, xg, 1, st.adjoint(&st.forward(&psi.values)))?;
            Ok(back.l2_distance(&psi) / psi.l2_norm())
        })(),
        1e-3,
    );

    push(
        "line-delta",
        UniformGrid::span(0.0, 10.0, 0.05)
            .and_then(|kg| verify_line_scattering(1.0, &kg))
            .map(|r| r.max_transmission_error.max(r.max_reflection_error)),
        1e-6,
    );

    push(
        "bound-state-gate",
        (|| {
            let v = PotentialSpec::new(
                crate::potential::Shape::Well { strength: -10.0, width: 1.0, matrix: ComplexMatrix::identity(1) },
                10.0,
            )?;
            let xg = UniformGrid::span(0.0, 10.0, 0.1)?;
            let kg = UniformGrid::span(0.0, 5.0, 0.05)?;
            let st = SpectralTransform::build(&v, &BoundaryPair::dirichlet(1), &xg, &kg, &TransformOptions::default())?;
            let psi = FieldState::from_fn(0.0, xg, 1, |x| vec![C64::new(x * (-x * x).exp(), 0.0)])?;
            // 0 when propagation is refused, as it must be
            Ok(if st.propagate(&psi, 1.0).is_err() && st.has_bound_states { 0.0 } else { 1.0 })
        })(),
        0.5,
    );
    out
}

#[cfg(test)]
mod tests {
    #[test]
    fn selftest_passes() {
        for c in super::run() {
            assert!(c.passed, "{} = {:e} (tolerance {:e})", c.name, c.value, c.tolerance);
        }
    }
}
