mod common;

use std::sync::OnceLock;

use halfline::jost::{solve_m, JostOptions};
use halfline::potential::Shape;
use halfline::spectral::{energy_form, free_transform, physical_solution, FieldState, SpectralTransform, TransformOptions};
use halfline::{BoundaryPair, ComplexMatrix, PotentialSpec, UniformGrid, C64};
use proptest::prelude::*;

const THETA: f64 = 2.0;

fn xgrid() -> UniformGrid {
    UniformGrid::span(0.0, 40.0, 0.05).unwrap()
}

/// Exponential barrier with a Dirichlet condition.
fn barrier_dirichlet() -> &'static SpectralTransform {
    static ST: OnceLock<SpectralTransform> = OnceLock::new();
    ST.get_or_init(|| {
        let kg = UniformGrid::span(0.0, 10.0, 0.01).unwrap();
        let v = PotentialSpec::bundled("barrier").unwrap();
        SpectralTransform::build(&v, &BoundaryPair::dirichlet(1), &xgrid(), &kg, &TransformOptions::default()).unwrap()
    })
}

/// Same barrier with `cos θ ψ(0) + sin θ ψ'(0) = 0`.
fn barrier_robin() -> &'static SpectralTransform {
    static ST: OnceLock<SpectralTransform> = OnceLock::new();
    ST.get_or_init(|| {
        let kg = UniformGrid::span(0.0, 10.0, 0.01).unwrap();
        let v = PotentialSpec::bundled("barrier").unwrap();
        let bp = BoundaryPair::from_angles(&[THETA]).unwrap();
        SpectralTransform::build(&v, &bp, &xgrid(), &kg, &TransformOptions::default()).unwrap()
    })
}

/// `x (g(x-c) + g(x+c))` with a Gaussian `g` of width `w`. The odd extension
/// is smooth; a plain `x g(x-c)` has a jump in ψ'' there, and its slowly
/// decaying spectrum makes truncation at `k_max` show up near the origin.
fn dirichlet_bump(c: f64, w: f64) -> FieldState {
    let g = |y: f64| (-y * y / (2.0 * w * w)).exp();
    FieldState::from_fn(0.0, xgrid(), 1, |x| vec![C64::new(x * (g(x - c) + g(x + c)), 0.0)]).unwrap()
}

/// `(1 + βx) e^{-x²/2w²}` with `β = -cot θ`, so `ψ'(0) = βψ(0)`.
fn robin_bump(w: f64) -> FieldState {
    let beta = -1.0 / THETA.tan();
    FieldState::from_fn(0.0, xgrid(), 1, |x| vec![C64::new((1.0 + beta * x) * (-x * x / (2.0 * w * w)).exp(), 0.0)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn transform_is_isometric(c in 0.0f64..5.0, w in 0.7f64..2.0) {
        let st = barrier_dirichlet();
        let psi = dirichlet_bump(c, w);
        let z = st.forward(&psi.values);
        let ratio = st.k_norm(&z) / psi.l2_norm();
        prop_assert!((ratio - 1.0).abs() < 1e-3, "ratio {}", ratio);
        let back = FieldState::new(0.0, xgrid(), 1, st.adjoint(&z)).unwrap();
        prop_assert!(back.l2_distance(&psi) / psi.l2_norm() < 1e-3);
    }

    #[test]
    fn group_law(t1 in 0.0f64..2.0, t2 in 0.0f64..2.0) {
        let st = barrier_dirichlet();
        let psi = dirichlet_bump(2.0, 1.0);
        let a = st.propagate(&st.propagate(&psi, t1).unwrap(), t2).unwrap();
        let b = st.propagate(&psi, t1 + t2).unwrap();
        prop_assert!(a.l2_distance(&b) < 1e-3 * psi.l2_norm());
    }

    #[test]
    fn propagation_preserves_the_boundary_condition(t in 0.1f64..3.0) {
        let st = barrier_robin();
        let u = st.propagate(&robin_bump(1.0), t).unwrap();
        let z = st.phase(&st.forward(&robin_bump(1.0).values), t);
        prop_assert!(st.boundary_residual(&z) < 1e-6 * u.sup_norm());
    }
}

#[test]
fn physical_solution_solves_the_stationary_equation() {
    let v = PotentialSpec::bundled("barrier").unwrap();
    let kg = UniformGrid::span(0.0, 4.0, 0.1).unwrap();
    let jt = solve_m(&v, &kg, &JostOptions { profile_stride: Some(1), ..Default::default() }).unwrap();
    let sd = halfline::jost::scattering_matrix(&jt, &BoundaryPair::dirichlet(1)).unwrap();
    for (i, negative) in [(13, false), (25, true), (40, false)] {
        let k = kg.point(i);
        let psi = |x: f64| physical_solution(&jt, &sd, i, negative, x).unwrap()[(0, 0)];
        let residual = |h: f64| {
            (0..=350)
                .map(|j| 1.0 + 0.02 * j as f64)
                .map(|x| {
                    let lap = (psi(x + h) - psi(x) * 2.0 + psi(x - h)) / (h * h);
                    (-lap + psi(x) * ((-x).exp() - k * k)).norm()
                })
                .fold(0.0, f64::max)
        };
        let (r1, r2) = (residual(0.04), residual(0.02));
        assert!(r1 < 1e-2 * (1.0 + k.powi(4)), "k = {k}: {r1:e}");
        assert!((r1 / r2 - 4.0).abs() < 0.5, "k = {k}: {r1:e} / {r2:e}");
        // Ψ(k, 0) = 0 for the Dirichlet condition
        assert!(psi(0.0).norm() < 1e-10);
    }
}

#[test]
fn transform_diagonalizes_the_operator() {
    let st = barrier_dirichlet();
    // ψ = x e^{-x²/2}, Hψ = (3x - x³) e^{-x²/2} + e^{-x} ψ
    let psi = FieldState::from_fn(0.0, xgrid(), 1, |x| vec![C64::new(x * (-x * x / 2.0).exp(), 0.0)]).unwrap();
    let h_psi = FieldState::from_fn(0.0, xgrid(), 1, |x| {
        let g = (-x * x / 2.0).exp();
        vec![C64::new((3.0 * x - x * x * x) * g + (-x).exp() * x * g, 0.0)]
    })
    .unwrap();
    let lhs = st.forward(&h_psi.values);
    let rhs: Vec<C64> = st.forward(&psi.values).iter().enumerate().map(|(i, z)| z * st.kgrid().point(i).powi(2)).collect();
    let diff: Vec<C64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    assert!(st.k_norm(&diff) < 1e-3 * st.k_norm(&lhs), "{:e}", st.k_norm(&diff) / st.k_norm(&lhs));
}

#[test]
fn energy_form_matches_the_spectral_side() {
    for (st, psi) in [(barrier_dirichlet(), dirichlet_bump(1.0, 1.0)), (barrier_robin(), robin_bump(1.0))] {
        let z = st.forward(&psi.values);
        let spectral: Vec<C64> = z.iter().enumerate().map(|(i, v)| v * st.kgrid().point(i)).collect();
        let want = st.k_norm(&spectral).powi(2);
        let e = energy_form(&st.boundary, &PotentialSpec::bundled("barrier").unwrap(), &psi).unwrap();
        assert!(e.boundary_term_included);
        assert!((e.value - want).abs() < 2e-3 * want, "{} vs {want}", e.value);
    }
}

#[test]
fn free_dirichlet_propagator_has_the_closed_form() {
    let xg = UniformGrid::span(0.0, 40.0, 0.05).unwrap();
    let kg = UniformGrid::span(0.0, 10.0, 0.01).unwrap();
    let st = free_transform(&BoundaryPair::dirichlet(1), &xg, &kg, &TransformOptions::default()).unwrap();
    let psi = FieldState::from_fn(0.0, xg, 1, |x| vec![C64::new(x * (-x * x / 2.0).exp(), 0.0)]).unwrap();
    for t in [0.5, 1.0, 2.0] {
        let u = st.propagate(&psi, t).unwrap();
        // odd extension of the free Gaussian-derivative solution
        let a = C64::new(1.0, 2.0 * t);
        let exact = FieldState::from_fn(t, xg, 1, |x| vec![x * a.powf(-1.5) * (-x * x / (2.0 * a)).exp()]).unwrap();
        assert!(u.l2_distance(&exact) < 1e-6, "t = {t}");
    }
}

#[test]
fn bound_states_block_propagation() {
    let v = PotentialSpec::new(Shape::Well { strength: -10.0, width: 1.0, matrix: ComplexMatrix::identity(1) }, 10.0).unwrap();
    let xg = UniformGrid::span(0.0, 10.0, 0.1).unwrap();
    let kg = UniformGrid::span(0.0, 5.0, 0.05).unwrap();
    let st = SpectralTransform::build(&v, &BoundaryPair::dirichlet(1), &xg, &kg, &TransformOptions::default()).unwrap();
    assert!(st.has_bound_states);
    assert_eq!(st.bound_states.len(), 1);
    let psi = FieldState::from_fn(0.0, xg, 1, |x| vec![C64::new(x * (-x * x).exp(), 0.0)]).unwrap();
    assert!(matches!(st.propagate(&psi, 1.0), Err(halfline::Error::BoundStatesPresent(_))));
}

#[test]
fn isometry_residual_is_reported() {
    assert!(barrier_dirichlet().isometry_residual < 1e-2);
    assert!(!barrier_dirichlet().has_bound_states);
    let summary = barrier_robin().summary();
    assert_eq!(summary.x_points, 801);
    assert_eq!(summary.k_points, 1001);
}
