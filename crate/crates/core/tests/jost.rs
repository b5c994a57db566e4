mod common;

use halfline::jost::{jost_matrix, jost_matrix_from, scattering_matrix, solve_m, Branch, Classification, JostOptions, JostSampling};
use halfline::oracles::{jost_by_neumann, jost_by_ode, neumann_terms};
use halfline::{BoundaryPair, ComplexMatrix, PotentialSpec, UniformGrid, C64};
use proptest::prelude::*;

fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// `S(k)` and `S(-k)` from fresh solves at `±k`, without any table.
fn direct_pair(sampling: &JostSampling, bp: &BoundaryPair, k: f64) -> (ComplexMatrix, ComplexMatrix) {
    let neg = sampling.solve(C64::new(-k, 0.0), false, None).unwrap();
    let pos = sampling.solve(C64::new(k, 0.0), false, None).unwrap();
    let j_plus = jost_matrix_from(C64::new(k, 0.0), &neg.m0, &neg.dm_dx0, bp);
    let j_minus = jost_matrix_from(C64::new(-k, 0.0), &pos.m0, &pos.dm_dx0, bp);
    let s = &(-&j_minus) * &j_plus.inverse().unwrap();
    let s_neg = &(-&j_plus) * &j_minus.inverse().unwrap();
    (s, s_neg)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn reflected_scattering_is_the_adjoint(k in 0.05f64..8.0, which in 0usize..3, theta in 0.3f64..3.1) {
        let v = PotentialSpec::bundled(["scalar-well", "exp-2x2", "step-2x2"][which]).unwrap();
        let n = v.dim();
        let bp = BoundaryPair::from_angles(&vec![theta; n]).unwrap();
        let sampling = JostSampling::new(&v, &JostOptions::default()).unwrap();
        let (s, s_neg) = direct_pair(&sampling, &bp, k);
        prop_assert!((&s_neg - &s.adjoint()).max_abs() < 1e-8);
        prop_assert!((&(&s * &s.adjoint()) - &ComplexMatrix::identity(n)).max_abs() < 1e-8);
    }

    #[test]
    fn volterra_matches_the_ode_oracle(k in 0.0f64..6.0, which in 0usize..3) {
        let v = PotentialSpec::bundled(["scalar-well", "exp-2x2", "barrier"][which]).unwrap();
        let sampling = JostSampling::new(&v, &JostOptions::default()).unwrap();
        let sol = sampling.solve(C64::new(k, 0.0), false, None).unwrap();
        // the tail beyond 20 is below e^{-20}
        let (m0, dm0) = jost_by_ode(&v, k, 20.0, 2e-3);
        prop_assert!((&sol.m0 - &m0).max_abs() < 1e-6);
        prop_assert!((&sol.dm_dx0 - &dm0).max_abs() < 1e-6);
    }
}

#[test]
fn unitarity_for_bundled_potentials() {
    let kg = UniformGrid::span(0.0, 5.0, 0.01).unwrap();
    for name in ["scalar-well", "exp-2x2", "step-2x2", "barrier"] {
        let v = PotentialSpec::bundled(name).unwrap();
        let jt = solve_m(&v, &kg, &JostOptions::default()).unwrap();
        let sd = scattering_matrix(&jt, &BoundaryPair::dirichlet(v.dim())).unwrap();
        assert!(sd.unitarity_residual < 1e-6, "{name}: {:e}", sd.unitarity_residual);
        // the stored negative-k convention
        let k = kg.point(137);
        assert_eq!(sd.at(-k).unwrap(), sd.s[137].adjoint());
    }
}

#[test]
fn jost_matrix_at_negative_k_matches_the_table() {
    let v = PotentialSpec::bundled("exp-2x2").unwrap();
    let kg = UniformGrid::span(0.0, 3.0, 0.05).unwrap();
    let jt = solve_m(&v, &kg, &JostOptions::default()).unwrap();
    let bp = BoundaryPair::from_angles(&[1.0, 2.0]).unwrap();
    let sampling = JostSampling::new(&v, &JostOptions::default()).unwrap();
    for k in [0.35, 1.2, 2.95] {
        let table = jost_matrix(&jt, &bp, -k).unwrap();
        let fresh = sampling.solve(C64::new(k, 0.0), false, None).unwrap();
        let direct = jost_matrix_from(C64::new(-k, 0.0), &fresh.m0, &fresh.dm_dx0, &bp);
        assert!((&table - &direct).max_abs() < 1e-12);
    }
}

#[test]
fn low_energy_difference_is_linear_in_k() {
    // ‖S(k) - S(0)‖·⟨k⟩/k stays bounded
    let kg = UniformGrid::span(0.0, 6.0, 0.01).unwrap();
    for (name, bp) in [("barrier", BoundaryPair::dirichlet(1)), ("exp-2x2", BoundaryPair::from_angles(&[1.0, 2.0]).unwrap())] {
        let v = PotentialSpec::bundled(name).unwrap();
        let jt = solve_m(&v, &kg, &JostOptions::default()).unwrap();
        let sd = scattering_matrix(&jt, &bp).unwrap();
        let ratios: Vec<f64> = (1..kg.count)
            .map(|i| {
                let k = kg.point(i);
                (&sd.s[i] - &sd.s0).norm2() * japanese(k) / k
            })
            .collect();
        assert!(ratios.iter().all(|r| r.is_finite()), "{name}");
        // S is unitary, so far from 0 the ratio is at most (1 + ‖S0‖)⟨k⟩/k
        let cap = 1.0 + sd.s0.norm2();
        for (i, r) in ratios.iter().enumerate() {
            let k = kg.point(i + 1);
            assert!(*r <= (cap + 1e-6) * japanese(k) / k, "{name}: k = {k}, ratio {r}");
        }
        // no blow-up toward k = 0
        let near_zero = ratios[..10].iter().copied().fold(0.0, f64::max);
        assert!(near_zero <= 2.0 * ratios[10..100].iter().copied().fold(0.0, f64::max), "{name}");
    }
}

#[test]
fn faded_solution_decays_in_x_and_k() {
    // ‖m(k,x) - I‖·⟨k⟩·⟨x⟩^{1+δ} bounded for an exponentially decaying V
    let v = PotentialSpec::bundled("barrier").unwrap().with_decay_delta(1.0);
    let kg = UniformGrid::span(0.0, 20.0, 0.25).unwrap();
    let jt = solve_m(&v, &kg, &JostOptions { profile_stride: Some(20), ..Default::default() }).unwrap();
    let pg = *jt.profile_grid().unwrap();
    let delta = v.decay_delta().unwrap();
    let mut by_k = Vec::new();
    for i in 0..kg.count {
        let k = kg.point(i);
        let worst = (0..pg.count)
            .map(|j| {
                let x = pg.point(j);
                let m = jt.m_node(i, Branch::Plus, j)[0];
                (m - 1.0).norm() * japanese(k) * japanese(x).powf(1.0 + delta)
            })
            .fold(0.0, f64::max);
        by_k.push(worst);
    }
    let max = by_k.iter().copied().fold(0.0, f64::max);
    assert!(max < 10.0, "{max}");
    let top = by_k[by_k.len() - 1];
    let mid = by_k[by_k.len() / 2];
    assert!(top <= 1.5 * mid, "weighted bound grows with k: {mid} -> {top}");
}

#[test]
fn k_derivative_matches_centered_differences() {
    let v = PotentialSpec::bundled("exp-2x2").unwrap();
    let sampling = JostSampling::new(&v, &JostOptions::default()).unwrap();
    let k = 1.3;
    let exact = sampling.solve(C64::new(k, 0.0), true, None).unwrap().dm_dk0;
    let fd = |d: f64| {
        let p = sampling.solve(C64::new(k + d, 0.0), false, None).unwrap().m0;
        let m = sampling.solve(C64::new(k - d, 0.0), false, None).unwrap().m0;
        (&p - &m).scale_real(0.5 / d)
    };
    let e1 = (&fd(0.04) - &exact).max_abs();
    let e2 = (&fd(0.02) - &exact).max_abs();
    let order = (e1 / e2).log2();
    assert!((order - 2.0).abs() < 0.3, "errors {e1:e} {e2:e}, order {order}");
}

#[test]
fn neumann_series_agrees_with_volterra() {
    let v = PotentialSpec::bundled("scalar-well").unwrap();
    let sampling = JostSampling::new(&v, &JostOptions::default()).unwrap();
    for k in [0.5, 1.5, 3.0] {
        let sol = sampling.solve(C64::new(k, 0.0), false, None).unwrap();
        // the well ends at 1.5; the grid runs past it so the jump sits at an
        // interior node
        let series = jost_by_neumann(&v, k, 3.0, 1e-3, neumann_terms(&v)).unwrap();
        assert!((&sol.m0 - &series).max_abs() < 1e-6, "k = {k}");
    }
}

#[test]
fn classification_of_simple_cases() {
    let kg = UniformGrid::span(0.0, 5.0, 0.01).unwrap();
    let free = solve_m(&PotentialSpec::zero(2), &kg, &JostOptions::default()).unwrap();
    let dir = scattering_matrix(&free, &BoundaryPair::dirichlet(2)).unwrap();
    assert_eq!(dir.classification, Classification::Generic);
    let neu = scattering_matrix(&free, &BoundaryPair::neumann(2)).unwrap();
    assert_eq!(neu.classification, Classification::PurelyExceptional);
    let mixed = scattering_matrix(&free, &BoundaryPair::from_angles(&[std::f64::consts::PI, std::f64::consts::FRAC_PI_2]).unwrap()).unwrap();
    assert_eq!(mixed.classification, Classification::Exceptional);
}

#[test]
fn coarse_step_is_refused() {
    let v = PotentialSpec::zero(1).with_x_max(10.0);
    let kg = UniformGrid::span(0.0, 30.0, 0.5).unwrap();
    let r = solve_m(&v, &kg, &JostOptions { h: 0.01, ..Default::default() });
    assert!(matches!(r, Err(halfline::Error::Resolution(_))));
    assert!(solve_m(&v, &kg, &JostOptions { h: 0.0084, ..Default::default() }).is_err());
    assert!(solve_m(&v, &kg, &JostOptions { h: 0.008, ..Default::default() }).is_ok());
}
