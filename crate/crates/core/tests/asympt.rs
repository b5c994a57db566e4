use halfline::asympt::{extract_w, final_state, fit_power_law, verify_decay};
use halfline::evolve::{evolve_nls, log_spaced_times, EvolveOptions, NonlinearitySpec};
use halfline::grid::l2_norm;
use halfline::spectral::{FieldState, SpectralTransform, TransformOptions};
use halfline::{BoundaryPair, PotentialSpec, UniformGrid, C64};
use proptest::prelude::*;

fn barrier(x_max: f64, dx: f64, k_max: f64, dk: f64) -> SpectralTransform {
    let xg = UniformGrid::span(0.0, x_max, dx).unwrap();
    let kg = UniformGrid::span(0.0, k_max, dk).unwrap();
    let v = PotentialSpec::bundled("barrier").unwrap();
    SpectralTransform::build(&v, &BoundaryPair::dirichlet(1), &xg, &kg, &TransformOptions::default()).unwrap()
}

fn odd_bump(st: &SpectralTransform, eps: f64) -> FieldState {
    FieldState::from_fn(0.0, *st.xgrid(), 1, |x| vec![C64::new(eps * x * (-x * x / 2.0).exp(), 0.0)]).unwrap()
}

proptest! {
    #[test]
    fn power_law_is_recovered(p in -2.0f64..1.0, c in 0.01f64..100.0) {
        let table: Vec<(f64, f64)> = (0..20).map(|i| {
            let t = 2f64.powf(i as f64 / 4.0);
            (t, c * t.powf(p))
        }).collect();
        let fit = fit_power_law(&table, 1.0, 100.0).unwrap();
        prop_assert!((fit.exponent - p).abs() < 1e-10);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-9);
        prop_assert!(fit.band < 1e-8);
    }
}

#[test]
fn interaction_variable_is_constant_without_nonlinearity() {
    let st = barrier(40.0, 0.05, 10.0, 0.01);
    let u0 = odd_bump(&st, 1.0);
    let w0 = st.forward(&u0.values);
    let scale = st.k_norm(&w0);
    // late enough to move the packet, early enough to stay inside x ≤ 40
    for t in [0.5, 1.0, 2.0] {
        let u = st.propagate(&u0, t).unwrap();
        let w = extract_w(&st, &u).unwrap();
        let diff: Vec<C64> = w.positive_half().iter().zip(&w0).map(|(a, b)| a - b).collect();
        assert!(st.k_norm(&diff) < 1e-3 * scale, "t = {t}");
    }
}

#[test]
fn linear_sup_norm_decays_like_inverse_square_root() {
    let st = barrier(300.0, 0.1, 5.0, 0.005);
    let opts = EvolveOptions { t_end: 40.0, dt: 1.0, sample_times: log_spaced_times(5.0, 40.0, 4), growth_limit: 10.0 };
    let traj = evolve_nls(&st, &NonlinearitySpec::zero(), &odd_bump(&st, 1.0), &opts).unwrap();
    let fit = verify_decay(&traj, 5.0, 40.0).unwrap();
    assert!((fit.exponent + 0.5).abs() < 0.05, "{fit:?}");
}

#[test]
fn final_state_scales_linearly_for_small_data() {
    let st = barrier(40.0, 0.05, 10.0, 0.01);
    let opts = EvolveOptions { t_end: 4.0, dt: 0.02, sample_times: log_spaced_times(0.5, 4.0, 2), growth_limit: 10.0 };
    let mut norms = Vec::new();
    for eps in [0.05, 0.1] {
        let traj = evolve_nls(&st, &NonlinearitySpec::scalar_power(3.0, 1.0).unwrap(), &odd_bump(&st, eps), &opts).unwrap();
        let fs = final_state(&st, &traj, 0.5, 4.0).unwrap();
        assert!(!fs.cauchy.is_empty());
        norms.push(l2_norm(&fs.w_final, st.k_weights(), 1));
    }
    let ratio = norms[1] / norms[0];
    assert!((ratio / 2.0 - 1.0).abs() < 0.2, "{ratio}");
}
