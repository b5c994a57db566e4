mod common;

use halfline::potential::{BuiltinParams, Shape};
use halfline::{ComplexMatrix, PotentialSpec, UniformGrid, C64};
use proptest::prelude::*;

fn shapes() -> impl Strategy<Value = PotentialSpec> {
    (0usize..3, 0.1f64..3.0, 0.3f64..3.0).prop_map(|(kind, strength, length)| {
        let name = ["well", "exponential", "gaussian"][kind];
        PotentialSpec::builtin(name, &BuiltinParams { strength, length, center: 1.0, x_max: 20.0, ..Default::default() }).unwrap()
    })
}

proptest! {
    #[test]
    fn weighted_norm_is_monotone_in_the_weight(v in shapes(), s1 in 0.0f64..3.0, ds in 0.0f64..2.0) {
        let a = v.weighted_l1_norm(s1).unwrap();
        let b = v.weighted_l1_norm(s1 + ds).unwrap();
        prop_assert!(b >= a * (1.0 - 1e-14));
    }

    #[test]
    fn sampled_values_are_hermitian(m in common::hermitian(3), x in 0.0f64..10.0) {
        let v = PotentialSpec::new(Shape::Exponential { strength: 1.0, rate: 0.7, matrix: m }, 20.0).unwrap();
        prop_assert!(v.value(x).hermiticity_residual() < 1e-14);
    }
}

#[test]
fn weighted_norm_converges_at_second_order() {
    let v = PotentialSpec::builtin("gaussian", &BuiltinParams { strength: 2.0, length: 1.0, center: 3.0, x_max: 20.0, ..Default::default() })
        .unwrap();
    let at = |h: f64| v.weighted_l1_norm_on(&UniformGrid::span(0.0, 20.0, h).unwrap(), 1.5).unwrap();
    let (a, b, c) = (at(0.2), at(0.1), at(0.05));
    let ratio = (a - b) / (b - c);
    assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
}

#[test]
fn weighted_norm_of_exponential_matches_closed_form() {
    // ∫_0^∞ (1+x) e^{-x} dx = 2
    let v = PotentialSpec::bundled("barrier").unwrap().with_x_max(60.0);
    let got = v.weighted_l1_norm_on(&UniformGrid::span(0.0, 60.0, 0.01).unwrap(), 1.0).unwrap();
    assert!((got - 2.0).abs() < 1e-4, "{got}");
}

#[test]
fn step_potential_regularity() {
    let v = PotentialSpec::bundled("step-2x2").unwrap();
    assert_eq!(v.breakpoints(), &[1.0, 2.5]);
    let declared = v.check_regular_decomposition(0.5);
    assert!(declared.passed, "{declared:?}");
    let undeclared = v.with_breakpoints(vec![]).check_regular_decomposition(0.5);
    assert!(!undeclared.passed);
    assert_eq!(undeclared.jump_nodes.len(), 2);
    assert!(PotentialSpec::bundled("barrier").unwrap().check_regular_decomposition(0.5).passed);
}

#[test]
fn csv_table_roundtrip() {
    let path = std::env::temp_dir().join(format!("halfline-potential-{}.csv", std::process::id()));
    let mut text = String::from("x,re11,im11,re12,im12,re21,im21,re22,im22\n");
    for i in 0..=100 {
        let x = 0.1 * i as f64;
        let e = (-x).exp();
        text += &format!("{x},{e},0,{},{},{},{},{},0\n", 0.5 * e, 0.25 * e, 0.5 * e, -0.25 * e, 2.0 * e);
    }
    std::fs::write(&path, text).unwrap();
    let v = PotentialSpec::from_csv(&path, 10.0).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(v.dim(), 2);
    for x in [0.0, 0.35, 2.0, 7.77] {
        let e = (-x as f64).exp();
        let want = ComplexMatrix::from_rows(&[
            vec![C64::new(e, 0.0), C64::new(0.5 * e, 0.25 * e)],
            vec![C64::new(0.5 * e, -0.25 * e), C64::new(2.0 * e, 0.0)],
        ])
        .unwrap();
        // linear interpolation error on a 0.1 grid
        assert!((&v.value(x) - &want).max_abs() < 4e-3 * e, "x = {x}");
    }
    assert!(v.value(11.0).max_abs() == 0.0);
}

#[test]
fn non_hermitian_table_is_rejected() {
    let path = std::env::temp_dir().join(format!("halfline-bad-potential-{}.csv", std::process::id()));
    std::fs::write(&path, "0,1,1\n1,1,1\n").unwrap();
    let r = PotentialSpec::from_csv(&path, 1.0);
    std::fs::remove_file(&path).unwrap();
    assert!(r.is_err());
}
