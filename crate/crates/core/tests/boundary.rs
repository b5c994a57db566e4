mod common;

use std::f64::consts::PI;

use common::{invertible, unitary};
use halfline::boundary::equivalent;
use halfline::{BoundaryPair, ComplexMatrix, C64};
use proptest::prelude::*;

fn angles(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3f64..=PI, n)
}

/// `(U A C, U B C)`: same condition as `(A, B)` rotated by `U`, written with
/// a different right factor `C`.
fn transformed(base: &BoundaryPair, u: &ComplexMatrix, c: &ComplexMatrix) -> BoundaryPair {
    let a = &(u * base.a()) * c;
    let b = &(u * base.b()) * c;
    BoundaryPair::validate(a, b).unwrap()
}

proptest! {
    #[test]
    fn angles_always_validate(th in (1usize..6).prop_flat_map(angles)) {
        let bp = BoundaryPair::from_angles(&th).unwrap();
        prop_assert_eq!(bp.angles().unwrap(), &th[..]);
        prop_assert_eq!(bp.dirichlet_count(), th.iter().filter(|&&t| (t - PI).abs() < 1e-12).count());
    }

    #[test]
    fn equivalence_is_an_equivalence_relation(
        (th, u, c1, c2, c3) in (1usize..4).prop_flat_map(|n| (angles(n), unitary(n), invertible(n), invertible(n), invertible(n)))
    ) {
        let base = BoundaryPair::from_angles(&th).unwrap();
        let p = transformed(&base, &u, &c1);
        let q = transformed(&base, &u, &c2);
        let r = transformed(&base, &u, &c3);
        prop_assert!(equivalent(&p, &p));
        prop_assert_eq!(equivalent(&p, &q), equivalent(&q, &p));
        prop_assert!(equivalent(&p, &q) && equivalent(&q, &r) && equivalent(&p, &r));
    }

    #[test]
    fn different_angles_are_not_equivalent(th in (1usize..4).prop_flat_map(angles), shift in 0.05f64..0.5) {
        let p = BoundaryPair::from_angles(&th).unwrap();
        let mut other = th.clone();
        other[0] = if other[0] > 1.0 { other[0] - shift } else { other[0] + shift };
        let q = BoundaryPair::from_angles(&other).unwrap();
        prop_assert!(!equivalent(&p, &q));
        prop_assert!(!equivalent(&q, &p));
    }

    #[test]
    fn compatible_boundary_values_have_zero_residual(
        (th, u, d) in (1usize..4).prop_flat_map(|n| (angles(n), unitary(n), prop::collection::vec(-1.0f64..1.0, 2 * n)))
    ) {
        let n = th.len();
        let bp = transformed(&BoundaryPair::from_angles(&th).unwrap(), &u, &ComplexMatrix::identity(n));
        let d: Vec<C64> = d.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
        // ψ(0) = A d, ψ'(0) = B d solves -B†ψ(0) + A†ψ'(0) = 0
        prop_assert!(bp.residual(&bp.a().mul_vec(&d), &bp.b().mul_vec(&d)) < 1e-12);
    }
}

#[test]
fn rejects_non_self_adjoint_pairs() {
    let i = C64::new(0.0, 1.0);
    let a = ComplexMatrix::identity(2);
    assert!(BoundaryPair::validate(a.clone(), ComplexMatrix::scalar(2, i)).is_err());
    assert!(BoundaryPair::validate(ComplexMatrix::zeros(2), ComplexMatrix::zeros(2)).is_err());
    assert!(BoundaryPair::validate(a, ComplexMatrix::identity(3)).is_err());
    assert!(BoundaryPair::from_angles(&[0.0]).is_err());
    assert!(BoundaryPair::from_angles(&[4.0]).is_err());
}
