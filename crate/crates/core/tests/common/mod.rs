#![allow(dead_code)]

use halfline::{ComplexMatrix, C64};
use proptest::prelude::*;

/// Square complex matrix with entries in the unit square.
pub fn matrix(n: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec(-1.0f64..1.0, 2 * n * n).prop_map(move |v| {
        let e: Vec<C64> = v.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
        ComplexMatrix::from_row_major(&e).unwrap()
    })
}

pub fn hermitian(n: usize) -> impl Strategy<Value = ComplexMatrix> {
    matrix(n).prop_map(|m| m.hermitian_part())
}

/// `exp(iH)` for a random Hermitian `H`.
pub fn unitary(n: usize) -> impl Strategy<Value = ComplexMatrix> {
    hermitian(n).prop_map(|h| h.scale(C64::new(0.0, 2.0)).matrix_exp())
}

/// Identity plus a perturbation small enough to stay invertible.
pub fn invertible(n: usize) -> impl Strategy<Value = ComplexMatrix> {
    matrix(n).prop_map(move |m| &ComplexMatrix::identity(n) + &m.scale_real(0.4 / n as f64))
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
