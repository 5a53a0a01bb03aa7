//! Random matrices for unit tests.

use alloc::vec::Vec;

use rand::Rng;

use crate::qops::{adjoint, ComplexMatrix, DensityMatrix, C64};

pub fn random_complex(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    random_complex(rng, n, n).hermitian_part()
}

/// Ginibre state `G G^dagger / Tr` of the given rank.
pub fn random_state(rng: &mut impl Rng, dim: usize, rank: usize) -> DensityMatrix {
    let g = random_complex(rng, dim, rank);
    let m = &g * &adjoint(&g);
    let tr: f64 = (0..dim).map(|i| m[(i, i)].re).sum();
    DensityMatrix::new_unchecked(m.scale_real(1.0 / tr).hermitian_part())
}

/// Haar-ish random 2x2 unitary from a normalised quaternion.
pub fn random_unitary_2(rng: &mut impl Rng) -> ComplexMatrix {
    let q: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (a, b, c, d) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    let phase = C64::from_polar(1.0, rng.random_range(0.0..core::f64::consts::TAU));
    ComplexMatrix::from_vec(
        2,
        2,
        alloc::vec![
            C64::new(a, b) * phase,
            C64::new(c, d) * phase,
            C64::new(-c, d) * phase,
            C64::new(a, -b) * phase,
        ],
    )
    .unwrap()
}
