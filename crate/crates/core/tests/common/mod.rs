#![allow(dead_code)]

use nmprobe_core::qops::{adjoint, ComplexMatrix, DensityMatrix, C64};
use rand::Rng;

pub fn random_complex(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize, scale: f64) -> ComplexMatrix {
    random_complex(rng, n, n).hermitian_part().scale_real(scale)
}

pub fn random_state(rng: &mut impl Rng, dim: usize, rank: usize) -> DensityMatrix {
    let g = random_complex(rng, dim, rank);
    let m = &g * &adjoint(&g);
    let tr: f64 = (0..dim).map(|i| m[(i, i)].re).sum();
    DensityMatrix::new(m.scale_real(1.0 / tr).hermitian_part()).unwrap()
}
