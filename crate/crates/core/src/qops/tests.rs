use super::*;
use crate::testutil::{random_hermitian, random_state};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn assert_close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) {
    let d = frobenius_distance(a, b).unwrap();
    assert!(d <= tol, "matrices differ by {d:e}\n{a:?}\n{b:?}");
}

#[test]
fn kron_identities() {
    let i2 = ComplexMatrix::identity(2);
    assert_close(&kron(&i2, &i2), &ComplexMatrix::identity(4), 0.0);
    assert_close(
        &kron(&sigma_z(), &i2),
        &ComplexMatrix::from_real_diagonal(&[1.0, 1.0, -1.0, -1.0]),
        0.0,
    );
}

#[test]
fn kron_xx_flips_both_bits() {
    let xx = kron(&sigma_x(), &sigma_x());
    let ket00 = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
    let out = xx.apply(&ket00);
    assert_eq!(out[3], C64::new(1.0, 0.0));
    assert!(out[..3].iter().all(|z| z.norm() == 0.0));
}

#[test]
fn partial_trace_of_product_and_bell() {
    let layout = SubsystemLayout::qubits(&["a", "b"]);
    let r = partial_trace(&DensityMatrix::basis(4, 0), &layout, &[0]).unwrap();
    assert_close(&r, DensityMatrix::basis(2, 0).matrix(), 0.0);

    let h = C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
    let z = C64::new(0.0, 0.0);
    let bell = DensityMatrix::from_pure(&[h, z, z, h]).unwrap();
    let r = partial_trace(&bell, &layout, &[0]).unwrap();
    assert_close(&r, &ComplexMatrix::identity(2).scale_real(0.5), 1e-15);
}

/// Explicit bit-loop reduction of an (A, Q, E) state onto (A, Q).
fn trace_out_last_qubit_oracle(rho: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(4, 4);
    for a in 0..2 {
        for q in 0..2 {
            for a2 in 0..2 {
                for q2 in 0..2 {
                    let mut s = C64::new(0.0, 0.0);
                    for e in 0..2 {
                        s += rho[(a * 4 + q * 2 + e, a2 * 4 + q2 * 2 + e)];
                    }
                    out[(a * 2 + q, a2 * 2 + q2)] = s;
                }
            }
        }
    }
    out
}

#[test]
fn partial_trace_matches_index_summation_after_half_swap() {
    // Bell pair on (A, Q) with Q half-swapped into E.
    let s = C64::new(0.5, 0.0);
    let z = C64::new(0.0, 0.0);
    let mut psi = [z; 8];
    psi[0b100] = C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
    psi[0b010] = s;
    psi[0b001] = C64::new(0.0, -0.5);
    let rho = DensityMatrix::from_pure(&psi).unwrap();
    let layout = SubsystemLayout::qubits(&["Ancilla", "Qubit", "Environment"]);
    let reduced = partial_trace(&rho, &layout, &[0, 1]).unwrap();
    assert_eq!(reduced.rows(), 4);
    assert!((trace(&reduced).unwrap().re - 1.0).abs() < 1e-12);
    assert_close(&reduced, &trace_out_last_qubit_oracle(&rho), 1e-15);

    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..20 {
        let rho = random_state(&mut rng, 8, 8);
        let reduced = partial_trace(&rho, &layout, &[0, 1]).unwrap();
        assert_close(&reduced, &trace_out_last_qubit_oracle(&rho), 1e-14);
    }
}

#[test]
fn partial_trace_rejects_bad_indices() {
    let layout = SubsystemLayout::qubits(&["a", "b"]);
    let rho = DensityMatrix::maximally_mixed(4);
    assert!(matches!(
        partial_trace(&rho, &layout, &[2]),
        Err(Error::SubsystemOutOfRange { index: 2, count: 2 })
    ));
    assert!(partial_trace(&DensityMatrix::maximally_mixed(8), &layout, &[0]).is_err());
}

#[test]
fn eigs_of_paulis() {
    let e = hermitian_eigs(&sigma_z()).unwrap();
    assert_eq!(e.values, vec![-1.0, 1.0]);
    assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
    assert!((e.vectors[(0, 1)].norm() - 1.0).abs() < 1e-15);

    let e = hermitian_eigs(&sigma_x()).unwrap();
    assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
    let h = core::f64::consts::FRAC_1_SQRT_2;
    for k in 0..2 {
        for r in 0..2 {
            assert!((e.vectors[(r, k)].norm() - h).abs() < 1e-12);
        }
    }
}

fn check_decomposition(h: &ComplexMatrix, tol: f64) {
    let e = hermitian_eigs(h).unwrap();
    let n = h.rows();
    for k in 0..n {
        let v = e.vectors.column(k);
        let hv = h.apply(&v);
        let resid: f64 = hv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b * e.values[k]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(resid < tol, "eigenpair residual {resid:e}");
    }
    let gram = &adjoint(&e.vectors) * &e.vectors;
    assert_close(&gram, &ComplexMatrix::identity(n), tol);
    assert_close(&e.reconstruct_with(|x| x), h, tol);
    assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn eigs_reconstruct_random_hermitian() {
    let mut rng = StdRng::seed_from_u64(11);
    for n in [2, 4, 8, 16] {
        for _ in 0..10 {
            check_decomposition(&random_hermitian(&mut rng, n), 1e-8);
        }
    }
    // Degenerate spectrum.
    check_decomposition(&ComplexMatrix::identity(8).scale_real(0.125), 1e-12);
}

#[test]
fn eigs_reject_non_hermitian() {
    let mut m = sigma_x();
    m[(0, 1)] = C64::new(2.0, 0.0);
    assert!(matches!(hermitian_eigs(&m), Err(Error::NotHermitian { .. })));
    assert!(matches!(
        hermitian_eigs(&ComplexMatrix::zeros(2, 3)),
        Err(Error::NotSquare { .. })
    ));
}

#[test]
fn trace_distance_examples() {
    let zero = DensityMatrix::basis(2, 0);
    let one = DensityMatrix::basis(2, 1);
    assert!(trace_distance(&zero, &zero).unwrap().abs() < 1e-15);
    assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < 1e-15);
    let h = C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
    let plus = DensityMatrix::from_pure(&[h, h]).unwrap();
    // rho0 - rho+ = [[1/2, -1/2], [-1/2, -1/2]] has eigenvalues ±1/√2.
    let d = trace_distance(&zero, &plus).unwrap();
    assert!((d - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    assert!(trace_distance(&zero, &DensityMatrix::basis(4, 0)).is_err());
}

#[test]
fn fidelity_of_known_pairs() {
    let zero = DensityMatrix::basis(2, 0);
    let mixed = DensityMatrix::maximally_mixed(2);
    assert!((fidelity(&zero, &zero).unwrap() - 1.0).abs() < 1e-12);
    assert!((fidelity(&zero, &mixed).unwrap() - 0.5).abs() < 1e-12);
    assert!(fidelity(&zero, &DensityMatrix::basis(2, 1)).unwrap().abs() < 1e-12);
}

#[test]
fn density_matrix_validation() {
    assert!(DensityMatrix::new(ComplexMatrix::identity(2)).is_err());
    assert!(DensityMatrix::new(ComplexMatrix::from_real_diagonal(&[1.5, -0.5])).is_err());
    assert!(DensityMatrix::new(ComplexMatrix::identity(2).scale_real(0.5)).is_ok());
}

#[test]
fn embed_places_operator_on_site() {
    let layout = SubsystemLayout::qubits(&["a", "b", "c"]);
    let z1 = embed(&sigma_z(), 1, &layout).unwrap();
    let expect = kron(&kron(&ComplexMatrix::identity(2), &sigma_z()), &ComplexMatrix::identity(2));
    assert_close(&z1, &expect, 0.0);
    assert!(embed(&sigma_z(), 3, &layout).is_err());
}

fn matrix_strategy(n: usize) -> impl Strategy<Value = ComplexMatrix> {
    proptest::collection::vec(-1.0f64..1.0, 2 * n * n).prop_map(move |v| {
        ComplexMatrix::from_fn(n, n, |r, c| C64::new(v[2 * (r * n + c)], v[2 * (r * n + c) + 1]))
    })
}

proptest! {
    #[test]
    fn kron_is_associative(a in matrix_strategy(2), b in matrix_strategy(2), c in matrix_strategy(2)) {
        let left = kron(&kron(&a, &b), &c);
        let right = kron(&a, &kron(&b, &c));
        prop_assert!((&left - &right).max_abs() <= 1e-12);
    }

    #[test]
    fn partial_trace_preserves_trace(seed in any::<u64>(), keep in 0usize..3) {
        let mut rng = StdRng::seed_from_u64(seed);
        let rho = random_state(&mut rng, 8, 1 + (seed % 8) as usize);
        let layout = SubsystemLayout::qubits(&["a", "b", "c"]);
        let r = partial_trace(&rho, &layout, &[keep]).unwrap();
        prop_assert!((trace(&r).unwrap() - trace(&rho).unwrap()).norm() <= 1e-12);
    }

    #[test]
    fn eigenvalue_sum_is_trace(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, 8);
        let sum: f64 = hermitian_eigs(&h).unwrap().values.iter().sum();
        prop_assert!((sum - trace(&h).unwrap().re).abs() <= 1e-9);
    }
}

#[test]
fn trace_distance_triangle_inequality() {
    let mut rng = StdRng::seed_from_u64(99);
    for i in 0..100 {
        let dim = [2, 4, 8][i % 3];
        let a = random_state(&mut rng, dim, dim);
        let b = random_state(&mut rng, dim, 1);
        let c = random_state(&mut rng, dim, 2);
        let ab = trace_distance(&a, &b).unwrap();
        let bc = trace_distance(&b, &c).unwrap();
        let ac = trace_distance(&a, &c).unwrap();
        assert!(ac <= ab + bc + 1e-9);
        assert!((0.0..=1.0 + 1e-12).contains(&ab));
    }
}
