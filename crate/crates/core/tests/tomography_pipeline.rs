mod common;

use common::random_state;
use nmprobe_core::measures::concurrence;
use nmprobe_core::model::bell_state;
use nmprobe_core::qops::fidelity;
use nmprobe_core::tomography::{
    mle_from_records, mle_reconstruct, pauli_expectations, simulate_records, ReadoutModel,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn exact_round_trip_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 1.0;
    for k in 0..100 {
        let rho = random_state(&mut rng, 4, 1 + k % 4);
        let (est, diag) = mle_reconstruct(&pauli_expectations(&rho).unwrap()).unwrap();
        worst = worst.min(fidelity(&rho, &est).unwrap());
        assert!(est.min_eigenvalue().unwrap() >= -1e-12);
        assert!((est.trace_re() - 1.0).abs() < 1e-12);
        assert!(diag.cost < 1e-10, "{diag:?}");
    }
    assert!(worst >= 1.0 - 1e-6, "{worst}");
}

#[test]
fn noisy_reconstructions_are_states_and_reproducible() {
    let bell = bell_state(0.0);
    let readout = ReadoutModel::device();
    let a = simulate_records(&bell, &readout, 2000, 9).unwrap();
    let b = simulate_records(&bell, &readout, 2000, 9).unwrap();
    assert_eq!(a, b);
    let (rho, diag) = mle_from_records(&a).unwrap();
    assert!(rho.min_eigenvalue().unwrap() >= -1e-12);
    assert!((rho.trace_re() - 1.0).abs() < 1e-12);
    assert!(diag.iterations <= 1000);
    let c = concurrence(&rho).unwrap();
    assert!(c > 0.7 && c < 1.0, "{c}");
}
