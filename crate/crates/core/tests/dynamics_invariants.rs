mod common;

use common::{random_complex, random_hermitian, random_state};
use nmprobe_core::dynamics::{evolve, IntegratorConfig, Method};
use nmprobe_core::measures::{non_markovianity, ConcurrenceSeries};
use nmprobe_core::model::{
    bell_state, collapse_operators_on, pair_layout, CollapseOperator, DephasingSpec, EvolveStage,
    QubitName, SystemSpec,
};
use nmprobe_core::qops::{trace_distance, ComplexMatrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_generator(rng: &mut ChaCha8Rng, n: usize) -> (ComplexMatrix, Vec<CollapseOperator>) {
    let h = random_hermitian(rng, n, 2.0);
    let ops = (0..3)
        .map(|k| CollapseOperator::new(random_complex(rng, n, n).scale_real(0.5), 0.4, format!("c{k}")))
        .collect();
    (h, ops)
}

fn cfg(step: f64, record_every: usize) -> IntegratorConfig {
    IntegratorConfig { step, method: Method::FixedRk4, record_every }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn recorded_states_stay_physical(seed in any::<u64>(), n in prop::sample::select(vec![2usize, 4, 8])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, ops) = random_generator(&mut rng, n);
        let rho0 = random_state(&mut rng, n, 1);
        let traj = evolve(&rho0, &h, &ops, 2.0, &cfg(0.001, 100)).unwrap();
        for s in &traj.states {
            prop_assert!((s.trace_re() - 1.0).abs() < 1e-9);
            prop_assert!(s.hermitian_defect() < 1e-12);
            prop_assert!(s.min_eigenvalue().unwrap() >= -1e-9);
        }
        traj.check_invariants(1e-9, 1e-9).unwrap();
    }

    #[test]
    fn trace_distance_contracts(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, ops) = random_generator(&mut rng, 4);
        let a = random_state(&mut rng, 4, 2);
        let b = random_state(&mut rng, 4, 3);
        let cfg = cfg(0.001, 25);
        let ta = evolve(&a, &h, &ops, 1.5, &cfg).unwrap();
        let tb = evolve(&b, &h, &ops, 1.5, &cfg).unwrap();
        let d: Vec<f64> = ta.states.iter().zip(&tb.states).map(|(x, y)| trace_distance(x, y).unwrap()).collect();
        for w in d.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn local_markovian_noise_never_revives_concurrence(seed in any::<u64>(), gq in 0.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = SystemSpec::measured_device();
        let mut stage = EvolveStage::idle(4.0);
        stage.dephasing.push(DephasingSpec { qubit: QubitName::Qubit, gamma: gq });
        let layout = pair_layout();
        let ops = collapse_operators_on(&spec, &stage, &layout).unwrap();
        let rho0 = if seed % 2 == 0 { bell_state(rng.random_range(0.0..6.0)) } else { random_state(&mut rng, 4, 2) };
        let traj = evolve(&rho0, &ComplexMatrix::zeros(4, 4), &ops, 4.0, &cfg(0.001, 50))
            .unwrap()
            .with_observables(&layout)
            .unwrap();
        let c = traj.concurrence().unwrap();
        prop_assert!(non_markovianity(&c).unwrap() <= 1e-6);
    }
}

use rand::Rng;

#[test]
fn halving_the_step_changes_little() {
    use nmprobe_core::dynamics::evolve_schedule;
    use nmprobe_core::model::{with_environment_ground, CouplingSpec, Stage, StageSchedule, OMEGA_QE};
    let spec = SystemSpec::measured_device();
    let mut stage = EvolveStage::idle(6.0);
    stage.couplings.push(CouplingSpec::resonant(QubitName::Qubit, QubitName::Environment, OMEGA_QE));
    stage.dephasing.push(DephasingSpec { qubit: QubitName::Environment, gamma: 1.5 });
    let schedule = StageSchedule::new(vec![Stage::Evolve(stage)]);
    let rho0 = with_environment_ground(&bell_state(0.0));
    let coarse = evolve_schedule(&rho0, &spec, &schedule, &cfg(0.001, 50)).unwrap();
    let fine = evolve_schedule(&rho0, &spec, &schedule, &cfg(0.0005, 100)).unwrap();
    assert_eq!(coarse.times.len(), fine.times.len());
    let cc = coarse.observable("concurrence").unwrap();
    let cf = fine.observable("concurrence").unwrap();
    let worst = cc.iter().zip(cf).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst}");
    let series = ConcurrenceSeries::new(coarse.times.clone(), cc.to_vec()).unwrap();
    assert!(series.len() > 100);
}
