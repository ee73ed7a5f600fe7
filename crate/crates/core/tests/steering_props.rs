use std::f64::consts::FRAC_1_SQRT_2;

use jmsteer::bridge::{assemblage_of, depolarize_state, measurements_of};
use jmsteer::conic::SolverTolerances;
use jmsteer::hermitian::HermitianOperator;
use jmsteer::incompatibility::{jm_feasible, jm_robustness, qubit_pair_unbiased_criterion};
use jmsteer::measurements::{depolarize, standard_set, MeasurementSet, Povm, SetParams};
use jmsteer::random::random_density;
use jmsteer::steering::{induced_assemblage, lhs_feasible, steering_robustness, steering_robustness_bisection};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tol() -> SolverTolerances {
    SolverTolerances::default()
}

fn random_set(rng: &mut ChaCha8Rng, d: usize) -> MeasurementSet {
    MeasurementSet::new(vec![Povm::random(rng, d, 3, 1), Povm::random_pvm(rng, d), Povm::random(rng, d, 2, 2)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn induced_assemblage_is_no_signaling(seed in any::<u64>(), d_a in 2usize..4, d_b in 1usize..4, rank in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = random_density(&mut rng, d_a * d_b, rank);
        let set = random_set(&mut rng, d_a);
        let asm = induced_assemblage(&state, &set).unwrap();
        let rho_b = asm.rho_b();
        for row in asm.members() {
            let sum = row.iter().fold(HermitianOperator::zeros(d_b), |acc, m| &acc + m);
            prop_assert!(sum.max_abs_diff(&rho_b) <= 1e-12);
        }
    }

    #[test]
    fn bridge_is_a_bijection(seed in any::<u64>(), d in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = random_set(&mut rng, d);
        let back = measurements_of(&assemblage_of(&set)).unwrap();
        for k in 0..set.len() {
            for x in 0..set.povm(k).outcomes() {
                prop_assert!(back.effect(k, x).max_abs_diff(set.effect(k, x)) <= 1e-12);
            }
        }
        let asm = assemblage_of(&set);
        prop_assert!(assemblage_of(&measurements_of(&asm).unwrap()).max_abs_diff(&asm) <= 1e-12);
    }
}

#[test]
fn jm_sets_never_steer() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for d in [2, 3] {
        let base = random_set(&mut rng, d);
        let r = jm_robustness(&base, &tol()).unwrap().lambda;
        let jm = depolarize(&base, 0.97 * r).unwrap();
        assert!(jm_feasible(&jm, &tol()).unwrap().0);
        for _ in 0..20 {
            let d_b = 2;
            let state = random_density(&mut ChaCha8Rng::seed_from_u64(rand::Rng::random(&mut rng)), d * d_b, 1 + d);
            let asm = induced_assemblage(&state, &jm).unwrap();
            assert!(lhs_feasible(&asm, &tol()).unwrap().0);
        }
    }
}

#[test]
fn pauli_pair_on_phi_plus() {
    let phi = HermitianOperator::max_entangled(2);
    let sharp = standard_set("pauli_xz", &SetParams::default()).unwrap();
    for lambda in [0.6, 0.7, 0.72, 0.8] {
        let asm = induced_assemblage(&phi, &depolarize(&sharp, lambda).unwrap()).unwrap();
        let lhs = lhs_feasible(&asm, &tol()).unwrap().0;
        assert_eq!(lhs, lambda <= FRAC_1_SQRT_2);
        let analytic = qubit_pair_unbiased_criterion([lambda, 0.0, 0.0], [0.0, 0.0, lambda]).unwrap();
        assert_eq!(lhs, analytic);
    }
    let r = steering_robustness(&induced_assemblage(&phi, &sharp).unwrap(), &tol()).unwrap().lambda;
    assert!((r - FRAC_1_SQRT_2).abs() < 1e-5);
}

#[test]
fn state_noise_matches_assemblage_noise_on_phi_plus() {
    let phi = HermitianOperator::max_entangled(2);
    let set = standard_set("pauli_xyz", &SetParams::default()).unwrap();
    let asm = induced_assemblage(&phi, &set).unwrap();
    for lambda in [0.2, 0.55, 0.9] {
        let via_state = induced_assemblage(&depolarize_state(&phi, 2, lambda).unwrap(), &set).unwrap();
        assert!(via_state.max_abs_diff(&asm.depolarize(lambda).unwrap()) < 1e-12);
    }
}

#[test]
fn robustness_methods_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let state = random_density(&mut rng, 4, 1);
    let asm = induced_assemblage(&state, &standard_set("pauli_xyz", &SetParams::default()).unwrap()).unwrap();
    let d = steering_robustness(&asm, &tol()).unwrap().lambda;
    let b = steering_robustness_bisection(&asm, 1e-7, &tol()).unwrap().lambda;
    assert!((d - b).abs() < 1e-5, "{d} vs {b}");
}
