use jmsteer::conic::SolverTolerances;
use jmsteer::hermitian::{CMatrix, HermitianOperator, C64};
use jmsteer::incompatibility::{
    jm_feasible, jm_feasible_with_columns, jm_robustness, jm_robustness_bisection, parent_povm,
    qubit_pair_unbiased_criterion,
};
use jmsteer::measurements::{coexistence_c3_pair, depolarize, standard_set, MeasurementSet, Povm, SetParams};
use jmsteer::random::haar_unitary;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SDP optimum for the C³ pair, kept as a regression value.
const C3_PAIR_ROBUSTNESS: f64 = 0.908549792;

fn tol() -> SolverTolerances {
    SolverTolerances::default()
}

fn random_stochastic(rng: &mut ChaCha8Rng, counts: &[usize]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .map(|&n| {
            let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
            let s: f64 = raw.iter().sum();
            let mut row: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let fix: f64 = row[..n - 1].iter().sum();
            row[n - 1] = 1.0 - fix;
            row
        })
        .collect()
}

/// Alternating projections between the PSD blocks and the affine marginal
/// constraints of a deterministic joint measurement; returns the final gap.
fn alternating_projection_gap(set: &MeasurementSet, iterations: usize) -> f64 {
    let counts = set.outcome_counts();
    let d = set.dim();
    let mut tuples = vec![vec![]];
    for &n in &counts {
        tuples = tuples
            .into_iter()
            .flat_map(|t: Vec<usize>| {
                (0..n).map(move |x| {
                    let mut t = t.clone();
                    t.push(x);
                    t
                })
            })
            .collect();
    }
    // constraint rows (k, x) over tuples
    let rows: Vec<(usize, usize)> = counts.iter().enumerate().flat_map(|(k, &n)| (0..n).map(move |x| (k, x))).collect();
    let l = DMatrix::from_fn(rows.len(), tuples.len(), |r, c| {
        if tuples[c][rows[r].0] == rows[r].1 {
            1.0
        } else {
            0.0
        }
    });
    let pinv = (&l * l.transpose()).pseudo_inverse(1e-10).unwrap();
    let proj = l.transpose() * pinv;
    let targets: Vec<&HermitianOperator> = rows.iter().map(|&(k, x)| set.effect(k, x)).collect();

    let mut blocks = vec![CMatrix::identity(d, d) * C64::new(1.0 / tuples.len() as f64, 0.0); tuples.len()];
    let mut gap = f64::INFINITY;
    for _ in 0..iterations {
        // affine projection, entrywise
        let mut affine = blocks.clone();
        for i in 0..d {
            for j in 0..d {
                let v: Vec<C64> = blocks.iter().map(|b| b[(i, j)]).collect();
                let resid: Vec<C64> = (0..rows.len())
                    .map(|r| {
                        let lv: C64 = (0..tuples.len()).map(|c| v[c] * l[(r, c)]).sum();
                        lv - targets[r].matrix()[(i, j)]
                    })
                    .collect();
                for c in 0..tuples.len() {
                    let corr: C64 = (0..rows.len()).map(|r| resid[r] * proj[(c, r)]).sum();
                    affine[c][(i, j)] = v[c] - corr;
                }
            }
        }
        // PSD projection
        gap = 0.0;
        for (b, a) in blocks.iter_mut().zip(&affine) {
            let h = (a + a.adjoint()) * C64::new(0.5, 0.0);
            let eig = nalgebra::SymmetricEigen::new(h.clone());
            let clipped = eig.eigenvalues.map(|e| C64::new(e.max(0.0), 0.0));
            let p = &eig.eigenvectors * CMatrix::from_diagonal(&clipped) * eig.eigenvectors.adjoint();
            gap += (&p - &h).norm_squared();
            *b = p;
        }
        gap = gap.sqrt();
        if gap < 1e-10 {
            break;
        }
    }
    gap
}

#[test]
fn c3_pair_robustness_regression_and_oracle() {
    let pair = coexistence_c3_pair();
    let sdp = jm_robustness(&pair, &tol()).unwrap().lambda;
    assert!((sdp - C3_PAIR_ROBUSTNESS).abs() < 1e-6, "sdp {sdp}");
    assert!(sdp < 1.0);
    let bis = jm_robustness_bisection(&pair, 1e-7, &tol()).unwrap().lambda;
    assert!((bis - sdp).abs() < 1e-5, "bisection {bis}");

    // independent oracle: bisection with alternating projections
    let (mut lo, mut hi) = (0.85, 0.95);
    for _ in 0..10 {
        let mid = 0.5 * (lo + hi);
        if alternating_projection_gap(&depolarize(&pair, mid).unwrap(), 4000) < 1e-7 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((0.5 * (lo + hi) - sdp).abs() < 3e-3, "oracle bracket [{lo}, {hi}] vs {sdp}");
}

#[test]
fn oracle_separates_clear_cases() {
    let xz = standard_set("pauli_xz", &SetParams::default()).unwrap();
    assert!(alternating_projection_gap(&depolarize(&xz, 0.6).unwrap(), 4000) < 1e-7);
    assert!(alternating_projection_gap(&depolarize(&xz, 0.8).unwrap(), 4000) > 1e-4);
}

#[test]
fn random_stochastic_columns_never_flip_feasibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for i in 0..12 {
        let set = MeasurementSet::new(vec![Povm::random_pvm(&mut rng, 2), Povm::random_pvm(&mut rng, 2), Povm::random(&mut rng, 2, 3, 1)]).unwrap();
        let lambda = if i % 2 == 0 { 0.5 } else { 0.95 };
        let set = depolarize(&set, lambda).unwrap();
        let base = jm_feasible(&set, &tol()).unwrap().0;
        let extra: Vec<_> = (0..10).map(|_| random_stochastic(&mut rng, &set.outcome_counts())).collect();
        let augmented = jm_feasible_with_columns(&set, &extra, &tol()).unwrap().0;
        assert_eq!(base, augmented, "instance {i}");
    }
}

#[test]
fn commuting_sets_are_jointly_measurable() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let d = rng.random_range(2..4);
        let u = haar_unitary(&mut rng, d);
        let povms = (0..3)
            .map(|_| {
                let n = rng.random_range(2..4);
                // columns of a random stochastic matrix as diagonal effects
                let weights: Vec<Vec<f64>> = (0..d).map(|_| random_stochastic(&mut rng, &[n]).remove(0)).collect();
                let effects = (0..n)
                    .map(|x| {
                        let diag: Vec<f64> = (0..d).map(|i| weights[i][x]).collect();
                        HermitianOperator::from_real_diagonal(&diag).conjugate_by(&u).unwrap()
                    })
                    .collect();
                Povm::new(effects).unwrap()
            })
            .collect();
        assert!(jm_feasible(&MeasurementSet::new(povms).unwrap(), &tol()).unwrap().0);
    }
}

#[test]
fn subsets_and_added_measurements() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..6 {
        let set = MeasurementSet::new((0..3).map(|_| Povm::random_pvm(&mut rng, 2)).collect()).unwrap();
        let full = jm_robustness(&set, &tol()).unwrap().lambda;
        let jm_set = depolarize(&set, 0.98 * full).unwrap();
        assert!(jm_feasible(&jm_set, &tol()).unwrap().0);
        for ks in [vec![0, 1], vec![1, 2], vec![0, 2], vec![1]] {
            assert!(jm_feasible(&jm_set.subset(&ks).unwrap(), &tol()).unwrap().0);
        }
        let pair = set.subset(&[0, 1]).unwrap();
        let r_pair = jm_robustness(&pair, &tol()).unwrap().lambda;
        let r_more = jm_robustness(&pair.with(Povm::random_pvm(&mut rng, 2)).unwrap(), &tol()).unwrap().lambda;
        assert!(r_more <= r_pair + 1e-6, "{r_more} > {r_pair}");
    }
}

#[test]
fn feasibility_is_monotone_in_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let set = MeasurementSet::new(vec![Povm::random_pvm(&mut rng, 3), Povm::random_pvm(&mut rng, 3)]).unwrap();
    let r = jm_robustness(&set, &tol()).unwrap().lambda;
    let mut seen_infeasible = false;
    for i in 0..=20 {
        let l = i as f64 / 20.0;
        if (l - r).abs() < 1e-4 {
            continue;
        }
        let ok = jm_feasible(&depolarize(&set, l).unwrap(), &tol()).unwrap().0;
        assert_eq!(ok, l < r, "lambda {l}, robustness {r}");
        if !ok {
            seen_infeasible = true;
        }
        assert!(!(seen_infeasible && ok));
    }
}

#[test]
fn qubit_pair_criterion_matches_sdp() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut disagreements = 0;
    let mut jm_count = 0;
    let mut checked = 0;
    while checked < 200 {
        let mut b = || {
            let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let len = rng.random_range(0.3..1.0) / n.max(1.0);
            [v[0] * len, v[1] * len, v[2] * len]
        };
        let (b1, b2) = (b(), b());
        let norm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let s = norm([b1[0] + b2[0], b1[1] + b2[1], b1[2] + b2[2]]) + norm([b1[0] - b2[0], b1[1] - b2[1], b1[2] - b2[2]]);
        if (s - 2.0).abs() < 1e-5 {
            continue;
        }
        let set = MeasurementSet::new(vec![Povm::qubit_dichotomic(b1).unwrap(), Povm::qubit_dichotomic(b2).unwrap()]).unwrap();
        let analytic = qubit_pair_unbiased_criterion(b1, b2).unwrap();
        let sdp = jm_feasible(&set, &tol()).unwrap().0;
        disagreements += (analytic != sdp) as usize;
        jm_count += sdp as usize;
        checked += 1;
    }
    assert_eq!(disagreements, 0);
    assert!(jm_count > 10 && jm_count < 190, "degenerate sample {jm_count}");
}

#[test]
fn three_pauli_parent_at_one_half() {
    let set = standard_set("pauli_xyz", &SetParams::default()).unwrap();
    let parent = parent_povm(&set, 0.5, &tol()).unwrap();
    assert!(parent.residual <= 1e-7);
    let noisy = depolarize(&set, 0.5).unwrap();
    let marginals = parent.post.apply(parent.povm.effects());
    for k in 0..3 {
        for x in 0..2 {
            assert!(marginals[k][x].max_abs_diff(noisy.effect(k, x)) <= 1e-7);
        }
    }
}

#[test]
fn direct_and_bisection_agree_on_acceptance_sets() {
    let sets = [
        standard_set("pauli_xz", &SetParams::default()).unwrap(),
        standard_set("pauli_xyz", &SetParams::default()).unwrap(),
        jmsteer::measurements::mub_pvms(3, 2).unwrap(),
    ];
    for set in &sets {
        let d = jm_robustness(set, &tol()).unwrap().lambda;
        let b = jm_robustness_bisection(set, 1e-7, &tol()).unwrap().lambda;
        assert!((d - b).abs() < 1e-5, "{d} vs {b}");
    }
}
