use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `<psi| P |psi>` for a Pauli string given as (qubit, 'X'|'Y'|'Z') pairs,
/// evaluated basis state by basis state.
fn pauli_expectation(state: &StateVector<f64>, paulis: &[(usize, char)]) -> f64 {
    let amps = state.amplitudes();
    let mut total = c(0.0, 0.0);
    for (i, a) in amps.iter().enumerate() {
        let mut j = i;
        let mut phase = c(1.0, 0.0);
        for &(q, p) in paulis {
            let bit = (i >> q) & 1;
            match p {
                'X' => j ^= 1 << q,
                'Y' => {
                    j ^= 1 << q;
                    phase *= if bit == 0 { c(0.0, 1.0) } else { c(0.0, -1.0) };
                }
                'Z' => {
                    if bit == 1 {
                        phase = -phase;
                    }
                }
                _ => unreachable!(),
            }
        }
        total += amps[j].conj() * phase * a;
    }
    total.re
}

fn hadamard_all(n: usize) -> Vec<Gate<f64>> {
    (0..n)
        .map(|q| Gate::Su2 {
            qubit: q,
            theta: PI / 2.0,
            phi: PI / 2.0,
            lambda: PI / 2.0,
        })
        .collect()
}

fn cluster_gates(n: usize) -> Vec<Gate<f64>> {
    let mut gates = hadamard_all(n);
    gates.extend((0..n.saturating_sub(1)).map(|q| Gate::Cz {
        control: q,
        target: q + 1,
    }));
    gates
}

fn random_state(n: usize, rng: &mut impl Rng) -> StateVector<f64> {
    let mut amps: Vec<Complex64> = (0..1 << n)
        .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    StateVector::from_amplitudes(amps).unwrap()
}

#[test]
fn rx_zero_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = random_state(3, &mut rng);
    let out = apply_gate(
        &s,
        &Gate::Rx {
            qubit: 1,
            angle: 0.0,
        },
    )
    .unwrap();
    assert_eq!(out, s);
}

#[test]
fn rx_pi_flips() {
    let out = apply_gate(
        &StateVector::zero(1),
        &Gate::Rx {
            qubit: 0,
            angle: PI,
        },
    )
    .unwrap();
    assert!((out.amplitudes()[1].norm() - 1.0).abs() < 1e-15);
}

#[test]
fn cz_on_plus_plus_stabilizers() {
    let s = run_gates(2, &cluster_gates(2)).unwrap();
    assert!((pauli_expectation(&s, &[(0, 'X'), (1, 'Z')]) - 1.0).abs() < 1e-12);
    assert!((pauli_expectation(&s, &[(0, 'Z'), (1, 'X')]) - 1.0).abs() < 1e-12);
}

#[test]
fn two_qubit_cluster_amplitudes() {
    // Up to a global phase: (1, 1, 1, -1) / 2.
    let s = run_gates(2, &cluster_gates(2)).unwrap();
    let a = s.amplitudes();
    let phase = a[0] / a[0].norm();
    let expected = [0.5, 0.5, 0.5, -0.5];
    for (x, e) in a.iter().zip(expected) {
        assert!((x / phase - c(e, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn out_of_range_errors() {
    let s = StateVector::<f64>::zero(2);
    assert!(apply_gate(
        &s,
        &Gate::Rz {
            qubit: 2,
            angle: 0.1
        }
    )
    .is_err());
    assert!(s.expectation_z(5).is_err());
    assert!(s.reduced_density(2).is_err());
}

#[test]
fn expectation_examples() {
    let s = StateVector::<f64>::zero(4);
    for q in 0..4 {
        assert_eq!(s.expectation_z(q).unwrap(), 1.0);
    }
    let plus = run_gates(1, &hadamard_all(1)).unwrap();
    assert!(plus.expectation_z(0).unwrap().abs() < 1e-12);
    let h = FRAC_1_SQRT_2;
    // (|01> + |10>)/sqrt2 with qubit 0 as the low bit.
    let s =
        StateVector::from_amplitudes(vec![c(0.0, 0.0), c(h, 0.0), c(h, 0.0), c(0.0, 0.0)]).unwrap();
    assert!(s.expectation_z(0).unwrap().abs() < 1e-15);
}

#[test]
fn reduced_density_examples() {
    let h = FRAC_1_SQRT_2;
    // |0> on qubit 0, |+> on qubit 1.
    let prod =
        StateVector::from_amplitudes(vec![c(h, 0.0), c(0.0, 0.0), c(h, 0.0), c(0.0, 0.0)]).unwrap();
    let rho = prod.reduced_density(0).unwrap();
    assert!((rho.prob0() - 1.0).abs() < 1e-15 && rho.r01().norm() < 1e-15);

    let bell =
        StateVector::from_amplitudes(vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)]).unwrap();
    for q in 0..2 {
        let rho = bell.reduced_density(q).unwrap();
        assert!((rho.prob0() - 0.5).abs() < 1e-15);
        assert!(rho.r01().norm() < 1e-15);
    }
}

/// Builds the full 2^n x 2^n density matrix and traces out the rest by brute force.
fn brute_force_reduced(state: &StateVector<f64>, qubit: usize) -> [Complex64; 4] {
    let a = state.amplitudes();
    let dim = a.len();
    let full: Vec<Vec<Complex64>> = (0..dim)
        .map(|i| (0..dim).map(|j| a[i] * a[j].conj()).collect())
        .collect();
    let mut out = [c(0.0, 0.0); 4];
    for r in 0..2 {
        for s in 0..2 {
            for i in 0..dim {
                for j in 0..dim {
                    let rest_i = i & !(1 << qubit);
                    let rest_j = j & !(1 << qubit);
                    if rest_i == rest_j && (i >> qubit) & 1 == r && (j >> qubit) & 1 == s {
                        out[2 * r + s] += full[i][j];
                    }
                }
            }
        }
    }
    out
}

#[test]
fn reduced_density_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 1..=4 {
        for _ in 0..5 {
            let s = random_state(n, &mut rng);
            for q in 0..n {
                let rho = s.reduced_density(q).unwrap();
                let oracle = brute_force_reduced(&s, q);
                for (x, y) in rho.entries().iter().zip(oracle) {
                    assert!((x - y).norm() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let zero = StateVector::<f64>::zero(2);
    assert_eq!(
        zero.sample_counts(1, 100, &mut rng).unwrap(),
        Counts {
            zeros: 100,
            ones: 0
        }
    );
    assert!(zero.sample_counts(0, 0, &mut rng).is_err());

    let plus = run_gates(1, &hadamard_all(1)).unwrap();
    let counts = plus.sample_counts(0, 1_000_000, &mut rng).unwrap();
    assert!((counts.ones as f64 / 1e6 - 0.5).abs() < 0.002);

    let a = plus
        .sample_counts(0, 1000, &mut ChaCha8Rng::seed_from_u64(11))
        .unwrap();
    let b = plus
        .sample_counts(0, 1000, &mut ChaCha8Rng::seed_from_u64(11))
        .unwrap();
    assert_eq!(a, b);
}

#[test]
fn cluster_state_stabilizers_up_to_20_qubits() {
    for n in [3, 5, 8, 13, 20] {
        let s = run_gates(n, &cluster_gates(n)).unwrap();
        for i in 1..n - 1 {
            let k = pauli_expectation(&s, &[(i - 1, 'Z'), (i, 'X'), (i + 1, 'Z')]);
            assert!((k - 1.0).abs() < 1e-10, "n={n} i={i} <K>={k}");
        }
    }
}

#[test]
fn single_precision_path() {
    let mut s = StateVector::<f32>::zero(3);
    s.apply(&Gate::Su2 {
        qubit: 1,
        theta: 0.7,
        phi: 0.2,
        lambda: -1.1,
    })
    .unwrap();
    s.apply(&Gate::Cz {
        control: 1,
        target: 2,
    })
    .unwrap();
    assert!((s.norm_sqr() - 1.0).abs() < 1e-6);
    let rho = s.reduced_density(1).unwrap();
    assert!((rho.trace() - 1.0).abs() < 1e-6);
}

fn arb_gate(n: usize) -> impl Strategy<Value = Gate<f64>> {
    let angle = -10.0..10.0f64;
    prop_oneof![
        (0..n, angle.clone()).prop_map(|(qubit, angle)| Gate::Rx { qubit, angle }),
        (0..n, angle.clone()).prop_map(|(qubit, angle)| Gate::Rz { qubit, angle }),
        (0..n, angle.clone(), angle.clone(), angle).prop_map(|(qubit, theta, phi, lambda)| {
            Gate::Su2 {
                qubit,
                theta,
                phi,
                lambda,
            }
        }),
        (0..n, 1..n).prop_map(move |(a, off)| Gate::Cz {
            control: a,
            target: (a + off) % n
        }),
    ]
}

proptest! {
    #[test]
    fn norm_is_preserved(gates in prop::collection::vec(arb_gate(5), 0..60)) {
        let s = run_gates(5, &gates).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fidelity_symmetric_and_bounded(
        a in prop::array::uniform3(-0.577..0.577f64),
        b in prop::array::uniform3(-0.577..0.577f64),
    ) {
        let rho = DensityMatrix1Q::from_bloch(a[0], a[1], a[2]).unwrap();
        let sigma = DensityMatrix1Q::from_bloch(b[0], b[1], b[2]).unwrap();
        let f = rho.fidelity(&sigma);
        prop_assert!((f - sigma.fidelity(&rho)).abs() < 1e-14);
        prop_assert!((0.0..=1.0).contains(&f));
        if f >= 1.0 {
            prop_assert!(rho.max_abs_diff(&sigma) < 1e-8);
        }
    }
}
