use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::simulator::DensityMatrix1Q;

fn random_rho(rng: &mut impl Rng) -> DensityMatrix1Q<f64> {
    let v: [f64; 3] = [
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ];
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let r = rng.gen::<f64>() / n.max(1e-12);
    DensityMatrix1Q::<f64>::from_bloch(v[0] * r, v[1] * r, v[2] * r).unwrap()
}

#[test]
fn sensitivity_examples() {
    assert_eq!(sensitivity(0.7, 0.7, 0.1).unwrap(), 0.0);
    assert!((sensitivity(0.9, 0.4, 0.1).unwrap() - 5.0).abs() < 1e-12);
    assert!(sensitivity(0.9, 0.4, 0.0).is_err());
}

#[test]
fn robustness_scores() {
    assert_eq!(adv_robustness(&[0.0, 0.0, 0.0]).unwrap().mean, 0.5);
    assert!(robustness_score(800.0) >= 0.0 && robustness_score(800.0) < 1e-300);
    assert_eq!(robustness_score(-800.0), 1.0);
    assert!(adv_robustness(&[]).is_err());
    let r = adv_robustness(&[1.0, -1.0]).unwrap();
    assert!((r.mean - 0.5).abs() < 1e-15);
}

#[test]
fn pearson_extremes() {
    let x = [1.0, 2.0, 3.0, 4.0];
    assert!((pearson(&x, &[3.0, 5.0, 7.0, 9.0]).unwrap() - 1.0).abs() < 1e-15);
    assert!((pearson(&x, &[1.0, 0.0, -1.0, -2.0]).unwrap() + 1.0).abs() < 1e-15);
    assert!(pearson(&x, &[1.0; 4]).is_err());
    assert!(pearson(&x[..2], &[1.0, 2.0]).is_err());
}

#[test]
fn cosine_examples() {
    assert!((cosine_similarity(&[1.0, 0.0], &[2.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(cosine_similarity(&[0.0, 0.0], &[2.0, 0.0]).unwrap(), 0.0);
    assert!((cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - FRAC_1_SQRT_2).abs() < 1e-15);
}

#[test]
fn lower_bound_examples() {
    assert_eq!(r_lb(0.5, 0.5).unwrap(), 0.0);
    assert_eq!(r_lb(1.0, 0.0).unwrap(), 0.5);
    assert!((r_lb(0.9, 0.1).unwrap() - 0.2).abs() < 1e-15);
    assert!(r_lb(0.3, 0.7).is_err());
    assert!(r_lb(0.9, 0.2).is_err());
}

#[test]
fn v_star_matches_lower_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let p1: f64 = rng.gen_range(0.5..=1.0);
        let lhs = (1.0 - r_lb(p1, 1.0 - p1).unwrap()).sqrt();
        assert!((lhs - v_star(p1, 1.0 - p1)).abs() < 1e-15);
    }
}

#[test]
fn exact_cos2_is_recovered() {
    let xs: Vec<f64> = (0..41).map(|i| i as f64 / 40.0).collect();
    let truth = CosSqFit {
        a: 0.8,
        omega: 2.5,
        phi: 0.4,
        b: 0.1,
        rmse: 0.0,
    };
    let ys: Vec<f64> = xs.iter().map(|&x| truth.eval(x)).collect();
    let f = fit_cos2(&xs, &ys).unwrap();
    assert!(f.rmse < 1e-8, "{f:?}");
    assert!((f.a - 0.8).abs() < 1e-6 && (f.omega - 2.5).abs() < 1e-6);
    assert!((f.phi - 0.4).abs() < 1e-6 && (f.b - 0.1).abs() < 1e-6);
}

#[test]
fn constant_data_fits_flat() {
    let xs: Vec<f64> = (0..10).map(f64::from).collect();
    let f = fit_cos2(&xs, &[0.3; 10]).unwrap();
    assert_eq!(f.a, 0.0);
    assert!((f.b - 0.3).abs() < 1e-15);
    assert!(f.rmse < 1e-15);
    assert!(fit_cos2(&xs[..4], &[0.3; 4]).is_err());
    assert!(fit_cos2(&[0.0, 2.0, 1.0, 3.0, 4.0], &[0.3; 5]).is_err());
}

#[test]
fn noisy_fit_recovers_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xs: Vec<f64> = (0..41).map(|i| i as f64 / 40.0).collect();
    let truth = CosSqFit {
        a: 0.9,
        omega: 2.0,
        phi: 0.3,
        b: 0.05,
        rmse: 0.0,
    };
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| truth.eval(x) + 0.01 * rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let f = fit_cos2(&xs, &ys).unwrap();
    assert!((f.a - 0.9).abs() / 0.9 < 0.05, "{f:?}");
    assert!((f.omega - 2.0).abs() / 2.0 < 0.05, "{f:?}");
    assert!(f.rmse < 0.015);
}

#[test]
fn upper_bound_from_closed_forms() {
    // p = cos^2(x); D = sin^2(x / 2) = cos^2(x / 2 + pi / 2).
    let p = CosSqFit {
        a: 1.0,
        omega: 1.0,
        phi: 0.0,
        b: 0.0,
        rmse: 0.0,
    };
    let d = CosSqFit {
        a: 1.0,
        omega: 0.5,
        phi: PI / 2.0,
        b: 0.0,
        rmse: 0.0,
    };
    let (e, ub) = extract_r_ub(&p, &d, 1.0).unwrap();
    assert!((e - PI / 4.0).abs() < 1e-12);
    assert!((ub - (PI / 8.0).sin().powi(2)).abs() < 1e-12);
    assert!((ub - 0.14645).abs() < 1e-5);
    assert!(extract_r_ub(&p, &d, 0.5).is_err());
    let flat = CosSqFit {
        a: 0.0,
        omega: 1.0,
        phi: 0.0,
        b: 0.9,
        rmse: 0.0,
    };
    assert!(matches!(
        extract_r_ub(&flat, &d, 10.0),
        Err(crate::Error::NoCrossing { .. })
    ));
}

fn record(id: u64, lb: Option<f64>) -> BoundRecord {
    BoundRecord {
        sample_id: id,
        label: 0,
        p1: 0.8,
        p2: 0.2,
        r_lb: lb,
        p_fit: None,
        d_fit: None,
        eps_star: None,
        r_ub: None,
        status: BoundStatus::Ok,
    }
}

#[test]
fn critical_selection() {
    let recs: Vec<BoundRecord> = (0..10)
        .map(|i| record(i, Some(0.1 * ((i * 7) % 10) as f64)))
        .collect();
    let c = critical_samples(&recs, 0.2).unwrap();
    assert_eq!(
        c.iter().map(|r| r.sample_id).collect::<Vec<_>>(),
        vec![0, 3]
    );
    let flat: Vec<BoundRecord> = (0..10).rev().map(|i| record(i, Some(0.2))).collect();
    let c = critical_samples(&flat, 0.2).unwrap();
    assert_eq!(
        c.iter().map(|r| r.sample_id).collect::<Vec<_>>(),
        vec![0, 1]
    );
    assert!(critical_samples(&[], 0.2).is_err());
    assert!(critical_samples(&[record(1, None)], 0.2).is_err());
}

#[test]
fn vanishing_duration_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = NoiseParams {
        t: 1e-30,
        ..NoiseParams::default()
    };
    for _ in 0..50 {
        let (rho, sigma) = (random_rho(&mut rng), random_rho(&mut rng));
        let (dp, noisy) = noise_delta_p(&rho, &sigma, &params).unwrap();
        assert!((dp - noisy).abs() < 1e-15);
    }
}

#[test]
fn computational_basis_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = NoiseParams::default();
    let g = (-params.t / params.t1).exp();
    for _ in 0..200 {
        let (rho, sigma) = (random_rho(&mut rng), random_rho(&mut rng));
        let (dp, noisy) = noise_delta_p(&rho, &sigma, &params).unwrap();
        assert!((noisy - g * dp).abs() < 1e-12);
    }
    assert!(noise_delta_p(
        &random_rho(&mut rng),
        &random_rho(&mut rng),
        &NoiseParams { t1: 0.0, ..params }
    )
    .is_err());
}

#[test]
fn basis_decomposition_matches_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let params = NoiseParams::default();
    for _ in 0..200 {
        let (rho, sigma) = (random_rho(&mut rng), random_rho(&mut rng));
        let th: f64 = rng.gen_range(0.0..PI);
        let ph: f64 = rng.gen_range(0.0..2.0 * PI);
        let a = Complex64::new((th / 2.0).cos(), 0.0);
        let b = Complex64::from_polar((th / 2.0).sin(), ph);
        let split = basis_delta_p(&rho, &sigma, a, b, &params).unwrap();
        let direct = basis_probability(&rho, a, b) - basis_probability(&sigma, a, b);
        let noisy = basis_probability(&apply_noise(&rho, &params).unwrap(), a, b)
            - basis_probability(&apply_noise(&sigma, &params).unwrap(), a, b);
        assert!((split.dp - direct).abs() < 1e-12);
        assert!((split.dp_noise - noisy).abs() < 1e-12);
    }
}

#[test]
fn hadamard_basis_scales_coherences_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let params = NoiseParams::default();
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    for _ in 0..100 {
        let (rho, sigma) = (random_rho(&mut rng), random_rho(&mut rng));
        let s = basis_delta_p(&rho, &sigma, h, h, &params).unwrap();
        assert!(s.a_part.abs() < 1e-15);
        assert!((s.dp_noise - params.coherence_factor() * s.dp).abs() < 1e-12);
    }
}

#[test]
fn soundness_trivial_cases() {
    use crate::circuits::build_lcei_model;
    use crate::datasets::Sample;
    let model = build_lcei_model(4, &[4]).unwrap();
    let theta: Vec<f64> = (0..model.num_params())
        .map(|i| 0.2 * i as f64 - 0.9)
        .collect();
    let mut s = Sample {
        id: 3,
        features: vec![0.4; 4],
        label: 0,
    };
    s.label = model.predict(&theta, &s.features).unwrap().label_hat;
    let r = verify_lb_soundness(&model, &theta, &s, 0, 2.0 * PI, 1).unwrap();
    assert_eq!((r.qualifying, r.violations), (0, 0));
    let r = verify_lb_soundness(&model, &theta, &s, 20, 2.0 * PI, 1).unwrap();
    assert_eq!(r.violations, 0);
    assert!(r.qualifying >= 20);
}

#[test]
fn sensitivity_along_fixed_directions() {
    use crate::attack::{target_directions, Mask};
    use crate::circuits::{build_lcei_model, GradientMethod};
    use crate::datasets::Sample;
    let model = build_lcei_model(4, &[4, 4]).unwrap();
    let theta: Vec<f64> = (0..model.num_params())
        .map(|i| 0.37 * i as f64 - 1.1)
        .collect();
    let samples: Vec<Sample> = (0..3)
        .map(|i| Sample {
            id: i,
            features: vec![0.3 + 0.2 * i as f64; 4],
            label: (i % 2) as u8,
        })
        .collect();
    let proto = SensitivityProtocol::default();
    let zero = vec![vec![0.0; 4]; 3];
    for r in sensitivity_records(&model, &theta, &samples, &zero, 2.0 * PI, &proto).unwrap() {
        assert_eq!((r.delta_p, r.s, r.cosine_sim), (0.0, 0.0, 0.0));
    }
    let mask = Mask::all(4);
    let dirs = target_directions(&model, &theta, &samples, &mask, GradientMethod::Adjoint).unwrap();
    let recs = sensitivity_records(&model, &theta, &samples, &dirs, 2.0 * PI, &proto).unwrap();
    for r in &recs {
        // The sign direction is always an ascent direction of the loss.
        assert!(r.cosine_sim > 0.0);
        assert!((r.s - r.delta_p / proto.eps_hat).abs() < 1e-12);
    }
    assert!(sensitivity_records(&model, &theta, &samples, &dirs[..2], 1.0, &proto).is_err());
}

proptest! {
    #[test]
    fn score_is_decreasing(a in -20.0f64..20.0, d in 1e-3f64..10.0) {
        prop_assert!(robustness_score(a) > robustness_score(a + d));
    }

    #[test]
    fn lower_bound_range(p1 in 0.5f64..=1.0) {
        let v = r_lb(p1, 1.0 - p1).unwrap();
        prop_assert!((0.0..=0.5).contains(&v));
        prop_assert_eq!(v == 0.0, p1 == 0.5);
    }

    #[test]
    fn canonical_form_is_same_curve(
        a in -2.0f64..2.0, omega in -5.0f64..5.0, phi in -7.0f64..7.0, b in -1.0f64..1.0,
    ) {
        let f = CosSqFit { a, omega, phi, b, rmse: 0.0 };
        let c = f.canonical();
        prop_assert!(c.a >= 0.0 && c.omega >= 0.0 && (0.0..PI).contains(&c.phi));
        for x in [0.0, 0.3, 1.7, -2.2] {
            prop_assert!((f.eval(x) - c.eval(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn channel_output_is_physical(seed in any::<u64>(), t in 1e-9f64..1e-4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = NoiseParams { t, ..NoiseParams::default() };
        let rho = random_rho(&mut rng);
        let out = apply_noise(&rho, &params).unwrap();
        prop_assert!((out.trace() - 1.0).abs() < 1e-12);
        let [l0, l1] = out.eigenvalues();
        prop_assert!(l0 >= -1e-12 && l1 >= -1e-12);
    }
}
