use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::datasets::{synthetic_images, EmnistConfig};

#[test]
fn paper_size_parameter_count() {
    assert_eq!(FnnModel::<f64>::zeros(225).num_params(), 1136);
}

#[test]
fn zero_network_outputs_half() {
    let m = FnnModel::<f64>::zeros(4);
    assert_eq!(m.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), 0.5);
    assert!(m.forward(&[1.0]).is_err());
}

#[test]
fn output_in_open_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = FnnModel::<f64>::init(6, 3);
    for _ in 0..100 {
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let p = m.forward(&x).unwrap();
        assert!(p > 0.0 && p < 1.0);
    }
}

#[test]
fn backprop_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..5 {
        let m = FnnModel::<f64>::init(7, trial);
        let x: Vec<f64> = (0..7).map(|_| rng.gen_range(0.0..1.0)).collect();
        let label = (trial % 2) as u8;
        let (_, g, dx) = m.backward(&x, label).unwrap();
        let p0 = m.params();
        let loss_at = |p: &[f64], x: &[f64]| {
            let mut n = m.clone();
            n.set_params(p).unwrap();
            crate::circuits::cross_entropy(n.forward(x).unwrap(), label)
        };
        let h = 1e-6;
        for k in 0..p0.len() {
            let (mut a, mut b) = (p0.clone(), p0.clone());
            a[k] += h;
            b[k] -= h;
            let fd = (loss_at(&a, &x) - loss_at(&b, &x)) / (2.0 * h);
            assert!(
                (g[k] - fd).abs() <= 1e-6 * fd.abs().max(1e-2),
                "param {k}: {} vs {fd}",
                g[k]
            );
        }
        for i in 0..7 {
            let (mut a, mut b) = (x.clone(), x.clone());
            a[i] += h;
            b[i] -= h;
            let fd = (loss_at(&p0, &a) - loss_at(&p0, &b)) / (2.0 * h);
            assert!((dx[i] - fd).abs() <= 1e-6 * fd.abs().max(1e-2));
        }
    }
}

fn glyph_data() -> crate::datasets::DatasetPair {
    let cfg = EmnistConfig::desk();
    synthetic_images(&cfg, 4).to_classical(&cfg, 4).unwrap()
}

#[test]
fn trains_on_glyphs_deterministically() {
    let d = glyph_data();
    let cfg = fnn_config(1);
    let a = fnn_train::<f64>(&d.train, &d.test, None, &cfg, None).unwrap();
    let b = fnn_train::<f64>(&d.train, &d.test, None, &cfg, None).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.history.epochs.len(), 10);
    let (acc, _) = fnn_evaluate(&a.model, &d.test.samples).unwrap();
    assert!(acc >= 0.95, "test accuracy {acc}");
    let mixed = fnn_train::<f64>(&d.train, &d.test, Some(&d.test), &cfg, None).unwrap();
    assert_eq!(a.model, mixed.model);
}

#[test]
fn comparison_of_identical_reports_is_one() {
    let d = glyph_data();
    let out = fnn_train::<f64>(&d.train, &d.test, None, &fnn_config(2), None).unwrap();
    let samples = &d.test.samples[..20];
    let dirs = fnn_target_directions(&out.model, samples).unwrap();
    let recs = fnn_sensitivity_records(
        &out.model,
        samples,
        &dirs,
        1.0,
        &SensitivityProtocol::default(),
    )
    .unwrap();
    assert!(recs.iter().all(|r| r.cosine_sim > 0.0));
    let cmp = fnn_robustness_compare(&recs, &recs, &NoiseParams::default()).unwrap();
    assert_eq!(cmp.ratio, 1.0);
    assert!(fnn_robustness_compare(&recs, &recs[1..], &NoiseParams::default()).is_err());
}

#[test]
fn decoherence_raises_robustness_of_positive_sensitivities() {
    let recs: Vec<SensitivityRecord> = (0..5)
        .map(|i| SensitivityRecord {
            sample_id: i,
            eps_hat: 0.1,
            p_clean: 0.9,
            p_adv: 0.5,
            delta_p: 0.4,
            s: 0.5 + i as f64,
            s_slope: 0.0,
            cosine_sim: 1.0,
        })
        .collect();
    let cmp = fnn_robustness_compare(&recs, &recs, &NoiseParams::default()).unwrap();
    assert!(cmp.noise_factor < 1.0);
    assert!(cmp.qnn_noisy > cmp.qnn);
}
