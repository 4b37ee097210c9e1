use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::circuits::{build_lcei_model, GradientMethod, QnnModel};
use crate::datasets::{gen_lcei, DatasetPair, LceiConfig};

fn small_lcei() -> (QnnModel, DatasetPair) {
    let model = build_lcei_model(4, &[4, 2]).unwrap();
    let mut cfg = LceiConfig::new(4);
    cfg.per_class = 30;
    cfg.train_size = 40;
    (model, gen_lcei(&cfg, 11).unwrap())
}

fn quick_cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 10,
        epochs: 6,
        lr: 0.1,
        ..TrainConfig::lcei(seed)
    }
}

#[test]
fn learns_small_lcei() {
    let (model, data) = small_lcei();
    let cfg = TrainConfig {
        epochs: 25,
        ..quick_cfg(3)
    };
    let out = train_clean::<f64>(&model, &data.train, &data.test, &cfg).unwrap();
    let h = &out.history().epochs;
    assert_eq!(h.len(), 25);
    assert!(h.last().unwrap().loss < h[0].loss);
    let (acc, _) = evaluate(&model, &out.theta, &data.test.samples).unwrap();
    assert!(acc >= 0.9, "test accuracy {acc}");
}

#[test]
fn zero_mix_reproduces_clean_training() {
    let (model, data) = small_lcei();
    let cfg = quick_cfg(5);
    let clean = train_clean::<f64>(&model, &data.train, &data.test, &cfg).unwrap();
    let mixed =
        train_adversarial::<f64>(&model, &data.train, &data.test, &data.test, &cfg, None).unwrap();
    assert_eq!(clean.state.theta, mixed.state.theta);
}

#[test]
fn batch_composition_split() {
    let mut cfg = TrainConfig::lcei(0);
    assert_eq!(cfg.batch_composition(), (50, 0));
    cfg.adversarial_mix = 0.5;
    assert_eq!(cfg.batch_composition(), (25, 25));
    cfg.batch_size = 7;
    assert_eq!(cfg.batch_composition(), (4, 3));
    cfg.adversarial_mix = 1.0;
    assert_eq!(cfg.batch_composition(), (1, 6));
    cfg.adversarial_mix = 1.5;
    assert!(cfg.validate().is_err());
}

#[test]
fn resume_matches_uninterrupted_run() {
    let (model, data) = small_lcei();
    let cfg = quick_cfg(9);
    let full = train_clean::<f64>(&model, &data.train, &data.test, &cfg).unwrap();
    let half_cfg = TrainConfig {
        epochs: 3,
        ..cfg.clone()
    };
    let half = train_clean::<f64>(&model, &data.train, &data.test, &half_cfg).unwrap();
    let json = serde_json::to_string(&half.state).unwrap();
    let state: TrainState<f64> = serde_json::from_str(&json).unwrap();
    let resumed = run_epochs(&model, &data.train, &data.test, None, &cfg, state).unwrap();
    assert_eq!(full.state.theta, resumed.state.theta);
    assert_eq!(full.state.history, resumed.state.history);
    assert_eq!(full.theta, resumed.theta);
}

#[test]
fn adversarial_training_reports_adversarial_accuracy() {
    let (model, data) = small_lcei();
    let cfg = TrainConfig {
        adversarial_mix: 0.5,
        epochs: 2,
        ..quick_cfg(1)
    };
    let init = init_params::<f64>(model.num_params(), &cfg);
    let out = train_adversarial(
        &model,
        &data.train,
        &data.test,
        &data.test,
        &cfg,
        Some(init),
    )
    .unwrap();
    assert!(out
        .history()
        .epochs
        .iter()
        .all(|e| e.adversarial_accuracy.is_some()));
}

#[test]
fn divergence_is_reported() {
    let (model, data) = small_lcei();
    let cfg = TrainConfig {
        lr: f64::INFINITY,
        ..quick_cfg(1)
    };
    assert!(cfg.validate().is_ok());
    match train_clean::<f64>(&model, &data.train, &data.test, &cfg) {
        Err(crate::Error::Diverged { .. }) => {}
        other => panic!(
            "expected divergence, got {:?}",
            other.map(|o| o.state.epochs_done)
        ),
    }
}

#[test]
fn psr_gradient_matches_batch_gradient() {
    let (model, data) = small_lcei();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let theta: Vec<f64> = (0..model.num_params())
        .map(|_| rng.gen_range(-PI..PI))
        .collect();
    let s = &data.train.samples[0];
    let psr = psr_gradient(&model, &theta, s).unwrap();
    let (adj, _) = batch_gradient(&model, &theta, &[s], GradientMethod::Adjoint).unwrap();
    for (a, b) in psr.iter().zip(&adj) {
        assert!((a - b).abs() < 1e-12);
    }
}

// The first-order Taylor residual of the loss must shrink quadratically.
#[test]
fn gradient_taylor_residual_is_second_order() {
    let (model, data) = small_lcei();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let theta: Vec<f64> = (0..model.num_params())
        .map(|_| rng.gen_range(-PI..PI))
        .collect();
    let dir: Vec<f64> = (0..model.num_params())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let batch: Vec<_> = data.train.samples.iter().take(5).collect();
    let loss = |t: &[f64]| -> f64 {
        batch_gradient(&model, t, &batch, GradientMethod::Adjoint)
            .unwrap()
            .1
            .iter()
            .sum::<f64>()
            / batch.len() as f64
    };
    let (g, _) = batch_gradient(&model, &theta, &batch, GradientMethod::Adjoint).unwrap();
    let l0 = loss(&theta);
    let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
    let residual = |h: f64| {
        let t: Vec<f64> = theta.iter().zip(&dir).map(|(a, d)| a + h * d).collect();
        (loss(&t) - l0 - h * slope).abs()
    };
    let (r1, r2) = (residual(1e-2), residual(5e-3));
    let ratio = r1 / r2;
    assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
}
