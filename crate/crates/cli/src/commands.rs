//! The pipeline stages: prepare, train, attack, train-adv, report.

use anyhow::{bail, Context, Result};
use serde::Serialize;

use qnn_bench::attack::{
    adversarial_set, adversarial_sources, attack_sweep, evaluation_samples, perturb, Mask,
    SweepOptions, SweepResult,
};
use qnn_bench::circuits::{ModelFile, QnnModel, Task};
use qnn_bench::datasets::{
    emnist_paths, load_emnist_images, synthetic_images, Dataset, DatasetCache, DatasetPair, Sample,
};
use qnn_bench::experiment::{attack_targets, AttackTargets};
use qnn_bench::fnn::{
    fnn_evaluate, fnn_robustness_compare, fnn_sensitivity_records, fnn_target_directions,
    fnn_train, FnnModel, RobustnessComparison,
};
use qnn_bench::robustness::{
    adv_robustness, bound_records, correlation_analysis, critical_samples, lower_bound_records,
    sensitivity_records, BoundRecord, BoundStatus, SensitivityRecord,
};
use qnn_bench::training::{run_epochs, train_adversarial, EpochRecord, TrainHistory, TrainState};

use crate::artifacts::*;
use crate::config::{RunConfig, TaskKind};

type State = TrainState<f64>;

fn load_data(dir: &RunDir) -> Result<DatasetPair> {
    Ok(DatasetCache::load(&dir.path(DATASET))
        .with_context(|| format!("loading {}", dir.path(DATASET).display()))?
        .data)
}

fn load_model(dir: &RunDir, name: &str) -> Result<ModelFile> {
    ModelFile::load(&dir.path(name))
        .with_context(|| format!("loading {}", dir.path(name).display()))
}

fn quantum_model(cfg: &RunConfig, task: Task, data: &DatasetPair) -> Result<QnnModel> {
    let model = cfg.profile.model(task)?;
    anyhow::ensure!(
        model.num_features() == data.train.dim(),
        "dataset has {} features but the {:?} model expects {}; re-run prepare with the same profile",
        data.train.dim(),
        cfg.profile,
        model.num_features()
    );
    Ok(model)
}

fn history_rows(h: &TrainHistory) -> impl Iterator<Item = &EpochRecord> {
    h.epochs.iter()
}

// --------------------------------------------------------------- prepare --

pub fn prepare(cfg: &RunConfig) -> Result<()> {
    let dir = RunDir::create(&cfg.out)?;
    let (data, source) = match cfg.task {
        TaskKind::Lcei => (cfg.profile.lcei_data(cfg.seed)?, "lcei".to_string()),
        TaskKind::Emnist | TaskKind::Fnn => {
            let ecfg = cfg.profile.emnist();
            let (images, source) = if cfg.data.synthetic {
                (
                    synthetic_images(&ecfg, cfg.seed),
                    "synthetic-glyphs".to_string(),
                )
            } else {
                let (img, lbl) = emnist_paths(&cfg.data.emnist_dir);
                if !img.is_file() || !lbl.is_file() {
                    bail!(
                        "EMNIST-letters IDX files not found. Expected:\n  {}\n  {}\n\
                         Download the EMNIST 'letters' training split (gzip-decompressed) into {}, \
                         set data.emnist_dir, or pass --synthetic to use generated Q/T glyphs.",
                        img.display(),
                        lbl.display(),
                        cfg.data.emnist_dir.display()
                    );
                }
                (
                    load_emnist_images(&img, &lbl, &ecfg, cfg.seed)?,
                    img.display().to_string(),
                )
            };
            let pair = if cfg.task == TaskKind::Fnn {
                images.to_classical(&ecfg, cfg.seed)?
            } else {
                images.to_qnn(&ecfg, cfg.seed)?
            };
            (pair, source)
        }
    };
    let mut cache = DatasetCache::new(cfg.seed, source, data);
    cache
        .meta
        .insert("task".into(), format!("{:?}", cfg.task).to_lowercase());
    cache
        .meta
        .insert("profile".into(), format!("{:?}", cfg.profile));
    cache.save(&dir.path(DATASET))?;
    for set in [&cache.data.train, &cache.data.test] {
        let [c0, c1] = set.class_counts();
        let (lo, hi) = set.feature_bounds().unwrap_or((f64::NAN, f64::NAN));
        println!(
            "{:?}: {} samples (class 0: {c0}, class 1: {c1}), {} features in [{lo:.4}, {hi:.4}], range {:?}",
            set.split,
            set.len(),
            set.dim(),
            set.feature_range
        );
    }
    dir.record(cfg, "prepare", &[], &[DATASET])
}

// ----------------------------------------------------------------- train --

pub fn train(cfg: &RunConfig, resume: bool) -> Result<()> {
    let dir = RunDir::create(&cfg.out)?;
    require(&dir.root, &[DATASET], "run `qnnbench prepare` first")?;
    let data = load_data(&dir)?;
    let tcfg = cfg.train_config();
    let Some(task) = cfg.task.quantum() else {
        anyhow::ensure!(!resume, "--resume is only supported for quantum models");
        let out = fnn_train::<f64>(&data.train, &data.test, None, &tcfg, None)?;
        write_json(&dir.path(MODEL), &out.model)?;
        write_csv(&dir.path(HISTORY), history_rows(&out.history))?;
        let (acc, _) = fnn_evaluate(&out.model, &data.test.samples)?;
        println!("final test accuracy {acc:.4}");
        return dir.record(cfg, "train", &[DATASET], &[MODEL, HISTORY]);
    };
    let model = quantum_model(cfg, task, &data)?;
    let state: State = if resume {
        require(&dir.root, &[TRAIN_STATE], "nothing to resume")?;
        read_json(&dir.path(TRAIN_STATE))?
    } else {
        State::fresh(&model, &tcfg)
    };
    let done = state.epochs_done;
    let out = run_epochs(&model, &data.train, &data.test, None, &tcfg, state)?;
    for e in &out.history().epochs[done.min(out.history().epochs.len())..] {
        println!(
            "epoch {:3}  loss {:.5}  train {:.4}  test {:.4}",
            e.epoch, e.loss, e.train_accuracy, e.test_accuracy
        );
    }
    ModelFile::new(model, out.theta.clone())?.save(&dir.path(MODEL))?;
    write_json(&dir.path(TRAIN_STATE), &out.state)?;
    write_csv(&dir.path(HISTORY), history_rows(out.history()))?;
    if let (Some(epoch), Some((acc, loss))) = (out.state.best_epoch, out.state.best_key) {
        println!("best checkpoint: epoch {epoch}, test accuracy {acc:.4}, test loss {loss:.5}");
    }
    dir.record(cfg, "train", &[DATASET], &[MODEL, TRAIN_STATE, HISTORY])
}

// ---------------------------------------------------------------- attack --

#[derive(Serialize)]
struct CurveRow {
    eps_hat: f64,
    accuracy: f64,
}

#[derive(Serialize)]
struct CurveSampleRow {
    sample_id: u64,
    label: u8,
    eps_hat: f64,
    p: f64,
    correct: bool,
}

#[derive(Serialize)]
struct GRow {
    r: f64,
    ratio: f64,
}

fn fnn_sweep(
    model: &FnnModel<f64>,
    samples: &[Sample],
    dirs: &[Vec<f64>],
    grid: &[f64],
    width: f64,
) -> Result<SweepResult> {
    let mut curves = Vec::with_capacity(samples.len());
    for (s, d) in samples.iter().zip(dirs) {
        let mut p = Vec::with_capacity(grid.len());
        for &e in grid {
            let x = perturb(&s.features, d, e * width)?;
            let q = model.forward(&x)?;
            p.push(if s.label == 1 { q } else { 1.0 - q });
        }
        curves.push(qnn_bench::attack::AttackCurve {
            sample_id: s.id,
            label: s.label,
            eps_hat: grid.to_vec(),
            correct: p.iter().map(|&v| v > 0.5).collect(),
            p,
            infidelity: None,
        });
    }
    let accuracy = (0..grid.len())
        .map(|k| curves.iter().filter(|c| c.correct[k]).count() as f64 / curves.len() as f64)
        .collect();
    Ok(SweepResult {
        eps_hat: grid.to_vec(),
        accuracy,
        curves,
    })
}

pub fn attack(cfg: &RunConfig) -> Result<()> {
    let dir = RunDir::create(&cfg.out)?;
    require(
        &dir.root,
        &[DATASET, MODEL],
        "run `qnnbench prepare` and `qnnbench train` first",
    )?;
    let data = load_data(&dir)?;
    let width = data.train.width();
    let grid = cfg.attack.grid();
    let (targets, sweep) = match cfg.task.quantum() {
        Some(_) => {
            let mf = load_model(&dir, MODEL)?;
            let t = attack_targets(&mf.model, &mf.theta, &data, &cfg.attack, cfg.seed)?;
            let opts = SweepOptions {
                width,
                with_infidelity: false,
                gradient: cfg.attack.gradient,
            };
            let sweep = attack_sweep(&mf.model, &mf.theta, &t.eval, &t.mask, &grid, opts)?;
            (t, sweep)
        }
        None => {
            let model: FnnModel<f64> = read_json(&dir.path(MODEL))?;
            let eval = evaluation_samples(&data, cfg.attack.eval_samples, cfg.seed);
            let sources =
                adversarial_sources(&data.train, cfg.attack.adversarial_per_class, cfg.seed)?;
            let t = AttackTargets {
                mask: Mask::all(data.train.dim()),
                g_curve: None,
                eval_directions: fnn_target_directions(&model, &eval)?,
                source_directions: fnn_target_directions(&model, &sources)?,
                eval,
                sources,
            };
            let sweep = fnn_sweep(&model, &t.eval, &t.eval_directions, &grid, width)?;
            (t, sweep)
        }
    };
    let adv = adversarial_set(
        &targets.sources,
        &targets.source_directions,
        cfg.attack.eps_hat,
        &data.train,
    )?;
    write_json(&dir.path(TARGETS), &targets)?;
    write_json(&dir.path(ADVERSARIAL), &adv)?;
    write_csv(
        &dir.path(CURVES),
        sweep
            .eps_hat
            .iter()
            .zip(&sweep.accuracy)
            .map(|(&eps_hat, &accuracy)| CurveRow { eps_hat, accuracy }),
    )?;
    write_csv(
        &dir.path(CURVE_SAMPLES),
        sweep.curves.iter().flat_map(|c| {
            (0..c.eps_hat.len()).map(move |k| CurveSampleRow {
                sample_id: c.sample_id,
                label: c.label,
                eps_hat: c.eps_hat[k],
                p: c.p[k],
                correct: c.correct[k],
            })
        }),
    )?;
    let mut outputs = vec![TARGETS, ADVERSARIAL, CURVES, CURVE_SAMPLES];
    if let Some(g) = &targets.g_curve {
        write_csv(
            &dir.path(G_CURVE),
            g.r.iter()
                .zip(&g.ratio)
                .map(|(&r, &ratio)| GRow { r, ratio }),
        )?;
        outputs.push(G_CURVE);
    }
    println!(
        "mask: {} of {} features (fraction {}), {} evaluation samples, {} adversarial samples at eps_hat {}",
        targets.mask.popcount(),
        targets.mask.dim(),
        targets.mask.fraction,
        targets.eval.len(),
        adv.len(),
        cfg.attack.eps_hat
    );
    for (e, a) in sweep.eps_hat.iter().zip(&sweep.accuracy).step_by(4) {
        println!("eps_hat {e:.3}  accuracy {a:.4}");
    }
    dir.record(cfg, "attack", &[DATASET, MODEL], &outputs)
}

// ------------------------------------------------------------- train-adv --

pub fn train_adv(cfg: &RunConfig) -> Result<()> {
    let dir = RunDir::create(&cfg.out)?;
    require(
        &dir.root,
        &[DATASET, MODEL, ADVERSARIAL],
        "run `qnnbench prepare`, `qnnbench train` and `qnnbench attack` first",
    )?;
    let data = load_data(&dir)?;
    let adv: Dataset = read_json(&dir.path(ADVERSARIAL))?;
    let acfg = cfg.adversarial_config();
    match cfg.task.quantum() {
        Some(_) => {
            let mf = load_model(&dir, MODEL)?;
            let out = train_adversarial(
                &mf.model,
                &data.train,
                &data.test,
                &adv,
                &acfg,
                Some(mf.theta.clone()),
            )?;
            for e in &out.history().epochs {
                println!(
                    "epoch {:3}  loss {:.5}  test {:.4}  adversarial {:.4}",
                    e.epoch,
                    e.loss,
                    e.test_accuracy,
                    e.adversarial_accuracy.unwrap_or(f64::NAN)
                );
            }
            ModelFile::new(mf.model, out.theta.clone())?.save(&dir.path(MODEL_ADV))?;
            write_csv(&dir.path(HISTORY_ADV), history_rows(out.history()))?;
        }
        None => {
            let init: FnnModel<f64> = read_json(&dir.path(MODEL))?;
            let out = fnn_train(&data.train, &data.test, Some(&adv), &acfg, Some(init))?;
            write_json(&dir.path(MODEL_ADV), &out.model)?;
            write_csv(&dir.path(HISTORY_ADV), history_rows(&out.history))?;
        }
    }
    dir.record(
        cfg,
        "train-adv",
        &[DATASET, MODEL, ADVERSARIAL],
        &[MODEL_ADV, HISTORY_ADV],
    )
}

// ---------------------------------------------------------------- report --

#[derive(Serialize)]
struct SensitivityRow<'a> {
    model: &'a str,
    sample_id: u64,
    eps_hat: f64,
    p_clean: f64,
    p_adv: f64,
    delta_p: f64,
    s: f64,
    s_slope: f64,
    cosine_sim: f64,
    score: f64,
}

#[derive(Serialize)]
struct BoundRow {
    sample_id: u64,
    label: u8,
    p1: f64,
    r_lb: Option<f64>,
    eps_star: Option<f64>,
    r_ub: Option<f64>,
    gap: Option<f64>,
    rmse_p: Option<f64>,
    rmse_d: Option<f64>,
    status: BoundStatus,
}

#[derive(Serialize, serde::Deserialize)]
struct SensitivitySet {
    clean: Vec<SensitivityRecord>,
    adversarial: Option<Vec<SensitivityRecord>>,
}

#[derive(Serialize)]
struct RobustnessSummary {
    r_adv_clean: f64,
    r_adv_adversarial: Option<f64>,
    relative_change: Option<f64>,
    pearson_s_cosine: Option<f64>,
    /// Clean-model score with every sensitivity scaled by the T1 factor.
    r_adv_clean_noisy: f64,
}

#[derive(Serialize)]
struct BoundSummary {
    evaluated: usize,
    extracted: usize,
    ok: usize,
    strictly_ordered: usize,
    median_gap: Option<f64>,
}

#[derive(Serialize)]
struct CriticalSummary {
    ids: Vec<u64>,
    mean_r_lb_clean: f64,
    mean_r_lb_adversarial: Option<f64>,
}

#[derive(Serialize)]
struct Report {
    task: TaskKind,
    seed: u64,
    robustness: RobustnessSummary,
    bounds: Option<BoundSummary>,
    critical: Option<CriticalSummary>,
    fnn_comparison_clean: Option<RobustnessComparison>,
    fnn_comparison_adversarial: Option<RobustnessComparison>,
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn mean_r_adv(recs: &[SensitivityRecord]) -> Result<f64> {
    Ok(adv_robustness(&recs.iter().map(|r| r.s).collect::<Vec<_>>())?.mean)
}

fn mean_lb(recs: &[BoundRecord]) -> f64 {
    recs.iter().map(BoundRecord::r_lb_or_zero).sum::<f64>() / recs.len().max(1) as f64
}

pub fn report(cfg: &RunConfig) -> Result<()> {
    let dir = RunDir::create(&cfg.out)?;
    require(
        &dir.root,
        &[DATASET, MODEL, TARGETS],
        "run `qnnbench prepare`, `train` and `attack` first; `train-adv` adds the adversarial columns",
    )?;
    let data = load_data(&dir)?;
    let targets: AttackTargets = read_json(&dir.path(TARGETS))?;
    let width = data.train.width();
    let has_adv = dir.path(MODEL_ADV).is_file();
    let sp = &cfg.sensitivity;
    let mut inputs = vec![DATASET, MODEL, TARGETS];
    if has_adv {
        inputs.push(MODEL_ADV);
    }

    let (sens, bounds, critical) = match cfg.task.quantum() {
        Some(_) => {
            let clean = load_model(&dir, MODEL)?;
            let adv = if has_adv {
                Some(load_model(&dir, MODEL_ADV)?)
            } else {
                None
            };
            let sens_of = |mf: &ModelFile| {
                sensitivity_records(
                    &mf.model,
                    &mf.theta,
                    &targets.eval,
                    &targets.eval_directions,
                    width,
                    sp,
                )
            };
            let sens = SensitivitySet {
                clean: sens_of(&clean)?,
                adversarial: adv.as_ref().map(sens_of).transpose()?,
            };
            let n = cfg.report.bound_samples.min(targets.eval.len());
            let opts = qnn_bench::attack::SweepOptions {
                width,
                with_infidelity: true,
                gradient: cfg.attack.gradient,
            };
            let recs = bound_records(
                &clean.model,
                &clean.theta,
                &targets.eval[..n],
                &targets.mask,
                &cfg.attack.grid(),
                opts,
                cfg.bounds,
            )?;
            let lbs = lower_bound_records(&clean.model, &clean.theta, &targets.eval)?;
            let crit_ids: Vec<u64> = critical_samples(&lbs, cfg.report.critical_fraction)?
                .iter()
                .map(|r| r.sample_id)
                .collect();
            let crit: Vec<Sample> = targets
                .eval
                .iter()
                .filter(|s| crit_ids.contains(&s.id))
                .cloned()
                .collect();
            let crit_summary = CriticalSummary {
                mean_r_lb_clean: mean_lb(&lower_bound_records(&clean.model, &clean.theta, &crit)?),
                mean_r_lb_adversarial: match &adv {
                    Some(a) => Some(mean_lb(&lower_bound_records(&a.model, &a.theta, &crit)?)),
                    None => None,
                },
                ids: crit_ids,
            };
            (sens, Some(recs), Some(crit_summary))
        }
        None => {
            let clean: FnnModel<f64> = read_json(&dir.path(MODEL))?;
            let adv: Option<FnnModel<f64>> = if has_adv {
                Some(read_json(&dir.path(MODEL_ADV))?)
            } else {
                None
            };
            let sens_of = |m: &FnnModel<f64>| {
                fnn_sensitivity_records(m, &targets.eval, &targets.eval_directions, width, sp)
            };
            let sens = SensitivitySet {
                clean: sens_of(&clean)?,
                adversarial: adv.as_ref().map(sens_of).transpose()?,
            };
            (sens, None, None)
        }
    };

    let r_clean = mean_r_adv(&sens.clean)?;
    let r_adv = sens.adversarial.as_deref().map(mean_r_adv).transpose()?;
    let factor = cfg.noise.population_factor();
    let noisy: Vec<f64> = sens.clean.iter().map(|r| r.s * factor).collect();
    let robustness = RobustnessSummary {
        r_adv_clean: r_clean,
        r_adv_adversarial: r_adv,
        relative_change: r_adv.map(|a| a / r_clean - 1.0),
        pearson_s_cosine: correlation_analysis(&sens.clean).ok(),
        r_adv_clean_noisy: adv_robustness(&noisy)?.mean,
    };

    let (cmp_clean, cmp_adv) = match &cfg.report.fnn_artifacts {
        Some(fdir) if cfg.task == TaskKind::Emnist => {
            require(
                fdir,
                &[SENSITIVITY_JSON],
                "run `qnnbench report` for the fnn task first",
            )?;
            let f: SensitivitySet = read_json(&fdir.join(SENSITIVITY_JSON))?;
            let c = fnn_robustness_compare(&sens.clean, &f.clean, &cfg.noise)
                .context("comparing against the classical baseline")?;
            let a = match (&sens.adversarial, &f.adversarial) {
                (Some(q), Some(f)) => Some(fnn_robustness_compare(q, f, &cfg.noise)?),
                _ => None,
            };
            (Some(c), a)
        }
        Some(_) => bail!("report.fnn_artifacts only applies to the emnist task"),
        None => (None, None),
    };

    let bound_summary = bounds.as_ref().map(|recs| {
        let extracted: Vec<&BoundRecord> = recs
            .iter()
            .filter(|r| r.r_lb.is_some() && r.r_ub.is_some())
            .collect();
        let mut gaps: Vec<f64> = recs
            .iter()
            .filter(|r| r.status == BoundStatus::Ok)
            .filter_map(BoundRecord::gap)
            .collect();
        BoundSummary {
            evaluated: recs.len(),
            extracted: extracted.len(),
            ok: gaps.len(),
            strictly_ordered: extracted.iter().filter(|r| r.gap() >= Some(0.0)).count(),
            median_gap: median(&mut gaps),
        }
    });

    // Tables.
    let mut rows = Vec::new();
    for (name, set) in [
        ("clean", Some(&sens.clean)),
        ("adversarial", sens.adversarial.as_ref()),
    ] {
        for r in set.into_iter().flatten() {
            rows.push(SensitivityRow {
                model: name,
                sample_id: r.sample_id,
                eps_hat: r.eps_hat,
                p_clean: r.p_clean,
                p_adv: r.p_adv,
                delta_p: r.delta_p,
                s: r.s,
                s_slope: r.s_slope,
                cosine_sim: r.cosine_sim,
                score: qnn_bench::robustness::robustness_score(r.s),
            });
        }
    }
    write_csv(&dir.path(SENSITIVITY), rows)?;
    write_json(&dir.path(SENSITIVITY_JSON), &sens)?;
    let mut outputs = vec![SENSITIVITY, SENSITIVITY_JSON, REPORT];
    if let Some(recs) = &bounds {
        write_csv(
            &dir.path(BOUNDS),
            recs.iter().map(|r| BoundRow {
                sample_id: r.sample_id,
                label: r.label,
                p1: r.p1,
                r_lb: r.r_lb,
                eps_star: r.eps_star,
                r_ub: r.r_ub,
                gap: r.gap(),
                rmse_p: r.p_fit.map(|f| f.rmse),
                rmse_d: r.d_fit.map(|f| f.rmse),
                status: r.status,
            }),
        )?;
        outputs.push(BOUNDS);
    }
    let report = Report {
        task: cfg.task,
        seed: cfg.seed,
        robustness,
        bounds: bound_summary,
        critical,
        fnn_comparison_clean: cmp_clean,
        fnn_comparison_adversarial: cmp_adv,
    };
    write_json(&dir.path(REPORT), &report)?;
    print_report(&report);
    dir.record(cfg, "report", &inputs, &outputs)
}

fn print_report(r: &Report) {
    let rb = &r.robustness;
    match (rb.r_adv_adversarial, rb.relative_change) {
        (Some(a), Some(rel)) => println!(
            "R_adv: clean {:.4} -> adversarial {a:.4} ({:+.1}%)",
            rb.r_adv_clean,
            100.0 * rel
        ),
        _ => println!(
            "R_adv: clean {:.4} (no adversarially trained model)",
            rb.r_adv_clean
        ),
    }
    println!(
        "R_adv with T1 decay applied to the clean model: {:.4}",
        rb.r_adv_clean_noisy
    );
    if let Some(p) = rb.pearson_s_cosine {
        println!("Pearson(S, cosine similarity): {p:.3}");
    }
    if let Some(b) = &r.bounds {
        println!(
            "bounds: {} samples, {} with R_UB, {} ok, {} strictly ordered, median gap {}",
            b.evaluated,
            b.extracted,
            b.ok,
            b.strictly_ordered,
            b.median_gap.map_or("n/a".into(), |g| format!("{g:.4}"))
        );
    }
    if let Some(c) = &r.critical {
        match c.mean_r_lb_adversarial {
            Some(a) => println!(
                "critical samples ({}): mean R_LB {:.5} -> {a:.5}",
                c.ids.len(),
                c.mean_r_lb_clean
            ),
            None => println!(
                "critical samples ({}): mean R_LB {:.5}",
                c.ids.len(),
                c.mean_r_lb_clean
            ),
        }
    }
    if let Some(c) = &r.fnn_comparison_clean {
        println!(
            "QNN/FNN robustness ratio (clean): {:.3}, with T1 decay {:.3}",
            c.ratio, c.noisy_ratio
        );
    }
    if let Some(c) = &r.fnn_comparison_adversarial {
        println!(
            "QNN/FNN robustness ratio (adversarial): {:.3}, with T1 decay {:.3}",
            c.ratio, c.noisy_ratio
        );
    }
}
