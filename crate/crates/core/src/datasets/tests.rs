use std::collections::HashSet;
use std::f64::consts::PI;

use super::*;

fn small_cfg() -> EmnistConfig {
    EmnistConfig {
        per_class: 4,
        train_size: 6,
        resolution: 15,
        crop: 13,
        angle_scale: PI,
    }
}

/// Writes an EMNIST-style file pair: `n` images per letter, plus some distractors.
fn write_fake_emnist(dir: &Path, n: usize, fill: impl Fn(usize) -> u8) -> (PathBuf, PathBuf) {
    let (img_path, lbl_path) = emnist_paths(dir);
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for i in 0..3 * n {
        labels.push([LETTER_Q, LETTER_T, 5][i % 3]);
        pixels.extend(std::iter::repeat(fill(i)).take(28 * 28));
    }
    idx::write_images(
        &img_path,
        &idx::IdxImages {
            rows: 28,
            cols: 28,
            pixels,
        },
    )
    .unwrap();
    idx::write_labels(&lbl_path, &labels).unwrap();
    (img_path, lbl_path)
}

#[test]
fn constant_images_map_to_range_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let (imgs, lbls) = write_fake_emnist(dir.path(), 4, |_| 0);
    let pair = load_emnist(&imgs, &lbls, &small_cfg(), 1).unwrap();
    assert_eq!(pair.train.len() + pair.test.len(), 8);
    assert!(pair
        .train
        .samples
        .iter()
        .all(|s| s.features.iter().all(|&v| v == 0.0)));
    assert_eq!(pair.train.dim(), 169);

    let (imgs, lbls) = write_fake_emnist(dir.path(), 4, |_| 255);
    let pair = load_emnist(&imgs, &lbls, &small_cfg(), 1).unwrap();
    for s in pair.train.samples.iter().chain(&pair.test.samples) {
        assert!(s.features.iter().all(|&v| (v - PI).abs() < 1e-12));
    }
}

#[test]
fn label_filtering_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    // Q images dark, T images bright: labels must follow the letters.
    let (imgs, lbls) = write_fake_emnist(dir.path(), 4, |i| if i % 3 == 1 { 200 } else { 10 });
    let pair = load_emnist(&imgs, &lbls, &small_cfg(), 3).unwrap();
    let mut counts = pair.train.class_counts();
    let test_counts = pair.test.class_counts();
    counts[0] += test_counts[0];
    counts[1] += test_counts[1];
    assert_eq!(counts, [4, 4]);
    for s in pair.train.samples.iter().chain(&pair.test.samples) {
        let bright = s.features[0] > 1.0;
        assert_eq!(bright, s.label == 1);
    }
}

#[test]
fn missing_and_insufficient_files() {
    let dir = tempfile::tempdir().unwrap();
    let (imgs, lbls) = emnist_paths(dir.path());
    let err = load_emnist(&imgs, &lbls, &small_cfg(), 0).unwrap_err();
    assert!(err
        .to_string()
        .contains("emnist-letters-train-images-idx3-ubyte"));

    let (imgs, lbls) = write_fake_emnist(dir.path(), 2, |_| 0);
    assert!(load_emnist(&imgs, &lbls, &small_cfg(), 0).is_err());
}

#[test]
fn loading_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (imgs, lbls) = write_fake_emnist(dir.path(), 6, |i| (i * 37 % 256) as u8);
    let a = load_emnist(&imgs, &lbls, &small_cfg(), 9).unwrap();
    let b = load_emnist(&imgs, &lbls, &small_cfg(), 9).unwrap();
    assert_eq!(a, b);
}

/// Direct 2D evaluation: every output pixel sums the product kernel over the
/// whole source image, normalized by the total weight.
fn reference_resize(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
    let (sx, sy) = (sw as f64 / dw as f64, sh as f64 / dh as f64);
    let (kx, ky) = (sx.max(1.0), sy.max(1.0));
    let mut out = Vec::with_capacity(dw * dh);
    for oy in 0..dh {
        for ox in 0..dw {
            let cx = (ox as f64 + 0.5) * sx;
            let cy = (oy as f64 + 0.5) * sy;
            let (mut acc, mut norm) = (0.0, 0.0);
            for y in 0..sh {
                for x in 0..sw {
                    let w = resize::quadratic_kernel((x as f64 + 0.5 - cx) / kx)
                        * resize::quadratic_kernel((y as f64 + 0.5 - cy) / ky);
                    acc += w * src[y * sw + x];
                    norm += w;
                }
            }
            out.push(acc / norm);
        }
    }
    out
}

#[test]
fn resize_matches_reference_on_delta_images() {
    for (sw, dw) in [(28, 15), (28, 10), (7, 12), (9, 9)] {
        for pos in [0, sw * sw / 2 + 3, sw * sw - 1] {
            let mut img = vec![0.0; sw * sw];
            img[pos] = 1.0;
            let fast = resize::resize(&img, sw, sw, dw, dw);
            let slow = reference_resize(&img, sw, sw, dw, dw);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-6, "{sw}->{dw} at {pos}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn lcei_dataset_properties() {
    let pair = gen_lcei(&LceiConfig::new(12), 4).unwrap();
    assert_eq!((pair.train.len(), pair.test.len()), (200, 100));
    let all: Vec<&Sample> = pair
        .train
        .samples
        .iter()
        .chain(&pair.test.samples)
        .collect();
    let counts = all.iter().fold([0, 0], |mut c, s| {
        c[s.label as usize] += 1;
        c
    });
    assert_eq!(counts, [150, 150]);
    for s in &all {
        let (lo, hi) = LCEI_INTERVALS[s.label as usize];
        assert!(s.features.iter().all(|&a| (lo..=hi).contains(&a)));
        assert!(s.features.iter().all(|&a| a == s.features[0]));
    }
    let train_ids: HashSet<u64> = pair.train.samples.iter().map(|s| s.id).collect();
    assert!(pair.test.samples.iter().all(|s| !train_ids.contains(&s.id)));
    assert_eq!(pair, gen_lcei(&LceiConfig::new(12), 4).unwrap());
    assert_ne!(pair, gen_lcei(&LceiConfig::new(12), 5).unwrap());
}

#[test]
fn per_qubit_option_varies_angles() {
    let cfg = LceiConfig {
        per_qubit: true,
        ..LceiConfig::new(6)
    };
    let pair = gen_lcei(&cfg, 1).unwrap();
    assert!(pair
        .train
        .samples
        .iter()
        .any(|s| s.features.iter().any(|&a| a != s.features[0])));
}

#[test]
fn synthetic_glyphs_split_like_emnist() {
    let cfg = EmnistConfig::desk();
    let set = synthetic_images(&cfg, 2);
    let pair = set.to_qnn(&cfg, 2).unwrap();
    assert_eq!((pair.train.len(), pair.test.len()), (500, 100));
    let (lo, hi) = pair.train.feature_bounds().unwrap();
    assert!(lo >= 0.0 && hi <= PI);
    let classical = set.to_classical(&cfg, 2).unwrap();
    let ids = |d: &Dataset| d.samples.iter().map(|s| s.id).collect::<Vec<_>>();
    assert_eq!(ids(&pair.test), ids(&classical.test));
    assert_eq!(classical.train.dim(), 100);

    // T glyphs carry more ink in the top rows than Q glyphs.
    let top_ink = |label: u8| {
        let rows: Vec<f64> = set
            .images
            .iter()
            .filter(|s| s.2 == label)
            .map(|s| s.1[..20].iter().sum::<f64>())
            .collect();
        rows.iter().sum::<f64>() / rows.len() as f64
    };
    assert!(top_ink(1) > top_ink(0));
}

#[test]
fn cache_round_trip() {
    let pair = gen_lcei(&LceiConfig::new(4), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.json");
    DatasetCache::new(0, "lcei", pair.clone())
        .save(&path)
        .unwrap();
    let back = DatasetCache::load(&path).unwrap();
    assert_eq!(back.data, pair);
    assert_eq!(back.seed, 0);
}
