//! Separable image resampling with a piecewise-quadratic interpolating kernel.
//!
//! Kernel (support 1.5):
//! `k(s) = 1 - 2s^2` for `|s| <= 1/2`,
//! `k(s) = s^2 - 5|s|/2 + 3/2` for `1/2 < |s| <= 3/2`, else 0.
//! When shrinking, the kernel is stretched by the scale factor so every source
//! pixel contributes; taps falling outside the image are dropped and the
//! remaining weights renormalized.

pub const SUPPORT: f64 = 1.5;

pub fn quadratic_kernel(s: f64) -> f64 {
    let a = s.abs();
    if a <= 0.5 {
        1.0 - 2.0 * a * a
    } else if a <= 1.5 {
        a * a - 2.5 * a + 1.5
    } else {
        0.0
    }
}

/// Source taps and normalized weights for every output coordinate.
pub fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    let stretch = scale.max(1.0);
    let support = SUPPORT * stretch;
    (0..dst)
        .map(|i| {
            let center = (i as f64 + 0.5) * scale;
            let lo = (center - support).floor().max(0.0) as usize;
            let hi = ((center + support).ceil() as usize).min(src);
            let mut taps: Vec<(usize, f64)> = (lo..hi)
                .map(|j| (j, quadratic_kernel((j as f64 + 0.5 - center) / stretch)))
                .filter(|&(_, w)| w != 0.0)
                .collect();
            let total: f64 = taps.iter().map(|t| t.1).sum();
            taps.iter_mut().for_each(|t| t.1 /= total);
            taps
        })
        .collect()
}

/// Resizes a row-major `src_h x src_w` image to `dst_h x dst_w`.
pub fn resize(src: &[f64], src_w: usize, src_h: usize, dst_w: usize, dst_h: usize) -> Vec<f64> {
    assert_eq!(src.len(), src_w * src_h);
    let wx = axis_weights(src_w, dst_w);
    let wy = axis_weights(src_h, dst_h);
    let mut rows = vec![0.0; src_h * dst_w];
    for y in 0..src_h {
        for (x, taps) in wx.iter().enumerate() {
            rows[y * dst_w + x] = taps.iter().map(|&(j, w)| w * src[y * src_w + j]).sum();
        }
    }
    let mut out = vec![0.0; dst_h * dst_w];
    for (y, taps) in wy.iter().enumerate() {
        for x in 0..dst_w {
            out[y * dst_w + x] = taps.iter().map(|&(j, w)| w * rows[j * dst_w + x]).sum();
        }
    }
    out
}

/// Central `side x side` window of a `width x width` image.
pub fn center_crop(img: &[f64], width: usize, side: usize) -> Vec<f64> {
    assert!(side <= width);
    let off = (width - side) / 2;
    (off..off + side)
        .flat_map(|y| (off..off + side).map(move |x| (y, x)))
        .map(|(y, x)| img[y * width + x])
        .collect()
}
