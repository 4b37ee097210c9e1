//! Synthetic handwritten-style 'Q' and 'T' glyphs for runs without EMNIST files.

use rand::Rng;
use rand_distr::{Distribution, Normal};

pub const SIDE: usize = 28;

fn segment_distance(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    ((px - a.0 - t * dx).powi(2) + (py - a.1 - t * dy).powi(2)).sqrt()
}

/// Renders one 28x28 grayscale glyph (0..=255). `is_t` picks the letter.
pub fn render<R: Rng + ?Sized>(is_t: bool, rng: &mut R) -> Vec<u8> {
    let c = SIDE as f64 / 2.0;
    let shift = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let angle: f64 = rng.gen_range(-0.25..0.25);
    let thickness = rng.gen_range(1.6..2.8);
    let (sa, ca) = angle.sin_cos();
    let noise = Normal::new(0.0, 0.04).expect("valid sigma");

    // Stroke geometry in an upright frame centred on the canvas.
    let rx = rng.gen_range(6.0..9.0);
    let ry = rng.gen_range(7.5..10.0);
    let tail_len = rng.gen_range(3.0..6.0);
    let bar_y = rng.gen_range(-9.5..-6.5);
    let bar_half = rng.gen_range(6.5..10.0);
    let stem_end = rng.gen_range(7.5..10.5);
    let stem_x = rng.gen_range(-1.0..1.0);

    let mut img = vec![0u8; SIDE * SIDE];
    for y in 0..SIDE {
        for x in 0..SIDE {
            // Inverse-rotate pixel centre into the glyph frame.
            let (gx, gy) = (x as f64 + 0.5 - c - shift.0, y as f64 + 0.5 - c - shift.1);
            let (u, v) = (ca * gx + sa * gy, -sa * gx + ca * gy);
            let dist = if is_t {
                let bar = segment_distance(u, v, (-bar_half, bar_y), (bar_half, bar_y));
                let stem = segment_distance(u, v, (stem_x, bar_y), (stem_x * 0.5, stem_end));
                bar.min(stem)
            } else {
                let r = ((u / rx).powi(2) + (v / ry).powi(2)).sqrt();
                let ring = (r - 1.0).abs() * rx.min(ry);
                let tail = segment_distance(
                    u,
                    v,
                    (0.25 * rx, 0.45 * ry),
                    (0.25 * rx + tail_len, 0.45 * ry + tail_len),
                );
                ring.min(tail)
            };
            let ink = (thickness / 2.0 + 0.5 - dist).clamp(0.0, 1.0);
            let value = (ink + noise.sample(rng) * ink).clamp(0.0, 1.0);
            img[y * SIDE + x] = (value * 255.0).round() as u8;
        }
    }
    img
}
