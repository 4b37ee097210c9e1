use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// `y(x) = a cos^2(omega x + phi) + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosSqFit {
    pub a: f64,
    pub omega: f64,
    pub phi: f64,
    pub b: f64,
    pub rmse: f64,
}

impl CosSqFit {
    pub fn eval(&self, x: f64) -> f64 {
        let c = (self.omega * x + self.phi).cos();
        self.a * c * c + self.b
    }

    /// Same curve with `a >= 0`, `omega > 0` and `phi` in `[0, pi)`.
    pub fn canonical(mut self) -> Self {
        if self.a < 0.0 {
            // -|a| cos^2(u) + b = |a| cos^2(u + pi/2) + b - |a|
            self.b += self.a;
            self.a = -self.a;
            self.phi += PI / 2.0;
        }
        if self.omega < 0.0 {
            self.omega = -self.omega;
            self.phi = -self.phi;
        }
        self.phi = self.phi.rem_euclid(PI);
        if self.phi >= PI {
            self.phi = 0.0;
        }
        self
    }

    /// Smallest `x > 0` with `eval(x) = level`, if any.
    pub fn first_crossing(&self, level: f64) -> Option<f64> {
        if self.a <= 0.0 || self.omega <= 0.0 {
            return None;
        }
        let c = (level - self.b) / self.a;
        if !(0.0..=1.0).contains(&c) {
            return None;
        }
        let u0 = c.sqrt().acos();
        // Solutions u = +-u0 + k pi; pick the first x = (u - phi) / omega > 0.
        let mut best: Option<f64> = None;
        for base in [u0, PI - u0] {
            let k = ((self.phi - base) / PI).floor();
            for dk in 0..3 {
                let x = (base + (k + dk as f64) * PI - self.phi) / self.omega;
                if x > 0.0 && best.map_or(true, |b| x < b) {
                    best = Some(x);
                }
            }
        }
        best
    }
}

fn rss(xs: &[f64], ys: &[f64], p: &[f64; 4]) -> f64 {
    let f = CosSqFit {
        a: p[0],
        omega: p[1],
        phi: p[2],
        b: p[3],
        rmse: 0.0,
    };
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| (f.eval(x) - y).powi(2))
        .sum()
}

/// Exact least squares over `(a, phi, b)` at a fixed frequency.
fn linear_start(xs: &[f64], ys: &[f64], omega: f64) -> Option<([f64; 4], f64)> {
    let n = xs.len();
    let m = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => (2.0 * omega * xs[i]).cos(),
        _ => (2.0 * omega * xs[i]).sin(),
    });
    let y = DVector::from_column_slice(ys);
    let c = m.svd(true, true).solve(&y, 1e-12).ok()?;
    // a/2 cos(2 omega x + 2 phi) = c1 cos(2 omega x) + c2 sin(2 omega x)
    let half = c[1].hypot(c[2]);
    let phi = 0.5 * (-c[2]).atan2(c[1]);
    let p = [2.0 * half, omega, phi, c[0] - half];
    let r = rss(xs, ys, &p);
    r.is_finite().then_some((p, r))
}

/// Levenberg-Marquardt refinement of all four parameters.
fn refine(xs: &[f64], ys: &[f64], mut p: [f64; 4], omega_max: f64) -> ([f64; 4], f64) {
    let mut cost = rss(xs, ys, &p);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (&x, &y) in xs.iter().zip(ys) {
            let u = p[1] * x + p[2];
            let c = u.cos();
            let r = p[0] * c * c + p[3] - y;
            let d2 = -p[0] * (2.0 * u).sin();
            let j = Vector4::new(c * c, d2 * x, d2, 1.0);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] += lambda * (jtj[(k, k)] + 1e-12);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [
                p[0] + step[0],
                p[1] + step[1],
                p[2] + step[2],
                p[3] + step[3],
            ];
            // Frequencies past the sampling limit alias onto lower ones.
            let c = if trial[1].abs() > omega_max {
                f64::INFINITY
            } else {
                rss(xs, ys, &trial)
            };
            if c.is_finite() && c < cost {
                let rel = (cost - c) / cost.max(1e-300);
                p = trial;
                cost = c;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-14 {
                    return (p, cost);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (p, cost)
}

/// Least-squares fit of `a cos^2(omega x + phi) + b`.
///
/// Frequencies on a log grid up to the sampling limit seed exact linear
/// solves for `(a, phi, b)`; the best few starts are refined jointly and the
/// lowest-residual fit is returned in canonical form.
pub fn fit_cos2(xs: &[f64], ys: &[f64]) -> Result<CosSqFit> {
    check_len("fit ordinates", xs.len(), ys.len())?;
    let n = xs.len();
    if n < 5 {
        return Err(Error::FitFailed(format!("need at least 5 points, got {n}")));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) || ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::FitFailed(
            "abscissae must be strictly increasing and data finite".into(),
        ));
    }
    let span = xs[n - 1] - xs[0];
    let mean = ys.iter().sum::<f64>() / n as f64;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
    let scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs())).max(1e-300);
    let omega_lo = PI / (8.0 * span);
    let omega_hi = PI * (n - 1) as f64 / (2.0 * span);
    if var.sqrt() <= 1e-14 * scale {
        return Ok(CosSqFit {
            a: 0.0,
            omega: omega_lo,
            phi: 0.0,
            b: mean,
            rmse: var.sqrt(),
        });
    }
    let steps = 160;
    let mut starts: Vec<([f64; 4], f64)> = (0..steps)
        .filter_map(|k| {
            let omega = omega_lo * (omega_hi / omega_lo).powf(k as f64 / (steps - 1) as f64);
            linear_start(xs, ys, omega)
        })
        .collect();
    starts.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut best: Option<([f64; 4], f64)> = None;
    for (p0, _) in starts.iter().take(6) {
        // Each start is also tried with the phase shifted by a quarter period.
        for dphi in [0.0, PI / 4.0, -PI / 4.0] {
            let mut p = *p0;
            p[2] += dphi;
            let (p, c) = refine(xs, ys, p, omega_hi);
            if c.is_finite() && best.map_or(true, |b| c < b.1) {
                best = Some((p, c));
            }
        }
    }
    let (p, c) =
        best.ok_or_else(|| Error::FitFailed("no start produced a finite residual".into()))?;
    Ok(CosSqFit {
        a: p[0],
        omega: p[1],
        phi: p[2],
        b: p[3],
        rmse: (c / n as f64).sqrt(),
    }
    .canonical())
}
