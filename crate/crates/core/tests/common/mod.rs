//! Reference computations written independently of the library: direct
//! formulas, brute-force quadrature, finite differences and power iteration.
#![allow(dead_code)]

use std::f64::consts::PI;

/// `(α, σ)` from the textbook formulas.
pub fn alpha_sigma(schedule: &str, t: f64) -> (f64, f64) {
    match schedule {
        "linear" => (1.0 - t, t),
        "vp" => {
            let b = 0.1 * t + 0.5 * (20.0 - 0.1) * t * t;
            let a = (-0.5 * b).exp();
            (a, (1.0 - a * a).sqrt())
        }
        "gvp" => ((0.5 * PI * t).cos(), (0.5 * PI * t).sin()),
        other => panic!("unknown schedule {other}"),
    }
}

/// `(c_x, c_eps)` per target.
pub fn coefficients(target: &str, a: f64, s: f64) -> (f64, f64) {
    match target {
        "eps" => (0.0, 1.0),
        "x0" => (1.0, 0.0),
        "v" => (-s, a),
        "u" => (-1.0, 1.0),
        other => panic!("unknown target {other}"),
    }
}

/// Composite Simpson rule on `[lo, hi]` with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

pub const CENTERS: [[f64; 2]; 4] = [[2.0, 2.0], [2.0, -2.0], [-2.0, 2.0], [-2.0, -2.0]];
pub const SIGMA0: f64 = 0.3;

/// `E[x0 | x_t]` by summing prior × likelihood over a grid on `[−4, 4]²`
/// with spacing 0.01.
pub fn quadrature_posterior_mean(a: f64, s: f64, xt: [f64; 2]) -> [f64; 2] {
    let h = 0.01;
    let n = 801;
    let coord = |i: usize| -4.0 + i as f64 * h;
    let log_prior = |x: f64, y: f64| {
        let terms: Vec<f64> = CENTERS
            .iter()
            .map(|c| -((x - c[0]).powi(2) + (y - c[1]).powi(2)) / (2.0 * SIGMA0 * SIGMA0))
            .collect();
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + terms.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
    };
    let mut logs = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (coord(i), coord(j));
            let ll = -((xt[0] - a * x).powi(2) + (xt[1] - a * y).powi(2)) / (2.0 * s * s);
            logs.push(log_prior(x, y) + ll);
        }
    }
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut mx, mut my) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let w = (logs[i * n + j] - m).exp();
            z += w;
            mx += w * coord(i);
            my += w * coord(j);
        }
    }
    [mx / z, my / z]
}

/// `E[y | x_t]` built from the quadrature posterior mean.
pub fn quadrature_predictor(target: &str, a: f64, s: f64, xt: [f64; 2]) -> [f64; 2] {
    let m = quadrature_posterior_mean(a, s, xt);
    let (cx, ce) = coefficients(target, a, s);
    let e = [(xt[0] - a * m[0]) / s, (xt[1] - a * m[1]) / s];
    [cx * m[0] + ce * e[0], cx * m[1] + ce * e[1]]
}

/// Central difference `(f(θ + h e_i) − f(θ − h e_i)) / 2h`.
pub fn central_difference(
    params: &[f64],
    index: usize,
    h: f64,
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let mut p = params.to_vec();
    p[index] = params[index] + h;
    let up = f(&p);
    p[index] = params[index] - h;
    let down = f(&p);
    (up - down) / (2.0 * h)
}

/// Largest-magnitude eigenvalue of a symmetric matrix by power iteration.
pub fn power_iteration(m: &[Vec<f64>], iters: usize) -> f64 {
    let n = m.len();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m[i][j] * v[j]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        lambda = (0..n).map(|i| v[i] * w[i]).sum::<f64>() / v.iter().map(|x| x * x).sum::<f64>();
        v = w.iter().map(|x| x / norm).collect();
    }
    lambda
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relative error with a floor on the scale so near-zero pairs compare
/// absolutely.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Deterministic pseudo-random stream for test inputs (splitmix64).
pub struct Stream(pub u64);

impl Stream {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}
