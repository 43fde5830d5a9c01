//! Reference values computed without the library's own routines.
#![allow(dead_code)]

use tqdiff::{BathParams, OscillatorParams};

pub fn lambda2(p: &BathParams) -> f64 {
    p.hbar * p.hbar / (4.0 * p.m * p.kb * p.temperature)
}

pub fn diffusion(p: &BathParams) -> f64 {
    p.kb * p.temperature / p.b
}

/// `x - ln(1 + x)`.
fn g(x: f64) -> f64 {
    x - x.ln_1p()
}

/// Dispersion of a free particle after time `t`, starting from `s0`, from
/// `G(s/l2) = G(s0/l2) + 2 D t / l2` solved by bisection.
pub fn free_sigma2(p: &BathParams, s0: f64, t: f64) -> f64 {
    let l2 = lambda2(p);
    let c = g(s0 / l2) + 2.0 * diffusion(p) * t / l2;
    let (mut lo, mut hi) = (s0 / l2, s0 / l2 + c + 10.0 * c.sqrt() + 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) * l2
}

pub fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

/// Exact thermal dispersion `(hbar / 2 m w) coth(beta hbar w / 2)`.
pub fn exact_sigma2(p: &OscillatorParams) -> f64 {
    let b = &p.bath;
    let x = b.hbar * p.omega0 / (b.kb * b.temperature);
    b.hbar / (2.0 * b.m * p.omega0) * coth(0.5 * x)
}

/// Positive root of `1 + l2/s - beta m w^2 s = 0`.
pub fn gaussian_fixed_point(p: &OscillatorParams) -> f64 {
    let b = &p.bath;
    let beta = 1.0 / (b.kb * b.temperature);
    let x = beta * b.hbar * p.omega0;
    (1.0 + (1.0 + x * x).sqrt()) / (2.0 * beta * b.m * p.omega0 * p.omega0)
}

/// `(hbar / 2 m w) sqrt(1 - exp(-4 m w^2 t / b))`.
pub fn zero_t_sigma2(p: &OscillatorParams, t: f64) -> f64 {
    let b = &p.bath;
    let k = b.m * p.omega0 * p.omega0;
    b.hbar / (2.0 * b.m * p.omega0) * (-(-4.0 * k * t / b.b).exp_m1()).sqrt()
}

pub fn acf(tau: f64, d: f64, s2e: f64) -> f64 {
    s2e * (-d * tau / s2e).exp()
}

/// Two-sided spectral density of the effective-spring oscillator.
pub fn spectrum(w: f64, b: f64, m: f64, kt: f64, s2e: f64) -> f64 {
    let k = kt / s2e;
    let re = k - m * w * w;
    2.0 * b * kt / (re * re + b * b * w * w)
}

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}
