//! Adaptive Gauss-Legendre quadrature.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const ORDER: usize = 16;
const MAX_DEPTH: u32 = 40;

/// Nodes and weights of the `ORDER`-point rule on `[-1, 1]`.
fn rule() -> &'static ([f64; ORDER], [f64; ORDER]) {
    static RULE: OnceLock<([f64; ORDER], [f64; ORDER])> = OnceLock::new();
    RULE.get_or_init(legendre_rule)
}

fn legendre_rule() -> ([f64; ORDER], [f64; ORDER]) {
    let n = ORDER;
    let mut nodes = [0.0; ORDER];
    let mut weights = [0.0; ORDER];
    for i in 0..n {
        // Chebyshev-like starting guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
}

/// Integrates `f` over `[a, b]`, bisecting panels until each panel agrees
/// with its two halves to `rel_tol` of the running total.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error_estimate: 0.0,
        });
    }
    let whole = panel(&f, a, b);
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    let mut value = 0.0;
    let mut error = 0.0;
    let mut stack = vec![(a, b, whole, 0u32)];
    while let Some((lo, hi, coarse, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(&f, lo, mid);
        let right = panel(&f, mid, hi);
        let fine = left + right;
        let diff = (fine - coarse).abs();
        let width = (hi - lo) / (b - a);
        if diff <= rel_tol * scale * width.abs() || diff <= 4.0 * f64::EPSILON * fine.abs() {
            value += fine;
            error += diff;
        } else if depth >= MAX_DEPTH {
            return Err(Error::Numeric(format!(
                "quadrature did not converge on [{lo}, {hi}]; achieved panel error {diff:e}"
            )));
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    if !value.is_finite() {
        return Err(Error::Numeric(
            "quadrature produced a non-finite value".into(),
        ));
    }
    Ok(Quadrature {
        value,
        error_estimate: error,
    })
}
