//! Order-fixed reductions.
//!
//! Sums are split into halves down to blocks of [`BLOCK`] elements and the
//! halves are combined in a fixed tree, so the result does not depend on how
//! rayon schedules the work.

const BLOCK: usize = 256;
const PARALLEL_MIN: usize = 1 << 15;

pub fn pairwise_sum(xs: &[f64]) -> f64 {
    pairwise_map_sum(xs, |x| x)
}

pub fn pairwise_map_sum<F>(xs: &[f64], f: F) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    fn go<F: Fn(f64) -> f64 + Sync>(xs: &[f64], f: &F) -> f64 {
        if xs.len() <= BLOCK {
            return xs.iter().map(|&x| f(x)).sum();
        }
        let (a, b) = xs.split_at(xs.len() / 2);
        if xs.len() >= PARALLEL_MIN {
            let (x, y) = rayon::join(|| go(a, f), || go(b, f));
            x + y
        } else {
            go(a, f) + go(b, f)
        }
    }
    go(xs, &f)
}

/// Sample mean, unbiased variance and the standard error of that variance,
/// `sqrt((m4 - s^4) / N)` with `m4` the fourth central moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub mean: f64,
    pub var: f64,
    pub var_stderr: f64,
}

pub fn sample_stats(xs: &[f64]) -> SampleStats {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return SampleStats {
            mean,
            var: 0.0,
            var_stderr: 0.0,
        };
    }
    let ss = pairwise_map_sum(xs, |x| (x - mean) * (x - mean));
    let m4 = pairwise_map_sum(xs, |x| (x - mean).powi(4)) / n;
    let var = ss / (n - 1.0);
    let var_stderr = ((m4 - var * var).max(0.0) / n).sqrt();
    SampleStats {
        mean,
        var,
        var_stderr,
    }
}
