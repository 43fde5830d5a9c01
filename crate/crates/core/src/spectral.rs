//! Autocorrelation and spectral density estimates of sampled trajectories.
//!
//! Spectra are two-sided in angular frequency: `S(omega)` integrates to the
//! variance as `int S domega / 2 pi` over the whole line, and white noise of
//! spectral density `S` has a flat estimate at `S`.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduce::{pairwise_map_sum, pairwise_sum};

/// Shortest series accepted by [`psd`].
pub const MIN_SPECTRAL_LEN: usize = 256;
/// Batches used for the autocorrelation standard errors.
pub const ACF_BATCHES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(dt: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!(
                "sampling interval must be positive, got {dt}"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!("sample {i} is not finite")));
        }
        Ok(Self { dt, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.samples) / self.len() as f64
    }

    /// Mean-removed second moment with the `1 / N` normalisation.
    pub fn variance(&self) -> f64 {
        let x = centred(&self.samples, self.mean());
        pairwise_map_sum(&x, |v| v * v) / x.len() as f64
    }
}

fn centred(samples: &[f64], mean: f64) -> Vec<f64> {
    samples.iter().map(|s| s - mean).collect()
}

/// Something tabulated on an ascending abscissa.
pub trait Estimate {
    fn abscissae(&self) -> &[f64];
    fn values(&self) -> &[f64];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfEstimate {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl Estimate for AcfEstimate {
    fn abscissae(&self) -> &[f64] {
        &self.lags
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub omegas: Vec<f64>,
    pub values: Vec<f64>,
    pub segments: usize,
    pub segment_len: usize,
    pub dt: f64,
}

impl Estimate for SpectrumEstimate {
    fn abscissae(&self) -> &[f64] {
        &self.omegas
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

impl SpectrumEstimate {
    /// `int S domega / 2 pi` over the whole line, by the rectangle rule over
    /// the one-sided bins.
    pub fn parseval_variance(&self) -> f64 {
        let n = self.segment_len;
        let last = self.values.len() - 1;
        let interior: f64 = self.values[1..last].iter().sum();
        let nyquist = if n.is_multiple_of(2) {
            self.values[last]
        } else {
            2.0 * self.values[last]
        };
        (self.values[0] + 2.0 * interior + nyquist) / (n as f64 * self.dt)
    }
}

fn check_lag(len: usize, max_lag: usize) -> Result<()> {
    if len < 4 * ACF_BATCHES {
        return Err(Error::Config(format!(
            "series of {len} samples is too short for an autocorrelation estimate (need {})",
            4 * ACF_BATCHES
        )));
    }
    if 4 * max_lag > len {
        return Err(Error::Config(format!(
            "max_lag {max_lag} exceeds a quarter of the series length {len}"
        )));
    }
    Ok(())
}

/// Biased lag products of a centred series, `(1 / N) sum x_i x_{i+j}`,
/// with batch-means standard errors.
fn lag_products(x: &[f64], max_lag: usize) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    (0..=max_lag)
        .into_par_iter()
        .map(|j| {
            let p: Vec<f64> = x[..n - j].iter().zip(&x[j..]).map(|(a, b)| a * b).collect();
            let value = pairwise_sum(&p) / n as f64;
            let m = p.len();
            let batch = m / ACF_BATCHES;
            let means: Vec<f64> = (0..ACF_BATCHES)
                .map(|k| {
                    let end = if k + 1 == ACF_BATCHES {
                        m
                    } else {
                        (k + 1) * batch
                    };
                    let s = &p[k * batch..end];
                    pairwise_sum(s) / s.len() as f64
                })
                .collect();
            let scale = m as f64 / n as f64;
            (value, scale * stderr_of_mean(&means))
        })
        .unzip()
}

fn stderr_of_mean(xs: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (var / k).sqrt()
}

/// Mean-removed biased autocorrelation up to `max_lag` samples.
pub fn acf(series: &TimeSeries, max_lag: usize) -> Result<AcfEstimate> {
    check_lag(series.len(), max_lag)?;
    let x = centred(&series.samples, series.mean());
    let (values, stderr) = lag_products(&x, max_lag);
    Ok(AcfEstimate {
        lags: (0..=max_lag).map(|j| j as f64 * series.dt).collect(),
        values,
        stderr,
    })
}

fn common_dt(series: &[TimeSeries]) -> Result<f64> {
    let Some(first) = series.first() else {
        return Err(Error::Config("no series given".into()));
    };
    if series.iter().any(|s| s.dt != first.dt) {
        return Err(Error::Config(
            "all series must share one sampling interval".into(),
        ));
    }
    Ok(first.dt)
}

fn pooled_mean(series: &[TimeSeries]) -> f64 {
    let sums: Vec<f64> = series.iter().map(|s| pairwise_sum(&s.samples)).collect();
    let count: usize = series.iter().map(TimeSeries::len).sum();
    pairwise_sum(&sums) / count as f64
}

/// Autocorrelation averaged over independent series of one stationary
/// process. The pooled mean of all series is removed, so short series do
/// not bias long lags through their own mean. Standard errors come from
/// the spread between series when there are at least eight of them.
pub fn acf_mean(series: &[TimeSeries], max_lag: usize) -> Result<AcfEstimate> {
    let dt = common_dt(series)?;
    for s in series {
        check_lag(s.len(), max_lag)?;
    }
    let mean = pooled_mean(series);
    let per: Vec<(Vec<f64>, Vec<f64>)> = series
        .par_iter()
        .map(|s| lag_products(&centred(&s.samples, mean), max_lag))
        .collect();
    let m = per.len();
    let mut values = Vec::with_capacity(max_lag + 1);
    let mut stderr = Vec::with_capacity(max_lag + 1);
    for j in 0..=max_lag {
        let column: Vec<f64> = per.iter().map(|(v, _)| v[j]).collect();
        values.push(pairwise_sum(&column) / m as f64);
        stderr.push(if m >= ACF_BATCHES {
            stderr_of_mean(&column)
        } else {
            per.iter().map(|(_, e)| e[j] * e[j]).sum::<f64>().sqrt() / m as f64
        });
    }
    Ok(AcfEstimate {
        lags: (0..=max_lag).map(|j| j as f64 * dt).collect(),
        values,
        stderr,
    })
}

fn check_windowing(len: usize, segment_len: usize, overlap: f64) -> Result<usize> {
    if len < MIN_SPECTRAL_LEN {
        return Err(Error::Config(format!(
            "series of {len} samples is too short for a spectrum (need {MIN_SPECTRAL_LEN})"
        )));
    }
    if segment_len < 16 || segment_len > len {
        return Err(Error::Config(format!(
            "segment length must lie in [16, {len}], got {segment_len}"
        )));
    }
    if !(0.0..=0.9).contains(&overlap) {
        return Err(Error::Config(format!(
            "overlap must lie in [0, 0.9], got {overlap}"
        )));
    }
    Ok(((segment_len as f64 * (1.0 - overlap)).round() as usize).max(1))
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Sum over segments of `|FFT(w x)|^2` on the one-sided bins.
fn periodogram_sums(
    x: &[f64],
    segment_len: usize,
    hop: usize,
    window: &[f64],
) -> (Vec<f64>, usize) {
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_len);
    let starts: Vec<usize> = (0..=(x.len() - segment_len) / hop)
        .map(|k| k * hop)
        .collect();
    let bins = segment_len / 2 + 1;
    let spectra: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&s| {
            let mut buf: Vec<Complex<f64>> = x[s..s + segment_len]
                .iter()
                .zip(window)
                .map(|(v, w)| Complex::new(v * w, 0.0))
                .collect();
            fft.process(&mut buf);
            buf[..bins].iter().map(|c| c.norm_sqr()).collect()
        })
        .collect();
    let mut total = vec![0.0; bins];
    for s in &spectra {
        for (t, v) in total.iter_mut().zip(s) {
            *t += v;
        }
    }
    (total, starts.len())
}

fn finish_spectrum(
    total: Vec<f64>,
    segments: usize,
    segment_len: usize,
    dt: f64,
    window: &[f64],
) -> SpectrumEstimate {
    let energy: f64 = window.iter().map(|w| w * w).sum();
    let scale = dt / (energy * segments as f64);
    let d_omega = 2.0 * PI / (segment_len as f64 * dt);
    SpectrumEstimate {
        omegas: (0..total.len()).map(|j| j as f64 * d_omega).collect(),
        values: total.into_iter().map(|v| v * scale).collect(),
        segments,
        segment_len,
        dt,
    }
}

/// Welch estimate: Hann-tapered segments of `segment_len` samples with
/// fractional `overlap`, normalised by `dt / sum w^2`.
pub fn psd(series: &TimeSeries, segment_len: usize, overlap: f64) -> Result<SpectrumEstimate> {
    let hop = check_windowing(series.len(), segment_len, overlap)?;
    let x = centred(&series.samples, series.mean());
    let window = hann(segment_len);
    let (total, segments) = periodogram_sums(&x, segment_len, hop, &window);
    Ok(finish_spectrum(
        total,
        segments,
        segment_len,
        series.dt,
        &window,
    ))
}

/// [`psd`] averaged over the segments of several series of one process,
/// with the pooled mean removed.
pub fn psd_mean(
    series: &[TimeSeries],
    segment_len: usize,
    overlap: f64,
) -> Result<SpectrumEstimate> {
    let dt = common_dt(series)?;
    let mut hop = 1;
    for s in series {
        hop = check_windowing(s.len(), segment_len, overlap)?;
    }
    let mean = pooled_mean(series);
    let window = hann(segment_len);
    let mut total = vec![0.0; segment_len / 2 + 1];
    let mut segments = 0;
    for s in series {
        let (t, k) = periodogram_sums(&centred(&s.samples, mean), segment_len, hop, &window);
        for (a, b) in total.iter_mut().zip(&t) {
            *a += b;
        }
        segments += k;
    }
    Ok(finish_spectrum(total, segments, segment_len, dt, &window))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub points: usize,
    pub max_relative_deviation: f64,
    /// Mean of `|estimate - analytic| / |analytic|` over the band.
    pub mean_relative_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares an estimate with an analytic curve over the points whose
/// abscissa lies in `band`. Passes iff the band-averaged relative deviation
/// is within `tolerance`.
pub fn compare<E: Estimate + ?Sized>(
    estimate: &E,
    analytic: impl Fn(f64) -> f64,
    band: (f64, f64),
    tolerance: f64,
) -> Result<CompareReport> {
    let (lo, hi) = band;
    if !(lo <= hi) {
        return Err(Error::Config(format!("empty band [{lo}, {hi}]")));
    }
    let xs = estimate.abscissae();
    if let (Some(first), Some(last)) = (xs.first(), xs.last()) {
        if lo < *first - 1e-12 * first.abs().max(1.0) || hi > *last + 1e-12 * last.abs().max(1.0) {
            return Err(Error::Config(format!(
                "band [{lo}, {hi}] leaves the estimate's support [{first}, {last}]"
            )));
        }
    }
    let devs: Vec<f64> = xs
        .iter()
        .zip(estimate.values())
        .filter(|(x, _)| (lo..=hi).contains(*x))
        .map(|(&x, &v)| {
            let a = analytic(x);
            if a == v {
                0.0
            } else {
                (v - a).abs() / a.abs()
            }
        })
        .collect();
    if devs.is_empty() {
        return Err(Error::Config(format!(
            "band [{lo}, {hi}] contains no estimate points"
        )));
    }
    let mean = devs.iter().sum::<f64>() / devs.len() as f64;
    let max = devs.iter().copied().fold(0.0, f64::max);
    Ok(CompareReport {
        points: devs.len(),
        max_relative_deviation: max,
        mean_relative_deviation: mean,
        tolerance,
        pass: mean <= tolerance,
    })
}

/// Least-squares fit of `ln C = ln A - rate * tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub amplitude: f64,
    pub rate: f64,
    /// Root-mean-square residual of `ln C`.
    pub residual: f64,
    pub points: usize,
}

/// Fits an exponential to the positive autocorrelation values with lag at
/// most `max_tau`.
pub fn fit_exponential(acf: &AcfEstimate, max_tau: f64) -> Result<ExponentialFit> {
    let pts: Vec<(f64, f64)> = acf
        .lags
        .iter()
        .zip(&acf.values)
        .filter(|(t, c)| **t <= max_tau && **c > 0.0)
        .map(|(&t, &c)| (t, c.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Config(
            "need at least three positive lags to fit an exponential".into(),
        ));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ExponentialFit {
        amplitude: intercept.exp(),
        rate: -slope,
        residual,
        points: pts.len(),
    })
}
