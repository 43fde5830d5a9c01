mod oracle;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tqdiff::langevin::{simulate, Dynamics, ForceModel, NoiseSpec, SimConfig};
use tqdiff::spectral::{acf, acf_mean, compare, fit_exponential, psd, TimeSeries};
use tqdiff::{BathParams, OscillatorParams};

fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            let xi: f64 = rng.sample(StandardNormal);
            x = phi * x + xi;
            x
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lag_zero_is_the_sample_variance(xs in prop::collection::vec(-100.0f64..100.0, 32..300)) {
        let s = TimeSeries::new(0.1, xs.clone()).unwrap();
        let est = acf(&s, 1).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        prop_assert!((est.values[0] - var).abs() <= 1e-12 * var.max(1e-300));
        prop_assert_eq!(est.values[0], s.variance());
    }

    #[test]
    fn psd_is_non_negative_and_parseval(seed in 0u64..1000, phi in 0.0f64..0.9) {
        let s = TimeSeries::new(0.05, ar1(1 << 14, phi, seed)).unwrap();
        let spec = psd(&s, 1024, 0.5).unwrap();
        prop_assert!(spec.values.iter().all(|v| *v >= 0.0));
        let var = s.variance();
        prop_assert!((spec.parseval_variance() - var).abs() <= 0.05 * var);
    }
}

#[test]
fn white_force_record_is_flat_at_noise_level() {
    let p = BathParams {
        b: 0.6,
        ..BathParams::reduced(1.7)
    };
    let noise = NoiseSpec::white(&p);
    let dt = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sd = (noise.impulse_variance(dt)).sqrt() / dt;
    let record: Vec<f64> = (0..1 << 18)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let spec = psd(&TimeSeries::new(dt, record).unwrap(), 512, 0.5).unwrap();
    let level = 2.0 * p.b * p.thermal_energy();
    let report = compare(&spec, |_| level, (1.0, 250.0), 0.1).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn sinusoid_peaks_in_its_bin() {
    let dt = 0.02;
    let w = 7.3;
    let xs: Vec<f64> = (0..8192).map(|i| (w * i as f64 * dt).sin()).collect();
    let spec = psd(&TimeSeries::new(dt, xs).unwrap(), 1024, 0.5).unwrap();
    let k = (0..spec.values.len())
        .max_by(|a, b| spec.values[*a].total_cmp(&spec.values[*b]))
        .unwrap();
    let dw = spec.omegas[1] - spec.omegas[0];
    assert!((spec.omegas[k] - w).abs() <= dw);
}

#[test]
fn compare_flags_a_doubled_curve() {
    let s = TimeSeries::new(0.1, ar1(4096, 0.5, 1)).unwrap();
    let est = acf(&s, 50).unwrap();
    let same = compare(
        &est,
        |t| {
            let j = (t / 0.1).round() as usize;
            est.values[j]
        },
        (0.0, 5.0),
        0.1,
    )
    .unwrap();
    assert!(same.pass && same.mean_relative_deviation == 0.0);
    let doubled = compare(
        &est,
        |t| 2.0 * est.values[(t / 0.1).round() as usize],
        (0.0, 5.0),
        0.1,
    )
    .unwrap();
    assert!(!doubled.pass);
    assert!((doubled.mean_relative_deviation - 0.5).abs() < 1e-12);
    assert!(compare(&est, |_| 1.0, (100.0, 200.0), 0.1).is_err());
}

#[test]
fn overdamped_spring_acf_is_exponential() {
    let p = OscillatorParams::reduced(1.0);
    let s2e = oracle::exact_sigma2(&p);
    let d = p.bath.diffusion();
    let tc = s2e / d;
    let mut cfg = SimConfig::new(
        p.bath,
        3000,
        60.0 * tc,
        Dynamics::Overdamped,
        ForceModel::effective_spring(&p).unwrap(),
    );
    cfg.dt = Some(0.004);
    cfg.record_stride = 10;
    cfg.paths = 3000;
    cfg.path_start = 5.0 * tc;
    cfg.seed = 31;
    let out = simulate(&cfg).unwrap();
    let series: Vec<TimeSeries> = out
        .paths
        .series
        .iter()
        .map(|s| TimeSeries::new(out.paths.dt, s.clone()).unwrap())
        .collect();
    let est = acf_mean(&series, (3.0 * tc / out.paths.dt) as usize).unwrap();
    let fit = fit_exponential(&est, 3.0 * tc).unwrap();
    assert!(fit.residual < 0.02, "residual {}", fit.residual);
    assert!(
        (fit.rate - d / s2e).abs() < 0.1 * d / s2e,
        "rate {}",
        fit.rate
    );
}
