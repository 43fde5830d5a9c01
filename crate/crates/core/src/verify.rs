//! The cross-check matrix run by `tqdiff verify`.
//!
//! Each check compares one route through the library with an independent
//! one (closed form, matrix exponential, moment ODE, Monte Carlo) and
//! reports its worst deviation against a tolerance. `Quick` shrinks grids
//! and ensembles to finish within a minute; `Full` uses the acceptance
//! sizes.

use std::f64::consts::SQRT_2;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analytic::bloch::{bloch_oracle_dispersion, BlochOracleSpec};
use crate::analytic::{
    autocorrelation_rr, effective_spring, front_lhs, front_sigma2, oscillator_sigma2_dg,
    oscillator_sigma2_exact, spectral_density_rr, zero_t_oscillator_sigma2, FrontQuery,
};
use crate::error::{Error, ParamError, Result};
use crate::langevin::{
    simulate, Closure, Dynamics, ForceModel, InitialCondition, SimConfig, SimOutput,
};
use crate::moments::{self, heisenberg_product, MomentKind, MomentModel};
use crate::output::{write_csv, Metadata};
use crate::pde::{
    evolve, quantum_potential, steady_state_residual, DensityField, Grid1D, PdeModel, PdeRun,
    PotentialSpec,
};
use crate::phys::{derive, BathParams, OscillatorParams};
use crate::spectral::{acf_mean, compare, psd_mean, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Quick,
    Full,
}

/// Static description of one check.
#[derive(Debug, Clone, Copy)]
pub struct CheckSpec {
    pub id: u8,
    pub name: &'static str,
    pub target: &'static str,
    /// Wall-time budget in the full tier.
    pub time_limit_s: Option<f64>,
}

pub const CHECKS: [CheckSpec; 12] = [
    CheckSpec {
        id: 1,
        name: "moment_ode_front_residual",
        target: "front-law",
        time_limit_s: Some(1.0),
    },
    CheckSpec {
        id: 2,
        name: "front_asymptotes",
        target: "asymptotic-regimes",
        time_limit_s: None,
    },
    CheckSpec {
        id: 3,
        name: "pde_vs_moment_ode",
        target: "pde-moment-equivalence",
        time_limit_s: Some(60.0),
    },
    CheckSpec {
        id: 4,
        name: "classical_pde_einstein",
        target: "classical-limit",
        time_limit_s: None,
    },
    CheckSpec {
        id: 5,
        name: "oscillator_fixed_point",
        target: "oscillator-fixed-point",
        time_limit_s: None,
    },
    CheckSpec {
        id: 6,
        name: "bloch_oracle_dispersion",
        target: "bloch-equilibrium",
        time_limit_s: Some(10.0),
    },
    CheckSpec {
        id: 7,
        name: "zero_t_oscillator",
        target: "zero-temperature-oscillator",
        time_limit_s: None,
    },
    CheckSpec {
        id: 8,
        name: "effective_spring_quadrature",
        target: "effective-spring",
        time_limit_s: None,
    },
    CheckSpec {
        id: 9,
        name: "equilibrium_fluctuations",
        target: "equilibrium-fluctuations",
        time_limit_s: Some(300.0),
    },
    CheckSpec {
        id: 10,
        name: "meanfield_vs_moment_ode",
        target: "mean-field-closure",
        time_limit_s: None,
    },
    CheckSpec {
        id: 11,
        name: "invariant_suite",
        target: "invariants",
        time_limit_s: None,
    },
    CheckSpec {
        id: 12,
        name: "equilibrium_residual_refinement",
        target: "equilibrium-residual",
        time_limit_s: None,
    },
];

/// One measured quantity inside a check. `deviation` is `None` when the
/// computation itself failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub label: String,
    pub deviation: Option<f64>,
    pub tolerance: f64,
    /// `min` when the deviation must stay at or above the tolerance.
    pub bound: Bound,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Max,
    Min,
}

impl Part {
    /// Passes when `deviation <= tolerance`.
    fn upper(label: &str, deviation: f64, tolerance: f64) -> Self {
        Self {
            label: label.to_string(),
            deviation: Some(deviation).filter(|d| d.is_finite()),
            tolerance,
            bound: Bound::Max,
            pass: deviation <= tolerance,
        }
    }

    /// Passes when `value >= bound`; the reported deviation is the value.
    fn lower(label: &str, value: f64, bound: f64) -> Self {
        Self {
            label: label.to_string(),
            deviation: Some(value).filter(|d| d.is_finite()),
            tolerance: bound,
            bound: Bound::Min,
            pass: value >= bound,
        }
    }

    /// How close the part is to failing; above 1 means it failed.
    fn ratio(&self) -> f64 {
        let Some(d) = self.deviation else {
            return f64::INFINITY;
        };
        match self.bound {
            Bound::Max if self.tolerance > 0.0 => d / self.tolerance,
            Bound::Max => {
                if d > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Bound::Min if d > 0.0 => self.tolerance / d,
            Bound::Min => {
                if self.tolerance < 0.0 || (d == 0.0 && self.tolerance == 0.0) {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: u8,
    pub name: String,
    pub target: String,
    /// Deviation, tolerance and bound of the part closest to failing.
    pub deviation: Option<f64>,
    pub tolerance: f64,
    pub bound: Bound,
    pub pass: bool,
    pub wall_time_s: f64,
    pub time_limit_s: Option<f64>,
    pub parts: Vec<Part>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub version: String,
    pub tier: Tier,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn validate(&self) -> Result<()> {
        if self.checks.is_empty() {
            return Err(Error::Validation(vec![ParamError {
                field: "checks",
                message: "report must be non-empty",
            }]));
        }
        Ok(())
    }
}

/// Runs every check in order.
pub fn run(tier: Tier, seed: u64) -> VerifyReport {
    let ids: Vec<u8> = CHECKS.iter().map(|c| c.id).collect();
    run_checks(&ids, tier, seed)
}

pub fn run_checks(ids: &[u8], tier: Tier, seed: u64) -> VerifyReport {
    let checks = ids
        .iter()
        .filter_map(|id| CHECKS.iter().find(|c| c.id == *id))
        .map(|spec| run_one(spec, tier, seed))
        .collect();
    VerifyReport {
        version: crate::VERSION.to_string(),
        tier,
        seed,
        checks,
    }
}

fn run_one(spec: &CheckSpec, tier: Tier, seed: u64) -> CheckResult {
    let start = Instant::now();
    let outcome = match spec.id {
        1 => front_law(),
        2 => asymptotes(),
        3 => pde_equivalence(tier),
        4 => classical_limit(tier),
        5 => fixed_point(),
        6 => bloch(),
        7 => zero_t_oscillator(tier),
        8 => spring_identity(),
        9 => fluctuations(tier, seed),
        10 => mean_field(tier, seed),
        11 => invariants(seed),
        12 => residual_refinement(),
        _ => Err(Error::Config(format!("unknown check {}", spec.id))),
    };
    let wall_time_s = start.elapsed().as_secs_f64();
    let time_limit_s = match tier {
        Tier::Full => spec.time_limit_s,
        Tier::Quick => None,
    };
    let (parts, error) = match outcome {
        Ok(parts) => (parts, String::new()),
        Err(e) => (Vec::new(), e.to_string()),
    };
    let worst = parts.iter().max_by(|a, b| a.ratio().total_cmp(&b.ratio()));
    let in_time = time_limit_s.is_none_or(|limit| wall_time_s <= limit);
    CheckResult {
        id: spec.id,
        name: spec.name.to_string(),
        target: spec.target.to_string(),
        deviation: worst.and_then(|p| p.deviation),
        tolerance: worst.map_or(0.0, |p| p.tolerance),
        bound: worst.map_or(Bound::Max, |p| p.bound),
        pass: error.is_empty() && !parts.is_empty() && parts.iter().all(|p| p.pass) && in_time,
        wall_time_s,
        time_limit_s,
        parts,
        error,
    }
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}

struct Free {
    bath: BathParams,
    diffusion: f64,
    lambda2: f64,
    crossover: f64,
}

fn reduced_free() -> Result<Free> {
    let bath = BathParams::reduced(1.0);
    let c = derive(&bath)?;
    let lambda = c
        .lambda_t
        .finite()
        .ok_or_else(|| Error::Domain("lambda_T must be finite".into()))?;
    Ok(Free {
        bath,
        diffusion: c.diffusion,
        lambda2: lambda * lambda,
        crossover: lambda * lambda / c.diffusion,
    })
}

fn front_law() -> Result<Vec<Part>> {
    let f = reduced_free()?;
    let times = logspace(1e-2 * f.crossover, 1e2 * f.crossover, 100);
    let out = moments::integrate(&MomentModel::free(f.bath)?, 0.0, &times)?;
    let dev = max_of(out.iter().map(|s| {
        let target = 2.0 * f.diffusion * s.t;
        (front_lhs(s.sigma2, f.lambda2.sqrt()) - target).abs() / (1.0 + target)
    }));
    Ok(vec![Part::upper(
        "front-law residual / (1 + 2Dt)",
        dev,
        1e-6,
    )])
}

fn asymptotes() -> Result<Vec<Part>> {
    let f = reduced_free()?;
    let c = derive(&f.bath)?;
    let b = &f.bath;
    let long = max_of(
        logspace(1e2 * f.crossover, 1e4 * f.crossover, 30)
            .into_iter()
            .map(|t| {
                Ok(rel(
                    front_sigma2(&FrontQuery::new(t, c))?,
                    2.0 * f.diffusion * t,
                ))
            })
            .collect::<Result<Vec<_>>>()?,
    );
    let short = max_of(
        logspace(1e-8 * f.crossover, 1e-4 * f.crossover, 30)
            .into_iter()
            .map(|t| {
                let law = b.hbar * (t / (b.m * b.b)).sqrt();
                Ok(rel(front_sigma2(&FrontQuery::new(t, c))?, law))
            })
            .collect::<Result<Vec<_>>>()?,
    );
    Ok(vec![
        Part::upper("Einstein law, t >= 100 lambda^2/D", long, 0.01),
        Part::upper("quantum law, t <= 1e-4 lambda^2/D", short, 0.01),
    ])
}

fn pde_parts(out: &crate::pde::PdeOutput, expected: impl Fn(f64) -> f64, tol: f64) -> Vec<Part> {
    let dev = max_of(out.series.iter().map(|r| rel(r.sigma2, expected(r.t))));
    let drift = max_of(out.series.iter().map(|r| (r.mass - 1.0).abs()));
    let min_p = out
        .snapshots
        .iter()
        .flat_map(|s| s.density.values.iter().copied())
        .fold(f64::INFINITY, f64::min);
    vec![
        Part::upper("variance relative deviation", dev, tol),
        Part::upper("mass drift", drift, 1e-10),
        Part::lower("min P", min_p, 0.0),
    ]
}

fn pde_equivalence(tier: Tier) -> Result<Vec<Part>> {
    let f = reduced_free()?;
    let t_end = 10.0 * f.crossover;
    let n = match tier {
        Tier::Full => 1024,
        Tier::Quick => 512,
    };
    let model = MomentModel::free(f.bath)?;
    let s0 = f.lambda2;
    let s_end = moments::integrate(&model, s0, &[t_end])?[0].sigma2;
    let grid = Grid1D::symmetric(10.5 * s_end.sqrt(), n)?;
    let times: Vec<f64> = (1..=20).map(|i| t_end * i as f64 / 20.0).collect();
    let run = PdeRun::new(
        PdeModel::FreeThermal,
        f.bath,
        PotentialSpec::None,
        DensityField::gaussian(grid, 0.0, s0)?,
        t_end,
        times.clone(),
    );
    let out = evolve(&run)?;
    let ode = moments::integrate(&model, s0, &times)?;
    let lookup = |t: f64| ode.iter().find(|s| s.t == t).map_or(f64::NAN, |s| s.sigma2);
    Ok(pde_parts(&out, lookup, 0.01))
}

fn classical_limit(tier: Tier) -> Result<Vec<Part>> {
    let bath = BathParams::reduced(1.0).with_hbar(0.0);
    let d = bath.diffusion();
    let (s0, t_end) = (1.0, 4.0);
    let n = match tier {
        Tier::Full => 1024,
        Tier::Quick => 256,
    };
    let grid = Grid1D::symmetric(8.0 * (s0 + 2.0 * d * t_end).sqrt(), n)?;
    let times: Vec<f64> = (1..=10).map(|i| t_end * i as f64 / 10.0).collect();
    let run = PdeRun::new(
        PdeModel::FreeThermal,
        bath,
        PotentialSpec::None,
        DensityField::gaussian(grid, 0.0, s0)?,
        t_end,
        times,
    );
    let out = evolve(&run)?;
    let mut parts = pde_parts(&out, |t| s0 + 2.0 * d * t, 0.005);
    parts.truncate(1);
    Ok(parts)
}

fn fixed_point() -> Result<Vec<Part>> {
    let p = OscillatorParams::reduced(1.0);
    let model = MomentModel::new(MomentKind::OscillatorThermal, p)?;
    let dg = moments::fixed_point(&model)?;
    let exact = oscillator_sigma2_exact(&p)?;
    let horizon = 20.0 * p.relaxation_time();
    let conv = max_of(
        [0.1 * dg, 10.0 * dg]
            .into_iter()
            .map(|s0| {
                Ok(rel(
                    moments::integrate(&model, s0, &[horizon])?[0].sigma2,
                    dg,
                ))
            })
            .collect::<Result<Vec<_>>>()?,
    );
    let coth_half = 1.0 / 0.5f64.tanh();
    Ok(vec![
        Part::upper("relaxed dispersion vs fixed point", conv, 1e-6),
        Part::upper(
            "fixed point vs (1 + sqrt 2) / 2",
            rel(dg, (1.0 + SQRT_2) / 2.0),
            1e-12,
        ),
        Part::upper("exact vs 0.5 coth(0.5)", rel(exact, 0.5 * coth_half), 1e-12),
        Part::lower("Gaussian fixed point minus exact", dg - exact, 1e-3),
    ])
}

fn bloch() -> Result<Vec<Part>> {
    let mut parts = Vec::new();
    for x in [0.5, 1.0, 5.0] {
        let p = OscillatorParams::reduced(1.0 / x);
        let spec = BlochOracleSpec::harmonic_default(&p, 512)?;
        let dev = rel(
            bloch_oracle_dispersion(&spec)?,
            oscillator_sigma2_exact(&p)?,
        );
        parts.push(Part::upper(&format!("beta hbar omega0 = {x}"), dev, 1e-3));
    }
    Ok(parts)
}

fn zero_t_oscillator(tier: Tier) -> Result<Vec<Part>> {
    let p = OscillatorParams::reduced(0.0);
    let tau = p.relaxation_time();
    let model = MomentModel::new(MomentKind::OscillatorZeroT, p)?;
    let times: Vec<f64> = (1..=50).map(|i| 0.1 * tau * i as f64).collect();
    let ode = moments::integrate(&model, 0.0, &times)?;
    let ode_dev = max_of(
        ode.iter()
            .map(|s| rel(s.sigma2, zero_t_oscillator_sigma2(s.t, &p))),
    );

    let short = logspace(1e-6 * tau, 1e-3 * tau, 20);
    let early = moments::integrate(&model, 0.0, &short)?;
    let b = &p.bath;
    let slope = max_of(
        early
            .iter()
            .map(|s| rel(s.sigma2 * s.sigma2, b.hbar * b.hbar * s.t / (b.m * b.b))),
    );

    // The PDE starts from a resolved Gaussian; the closed form is shifted
    // to the time at which it reaches that width.
    let s0 = 0.1 * p.ground_state_sigma2() * 2.0;
    let ratio = s0 / p.ground_state_sigma2();
    let t0 = -(-ratio * ratio).ln_1p() * b.b / (4.0 * p.stiffness());
    let n = match tier {
        Tier::Full => 256,
        Tier::Quick => 192,
    };
    let grid = Grid1D::symmetric(6.0, n)?;
    let t_end = 2.0 * tau;
    let out = evolve(&PdeRun::new(
        PdeModel::ZeroTemperaturePotential,
        p.bath,
        PotentialSpec::Harmonic {
            omega0: p.omega0,
            mass: b.m,
        },
        DensityField::gaussian(grid, 0.0, s0)?,
        t_end,
        (1..=20).map(|i| t_end * i as f64 / 20.0).collect(),
    ))?;
    let pde_dev = max_of(
        out.series
            .iter()
            .map(|r| rel(r.sigma2, zero_t_oscillator_sigma2(r.t + t0, &p))),
    );
    Ok(vec![
        Part::upper("moment ODE vs closed form", ode_dev, 1e-6),
        Part::upper("PDE vs closed form", pde_dev, 0.01),
        Part::upper("sigma^4 vs hbar^2 t / (m b)", slope, 0.02),
    ])
}

fn spring_identity() -> Result<Vec<Part>> {
    let mut parts = Vec::new();
    for beta in [0.1, 1.0, 10.0] {
        let p = OscillatorParams::reduced(1.0 / beta);
        let kt = p.bath.thermal_energy();
        let s2 = oscillator_sigma2_exact(&p)?;
        let expected = p.stiffness() - kt / s2;
        let softening = p.stiffness() - effective_spring(&p)?;
        parts.push(Part::upper(
            &format!("beta = {beta}"),
            rel(softening, expected),
            1e-10,
        ));
    }
    Ok(parts)
}

fn path_series(out: &SimOutput) -> Result<Vec<TimeSeries>> {
    out.paths
        .series
        .iter()
        .map(|s| TimeSeries::new(out.paths.dt, s.clone()))
        .collect()
}

fn fluctuations(tier: Tier, seed: u64) -> Result<Vec<Part>> {
    let p = OscillatorParams::reduced(1.0);
    let bath = p.bath;
    let s2e = oscillator_sigma2_exact(&p)?;
    let force = ForceModel::effective_spring(&p)?;
    let d = bath.diffusion();
    let tc = s2e / d;
    let (n, dt, psd_n) = match tier {
        Tier::Full => (10_000, 0.002, 512),
        Tier::Quick => (4_000, 0.005, 128),
    };

    let mut cfg = SimConfig::new(bath, n, 100.0 * tc, Dynamics::Overdamped, force);
    cfg.dt = Some(dt);
    cfg.seed = seed;
    cfg.record_stride = (0.05 / dt).round() as usize;
    cfg.paths = n;
    cfg.path_start = 10.0 * tc;
    let out = simulate(&cfg)?;
    let last = out
        .records
        .last()
        .ok_or_else(|| Error::Numeric("no records".into()))?;
    let z = (last.var - s2e).abs() / last.var_stderr;
    let series = path_series(&out)?;
    let max_lag = (3.0 * tc / out.paths.dt).floor() as usize;
    let acf = acf_mean(&series, max_lag)?;
    let acf_report = compare(
        &acf,
        |t| autocorrelation_rr(t, d, s2e),
        (0.0, max_lag as f64 * out.paths.dt),
        0.05,
    )?;
    drop(series);

    // Underdamped run for the spectrum; segments resolve 0.1 sqrt(k/m).
    let mut cfg = SimConfig::new(bath, psd_n, 10.0 + 820.0, Dynamics::Underdamped, force);
    cfg.dt = Some(0.01);
    cfg.seed = seed.wrapping_add(1);
    cfg.record_stride = 5;
    cfg.paths = psd_n;
    cfg.path_start = 10.0;
    let out = simulate(&cfg)?;
    let spectrum = psd_mean(&path_series(&out)?, 8192, 0.5)?;
    let kt = bath.thermal_energy();
    let w0 = (kt / s2e / bath.m).sqrt();
    let psd_report = compare(
        &spectrum,
        |w| spectral_density_rr(w, bath.b, bath.m, kt, s2e),
        (0.1 * w0, 10.0 * w0),
        0.1,
    )?;
    Ok(vec![
        Part::upper("|Var(R) - sigma_e^2| / SE", z, 3.0),
        Part::upper(
            "ACF band-averaged deviation",
            acf_report.mean_relative_deviation,
            0.05,
        ),
        Part::upper(
            "PSD band-averaged deviation",
            psd_report.mean_relative_deviation,
            0.1,
        ),
    ])
}

fn mean_field(tier: Tier, seed: u64) -> Result<Vec<Part>> {
    let f = reduced_free()?;
    let n = match tier {
        Tier::Full => 10_000,
        Tier::Quick => 2_000,
    };
    let mut cfg = SimConfig::new(
        f.bath,
        n,
        10.0 * f.crossover,
        Dynamics::Overdamped,
        ForceModel::MeanfieldQuantum {
            omega0: 0.0,
            closure: Closure::Bohm,
        },
    );
    cfg.dt = Some(0.0025 * f.crossover);
    cfg.record_stride = 80;
    cfg.initial = InitialCondition::gaussian(f.lambda2);
    cfg.seed = seed;
    let out = simulate(&cfg)?;
    let recorded = &out.records[1..];
    let times: Vec<f64> = recorded.iter().map(|r| r.t).collect();
    let ode = moments::integrate(&MomentModel::free(f.bath)?, f.lambda2, &times)?;
    let worst = max_of(
        recorded
            .iter()
            .zip(&ode)
            .map(|(r, o)| (r.var - o.sigma2).abs() / r.var_stderr),
    );
    Ok(vec![
        Part::upper("max |var - ODE| / SE", worst, 3.0),
        Part::upper(
            "recorded times short of 50",
            (50.0 - recorded.len() as f64).max(0.0),
            0.0,
        ),
    ])
}

fn sde_bytes(seed: u64) -> Result<Vec<u8>> {
    let mut cfg = SimConfig::new(
        BathParams::reduced(1.0),
        256,
        2.0,
        Dynamics::Underdamped,
        ForceModel::MeanfieldQuantum {
            omega0: 1.0,
            closure: Closure::FreeEnergy,
        },
    );
    cfg.seed = seed;
    cfg.initial = InitialCondition::gaussian(0.5);
    cfg.record_stride = 10;
    let out = simulate(&cfg)?;
    let meta = Metadata::new(
        "invariants",
        Some(seed),
        serde_json::to_value(&cfg).map_err(|e| Error::Numeric(e.to_string()))?,
    );
    let mut buf = Vec::new();
    write_csv(
        &mut buf,
        &meta,
        &["t", "mean", "var", "var_stderr"],
        out.records
            .iter()
            .map(|r| vec![r.t, r.mean, r.var, r.var_stderr]),
    )
    .map_err(|e| Error::Numeric(e.to_string()))?;
    buf.extend(serde_json::to_vec(&out.checkpoint).map_err(|e| Error::Numeric(e.to_string()))?);
    Ok(buf)
}

fn invariants(seed: u64) -> Result<Vec<Part>> {
    let f = reduced_free()?;
    let c = derive(&f.bath)?;
    let b = &f.bath;
    let floor = 0.25 * b.hbar * b.hbar;

    // Every recorded dispersion from the moment ODEs and the PDE.
    let times = logspace(1e-3 * f.crossover, 1e3 * f.crossover, 100);
    let free = moments::integrate(&MomentModel::free(f.bath)?, 0.0, &times)?;
    let osc_params = OscillatorParams::reduced(1.0);
    let osc = moments::integrate(
        &MomentModel::new(MomentKind::OscillatorThermal, osc_params)?,
        0.0,
        &times[..60],
    )?;
    let grid = Grid1D::symmetric(12.0, 256)?;
    let pde = evolve(&PdeRun::new(
        PdeModel::ThermalPotential,
        f.bath,
        PotentialSpec::Harmonic {
            omega0: 1.0,
            mass: 1.0,
        },
        DensityField::gaussian(grid.clone(), 0.3, 0.6)?,
        1.0,
        (1..=10).map(|i| 0.1 * i as f64).collect(),
    ))?;
    let min_product = free
        .iter()
        .chain(&osc)
        .map(|s| s.sigma2)
        .chain(pde.series.iter().map(|r| r.sigma2))
        .map(|s2| heisenberg_product(s2, b))
        .fold(f64::INFINITY, f64::min);

    let p = DensityField::gaussian(grid, -0.4, 1.3)?;
    let q = quantum_potential(&p, b);
    let mut q_dev: f64 = 0.0;
    for scale in [1e-6, 0.37, 3.0, 1e5] {
        let scaled = DensityField {
            grid: p.grid.clone(),
            values: p.values.iter().map(|v| v * scale).collect(),
        };
        let qs = quantum_potential(&scaled, b);
        let qmax = max_of(q.iter().map(|v| v.abs()));
        q_dev = q_dev.max(max_of(q.iter().zip(&qs).map(|(a, s)| (a - s).abs())) / qmax);
    }

    let mut bound_violation: f64 = 0.0;
    for &t in &times {
        let s2 = front_sigma2(&FrontQuery::new(t, c))?;
        let bound = (2.0 * f.diffusion * t).max(b.hbar * (t / (b.m * b.b)).sqrt());
        bound_violation = bound_violation.max((bound - s2) / bound);
    }

    let same = sde_bytes(seed)? == sde_bytes(seed)?;
    Ok(vec![
        Part::lower(
            "min Heisenberg product - hbar^2/4",
            min_product - floor,
            0.0,
        ),
        Part::upper("Q normalisation invariance", q_dev, 1e-12),
        Part::upper(
            "front below max(2Dt, hbar sqrt(t/mb))",
            bound_violation,
            0.0,
        ),
        Part::upper(
            "same seed, differing bytes",
            if same { 0.0 } else { 1.0 },
            0.0,
        ),
    ])
}

fn residual_refinement() -> Result<Vec<Part>> {
    let p = OscillatorParams::reduced(1.0);
    let s2 = oscillator_sigma2_dg(&p)?;
    let potential = PotentialSpec::Harmonic {
        omega0: p.omega0,
        mass: p.bath.m,
    };
    let half = 8.0 * s2.sqrt();
    let residual = |n: usize| -> Result<f64> {
        let field = DensityField::gaussian(Grid1D::symmetric(half, n)?, 0.0, s2)?;
        steady_state_residual(&field, &potential, &p.bath)
    };
    let coarse = residual(257)?;
    let fine = residual(513)?;
    Ok(vec![Part::lower(
        "residual reduction on halving dx",
        coarse / fine,
        3.0,
    )])
}

fn fmt_tolerance(bound: Bound, tolerance: f64) -> String {
    match bound {
        Bound::Max => format!("{tolerance:.3e}"),
        Bound::Min => format!(">={tolerance:.3e}"),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |d| format!("{d:.3e}"))
}

/// Writes the report as JSON to `path` and a table to `out`.
pub fn emit_report(report: &VerifyReport, path: &Path, out: &mut dyn Write) -> Result<()> {
    report.validate()?;
    crate::output::write_json_file(path, report)?;
    let mut table = || -> std::io::Result<()> {
        writeln!(
            out,
            "{:>2}  {:<33} {:<28} {:>10} {:>10} {:>8}  result",
            "#", "check", "target", "deviation", "tolerance", "time[s]"
        )?;
        for c in &report.checks {
            writeln!(
                out,
                "{:>2}  {:<33} {:<28} {:>10} {:>10} {:>8.2}  {}",
                c.id,
                c.name,
                c.target,
                fmt_opt(c.deviation),
                fmt_tolerance(c.bound, c.tolerance),
                c.wall_time_s,
                if c.pass { "PASS" } else { "FAIL" }
            )?;
            for p in c.parts.iter().filter(|p| !p.pass) {
                writeln!(
                    out,
                    "    {} failed: {} (tolerance {})",
                    p.label,
                    fmt_opt(p.deviation),
                    fmt_tolerance(p.bound, p.tolerance)
                )?;
            }
            if !c.error.is_empty() {
                writeln!(out, "    error: {}", c.error)?;
            }
            if let Some(limit) = c.time_limit_s.filter(|l| c.wall_time_s > *l) {
                writeln!(out, "    over time budget of {limit} s")?;
            }
        }
        let passed = report.checks.iter().filter(|c| c.pass).count();
        writeln!(out, "{passed}/{} checks passed", report.checks.len())
    };
    table().map_err(|e| Error::io("<stdout>", e))
}
