//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

mod oracle;

use std::process::ExitCode;
use std::time::Instant;

use tqdiff::analytic::bloch::{bloch_oracle_dispersion, BlochOracleSpec};
use tqdiff::analytic::{effective_spring, front_sigma2, oscillator_sigma2_dg, FrontQuery};
use tqdiff::langevin::{simulate, Closure, Dynamics, ForceModel, InitialCondition, SimConfig};
use tqdiff::moments::{self, heisenberg_product, MomentKind, MomentModel};
use tqdiff::output::{write_csv, Metadata};
use tqdiff::pde::{
    evolve, quantum_potential, steady_state_residual, DensityField, Grid1D, PdeModel, PdeOutput,
    PdeRun, PotentialSpec,
};
use tqdiff::phys::derive;
use tqdiff::spectral::{acf_mean, compare, psd_mean, TimeSeries};
use tqdiff::{BathParams, OscillatorParams, Result};

struct Leg {
    what: &'static str,
    value: f64,
    limit: f64,
    /// `value` must not exceed `limit`; otherwise it must reach it.
    upper: bool,
}

impl Leg {
    fn max(what: &'static str, value: f64, limit: f64) -> Self {
        Self {
            what,
            value,
            limit,
            upper: true,
        }
    }

    fn min(what: &'static str, value: f64, limit: f64) -> Self {
        Self {
            what,
            value,
            limit,
            upper: false,
        }
    }

    fn pass(&self) -> bool {
        if self.upper {
            self.value <= self.limit
        } else {
            self.value >= self.limit
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn worst(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}

fn reduced() -> BathParams {
    BathParams::reduced(1.0)
}

fn crossover(p: &BathParams) -> f64 {
    oracle::lambda2(p) / oracle::diffusion(p)
}

fn front_law() -> Result<Vec<Leg>> {
    let p = reduced();
    let (l2, d) = (oracle::lambda2(&p), oracle::diffusion(&p));
    let times = oracle::logspace(1e-2 * crossover(&p), 1e2 * crossover(&p), 100);
    let out = moments::integrate(&MomentModel::free(p)?, 0.0, &times)?;
    let dev = worst(out.iter().map(|s| {
        let lhs = s.sigma2 - l2 * (s.sigma2 / l2).ln_1p();
        (lhs - 2.0 * d * s.t).abs() / (1.0 + 2.0 * d * s.t)
    }));
    Ok(vec![Leg::max("front-law residual", dev, 1e-6)])
}

fn asymptotes() -> Result<Vec<Leg>> {
    let p = reduced();
    let c = derive(&p)?;
    let d = oracle::diffusion(&p);
    let tc = crossover(&p);
    let mut long = 0.0f64;
    for t in oracle::logspace(1e2 * tc, 1e4 * tc, 30) {
        long = long.max(rel(front_sigma2(&FrontQuery::new(t, c))?, 2.0 * d * t));
    }
    let mut short = 0.0f64;
    for t in oracle::logspace(1e-8 * tc, 1e-4 * tc, 30) {
        let law = p.hbar * (t / (p.m * p.b)).sqrt();
        short = short.max(rel(front_sigma2(&FrontQuery::new(t, c))?, law));
    }
    Ok(vec![
        Leg::max("vs 2Dt, t >= 100 lambda^2/D", long, 0.01),
        Leg::max("vs hbar sqrt(t/mb), t <= 1e-4 lambda^2/D", short, 0.01),
    ])
}

fn pde_legs(out: &PdeOutput, expected: impl Fn(f64) -> f64, tol: f64) -> Vec<Leg> {
    let min_p = out
        .snapshots
        .iter()
        .flat_map(|s| s.density.values.iter().copied())
        .fold(f64::INFINITY, f64::min);
    vec![
        Leg::max(
            "variance vs reference",
            worst(out.series.iter().map(|r| rel(r.sigma2, expected(r.t)))),
            tol,
        ),
        Leg::max(
            "mass drift",
            worst(out.series.iter().map(|r| (r.mass - 1.0).abs())),
            1e-10,
        ),
        Leg::min("min P", min_p, 0.0),
    ]
}

fn pde_equivalence() -> Result<Vec<Leg>> {
    let p = reduced();
    let s0 = oracle::lambda2(&p);
    let t_end = 10.0 * crossover(&p);
    let half = 10.0 * oracle::free_sigma2(&p, s0, t_end).sqrt();
    let run = PdeRun::new(
        PdeModel::FreeThermal,
        p,
        PotentialSpec::None,
        DensityField::gaussian(Grid1D::symmetric(half, 1024)?, 0.0, s0)?,
        t_end,
        (1..=20).map(|i| t_end * i as f64 / 20.0).collect(),
    );
    let out = evolve(&run)?;
    Ok(pde_legs(&out, |t| oracle::free_sigma2(&p, s0, t), 0.01))
}

fn classical_limit() -> Result<Vec<Leg>> {
    let p = reduced().with_hbar(0.0);
    let d = oracle::diffusion(&p);
    let (s0, t_end) = (1.0, 4.0);
    let half = 8.0 * (s0 + 2.0 * d * t_end).sqrt();
    let run = PdeRun::new(
        PdeModel::FreeThermal,
        p,
        PotentialSpec::None,
        DensityField::gaussian(Grid1D::symmetric(half, 1024)?, 0.0, s0)?,
        t_end,
        (1..=10).map(|i| t_end * i as f64 / 10.0).collect(),
    );
    let out = evolve(&run)?;
    Ok(pde_legs(&out, |t| s0 + 2.0 * d * t, 0.005))
}

fn fixed_point() -> Result<Vec<Leg>> {
    let p = OscillatorParams::reduced(1.0);
    let model = MomentModel::new(MomentKind::OscillatorThermal, p)?;
    let root = oracle::gaussian_fixed_point(&p);
    let exact = oracle::exact_sigma2(&p);
    let horizon = 20.0 * p.bath.b / (p.bath.m * p.omega0 * p.omega0);
    let mut conv = 0.0f64;
    for s0 in [0.0, 0.1, 5.0] {
        conv = conv.max(rel(
            moments::integrate(&model, s0, &[horizon])?[0].sigma2,
            root,
        ));
    }
    let dg = oscillator_sigma2_dg(&p)?;
    println!(
        "    Gaussian closure {dg:.12} vs exact {exact:.12}: differs by {:.6}",
        dg - exact
    );
    Ok(vec![
        Leg::max("ODE vs root after 20 relaxation times", conv, 1e-6),
        Leg::max(
            "root vs (1 + sqrt 2)/2",
            rel(dg, (1.0 + 2f64.sqrt()) / 2.0),
            1e-12,
        ),
        Leg::max(
            "exact oracle vs 0.5 coth 0.5",
            rel(exact, 0.5 * oracle::coth(0.5)),
            1e-12,
        ),
        Leg::min("root minus exact", dg - exact, 1e-3),
    ])
}

fn bloch() -> Result<Vec<Leg>> {
    let mut dev = 0.0f64;
    for x in [0.5, 1.0, 5.0] {
        let p = OscillatorParams::reduced(1.0 / x);
        let spec = BlochOracleSpec::harmonic_default(&p, 512)?;
        dev = dev.max(rel(
            bloch_oracle_dispersion(&spec)?,
            oracle::exact_sigma2(&p),
        ));
    }
    Ok(vec![Leg::max("matrix exponential vs coth law", dev, 1e-3)])
}

fn zero_t_oscillator() -> Result<Vec<Leg>> {
    let p = OscillatorParams::reduced(0.0);
    let b = p.bath;
    let tau = b.b / (b.m * p.omega0 * p.omega0);
    let model = MomentModel::new(MomentKind::OscillatorZeroT, p)?;

    let times: Vec<f64> = (1..=50).map(|i| 0.1 * tau * i as f64).collect();
    let ode = moments::integrate(&model, 0.0, &times)?;
    let ode_dev = worst(
        ode.iter()
            .map(|s| rel(s.sigma2, oracle::zero_t_sigma2(&p, s.t))),
    );

    let early = moments::integrate(&model, 0.0, &oracle::logspace(1e-6 * tau, 1e-3 * tau, 20))?;
    let slope = worst(
        early
            .iter()
            .map(|s| rel(s.sigma2 * s.sigma2, b.hbar * b.hbar * s.t / (b.m * b.b))),
    );

    // Start the PDE from the closed-form width at t0.
    let t0 = 0.01 * tau;
    let s0 = oracle::zero_t_sigma2(&p, t0);
    let t_end = 2.0 * tau;
    let out = evolve(&PdeRun::new(
        PdeModel::ZeroTemperaturePotential,
        b,
        PotentialSpec::Harmonic {
            omega0: p.omega0,
            mass: b.m,
        },
        DensityField::gaussian(Grid1D::symmetric(6.0, 256)?, 0.0, s0)?,
        t_end,
        (1..=20).map(|i| t_end * i as f64 / 20.0).collect(),
    ))?;
    let pde_dev = worst(
        out.series
            .iter()
            .map(|r| rel(r.sigma2, oracle::zero_t_sigma2(&p, r.t + t0))),
    );
    Ok(vec![
        Leg::max("moment ODE vs closed form", ode_dev, 1e-6),
        Leg::max("PDE vs closed form", pde_dev, 0.01),
        Leg::max("sigma^4 vs hbar^2 t/(mb)", slope, 0.02),
    ])
}

fn spring_identity() -> Result<Vec<Leg>> {
    let mut dev = 0.0f64;
    for beta in [0.1, 1.0, 10.0] {
        let p = OscillatorParams::reduced(1.0 / beta);
        let expected = 1.0 / beta / oracle::exact_sigma2(&p);
        dev = dev.max(rel(effective_spring(&p)?, expected));
    }
    Ok(vec![Leg::max("k_eff vs kT / sigma_e^2", dev, 1e-10)])
}

fn paths(out: &tqdiff::langevin::SimOutput) -> Result<Vec<TimeSeries>> {
    out.paths
        .series
        .iter()
        .map(|s| TimeSeries::new(out.paths.dt, s.clone()))
        .collect()
}

fn fluctuations() -> Result<Vec<Leg>> {
    let p = OscillatorParams::reduced(1.0);
    let b = p.bath;
    let s2e = oracle::exact_sigma2(&p);
    let d = oracle::diffusion(&b);
    let kt = b.kb * b.temperature;
    let tc = s2e / d;
    let force = ForceModel::EffectiveSpring { k_eff: kt / s2e };

    let mut cfg = SimConfig::new(b, 10_000, 100.0 * tc, Dynamics::Overdamped, force);
    cfg.dt = Some(0.002);
    cfg.record_stride = 25;
    cfg.paths = 10_000;
    cfg.path_start = 10.0 * tc;
    cfg.seed = 11;
    let out = simulate(&cfg)?;
    let last = out.records.last().expect("records");
    let z = (last.var - s2e).abs() / last.var_stderr;
    let max_lag = (3.0 * tc / out.paths.dt).floor() as usize;
    let acf = acf_mean(&paths(&out)?, max_lag)?;
    let acf_dev = compare(
        &acf,
        |t| oracle::acf(t, d, s2e),
        (0.0, max_lag as f64 * out.paths.dt),
        0.05,
    )?
    .mean_relative_deviation;
    drop(out);

    let mut cfg = SimConfig::new(b, 512, 830.0, Dynamics::Underdamped, force);
    cfg.dt = Some(0.01);
    cfg.record_stride = 5;
    cfg.paths = 512;
    cfg.path_start = 10.0;
    cfg.seed = 12;
    let out = simulate(&cfg)?;
    let spec = psd_mean(&paths(&out)?, 8192, 0.5)?;
    let w0 = (kt / s2e / b.m).sqrt();
    let psd_dev = compare(
        &spec,
        |w| oracle::spectrum(w, b.b, b.m, kt, s2e),
        (0.1 * w0, 10.0 * w0),
        0.1,
    )?
    .mean_relative_deviation;
    Ok(vec![
        Leg::max("|Var - sigma_e^2| / SE", z, 3.0),
        Leg::max("ACF band-averaged deviation", acf_dev, 0.05),
        Leg::max("PSD band-averaged deviation", psd_dev, 0.1),
    ])
}

fn mean_field() -> Result<Vec<Leg>> {
    let p = reduced();
    let s0 = oracle::lambda2(&p);
    let tc = crossover(&p);
    let mut cfg = SimConfig::new(
        p,
        10_000,
        10.0 * tc,
        Dynamics::Overdamped,
        ForceModel::MeanfieldQuantum {
            omega0: 0.0,
            closure: Closure::Bohm,
        },
    );
    cfg.dt = Some(0.0025 * tc);
    cfg.record_stride = 80;
    cfg.initial = InitialCondition::gaussian(s0);
    cfg.seed = 21;
    let out = simulate(&cfg)?;
    let recorded = &out.records[1..];
    let z = worst(
        recorded
            .iter()
            .map(|r| (r.var - oracle::free_sigma2(&p, s0, r.t)).abs() / r.var_stderr),
    );
    Ok(vec![
        Leg::max("max |var - ODE| / SE", z, 3.0),
        Leg::min("recorded times", recorded.len() as f64, 50.0),
    ])
}

fn sde_bytes(seed: u64) -> Result<Vec<u8>> {
    let mut cfg = SimConfig::new(
        reduced(),
        300,
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
    let mut buf = Vec::new();
    write_csv(
        &mut buf,
        &Metadata::new(
            "invariants",
            Some(seed),
            serde_json::to_value(&cfg).unwrap(),
        ),
        &["t", "mean", "var", "var_stderr"],
        out.records
            .iter()
            .map(|r| vec![r.t, r.mean, r.var, r.var_stderr]),
    )
    .unwrap();
    buf.extend(serde_json::to_vec(&out.checkpoint).unwrap());
    Ok(buf)
}

fn invariants() -> Result<Vec<Leg>> {
    let p = reduced();
    let c = derive(&p)?;
    let d = oracle::diffusion(&p);
    let times = oracle::logspace(1e-3 * crossover(&p), 1e3 * crossover(&p), 100);

    let mut sigma2s: Vec<f64> = moments::integrate(&MomentModel::free(p)?, 0.0, &times)?
        .iter()
        .map(|s| s.sigma2)
        .collect();
    for (kind, t) in [
        (MomentKind::OscillatorThermal, 1.0),
        (MomentKind::OscillatorZeroT, 0.0),
    ] {
        let model = MomentModel::new(kind, OscillatorParams::reduced(t))?;
        sigma2s.extend(
            moments::integrate(&model, 0.0, &times[..70])?
                .iter()
                .map(|s| s.sigma2),
        );
    }
    let pde = evolve(&PdeRun::new(
        PdeModel::ThermalPotential,
        p,
        PotentialSpec::Harmonic {
            omega0: 1.0,
            mass: 1.0,
        },
        DensityField::gaussian(Grid1D::symmetric(12.0, 256)?, 0.3, 0.6)?,
        1.0,
        (1..=10).map(|i| 0.1 * i as f64).collect(),
    ))?;
    sigma2s.extend(pde.series.iter().map(|r| r.sigma2));
    let floor = 0.25 * p.hbar * p.hbar;
    let heisenberg = sigma2s
        .iter()
        .map(|s| heisenberg_product(*s, &p) - floor)
        .fold(f64::INFINITY, f64::min);

    let base = DensityField::gaussian(Grid1D::symmetric(10.0, 301)?, -0.4, 1.3)?;
    let q = quantum_potential(&base, &p);
    let qmax = worst(q.iter().map(|v| v.abs()));
    let mut q_dev = 0.0f64;
    for scale in [1e-8, 0.37, 3.0, 1e6] {
        let scaled = DensityField::from_values(
            base.grid.clone(),
            base.values.iter().map(|v| v * scale).collect(),
        )?;
        let qs = quantum_potential(&scaled, &p);
        q_dev = q_dev.max(worst(q.iter().zip(&qs).map(|(a, b)| (a - b).abs())) / qmax);
    }

    let mut below = 0.0f64;
    for &t in &times {
        let s2 = front_sigma2(&FrontQuery::new(t, c))?;
        let bound = (2.0 * d * t).max(p.hbar * (t / (p.m * p.b)).sqrt());
        below = below.max((bound - s2) / bound);
    }

    let identical = sde_bytes(5)? == sde_bytes(5)?;
    let distinct = sde_bytes(5)? != sde_bytes(6)?;
    Ok(vec![
        Leg::min("Heisenberg product - hbar^2/4", heisenberg, 0.0),
        Leg::max("Q change under rescaling P", q_dev, 1e-12),
        Leg::max("front below max(2Dt, hbar sqrt(t/mb))", below, 0.0),
        Leg::min(
            "same seed identical, other seed differs",
            f64::from(u8::from(identical && distinct)),
            1.0,
        ),
    ])
}

fn residual_refinement() -> Result<Vec<Leg>> {
    let p = OscillatorParams::reduced(1.0);
    let s2 = oracle::gaussian_fixed_point(&p);
    let potential = PotentialSpec::Harmonic {
        omega0: p.omega0,
        mass: p.bath.m,
    };
    let residual = |n: usize| -> Result<f64> {
        let grid = Grid1D::symmetric(8.0 * s2.sqrt(), n)?;
        steady_state_residual(&DensityField::gaussian(grid, 0.0, s2)?, &potential, &p.bath)
    };
    let coarse = residual(257)?;
    let fine = residual(513)?;
    Ok(vec![Leg::min(
        "residual ratio on halving dx",
        coarse / fine,
        3.0,
    )])
}

type Criterion = (u8, &'static str, Option<f64>, fn() -> Result<Vec<Leg>>);

const CRITERIA: [Criterion; 12] = [
    (1, "front law", Some(1.0), front_law),
    (2, "asymptotic regimes", None, asymptotes),
    (3, "PDE/ODE equivalence", Some(60.0), pde_equivalence),
    (4, "classical limit", None, classical_limit),
    (5, "oscillator fixed point", None, fixed_point),
    (6, "Bloch oracle", Some(10.0), bloch),
    (7, "zero-T oscillator", None, zero_t_oscillator),
    (8, "effective spring identity", None, spring_identity),
    (9, "equilibrium fluctuations", Some(300.0), fluctuations),
    (10, "mean-field closure", None, mean_field),
    (11, "invariant suite", None, invariants),
    (12, "equilibrium residual", None, residual_refinement),
];

fn main() -> ExitCode {
    let only: Vec<u8> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = Vec::new();
    for (id, name, limit, check) in CRITERIA {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let in_time = limit.is_none_or(|l| secs <= l);
        let pass = match &outcome {
            Ok(legs) => in_time && legs.iter().all(Leg::pass),
            Err(_) => false,
        };
        println!(
            "criterion {id:>2} {name:<26} {} ({secs:.2} s{})",
            if pass { "PASS" } else { "FAIL" },
            limit.map_or(String::new(), |l| format!(", limit {l} s"))
        );
        match outcome {
            Ok(legs) => {
                for leg in legs {
                    println!(
                        "    {:<44} {:>12.4e} {} {:.1e}  {}",
                        leg.what,
                        leg.value,
                        if leg.upper { "<=" } else { ">=" },
                        leg.limit,
                        if leg.pass() { "ok" } else { "FAILED" }
                    );
                }
            }
            Err(e) => println!("    error: {e}"),
        }
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
