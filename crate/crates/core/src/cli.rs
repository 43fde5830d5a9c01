//! The `tqdiff` command line.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analytic::{front_sigma2, FrontQuery};
use crate::config::RunConfig;
use crate::error::Error;
use crate::langevin::{
    run_from, simulate, Checkpoint, Closure, Dynamics, Ensemble, ForceModel, InitialCondition,
    SimConfig, SimOutput, SpringSource,
};
use crate::moments::{
    self, heisenberg_product, quantum_diffusion_coefficient, MomentKind, MomentModel,
};
use crate::output::{self, output_path, Metadata, OUT_DIR_ENV};
use crate::pde::{evolve, DensityField, Grid1D, PdeModel, PdeRun};
use crate::phys::derive;
use crate::spectral::{acf_mean, fit_exponential, psd_mean, TimeSeries};
use crate::verify::{self, Tier};

#[derive(Debug, Parser)]
#[command(
    name = "tqdiff",
    version,
    about = "Thermo-quantum diffusion simulations and cross-checks"
)]
pub struct Cli {
    /// JSON config file, or a CSV previously written by tqdiff.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print D, lambda_T, beta and the Bohm diffusivity.
    Constants(ParamArgs),
    /// Dispersion front of a free particle.
    Front(FrontArgs),
    /// Dispersion of a particle in a harmonic well.
    Oscillator(OscillatorArgs),
    /// Finite-difference evolution of the density.
    Pde(PdeArgs),
    /// Langevin ensemble.
    Sde(SdeArgs),
    /// Autocorrelation and spectral density of recorded paths.
    Spectrum(SpectrumArgs),
    /// Run the cross-check matrix.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Default)]
pub struct ParamArgs {
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long = "T")]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub hbar: Option<f64>,
    #[arg(long = "kB")]
    pub kb: Option<f64>,
    #[arg(long)]
    pub omega0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FrontArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub tmin: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Evenly spaced times instead of logarithmic.
    #[arg(long)]
    pub linear: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OscillatorKind {
    Thermal,
    ZeroT,
}

#[derive(Debug, Args)]
pub struct OscillatorArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum)]
    pub kind: Option<OscillatorKind>,
    #[arg(long = "sigma2-0")]
    pub sigma2_0: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PdeModelArg {
    FreeThermal,
    ThermalPotential,
    ZeroTemperaturePotential,
}

#[derive(Debug, Args)]
pub struct PdeArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum)]
    pub model: Option<PdeModelArg>,
    /// Grid points.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub half_width: Option<f64>,
    #[arg(long)]
    pub center: Option<f64>,
    #[arg(long = "sigma2-0")]
    pub sigma2_0: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Number of evenly spaced snapshots.
    #[arg(long)]
    pub outputs: Option<usize>,
    #[arg(long)]
    pub cfl: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ForceArg {
    Free,
    External,
    MeanfieldQuantum,
    EffectiveSpring,
    TimeDependentSpring,
}

#[derive(Debug, Args)]
pub struct SdeArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub n_traj: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<DynamicsArg>,
    /// Force model; spring constants and frequencies come from the params.
    #[arg(long, value_enum)]
    pub force: Option<ForceArg>,
    #[arg(long, value_enum)]
    pub closure: Option<ClosureArg>,
    #[arg(long, value_enum)]
    pub spring_source: Option<SpringSourceArg>,
    #[arg(long)]
    pub record_stride: Option<usize>,
    /// Trajectories whose paths are written to sde_paths.csv.
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub path_start: Option<f64>,
    #[arg(long = "sigma2-0")]
    pub sigma2_0: Option<f64>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DynamicsArg {
    Overdamped,
    Underdamped,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClosureArg {
    Bohm,
    FreeEnergy,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SpringSourceArg {
    Ensemble,
    Ode,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub max_lag: Option<usize>,
    #[arg(long)]
    pub segment_len: Option<usize>,
    #[arg(long)]
    pub overlap: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, conflicts_with = "full")]
    pub quick: bool,
    #[arg(long)]
    pub full: bool,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run only these checks (repeatable).
    #[arg(long = "check")]
    pub checks: Vec<u8>,
}

/// Exit status for an error: 3 for numeric failures, 2 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::Numeric(_)
            | Error::StepUnderflow { .. }
            | Error::Negativity { .. }
            | Error::BoundaryLeak { .. },
        ) => 3,
        _ => 2,
    }
}

/// Runs a parsed command and returns the process exit status.
pub fn run(cli: Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.out_dir.is_some() {
        cfg.out_dir = cli.out_dir.clone();
    }
    let stdout = &mut io::stdout().lock();
    match cli.command {
        Command::Constants(a) => constants(cfg, a, stdout),
        Command::Front(a) => front(cfg, a, stdout),
        Command::Oscillator(a) => oscillator(cfg, a, stdout),
        Command::Pde(a) => pde(cfg, a, stdout),
        Command::Sde(a) => sde(cfg, a, stdout),
        Command::Spectrum(a) => spectrum(cfg, a, stdout),
        Command::Verify(a) => run_verify(cfg, a, stdout),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_params(cfg: &mut RunConfig, a: &ParamArgs) {
    let p = &mut cfg.params;
    set(&mut p.bath.m, a.m);
    set(&mut p.bath.b, a.b);
    set(&mut p.bath.temperature, a.temperature);
    set(&mut p.bath.hbar, a.hbar);
    set(&mut p.bath.kb, a.kb);
    set(&mut p.omega0, a.omega0);
}

fn check_params(cfg: &RunConfig) -> Result<()> {
    let errors = cfg.params.check();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(errors).into())
    }
}

fn out(cfg: &RunConfig, name: &str) -> PathBuf {
    output_path(cfg.out_dir.as_deref(), name)
}

fn written(w: &mut dyn Write, path: &Path) -> Result<()> {
    writeln!(w, "wrote {}", path.display())?;
    Ok(())
}

fn constants(mut cfg: RunConfig, a: ParamArgs, w: &mut dyn Write) -> Result<i32> {
    apply_params(&mut cfg, &a);
    check_params(&cfg)?;
    let c = derive(&cfg.params.bath)?;
    let value = serde_json::json!({
        "params": cfg.params,
        "constants": c,
        "crossover_time": c.crossover_time(),
    });
    writeln!(w, "{}", serde_json::to_string_pretty(&value)?)?;
    Ok(0)
}

fn time_grid(t_min: f64, t_max: f64, points: usize, log: bool) -> Vec<f64> {
    if points == 1 {
        return vec![t_max];
    }
    let frac = |i: usize| i as f64 / (points - 1) as f64;
    if log {
        let (a, b) = (t_min.ln(), t_max.ln());
        let mut ts: Vec<f64> = (0..points).map(|i| (a + (b - a) * frac(i)).exp()).collect();
        ts[0] = t_min;
        ts[points - 1] = t_max;
        ts
    } else {
        (0..points)
            .map(|i| t_min + (t_max - t_min) * frac(i))
            .collect()
    }
}

fn front(mut cfg: RunConfig, a: FrontArgs, w: &mut dyn Write) -> Result<i32> {
    apply_params(&mut cfg, &a.params);
    let f = &mut cfg.front;
    if a.tmin.is_some() {
        f.t_min = a.tmin;
    }
    set(&mut f.t_max, a.tmax);
    set(&mut f.points, a.points);
    if a.linear {
        f.log = false;
    }
    check_params(&cfg)?;
    let f = &cfg.front;
    let t_min = f.t_min.unwrap_or(if f.log { 1e-4 * f.t_max } else { 0.0 });
    if !(f.t_max > 0.0 && f.t_max.is_finite() && f.points > 0) {
        return Err(Error::Config("front needs t_max > 0 and points > 0".into()).into());
    }
    if !(t_min >= 0.0 && t_min <= f.t_max && (!f.log || t_min > 0.0)) {
        return Err(Error::Config(format!("bad front time range [{t_min}, {}]", f.t_max)).into());
    }
    let c = derive(&cfg.params.bath)?;
    let rows = time_grid(t_min, f.t_max, f.points, f.log)
        .into_iter()
        .map(|t| {
            Ok(vec![
                t,
                front_sigma2(&FrontQuery::new(t, c))?,
                2.0 * c.diffusion * t,
            ])
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let path = out(&cfg, "front.csv");
    let meta = Metadata::new("front-law, asymptotic-regimes", None, cfg.to_json());
    output::write_csv_file(
        &path,
        &meta,
        &["t", "sigma2_quantum", "sigma2_classical"],
        rows,
    )?;
    written(w, &path)?;
    Ok(0)
}

fn oscillator(mut cfg: RunConfig, a: OscillatorArgs, w: &mut dyn Write) -> Result<i32> {
    apply_params(&mut cfg, &a.params);
    let o = &mut cfg.oscillator;
    set(
        &mut o.kind,
        a.kind.map(|k| match k {
            OscillatorKind::Thermal => MomentKind::OscillatorThermal,
            OscillatorKind::ZeroT => MomentKind::OscillatorZeroT,
        }),
    );
    set(&mut o.sigma2_0, a.sigma2_0);
    set(&mut o.t_max, a.tmax);
    set(&mut o.points, a.points);
    check_params(&cfg)?;
    let o = &cfg.oscillator;
    if !(o.t_max > 0.0 && o.points > 0) {
        return Err(Error::Config("oscillator needs t_max > 0 and points > 0".into()).into());
    }
    let model = MomentModel::new(o.kind, cfg.params)?;
    let times = time_grid(0.0, o.t_max, o.points, false);
    let states = moments::integrate(&model, o.sigma2_0, &times)?;
    let bath = &cfg.params.bath;
    let rows = states.iter().map(|s| {
        vec![
            s.t,
            s.sigma2,
            heisenberg_product(s.sigma2, bath),
            quantum_diffusion_coefficient(s.sigma2, bath),
        ]
    });
    let target = match o.kind {
        MomentKind::OscillatorZeroT => "zero-temperature-oscillator",
        _ => "oscillator-fixed-point",
    };
    let path = out(&cfg, "oscillator.csv");
    let meta = Metadata::new(target, None, cfg.to_json());
    output::write_csv_file(
        &path,
        &meta,
        &["t", "sigma2", "heisenberg_product", "quantum_diffusion"],
        rows,
    )?;
    written(w, &path)?;
    Ok(0)
}

fn pde(mut cfg: RunConfig, a: PdeArgs, w: &mut dyn Write) -> Result<i32> {
    apply_params(&mut cfg, &a.params);
    let p = &mut cfg.pde;
    set(
        &mut p.model,
        a.model.map(|m| match m {
            PdeModelArg::FreeThermal => PdeModel::FreeThermal,
            PdeModelArg::ThermalPotential => PdeModel::ThermalPotential,
            PdeModelArg::ZeroTemperaturePotential => PdeModel::ZeroTemperaturePotential,
        }),
    );
    set(&mut p.n, a.n);
    set(&mut p.half_width, a.half_width);
    set(&mut p.center, a.center);
    set(&mut p.sigma2_0, a.sigma2_0);
    set(&mut p.t_end, a.t_end);
    set(&mut p.outputs, a.outputs);
    set(&mut p.cfl, a.cfl);
    check_params(&cfg)?;
    cfg.pde.potential = Some(cfg.pde.resolved_potential(&cfg.params));
    let p = &cfg.pde;
    if p.outputs == 0 {
        return Err(Error::Config("pde needs at least one output".into()).into());
    }
    let grid = Grid1D::symmetric(p.half_width, p.n)?;
    let grid = Grid1D::new(grid.x_min + p.center, grid.x_max + p.center, p.n)?;
    let mut run = PdeRun::new(
        p.model,
        cfg.params.bath,
        p.potential.clone().expect("resolved above"),
        DensityField::gaussian(grid, p.center, p.sigma2_0)?,
        p.t_end,
        (1..=p.outputs)
            .map(|i| p.t_end * i as f64 / p.outputs as f64)
            .collect(),
    );
    run.cfl = p.cfl;
    let result = evolve(&run)?;
    let target = match p.model {
        PdeModel::FreeThermal => "pde-moment-equivalence",
        PdeModel::ThermalPotential => "equilibrium-residual",
        PdeModel::ZeroTemperaturePotential => "zero-temperature-oscillator",
    };
    let meta = Metadata::new(target, None, cfg.to_json());
    for (k, snap) in result.snapshots.iter().enumerate() {
        let path = out(&cfg, &format!("pde_snapshot_{k:03}.csv"));
        let mut snap_meta = meta.clone();
        snap_meta.target = format!("{target}; t = {}", snap.t);
        let grid = &snap.density.grid;
        output::write_csv_file(
            &path,
            &snap_meta,
            &["x", "P"],
            snap.density
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| vec![grid.x(i), *v]),
        )?;
    }
    let path = out(&cfg, "pde_series.csv");
    output::write_csv_file(
        &path,
        &meta,
        &["t", "sigma2", "mass", "residual"],
        result
            .series
            .iter()
            .map(|r| vec![r.t, r.sigma2, r.mass, r.residual.unwrap_or(f64::NAN)]),
    )?;
    writeln!(
        w,
        "{} steps, {} halvings, {} snapshots",
        result.steps,
        result.halvings,
        result.snapshots.len()
    )?;
    written(w, &path)?;
    Ok(0)
}

fn force_from(
    arg: ForceArg,
    cfg: &RunConfig,
    closure: Closure,
    source: SpringSource,
) -> crate::Result<ForceModel> {
    let omega0 = cfg.params.omega0;
    Ok(match arg {
        ForceArg::Free => ForceModel::Free,
        ForceArg::External => ForceModel::External { omega0 },
        ForceArg::MeanfieldQuantum => ForceModel::MeanfieldQuantum { omega0, closure },
        ForceArg::EffectiveSpring => ForceModel::effective_spring(&cfg.params)?,
        ForceArg::TimeDependentSpring => ForceModel::TimeDependentSpring { omega0, source },
    })
}

fn sde(mut cfg: RunConfig, a: SdeArgs, w: &mut dyn Write) -> Result<i32> {
    apply_params(&mut cfg, &a.params);
    check_params(&cfg)?;
    let s = &mut cfg.sde;
    set(&mut s.n_traj, a.n_traj);
    if a.dt.is_some() {
        s.dt = a.dt;
    }
    set(&mut s.t_end, a.t_end);
    set(&mut s.seed, a.seed);
    set(
        &mut s.mode,
        a.mode.map(|m| match m {
            DynamicsArg::Overdamped => Dynamics::Overdamped,
            DynamicsArg::Underdamped => Dynamics::Underdamped,
        }),
    );
    set(&mut s.record_stride, a.record_stride);
    set(&mut s.paths, a.paths);
    set(&mut s.path_start, a.path_start);
    if let Some(s2) = a.sigma2_0 {
        s.initial = InitialCondition {
            position_sigma2: s2,
            ..s.initial
        };
    }
    let closure = match a.closure {
        Some(ClosureArg::FreeEnergy) => Closure::FreeEnergy,
        _ => Closure::Bohm,
    };
    let source = match a.spring_source {
        Some(SpringSourceArg::Ode) => SpringSource::Ode,
        _ => SpringSource::Ensemble,
    };
    if let Some(f) = a.force {
        cfg.sde.force = force_from(f, &cfg, closure, source)?;
    } else if a.closure.is_some() || a.spring_source.is_some() {
        return Err(Error::Config("--closure and --spring-source need --force".into()).into());
    }
    let s = &cfg.sde;
    let sim = SimConfig {
        params: cfg.params.bath,
        n_traj: s.n_traj,
        dt: s.dt,
        t_end: s.t_end,
        seed: s.seed,
        mode: s.mode,
        force: s.force,
        record_stride: s.record_stride,
        initial: s.initial,
        paths: s.paths,
        path_start: s.path_start,
    };
    let result: SimOutput = match &a.resume {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let cp: Checkpoint = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            run_from(&sim, Ensemble::from_checkpoint(&cp)?)?
        }
        None => simulate(&sim)?,
    };
    let mut echo = cfg.to_json();
    if let Some(path) = &a.resume {
        echo["resumed_from"] = serde_json::json!(path);
    }
    let meta = Metadata::new(
        "mean-field-closure, equilibrium-fluctuations",
        Some(s.seed),
        echo,
    );
    let path = out(&cfg, "sde.csv");
    output::write_csv_file(
        &path,
        &meta,
        &["t", "mean", "var", "var_stderr"],
        result
            .records
            .iter()
            .map(|r| vec![r.t, r.mean, r.var, r.var_stderr]),
    )?;
    written(w, &path)?;
    if !result.paths.series.is_empty() {
        let names: Vec<String> = std::iter::once("t".to_string())
            .chain((0..result.paths.series.len()).map(|k| format!("path_{k}")))
            .collect();
        let cols: Vec<&str> = names.iter().map(String::as_str).collect();
        let len = result.paths.series[0].len();
        let rows = (0..len).map(|i| {
            std::iter::once(result.paths.t0 + i as f64 * result.paths.dt)
                .chain(result.paths.series.iter().map(|s| s[i]))
                .collect()
        });
        let path = out(&cfg, "sde_paths.csv");
        output::write_csv_file(&path, &meta, &cols, rows)?;
        written(w, &path)?;
    }
    let path = out(&cfg, "sde_checkpoint.json");
    output::write_json_file(&path, &result.checkpoint)?;
    written(w, &path)?;
    Ok(0)
}

fn read_paths(path: &Path) -> Result<Vec<TimeSeries>> {
    let table = output::read_csv(path)?;
    let t = table
        .column("t")
        .with_context(|| format!("{}: no `t` column", path.display()))?;
    if t.len() < 2 {
        return Err(Error::Config(format!("{}: fewer than two samples", path.display())).into());
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    let series = table
        .columns
        .iter()
        .filter(|c| c.starts_with("path_"))
        .map(|c| TimeSeries::new(dt, table.column(c).expect("listed column")))
        .collect::<crate::Result<Vec<_>>>()?;
    if series.is_empty() {
        return Err(Error::Config(format!("{}: no path_ columns", path.display())).into());
    }
    Ok(series)
}

fn spectrum(mut cfg: RunConfig, a: SpectrumArgs, w: &mut dyn Write) -> Result<i32> {
    let s = &mut cfg.spectrum;
    if a.input.is_some() {
        s.input = a.input;
    }
    if a.max_lag.is_some() {
        s.max_lag = a.max_lag;
    }
    set(&mut s.segment_len, a.segment_len);
    set(&mut s.overlap, a.overlap);
    let input = cfg
        .spectrum
        .input
        .clone()
        .unwrap_or_else(|| out(&cfg, "sde_paths.csv"));
    let series = read_paths(&input)?;
    let s = &cfg.spectrum;
    let len = series[0].len();
    let max_lag = s.max_lag.unwrap_or(len / 4);
    let acf = acf_mean(&series, max_lag)?;
    let segment_len = s.segment_len.min(len);
    let spec = psd_mean(&series, segment_len, s.overlap)?;

    let meta = Metadata::new("equilibrium-fluctuations", None, cfg.to_json());
    let path = out(&cfg, "acf.csv");
    output::write_csv_file(
        &path,
        &meta,
        &["tau", "C", "stderr"],
        (0..acf.lags.len()).map(|j| vec![acf.lags[j], acf.values[j], acf.stderr[j]]),
    )?;
    written(w, &path)?;
    let path = out(&cfg, "psd.csv");
    output::write_csv_file(
        &path,
        &meta,
        &["omega", "S"],
        spec.omegas
            .iter()
            .zip(&spec.values)
            .map(|(o, v)| vec![*o, *v]),
    )?;
    written(w, &path)?;
    if let Ok(fit) = fit_exponential(&acf, acf.lags[acf.lags.len() - 1]) {
        writeln!(
            w,
            "exponential fit: C(0) = {:.6e}, rate = {:.6e}, residual = {:.3e}",
            fit.amplitude, fit.rate, fit.residual
        )?;
    }
    Ok(0)
}

fn run_verify(mut cfg: RunConfig, a: VerifyArgs, w: &mut dyn Write) -> Result<i32> {
    let v = &mut cfg.verify;
    if a.full {
        v.tier = Tier::Full;
    } else if a.quick {
        v.tier = Tier::Quick;
    }
    set(&mut v.seed, a.seed);
    if a.report.is_some() {
        v.report = a.report;
    }
    if !a.checks.is_empty() {
        v.checks = a.checks;
    }
    let v = &cfg.verify;
    if let Some(bad) = v.checks.iter().find(|id| !(1..=12).contains(*id)) {
        return Err(Error::Config(format!("no check with id {bad}")).into());
    }
    let report = if v.checks.is_empty() {
        verify::run(v.tier, v.seed)
    } else {
        verify::run_checks(&v.checks, v.tier, v.seed)
    };
    let path = v
        .report
        .clone()
        .unwrap_or_else(|| out(&cfg, "verify_report.json"));
    verify::emit_report(&report, &path, w)?;
    written(w, &path)?;
    Ok(if report.all_pass() { 0 } else { 1 })
}
