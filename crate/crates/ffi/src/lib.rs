//! C ABI over the `tqdiff` crate.
//!
//! Every function returns a [`TqStatus`]; on failure the message is kept in
//! thread-local storage and read with [`tq_last_error`]. Stateful solvers are
//! exposed as opaque handles that the caller frees exactly once.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use tqdiff::analytic::{self, FrontQuery};
use tqdiff::langevin::{
    run_from, Closure, Dynamics, Ensemble, ForceModel, InitialCondition, SimConfig, SpringSource,
};
use tqdiff::moments::{self, MomentKind, MomentModel};
use tqdiff::pde::{DensityField, Grid1D, PdeModel, PdeRun, PdeSolver, PotentialSpec};
use tqdiff::spectral::{self, TimeSeries};
use tqdiff::{BathParams, Error, Extent, OscillatorParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numeric = 3,
    StepUnderflow = 4,
    Negativity = 5,
    BoundaryLeak = 6,
    BufferTooSmall = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TqBathParams {
    pub m: f64,
    pub b: f64,
    pub temperature: f64,
    pub hbar: f64,
    pub kb: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TqOscillatorParams {
    pub bath: TqBathParams,
    pub omega0: f64,
}

/// Infinite lengths and inverse temperatures are reported as `INFINITY`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TqDerivedConstants {
    pub diffusion: f64,
    pub lambda_t: f64,
    pub beta: f64,
    pub bohm_diffusivity: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TqMomentKind {
    FreeThermal = 0,
    OscillatorThermal = 1,
    OscillatorZeroT = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TqPdeModel {
    FreeThermal = 0,
    ThermalPotential = 1,
    ZeroTemperaturePotential = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TqDynamics {
    Overdamped = 0,
    Underdamped = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TqForce {
    Free = 0,
    External = 1,
    MeanfieldBohm = 2,
    MeanfieldFreeEnergy = 3,
    EffectiveSpring = 4,
    TimeDependentSpring = 5,
    TimeDependentSpringOde = 6,
}

/// Grid and initial Gaussian for a density solver.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TqPdeSpec {
    pub model: TqPdeModel,
    pub params: TqOscillatorParams,
    pub n: usize,
    pub half_width: f64,
    pub center: f64,
    pub sigma2_0: f64,
    /// Zero selects the solver default.
    pub cfl: f64,
}

/// Ensemble of Langevin trajectories. `dt == 0` selects the default step.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TqSimSpec {
    pub params: TqOscillatorParams,
    pub n_traj: usize,
    pub dt: f64,
    pub seed: u64,
    pub dynamics: TqDynamics,
    pub force: TqForce,
    pub sigma2_0: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TqSampleStats {
    pub mean: f64,
    pub var: f64,
    pub var_stderr: f64,
}

/// Opaque density solver.
pub struct TqPde {
    solver: PdeSolver,
}

/// Opaque Langevin ensemble.
pub struct TqSim {
    config: SimConfig,
    ensemble: Ensemble,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(e: &Error) -> TqStatus {
    match e {
        Error::Validation(_) | Error::Domain(_) | Error::Config(_) => TqStatus::InvalidArgument,
        Error::Numeric(_) => TqStatus::Numeric,
        Error::StepUnderflow { .. } => TqStatus::StepUnderflow,
        Error::Negativity { .. } => TqStatus::Negativity,
        Error::BoundaryLeak { .. } => TqStatus::BoundaryLeak,
        Error::Io { .. } => TqStatus::Io,
    }
}

struct Fail(TqStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TqStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TqStatus::Ok
        }
        Ok(Err(Fail(status, message))) => {
            set_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {message}"));
            TqStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// Copies `src` into the caller buffer, failing when it does not fit.
unsafe fn copy_out(src: &[f64], dst: *mut f64, capacity: usize, what: &str) -> Result<(), Fail> {
    if src.len() > capacity {
        return Err(Fail(
            TqStatus::BufferTooSmall,
            format!("{what} needs {} values, buffer holds {capacity}", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(());
    }
    if dst.is_null() {
        return Err(null(what));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

impl From<TqBathParams> for BathParams {
    fn from(p: TqBathParams) -> Self {
        BathParams {
            m: p.m,
            b: p.b,
            temperature: p.temperature,
            hbar: p.hbar,
            kb: p.kb,
        }
    }
}

impl From<BathParams> for TqBathParams {
    fn from(p: BathParams) -> Self {
        TqBathParams {
            m: p.m,
            b: p.b,
            temperature: p.temperature,
            hbar: p.hbar,
            kb: p.kb,
        }
    }
}

impl From<TqOscillatorParams> for OscillatorParams {
    fn from(p: TqOscillatorParams) -> Self {
        OscillatorParams::new(p.bath.into(), p.omega0)
    }
}

fn extent(e: Extent) -> f64 {
    e.finite().unwrap_or(f64::INFINITY)
}

fn moment_kind(k: TqMomentKind) -> MomentKind {
    match k {
        TqMomentKind::FreeThermal => MomentKind::FreeThermal,
        TqMomentKind::OscillatorThermal => MomentKind::OscillatorThermal,
        TqMomentKind::OscillatorZeroT => MomentKind::OscillatorZeroT,
    }
}

fn force_model(f: TqForce, p: &OscillatorParams) -> Result<ForceModel, Error> {
    let omega0 = p.omega0;
    Ok(match f {
        TqForce::Free => ForceModel::Free,
        TqForce::External => ForceModel::External { omega0 },
        TqForce::MeanfieldBohm => ForceModel::MeanfieldQuantum {
            omega0,
            closure: Closure::Bohm,
        },
        TqForce::MeanfieldFreeEnergy => ForceModel::MeanfieldQuantum {
            omega0,
            closure: Closure::FreeEnergy,
        },
        TqForce::EffectiveSpring => ForceModel::effective_spring(p)?,
        TqForce::TimeDependentSpring => ForceModel::TimeDependentSpring {
            omega0,
            source: SpringSource::Ensemble,
        },
        TqForce::TimeDependentSpringOde => ForceModel::TimeDependentSpring {
            omega0,
            source: SpringSource::Ode,
        },
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next `tq_` call on the same thread.
#[no_mangle]
pub extern "C" fn tq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Reduced units (`m = b = hbar = kB = 1`) at the given temperature.
#[no_mangle]
pub extern "C" fn tq_reduced_params(temperature: f64) -> TqBathParams {
    BathParams::reduced(temperature).into()
}

#[no_mangle]
pub unsafe extern "C" fn tq_derive(
    params: *const TqBathParams,
    out: *mut TqDerivedConstants,
) -> TqStatus {
    guard(|| {
        let p: BathParams = (*get(params, "params")?).into();
        let out = get_mut(out, "out")?;
        let c = tqdiff::phys::derive(&p)?;
        *out = TqDerivedConstants {
            diffusion: c.diffusion,
            lambda_t: extent(c.lambda_t),
            beta: extent(c.beta),
            bohm_diffusivity: c.bohm_diffusivity,
        };
        Ok(())
    })
}

/// Dispersion of a point-like packet at time `t` under the free thermal front law.
#[no_mangle]
pub unsafe extern "C" fn tq_front_sigma2(
    params: *const TqBathParams,
    t: f64,
    out: *mut f64,
) -> TqStatus {
    guard(|| {
        let p: BathParams = (*get(params, "params")?).into();
        let out = get_mut(out, "out")?;
        let c = tqdiff::phys::derive(&p)?;
        *out = analytic::front_sigma2(&FrontQuery::new(t, c))?;
        Ok(())
    })
}

/// Equilibrium dispersion of the oscillator under the Gaussian closure.
#[no_mangle]
pub unsafe extern "C" fn tq_oscillator_sigma2_closure(
    params: *const TqOscillatorParams,
    out: *mut f64,
) -> TqStatus {
    guard(|| {
        let p: OscillatorParams = (*get(params, "params")?).into();
        *get_mut(out, "out")? = analytic::oscillator_sigma2_dg(&p)?;
        Ok(())
    })
}

/// Exact equilibrium dispersion of the damped quantum oscillator.
#[no_mangle]
pub unsafe extern "C" fn tq_oscillator_sigma2_exact(
    params: *const TqOscillatorParams,
    out: *mut f64,
) -> TqStatus {
    guard(|| {
        let p: OscillatorParams = (*get(params, "params")?).into();
        *get_mut(out, "out")? = analytic::oscillator_sigma2_exact(&p)?;
        Ok(())
    })
}

/// Zero-temperature oscillator dispersion at `t`, from a point source.
#[no_mangle]
pub unsafe extern "C" fn tq_zero_t_oscillator_sigma2(
    params: *const TqOscillatorParams,
    t: f64,
    out: *mut f64,
) -> TqStatus {
    guard(|| {
        let p: OscillatorParams = (*get(params, "params")?).into();
        let out = get_mut(out, "out")?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(Fail(
                TqStatus::InvalidArgument,
                format!("time must be non-negative, got {t}"),
            ));
        }
        *out = analytic::zero_t_oscillator_sigma2(t, &p);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tq_effective_spring(
    params: *const TqOscillatorParams,
    out: *mut f64,
) -> TqStatus {
    guard(|| {
        let p: OscillatorParams = (*get(params, "params")?).into();
        *get_mut(out, "out")? = analytic::effective_spring(&p)?;
        Ok(())
    })
}

/// Integrates the dispersion ODE from `sigma2_0`, writing `sigma2` at each of
/// the `n` increasing times into `out`.
#[no_mangle]
pub unsafe extern "C" fn tq_moments_integrate(
    kind: TqMomentKind,
    params: *const TqOscillatorParams,
    sigma2_0: f64,
    times: *const f64,
    n: usize,
    out: *mut f64,
) -> TqStatus {
    guard(|| {
        let p: OscillatorParams = (*get(params, "params")?).into();
        let times = input(times, n, "times")?;
        let model = MomentModel::new(moment_kind(kind), p)?;
        let states = moments::integrate(&model, sigma2_0, times)?;
        let sigma2: Vec<f64> = states.iter().map(|s| s.sigma2).collect();
        copy_out(&sigma2, out, n, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn tq_pde_new(spec: *const TqPdeSpec, out: *mut *mut TqPde) -> TqStatus {
    guard(|| {
        let spec = *get(spec, "spec")?;
        let out = get_mut(out, "out")?;
        *out = ptr::null_mut();
        let p: OscillatorParams = spec.params.into();
        let model = match spec.model {
            TqPdeModel::FreeThermal => PdeModel::FreeThermal,
            TqPdeModel::ThermalPotential => PdeModel::ThermalPotential,
            TqPdeModel::ZeroTemperaturePotential => PdeModel::ZeroTemperaturePotential,
        };
        let potential = if model.uses_potential() {
            PotentialSpec::Harmonic {
                omega0: p.omega0,
                mass: p.bath.m,
            }
        } else {
            PotentialSpec::None
        };
        let grid = Grid1D::symmetric(spec.half_width, spec.n)?;
        let initial = DensityField::gaussian(grid, spec.center, spec.sigma2_0)?;
        let cfl = if spec.cfl == 0.0 { PdeRun::DEFAULT_CFL } else { spec.cfl };
        let solver = PdeSolver::new(model, &p.bath, &potential, &initial, cfl)?;
        *out = Box::into_raw(Box::new(TqPde { solver }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tq_pde_free(handle: *mut TqPde) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

#[no_mangle]
pub unsafe extern "C" fn tq_pde_advance_to(handle: *mut TqPde, t: f64) -> TqStatus {
    guard(|| {
        get_mut(handle, "handle")?.solver.advance_to(t)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tq_pde_time(handle: *const TqPde, out: *mut f64) -> TqStatus {
    guard(|| {
        *get_mut(out, "out")? = get(handle, "handle")?.solver.time();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tq_pde_variance(handle: *const TqPde, out: *mut f64) -> TqStatus {
    guard(|| {
        *get_mut(out, "out")? = get(handle, "handle")?.solver.variance();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tq_pde_mass(handle: *const TqPde, out: *mut f64) -> TqStatus {
    guard(|| {
        *get_mut(out, "out")? = get(handle, "handle")?.solver.density().mass();
        Ok(())
    })
}

/// Number of grid points, the size `tq_pde_density` needs.
#[no_mangle]
pub unsafe extern "C" fn tq_pde_len(handle: *const TqPde, out: *mut usize) -> TqStatus {
    guard(|| {
        *get_mut(out, "out")? = get(handle, "handle")?.solver.values().len();
        Ok(())
    })
}

/// Copies the grid abscissae into `x` and the density into `density`; either may be null.
#[no_mangle]
pub unsafe extern "C" fn tq_pde_density(
    handle: *const TqPde,
    x: *mut f64,
    density: *mut f64,
    capacity: usize,
) -> TqStatus {
    guard(|| {
        let solver = &get(handle, "handle")?.solver;
        if !x.is_null() {
            let xs: Vec<f64> = solver.grid().points().collect();
            copy_out(&xs, x, capacity, "x")?;
        }
        if !density.is_null() {
            copy_out(solver.values(), density, capacity, "density")?;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tq_sim_new(spec: *const TqSimSpec, out: *mut *mut TqSim) -> TqStatus {
    guard(|| {
        let spec = *get(spec, "spec")?;
        let out = get_mut(out, "out")?;
        *out = ptr::null_mut();
        let p: OscillatorParams = spec.params.into();
        let dynamics = match spec.dynamics {
            TqDynamics::Overdamped => Dynamics::Overdamped,
            TqDynamics::Underdamped => Dynamics::Underdamped,
        };
        let mut config = SimConfig::new(
            p.bath,
            spec.n_traj,
            1.0,
            dynamics,
            force_model(spec.force, &p)?,
        );
        config.seed = spec.seed;
        config.dt = (spec.dt != 0.0).then_some(spec.dt);
        config.initial = InitialCondition::gaussian(spec.sigma2_0);
        config.record_stride = usize::MAX;
        config.validate()?;
        config.schedule()?;
        let ensemble = Ensemble::new(
            config.n_traj,
            config.seed,
            dynamics,
            &config.initial,
            &config.params,
        )?;
        *out = Box::into_raw(Box::new(TqSim { config, ensemble }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tq_sim_free(handle: *mut TqSim) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Advances the ensemble by `duration`. Splitting a run into several calls
/// gives the same trajectories as one call when `duration` is a whole number
/// of steps.
#[no_mangle]
pub unsafe extern "C" fn tq_sim_advance(handle: *mut TqSim, duration: f64) -> TqStatus {
    guard(|| {
        let sim = get_mut(handle, "handle")?;
        let mut config = sim.config.clone();
        config.t_end = duration;
        let run = run_from(&config, sim.ensemble.clone())?;
        sim.ensemble = Ensemble::from_checkpoint(&run.checkpoint)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tq_sim_time(handle: *const TqSim, out: *mut f64) -> TqStatus {
    guard(|| {
        *get_mut(out, "out")? = get(handle, "handle")?.ensemble.t();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tq_sim_stats(handle: *const TqSim, out: *mut TqSampleStats) -> TqStatus {
    guard(|| {
        let s = get(handle, "handle")?.ensemble.stats();
        *get_mut(out, "out")? = TqSampleStats {
            mean: s.mean,
            var: s.var,
            var_stderr: s.var_stderr,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tq_sim_positions(
    handle: *const TqSim,
    out: *mut f64,
    capacity: usize,
) -> TqStatus {
    guard(|| {
        let sim = get(handle, "handle")?;
        copy_out(sim.ensemble.positions(), out, capacity, "out")
    })
}

/// Biased autocorrelation of `samples` at lags `0..=max_lag`; `out` holds
/// `max_lag + 1` values.
#[no_mangle]
pub unsafe extern "C" fn tq_acf(
    samples: *const f64,
    n: usize,
    dt: f64,
    max_lag: usize,
    out: *mut f64,
    capacity: usize,
) -> TqStatus {
    guard(|| {
        let series = TimeSeries::new(dt, input(samples, n, "samples")?.to_vec())?;
        let est = spectral::acf(&series, max_lag)?;
        copy_out(&est.values, out, capacity, "out")
    })
}

/// Welch power spectral density. `segment_len / 2 + 1` frequencies are
/// written to `omegas` and `values`; `written` receives that count.
#[no_mangle]
pub unsafe extern "C" fn tq_psd(
    samples: *const f64,
    n: usize,
    dt: f64,
    segment_len: usize,
    overlap: f64,
    omegas: *mut f64,
    values: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> TqStatus {
    guard(|| {
        let written = get_mut(written, "written")?;
        let series = TimeSeries::new(dt, input(samples, n, "samples")?.to_vec())?;
        let est = spectral::psd(&series, segment_len, overlap)?;
        copy_out(&est.omegas, omegas, capacity, "omegas")?;
        copy_out(&est.values, values, capacity, "values")?;
        *written = est.values.len();
        Ok(())
    })
}
