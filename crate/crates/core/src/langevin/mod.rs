//! Ensembles of Langevin trajectories.
//!
//! ```text
//! m R'' + b R' = F(R) + X,   <X(t) X(s)> = 2 b kB T delta(t - s)
//! ```
//!
//! Underdamped runs use a BAOAB splitting with the exact Ornstein-Uhlenbeck
//! velocity update; overdamped runs use Euler-Maruyama on `b R' = F + X`.
//! Quantum forces are closed over the ensemble: the density is replaced by a
//! Gaussian with the ensemble mean and variance, recomputed once per step.
//!
//! Trajectory `k` draws from the ChaCha8 stream `k` of the master seed, so a
//! run is bit-identical for a given seed however rayon splits the work.

mod force;

pub use force::{
    free_energy_factor, meanfield_quantum_force, AffineForce, Closure, ForceField, ForceModel,
    SpringSource,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::error::{Error, Result};
use crate::phys::{BathParams, OscillatorParams};
use crate::reduce::{sample_stats, SampleStats};

/// Gaussian white noise of constant spectral density `2 b kB T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub spectral_density: f64,
}

impl NoiseSpec {
    pub fn white(params: &BathParams) -> Self {
        Self {
            spectral_density: 2.0 * params.b * params.thermal_energy(),
        }
    }

    /// Variance of the force impulse `int X dt` over one step.
    pub fn impulse_variance(&self, dt: f64) -> f64 {
        self.spectral_density * dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    Overdamped,
    Underdamped,
}

/// Independent Gaussian initial positions and velocities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialCondition {
    pub position_mean: f64,
    pub position_sigma2: f64,
    pub velocity_mean: f64,
    /// `None` draws from the Maxwell distribution, variance `kB T / m`.
    pub velocity_sigma2: Option<f64>,
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self {
            position_mean: 0.0,
            position_sigma2: 0.0,
            velocity_mean: 0.0,
            velocity_sigma2: None,
        }
    }
}

impl InitialCondition {
    pub fn gaussian(position_sigma2: f64) -> Self {
        Self {
            position_sigma2,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let v = self.velocity_sigma2.unwrap_or(0.0);
        let ok = self.position_mean.is_finite()
            && self.velocity_mean.is_finite()
            && self.position_sigma2.is_finite()
            && self.position_sigma2 >= 0.0
            && v.is_finite()
            && v >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid initial condition {self:?}")))
        }
    }
}

fn stream(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

/// Positions, optional velocities and per-trajectory random streams.
#[derive(Debug, Clone)]
pub struct Ensemble {
    t: f64,
    positions: Vec<f64>,
    velocities: Option<Vec<f64>>,
    seed: u64,
    rngs: Vec<ChaCha8Rng>,
}

impl Ensemble {
    pub fn new(
        n: usize,
        seed: u64,
        dynamics: Dynamics,
        initial: &InitialCondition,
        params: &BathParams,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config(
                "an ensemble needs at least one trajectory".into(),
            ));
        }
        initial.validate()?;
        let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|k| stream(seed, k)).collect();
        let sx = initial.position_sigma2.sqrt();
        let sv = initial
            .velocity_sigma2
            .unwrap_or(params.thermal_energy() / params.m)
            .sqrt();
        let mut positions = Vec::with_capacity(n);
        let mut velocities = Vec::with_capacity(n);
        for rng in &mut rngs {
            let xi: f64 = rng.sample(StandardNormal);
            positions.push(initial.position_mean + sx * xi);
            if dynamics == Dynamics::Underdamped {
                let eta: f64 = rng.sample(StandardNormal);
                velocities.push(initial.velocity_mean + sv * eta);
            }
        }
        Ok(Self {
            t: 0.0,
            positions,
            velocities: (dynamics == Dynamics::Underdamped).then_some(velocities),
            seed,
            rngs,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> Option<&[f64]> {
        self.velocities.as_deref()
    }

    pub fn dynamics(&self) -> Dynamics {
        if self.velocities.is_some() {
            Dynamics::Underdamped
        } else {
            Dynamics::Overdamped
        }
    }

    /// Mean, unbiased variance and its standard error over trajectories.
    pub fn stats(&self) -> SampleStats {
        sample_stats(&self.positions)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            t: self.t,
            seed: self.seed,
            positions: self.positions.clone(),
            velocities: self.velocities.clone(),
            stream_words: self
                .rngs
                .iter()
                .map(|r| r.get_word_pos().to_string())
                .collect(),
        }
    }

    pub fn from_checkpoint(cp: &Checkpoint) -> Result<Self> {
        let n = cp.positions.len();
        if n == 0 || cp.stream_words.len() != n {
            return Err(Error::Config(
                "checkpoint needs one stream position per trajectory".into(),
            ));
        }
        if cp.velocities.as_ref().is_some_and(|v| v.len() != n) {
            return Err(Error::Config(
                "checkpoint velocities do not match positions".into(),
            ));
        }
        let rngs = cp
            .stream_words
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let word: u128 = w.parse().map_err(|_| {
                    Error::Config(format!("bad stream position {w:?} in checkpoint"))
                })?;
                let mut rng = stream(cp.seed, k);
                rng.set_word_pos(word);
                Ok(rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            t: cp.t,
            positions: cp.positions.clone(),
            velocities: cp.velocities.clone(),
            seed: cp.seed,
            rngs,
        })
    }
}

/// Serialisable snapshot of an [`Ensemble`], random stream positions
/// included, from which a run resumes bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: f64,
    pub seed: u64,
    pub positions: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocities: Option<Vec<f64>>,
    /// ChaCha word positions, as decimal strings.
    pub stream_words: Vec<String>,
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("dt must be positive, got {dt}")))
    }
}

/// One Euler-Maruyama step, `R' = R + F dt / b + sqrt(2 D dt) xi`.
pub fn step_overdamped(
    ens: &mut Ensemble,
    force: &mut ForceField,
    params: &BathParams,
    dt: f64,
) -> Result<()> {
    overdamped(ens, force, params, dt, None)
}

/// [`step_overdamped`] that also stores each trajectory's standard normal
/// draw in `kicks`.
pub fn step_overdamped_traced(
    ens: &mut Ensemble,
    force: &mut ForceField,
    params: &BathParams,
    dt: f64,
    kicks: &mut Vec<f64>,
) -> Result<()> {
    overdamped(ens, force, params, dt, Some(kicks))
}

fn overdamped(
    ens: &mut Ensemble,
    force: &mut ForceField,
    params: &BathParams,
    dt: f64,
    kicks: Option<&mut Vec<f64>>,
) -> Result<()> {
    check_dt(dt)?;
    let f = force.resolve(ens)?;
    let drift = dt / params.b;
    let noise = (2.0 * params.diffusion() * dt).sqrt();
    let update = |r: &mut f64, rng: &mut ChaCha8Rng| -> f64 {
        let xi: f64 = rng.sample(StandardNormal);
        *r += f.at(*r) * drift + noise * xi;
        xi
    };
    match kicks {
        Some(out) => {
            out.resize(ens.len(), 0.0);
            ens.positions
                .par_iter_mut()
                .zip(ens.rngs.par_iter_mut())
                .zip(out.par_iter_mut())
                .for_each(|((r, rng), k)| *k = update(r, rng));
        }
        None => ens
            .positions
            .par_iter_mut()
            .zip(ens.rngs.par_iter_mut())
            .for_each(|(r, rng)| {
                update(r, rng);
            }),
    }
    ens.t += dt;
    force.advance(dt);
    Ok(())
}

/// One BAOAB step: half kick, half drift, exact Ornstein-Uhlenbeck velocity
/// update, half drift, half kick. The force coefficients are taken from the
/// ensemble once, before the first kick.
pub fn step_underdamped(
    ens: &mut Ensemble,
    force: &mut ForceField,
    params: &BathParams,
    dt: f64,
) -> Result<()> {
    check_dt(dt)?;
    let Some(velocities) = ens.velocities.as_mut() else {
        return Err(Error::Config(
            "underdamped step on an ensemble without velocities".into(),
        ));
    };
    // Borrow the velocities out so positions can be read by `resolve`.
    let mut velocities = std::mem::take(velocities);
    let f = match force.resolve(ens) {
        Ok(f) => f,
        Err(e) => {
            ens.velocities = Some(velocities);
            return Err(e);
        }
    };
    let m = params.m;
    let half = 0.5 * dt;
    let c = (-params.b * dt / m).exp();
    let spread = (-(-2.0 * params.b * dt / m).exp_m1() * params.thermal_energy() / m).sqrt();
    ens.positions
        .par_iter_mut()
        .zip(velocities.par_iter_mut())
        .zip(ens.rngs.par_iter_mut())
        .for_each(|((r, v), rng)| {
            *v += half * f.at(*r) / m;
            *r += half * *v;
            let xi: f64 = rng.sample(StandardNormal);
            *v = c * *v + spread * xi;
            *r += half * *v;
            *v += half * f.at(*r) / m;
        });
    ens.velocities = Some(velocities);
    ens.t += dt;
    force.advance(dt);
    Ok(())
}

/// `0.01` of the shortest time scale that applies: the velocity relaxation
/// time `m / b` (underdamped), the period scale `1 / omega0`, the
/// equilibrium correlation time `sigma_e^2 / D`, and for free quantum
/// ensembles the crossover time `lambda_T^2 / D`.
pub fn default_dt(params: &BathParams, dynamics: Dynamics, force: &ForceModel) -> Result<f64> {
    let mut scales = Vec::new();
    if dynamics == Dynamics::Underdamped {
        scales.push(params.m / params.b);
    }
    let omega0 = force.omega0();
    if omega0 > 0.0 {
        scales.push(1.0 / omega0);
    }
    let d = params.diffusion();
    match *force {
        ForceModel::EffectiveSpring { k_eff } => scales.push(params.b / k_eff),
        _ if omega0 > 0.0 && d > 0.0 => {
            let osc = OscillatorParams::new(*params, omega0);
            if let Ok(s2) = analytic::oscillator_sigma2_exact(&osc) {
                scales.push(s2 / d);
            }
        }
        ForceModel::MeanfieldQuantum { .. } if d > 0.0 && params.bohm_diffusivity() > 0.0 => {
            scales.push(params.bohm_diffusivity() / (d * d));
        }
        _ => {}
    }
    scales
        .into_iter()
        .reduce(f64::min)
        .map(|s| 0.01 * s)
        .ok_or_else(|| {
            Error::Config("no natural time scale for this model; set dt explicitly".into())
        })
}

fn one() -> usize {
    1
}

/// A complete ensemble run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default)]
    pub params: BathParams,
    pub n_traj: usize,
    /// Defaults to [`default_dt`]. Rounded so that `t_end` is a whole number
    /// of steps.
    #[serde(default)]
    pub dt: Option<f64>,
    pub t_end: f64,
    #[serde(default)]
    pub seed: u64,
    pub mode: Dynamics,
    pub force: ForceModel,
    /// Steps between records.
    #[serde(default = "one")]
    pub record_stride: usize,
    #[serde(default)]
    pub initial: InitialCondition,
    /// Number of trajectories whose positions are kept at every record.
    #[serde(default)]
    pub paths: usize,
    /// Paths are kept from this time on.
    #[serde(default)]
    pub path_start: f64,
}

impl SimConfig {
    pub fn new(
        params: BathParams,
        n_traj: usize,
        t_end: f64,
        mode: Dynamics,
        force: ForceModel,
    ) -> Self {
        Self {
            params,
            n_traj,
            dt: None,
            t_end,
            seed: 0,
            mode,
            force,
            record_stride: 1,
            initial: InitialCondition::default(),
            paths: 0,
            path_start: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let errors = self.params.check();
        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }
        self.force.validate()?;
        if self.n_traj == 0 {
            return Err(Error::Config("n_traj must be at least 1".into()));
        }
        if self.force.is_mean_field() && self.n_traj < 2 {
            return Err(Error::Config("mean-field mode requires N ≥ 2".into()));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::Config(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if let Some(dt) = self.dt {
            check_dt(dt)?;
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be at least 1".into()));
        }
        if self.paths > self.n_traj {
            return Err(Error::Config(format!(
                "cannot keep {} paths of {} trajectories",
                self.paths, self.n_traj
            )));
        }
        self.initial.validate()
    }

    /// Step size and step count actually used.
    pub fn schedule(&self) -> Result<(f64, u64)> {
        let dt = match self.dt {
            Some(dt) => dt,
            None => default_dt(&self.params, self.mode, &self.force)?,
        };
        let steps = (self.t_end / dt).round().max(1.0) as u64;
        Ok((self.t_end / steps as f64, steps))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub mean: f64,
    pub var: f64,
    pub var_stderr: f64,
}

/// Positions of the first few trajectories on a uniform time grid.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PathRecord {
    pub t0: f64,
    pub dt: f64,
    pub series: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub dt: f64,
    pub steps: u64,
    pub records: Vec<Record>,
    pub paths: PathRecord,
    pub checkpoint: Checkpoint,
}

/// Runs an ensemble from its initial condition and records the ensemble
/// mean and variance every `record_stride` steps, `t = 0` included.
pub fn simulate(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let ens = Ensemble::new(
        config.n_traj,
        config.seed,
        config.mode,
        &config.initial,
        &config.params,
    )?;
    run_from(config, ens)
}

/// Continues `ens` under `config` until `t_end` past its current time.
pub fn run_from(config: &SimConfig, mut ens: Ensemble) -> Result<SimOutput> {
    config.validate()?;
    if ens.dynamics() != config.mode {
        return Err(Error::Config(
            "ensemble and config disagree on the dynamics".into(),
        ));
    }
    let (dt, steps) = config.schedule()?;
    let params = &config.params;
    let mut force = ForceField::new(config.force, params, config.mode, &ens)?;
    let t_start = ens.t();
    let stride = config.record_stride as u64;
    let mut records = Vec::with_capacity((steps / stride + 1) as usize);
    let mut paths = PathRecord {
        t0: f64::NAN,
        dt: dt * stride as f64,
        series: vec![Vec::new(); config.paths],
    };

    let mut record = |ens: &Ensemble, k: u64, paths: &mut PathRecord| {
        let s = ens.stats();
        let t = t_start + k as f64 * dt;
        records.push(Record {
            t,
            mean: s.mean,
            var: s.var,
            var_stderr: s.var_stderr,
        });
        if config.paths > 0 && t >= config.path_start {
            if paths.t0.is_nan() {
                paths.t0 = t;
            }
            for (series, &r) in paths.series.iter_mut().zip(ens.positions()) {
                series.push(r);
            }
        }
    };

    record(&ens, 0, &mut paths);
    for k in 1..=steps {
        match config.mode {
            Dynamics::Overdamped => step_overdamped(&mut ens, &mut force, params, dt)?,
            Dynamics::Underdamped => step_underdamped(&mut ens, &mut force, params, dt)?,
        }
        if k % stride == 0 {
            record(&ens, k, &mut paths);
        }
    }
    if paths.t0.is_nan() {
        paths.t0 = t_start;
    }
    Ok(SimOutput {
        dt,
        steps,
        records,
        paths,
        checkpoint: ens.checkpoint(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bath() -> BathParams {
        BathParams::reduced(1.0)
    }

    #[test]
    fn quantum_force_examples() {
        let p = bath();
        assert_eq!(meanfield_quantum_force(0.7, 0.7, 1.0, &p).unwrap(), 0.0);
        assert_eq!(
            meanfield_quantum_force(3.0, 1.0, 1.0, &p.with_hbar(0.0)).unwrap(),
            0.0
        );
        assert_eq!(meanfield_quantum_force(2.0, 0.0, 1.0, &p).unwrap(), 0.5);
        assert!(matches!(
            meanfield_quantum_force(1.0, 0.0, 0.0, &p),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn noise_impulse_matches_spectral_density() {
        let p = BathParams {
            m: 2.0,
            b: 3.0,
            temperature: 0.5,
            hbar: 1.0,
            kb: 1.0,
        };
        let n = NoiseSpec::white(&p);
        assert_eq!(n.spectral_density, 3.0);
        assert_eq!(n.impulse_variance(0.1), 3.0 * 0.1);
        assert_eq!(
            NoiseSpec::white(&BathParams::reduced(0.0)).spectral_density,
            0.0
        );
    }

    #[test]
    fn meanfield_needs_two_trajectories() {
        let cfg = SimConfig::new(
            bath(),
            1,
            1.0,
            Dynamics::Overdamped,
            ForceModel::MeanfieldQuantum {
                omega0: 0.0,
                closure: Closure::Bohm,
            },
        );
        match simulate(&cfg) {
            Err(Error::Config(msg)) => assert_eq!(msg, "mean-field mode requires N ≥ 2"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn cold_free_particle_velocity_decays() {
        let p = BathParams::reduced(0.0);
        let init = InitialCondition {
            velocity_mean: 1.5,
            velocity_sigma2: Some(0.0),
            ..InitialCondition::default()
        };
        let mut ens = Ensemble::new(4, 1, Dynamics::Underdamped, &init, &p).unwrap();
        let mut f = ForceField::new(ForceModel::Free, &p, Dynamics::Underdamped, &ens).unwrap();
        let dt = 1e-3;
        for _ in 0..2000 {
            step_underdamped(&mut ens, &mut f, &p, dt).unwrap();
        }
        let expect = 1.5 * (-ens.t()).exp();
        for &v in ens.velocities().unwrap() {
            assert!((v - expect).abs() < 1e-6 * 1.5, "{v} vs {expect}");
        }
        // Position integrates the velocity: 1.5 (1 - e^{-t}).
        let x = 1.5 * (-(-ens.t()).exp_m1());
        assert!((ens.positions()[0] - x).abs() < 1e-6);
    }

    #[test]
    fn one_overdamped_step_has_einstein_variance() {
        let p = bath();
        let cfg = SimConfig {
            dt: Some(0.1),
            ..SimConfig::new(p, 40_000, 0.1, Dynamics::Overdamped, ForceModel::Free)
        };
        let out = simulate(&cfg).unwrap();
        let last = out.records.last().unwrap();
        assert!((last.var - 0.2).abs() < 3.0 * last.var_stderr);
    }

    #[test]
    fn checkpoint_resume_is_bitwise() {
        let p = bath();
        let mut cfg = SimConfig::new(
            p,
            64,
            1.0,
            Dynamics::Underdamped,
            ForceModel::External { omega0: 1.0 },
        );
        cfg.seed = 9;
        let whole = simulate(&cfg).unwrap();
        let half = SimConfig {
            t_end: 0.5,
            ..cfg.clone()
        };
        let first = simulate(&half).unwrap();
        let json = serde_json::to_string(&first.checkpoint).unwrap();
        let cp: Checkpoint = serde_json::from_str(&json).unwrap();
        let resumed = run_from(&half, Ensemble::from_checkpoint(&cp).unwrap()).unwrap();
        assert_eq!(resumed.checkpoint.positions, whole.checkpoint.positions);
        assert_eq!(resumed.checkpoint.velocities, whole.checkpoint.velocities);
    }

    #[test]
    fn default_dt_rule() {
        let p = bath();
        let dt = default_dt(
            &p,
            Dynamics::Underdamped,
            &ForceModel::External { omega0: 2.0 },
        );
        let s2 = analytic::oscillator_sigma2_exact(&OscillatorParams::new(p, 2.0)).unwrap();
        assert_eq!(dt.unwrap(), 0.01 * s2);
        let slow = default_dt(
            &p,
            Dynamics::Underdamped,
            &ForceModel::External { omega0: 0.1 },
        );
        assert_eq!(slow.unwrap(), 0.01);
        let free = default_dt(&p, Dynamics::Overdamped, &ForceModel::Free);
        assert!(free.is_err());
        let mf = default_dt(
            &p,
            Dynamics::Overdamped,
            &ForceModel::MeanfieldQuantum {
                omega0: 0.0,
                closure: Closure::Bohm,
            },
        )
        .unwrap();
        assert!((mf - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn free_energy_factor_limits() {
        let cold = OscillatorParams::reduced(0.0);
        assert_eq!(free_energy_factor(&cold).unwrap(), 1.0);
        let warm = OscillatorParams::reduced(1.0);
        let phi = free_energy_factor(&warm).unwrap();
        assert!(phi > 0.0 && phi < 1.0, "{phi}");
        assert!(free_energy_factor(&OscillatorParams::new(bath(), 0.0)).is_err());
    }
}
