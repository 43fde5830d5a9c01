use serde::Serialize;

use super::{DensityField, Grid1D, PdeModel, PdeRun, PotentialSpec};
use crate::error::{Error, Result};
use crate::phys::BathParams;

/// `sqrt(P)` is evaluated with `P` clamped below at this fraction of its
/// maximum. The clamp only enters the quantum potential, never the stored
/// density.
pub const DENSITY_FLOOR: f64 = 1e-12;
/// A step that produces a negative density is retried at half the step size
/// at most this many times.
pub const MAX_HALVINGS: u32 = 20;

/// Neighbour ratio above which the drift flux is upwinded.
const UPWIND_RATIO: f64 = 4.0;
const MONITOR_CELLS: usize = 3;
const MONITOR_TOLERANCE: f64 = 1e-8;
const RESIDUAL_SUPPORT: f64 = 1e-8;
/// Steps between refreshes of the variance used in the step-size rule.
const VARIANCE_REFRESH: u64 = 16;

fn quantum_potential_into(
    values: &[f64],
    dx: f64,
    params: &BathParams,
    root: &mut [f64],
    q: &mut [f64],
) {
    let n = values.len();
    if params.hbar == 0.0 {
        q.fill(0.0);
        return;
    }
    let peak = values.iter().copied().fold(0.0, f64::max);
    let floor = DENSITY_FLOOR * peak;
    for (r, &v) in root.iter_mut().zip(values) {
        *r = v.max(floor).sqrt();
    }
    let c = -params.hbar * params.hbar / (2.0 * params.m * dx * dx);
    for i in 1..n - 1 {
        q[i] = c * (root[i + 1] - 2.0 * root[i] + root[i - 1]) / root[i];
    }
    // Second-order one-sided second differences at the two end points.
    q[0] = c * (2.0 * root[0] - 5.0 * root[1] + 4.0 * root[2] - root[3]) / root[0];
    q[n - 1] =
        c * (2.0 * root[n - 1] - 5.0 * root[n - 2] + 4.0 * root[n - 3] - root[n - 4]) / root[n - 1];
}

/// Bohm quantum potential of a sampled density.
pub fn quantum_potential(p: &DensityField, params: &BathParams) -> Vec<f64> {
    let n = p.grid.n;
    let mut root = vec![0.0; n];
    let mut q = vec![0.0; n];
    quantum_potential_into(&p.values, p.grid.dx(), params, &mut root, &mut q);
    q
}

fn effective_diffusion(params: &BathParams, model: PdeModel) -> f64 {
    match model {
        PdeModel::ZeroTemperaturePotential => 0.0,
        _ => params.diffusion(),
    }
}

/// Face fluxes `F[i]` between points `i - 1` and `i`; `F[0]` and `F[n]` are
/// the reflecting walls.
#[allow(clippy::too_many_arguments)]
fn flux_into(
    values: &[f64],
    u: &[f64],
    q: &[f64],
    dx: f64,
    b: f64,
    diffusion: f64,
    out: &mut [f64],
) {
    let n = values.len();
    let drift = 1.0 / (b * dx);
    let fick = diffusion / dx;
    out[0] = 0.0;
    out[n] = 0.0;
    for i in 0..n - 1 {
        let (left, right) = (values[i], values[i + 1]);
        let force = (u[i + 1] - u[i]) + (q[i + 1] - q[i]);
        // Central faces are second order; where neighbours differ sharply the
        // face takes the upwind value so a nearly empty cell cannot be
        // drained by a full neighbour.
        let p_face = if left.max(right) <= UPWIND_RATIO * left.min(right) {
            0.5 * (left + right)
        } else if force < 0.0 {
            left
        } else {
            right
        };
        out[i + 1] = -(p_face * force * drift + fick * (right - left));
    }
}

/// Probability flux at the `n + 1` cell faces, walls included.
pub fn flux(
    p: &DensityField,
    potential: &PotentialSpec,
    params: &BathParams,
    model: PdeModel,
) -> Result<Vec<f64>> {
    let n = p.grid.n;
    let u = if model.uses_potential() {
        potential.values_on(&p.grid)?
    } else {
        vec![0.0; n]
    };
    let q = quantum_potential(p, params);
    let mut out = vec![0.0; n + 1];
    flux_into(
        &p.values,
        &u,
        &q,
        p.grid.dx(),
        params.b,
        effective_diffusion(params, model),
        &mut out,
    );
    Ok(out)
}

/// Explicit Euler update of the cell averages; end cells are half cells.
fn apply_flux(values: &[f64], flux: &[f64], dx: f64, dt: f64, out: &mut [f64]) {
    let n = values.len();
    let inner = dt / dx;
    let edge = 2.0 * dt / dx;
    out[0] = values[0] - edge * (flux[1] - flux[0]);
    for i in 1..n - 1 {
        out[i] = values[i] - inner * (flux[i + 1] - flux[i]);
    }
    out[n - 1] = values[n - 1] - edge * (flux[n] - flux[n - 1]);
}

/// Largest stable explicit step, scaled by `cfl`.
///
/// The diffusive part limits `dt` by `dx^2 / (2 D_eff)` and the quantum
/// potential, which acts like a fourth-order operator with coefficient
/// `hbar^2 / (4 m b)`, by `m b dx^4 / (2 hbar^2)`. The two rates are added,
/// so `cfl <= 1` is stable for a locally uniform density.
pub fn stable_dt(
    grid: &Grid1D,
    params: &BathParams,
    model: PdeModel,
    sigma2: f64,
    cfl: f64,
) -> f64 {
    let dx = grid.dx();
    let dx2 = dx * dx;
    let bohm = params.bohm_diffusivity();
    let d_eff = effective_diffusion(params, model) + bohm / sigma2;
    let rate = 2.0 * d_eff / dx2 + 8.0 * bohm / (dx2 * dx2);
    cfl / rate
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub density: DensityField,
    /// Step actually taken after any halvings.
    pub dt: f64,
    pub halvings: u32,
}

/// Advances `p` by `dt`, halving the step while the update would make the
/// density negative.
pub fn step(
    p: &DensityField,
    potential: &PotentialSpec,
    params: &BathParams,
    model: PdeModel,
    dt: f64,
) -> Result<StepOutcome> {
    let mut solver = Stepper::new(p, potential, params, model)?;
    let (dt, halvings) = solver.try_step(dt, 0.0)?;
    solver.commit();
    Ok(StepOutcome {
        density: DensityField {
            grid: p.grid.clone(),
            values: solver.values,
        },
        dt,
        halvings,
    })
}

/// Trapezoidal second central moment.
pub fn variance(p: &DensityField) -> f64 {
    let g = &p.grid;
    let mass = p.mass();
    let mean = g.trapezoid(|i| g.x(i) * p.values[i]) / mass;
    g.trapezoid(|i| {
        let d = g.x(i) - mean;
        d * d * p.values[i]
    }) / mass
}

/// Spatial standard deviation of `(U + Q + kB T ln P) / (kB T)` over the
/// points where `P` exceeds `1e-8` of its peak. Zero at equilibrium.
pub fn steady_state_residual(
    p: &DensityField,
    potential: &PotentialSpec,
    params: &BathParams,
) -> Result<f64> {
    if params.is_zero_temperature() {
        return Err(Error::Domain("the equilibrium residual needs T > 0".into()));
    }
    let u = potential.values_on(&p.grid)?;
    let q = quantum_potential(p, params);
    Ok(residual_from(&p.values, &u, &q, params.thermal_energy()))
}

fn residual_from(values: &[f64], u: &[f64], q: &[f64], kt: f64) -> f64 {
    let peak = values.iter().copied().fold(0.0, f64::max);
    let cut = RESIDUAL_SUPPORT * peak;
    let chem: Vec<f64> = values
        .iter()
        .zip(u.iter().zip(q))
        .filter(|(p, _)| **p > cut)
        .map(|(p, (u, q))| (u + q) / kt + p.ln())
        .collect();
    let n = chem.len() as f64;
    let mean = chem.iter().sum::<f64>() / n;
    (chem.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Working state of one PDE integration.
pub(crate) struct Stepper {
    model: PdeModel,
    params: BathParams,
    grid: Grid1D,
    u: Vec<f64>,
    values: Vec<f64>,
    next: Vec<f64>,
    root: Vec<f64>,
    q: Vec<f64>,
    flux: Vec<f64>,
}

impl Stepper {
    fn new(
        p: &DensityField,
        potential: &PotentialSpec,
        params: &BathParams,
        model: PdeModel,
    ) -> Result<Self> {
        let n = p.grid.n;
        let u = if model.uses_potential() {
            potential.values_on(&p.grid)?
        } else {
            vec![0.0; n]
        };
        Ok(Self {
            model,
            params: *params,
            grid: p.grid.clone(),
            u,
            values: p.values.clone(),
            next: vec![0.0; n],
            root: vec![0.0; n],
            q: vec![0.0; n],
            flux: vec![0.0; n + 1],
        })
    }

    /// Computes a trial update into `next`, halving on negativity. Returns
    /// the step taken and the number of halvings.
    fn try_step(&mut self, dt: f64, t: f64) -> Result<(f64, u32)> {
        let dx = self.grid.dx();
        quantum_potential_into(&self.values, dx, &self.params, &mut self.root, &mut self.q);
        flux_into(
            &self.values,
            &self.u,
            &self.q,
            dx,
            self.params.b,
            effective_diffusion(&self.params, self.model),
            &mut self.flux,
        );
        let mut dt = dt;
        for halvings in 0..=MAX_HALVINGS {
            apply_flux(&self.values, &self.flux, dx, dt, &mut self.next);
            let (index, min_value) =
                self.next
                    .iter()
                    .copied()
                    .enumerate()
                    .fold(
                        (0, f64::INFINITY),
                        |acc, (i, v)| if v < acc.1 { (i, v) } else { acc },
                    );
            if min_value >= 0.0 {
                return Ok((dt, halvings));
            }
            if halvings == MAX_HALVINGS {
                return Err(Error::Negativity {
                    t,
                    halvings,
                    min_value,
                    index,
                });
            }
            dt *= 0.5;
        }
        unreachable!()
    }

    fn commit(&mut self) {
        std::mem::swap(&mut self.values, &mut self.next);
    }

    fn density(&self) -> DensityField {
        DensityField {
            grid: self.grid.clone(),
            values: self.values.clone(),
        }
    }

    fn edge_ratio(&self) -> f64 {
        let n = self.values.len();
        let peak = self.values.iter().copied().fold(0.0, f64::max);
        let edge = self.values[..MONITOR_CELLS]
            .iter()
            .chain(&self.values[n - MONITOR_CELLS..])
            .copied()
            .fold(0.0, f64::max);
        edge / peak
    }
}

/// Incremental driver over a [`Stepper`], used by [`evolve`] and the C API.
pub struct PdeSolver {
    stepper: Stepper,
    t: f64,
    cfl: f64,
    sigma2: f64,
    steps: u64,
    halvings: u64,
}

impl PdeSolver {
    pub fn new(
        model: PdeModel,
        params: &BathParams,
        potential: &PotentialSpec,
        initial: &DensityField,
        cfl: f64,
    ) -> Result<Self> {
        let stepper = Stepper::new(initial, potential, params, model)?;
        let solver = Self {
            stepper,
            t: 0.0,
            cfl,
            sigma2: variance(initial),
            steps: 0,
            halvings: 0,
        };
        solver.check_edges()?;
        Ok(solver)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn halvings(&self) -> u64 {
        self.halvings
    }

    pub fn density(&self) -> DensityField {
        self.stepper.density()
    }

    pub fn values(&self) -> &[f64] {
        &self.stepper.values
    }

    pub fn grid(&self) -> &Grid1D {
        &self.stepper.grid
    }

    pub fn variance(&self) -> f64 {
        let s = &self.stepper;
        variance(&DensityField {
            grid: s.grid.clone(),
            values: s.values.clone(),
        })
    }

    fn check_edges(&self) -> Result<()> {
        let ratio = self.stepper.edge_ratio();
        if ratio > MONITOR_TOLERANCE {
            return Err(Error::BoundaryLeak { t: self.t, ratio });
        }
        Ok(())
    }

    /// Residual of the current state against thermal equilibrium, `None`
    /// at `T = 0`.
    pub fn residual(&mut self) -> Option<f64> {
        let s = &mut self.stepper;
        if s.params.is_zero_temperature() {
            return None;
        }
        quantum_potential_into(&s.values, s.grid.dx(), &s.params, &mut s.root, &mut s.q);
        Some(residual_from(
            &s.values,
            &s.u,
            &s.q,
            s.params.thermal_energy(),
        ))
    }

    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        while self.t < t_target {
            if self.steps.is_multiple_of(VARIANCE_REFRESH) {
                self.sigma2 = self.variance();
            }
            let s = &self.stepper;
            let stable = stable_dt(&s.grid, &s.params, s.model, self.sigma2, self.cfl);
            let remaining = t_target - self.t;
            let (dt, lands) = if stable >= remaining {
                (remaining, true)
            } else {
                (stable, false)
            };
            let (taken, halvings) = self.stepper.try_step(dt, self.t)?;
            self.stepper.commit();
            self.halvings += u64::from(halvings);
            self.steps += 1;
            self.t = if lands && halvings == 0 {
                t_target
            } else {
                self.t + taken
            };
            self.check_edges()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub density: DensityField,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeriesRow {
    pub t: f64,
    pub sigma2: f64,
    pub mass: f64,
    /// Equilibrium residual; absent at zero temperature.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PdeOutput {
    pub snapshots: Vec<Snapshot>,
    pub series: Vec<SeriesRow>,
    pub steps: u64,
    pub halvings: u64,
}

/// Runs a PDE integration, recording a snapshot and a series row at every
/// output time.
pub fn evolve(run: &PdeRun) -> Result<PdeOutput> {
    run.validate()?;
    let mut solver = PdeSolver::new(
        run.model,
        &run.params,
        &run.potential,
        &run.initial,
        run.cfl,
    )?;
    let mut snapshots = Vec::with_capacity(run.output_times.len());
    let mut series = Vec::with_capacity(run.output_times.len());
    let mut record = |solver: &mut PdeSolver| {
        let density = solver.density();
        series.push(SeriesRow {
            t: solver.time(),
            sigma2: variance(&density),
            mass: density.mass(),
            residual: solver.residual(),
        });
        snapshots.push(Snapshot {
            t: solver.time(),
            density,
        });
    };
    for &t in &run.output_times {
        solver.advance_to(t)?;
        record(&mut solver);
    }
    solver.advance_to(run.t_end)?;
    Ok(PdeOutput {
        snapshots,
        series,
        steps: solver.steps(),
        halvings: solver.halvings(),
    })
}
