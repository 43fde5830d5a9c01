//! Conservative finite-difference solver for the nonlinear quantum
//! Smoluchowski equation
//!
//! ```text
//! dP/dt = d/dx [ P d(U + Q)/dx / b + D dP/dx ],   Q = -hbar^2 (sqrt P)'' / (2 m sqrt P)
//! ```
//!
//! in three flavours: free thermal diffusion (`U = 0`), thermal diffusion in
//! an external potential, and zero-temperature quantum diffusion (`D = 0`).
//!
//! The equation is posed on the whole line. Here it is truncated to a finite
//! interval with reflecting (zero-flux) walls, and runs start from a Gaussian.
//! Both choices are engineering decisions: a boundary monitor aborts a run
//! whose density reaches the walls, and point sources are left to the
//! analytic front law.

mod solver;

pub use solver::{
    evolve, flux, quantum_potential, stable_dt, steady_state_residual, step, variance, PdeOutput,
    PdeSolver, SeriesRow, Snapshot, StepOutcome, DENSITY_FLOOR, MAX_HALVINGS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phys::BathParams;

/// Uniform grid of `n` points spanning `[x_min, x_max]` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Grid1D {
    pub const MIN_POINTS: usize = 16;

    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        let grid = Self { x_min, x_max, n };
        grid.validate()?;
        Ok(grid)
    }

    /// Symmetric grid `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_max > self.x_min) {
            return Err(Error::Config(format!(
                "grid needs finite x_max > x_min, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if self.n < Self::MIN_POINTS {
            return Err(Error::Config(format!(
                "grid needs at least {} points, got {}",
                Self::MIN_POINTS,
                self.n
            )));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let dx = self.dx();
        (0..self.n).map(move |i| self.x_min + i as f64 * dx)
    }

    /// Trapezoidal integral of `f(i)` over the grid.
    pub fn trapezoid(&self, f: impl Fn(usize) -> f64) -> f64 {
        let n = self.n;
        let inner: f64 = (1..n - 1).map(&f).sum();
        self.dx() * (inner + 0.5 * (f(0) + f(n - 1)))
    }
}

/// Probability density sampled on a grid, non-negative with unit
/// trapezoidal mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

impl DensityField {
    pub const MASS_TOLERANCE: f64 = 1e-10;

    /// Builds a density from samples, rescaling them to unit mass.
    pub fn from_values(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.n {
            return Err(Error::Config(format!(
                "density has {} samples for a {}-point grid",
                values.len(),
                grid.n
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(format!(
                "density sample {i} is {} (must be finite and non-negative)",
                values[i]
            )));
        }
        let mut field = Self { grid, values };
        let mass = field.mass();
        if mass <= 0.0 {
            return Err(Error::Config("density has zero mass".into()));
        }
        field.values.iter_mut().for_each(|v| *v /= mass);
        Ok(field)
    }

    pub fn gaussian(grid: Grid1D, center: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::Config(format!(
                "Gaussian variance must be positive, got {sigma2}"
            )));
        }
        let values = grid
            .points()
            .map(|x| (-(x - center).powi(2) / (2.0 * sigma2)).exp())
            .collect();
        Self::from_values(grid, values)
    }

    /// Trapezoidal mass; the quantity the flux-form update conserves.
    pub fn mass(&self) -> f64 {
        self.grid.trapezoid(|i| self.values[i])
    }

    pub fn mean(&self) -> f64 {
        self.grid.trapezoid(|i| self.grid.x(i) * self.values[i]) / self.mass()
    }

    pub fn variance(&self) -> f64 {
        variance(self)
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_non_negative(&self) -> bool {
        self.values.iter().all(|v| *v >= 0.0)
    }
}

/// External potential `U(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    None,
    Harmonic {
        omega0: f64,
        mass: f64,
    },
    /// Values at the points of the grid the potential is used with.
    Tabulated {
        values: Vec<f64>,
    },
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialSpec::None => Ok(()),
            PotentialSpec::Harmonic { omega0, mass } => {
                if omega0.is_finite() && *omega0 >= 0.0 && mass.is_finite() && *mass > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "harmonic potential needs omega0 >= 0 and mass > 0, got {omega0}, {mass}"
                    )))
                }
            }
            PotentialSpec::Tabulated { values } => {
                if values.iter().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::Config(
                        "tabulated potential has non-finite values".into(),
                    ))
                }
            }
        }
    }

    pub fn values_on(&self, grid: &Grid1D) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(match self {
            PotentialSpec::None => vec![0.0; grid.n],
            PotentialSpec::Harmonic { omega0, mass } => {
                let k = mass * omega0 * omega0;
                grid.points().map(|x| 0.5 * k * x * x).collect()
            }
            PotentialSpec::Tabulated { values } => {
                if values.len() != grid.n {
                    return Err(Error::Config(format!(
                        "tabulated potential has {} values for a {}-point grid",
                        values.len(),
                        grid.n
                    )));
                }
                values.clone()
            }
        })
    }
}

/// Which form of the Smoluchowski equation to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeModel {
    /// Thermal diffusion driven by the quantum potential, no external field.
    FreeThermal,
    /// Thermal diffusion in an external potential.
    ThermalPotential,
    /// Zero-temperature quantum diffusion in an external potential.
    ZeroTemperaturePotential,
}

impl PdeModel {
    pub fn uses_potential(self) -> bool {
        !matches!(self, PdeModel::FreeThermal)
    }

    pub fn is_thermal(self) -> bool {
        !matches!(self, PdeModel::ZeroTemperaturePotential)
    }
}

/// A complete PDE run description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdeRun {
    pub model: PdeModel,
    pub params: BathParams,
    pub potential: PotentialSpec,
    pub initial: DensityField,
    pub t_end: f64,
    pub output_times: Vec<f64>,
    #[serde(default = "PdeRun::default_cfl")]
    pub cfl: f64,
}

impl PdeRun {
    pub const DEFAULT_CFL: f64 = 0.8;

    fn default_cfl() -> f64 {
        Self::DEFAULT_CFL
    }

    pub fn new(
        model: PdeModel,
        params: BathParams,
        potential: PotentialSpec,
        initial: DensityField,
        t_end: f64,
        output_times: Vec<f64>,
    ) -> Self {
        Self {
            model,
            params,
            potential,
            initial,
            t_end,
            output_times,
            cfl: Self::DEFAULT_CFL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let errors = self.params.check();
        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }
        let zero_t = self.params.is_zero_temperature();
        if self.model.is_thermal() && zero_t {
            return Err(Error::Config(format!(
                "{:?} needs T > 0; use zero_temperature_potential at T = 0",
                self.model
            )));
        }
        if !self.model.is_thermal() && !zero_t {
            return Err(Error::Config(
                "zero_temperature_potential needs T = 0".into(),
            ));
        }
        self.initial.grid.validate()?;
        self.potential.values_on(&self.initial.grid)?;
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::Config(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!(
                "cfl must lie in (0, 1], got {}",
                self.cfl
            )));
        }
        let mut last = f64::NEG_INFINITY;
        for &t in &self.output_times {
            if !(t >= 0.0 && t <= self.t_end && t > last) {
                return Err(Error::Config(format!(
                    "output times must be ascending within [0, t_end], got {t}"
                )));
            }
            last = t;
        }
        let dx = self.initial.grid.dx();
        let s2 = self.initial.variance();
        if s2 < (4.0 * dx).powi(2) {
            return Err(Error::Config(format!(
                "initial variance {s2:e} is below (4 dx)^2 = {:e}; \
                 refine the grid or start wider",
                (4.0 * dx).powi(2)
            )));
        }
        Ok(())
    }
}
