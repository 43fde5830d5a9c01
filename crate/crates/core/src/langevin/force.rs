use serde::{Deserialize, Serialize};

use super::{Dynamics, Ensemble};
use crate::analytic;
use crate::error::{Error, Result};
use crate::phys::{BathParams, OscillatorParams};
use crate::reduce::{pairwise_map_sum, sample_stats};

/// How the quantum force is closed over the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// Gradient of the Bohm potential of the fitted Gaussian.
    #[default]
    Bohm,
    /// Gradient of the quantum free energy `kB T int_0^beta Q dbeta'`, which
    /// removes the entropic part of `Q`. Harmonic wells only.
    FreeEnergy,
}

/// Where the time-dependent spring reads the dispersion from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpringSource {
    #[default]
    Ensemble,
    /// A moment ODE integrated alongside the trajectories.
    Ode,
}

/// Deterministic force acting on each trajectory.
///
/// All external potentials are harmonic, `U = m omega0^2 x^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForceModel {
    Free,
    External {
        omega0: f64,
    },
    /// `-grad U - grad Q` with `Q` the quantum potential of a Gaussian with
    /// the ensemble's mean and variance.
    MeanfieldQuantum {
        #[serde(default)]
        omega0: f64,
        #[serde(default)]
        closure: Closure,
    },
    /// Constant spring `k_eff = kB T / sigma_e^2`.
    EffectiveSpring {
        k_eff: f64,
    },
    /// Spring `m omega0^2 - phi hbar^2 / (4 m sigma^4(t))`, where `phi` makes
    /// the spring equal `k_eff` once `sigma^2` reaches the exact equilibrium
    /// dispersion.
    TimeDependentSpring {
        omega0: f64,
        #[serde(default)]
        source: SpringSource,
    },
}

impl ForceModel {
    /// Effective spring of the oscillator `p`, from the quantum free energy.
    pub fn effective_spring(p: &OscillatorParams) -> Result<Self> {
        Ok(ForceModel::EffectiveSpring {
            k_eff: analytic::effective_spring(p)?,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ForceModel::Free => "free",
            ForceModel::External { .. } => "external",
            ForceModel::MeanfieldQuantum { .. } => "meanfield_quantum",
            ForceModel::EffectiveSpring { .. } => "effective_spring",
            ForceModel::TimeDependentSpring { .. } => "time_dependent_spring",
        }
    }

    /// Whether every step needs the ensemble variance.
    pub fn is_mean_field(&self) -> bool {
        matches!(
            self,
            ForceModel::MeanfieldQuantum { .. }
                | ForceModel::TimeDependentSpring {
                    source: SpringSource::Ensemble,
                    ..
                }
        )
    }

    pub fn omega0(&self) -> f64 {
        match *self {
            ForceModel::External { omega0 }
            | ForceModel::MeanfieldQuantum { omega0, .. }
            | ForceModel::TimeDependentSpring { omega0, .. } => omega0,
            ForceModel::Free | ForceModel::EffectiveSpring { .. } => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let omega0 = self.omega0();
        if !(omega0.is_finite() && omega0 >= 0.0) {
            return Err(Error::Config(format!(
                "omega0 must be finite and non-negative, got {omega0}"
            )));
        }
        if let ForceModel::EffectiveSpring { k_eff } = *self {
            if !(k_eff.is_finite() && k_eff > 0.0) {
                return Err(Error::Config(format!(
                    "k_eff must be positive, got {k_eff}"
                )));
            }
        }
        if let ForceModel::TimeDependentSpring { omega0, .. } = *self {
            if omega0 <= 0.0 {
                return Err(Error::Config(
                    "time_dependent_spring needs omega0 > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// `+hbar^2 / (4 m sigma^4) (R - mu)`: minus the gradient of the quantum
/// potential of a Gaussian with mean `mu` and variance `sigma2`.
pub fn meanfield_quantum_force(r: f64, mu: f64, sigma2: f64, params: &BathParams) -> Result<f64> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!(
            "ensemble variance must be positive, got {sigma2}"
        )));
    }
    Ok(quantum_coefficient(params, sigma2) * (r - mu))
}

fn quantum_coefficient(params: &BathParams, sigma2: f64) -> f64 {
    params.hbar * params.hbar / (4.0 * params.m * sigma2 * sigma2)
}

/// Ratio of the free-energy force to the Bohm force at the exact
/// equilibrium dispersion, `(m omega0^2 - k_eff) 4 m sigma_e^4 / hbar^2`.
/// Tends to one as `T -> 0`.
pub fn free_energy_factor(p: &OscillatorParams) -> Result<f64> {
    if p.omega0 <= 0.0 {
        return Err(Error::Config(
            "the free-energy closure needs a harmonic well (omega0 > 0)".into(),
        ));
    }
    let bath = &p.bath;
    if bath.hbar == 0.0 || bath.is_zero_temperature() {
        return Ok(1.0);
    }
    let softening = analytic::spring_softening(p)?.value;
    let s2 = analytic::oscillator_sigma2_exact(p)?;
    Ok(softening / quantum_coefficient(bath, s2))
}

/// Force `offset - slope * R`, frozen for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineForce {
    pub slope: f64,
    pub offset: f64,
}

impl AffineForce {
    pub fn at(&self, r: f64) -> f64 {
        self.offset - self.slope * r
    }
}

/// Centred second moments of a linear Langevin equation with the spring
/// `stiffness - quantum / sigma^4`.
#[derive(Debug, Clone, Copy)]
enum SpringOde {
    Overdamped { xx: f64 },
    Underdamped { xx: f64, xv: f64, vv: f64 },
}

const ODE_SUBSTEPS: usize = 4;

/// A [`ForceModel`] bound to bath parameters, with any state it carries.
#[derive(Debug, Clone)]
pub struct ForceField {
    model: ForceModel,
    params: BathParams,
    stiffness: f64,
    /// `phi hbar^2 / (4 m)`; the quantum spring is this over `sigma^4`.
    quantum: f64,
    ode: Option<SpringOde>,
}

impl ForceField {
    pub fn new(
        model: ForceModel,
        params: &BathParams,
        dynamics: Dynamics,
        ens: &Ensemble,
    ) -> Result<Self> {
        model.validate()?;
        let errors = params.check();
        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }
        let osc = OscillatorParams::new(*params, model.omega0());
        let hbar2 = params.hbar * params.hbar / (4.0 * params.m);
        let quantum = match model {
            ForceModel::MeanfieldQuantum {
                closure: Closure::FreeEnergy,
                ..
            }
            | ForceModel::TimeDependentSpring { .. } => free_energy_factor(&osc)? * hbar2,
            ForceModel::MeanfieldQuantum { .. } => hbar2,
            _ => 0.0,
        };
        let ode = match model {
            ForceModel::TimeDependentSpring {
                source: SpringSource::Ode,
                ..
            } => {
                let xx = sample_stats(ens.positions()).var;
                if !(xx > 0.0) {
                    return Err(Error::Config(
                        "the spring ODE needs an initial ensemble with positive variance".into(),
                    ));
                }
                Some(match (dynamics, ens.velocities()) {
                    (Dynamics::Underdamped, Some(v)) => {
                        let (xv, vv) = centred_cross(ens.positions(), v);
                        SpringOde::Underdamped { xx, xv, vv }
                    }
                    _ => SpringOde::Overdamped { xx },
                })
            }
            _ => None,
        };
        Ok(Self {
            model,
            params: *params,
            stiffness: osc.stiffness(),
            quantum,
            ode,
        })
    }

    pub fn model(&self) -> &ForceModel {
        &self.model
    }

    /// Dispersion held by the co-integrated spring ODE, if any.
    pub fn ode_sigma2(&self) -> Option<f64> {
        self.ode.map(|s| match s {
            SpringOde::Overdamped { xx } | SpringOde::Underdamped { xx, .. } => xx,
        })
    }

    fn spring(&self, sigma2: f64) -> f64 {
        self.stiffness - self.quantum / (sigma2 * sigma2)
    }

    /// Force coefficients for the next step of `ens`.
    pub fn resolve(&self, ens: &Ensemble) -> Result<AffineForce> {
        Ok(match self.model {
            ForceModel::Free => AffineForce {
                slope: 0.0,
                offset: 0.0,
            },
            ForceModel::External { .. } => AffineForce {
                slope: self.stiffness,
                offset: 0.0,
            },
            ForceModel::EffectiveSpring { k_eff } => AffineForce {
                slope: k_eff,
                offset: 0.0,
            },
            ForceModel::MeanfieldQuantum { .. } => {
                let s = sample_stats(ens.positions());
                let c = self.quantum_at(s.var, ens.t())?;
                AffineForce {
                    slope: self.stiffness - c,
                    offset: -c * s.mean,
                }
            }
            ForceModel::TimeDependentSpring { .. } => {
                let sigma2 = match self.ode_sigma2() {
                    Some(s2) => s2,
                    None => sample_stats(ens.positions()).var,
                };
                self.quantum_at(sigma2, ens.t())?;
                AffineForce {
                    slope: self.spring(sigma2),
                    offset: 0.0,
                }
            }
        })
    }

    fn quantum_at(&self, sigma2: f64, t: f64) -> Result<f64> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Numeric(format!(
                "ensemble variance is {sigma2:e} at t = {t:e}; the quantum force needs it positive"
            )));
        }
        Ok(self.quantum / (sigma2 * sigma2))
    }

    /// Moves the spring ODE forward by `dt`.
    pub(super) fn advance(&mut self, dt: f64) {
        let Some(state) = self.ode else { return };
        let h = dt / ODE_SUBSTEPS as f64;
        let mut y = match state {
            SpringOde::Overdamped { xx } => [xx, 0.0, 0.0],
            SpringOde::Underdamped { xx, xv, vv } => [xx, xv, vv],
        };
        let under = matches!(state, SpringOde::Underdamped { .. });
        for _ in 0..ODE_SUBSTEPS {
            y = self.rk4(y, h, under);
        }
        self.ode = Some(if under {
            SpringOde::Underdamped {
                xx: y[0],
                xv: y[1],
                vv: y[2],
            }
        } else {
            SpringOde::Overdamped { xx: y[0] }
        });
    }

    fn moment_rhs(&self, y: [f64; 3], under: bool) -> [f64; 3] {
        let p = &self.params;
        let kt = p.thermal_energy();
        let k = self.spring(y[0]);
        if under {
            let (g, w) = (p.b / p.m, k / p.m);
            [
                2.0 * y[1],
                y[2] - w * y[0] - g * y[1],
                -2.0 * w * y[1] - 2.0 * g * y[2] + 2.0 * p.b * kt / (p.m * p.m),
            ]
        } else {
            [2.0 * kt / p.b - 2.0 * k * y[0] / p.b, 0.0, 0.0]
        }
    }

    fn rk4(&self, y: [f64; 3], h: f64, under: bool) -> [f64; 3] {
        let add =
            |a: [f64; 3], k: [f64; 3], s: f64| [a[0] + s * k[0], a[1] + s * k[1], a[2] + s * k[2]];
        let k1 = self.moment_rhs(y, under);
        let k2 = self.moment_rhs(add(y, k1, 0.5 * h), under);
        let k3 = self.moment_rhs(add(y, k2, 0.5 * h), under);
        let k4 = self.moment_rhs(add(y, k3, h), under);
        let mut out = y;
        for i in 0..3 {
            out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }
}

/// Centred covariance of positions with velocities, and velocity variance.
fn centred_cross(x: &[f64], v: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let sx = sample_stats(x);
    let sv = sample_stats(v);
    let prod: Vec<f64> = x
        .iter()
        .zip(v)
        .map(|(a, b)| (a - sx.mean) * (b - sv.mean))
        .collect();
    (pairwise_map_sum(&prod, |p| p) / (n - 1.0), sv.var)
}
