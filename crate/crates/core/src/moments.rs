//! Gaussian moment dynamics.
//!
//! A Gaussian packet stays Gaussian under the quantum Smoluchowski equation
//! with at most a harmonic potential, and its dispersion obeys
//!
//! ```text
//! d sigma2/dt = 2 D + 2 D lambda_T^2 / sigma2 - 2 m omega0^2 sigma2 / b
//! ```
//!
//! The zero-temperature oscillator is the limit `D -> 0` with
//! `D lambda_T^2 = hbar^2 / (4 m b)` and `2 D beta m omega0^2 = 2 m omega0^2 / b`
//! held fixed, which leaves `hbar^2 / (2 m b sigma2) - 2 m omega0^2 sigma2 / b`.

use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::error::{Error, Result};
use crate::phys::{BathParams, OscillatorParams};

/// Relative local error per unit time accepted by [`integrate`].
pub const TOLERANCE: f64 = 1e-10;
/// Fraction of the model's characteristic time covered analytically when a
/// trajectory starts from a point source.
pub const BOOTSTRAP_FRACTION: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    pub t: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    FreeThermal,
    OscillatorThermal,
    OscillatorZeroT,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentModel {
    kind: MomentKind,
    params: OscillatorParams,
}

impl MomentModel {
    pub fn new(kind: MomentKind, params: OscillatorParams) -> Result<Self> {
        let errors = params.check();
        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }
        let zero_t = params.bath.is_zero_temperature();
        match kind {
            MomentKind::FreeThermal => {}
            MomentKind::OscillatorThermal => {
                if params.omega0 <= 0.0 {
                    return Err(Error::Config("oscillator models need omega0 > 0".into()));
                }
                if zero_t {
                    return Err(Error::Config(
                        "oscillator_thermal needs T > 0; use oscillator_zero_t at T = 0".into(),
                    ));
                }
            }
            MomentKind::OscillatorZeroT => {
                if params.omega0 <= 0.0 {
                    return Err(Error::Config("oscillator models need omega0 > 0".into()));
                }
                if !zero_t {
                    return Err(Error::Config("oscillator_zero_t needs T = 0".into()));
                }
            }
        }
        Ok(Self { kind, params })
    }

    pub fn free(bath: BathParams) -> Result<Self> {
        Self::new(MomentKind::FreeThermal, OscillatorParams::new(bath, 0.0))
    }

    pub fn kind(&self) -> MomentKind {
        self.kind
    }

    pub fn params(&self) -> &OscillatorParams {
        &self.params
    }

    fn diffusion(&self) -> f64 {
        self.params.bath.diffusion()
    }

    fn bohm(&self) -> f64 {
        self.params.bath.bohm_diffusivity()
    }

    /// Time scale used to size the analytic start-up step.
    fn characteristic_time(&self) -> Option<f64> {
        let d = self.diffusion();
        match self.kind {
            MomentKind::FreeThermal if d > 0.0 && self.bohm() > 0.0 => Some(self.bohm() / (d * d)),
            MomentKind::FreeThermal => None,
            _ => Some(self.params.relaxation_time()),
        }
    }

    /// Short-time dispersion of a point source.
    fn short_time(&self, t: f64) -> f64 {
        let bath = &self.params.bath;
        if bath.hbar == 0.0 {
            analytic::einstein_msd(t, self.diffusion())
        } else {
            analytic::zero_t_free_sigma2(t, bath.hbar, bath.m, bath.b)
        }
    }

    fn eval(&self, sigma2: f64) -> f64 {
        let drift = 2.0 * self.bohm() / sigma2;
        match self.kind {
            MomentKind::FreeThermal => 2.0 * self.diffusion() + drift,
            MomentKind::OscillatorThermal => {
                let d = self.diffusion();
                let bath = &self.params.bath;
                let beta = 1.0 / bath.thermal_energy();
                let l2 = bath.hbar * bath.hbar * beta / (4.0 * bath.m);
                2.0 * d * (1.0 + l2 / sigma2 - beta * self.params.stiffness() * sigma2)
            }
            MomentKind::OscillatorZeroT => {
                drift - 2.0 * self.params.stiffness() * sigma2 / self.params.bath.b
            }
        }
    }
}

/// Time derivative of the dispersion.
pub fn rhs(model: &MomentModel, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!(
            "dispersion must be positive, got {sigma2}"
        )));
    }
    Ok(model.eval(sigma2))
}

/// Equilibrium dispersion of an oscillator model.
pub fn fixed_point(model: &MomentModel) -> Result<f64> {
    match model.kind {
        MomentKind::FreeThermal => Err(Error::Domain("free spreading has no fixed point".into())),
        MomentKind::OscillatorThermal => analytic::oscillator_sigma2_dg(&model.params),
        MomentKind::OscillatorZeroT => Ok(model.params.ground_state_sigma2()),
    }
}

fn rk4(model: &MomentModel, y: f64, h: f64) -> f64 {
    let k1 = model.eval(y);
    let k2 = model.eval(y + 0.5 * h * k1);
    let k3 = model.eval(y + 0.5 * h * k2);
    let k4 = model.eval(y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Integrates the dispersion from `sigma2_0` at `t = 0` and reports it at
/// each time in `t_grid`.
///
/// Classic RK4 with step doubling. A start from `sigma2_0 = 0`, where the
/// quantum term diverges, is bootstrapped with the short-time law
/// `hbar sqrt(t / (m b))` over `1e-10` of the model's characteristic time.
pub fn integrate(model: &MomentModel, sigma2_0: f64, t_grid: &[f64]) -> Result<Vec<MomentState>> {
    if !(sigma2_0 >= 0.0 && sigma2_0.is_finite()) {
        return Err(Error::Domain(format!(
            "initial dispersion must be non-negative, got {sigma2_0}"
        )));
    }
    let mut last = f64::NEG_INFINITY;
    for &t in t_grid {
        if !(t >= 0.0 && t > last && t.is_finite()) {
            return Err(Error::Config(format!(
                "time grid must be ascending and non-negative, got {t}"
            )));
        }
        last = t;
    }

    let mut out = Vec::with_capacity(t_grid.len());
    let mut t = 0.0;
    let mut y = sigma2_0;
    let mut targets = t_grid.iter().copied().peekable();

    if sigma2_0 == 0.0 {
        if model.bohm() == 0.0 && model.diffusion() == 0.0 {
            return Err(Error::Domain(
                "a point source with hbar = 0 and T = 0 never spreads".into(),
            ));
        }
        let t1 = match model.characteristic_time() {
            Some(tc) => BOOTSTRAP_FRACTION * tc,
            // Free spreading at T = 0 or hbar = 0 is scale free; the
            // short-time law is exact there.
            None => t_grid.last().copied().unwrap_or(0.0),
        };
        while let Some(&tt) = targets.peek() {
            if tt > t1 {
                break;
            }
            out.push(MomentState {
                t: tt,
                sigma2: model.short_time(tt),
            });
            targets.next();
        }
        t = t1;
        y = model.short_time(t1);
    }

    let mut h = match model.characteristic_time() {
        Some(tc) => 1e-3 * tc.min(t.max(tc * BOOTSTRAP_FRACTION)),
        None => 1e-3 * t_grid.last().copied().unwrap_or(1.0).max(1e-12),
    };

    for target in targets {
        while t < target {
            let remaining = target - t;
            if remaining <= 1e-12 * t {
                // Rounding gap between a grid time and the bootstrap time.
                y += model.eval(y) * remaining;
                t = target;
                break;
            }
            let mut step = h.min(remaining);
            loop {
                if step < 1e-15 * t.max(1e-300) || step < f64::MIN_POSITIVE {
                    return Err(Error::StepUnderflow { t, sigma2: y });
                }
                let full = rk4(model, y, step);
                let half = rk4(model, y, 0.5 * step);
                let two = rk4(model, half, 0.5 * step);
                let err = (two - full).abs() / 15.0;
                let allowed = (TOLERANCE * step * two.abs())
                    .max(16.0 * f64::EPSILON * two.abs())
                    .max(f64::MIN_POSITIVE);
                if two > 0.0 && two.is_finite() && err <= allowed {
                    y = two + (two - full) / 15.0;
                    t = if step == remaining { target } else { t + step };
                    let grow = if err == 0.0 {
                        4.0
                    } else {
                        (0.9 * (allowed / err).powf(0.2)).min(4.0)
                    };
                    h = step * grow;
                    break;
                }
                let shrink = if err.is_finite() && err > 0.0 {
                    (0.9 * (allowed / err).powf(0.2)).clamp(0.1, 0.5)
                } else {
                    0.1
                };
                step *= shrink;
            }
        }
        out.push(MomentState {
            t: target,
            sigma2: y,
        });
    }
    Ok(out)
}

/// Momentum dispersion times position dispersion, `m kB T sigma2 + hbar^2 / 4`.
pub fn heisenberg_product(sigma2: f64, params: &BathParams) -> f64 {
    params.m * params.thermal_energy() * sigma2 + 0.25 * params.hbar * params.hbar
}

/// Dispersion-dependent quantum diffusion coefficient `hbar^2 / (4 m b sigma2)`.
pub fn quantum_diffusion_coefficient(sigma2: f64, params: &BathParams) -> f64 {
    params.bohm_diffusivity() / sigma2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{front_lhs, front_sigma2, zero_t_oscillator_sigma2, FrontQuery};
    use crate::phys;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn rhs_examples() {
        let classical = MomentModel::free(BathParams::reduced(1.0).with_hbar(0.0)).unwrap();
        for &s in &[0.1, 1.0, 7.0] {
            assert_eq!(rhs(&classical, s).unwrap(), 2.0);
        }
        let free = MomentModel::free(BathParams::reduced(1.0)).unwrap();
        assert!((rhs(&free, 0.25).unwrap() - 4.0).abs() < 1e-15);
        let cold =
            MomentModel::new(MomentKind::OscillatorZeroT, OscillatorParams::reduced(0.0)).unwrap();
        assert!(rhs(&cold, 0.5).unwrap().abs() < 1e-15);
        assert!(matches!(rhs(&free, 0.0), Err(Error::Domain(_))));
        assert!(matches!(rhs(&free, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn model_consistency_is_checked() {
        assert!(MomentModel::new(
            MomentKind::OscillatorThermal,
            OscillatorParams::reduced(0.0)
        )
        .is_err());
        assert!(
            MomentModel::new(MomentKind::OscillatorZeroT, OscillatorParams::reduced(1.0)).is_err()
        );
        let free_osc = OscillatorParams::new(BathParams::reduced(1.0), 0.0);
        assert!(MomentModel::new(MomentKind::OscillatorThermal, free_osc).is_err());
    }

    #[test]
    fn fixed_point_examples() {
        let classical = OscillatorParams::new(BathParams::reduced(1.5).with_hbar(0.0), 2.0);
        let m = MomentModel::new(MomentKind::OscillatorThermal, classical).unwrap();
        assert!(rel(fixed_point(&m).unwrap(), 1.5 / 4.0) < 1e-15);

        let m = MomentModel::new(
            MomentKind::OscillatorThermal,
            OscillatorParams::reduced(1.0),
        )
        .unwrap();
        let fp = fixed_point(&m).unwrap();
        assert!((fp - (1.0 + 2f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!(rhs(&m, fp).unwrap().abs() < 1e-12);

        let m =
            MomentModel::new(MomentKind::OscillatorZeroT, OscillatorParams::reduced(0.0)).unwrap();
        assert_eq!(fixed_point(&m).unwrap(), 0.5);
        assert!(rhs(&m, 0.5).unwrap().abs() < 1e-12);

        let free = MomentModel::free(BathParams::default()).unwrap();
        assert!(matches!(fixed_point(&free), Err(Error::Domain(_))));
    }

    #[test]
    fn classical_spreading_is_linear() {
        let m = MomentModel::free(BathParams::reduced(1.0).with_hbar(0.0)).unwrap();
        let out = integrate(&m, 1.0, &[2.0]).unwrap();
        assert!((out[0].sigma2 - 5.0).abs() < 1e-12);
    }

    #[test]
    fn point_source_follows_front_law() {
        let bath = BathParams::reduced(1.0);
        let c = phys::derive(&bath).unwrap();
        let lam = c.lambda_t.finite().unwrap();
        let tc = c.crossover_time().unwrap();
        let times: Vec<f64> = (0..60)
            .map(|i| tc * 10f64.powf(-3.0 + 5.0 * i as f64 / 59.0))
            .collect();
        let m = MomentModel::free(bath).unwrap();
        let out = integrate(&m, 0.0, &times).unwrap();
        for s in &out {
            let oracle = front_sigma2(&FrontQuery::new(s.t, c)).unwrap();
            assert!(
                rel(s.sigma2, oracle) < 1e-6,
                "t={} {} vs {}",
                s.t,
                s.sigma2,
                oracle
            );
            let target = 2.0 * c.diffusion * s.t;
            assert!((front_lhs(s.sigma2, lam) - target).abs() <= 1e-6 * (1.0 + target));
            assert!(heisenberg_product(s.sigma2, &bath) >= 0.25);
        }
        assert!(out.windows(2).all(|w| w[1].sigma2 > w[0].sigma2));
    }

    #[test]
    fn zero_temperature_oscillator_matches_closed_form() {
        let p = OscillatorParams::reduced(0.0);
        let m = MomentModel::new(MomentKind::OscillatorZeroT, p).unwrap();
        let t = 2f64.ln() / 4.0;
        let out = integrate(&m, 0.0, &[t]).unwrap();
        assert!((out[0].sigma2 - 0.353553).abs() < 1e-6);
        assert!((out[0].sigma2 - zero_t_oscillator_sigma2(t, &p)).abs() < 1e-9);
    }

    #[test]
    fn oscillator_relaxes_monotonically_to_fixed_point() {
        let p = OscillatorParams::reduced(0.7);
        let m = MomentModel::new(MomentKind::OscillatorThermal, p).unwrap();
        let fp = fixed_point(&m).unwrap();
        let tr = p.relaxation_time();
        let times: Vec<f64> = (1..=200).map(|i| 0.1 * tr * i as f64).collect();
        for start in [fp / 10.0, 10.0 * fp] {
            let out = integrate(&m, start, &times).unwrap();
            let monotone = if start < fp {
                out.windows(2).all(|w| w[1].sigma2 >= w[0].sigma2)
            } else {
                out.windows(2).all(|w| w[1].sigma2 <= w[0].sigma2)
            };
            assert!(monotone);
            assert!((out.last().unwrap().sigma2 - fp).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_t_rhs_matches_derivative_of_closed_form() {
        let p = OscillatorParams::new(
            BathParams {
                m: 1.3,
                b: 0.8,
                temperature: 0.0,
                hbar: 0.9,
                kb: 1.0,
            },
            1.7,
        );
        let m = MomentModel::new(MomentKind::OscillatorZeroT, p).unwrap();
        for i in 1..=50 {
            let t = 0.02 * i as f64 * p.relaxation_time();
            let h = 1e-5 * t;
            let deriv = (zero_t_oscillator_sigma2(t + h, &p) - zero_t_oscillator_sigma2(t - h, &p))
                / (2.0 * h);
            let s = zero_t_oscillator_sigma2(t, &p);
            assert!((rhs(&m, s).unwrap() - deriv).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let m = MomentModel::free(BathParams::default()).unwrap();
        assert!(integrate(&m, 1.0, &[1.0, 0.5]).is_err());
        assert!(integrate(&m, -1.0, &[1.0]).is_err());
    }

    #[test]
    fn heisenberg_examples() {
        let cold = BathParams::reduced(0.0);
        for &s in &[1e-3, 1.0, 1e3] {
            assert_eq!(heisenberg_product(s, &cold), 0.25);
        }
        assert_eq!(
            heisenberg_product(3.0, &BathParams::reduced(1.0).with_hbar(0.0)),
            3.0
        );
        assert_eq!(heisenberg_product(2.0, &BathParams::reduced(1.0)), 2.25);
    }

    #[test]
    fn quantum_diffusion_examples() {
        let p = BathParams::reduced(1.0);
        assert_eq!(quantum_diffusion_coefficient(1.0, &p), 0.25);
        assert!(quantum_diffusion_coefficient(1e300, &p) < 1e-300);
        let c = phys::derive(&p).unwrap();
        let lam = c.lambda_t.finite().unwrap();
        let s2 = 3.3;
        assert!(
            rel(
                quantum_diffusion_coefficient(s2, &p),
                c.diffusion * lam * lam / s2
            ) < 1e-15
        );
    }
}
