//! Closed-form dispersion laws, equilibrium fluctuations and spectra.
//!
//! These are the references the numerical solvers in [`crate::moments`],
//! [`crate::pde`] and [`crate::langevin`] are checked against. The Bloch
//! oracle in [`bloch`] is an independent route to the exact equilibrium
//! dispersion of an oscillator.
//!
//! Short-time free spreading at `T = 0` is `sigma^2 = hbar sqrt(t / (m b))`.
//! The same law is sometimes quoted without the friction factor; that form
//! is dimensionally inconsistent with the small-time expansion of
//! [`zero_t_oscillator_sigma2`], so `b` is kept here.

pub mod bloch;
pub mod quadrature;

pub use bloch::{bloch_oracle, bloch_oracle_dispersion, BlochDensity, BlochOracleSpec};

use crate::error::{Error, Result};
use crate::phys::{self, DerivedConstants, Extent, OscillatorParams};

const FRONT_REL_TOL: f64 = 1e-12;
const FRONT_MAX_ITER: usize = 200;

/// Classical mean-square displacement `2 D t`.
pub fn einstein_msd(t: f64, diffusion: f64) -> f64 {
    2.0 * diffusion * t
}

/// `x - ln(1 + x)` without cancellation for small `x`.
pub(crate) fn x_minus_log1p(x: f64) -> f64 {
    if x.abs() < 0.05 {
        let mut term = x * x;
        let mut sum = 0.0;
        let mut k = 2.0;
        while term.abs() > 1e-18 * (x * x).abs() && k < 40.0 {
            sum += term / k;
            term *= -x;
            k += 1.0;
        }
        sum
    } else {
        x - x.ln_1p()
    }
}

/// Left side of the front law: `sigma2 - lambda_T^2 ln(1 + sigma2 / lambda_T^2)`.
pub fn front_lhs(sigma2: f64, lambda_t: f64) -> f64 {
    if lambda_t == 0.0 {
        return sigma2;
    }
    let l2 = lambda_t * lambda_t;
    l2 * x_minus_log1p(sigma2 / l2)
}

/// Time and bath constants at which to evaluate the diffusion front.
#[derive(Debug, Clone, Copy)]
pub struct FrontQuery {
    pub t: f64,
    pub constants: DerivedConstants,
}

impl FrontQuery {
    pub fn new(t: f64, constants: DerivedConstants) -> Self {
        Self { t, constants }
    }
}

/// Dispersion of an initially point-like packet: the unique root of
/// `front_lhs(sigma2) = 2 D t`.
pub fn front_sigma2(q: &FrontQuery) -> Result<f64> {
    let t = q.t;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!(
            "front time must be non-negative, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let c = &q.constants;
    let lambda = match c.lambda_t {
        // T = 0: the pure quantum law, sqrt(4 D lambda^2 t) with D lambda^2 finite.
        Extent::Infinite => return Ok((4.0 * c.bohm_diffusivity * t).sqrt()),
        Extent::Finite(0.0) => return Ok(einstein_msd(t, c.diffusion)),
        Extent::Finite(l) => l,
    };
    let l2 = lambda * lambda;
    let tau = einstein_msd(t, c.diffusion) / l2;
    Ok(l2 * invert_front(tau)?)
}

/// Solves `x - ln(1 + x) = tau` for `x >= 0`.
fn invert_front(tau: f64) -> Result<f64> {
    let g = |x: f64| x_minus_log1p(x) - tau;
    // Both lower bounds follow from ln(1 + x) >= x - x^2 / 2 and ln(1 + x) >= 0.
    let mut lo = tau.max((2.0 * tau).sqrt());
    let mut hi = 2.0 * lo + 1.0;
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    if g(lo) >= 0.0 {
        return Ok(lo);
    }
    let mut x = lo;
    for _ in 0..FRONT_MAX_ITER {
        let gx = g(x);
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = x / (1.0 + x);
        let mut next = x - gx / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= FRONT_REL_TOL * 1e-3 * next || hi - lo <= FRONT_REL_TOL * 1e-3 * hi {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Numeric(format!(
        "front-law inversion did not converge for tau = {tau:e} (bracket [{lo:e}, {hi:e}])"
    )))
}

/// Zero-temperature free spreading `hbar sqrt(t / (m b))`.
pub fn zero_t_free_sigma2(t: f64, hbar: f64, m: f64, b: f64) -> f64 {
    hbar * (t / (m * b)).sqrt()
}

/// `coth(x)` for `x > 0`, accurate for small arguments.
pub(crate) fn coth(x: f64) -> f64 {
    let em = (-2.0 * x).exp_m1();
    (2.0 + em) / -em
}

fn checked(p: &OscillatorParams) -> Result<()> {
    let errors = p.check();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(errors))
    }
}

/// Equilibrium root of the Gaussian dispersion equation in a harmonic well,
/// `[1 + sqrt(1 + (beta hbar omega0)^2)] / (2 beta m omega0^2)`.
pub fn oscillator_sigma2_dg(p: &OscillatorParams) -> Result<f64> {
    checked(p)?;
    if p.bath.is_zero_temperature() || p.omega0 == 0.0 {
        return Err(Error::Domain(
            "the Gaussian fixed point needs T > 0 and omega0 > 0; \
             use ground_state_sigma2 (T = 0) or the free-particle laws (omega0 = 0)"
                .into(),
        ));
    }
    let beta = 1.0 / p.bath.thermal_energy();
    let a = beta * p.bath.hbar * p.omega0;
    Ok((1.0 + (1.0 + a * a).sqrt()) / (2.0 * beta * p.stiffness()))
}

/// Exact quantum equilibrium dispersion `(hbar / 2 m omega0) coth(beta hbar omega0 / 2)`
/// as a function of inverse temperature.
pub(crate) fn sigma2_exact_at_beta(p: &OscillatorParams, beta: f64) -> f64 {
    let ground = p.ground_state_sigma2();
    ground * coth(0.5 * beta * p.bath.hbar * p.omega0)
}

/// Exact equilibrium dispersion of the quantum oscillator.
pub fn oscillator_sigma2_exact(p: &OscillatorParams) -> Result<f64> {
    checked(p)?;
    if p.omega0 == 0.0 {
        return Err(Error::Domain(
            "a free particle has no equilibrium dispersion (omega0 = 0)".into(),
        ));
    }
    let bath = &p.bath;
    if bath.is_zero_temperature() {
        if bath.hbar == 0.0 {
            return Err(Error::Domain(
                "classical particle at T = 0 collapses to a point (hbar = 0, T = 0)".into(),
            ));
        }
        return Ok(p.ground_state_sigma2());
    }
    if bath.hbar == 0.0 {
        return Ok(bath.thermal_energy() / p.stiffness());
    }
    Ok(sigma2_exact_at_beta(p, 1.0 / bath.thermal_energy()))
}

/// Zero-temperature relaxation of a point packet in a harmonic well:
/// `(hbar / 2 m omega0) sqrt(1 - exp(-4 m omega0^2 t / b))`.
pub fn zero_t_oscillator_sigma2(t: f64, p: &OscillatorParams) -> f64 {
    let rate = 4.0 * p.stiffness() / p.bath.b;
    p.ground_state_sigma2() * (-(-rate * t).exp_m1()).sqrt()
}

/// `kB T * integral_0^beta hbar^2 / (4 m sigma_e^4(beta')) dbeta'`, the
/// entropic softening of the spring, with `sigma_e^2(beta')` the exact
/// equilibrium dispersion at inverse temperature `beta'`.
pub fn spring_softening(p: &OscillatorParams) -> Result<quadrature::Quadrature> {
    checked(p)?;
    if p.bath.is_zero_temperature() || p.omega0 == 0.0 {
        return Err(Error::Domain(
            "the effective spring needs T > 0 and omega0 > 0".into(),
        ));
    }
    let bath = &p.bath;
    let beta = 1.0 / bath.thermal_energy();
    let coeff = bath.hbar * bath.hbar / (4.0 * bath.m);
    if coeff == 0.0 {
        return Ok(quadrature::Quadrature {
            value: 0.0,
            error_estimate: 0.0,
        });
    }
    let q = quadrature::integrate(
        |b| {
            let s2 = sigma2_exact_at_beta(p, b);
            coeff / (s2 * s2)
        },
        0.0,
        beta,
        1e-14,
    )?;
    let kt = bath.thermal_energy();
    Ok(quadrature::Quadrature {
        value: kt * q.value,
        error_estimate: kt * q.error_estimate,
    })
}

/// Effective spring constant `m omega0^2 - kB T integral ...`, which equals
/// `kB T / sigma_e^2` at equilibrium.
pub fn effective_spring(p: &OscillatorParams) -> Result<f64> {
    let softening = spring_softening(p)?;
    Ok(p.stiffness() - softening.value)
}

/// Position spectral density of the effective oscillator driven by white
/// noise of density `2 b kB T`. `m = 0` gives the overdamped form.
pub fn spectral_density_rr(omega: f64, b: f64, m: f64, kt: f64, sigma2_e: f64) -> f64 {
    let detune = m * omega * omega - kt / sigma2_e;
    2.0 * b * kt / (detune * detune + b * b * omega * omega)
}

/// Overdamped equilibrium autocorrelation `sigma_e^2 exp(-D tau / sigma_e^2)`.
pub fn autocorrelation_rr(tau: f64, diffusion: f64, sigma2_e: f64) -> f64 {
    sigma2_e * (-diffusion * tau / sigma2_e).exp()
}

/// [`autocorrelation_rr`] with `D` and the exact `sigma_e^2` taken from the
/// oscillator; constant `hbar / (2 m omega0)` at `T = 0`.
pub fn oscillator_autocorrelation(tau: f64, p: &OscillatorParams) -> Result<f64> {
    let s2 = oscillator_sigma2_exact(p)?;
    let c = phys::derive(&p.bath)?;
    Ok(autocorrelation_rr(tau, c.diffusion, s2))
}
