//! Physical parameters and the constants derived from them.
//!
//! Reduced units (`m = b = hbar = kB = 1`) are the default everywhere, but
//! every formula in the crate takes its parameters explicitly.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, ParamError, Result};

fn one() -> f64 {
    1.0
}

/// Bath and particle constants: mass, friction, temperature, Planck and
/// Boltzmann constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathParams {
    #[serde(default = "one")]
    pub m: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(rename = "T", default = "one")]
    pub temperature: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(rename = "kB", default = "one")]
    pub kb: f64,
}

impl Default for BathParams {
    fn default() -> Self {
        Self::reduced(1.0)
    }
}

impl BathParams {
    /// Reduced units at temperature `temperature`.
    pub fn reduced(temperature: f64) -> Self {
        Self {
            m: 1.0,
            b: 1.0,
            temperature,
            hbar: 1.0,
            kb: 1.0,
        }
    }

    pub fn with_temperature(self, temperature: f64) -> Self {
        Self {
            temperature,
            ..self
        }
    }

    pub fn with_hbar(self, hbar: f64) -> Self {
        Self { hbar, ..self }
    }

    /// Thermal energy `kB * T`.
    pub fn thermal_energy(&self) -> f64 {
        self.kb * self.temperature
    }

    /// Einstein diffusion constant `kB T / b`.
    pub fn diffusion(&self) -> f64 {
        self.thermal_energy() / self.b
    }

    /// `hbar^2 / (4 m b)`, which equals `D * lambda_T^2` for `T > 0` and stays
    /// finite at zero temperature.
    pub fn bohm_diffusivity(&self) -> f64 {
        self.hbar * self.hbar / (4.0 * self.m * self.b)
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.temperature == 0.0
    }

    /// Returns every violated invariant, in field order.
    pub fn check(&self) -> Vec<ParamError> {
        let mut errors = Vec::new();
        let mut positive = |value: f64, field: &'static str, message: &'static str| {
            if !(value.is_finite() && value > 0.0) {
                errors.push(ParamError { field, message });
            }
        };
        positive(self.m, "m", "mass must be positive");
        positive(self.b, "b", "friction must be positive");
        positive(self.kb, "kB", "Boltzmann constant must be positive");
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            errors.push(ParamError {
                field: "T",
                message: "temperature must be non-negative",
            });
        }
        if !(self.hbar.is_finite() && self.hbar >= 0.0) {
            errors.push(ParamError {
                field: "hbar",
                message: "hbar must be non-negative",
            });
        }
        errors
    }
}

/// Harmonic oscillator on top of a bath. `omega0 == 0` is the free particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    #[serde(flatten)]
    pub bath: BathParams,
    #[serde(default)]
    pub omega0: f64,
}

impl Default for OscillatorParams {
    fn default() -> Self {
        Self {
            bath: BathParams::default(),
            omega0: 0.0,
        }
    }
}

impl OscillatorParams {
    pub fn new(bath: BathParams, omega0: f64) -> Self {
        Self { bath, omega0 }
    }

    /// Reduced units with `omega0 = 1` at temperature `temperature`.
    pub fn reduced(temperature: f64) -> Self {
        Self::new(BathParams::reduced(temperature), 1.0)
    }

    /// Classical spring constant `m omega0^2`.
    pub fn stiffness(&self) -> f64 {
        self.bath.m * self.omega0 * self.omega0
    }

    /// Overdamped classical relaxation time `b / (m omega0^2)`.
    pub fn relaxation_time(&self) -> f64 {
        self.bath.b / self.stiffness()
    }

    /// Ground-state dispersion `hbar / (2 m omega0)`.
    pub fn ground_state_sigma2(&self) -> f64 {
        self.bath.hbar / (2.0 * self.bath.m * self.omega0)
    }

    pub fn check(&self) -> Vec<ParamError> {
        let mut errors = self.bath.check();
        if !(self.omega0.is_finite() && self.omega0 >= 0.0) {
            errors.push(ParamError {
                field: "omega0",
                message: "oscillator frequency must be non-negative",
            });
        }
        errors
    }
}

/// A length or inverse energy that is infinite at `T = 0`.
///
/// Serialized as a plain number when finite and as the string `"infinite"`
/// otherwise, so no IEEE infinity ever reaches an output file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extent {
    Finite(f64),
    Infinite,
}

impl Extent {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extent::Finite(v) => Some(v),
            Extent::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Extent::Infinite)
    }
}

impl fmt::Display for Extent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extent::Finite(v) => write!(f, "{v}"),
            Extent::Infinite => f.write_str("infinite"),
        }
    }
}

impl Serialize for Extent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Extent::Finite(v) => serializer.serialize_f64(*v),
            Extent::Infinite => serializer.serialize_str("infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for Extent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ExtentVisitor;

        impl Visitor<'_> for ExtentVisitor {
            type Value = Extent;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a finite number or \"infinite\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Extent, E> {
                Ok(Extent::Finite(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Extent, E> {
                Ok(Extent::Finite(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Extent, E> {
                Ok(Extent::Finite(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Extent, E> {
                match v {
                    "infinite" => Ok(Extent::Infinite),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }

        deserializer.deserialize_any(ExtentVisitor)
    }
}

/// Constants derived from [`BathParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// Einstein diffusion constant `D = kB T / b`.
    pub diffusion: f64,
    /// Thermal de Broglie wavelength `hbar / (2 sqrt(m kB T))`.
    pub lambda_t: Extent,
    /// Inverse temperature `1 / (kB T)`.
    pub beta: Extent,
    /// `hbar^2 / (4 m b)`; the finite product `D * lambda_T^2`.
    pub bohm_diffusivity: f64,
}

impl DerivedConstants {
    /// `lambda_T^2 / D`, the crossover time between quantum and classical
    /// spreading. `None` when either factor vanishes or diverges.
    pub fn crossover_time(&self) -> Option<f64> {
        let lambda = self.lambda_t.finite()?;
        if self.diffusion > 0.0 && lambda > 0.0 {
            Some(lambda * lambda / self.diffusion)
        } else {
            None
        }
    }
}

/// Returns `Ok(())` iff every invariant holds, otherwise one error per
/// violated invariant.
pub fn validate(params: &BathParams) -> std::result::Result<(), Vec<ParamError>> {
    let errors = params.check();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

pub fn derive(params: &BathParams) -> Result<DerivedConstants> {
    validate(params).map_err(Error::Validation)?;
    let kt = params.thermal_energy();
    let (lambda_t, beta) = if params.is_zero_temperature() {
        (Extent::Infinite, Extent::Infinite)
    } else {
        (
            Extent::Finite(params.hbar / (2.0 * (params.m * kt).sqrt())),
            Extent::Finite(1.0 / kt),
        )
    };
    Ok(DerivedConstants {
        diffusion: params.diffusion(),
        lambda_t,
        beta,
        bohm_diffusivity: params.bohm_diffusivity(),
    })
}
