//! Equilibrium density from the discretised Bloch equation.
//!
//! The canonical density matrix `exp(-beta H)` solves the Bloch equation in
//! inverse temperature. On a finite-difference grid `H` is a symmetric
//! tridiagonal matrix, so its exponential follows from a dense symmetric
//! eigendecomposition. The diagonal is the position density. This route
//! shares nothing with the Gaussian closed forms it is used to check.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{Grid1D, PotentialSpec};
use crate::phys::OscillatorParams;

/// Largest matrix the oracle will diagonalise.
pub const MAX_MATRIX_SIZE: usize = 2048;
/// Edge density, relative to the peak, above which the grid is too narrow.
pub const EDGE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochOracleSpec {
    pub grid: Grid1D,
    pub potential: PotentialSpec,
    pub mass: f64,
    pub hbar: f64,
    pub beta: f64,
}

impl BlochOracleSpec {
    pub fn matrix_size(&self) -> usize {
        self.grid.n
    }

    /// Harmonic oscillator on a symmetric grid whose half-width is
    /// `half_widths` standard deviations, with the variance bounded above by
    /// the classical plus ground-state dispersion.
    pub fn harmonic(p: &OscillatorParams, n: usize, half_widths: f64) -> Result<Self> {
        let bath = &p.bath;
        if bath.is_zero_temperature() || p.omega0 <= 0.0 {
            return Err(Error::Domain(
                "the harmonic Bloch oracle needs T > 0 and omega0 > 0".into(),
            ));
        }
        let bound = bath.thermal_energy() / p.stiffness() + p.ground_state_sigma2();
        let half = half_widths * bound.sqrt();
        Ok(Self {
            grid: Grid1D::new(-half, half, n)?,
            potential: PotentialSpec::Harmonic {
                omega0: p.omega0,
                mass: bath.m,
            },
            mass: bath.m,
            hbar: bath.hbar,
            beta: 1.0 / bath.thermal_energy(),
        })
    }

    /// [`Self::harmonic`] with the default half-width of eight standard
    /// deviations.
    pub fn harmonic_default(p: &OscillatorParams, n: usize) -> Result<Self> {
        Self::harmonic(p, n, 8.0)
    }
}

/// Normalised equilibrium density and its moments.
#[derive(Debug, Clone)]
pub struct BlochDensity {
    pub grid: Grid1D,
    pub density: Vec<f64>,
    pub mean: f64,
    pub sigma2: f64,
    /// Largest edge value of the density divided by its peak.
    pub edge_ratio: f64,
    pub ground_energy: f64,
}

pub fn bloch_oracle(spec: &BlochOracleSpec) -> Result<BlochDensity> {
    let n = spec.matrix_size();
    if n > MAX_MATRIX_SIZE {
        return Err(Error::Config(format!(
            "Bloch oracle matrix size {n} exceeds {MAX_MATRIX_SIZE}"
        )));
    }
    if !(spec.beta.is_finite() && spec.beta > 0.0) {
        return Err(Error::Domain(format!(
            "beta must be positive and finite, got {}",
            spec.beta
        )));
    }
    if !(spec.mass > 0.0 && spec.hbar > 0.0) {
        return Err(Error::Domain(
            "Bloch oracle needs m > 0 and hbar > 0".into(),
        ));
    }
    let grid = &spec.grid;
    let dx = grid.dx();
    let potential = spec.potential.values_on(grid)?;
    let hop = spec.hbar * spec.hbar / (2.0 * spec.mass * dx * dx);

    // Dirichlet walls just outside the first and last grid points.
    let h = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * hop + potential[i]
        } else if i.abs_diff(j) == 1 {
            -hop
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(h);
    let ground = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);

    let mut density = vec![0.0; n];
    for (k, &energy) in eig.eigenvalues.iter().enumerate() {
        let weight = (-spec.beta * (energy - ground)).exp();
        if weight < 1e-300 {
            continue;
        }
        let column = eig.eigenvectors.column(k);
        for (d, v) in density.iter_mut().zip(column.iter()) {
            *d += weight * v * v;
        }
    }

    let peak = density.iter().copied().fold(0.0, f64::max);
    let edge_ratio = density[0].max(density[n - 1]) / peak;
    if edge_ratio > EDGE_TOLERANCE {
        return Err(Error::Domain(format!(
            "equilibrium density at the grid edge is {edge_ratio:e} of its peak \
             (limit {EDGE_TOLERANCE:e}); use a wider grid"
        )));
    }

    let mass = grid.trapezoid(|i| density[i]);
    density.iter_mut().for_each(|d| *d /= mass);
    let mean = grid.trapezoid(|i| grid.x(i) * density[i]);
    let sigma2 = grid.trapezoid(|i| {
        let dev = grid.x(i) - mean;
        dev * dev * density[i]
    });
    Ok(BlochDensity {
        grid: grid.clone(),
        density,
        mean,
        sigma2,
        edge_ratio,
        ground_energy: ground,
    })
}

/// Position dispersion of `diag exp(-beta H)`.
pub fn bloch_oracle_dispersion(spec: &BlochOracleSpec) -> Result<f64> {
    Ok(bloch_oracle(spec)?.sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::oscillator_sigma2_exact;
    use crate::phys::BathParams;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn reduced_units_on_fixed_grid() {
        let p = OscillatorParams::reduced(1.0);
        let spec = BlochOracleSpec {
            grid: Grid1D::new(-10.0, 10.0, 512).unwrap(),
            potential: PotentialSpec::Harmonic {
                omega0: 1.0,
                mass: 1.0,
            },
            mass: 1.0,
            hbar: 1.0,
            beta: 1.0,
        };
        let s2 = bloch_oracle_dispersion(&spec).unwrap();
        assert!(rel(s2, 1.081977) < 1e-3, "{s2}");
        assert!(rel(s2, oscillator_sigma2_exact(&p).unwrap()) < 1e-3);
    }

    #[test]
    fn large_beta_gives_ground_state() {
        let p = OscillatorParams::reduced(0.02);
        let d = bloch_oracle(&BlochOracleSpec::harmonic_default(&p, 400).unwrap()).unwrap();
        assert!(rel(d.sigma2, 0.5) < 1e-3, "{}", d.sigma2);
        assert!(rel(d.ground_energy, 0.5) < 1e-3);
        assert!(d.mean.abs() < 1e-10);
    }

    #[test]
    fn small_hbar_approaches_classical() {
        let p = OscillatorParams::new(BathParams::reduced(1.0).with_hbar(0.05), 1.0);
        let s2 =
            bloch_oracle_dispersion(&BlochOracleSpec::harmonic_default(&p, 600).unwrap()).unwrap();
        assert!(rel(s2, 1.0) < 2e-3, "{s2}");
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let p = OscillatorParams::reduced(1.0);
        let spec = BlochOracleSpec::harmonic(&p, 128, 2.0).unwrap();
        match bloch_oracle(&spec) {
            Err(Error::Domain(msg)) => assert!(msg.contains("wider grid")),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn refinement_converges_quadratically() {
        let p = OscillatorParams::reduced(1.0);
        let exact = oscillator_sigma2_exact(&p).unwrap();
        let half = 8.0 * (1.0f64 + 0.5).sqrt();
        let err = |n: usize| {
            let spec = BlochOracleSpec {
                grid: Grid1D::new(-half, half, n).unwrap(),
                ..BlochOracleSpec::harmonic_default(&p, n).unwrap()
            };
            (bloch_oracle_dispersion(&spec).unwrap() - exact).abs()
        };
        let coarse = err(65);
        let fine = err(129);
        let finer = err(257);
        assert!(coarse / fine >= 4.0, "{coarse} / {fine}");
        assert!(fine / finer >= 4.0, "{fine} / {finer}");
    }
}
