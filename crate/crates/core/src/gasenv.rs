//! The ideal Maxwell gas environment: thermal parameters, the momentum
//! distribution μ(p), and reproducible momentum sampling for Monte Carlo
//! oracles. Natural units: ħ = 1, k_B = 1.

use nalgebra::Vector3;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GasError {
    #[error("gas parameter {name} must be strictly positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
}

/// Gas-particle mass `m`, inverse temperature `beta`, and number density.
///
/// The normalization volume of the gas state cancels in every implemented
/// formula and is never a runtime parameter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GasParams {
    pub mass: f64,
    pub beta: f64,
    pub density: f64,
}

impl GasParams {
    pub fn new(mass: f64, beta: f64, density: f64) -> Result<Self, GasError> {
        for (name, value) in [("gas.mass", mass), ("gas.beta", beta), ("gas.density", density)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(GasError::NonPositiveParameter { name, value });
            }
        }
        Ok(Self { mass, beta, density })
    }

    /// Maxwell-Boltzmann density μ(p) = (2πm/β)^(-3/2) exp(-β p²/2m),
    /// normalized to ∫ μ d³p = 1.
    pub fn maxwell_density(&self, p: &Vector3<f64>) -> f64 {
        let a = 2.0 * PI * self.mass / self.beta;
        a.powf(-1.5) * (-self.beta * p.norm_squared() / (2.0 * self.mass)).exp()
    }

    /// μ evaluated at momentum magnitude `p` (the distribution is isotropic).
    pub fn maxwell_density_mag(&self, p: f64) -> f64 {
        let a = 2.0 * PI * self.mass / self.beta;
        a.powf(-1.5) * (-self.beta * p * p / (2.0 * self.mass)).exp()
    }

    /// Thermal de Broglie wavelength √(2πβ/m).
    pub fn thermal_wavelength(&self) -> f64 {
        (2.0 * PI * self.beta / self.mass).sqrt()
    }

    /// Mean speed ⟨|p|⟩/m = √(8/(π β m)).
    pub fn mean_speed(&self) -> f64 {
        (8.0 / (PI * self.beta * self.mass)).sqrt()
    }

    /// RMS single-axis thermal momentum √(m/β).
    pub fn thermal_momentum(&self) -> f64 {
        (self.mass / self.beta).sqrt()
    }

    /// One Maxwell-distributed momentum; each component Gaussian with
    /// variance m/β. Deterministic for a fixed generator state.
    pub fn sample_momentum(&self, rng: &mut ChaCha8Rng) -> Vector3<f64> {
        let normal = Normal::new(0.0, self.thermal_momentum()).expect("finite sigma");
        Vector3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng))
    }
}
