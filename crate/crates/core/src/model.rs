//! Physical parameters of the damped oscillator and its bath.
//!
//! The particle obeys `q'' = -gamma q' - (omega0_sq / M) q + xi / M` with the
//! potential `V(q) = omega0_sq q^2 / 2`. The characteristic rates
//! `lambda_{1,2} = [gamma +- (gamma^2 - 4 omega0_sq / M)^{1/2}] / 2` are
//! complex in the underdamped regime.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant in SI units (J/K).
pub const BOLTZMANN_SI: f64 = 1.380_649e-23;

/// Relative width of the critical band: `|omega^2| <= CRITICAL_TOL * gamma^2`.
pub const CRITICAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UnitSystem {
    /// `k_B = 1`; all quantities in user-chosen consistent units.
    #[default]
    Reduced,
    /// SI units with the exact Boltzmann constant.
    Si,
}

impl UnitSystem {
    pub fn boltzmann(self) -> f64 {
        match self {
            UnitSystem::Reduced => 1.0,
            UnitSystem::Si => BOLTZMANN_SI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Overdamped,
    Critical,
    Underdamped,
}

/// User-facing inputs before validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub mass: f64,
    pub gamma: f64,
    pub omega0_sq: f64,
    pub temperature: f64,
    pub hbar: f64,
}

/// Validated parameters with every derived constant.
///
/// Immutable once built; cheap to copy and share across threads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub mass: f64,
    pub gamma: f64,
    pub omega0_sq: f64,
    pub temperature: f64,
    pub hbar: f64,
    pub units: UnitSystem,
    pub k_b: f64,
    pub beta: f64,
    /// Matsubara frequency `2 pi / (hbar beta)`; `None` in the classical limit.
    pub nu: Option<f64>,
    pub lambda1: Complex64,
    pub lambda2: Complex64,
    /// `gamma^2 - 4 omega0_sq / M`.
    pub omega_sq: f64,
    pub regime: Regime,
}

impl PhysicalParams {
    pub fn derive(raw: RawParams, units: UnitSystem) -> Result<Self> {
        let RawParams {
            mass,
            gamma,
            omega0_sq,
            temperature,
            hbar,
        } = raw;
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::NonPositiveMass(mass));
        }
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::NonPositiveTemperature(temperature));
        }
        if !(omega0_sq > 0.0) || !omega0_sq.is_finite() {
            return Err(Error::NonPositiveCurvature(omega0_sq));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "friction gamma must be >= 0, got {gamma}"
            )));
        }
        if !(hbar >= 0.0) || !hbar.is_finite() {
            return Err(Error::InvalidInput(format!("hbar must be >= 0, got {hbar}")));
        }

        let k_b = units.boltzmann();
        let beta = 1.0 / (k_b * temperature);
        let nu = (hbar > 0.0).then(|| 2.0 * std::f64::consts::PI / (hbar * beta));

        let rate = omega0_sq / mass;
        let omega_sq = gamma * gamma - 4.0 * rate;
        let regime = if omega_sq.abs() <= CRITICAL_TOL * gamma * gamma {
            Regime::Critical
        } else if omega_sq > 0.0 {
            Regime::Overdamped
        } else {
            Regime::Underdamped
        };

        let (lambda1, lambda2) = if omega_sq >= 0.0 {
            // Larger root directly, smaller one from the product to avoid cancellation.
            let l1 = 0.5 * (gamma + omega_sq.sqrt());
            let l2 = if l1 > 0.0 { rate / l1 } else { 0.0 };
            (Complex64::new(l1, 0.0), Complex64::new(l2, 0.0))
        } else {
            let half_im = 0.5 * (-omega_sq).sqrt();
            (
                Complex64::new(0.5 * gamma, half_im),
                Complex64::new(0.5 * gamma, -half_im),
            )
        };

        Ok(Self {
            mass,
            gamma,
            omega0_sq,
            temperature,
            hbar,
            units,
            k_b,
            beta,
            nu,
            lambda1,
            lambda2,
            omega_sq,
            regime,
        })
    }

    /// Convenience constructor in reduced units.
    pub fn reduced(mass: f64, gamma: f64, omega0_sq: f64, temperature: f64, hbar: f64) -> Result<Self> {
        Self::derive(
            RawParams {
                mass,
                gamma,
                omega0_sq,
                temperature,
                hbar,
            },
            UnitSystem::Reduced,
        )
    }

    pub fn raw(&self) -> RawParams {
        RawParams {
            mass: self.mass,
            gamma: self.gamma,
            omega0_sq: self.omega0_sq,
            temperature: self.temperature,
            hbar: self.hbar,
        }
    }

    /// Restoring rate `omega0_sq / M` (1/time^2).
    pub fn rate(&self) -> f64 {
        self.omega0_sq / self.mass
    }

    /// Thermal energy `k_B T`.
    pub fn kt(&self) -> f64 {
        1.0 / self.beta
    }

    /// Complex `omega = sqrt(omega_sq)`; purely imaginary when underdamped.
    pub fn omega(&self) -> Complex64 {
        Complex64::new(self.omega_sq, 0.0).sqrt()
    }

    pub fn matsubara(&self) -> Result<f64> {
        self.nu.ok_or(Error::HbarZero)
    }

    /// Dimensionless quantumness `hbar beta gamma`.
    pub fn quantumness(&self) -> f64 {
        self.hbar * self.beta * self.gamma
    }

    pub fn is_classical(&self) -> bool {
        self.hbar == 0.0
    }

    /// Same parameters with a different temperature.
    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        Self::derive(
            RawParams {
                temperature,
                ..self.raw()
            },
            self.units,
        )
    }

    /// Same parameters with a different hbar.
    pub fn with_hbar(&self, hbar: f64) -> Result<Self> {
        Self::derive(RawParams { hbar, ..self.raw() }, self.units)
    }
}
