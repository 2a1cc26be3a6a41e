//! Physical parameters of the anisotropic micropolar fluid and the derived
//! constants used throughout: the reduced viscosities `α̃ = α + 4β/3`,
//! `γ̃ = β + γ`, the equilibrium spin magnitude `τ̃ = τ/(2κ)`, and the
//! microinertia equilibrium `J_eq = diag(λ, λ, ν)` driven by the constant
//! microtorque `τ e₃`.

use crate::la::{Mat3, Vec3};
use serde::{Deserialize, Serialize};

/// Inertial shape of the equilibrium microstructure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InertiaShape {
    /// `ν > λ`: disc-like microstructure; the equilibrium is linearly stable.
    Oblate,
    /// `λ > ν`: rod-like microstructure; the equilibrium is linearly unstable.
    Oblong,
}

#[derive(Debug, thiserror::Error)]
pub enum ParamError {
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("microinertia eigenvalues must differ (λ = ν = {0})")]
    DegenerateInertia(f64),
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
}

/// Physical constants. Construct with [`PhysParams::new`] (validated) or
/// deserialize from a config file, then call [`PhysParams::validate`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysParams {
    /// kinematic viscosity μ
    pub mu: f64,
    /// micro-rotation coupling viscosity κ
    pub kappa: f64,
    /// couple-stress viscosities α, β, γ
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// constant microtorque magnitude τ (applied along e₃)
    pub tau: f64,
    /// repeated microinertia eigenvalue λ
    pub lambda: f64,
    /// distinguished microinertia eigenvalue ν (axis e₃ at equilibrium)
    pub nu: f64,
}

impl PhysParams {
    pub fn new(
        mu: f64,
        kappa: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
        tau: f64,
        lambda: f64,
        nu: f64,
    ) -> Result<Self, ParamError> {
        let p = PhysParams {
            mu,
            kappa,
            alpha,
            beta,
            gamma,
            tau,
            lambda,
            nu,
        };
        p.validate()?;
        Ok(p)
    }

    /// The parameter set used by the acceptance runs: unit viscosities and
    /// microtorque with an oblate inertia `λ = 1 < ν = 2`.
    pub fn unit_oblate() -> Self {
        PhysParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0).expect("valid parameters")
    }

    /// Same constants with `λ` and `ν` swapped: the oblong (unstable) twin.
    pub fn swapped_inertia(self) -> Self {
        PhysParams {
            lambda: self.nu,
            nu: self.lambda,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let positives = [
            ("mu", self.mu),
            ("kappa", self.kappa),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("tau", self.tau),
            ("lambda", self.lambda),
            ("nu", self.nu),
        ];
        for (name, value) in positives {
            if !value.is_finite() {
                return Err(ParamError::NonFinite { name, value });
            }
            if value <= 0.0 {
                return Err(ParamError::NonPositive { name, value });
            }
        }
        if self.nu == self.lambda {
            return Err(ParamError::DegenerateInertia(self.nu));
        }
        Ok(())
    }

    /// `α̃ = α + 4β/3`
    pub fn alpha_tilde(&self) -> f64 {
        self.alpha + 4.0 * self.beta / 3.0
    }

    /// `γ̃ = β + γ`
    pub fn gamma_tilde(&self) -> f64 {
        self.beta + self.gamma
    }

    /// Equilibrium spin magnitude `τ̃ = τ/(2κ)`; the equilibrium angular
    /// velocity is `ω_eq = τ̃ e₃`.
    pub fn tau_tilde(&self) -> f64 {
        self.tau / (2.0 * self.kappa)
    }

    /// Effective velocity viscosity `μ + κ/2` (coefficient of Δu).
    pub fn mu_eff(&self) -> f64 {
        self.mu + self.kappa / 2.0
    }

    pub fn omega_eq(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.tau_tilde())
    }

    pub fn j_eq(&self) -> Mat3 {
        Mat3::diag(self.lambda, self.lambda, self.nu)
    }

    pub fn shape(&self) -> InertiaShape {
        if self.nu > self.lambda {
            InertiaShape::Oblate
        } else {
            InertiaShape::Oblong
        }
    }

    /// Weight `τ̃²/(ν−λ)` carried by the planar `a`-component in every energy
    /// functional. Positive exactly in the oblate regime.
    pub fn a_weight(&self) -> f64 {
        let t = self.tau_tilde();
        t * t / (self.nu - self.lambda)
    }
}
