//! Overall damage of a virus: economic loss plus antivirus development cost.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DamageError {
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("antivirus cost undefined for delay tau = {0} (must be > 0)")]
    DelayNotPositive(f64),
    #[error("trajectory was integrated with tau = {trajectory}, damage requested for tau = {requested}")]
    DelayMismatch { trajectory: f64, requested: f64 },
}

/// Antivirus development cost `A / tau^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// Cost coefficient `A`.
    pub a_coeff: f64,
    /// Cost index (exponent) `alpha`.
    pub alpha: f64,
}

impl CostParams {
    pub fn new(a_coeff: f64, alpha: f64) -> Result<Self, DamageError> {
        let c = Self { a_coeff, alpha };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), DamageError> {
        for (name, value) in [("a_coeff", self.a_coeff), ("alpha", self.alpha)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(DamageError::NotPositive { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamageReport {
    pub economic_loss: f64,
    pub antivirus_cost: f64,
    pub total: f64,
}

impl DamageReport {
    pub fn new(economic_loss: f64, antivirus_cost: f64) -> Self {
        Self { economic_loss, antivirus_cost, total: economic_loss + antivirus_cost }
    }
}

/// Expected loss `∫₀ᵀ Σ_i I_i(t) dt`, one unit per infected host per unit time.
pub fn economic_loss(traj: &Trajectory) -> f64 {
    traj.final_loss()
}

pub fn antivirus_cost(c: &CostParams, tau: f64) -> Result<f64, DamageError> {
    if !(tau > 0.0) {
        return Err(DamageError::DelayNotPositive(tau));
    }
    Ok(c.a_coeff * tau.powf(-c.alpha))
}

pub fn total_damage(traj: &Trajectory, c: &CostParams, tau: f64) -> Result<DamageReport, DamageError> {
    let integrated = traj.params().tau;
    if integrated != tau {
        return Err(DamageError::DelayMismatch { trajectory: integrated, requested: tau });
    }
    Ok(DamageReport::new(economic_loss(traj), antivirus_cost(c, tau)?))
}
