//! Decentralized droop law: each module sets its frequency from its own
//! active power and power factor angle and holds a fixed voltage amplitude.
//!
//! ```text
//! omega_ij = omega* - m P_ij - k_phi phi_ij
//! V_ij     = V_ref
//! ```

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::PowerReading;

pub const DEFAULT_OMEGA_STAR: f64 = TAU * 50.0;
pub const DEFAULT_M: f64 = 0.01;
pub const DEFAULT_K_PHI: f64 = 0.1;
pub const DEFAULT_V_REF: f64 = 1.0;

/// Gains shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DroopParams {
    /// Rated angular frequency, rad/s.
    pub omega_star: f64,
    /// Active-power droop gain, rad/s per per-unit watt.
    pub m: f64,
    /// Power-factor-angle droop gain, 1/s.
    pub k_phi: f64,
    /// Voltage amplitude reference, per-unit.
    pub v_ref: f64,
}

impl Default for DroopParams {
    fn default() -> Self {
        DroopParams {
            omega_star: DEFAULT_OMEGA_STAR,
            m: DEFAULT_M,
            k_phi: DEFAULT_K_PHI,
            v_ref: DEFAULT_V_REF,
        }
    }
}

impl DroopParams {
    pub fn new(omega_star: f64, m: f64, k_phi: f64, v_ref: f64) -> Result<Self> {
        DroopParams {
            omega_star,
            m,
            k_phi,
            v_ref,
        }
        .validate()
    }

    pub fn validate(self) -> Result<Self> {
        if !(self.omega_star.is_finite() && self.omega_star > 0.0) {
            return Err(Error::invalid("omega_star must be > 0"));
        }
        if !(self.v_ref.is_finite() && self.v_ref > 0.0) {
            return Err(Error::invalid("v_ref must be > 0"));
        }
        if !self.m.is_finite() {
            return Err(Error::invalid("m must be finite"));
        }
        if !self.k_phi.is_finite() {
            return Err(Error::invalid("k_phi must be finite"));
        }
        Ok(self)
    }

    /// Same law with different gains.
    pub fn with_gains(self, m: f64, k_phi: f64) -> Self {
        DroopParams { m, k_phi, ..self }
    }

    /// `m P + k_phi phi`, the quantity every module agrees on in steady state.
    pub fn droop_term(&self, reading: &PowerReading) -> f64 {
        self.m * reading.p + self.k_phi * reading.phi
    }
}

/// `omega* - m P - k_phi phi`.
pub fn droop_frequency(params: &DroopParams, reading: &PowerReading) -> f64 {
    params.omega_star - params.m * reading.p - params.k_phi * reading.phi
}

/// Deviation from rated frequency, `-m P - k_phi phi`. Computed directly
/// rather than as `droop_frequency - omega*` to avoid cancellation.
pub fn frequency_deviation(params: &DroopParams, reading: &PowerReading) -> f64 {
    -params.m * reading.p - params.k_phi * reading.phi
}

pub fn voltage_reference(params: &DroopParams) -> f64 {
    params.v_ref
}
