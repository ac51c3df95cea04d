//! Vehicle and per-medium parameter sets with validated defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gravitational acceleration, m/s². Positive because inertial z points down.
pub const GRAVITY: f64 = 9.81;

/// Airframe constants shared by both media.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Principal moments of inertia (Jxx, Jyy, Jzz), kg·m².
    pub inertia: [f64; 3],
    /// Vehicle mass, kg.
    pub mass: f64,
    /// Motor arm length from hub to rotor axis, m.
    pub arm_length: f64,
    /// Rotor blade radius, m.
    pub rotor_radius: f64,
    /// Dimensionless rotor thrust coefficient.
    pub c_t: f64,
    /// Dimensionless rotor torque coefficient.
    pub c_q: f64,
    /// Usable stored energy, J.
    pub battery_capacity: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            inertia: [0.0165, 0.0324, 0.0385],
            mass: 3.865,
            arm_length: 0.200,
            rotor_radius: 0.1905,
            c_t: 0.0103,
            c_q: 0.00118,
            battery_capacity: 1.2e6,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("inertia.x", self.inertia[0]),
            ("inertia.y", self.inertia[1]),
            ("inertia.z", self.inertia[2]),
            ("mass", self.mass),
            ("arm_length", self.arm_length),
            ("rotor_radius", self.rotor_radius),
            ("c_t", self.c_t),
            ("c_q", self.c_q),
            ("battery_capacity", self.battery_capacity),
        ];
        for (name, v) in positives {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "vehicle {name} must be a positive finite number, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Fluid-dependent constants. Air and water share the model; only these
/// numbers change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default = "MediumParams::air", deny_unknown_fields)]
pub struct MediumParams {
    /// Fluid density, kg/m³.
    pub rho: f64,
    /// Buoyancy factor: fraction of weight remaining after buoyant lift
    /// (1 in air, below 1 submerged).
    pub buoyancy: f64,
    /// Flat-plate drag areas per body axis (f1, f2, f3), m².
    pub cda: [f64; 3],
    /// Rotational damping diagonal, N·m·s.
    pub d_w: [f64; 3],
    /// Drivetrain efficiency in (0, 1].
    pub eta_m: f64,
    /// Electronics idle power, W.
    pub p_idle: f64,
    /// Rotor speed limit, rad/s.
    pub omega_max: f64,
}

impl MediumParams {
    pub fn air() -> Self {
        Self {
            rho: 1.225,
            buoyancy: 1.0,
            cda: [0.01, 0.01, 0.03],
            d_w: [0.001, 0.001, 0.001],
            eta_m: 0.55,
            p_idle: 15.0,
            omega_max: 1200.0,
        }
    }

    pub fn water() -> Self {
        Self {
            rho: 1000.0,
            buoyancy: 0.75,
            cda: [0.01, 0.01, 0.03],
            d_w: [0.2, 0.2, 0.2],
            eta_m: 0.70,
            p_idle: 15.0,
            omega_max: 400.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "medium rho must be positive, got {}",
                self.rho
            )));
        }
        if !(self.buoyancy.is_finite() && (0.0..=1.0).contains(&self.buoyancy)) {
            return Err(Error::InvalidParameter(format!(
                "buoyancy factor must lie in [0, 1], got {}",
                self.buoyancy
            )));
        }
        for (name, arr) in [("cda", &self.cda), ("d_w", &self.d_w)] {
            for v in arr {
                if !(v.is_finite() && *v >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "medium {name} entries must be non-negative, got {v}"
                    )));
                }
            }
        }
        if !(self.eta_m.is_finite() && self.eta_m > 0.0 && self.eta_m <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eta_m must lie in (0, 1], got {}",
                self.eta_m
            )));
        }
        if !(self.p_idle.is_finite() && self.p_idle >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "p_idle must be non-negative, got {}",
                self.p_idle
            )));
        }
        if !(self.omega_max.is_finite() && self.omega_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "omega_max must be positive, got {}",
                self.omega_max
            )));
        }
        Ok(())
    }
}
