//! Rigid-body vehicle model: quaternion algebra, medium-dependent 6-DOF
//! dynamics, the rotor thrust/torque/power map, and a fixed-step RK4
//! integrator.
//!
//! Conventions used throughout this module:
//!
//! * The inertial frame has z pointing **down**, so gravity is
//!   `(0, 0, +9.81)` and the rotors push along the body −z axis.
//! * Attitude quaternions are scalar-first and rotate **body to inertial**:
//!   `v_I = q ⊗ [0, v_B] ⊗ q*`.
//! * Body rates `ω = (p, q, r)` are expressed in the body frame.
//!
//! The same equations of motion serve both media; air and water differ only
//! through [`MediumParams`] (density, buoyancy factor, drag, rotor speed
//! limit, and drivetrain efficiency).

mod dynamics;
mod params;
mod quat;
mod rotor;

pub use dynamics::{dynamics_derivative, step_rk4, StateDerivative, VehicleState};
pub use params::{MediumParams, VehicleParams, GRAVITY};
pub use quat::{
    quat_conjugate, quat_derivative, quat_error, quat_from_two_vectors, quat_multiply,
    quat_normalize, quat_rotate, Quat,
};
pub use rotor::{
    electrical_power, hover_speed, mix, rotor_thrust_torque, thrust_coefficient,
    torque_coefficient, unmix, ControlU, RotorSpeeds,
};
