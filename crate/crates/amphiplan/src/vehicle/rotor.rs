//! Rotor model and X-configuration control allocation.
//!
//! Motor layout, viewed from above with body x forward, y right, z down:
//!
//! ```text
//!        x
//!   1 \  |  / 2          1: front-left  (+x, −y)
//!      \ | /             2: front-right (+x, +y)
//!       \|/              3: rear-right  (−x, +y)
//!  ------+------ y       4: rear-left   (−x, −y)
//!       /|\
//!      / | \             1 and 3 spin one way, 2 and 4 the other, so the
//!   4 /  |  \ 3          net reaction torque is Q1 − Q2 + Q3 − Q4.
//! ```
//!
//! Every arm sits at 45° to the body axes, so each motor's moment arm about
//! x and y is `L/√2`. Thrust points along body −z.

use crate::vehicle::params::{MediumParams, VehicleParams};

/// Individual rotor speeds, rad/s, in motor order 1..4.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RotorSpeeds(pub [f64; 4]);

impl RotorSpeeds {
    /// All four rotors at the same speed.
    pub fn uniform(omega: f64) -> Self {
        Self([omega; 4])
    }
}

/// Collective thrust and body moments `(U0, U1, U2, U3)` =
/// (total thrust N, roll N·m, pitch N·m, yaw N·m).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ControlU {
    pub u0: f64,
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
}

impl ControlU {
    pub fn new(u0: f64, u1: f64, u2: f64, u3: f64) -> Self {
        Self { u0, u1, u2, u3 }
    }
}

/// Thrust coefficient `K_T = C_T · ρ · A · R²` with `A = πR²`, so that
/// `T = K_T · Ω²`.
pub fn thrust_coefficient(med: &MediumParams, vp: &VehicleParams) -> f64 {
    let area = std::f64::consts::PI * vp.rotor_radius * vp.rotor_radius;
    vp.c_t * med.rho * area * vp.rotor_radius * vp.rotor_radius
}

/// Torque coefficient `K_Q = C_Q · ρ · A · R³`, so that `Q = K_Q · Ω²`.
pub fn torque_coefficient(med: &MediumParams, vp: &VehicleParams) -> f64 {
    let area = std::f64::consts::PI * vp.rotor_radius * vp.rotor_radius;
    vp.c_q * med.rho * area * vp.rotor_radius.powi(3)
}

/// Thrust (N) and reaction torque magnitude (N·m) of one rotor.
pub fn rotor_thrust_torque(omega: f64, med: &MediumParams, vp: &VehicleParams) -> (f64, f64) {
    let w2 = omega * omega;
    (
        thrust_coefficient(med, vp) * w2,
        torque_coefficient(med, vp) * w2,
    )
}

/// Rotor speed at which four rotors exactly cancel net weight
/// (`b·m·g`) in the given medium.
pub fn hover_speed(med: &MediumParams, vp: &VehicleParams) -> f64 {
    (med.buoyancy * vp.mass * crate::vehicle::params::GRAVITY
        / (4.0 * thrust_coefficient(med, vp)))
    .sqrt()
}

/// Allocate `(U0..U3)` to four rotor speeds by inverting
///
/// * `U0 = T1 + T2 + T3 + T4`
/// * `U1 = (L/√2)(T1 + T4 − T2 − T3)`
/// * `U2 = (L/√2)(T1 + T2 − T3 − T4)`
/// * `U3 = Q1 − Q2 + Q3 − Q4`
///
/// Infeasible demands are clamped: a negative per-rotor thrust solution
/// becomes a stopped rotor, and speeds cap at the medium's `omega_max`.
/// The boolean is true whenever any clamp engaged — the commanded wrench
/// was not achieved exactly.
pub fn mix(u: &ControlU, med: &MediumParams, vp: &VehicleParams) -> (RotorSpeeds, bool) {
    let kt = thrust_coefficient(med, vp);
    let k = vp.arm_length / std::f64::consts::SQRT_2;
    let gamma = torque_coefficient(med, vp) / kt;

    let a = u.u1 / k;
    let b = u.u2 / k;
    let c = u.u3 / gamma;
    let thrusts = [
        0.25 * (u.u0 + a + b + c),
        0.25 * (u.u0 - a + b - c),
        0.25 * (u.u0 - a - b + c),
        0.25 * (u.u0 + a - b - c),
    ];

    let mut saturated = false;
    let mut speeds = [0.0; 4];
    for (i, t) in thrusts.iter().enumerate() {
        let mut omega = if *t < 0.0 {
            saturated = true;
            0.0
        } else {
            (t / kt).sqrt()
        };
        if omega > med.omega_max {
            saturated = true;
            omega = med.omega_max;
        }
        speeds[i] = omega;
    }
    (RotorSpeeds(speeds), saturated)
}

/// Wrench actually produced by a set of rotor speeds — the forward map
/// that [`mix`] inverts.
pub fn unmix(rotors: &RotorSpeeds, med: &MediumParams, vp: &VehicleParams) -> ControlU {
    let k = vp.arm_length / std::f64::consts::SQRT_2;
    let mut t = [0.0; 4];
    let mut q = [0.0; 4];
    for i in 0..4 {
        let (ti, qi) = rotor_thrust_torque(rotors.0[i], med, vp);
        t[i] = ti;
        q[i] = qi;
    }
    ControlU {
        u0: t[0] + t[1] + t[2] + t[3],
        u1: k * (t[0] + t[3] - t[1] - t[2]),
        u2: k * (t[0] + t[1] - t[2] - t[3]),
        u3: q[0] - q[1] + q[2] - q[3],
    }
}

/// Total electrical draw: shaft power `ΣQᵢΩᵢ` scaled by drivetrain
/// efficiency, plus idle electronics.
pub fn electrical_power(rotors: &RotorSpeeds, med: &MediumParams, vp: &VehicleParams) -> f64 {
    let kq = torque_coefficient(med, vp);
    let shaft: f64 = rotors.0.iter().map(|w| kq * w * w * w).sum();
    shaft / med.eta_m + med.p_idle
}
