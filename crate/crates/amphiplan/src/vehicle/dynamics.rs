//! Medium-dependent 6-DOF rigid-body dynamics and RK4 integration.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::vehicle::params::{MediumParams, VehicleParams, GRAVITY};
use crate::vehicle::quat::{quat_derivative, quat_normalize, quat_rotate, Quat};
use crate::vehicle::rotor::{electrical_power, unmix, RotorSpeeds};

/// Full vehicle state in the z-down inertial frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VehicleState {
    /// Inertial position, m.
    pub position: Vector3<f64>,
    /// Inertial velocity, m/s.
    pub velocity: Vector3<f64>,
    /// Unit attitude quaternion, body → inertial, scalar-first.
    pub attitude: Quat,
    /// Body angular rates (p, q, r), rad/s.
    pub omega: Vector3<f64>,
    /// Electrical energy consumed since start, J.
    pub energy: f64,
    /// Simulation time, s.
    pub time: f64,
}

impl VehicleState {
    /// Level, motionless state at a position with zero consumed energy.
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            attitude: Quat::identity(),
            omega: Vector3::zeros(),
            energy: 0.0,
            time: 0.0,
        }
    }

    fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.attitude.coords.iter().all(|v| v.is_finite())
            && self.omega.iter().all(|v| v.is_finite())
            && self.energy.is_finite()
            && self.time.is_finite()
    }
}

/// Time derivative of the dynamic part of [`VehicleState`].
#[derive(Clone, Copy, Debug)]
pub struct StateDerivative {
    pub dposition: Vector3<f64>,
    pub dvelocity: Vector3<f64>,
    pub dattitude: Quat,
    pub domega: Vector3<f64>,
}

/// Rigid-body equations of motion under held rotor speeds.
///
/// * Translation: `m·v̇ = R(q)·(0,0,−ΣTᵢ) + b·m·g − R(q)·(½ρ·CDA·|v_B|∘v_B)`
///   with quadratic flat-plate drag evaluated on the body-frame velocity and
///   rotated back; gravity is `(0,0,+g)` and buoyancy scales it by `b`.
/// * Rotation: `J·ω̇ = (U1,U2,U3) − ω×(Jω) − D_w·ω`.
/// * Kinematics: `ṗ = v`, `q̇ = ½ q ⊗ [0, ω]`.
///
/// One code path covers both media; only the parameters differ.
pub fn dynamics_derivative(
    s: &VehicleState,
    rotors: &RotorSpeeds,
    med: &MediumParams,
    vp: &VehicleParams,
) -> StateDerivative {
    let u = unmix(rotors, med, vp);
    let q = &s.attitude;

    let thrust_body = Vector3::new(0.0, 0.0, -u.u0);
    let thrust_inertial = quat_rotate(q, &thrust_body);

    let v_body = quat_rotate(&q.conjugate(), &s.velocity);
    let drag_body = Vector3::new(
        -0.5 * med.rho * med.cda[0] * v_body.x.abs() * v_body.x,
        -0.5 * med.rho * med.cda[1] * v_body.y.abs() * v_body.y,
        -0.5 * med.rho * med.cda[2] * v_body.z.abs() * v_body.z,
    );
    let drag_inertial = quat_rotate(q, &drag_body);

    let gravity = Vector3::new(0.0, 0.0, med.buoyancy * GRAVITY);
    let dvelocity = (thrust_inertial + drag_inertial) / vp.mass + gravity;

    let j = Vector3::from(vp.inertia);
    let j_omega = j.component_mul(&s.omega);
    let moment = Vector3::new(u.u1, u.u2, u.u3);
    let damping = Vector3::from(med.d_w).component_mul(&s.omega);
    let domega = (moment - s.omega.cross(&j_omega) - damping).component_div(&j);

    StateDerivative {
        dposition: s.velocity,
        dvelocity,
        dattitude: quat_derivative(q, &s.omega),
        domega,
    }
}

fn advance(s: &VehicleState, d: &StateDerivative, h: f64) -> VehicleState {
    VehicleState {
        position: s.position + d.dposition * h,
        velocity: s.velocity + d.dvelocity * h,
        attitude: s.attitude + d.dattitude * h,
        omega: s.omega + d.domega * h,
        energy: s.energy,
        time: s.time,
    }
}

/// One classical RK4 step of length `dt` with rotor speeds held constant.
///
/// The attitude quaternion is renormalized after the step; the electrical
/// energy integral advances by `P·dt` (exact for held speeds, since the
/// power draw is constant over the step). A state that leaves the realm of
/// finite numbers, or a quaternion that drifts grossly off the unit sphere,
/// aborts with a numeric-failure error rather than propagating garbage.
pub fn step_rk4(
    s: &VehicleState,
    rotors: &RotorSpeeds,
    med: &MediumParams,
    vp: &VehicleParams,
    dt: f64,
) -> Result<VehicleState> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "integration step must be positive, got {dt}"
        )));
    }
    let k1 = dynamics_derivative(s, rotors, med, vp);
    let k2 = dynamics_derivative(&advance(s, &k1, dt / 2.0), rotors, med, vp);
    let k3 = dynamics_derivative(&advance(s, &k2, dt / 2.0), rotors, med, vp);
    let k4 = dynamics_derivative(&advance(s, &k3, dt), rotors, med, vp);

    let sixth = dt / 6.0;
    let mut next = VehicleState {
        position: s.position
            + (k1.dposition + 2.0 * (k2.dposition + k3.dposition) + k4.dposition) * sixth,
        velocity: s.velocity
            + (k1.dvelocity + 2.0 * (k2.dvelocity + k3.dvelocity) + k4.dvelocity) * sixth,
        attitude: s.attitude
            + (k1.dattitude + (k2.dattitude + k3.dattitude) * 2.0 + k4.dattitude) * sixth,
        omega: s.omega + (k1.domega + 2.0 * (k2.domega + k3.domega) + k4.domega) * sixth,
        energy: s.energy + electrical_power(rotors, med, vp) * dt,
        time: s.time + dt,
    };

    if !next.is_finite() {
        return Err(Error::NumericFailure(format!(
            "state became non-finite at t = {:.3} s",
            next.time
        )));
    }
    let norm = next.attitude.norm();
    if (norm - 1.0).abs() > 1e-3 {
        return Err(Error::NumericFailure(format!(
            "attitude quaternion norm drifted to {norm} at t = {:.3} s",
            next.time
        )));
    }
    next.attitude = quat_normalize(&next.attitude);
    Ok(next)
}
