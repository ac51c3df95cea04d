//! Layered position → attitude → rotor-mixing flight controller.
//!
//! The positional layer turns a desired trajectory point into a total
//! thrust vector in the inertial frame: PD feedback on position and
//! velocity plus the feed-forward acceleration, with weight (and, under
//! water, hull drag) compensated. The thrust direction defines the
//! desired attitude — the quaternion rotating the body thrust axis
//! `(0,0,−1)` onto it, at zero yaw — and its numerically differentiated
//! direction gives the desired body rates. The attitude layer is a PD law
//! on the error quaternion's vector part and the rate error; the mixer
//! then converts `(U0..U3)` into rotor speeds.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::vehicle::{
    mix, quat_conjugate, quat_error, quat_from_two_vectors, quat_rotate, MediumParams, Quat,
    RotorSpeeds, VehicleParams, VehicleState, GRAVITY, ControlU,
};

/// Minimum upward component of the commanded thrust vector, N. Rotors
/// pull along the body axis but cannot push, so a command at or below
/// the horizon would call for inverted flight and make the attitude
/// target flip by ~180° in one period. Clamping keeps the target in the
/// upper half-space and continuous; any remaining downward acceleration
/// comes from gravity outrunning the thrust.
const MIN_UPWARD_FORCE: f64 = 1.0;

/// Cap on the norm of the desired body-rate feed-forward, rad/s. The
/// differentiated thrust direction can kink when the force vector is
/// short; beyond this the feed-forward is noise, not a rate worth
/// chasing.
const MAX_RATE_FEEDFORWARD: f64 = 10.0;

/// Cap on the norm of the feedback part of the commanded acceleration,
/// m/s². PD feedback grows linearly with the gap, and past a few metres
/// the raw product would demand thrust far beyond the rotors and tilt
/// the craft to the horizon — a saturated, underdamped loop that pumps
/// instead of converging. Bounding the feedback (the trajectory
/// feed-forward passes through untouched) keeps recovery from a large
/// gap a calm, monotone glide.
const MAX_FEEDBACK_ACCEL: f64 = 6.0;

/// PD gains for both controller layers, per axis.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerGains {
    pub kp_pos: [f64; 3],
    pub kd_pos: [f64; 3],
    pub kp_att: [f64; 3],
    pub kd_att: [f64; 3],
}

impl ControllerGains {
    /// Baseline tuning for flight in air: the attitude loop an order of
    /// magnitude faster than the position loop, so the acceleration
    /// feed-forward tracks trajectories near-exactly.
    pub fn air() -> Self {
        Self {
            kp_pos: [4.0; 3],
            kd_pos: [3.0; 3],
            kp_att: [30.0; 3],
            kd_att: [1.5; 3],
        }
    }

    /// Baseline tuning for submerged flight: a softer outer loop (the
    /// large hull drag already damps translation) and a touch more
    /// attitude damping on top of what the water provides.
    pub fn water() -> Self {
        Self {
            kp_pos: [2.0; 3],
            kd_pos: [3.0; 3],
            kp_att: [30.0; 3],
            kd_att: [2.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, arr) in [
            ("kp_pos", &self.kp_pos),
            ("kd_pos", &self.kd_pos),
            ("kp_att", &self.kp_att),
            ("kd_att", &self.kd_att),
        ] {
            if arr.iter().any(|g| !g.is_finite() || *g <= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "controller gain {name} must be positive and finite, got {arr:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Output of the positional layer: the attitude and thrust the inner
/// loop should realize. Yaw is commanded to zero throughout.
#[derive(Clone, Copy, Debug)]
pub struct DesiredAttitude {
    /// Desired body → inertial attitude quaternion.
    pub q_d: Quat,
    /// Desired angular velocity, rad/s.
    pub w_d: Vector3<f64>,
    /// Total thrust magnitude `U0`, N.
    pub u0: f64,
    /// Desired yaw angle, rad.
    pub psi_d: f64,
    /// Desired yaw rate, rad/s.
    pub psi_dot_d: f64,
}

/// Positional control layer. Stateful only through the backward
/// difference that estimates the thrust-vector rate; call
/// [`PositionController::reset`] when retargeting discontinuously.
#[derive(Clone, Debug)]
pub struct PositionController {
    period: f64,
    prev_force: Option<Vector3<f64>>,
}

impl PositionController {
    /// `period` is the interval between successive calls, used by the
    /// thrust-rate differentiator.
    pub fn new(period: f64) -> Self {
        Self {
            period,
            prev_force: None,
        }
    }

    /// Forget differentiator history; the next call behaves like a first.
    pub fn reset(&mut self) {
        self.prev_force = None;
    }

    /// PD position law for flight in air. The commanded acceleration is
    /// `a_d + Kp∘(x_d−x) + Kd∘(v_d−v)`; the inertial thrust vector
    /// compensates weight only — aerodynamic drag is left to feedback.
    pub fn positional_air(
        &mut self,
        s: &VehicleState,
        desired: (&Vector3<f64>, &Vector3<f64>, &Vector3<f64>),
        gains: &ControllerGains,
        vp: &VehicleParams,
    ) -> DesiredAttitude {
        let accel = command_accel(s, desired, gains);
        let force = vp.mass * (accel - Vector3::new(0.0, 0.0, GRAVITY));
        self.finish(&force)
    }

    /// PD position law for submerged flight: like the air law but
    /// compensating the reduced net weight `b·m·g` and feeding forward
    /// the quadratic hull drag at the current attitude and velocity.
    pub fn positional_water(
        &mut self,
        s: &VehicleState,
        desired: (&Vector3<f64>, &Vector3<f64>, &Vector3<f64>),
        gains: &ControllerGains,
        med: &MediumParams,
        vp: &VehicleParams,
    ) -> DesiredAttitude {
        let accel = command_accel(s, desired, gains);
        let v_body = quat_rotate(&quat_conjugate(&s.attitude), &s.velocity);
        let drag_body = Vector3::new(
            -0.5 * med.rho * med.cda[0] * v_body.x.abs() * v_body.x,
            -0.5 * med.rho * med.cda[1] * v_body.y.abs() * v_body.y,
            -0.5 * med.rho * med.cda[2] * v_body.z.abs() * v_body.z,
        );
        let drag = quat_rotate(&s.attitude, &drag_body);
        let force = vp.mass * accel
            - Vector3::new(0.0, 0.0, med.buoyancy * vp.mass * GRAVITY)
            - drag;
        self.finish(&force)
    }

    /// Turn an inertial thrust vector into the desired attitude, rates,
    /// and thrust magnitude.
    fn finish(&mut self, force: &Vector3<f64>) -> DesiredAttitude {
        // z grows downward here, so "upward component at least the
        // minimum" means z at most its negation.
        let force = &Vector3::new(
            force.x,
            force.y,
            force.z.min(-MIN_UPWARD_FORCE),
        );
        let norm = force.norm();
        let f_hat = force / norm;
        let f_dot = match self.prev_force {
            Some(prev) => (force - prev) / self.period,
            None => Vector3::zeros(),
        };
        self.prev_force = Some(*force);
        // d/dt (F/‖F‖), then ω_d = f̂ × f̂̇ (no spin about the thrust axis:
        // yaw is fixed at zero).
        let f_hat_dot = f_dot / norm - force * (force.dot(&f_dot)) / (norm * norm * norm);
        let mut w_d = f_hat.cross(&f_hat_dot);
        let w_norm = w_d.norm();
        if w_norm > MAX_RATE_FEEDFORWARD {
            w_d *= MAX_RATE_FEEDFORWARD / w_norm;
        }
        let q_d = quat_from_two_vectors(&Vector3::new(0.0, 0.0, -1.0), &f_hat);
        DesiredAttitude {
            q_d,
            w_d,
            u0: norm,
            psi_d: 0.0,
            psi_dot_d: 0.0,
        }
    }
}

fn command_accel(
    s: &VehicleState,
    (x_d, v_d, a_d): (&Vector3<f64>, &Vector3<f64>, &Vector3<f64>),
    gains: &ControllerGains,
) -> Vector3<f64> {
    let ep = x_d - s.position;
    let ev = v_d - s.velocity;
    let mut feedback = Vector3::from(gains.kp_pos).component_mul(&ep)
        + Vector3::from(gains.kd_pos).component_mul(&ev);
    let n = feedback.norm();
    if n > MAX_FEEDBACK_ACCEL {
        feedback *= MAX_FEEDBACK_ACCEL / n;
    }
    a_d + feedback
}

/// Attitude PD law: body moments `−Kp∘vec(q_e) − Kd∘(ω − ω_d)` on the
/// sign-normalized error quaternion `q_e = q_d* ⊗ q_m`.
pub fn attitude_moments(
    s: &VehicleState,
    desired: &DesiredAttitude,
    gains: &ControllerGains,
) -> Vector3<f64> {
    let q_e = quat_error(&desired.q_d, &s.attitude);
    let w_e = s.omega - desired.w_d;
    Vector3::new(
        -gains.kp_att[0] * q_e.i - gains.kd_att[0] * w_e.x,
        -gains.kp_att[1] * q_e.j - gains.kd_att[1] * w_e.y,
        -gains.kp_att[2] * q_e.k - gains.kd_att[2] * w_e.z,
    )
}

/// One full control cycle: positional layer (air or water law), attitude
/// layer, mixer. Returns the rotor speeds to hold until the next cycle,
/// the intermediate attitude command, and whether the mixer saturated.
#[allow(clippy::too_many_arguments)]
pub fn control_step(
    s: &VehicleState,
    desired: (&Vector3<f64>, &Vector3<f64>, &Vector3<f64>),
    ctl: &mut PositionController,
    gains: &ControllerGains,
    med: &MediumParams,
    vp: &VehicleParams,
    underwater: bool,
) -> (RotorSpeeds, DesiredAttitude, bool) {
    let att = if underwater {
        ctl.positional_water(s, desired, gains, med, vp)
    } else {
        ctl.positional_air(s, desired, gains, vp)
    };
    let m = attitude_moments(s, &att, gains);
    let (speeds, saturated) = mix(&ControlU::new(att.u0, m.x, m.y, m.z), med, vp);
    (speeds, att, saturated)
}
