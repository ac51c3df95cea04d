//! Trajectory generation and the layered flight controller.
//!
//! [`spline`] turns node triples from the planner into smooth
//! minimum-arc-length polynomial trajectories; [`controller`] tracks them
//! with a positional PD layer that commands an attitude and thrust, an
//! attitude PD layer that commands body moments, and the rotor mixer.

mod controller;
mod spline;

pub use controller::{
    attitude_moments, control_step, ControllerGains, DesiredAttitude, PositionController,
};
pub use spline::{
    arc_cost, arrival_times, build_spline, build_spline_opts, eval_spline, node_velocities,
    SplineOptions, TrajectorySegment,
};
