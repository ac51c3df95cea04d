//! Simulation and motion-planning toolkit for an amphibious quadrotor
//! operating in partially known, water-filled voxel caves.
//!
//! The crate is organized as a pipeline:
//!
//! * [`voxelworld`] — voxel environments, procedural cave generation,
//!   belief maps, and an occlusion-aware ray sensor.
//! * [`vehicle`] — quaternion 6-DOF rigid-body dynamics with
//!   medium-dependent (air/water) parameters and a rotor/power model.
//! * [`control`] — two-interval polynomial trajectories between graph
//!   nodes plus the layered position/attitude controllers that track them.
//! * [`costtable`] — stop-stop maneuver energy tables measured by
//!   simulation, used as edge weights by the planner.
//! * [`planner`] — probabilistic roadmap construction over belief maps
//!   and incremental D*-Lite replanning with soft pricing of
//!   assumed-blocked edges.
//! * [`mission`] — the online sense/replan/fly loop.
//! * [`bench`] — Monte Carlo experiment harness and statistics.
//!
//! Two coordinate conventions coexist deliberately. World space (grids,
//! planner, mission I/O) uses `(x, y, h)` with `h` the height above the
//! grid floor. The flight stack (vehicle, control) uses a right-handed
//! inertial frame with the third axis pointing *down*, so gravity is
//! `(0, 0, +9.81)` and hover thrust points along `-z`. The two are
//! related by `z = -h`; conversion happens only at the mission and
//! cost-table boundaries.

pub mod bench;
pub mod config;
pub mod control;
pub mod costtable;
pub mod error;
pub mod mission;
pub mod planner;
pub mod vehicle;
pub mod voxelworld;

pub use error::{Error, Result};
