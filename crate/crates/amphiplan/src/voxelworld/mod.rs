//! Voxel environments, belief maps, procedural caves, and the ray sensor.
//!
//! A grid of `dims = [nx, ny, nh]` voxels with resolution `res` covers the
//! closed world-space box `[0, nx*res] x [0, ny*res] x [0, nh*res)`; voxel
//! `(i, j, k)` is the closed cube `[i*res, (i+1)*res] x ...` with center at
//! `((i+0.5)*res, (j+0.5)*res, (k+0.5)*res)`. The third coordinate `h` is
//! height above the grid floor. Cubes are closed, so a segment that passes
//! through a shared face, edge, or corner touches every voxel sharing it.

mod cave;
mod grid;
mod io;
mod line;
mod perlin;
mod sensor;

pub use cave::{generate_cave, initial_map, CaveParams};
pub use grid::{Belief, Environment, Grid3, Voxel, WorldMap};
pub use line::{classify_edge, line_voxels, EdgeClass};
pub use perlin::{perlin3, PerlinField};
pub use sensor::{apply_reading, sense, SensorParams, SensorReading};

/// The two media the vehicle can operate in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Medium {
    Air,
    Water,
}

impl std::fmt::Display for Medium {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Medium::Air => write!(f, "air"),
            Medium::Water => write!(f, "water"),
        }
    }
}

/// Horizontal free surface separating water (below) from air (above).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterSurface {
    /// Height of the surface above the grid floor, meters.
    pub level: f64,
}

impl WaterSurface {
    pub fn new(level: f64) -> Self {
        WaterSurface { level }
    }

    /// Medium at height `h`. A point exactly on the surface counts as air.
    pub fn medium_at(&self, h: f64) -> Medium {
        if h < self.level {
            Medium::Water
        } else {
            Medium::Air
        }
    }
}
