use nalgebra::Vector3;

use super::{Medium, WaterSurface};
use crate::error::{Error, Result};

/// Integer voxel index. Valid indices satisfy `0 <= x < dims[0]` etc.;
/// the signed representation keeps displacement arithmetic painless.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub struct Voxel {
    pub x: i32,
    pub y: i32,
    pub h: i32,
}

impl Voxel {
    pub fn new(x: i32, y: i32, h: i32) -> Self {
        Voxel { x, y, h }
    }

    /// World-space center of this voxel.
    pub fn center(&self, resolution: f64) -> Vector3<f64> {
        Vector3::new(
            (self.x as f64 + 0.5) * resolution,
            (self.y as f64 + 0.5) * resolution,
            (self.h as f64 + 0.5) * resolution,
        )
    }

    /// Component-wise integer displacement `self - other`.
    pub fn delta(&self, other: &Voxel) -> (i32, i32, i32) {
        (self.x - other.x, self.y - other.y, self.h - other.h)
    }
}

impl std::fmt::Display for Voxel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.h)
    }
}

/// Belief state of one map cell. `Assumed*` states come from the a-priori
/// map; sensing promotes them to the matching `Confirmed*` state, and a
/// confirmed cell is never demoted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Belief {
    AssumedFree = 0,
    AssumedObstacle = 1,
    ConfirmedFree = 2,
    ConfirmedObstacle = 3,
}

impl Belief {
    pub fn is_obstacle(&self) -> bool {
        matches!(self, Belief::AssumedObstacle | Belief::ConfirmedObstacle)
    }

    pub fn is_confirmed(&self) -> bool {
        matches!(self, Belief::ConfirmedFree | Belief::ConfirmedObstacle)
    }

    pub(crate) fn from_byte(b: u8) -> Option<Belief> {
        match b {
            0 => Some(Belief::AssumedFree),
            1 => Some(Belief::AssumedObstacle),
            2 => Some(Belief::ConfirmedFree),
            3 => Some(Belief::ConfirmedObstacle),
            _ => None,
        }
    }
}

/// Dense 3-D cell array with a uniform resolution.
///
/// Cells are stored x-fastest, then y, then h; the same order is used by
/// the run-length-encoded grid files.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3<T> {
    dims: [usize; 3],
    resolution: f64,
    cells: Vec<T>,
}

impl<T: Clone> Grid3<T> {
    /// Create a grid filled with `fill`. Requires at least 2 voxels per
    /// axis and a positive resolution.
    pub fn filled(dims: [usize; 3], resolution: f64, fill: T) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidParameter(format!(
                "grid dims {dims:?} must be at least 2 per axis"
            )));
        }
        if resolution <= 0.0 || !resolution.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid resolution {resolution} must be positive and finite"
            )));
        }
        Ok(Grid3 {
            dims,
            resolution,
            cells: vec![fill; dims[0] * dims[1] * dims[2]],
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// World-space extent `[nx*res, ny*res, nh*res]`.
    pub fn extent(&self) -> Vector3<f64> {
        Vector3::new(
            self.dims[0] as f64 * self.resolution,
            self.dims[1] as f64 * self.resolution,
            self.dims[2] as f64 * self.resolution,
        )
    }

    pub fn contains(&self, v: Voxel) -> bool {
        v.x >= 0
            && v.y >= 0
            && v.h >= 0
            && (v.x as usize) < self.dims[0]
            && (v.y as usize) < self.dims[1]
            && (v.h as usize) < self.dims[2]
    }

    /// True when the voxel lies on the outer shell of the grid.
    pub fn is_boundary(&self, v: Voxel) -> bool {
        v.x == 0
            || v.y == 0
            || v.h == 0
            || v.x as usize == self.dims[0] - 1
            || v.y as usize == self.dims[1] - 1
            || v.h as usize == self.dims[2] - 1
    }

    /// True when the world-space point lies inside the closed grid box.
    pub fn contains_point(&self, p: &Vector3<f64>) -> bool {
        let e = self.extent();
        (0.0..=e.x).contains(&p.x) && (0.0..=e.y).contains(&p.y) && (0.0..=e.z).contains(&p.z)
    }

    /// Voxel containing the world-space point. Points exactly on an upper
    /// grid face are assigned to the last voxel.
    pub fn voxel_at(&self, p: &Vector3<f64>) -> Result<Voxel> {
        if !self.contains_point(p) {
            return Err(Error::OutOfBounds(p.x, p.y, p.z));
        }
        let clamp = |c: f64, n: usize| -> i32 {
            let i = (c / self.resolution).floor() as i64;
            i.clamp(0, n as i64 - 1) as i32
        };
        Ok(Voxel::new(
            clamp(p.x, self.dims[0]),
            clamp(p.y, self.dims[1]),
            clamp(p.z, self.dims[2]),
        ))
    }

    fn idx(&self, v: Voxel) -> usize {
        debug_assert!(self.contains(v));
        (v.h as usize * self.dims[1] + v.y as usize) * self.dims[0] + v.x as usize
    }

    pub fn get(&self, v: Voxel) -> Result<&T> {
        if !self.contains(v) {
            return Err(Error::VoxelOutOfBounds(v.x as i64, v.y as i64, v.h as i64));
        }
        Ok(&self.cells[self.idx(v)])
    }

    pub fn set(&mut self, v: Voxel, value: T) -> Result<()> {
        if !self.contains(v) {
            return Err(Error::VoxelOutOfBounds(v.x as i64, v.y as i64, v.h as i64));
        }
        let i = self.idx(v);
        self.cells[i] = value;
        Ok(())
    }

    /// Iterate voxels in storage order (x fastest).
    pub fn voxels(&self) -> impl Iterator<Item = Voxel> + '_ {
        let [nx, ny, nh] = self.dims;
        (0..nh).flat_map(move |h| {
            (0..ny).flat_map(move |y| {
                (0..nx).map(move |x| Voxel::new(x as i32, y as i32, h as i32))
            })
        })
    }

    pub(crate) fn cells(&self) -> &[T] {
        &self.cells
    }


    pub(crate) fn from_cells(dims: [usize; 3], resolution: f64, cells: Vec<T>) -> Result<Self> {
        if cells.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::format(
                "grid",
                format!("cell count {} does not match dims {dims:?}", cells.len()),
            ));
        }
        let mut g = Grid3::filled(dims, resolution, cells[0].clone())?;
        g.cells = cells;
        Ok(g)
    }
}

/// Ground-truth world: binary occupancy plus the water surface.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    /// `true` = occupied rock, `false` = traversable void.
    pub grid: Grid3<bool>,
    pub water: WaterSurface,
    /// Seed the cave generator was run with (kept for provenance).
    pub seed: u64,
}

impl Environment {
    pub fn occupied(&self, v: Voxel) -> Result<bool> {
        self.grid.get(v).copied()
    }

    /// Medium of a voxel, decided by its center height.
    pub fn medium_of(&self, v: Voxel) -> Medium {
        self.water.medium_at(v.center(self.grid.resolution()).z)
    }

    pub fn free_voxels(&self) -> impl Iterator<Item = Voxel> + '_ {
        self.grid.voxels().filter(|&v| !*self.grid.get(v).unwrap())
    }
}

/// Belief world: four-state occupancy plus the water surface.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    pub grid: Grid3<Belief>,
    pub water: WaterSurface,
    /// Seed used to draw the two a-priori free planes.
    pub seed: u64,
    /// x index of the y-z plane assumed free a priori.
    pub plane_yz: i32,
    /// h index of the x-y plane assumed free a priori.
    pub plane_xy: i32,
}

impl WorldMap {
    pub fn belief(&self, v: Voxel) -> Result<Belief> {
        self.grid.get(v).copied()
    }

    /// Medium of a voxel, decided by its center height.
    pub fn medium_of(&self, v: Voxel) -> Medium {
        self.water.medium_at(v.center(self.grid.resolution()).z)
    }

    /// Voxels currently believed traversable (assumed or confirmed free).
    pub fn non_obstacle_voxels(&self) -> impl Iterator<Item = Voxel> + '_ {
        self.grid
            .voxels()
            .filter(|&v| !self.grid.get(v).unwrap().is_obstacle())
    }
}
