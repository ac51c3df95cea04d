//! Grid files: a little-endian binary container for environments and
//! belief maps.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic "AMPHVOX1"
//! 8       1     kind: 0 = environment (binary cells), 1 = belief map
//! 9       3*4   dims: nx, ny, nh (u32)
//! 21      8     resolution (f64 bits)
//! 29      8     water level (f64 bits)
//! 37      8     seed (u64)
//! 45      4+4   map only: plane_yz (i32), plane_xy (i32)
//! ..      4     run count (u32)
//! ..      5*n   runs: value (u8), length (u32); cells x-fastest, then y, then h
//! ```
//!
//! Environment cell values: 0 free, 1 occupied. Map cell values: 0
//! assumed-free, 1 assumed-obstacle, 2 confirmed-free, 3
//! confirmed-obstacle.

use std::io::{Read, Write};
use std::path::Path;

use super::grid::{Belief, Environment, Grid3, WorldMap};
use super::WaterSurface;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"AMPHVOX1";

fn encode_runs(bytes: impl Iterator<Item = u8>) -> Vec<(u8, u32)> {
    let mut runs: Vec<(u8, u32)> = Vec::new();
    for b in bytes {
        match runs.last_mut() {
            Some((v, n)) if *v == b && *n < u32::MAX => *n += 1,
            _ => runs.push((b, 1)),
        }
    }
    runs
}

struct Header {
    kind: u8,
    dims: [usize; 3],
    resolution: f64,
    water: f64,
    seed: u64,
}

fn write_common(w: &mut impl Write, h: &Header) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[h.kind])?;
    for d in h.dims {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    w.write_all(&h.resolution.to_le_bytes())?;
    w.write_all(&h.water.to_le_bytes())?;
    w.write_all(&h.seed.to_le_bytes())?;
    Ok(())
}

fn write_runs(w: &mut impl Write, runs: &[(u8, u32)]) -> Result<()> {
    w.write_all(&(runs.len() as u32).to_le_bytes())?;
    for &(v, n) in runs {
        w.write_all(&[v])?;
        w.write_all(&n.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::format("grid", format!("truncated: {e}")))?;
    Ok(buf)
}

fn read_common(r: &mut impl Read) -> Result<Header> {
    let magic: [u8; 8] = read_exact(r)?;
    if &magic != MAGIC {
        return Err(Error::format("grid", "bad magic"));
    }
    let kind = read_exact::<1>(r)?[0];
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = u32::from_le_bytes(read_exact(r)?) as usize;
    }
    let resolution = f64::from_le_bytes(read_exact(r)?);
    let water = f64::from_le_bytes(read_exact(r)?);
    let seed = u64::from_le_bytes(read_exact(r)?);
    Ok(Header {
        kind,
        dims,
        resolution,
        water,
        seed,
    })
}

fn read_cells(r: &mut impl Read, expected: usize) -> Result<Vec<u8>> {
    let n_runs = u32::from_le_bytes(read_exact(r)?) as usize;
    let mut cells = Vec::with_capacity(expected);
    for _ in 0..n_runs {
        let v = read_exact::<1>(r)?[0];
        let n = u32::from_le_bytes(read_exact(r)?) as usize;
        cells.extend(std::iter::repeat_n(v, n));
        if cells.len() > expected {
            return Err(Error::format("grid", "runs exceed cell count"));
        }
    }
    if cells.len() != expected {
        return Err(Error::format(
            "grid",
            format!("runs cover {} of {expected} cells", cells.len()),
        ));
    }
    Ok(cells)
}

impl Environment {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_common(
            &mut w,
            &Header {
                kind: 0,
                dims: self.grid.dims(),
                resolution: self.grid.resolution(),
                water: self.water.level,
                seed: self.seed,
            },
        )?;
        let runs = encode_runs(self.grid.cells().iter().map(|&b| b as u8));
        write_runs(&mut w, &runs)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let h = read_common(&mut r)?;
        if h.kind != 0 {
            return Err(Error::format("grid", "expected an environment file"));
        }
        let cells = read_cells(&mut r, h.dims[0] * h.dims[1] * h.dims[2])?;
        let cells: Result<Vec<bool>> = cells
            .into_iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                v => Err(Error::format("grid", format!("bad cell value {v}"))),
            })
            .collect();
        Ok(Environment {
            grid: Grid3::from_cells(h.dims, h.resolution, cells?)?,
            water: WaterSurface::new(h.water),
            seed: h.seed,
        })
    }
}

impl WorldMap {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_common(
            &mut w,
            &Header {
                kind: 1,
                dims: self.grid.dims(),
                resolution: self.grid.resolution(),
                water: self.water.level,
                seed: self.seed,
            },
        )?;
        w.write_all(&self.plane_yz.to_le_bytes())?;
        w.write_all(&self.plane_xy.to_le_bytes())?;
        let runs = encode_runs(self.grid.cells().iter().map(|&b| b as u8));
        write_runs(&mut w, &runs)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let h = read_common(&mut r)?;
        if h.kind != 1 {
            return Err(Error::format("grid", "expected a map file"));
        }
        let plane_yz = i32::from_le_bytes(read_exact(&mut r)?);
        let plane_xy = i32::from_le_bytes(read_exact(&mut r)?);
        let cells = read_cells(&mut r, h.dims[0] * h.dims[1] * h.dims[2])?;
        let cells: Result<Vec<Belief>> = cells
            .into_iter()
            .map(|b| {
                Belief::from_byte(b).ok_or_else(|| Error::format("grid", format!("bad belief {b}")))
            })
            .collect();
        Ok(WorldMap {
            grid: Grid3::from_cells(h.dims, h.resolution, cells?)?,
            water: WaterSurface::new(h.water),
            seed: h.seed,
            plane_yz,
            plane_xy,
        })
    }
}
