use nalgebra::Vector3;

use super::grid::{Belief, Environment, Voxel, WorldMap};
use super::line::line_voxels;
use crate::error::{Error, Result};

/// Spherical ray-array sensor configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorParams {
    /// Angular lattice resolution, degrees.
    pub ang_res_deg: f64,
    /// Sensing radius, meters.
    pub radius: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        SensorParams {
            ang_res_deg: 45.0,
            radius: 5.0,
        }
    }
}

impl SensorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ang_res_deg > 0.0 && self.ang_res_deg <= 90.0) {
            return Err(Error::InvalidParameter(format!(
                "angular resolution {} must be in (0, 90] degrees",
                self.ang_res_deg
            )));
        }
        if self.radius <= 0.0 || !self.radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sensor radius {} must be positive",
                self.radius
            )));
        }
        Ok(())
    }
}

/// One sensing pass: voxels observed with their true occupancy, in
/// deterministic first-seen order across the ray sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorReading {
    pub observations: Vec<(Voxel, bool)>,
}

impl SensorReading {
    /// All sensed voxels regardless of occupancy.
    pub fn sensed(&self) -> impl Iterator<Item = Voxel> + '_ {
        self.observations.iter().map(|(v, _)| *v)
    }
}

/// Cast the spherical ray array from `pos` against the ground truth.
///
/// Rays leave `pos` on an even angular lattice: azimuths `0, a, 2a, ...`
/// below 360 degrees and elevations from -90 to +90 in the same step,
/// with the two poles collapsed to a single ray each. Each ray reports
/// the free voxels it traverses and the first occupied voxel, then stops:
/// nothing behind an obstacle is observed. A ray is also cut where it
/// crosses the water surface and never reports voxels whose center lies
/// in the other medium, so a sensor in air observes only air voxels and
/// vice versa. Rays are clipped to the grid box.
pub fn sense(env: &Environment, pos: &Vector3<f64>, params: &SensorParams) -> Result<SensorReading> {
    params.validate()?;
    if !env.grid.contains_point(pos) {
        return Err(Error::OutOfBounds(pos.x, pos.y, pos.z));
    }
    let sensor_medium = env.water.medium_at(pos.z);

    let step = params.ang_res_deg.to_radians();
    let mut dirs: Vec<Vector3<f64>> = Vec::new();
    let n_elev = (180.0 / params.ang_res_deg).floor() as i64;
    for i in 0..=n_elev {
        let elev = -std::f64::consts::FRAC_PI_2 + i as f64 * step;
        let at_pole = (elev.abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-12;
        let mut az = 0.0f64;
        loop {
            dirs.push(Vector3::new(
                elev.cos() * az.cos(),
                elev.cos() * az.sin(),
                elev.sin(),
            ));
            if at_pole {
                break; // both poles are a single ray
            }
            az += step;
            if az >= 2.0 * std::f64::consts::PI - 1e-12 {
                break;
            }
        }
    }

    let extent = env.grid.extent();
    let mut seen = std::collections::HashSet::new();
    let mut observations = Vec::new();
    for dir in dirs {
        // Clip the ray parameter to the grid box...
        let mut t_max = 1.0f64;
        let full = params.radius;
        for a in 0..3 {
            let d = dir[a] * full;
            if d > 0.0 {
                t_max = t_max.min((extent[a] - pos[a]) / d);
            } else if d < 0.0 {
                t_max = t_max.min((0.0 - pos[a]) / d);
            }
        }
        // ...and at the water surface crossing.
        let dz = dir.z * full;
        if dz != 0.0 {
            let t_surface = (env.water.level - pos.z) / dz;
            if t_surface > 0.0 {
                t_max = t_max.min(t_surface);
            }
        }
        if t_max < 0.0 {
            continue;
        }
        let mut end = pos + dir * (full * t_max);
        for a in 0..3 {
            // The clip solves for the box face exactly; rounding can land
            // the endpoint a few ulps outside, so pull it back in.
            end[a] = end[a].clamp(0.0, extent[a] - 1e-9);
        }
        for v in line_voxels(&env.grid, pos, &end)? {
            if env.medium_of(v) != sensor_medium {
                continue;
            }
            let occupied = env.occupied(v)?;
            if seen.insert(v) {
                observations.push((v, occupied));
            }
            if occupied {
                break;
            }
        }
    }
    Ok(SensorReading { observations })
}

/// Fold a reading into the belief map. Assumed cells are promoted to the
/// observed confirmed state; confirmed cells are never demoted. Returns
/// the voxels whose belief changed, in observation order.
pub fn apply_reading(map: &mut WorldMap, reading: &SensorReading) -> Result<Vec<Voxel>> {
    let mut changed = Vec::new();
    for &(v, occupied) in &reading.observations {
        let current = *map.grid.get(v)?;
        if current.is_confirmed() {
            debug_assert_eq!(
                current == Belief::ConfirmedObstacle,
                occupied,
                "sensor contradicted a confirmed cell at {v}"
            );
            continue;
        }
        let target = if occupied {
            Belief::ConfirmedObstacle
        } else {
            Belief::ConfirmedFree
        };
        map.grid.set(v, target)?;
        changed.push(v);
    }
    Ok(changed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxelworld::{Grid3, WaterSurface};

    /// All-free 13^3 environment with distant water so rays stay in air.
    fn open_env() -> Environment {
        let mut grid = Grid3::filled([13, 13, 13], 1.0, false).unwrap();
        for v in grid.voxels().collect::<Vec<_>>() {
            if grid.is_boundary(v) {
                grid.set(v, true).unwrap();
            }
        }
        Environment {
            grid,
            water: WaterSurface::new(0.5),
            seed: 0,
        }
    }

    fn center(env: &Environment) -> Vector3<f64> {
        Voxel::new(6, 6, 6).center(env.grid.resolution())
    }

    #[test]
    fn ray_count_matches_lattice() {
        // 45 degrees: elevations -90..90 give 3 interior rings of 8
        // azimuths plus 2 pole rays = 26 rays.
        let env = open_env();
        let reading = sense(&env, &center(&env), &SensorParams::default()).unwrap();
        assert!(!reading.observations.is_empty());
        // Union over rays equals the reading (definitional, but guards the
        // dedup logic): no duplicates.
        let set: std::collections::HashSet<_> = reading.sensed().collect();
        assert_eq!(set.len(), reading.observations.len());
    }

    #[test]
    fn sensed_voxels_lie_within_radius() {
        let env = open_env();
        let pos = center(&env);
        let params = SensorParams::default();
        let reading = sense(&env, &pos, &params).unwrap();
        // A voxel is reported only if its cube touches a ray segment, so
        // its center is at most half a cube diagonal beyond the radius.
        let slack = 3f64.sqrt() / 2.0 + 1e-9;
        for v in reading.sensed() {
            let d = (v.center(1.0) - pos).norm();
            assert!(d <= params.radius + slack, "voxel {v} at {d} m");
        }
    }

    #[test]
    fn coverage_density_decreases_with_range() {
        let env = open_env();
        let pos = center(&env);
        let reading = sense(&env, &pos, &SensorParams::default()).unwrap();
        let sensed: std::collections::HashSet<_> = reading.sensed().collect();
        // Fraction of each voxel shell covered by the fixed ray count
        // drops with range.
        let mut frac = Vec::new();
        for shell in 1..=4i32 {
            let (mut total, mut hit) = (0usize, 0usize);
            for v in env.grid.voxels() {
                let d = v.delta(&Voxel::new(6, 6, 6));
                if d.0.abs().max(d.1.abs()).max(d.2.abs()) == shell {
                    total += 1;
                    if sensed.contains(&v) {
                        hit += 1;
                    }
                }
            }
            frac.push(hit as f64 / total as f64);
        }
        assert_eq!(frac[0], 1.0, "the 3x3x3 shell around the sensor: {frac:?}");
        assert!(frac[3] < frac[0], "density must fall with range: {frac:?}");
    }

    #[test]
    fn obstacles_occlude() {
        let mut env = open_env();
        // Wall of rock across x = 8 (one voxel thick), sensor at x = 6.5.
        for y in 1..12 {
            for h in 1..12 {
                env.grid.set(Voxel::new(8, y, h), true).unwrap();
            }
        }
        let reading = sense(&env, &center(&env), &SensorParams::default()).unwrap();
        for (v, occ) in &reading.observations {
            assert!(v.x <= 8, "voxel {v} behind the wall was sensed");
            if v.x == 8 {
                assert!(*occ, "wall voxel {v} must be reported occupied");
            }
        }
        assert!(reading.observations.iter().any(|(v, _)| v.x == 8));
    }

    #[test]
    fn never_reports_across_water_surface() {
        let mut env = open_env();
        env.water = WaterSurface::new(6.0); // between voxel rows 5 and 6
        let params = SensorParams::default();

        // Sensor in air, just above the surface.
        let air_pos = Vector3::new(6.5, 6.5, 6.5);
        let reading = sense(&env, &air_pos, &params).unwrap();
        assert!(!reading.observations.is_empty());
        for v in reading.sensed() {
            assert!(v.h >= 6, "air sensor saw water voxel {v}");
        }

        // Sensor in water, just below the surface.
        let water_pos = Vector3::new(6.5, 6.5, 5.5);
        let reading = sense(&env, &water_pos, &params).unwrap();
        assert!(!reading.observations.is_empty());
        for v in reading.sensed() {
            assert!(v.h <= 5, "water sensor saw air voxel {v}");
        }
    }

    #[test]
    fn observations_match_truth() {
        let params = crate::voxelworld::CaveParams {
            n_bores: 3,
            n_min: 4,
            l_bore: 1.5,
            r_bore: 1.5,
            ..Default::default()
        };
        let env = generate_cave([20, 20, 10], 1.0, 4, &params).unwrap();
        let pos = env
            .free_voxels()
            .next()
            .expect("cave has free voxels")
            .center(1.0);
        let reading = sense(&env, &pos, &SensorParams::default()).unwrap();
        for (v, occ) in &reading.observations {
            assert_eq!(*occ, env.occupied(*v).unwrap(), "at {v}");
        }
    }

    use crate::voxelworld::cave::generate_cave;

    #[test]
    fn apply_reading_promotes_and_is_idempotent() {
        let env = open_env();
        let mut map = crate::voxelworld::initial_map(&env, 3).unwrap();
        let reading = sense(&env, &center(&env), &SensorParams::default()).unwrap();

        let changed = apply_reading(&mut map, &reading).unwrap();
        assert!(!changed.is_empty());
        for v in &changed {
            assert!(map.belief(*v).unwrap().is_confirmed());
        }
        // Every observation is now confirmed, matching truth.
        for (v, occ) in &reading.observations {
            let b = map.belief(*v).unwrap();
            assert_eq!(b.is_obstacle(), *occ);
            assert!(b.is_confirmed());
        }
        // Re-applying the same reading changes nothing.
        let changed2 = apply_reading(&mut map, &reading).unwrap();
        assert!(changed2.is_empty());
    }

    #[test]
    fn rejects_bad_params() {
        let env = open_env();
        let p = SensorParams {
            ang_res_deg: 0.0,
            radius: 5.0,
        };
        assert!(sense(&env, &center(&env), &p).is_err());
        let q = SensorParams {
            ang_res_deg: 45.0,
            radius: -1.0,
        };
        assert!(sense(&env, &center(&env), &q).is_err());
        let far = Vector3::new(99.0, 0.0, 0.0);
        assert!(sense(&env, &far, &SensorParams::default()).is_err());
    }
}
