use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::grid::{Belief, Environment, Grid3, WorldMap};
use super::perlin::PerlinField;
use super::WaterSurface;
use crate::error::{Error, Result};

/// Parameters of the bore-walk cave generator.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaveParams {
    /// Number of accepted bores.
    pub n_bores: usize,
    /// A bore is accepted only with strictly more than this many segments.
    pub n_min: usize,
    /// Maximum number of segments per bore.
    pub n_max: usize,
    /// Segment length, meters.
    pub l_bore: f64,
    /// Carving radius around each bore point, meters.
    pub r_bore: f64,
    /// Spatial frequency applied to the steering noise fields.
    pub noise_scale: f64,
    /// Bore attempts allowed per requested bore before giving up.
    pub retry_budget: usize,
}

impl Default for CaveParams {
    fn default() -> Self {
        CaveParams {
            n_bores: 6,
            n_min: 10,
            n_max: 40,
            l_bore: 3.0,
            r_bore: 2.0,
            noise_scale: 0.08,
            retry_budget: 200,
        }
    }
}

impl CaveParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_bores == 0 {
            return Err(Error::InvalidParameter("n_bores must be positive".into()));
        }
        if self.n_min >= self.n_max {
            return Err(Error::InvalidParameter(format!(
                "n_min {} must be below n_max {}",
                self.n_min, self.n_max
            )));
        }
        for (name, v) in [
            ("l_bore", self.l_bore),
            ("r_bore", self.r_bore),
            ("noise_scale", self.noise_scale),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Carve a cave system into a grid of solid rock.
///
/// Each bore starts at a random interior point and walks in steps of
/// `l_bore`; two noise fields steer it, one encoding the polar angle over
/// a range of pi (full vertical freedom) and one the azimuth over a range
/// of 1.1 pi centered on +x, so bores rarely fold back and tend to cross
/// the environment along x. A walk ends when it leaves the interior or
/// reaches `n_max` segments, and is accepted when it has strictly more
/// than `n_min` segments; rejected walks are retried with a fresh start
/// until `n_bores` are accepted or the retry budget runs out. Voxels whose
/// center lies within `r_bore` of any accepted bore point become free; the
/// outer boundary shell always stays solid. The water surface sits at
/// exactly half the grid height.
pub fn generate_cave(
    dims: [usize; 3],
    resolution: f64,
    seed: u64,
    params: &CaveParams,
) -> Result<Environment> {
    params.validate()?;
    let mut grid = Grid3::filled(dims, resolution, true)?;

    // Interior box in world coordinates (strictly inside the wall shell).
    let lo = [resolution, resolution, resolution];
    let hi = [
        (dims[0] as f64 - 1.0) * resolution,
        (dims[1] as f64 - 1.0) * resolution,
        (dims[2] as f64 - 1.0) * resolution,
    ];
    if lo.iter().zip(&hi).any(|(l, h)| l >= h) {
        return Err(Error::InvalidParameter(format!(
            "grid {dims:?} has no interior to bore through"
        )));
    }

    let theta_field = PerlinField::new(seed ^ 0x9e37_79b9_7f4a_7c15);
    let phi_field = PerlinField::new(seed ^ 0xc2b2_ae3d_27d4_eb4f);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut accepted: Vec<Vector3<f64>> = Vec::new();
    let mut bores = 0usize;
    let mut attempts = 0usize;
    let budget = params.retry_budget.saturating_mul(params.n_bores);
    while bores < params.n_bores {
        if attempts >= budget {
            return Err(Error::GenerationFailed { attempts });
        }
        attempts += 1;
        let start = Vector3::new(
            rng.random_range(lo[0]..hi[0]),
            rng.random_range(lo[1]..hi[1]),
            rng.random_range(lo[2]..hi[2]),
        );
        let mut walk = vec![start];
        let mut p = start;
        for _ in 0..params.n_max {
            let q = p * params.noise_scale;
            // Polar angle from +h over [0, pi]; azimuth from +x over
            // [-0.55 pi, +0.55 pi].
            let theta = (theta_field.sample(&q) + 1.0) * 0.5 * std::f64::consts::PI;
            let phi = ((phi_field.sample(&q) + 1.0) * 0.5 - 0.5) * 1.1 * std::f64::consts::PI;
            let dir = Vector3::new(
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            );
            let next = p + params.l_bore * dir;
            let inside = (0..3).all(|a| next[a] > lo[a] && next[a] < hi[a]);
            if !inside {
                break;
            }
            walk.push(next);
            p = next;
        }
        if walk.len() - 1 > params.n_min {
            accepted.extend_from_slice(&walk);
            bores += 1;
        }
    }

    let r2 = params.r_bore * params.r_bore;
    let all = grid.voxels().collect::<Vec<_>>();
    for v in all {
        if grid.is_boundary(v) {
            continue;
        }
        let c = v.center(resolution);
        if accepted.iter().any(|p| (c - p).norm_squared() <= r2) {
            grid.set(v, false)?;
        }
    }

    let water = WaterSurface::new(dims[2] as f64 * resolution / 2.0);
    Ok(Environment { grid, water, seed })
}

/// Build the a-priori belief map for an environment.
///
/// Truth is copied as assumed states (occupied -> assumed obstacle, free
/// -> assumed free), except the outer wall shell, which is known a priori
/// and marked confirmed-obstacle. Two planes drawn from `seed` — one y-z
/// plane at a random interior x index and one x-y plane at a random
/// interior h index — are then marked assumed-free regardless of the
/// truth beneath them, which is what makes the map optimistic and forces
/// replanning when sensing contradicts it.
pub fn initial_map(env: &Environment, seed: u64) -> Result<WorldMap> {
    let dims = env.grid.dims();
    let res = env.grid.resolution();
    let mut grid = Grid3::filled(dims, res, Belief::AssumedFree)?;
    for v in grid.voxels().collect::<Vec<_>>() {
        let belief = if grid.is_boundary(v) {
            Belief::ConfirmedObstacle
        } else if *env.grid.get(v)? {
            Belief::AssumedObstacle
        } else {
            Belief::AssumedFree
        };
        grid.set(v, belief)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plane_yz = rng.random_range(1..dims[0] as i32 - 1);
    let plane_xy = rng.random_range(1..dims[2] as i32 - 1);
    for v in grid.voxels().collect::<Vec<_>>() {
        if grid.is_boundary(v) {
            continue;
        }
        if v.x == plane_yz || v.h == plane_xy {
            grid.set(v, Belief::AssumedFree)?;
        }
    }

    Ok(WorldMap {
        grid,
        water: env.water,
        seed,
        plane_yz,
        plane_xy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxelworld::Voxel;

    fn small_cave() -> Environment {
        generate_cave([40, 40, 20], 1.0, 11, &CaveParams::default()).unwrap()
    }

    #[test]
    fn water_level_is_half_height() {
        let env = small_cave();
        assert_eq!(env.water.level, 10.0);
        let short = CaveParams {
            l_bore: 1.0,
            n_min: 4,
            ..CaveParams::default()
        };
        let env2 = generate_cave([30, 20, 21], 0.5, 3, &short).unwrap();
        assert_eq!(env2.water.level, 21.0 * 0.5 / 2.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = small_cave();
        let b = small_cave();
        assert_eq!(a, b);
        let c = generate_cave([40, 40, 20], 1.0, 12, &CaveParams::default()).unwrap();
        assert_ne!(a.grid, c.grid);
    }

    #[test]
    fn walls_solid_and_interior_carved() {
        let env = small_cave();
        let free: Vec<Voxel> = env.free_voxels().collect();
        assert!(!free.is_empty(), "cave carved nothing");
        for v in env.grid.voxels() {
            if env.grid.is_boundary(v) {
                assert!(env.occupied(v).unwrap(), "boundary voxel {v} must be wall");
            }
        }
    }

    #[test]
    fn free_voxels_are_26_connected_per_bore_tube() {
        // Every free voxel must touch at least one other free voxel: bores
        // carve tubes of radius 2 with overlapping balls, so isolated free
        // voxels would indicate a carving bug.
        let env = small_cave();
        let free: std::collections::HashSet<Voxel> = env.free_voxels().collect();
        for v in &free {
            let mut neighbors = 0;
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dh in -1..=1 {
                        if (dx, dy, dh) == (0, 0, 0) {
                            continue;
                        }
                        if free.contains(&Voxel::new(v.x + dx, v.y + dy, v.h + dh)) {
                            neighbors += 1;
                        }
                    }
                }
            }
            assert!(neighbors > 0, "isolated free voxel {v}");
        }
    }

    #[test]
    fn generation_failure_reports_budget() {
        // A tiny interior cannot host bores with more than 10 segments of
        // length 3, so every attempt is rejected.
        let params = CaveParams {
            retry_budget: 3,
            ..CaveParams::default()
        };
        match generate_cave([5, 5, 5], 1.0, 1, &params) {
            Err(Error::GenerationFailed { attempts }) => assert_eq!(attempts, 18),
            other => panic!("expected generation failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = CaveParams::default();
        p.n_min = 40;
        assert!(p.validate().is_err());
        let mut q = CaveParams::default();
        q.r_bore = 0.0;
        assert!(q.validate().is_err());
    }

    #[test]
    fn map_copies_truth_and_adds_free_planes() {
        let env = small_cave();
        let map = initial_map(&env, 99).unwrap();
        assert_eq!(map.water, env.water);
        let dims = env.grid.dims();
        assert!(map.plane_yz >= 1 && (map.plane_yz as usize) < dims[0] - 1);
        assert!(map.plane_xy >= 1 && (map.plane_xy as usize) < dims[2] - 1);

        let mut plane_discrepancies = 0usize;
        for v in map.grid.voxels() {
            let belief = map.belief(v).unwrap();
            let truth = env.occupied(v).unwrap();
            if map.grid.is_boundary(v) {
                assert_eq!(belief, Belief::ConfirmedObstacle);
                continue;
            }
            assert!(!belief.is_confirmed(), "interior must start assumed: {v}");
            if v.x == map.plane_yz || v.h == map.plane_xy {
                assert_eq!(belief, Belief::AssumedFree);
                if truth {
                    plane_discrepancies += 1;
                }
            } else {
                assert_eq!(belief.is_obstacle(), truth, "belief/truth mismatch at {v}");
            }
        }
        // The planes cut through rock somewhere in any real cave.
        assert!(plane_discrepancies > 0, "expected optimistic plane cells");
    }

    #[test]
    fn map_plane_draw_is_seeded() {
        let env = small_cave();
        let a = initial_map(&env, 5).unwrap();
        let b = initial_map(&env, 5).unwrap();
        assert_eq!(a, b);
    }
}
