use nalgebra::Vector3;

use super::grid::{Grid3, Voxel, WorldMap};
use crate::error::{Error, Result};

/// Blocking classification of a straight edge against a belief map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeClass {
    /// Every traversed voxel is believed free.
    Free,
    /// At least one assumed obstacle, no confirmed obstacle.
    AssumedBlocked,
    /// At least one confirmed obstacle (dominates everything else).
    ConfirmedBlocked,
}

/// All voxels whose closed cube the closed segment `p0 -> p1` touches, in
/// order of first contact along the segment.
///
/// Voxels are closed cubes, so a segment running through a shared face,
/// edge, or corner touches every voxel sharing that feature: between
/// face-adjacent voxel centers it touches 2 voxels, across a planar
/// diagonal 4, across a cube diagonal 8. Both endpoints must lie inside
/// the closed grid box.
pub fn line_voxels<T: Clone>(
    grid: &Grid3<T>,
    p0: &Vector3<f64>,
    p1: &Vector3<f64>,
) -> Result<Vec<Voxel>> {
    for p in [p0, p1] {
        if !grid.contains_point(p) {
            return Err(Error::OutOfBounds(p.x, p.y, p.z));
        }
    }
    let res = grid.resolution();
    let u0 = [p0.x / res, p0.y / res, p0.z / res];
    let u1 = [p1.x / res, p1.y / res, p1.z / res];
    let d = [u1[0] - u0[0], u1[1] - u0[1], u1[2] - u0[2]];

    // Boundary-plane crossings per axis, as (parameter, axis, plane index).
    // A plane crossing at parameter t means the point sits exactly on that
    // integer plane, bordering voxels k-1 and k along that axis.
    let mut events: Vec<(f64, usize, i64)> = Vec::new();
    let mut always_on: [Option<i64>; 3] = [None, None, None];
    for a in 0..3 {
        if d[a] != 0.0 {
            let lo = u0[a].min(u1[a]);
            let hi = u0[a].max(u1[a]);
            let mut k = lo.ceil() as i64;
            while (k as f64) <= hi {
                let t = ((k as f64 - u0[a]) / d[a]).clamp(0.0, 1.0);
                events.push((t, a, k));
                k += 1;
            }
        } else if u0[a].fract() == 0.0 {
            // Segment lies exactly on an integer plane of this axis for its
            // whole length; every sample borders both neighbors.
            always_on[a] = Some(u0[a] as i64);
        }
    }
    events.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));

    // Sample points: every event parameter, the endpoints, and midpoints of
    // consecutive distinct parameters (which are interior to exactly one
    // slab per non-degenerate axis).
    let mut ts: Vec<f64> = vec![0.0, 1.0];
    ts.extend(events.iter().map(|e| e.0));
    ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ts.dedup();
    let mut samples: Vec<f64> = Vec::with_capacity(ts.len() * 2);
    for win in ts.windows(2) {
        samples.push(win[0]);
        samples.push(0.5 * (win[0] + win[1]));
    }
    samples.push(*ts.last().unwrap());

    let dims = grid.dims();
    let mut out: Vec<Voxel> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut event_i = 0;
    for &t in &samples {
        // Planes this exact parameter sits on (exact f64 comparison: the
        // canonical shared-corner cases produce identical parameters, and
        // event parameters are revisited verbatim in `samples`).
        let mut planes: [Option<i64>; 3] = always_on;
        while event_i < events.len() && events[event_i].0 < t {
            event_i += 1;
        }
        let mut j = event_i;
        while j < events.len() && events[j].0 == t {
            planes[events[j].1] = Some(events[j].2);
            j += 1;
        }

        let mut candidates: [[i64; 2]; 3] = [[0, 0]; 3];
        let mut counts: [usize; 3] = [1, 1, 1];
        for a in 0..3 {
            match planes[a] {
                Some(k) => {
                    candidates[a] = [k - 1, k];
                    counts[a] = 2;
                }
                None => {
                    let v = u0[a] + t * d[a];
                    candidates[a] = [v.floor() as i64, 0];
                    counts[a] = 1;
                }
            }
        }
        for ix in 0..counts[0] {
            for iy in 0..counts[1] {
                for ih in 0..counts[2] {
                    let v = Voxel::new(
                        candidates[0][ix] as i32,
                        candidates[1][iy] as i32,
                        candidates[2][ih] as i32,
                    );
                    if candidates[0][ix] >= 0
                        && candidates[1][iy] >= 0
                        && candidates[2][ih] >= 0
                        && (candidates[0][ix] as usize) < dims[0]
                        && (candidates[1][iy] as usize) < dims[1]
                        && (candidates[2][ih] as usize) < dims[2]
                        && seen.insert(v)
                    {
                        out.push(v);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Classify the belief state of the straight edge `a -> b` on the map.
/// A confirmed obstacle anywhere along the edge dominates; otherwise any
/// assumed obstacle makes the edge assumed-blocked.
pub fn classify_edge(map: &WorldMap, a: &Vector3<f64>, b: &Vector3<f64>) -> Result<EdgeClass> {
    let mut class = EdgeClass::Free;
    for v in line_voxels(&map.grid, a, b)? {
        match map.grid.get(v)? {
            super::grid::Belief::ConfirmedObstacle => return Ok(EdgeClass::ConfirmedBlocked),
            super::grid::Belief::AssumedObstacle => class = EdgeClass::AssumedBlocked,
            _ => {}
        }
    }
    Ok(class)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxelworld::{Belief, WaterSurface};

    fn grid() -> Grid3<bool> {
        Grid3::filled([6, 6, 6], 1.0, false).unwrap()
    }

    fn cv(x: i32, y: i32, h: i32) -> Vector3<f64> {
        Voxel::new(x, y, h).center(1.0)
    }

    #[test]
    fn face_edge_and_corner_sharing_counts() {
        let g = grid();
        // Face-adjacent centers: the shared face plane yields both voxels.
        let face = line_voxels(&g, &cv(1, 1, 1), &cv(2, 1, 1)).unwrap();
        assert_eq!(face.len(), 2);
        // Planar diagonal: passes through a shared edge, all 4 sharers.
        let diag2 = line_voxels(&g, &cv(1, 1, 1), &cv(2, 2, 1)).unwrap();
        assert_eq!(diag2.len(), 4);
        // Cube diagonal: passes through a shared corner, all 8 sharers.
        let diag3 = line_voxels(&g, &cv(1, 1, 1), &cv(2, 2, 2)).unwrap();
        assert_eq!(diag3.len(), 8);
        // Degenerate segment in a voxel interior.
        let point = line_voxels(&g, &cv(3, 3, 3), &cv(3, 3, 3)).unwrap();
        assert_eq!(point, vec![Voxel::new(3, 3, 3)]);
    }

    #[test]
    fn segment_on_shared_face_touches_both_columns() {
        let g = grid();
        // Runs inside the plane x = 2.0 (shared face of columns 1 and 2).
        let vs = line_voxels(
            &g,
            &Vector3::new(2.0, 1.5, 1.5),
            &Vector3::new(2.0, 2.5, 1.5),
        )
        .unwrap();
        assert_eq!(vs.len(), 4);
        for v in [(1, 1, 1), (2, 1, 1), (1, 2, 1), (2, 2, 1)] {
            assert!(vs.contains(&Voxel::new(v.0, v.1, v.2)), "missing {v:?}");
        }
    }

    #[test]
    fn ordered_by_first_contact_and_symmetric_as_set() {
        let g = grid();
        let fwd = line_voxels(&g, &cv(0, 0, 0), &cv(4, 2, 1)).unwrap();
        let bwd = line_voxels(&g, &cv(4, 2, 1), &cv(0, 0, 0)).unwrap();
        assert_eq!(fwd.first(), Some(&Voxel::new(0, 0, 0)));
        assert_eq!(fwd.last(), Some(&Voxel::new(4, 2, 1)));
        let fs: std::collections::BTreeSet<_> = fwd.iter().collect();
        let bs: std::collections::BTreeSet<_> = bwd.iter().collect();
        assert_eq!(fs, bs);
    }

    #[test]
    fn rejects_out_of_bounds_endpoints() {
        let g = grid();
        let inside = cv(1, 1, 1);
        let outside = Vector3::new(6.5, 1.0, 1.0);
        assert!(line_voxels(&g, &inside, &outside).is_err());
        assert!(line_voxels(&g, &outside, &inside).is_err());
        // Points exactly on the outer surface are inside the closed box.
        assert!(line_voxels(&g, &Vector3::new(0.0, 0.0, 0.0), &inside).is_ok());
        assert!(line_voxels(&g, &Vector3::new(6.0, 6.0, 6.0), &inside).is_ok());
    }

    #[test]
    fn classification_dominance() {
        let mut map = WorldMap {
            grid: Grid3::filled([6, 6, 6], 1.0, Belief::AssumedFree).unwrap(),
            water: WaterSurface::new(3.0),
            seed: 0,
            plane_yz: 1,
            plane_xy: 1,
        };
        let a = cv(0, 1, 1);
        let b = cv(4, 1, 1);
        assert_eq!(classify_edge(&map, &a, &b).unwrap(), EdgeClass::Free);
        map.grid
            .set(Voxel::new(2, 1, 1), Belief::AssumedObstacle)
            .unwrap();
        assert_eq!(
            classify_edge(&map, &a, &b).unwrap(),
            EdgeClass::AssumedBlocked
        );
        map.grid
            .set(Voxel::new(3, 1, 1), Belief::ConfirmedObstacle)
            .unwrap();
        assert_eq!(
            classify_edge(&map, &a, &b).unwrap(),
            EdgeClass::ConfirmedBlocked
        );
        // Confirmed-free voxels do not block.
        map.grid
            .set(Voxel::new(2, 1, 1), Belief::ConfirmedFree)
            .unwrap();
        map.grid
            .set(Voxel::new(3, 1, 1), Belief::ConfirmedFree)
            .unwrap();
        assert_eq!(classify_edge(&map, &a, &b).unwrap(), EdgeClass::Free);
    }
}
