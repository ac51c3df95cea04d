//! The two-corridor scenario ships as checked-in files so external tools
//! can replay it; this guard keeps those bytes identical to what the
//! in-code builder produces.

use amphiplan::planner::two_corridor_fixture;
use amphiplan::voxelworld::{Environment, WorldMap};
use std::path::Path;

fn fixture_path(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn checked_in_files_match_the_builder_byte_for_byte() {
    let (env, map, _, _) = two_corridor_fixture();
    let dir = tempfile::tempdir().unwrap();
    let env_path = dir.path().join("two_corridor.env");
    let map_path = dir.path().join("two_corridor.map");
    env.save(&env_path).unwrap();
    map.save(&map_path).unwrap();

    let fresh_env = std::fs::read(&env_path).unwrap();
    let fresh_map = std::fs::read(&map_path).unwrap();
    let stored_env = std::fs::read(fixture_path("two_corridor.env")).unwrap();
    let stored_map = std::fs::read(fixture_path("two_corridor.map")).unwrap();
    assert_eq!(fresh_env, stored_env, "two_corridor.env drifted from the builder");
    assert_eq!(fresh_map, stored_map, "two_corridor.map drifted from the builder");
}

#[test]
fn checked_in_files_load_back_to_the_builder_scenario() {
    let (env, map, start, goal) = two_corridor_fixture();
    let loaded_env = Environment::load(&fixture_path("two_corridor.env")).unwrap();
    let loaded_map = WorldMap::load(&fixture_path("two_corridor.map")).unwrap();
    assert_eq!(loaded_env.water.level, env.water.level);
    assert_eq!(loaded_map.water.level, map.water.level);
    assert_eq!(loaded_env.occupied(start).unwrap(), env.occupied(start).unwrap());
    assert_eq!(loaded_env.occupied(goal).unwrap(), env.occupied(goal).unwrap());
    for v in map.grid.voxels() {
        assert_eq!(loaded_map.belief(v).unwrap(), map.belief(v).unwrap());
        assert_eq!(loaded_env.occupied(v).unwrap(), env.occupied(v).unwrap());
    }
}
