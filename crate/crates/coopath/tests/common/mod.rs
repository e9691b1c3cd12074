#![allow(dead_code)]

use std::path::{Path, PathBuf};

pub fn reference_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/reference.toml")
}

pub const FLAT_DEM: &str = "\
nrows 21
ncols 21
origin_north_m -1000
origin_east_m -1000
cellsize_m 100
";

/// Two vehicles heading for (0, 0, 100) over flat ground.
pub const SMALL_SCENARIO: &str = r#"
name = "small"
dem_file = "flat.txt"
seed = 3
duration_s = 20.0

[target]
north_m = 0.0
east_m = 0.0
height_m = 100.0

[[uav]]
id = 1
start_m = [-600.0, 0.0, 100.0]
ground_speed_mps = 13.0
waypoints_m = [[-300.0, 50.0, 100.0], [0.0, 0.0, 100.0]]

[[uav]]
id = 2
start_m = [0.0, -600.0, 100.0]
ground_speed_mps = 13.0
waypoints_m = [[50.0, -300.0, 100.0], [0.0, 0.0, 100.0]]
"#;

fn flat_dem_text() -> String {
    let mut s = FLAT_DEM.to_string();
    for _ in 0..21 {
        s.push_str(&["0"; 21].join(" "));
        s.push('\n');
    }
    s
}

/// Writes `toml` as `scenario.toml` next to a flat `flat.txt` grid.
pub fn write_case(dir: &Path, toml: &str) -> PathBuf {
    std::fs::write(dir.join("flat.txt"), flat_dem_text()).unwrap();
    let path = dir.join("scenario.toml");
    std::fs::write(&path, toml).unwrap();
    path
}
