//! TOML scenario files.
//!
//! Every quantity carries its unit in the key name. Sections other than the
//! top-level keys, `[target]` and the `[[uav]]` list are optional and fall
//! back to the library defaults; unknown keys are rejected. `dem_file` is
//! resolved relative to the scenario file.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use coopath_core::coordination::CoordinationGains;
use coopath_core::dynamics::{AutopilotLags, Kinematics, UavLimits, UavState, WindParams};
use coopath_core::geo::{Obstacle, Point3};
use coopath_core::guidance::{GuidanceGains, WaypointPath};
use coopath_core::network::{alternating_blackouts, CommConfig, Dropout, LinkSelector};
use coopath_core::replanner::ReplanParams;
use coopath_core::sim::{MonitorParams, Scenario, ScenarioError, UavSpec};

use crate::dem::{parse_dem, DemError};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("elevation file {}: {source}", path.display())]
    Dem { path: PathBuf, source: DemError },
    #[error("uav {id}: {message}")]
    Uav { id: u64, message: String },
    #[error("comm.dropout: {0}")]
    Dropout(String),
    #[error("{0}")]
    Invalid(#[from] ScenarioError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    pub dem_file: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default = "one")]
    pub dt_s: f64,
    #[serde(default = "twenty")]
    pub guidance_substeps: usize,
    #[serde(default = "two")]
    pub arrival_radius_m: f64,
    #[serde(default = "forty")]
    pub acceptance_radius_m: f64,
    pub target: PointSpec,
    #[serde(default)]
    pub limits: LimitsSpec,
    #[serde(default)]
    pub guidance: GuidanceSpec,
    #[serde(default)]
    pub autopilot: AutopilotSpec,
    #[serde(default)]
    pub coordination: CoordinationSpec,
    #[serde(default)]
    pub comm: CommSpec,
    #[serde(default)]
    pub replan: ReplanSpec,
    #[serde(default)]
    pub wind: WindSpec,
    #[serde(default)]
    pub monitor: MonitorSpec,
    pub obstacle: Option<ObstacleSpec>,
    #[serde(rename = "uav", default)]
    pub uavs: Vec<UavEntry>,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn twenty() -> usize {
    20
}
fn forty() -> f64 {
    40.0
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub north_m: f64,
    pub east_m: f64,
    pub height_m: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsSpec {
    pub ground_speed_min_mps: f64,
    pub ground_speed_max_mps: f64,
    pub roll_min_rad: f64,
    pub roll_max_rad: f64,
    pub load_factor_min: f64,
    pub load_factor_max: f64,
    pub eta_lat_min_rad: f64,
    pub eta_lat_max_rad: f64,
    pub eta_lon_min_rad: f64,
    pub eta_lon_max_rad: f64,
}

impl Default for LimitsSpec {
    fn default() -> Self {
        let l = UavLimits::default();
        Self {
            ground_speed_min_mps: l.speed_min,
            ground_speed_max_mps: l.speed_max,
            roll_min_rad: l.roll_min,
            roll_max_rad: l.roll_max,
            load_factor_min: l.load_factor_min,
            load_factor_max: l.load_factor_max,
            eta_lat_min_rad: l.eta_lat_min,
            eta_lat_max_rad: l.eta_lat_max,
            eta_lon_min_rad: l.eta_lon_min,
            eta_lon_max_rad: l.eta_lon_max,
        }
    }
}

impl From<LimitsSpec> for UavLimits {
    fn from(s: LimitsSpec) -> Self {
        UavLimits {
            speed_min: s.ground_speed_min_mps,
            speed_max: s.ground_speed_max_mps,
            roll_min: s.roll_min_rad,
            roll_max: s.roll_max_rad,
            load_factor_min: s.load_factor_min,
            load_factor_max: s.load_factor_max,
            eta_lat_min: s.eta_lat_min_rad,
            eta_lat_max: s.eta_lat_max_rad,
            eta_lon_min: s.eta_lon_min_rad,
            eta_lon_max: s.eta_lon_max_rad,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GuidanceSpec {
    pub k_chi: f64,
    pub k_gamma: f64,
}

impl Default for GuidanceSpec {
    fn default() -> Self {
        let g = GuidanceGains::default();
        Self {
            k_chi: g.k_chi,
            k_gamma: g.k_gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutopilotSpec {
    pub roll_tau_s: f64,
    pub load_factor_tau_s: f64,
    pub ground_speed_tau_s: f64,
    pub yaw_tau_s: f64,
}

impl Default for AutopilotSpec {
    fn default() -> Self {
        let l = AutopilotLags::default();
        Self {
            roll_tau_s: l.roll,
            load_factor_tau_s: l.load_factor,
            ground_speed_tau_s: l.ground_speed,
            yaw_tau_s: Kinematics::default().yaw_lag,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoordinationSpec {
    pub k_theta: f64,
    pub gamma_d: f64,
    pub k_vg: f64,
    pub age_compensation: bool,
}

impl Default for CoordinationSpec {
    fn default() -> Self {
        let c = CoordinationGains::default();
        Self {
            k_theta: c.k_theta,
            gamma_d: c.gamma_d,
            k_vg: c.k_vg,
            age_compensation: c.age_compensation,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommSpec {
    pub range_m: f64,
    pub max_neighbors: usize,
    pub gamma_signal: f64,
    /// All links drop for this many seconds, alternating with equally long
    /// connected windows.
    pub alternating_blackout_s: Option<f64>,
    pub dropout: Vec<DropoutSpec>,
}

impl Default for CommSpec {
    fn default() -> Self {
        let c = CommConfig::default();
        Self {
            range_m: c.range,
            max_neighbors: c.max_neighbors,
            gamma_signal: c.gamma_signal,
            alternating_blackout_s: None,
            dropout: Vec::new(),
        }
    }
}

/// A link outage over `[start_s, end_s)`; between two vehicles when both ids
/// are given, otherwise for every link.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropoutSpec {
    pub start_s: f64,
    pub end_s: f64,
    pub uav_a: Option<u64>,
    pub uav_b: Option<u64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplanSpec {
    pub samples: usize,
    pub delta_r_m: f64,
    pub delta_h_m: f64,
    pub cone_half_angle_rad: f64,
    pub max_iterations: usize,
    pub terrain_clearance_m: f64,
    pub terrain_step_m: f64,
    pub attempts_per_sample: usize,
}

impl Default for ReplanSpec {
    fn default() -> Self {
        let r = ReplanParams::default();
        Self {
            samples: r.samples,
            delta_r_m: r.delta_r,
            delta_h_m: r.delta_h,
            cone_half_angle_rad: r.delta_angle,
            max_iterations: r.max_iterations,
            terrain_clearance_m: r.terrain_clearance,
            terrain_step_m: r.terrain_step,
            attempts_per_sample: r.attempts_per_sample,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindSpec {
    pub enabled: bool,
    pub ambient_ned_mps: [f64; 3],
    pub sigma_mps: [f64; 3],
    pub length_scale_m: [f64; 3],
    pub airspeed_nominal_mps: f64,
    pub d_max_radps: f64,
}

impl Default for WindSpec {
    fn default() -> Self {
        let w = WindParams::default();
        Self {
            enabled: true,
            ambient_ned_mps: w.ambient_ned,
            sigma_mps: w.sigma,
            length_scale_m: w.length_scale,
            airspeed_nominal_mps: w.airspeed_nominal,
            d_max_radps: w.d_max,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorSpec {
    pub delta_lat_rad: f64,
    pub delta_lon_rad: f64,
    pub l_c_mps: f64,
}

impl Default for MonitorSpec {
    fn default() -> Self {
        let m = MonitorParams::default();
        Self {
            delta_lat_rad: m.delta_lat,
            delta_lon_rad: m.delta_lon,
            l_c_mps: m.l_c,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub center_north_m: f64,
    pub center_east_m: f64,
    pub radius_m: f64,
    pub base_height_m: f64,
    pub top_height_m: f64,
    pub activation_time_s: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavEntry {
    pub id: u64,
    /// `[north, east, height]`.
    pub start_m: [f64; 3],
    /// Defaults to the bearing of the first waypoint.
    pub course_rad: Option<f64>,
    #[serde(default)]
    pub flight_path_rad: f64,
    pub ground_speed_mps: f64,
    /// `[north, east, height]` rows; the last one must be the target.
    pub waypoints_m: Vec<[f64; 3]>,
    /// Replaces the scenario-wide `[limits]` for this vehicle.
    pub limits: Option<LimitsSpec>,
}

/// A validated scenario together with the provenance recorded in run
/// manifests.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub scenario_path: PathBuf,
    pub scenario_sha256: String,
    pub dem_path: PathBuf,
    pub dem_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<Vec<u8>, LoadError> {
    std::fs::read(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, LoadError> {
    let bytes = read(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let file: ScenarioFile = toml::from_str(&text).map_err(|source| LoadError::Toml {
        path: path.to_path_buf(),
        source,
    })?;
    let dem_path = path.parent().unwrap_or(Path::new(".")).join(&file.dem_file);
    let dem_bytes = read(&dem_path)?;
    let dem = parse_dem(&String::from_utf8_lossy(&dem_bytes)).map_err(|source| LoadError::Dem {
        path: dem_path.clone(),
        source,
    })?;
    let scenario = build_scenario(file, dem)?;
    Ok(LoadedScenario {
        scenario,
        scenario_path: std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf()),
        scenario_sha256: sha256_hex(&bytes),
        dem_path: std::path::absolute(&dem_path).unwrap_or(dem_path),
        dem_sha256: sha256_hex(&dem_bytes),
    })
}

fn point([north, east, height]: [f64; 3]) -> Point3 {
    Point3::new(north, east, height)
}

/// Turns a parsed file and its elevation grid into a validated scenario.
/// Vehicles are ordered by id.
pub fn build_scenario(
    file: ScenarioFile,
    dem: coopath_core::geo::DemGrid,
) -> Result<Scenario, LoadError> {
    let mut entries = file.uavs;
    entries.sort_by_key(|u| u.id);
    let mut uavs = Vec::with_capacity(entries.len());
    for u in &entries {
        let waypoints: Vec<Point3> = u.waypoints_m.iter().copied().map(point).collect();
        let path = WaypointPath::new(waypoints.clone(), file.acceptance_radius_m).map_err(|e| {
            LoadError::Uav {
                id: u.id,
                message: e.to_string(),
            }
        })?;
        let start = point(u.start_m);
        let course = match u.course_rad {
            Some(c) => c,
            None => {
                let first = waypoints[0];
                (first.east - start.east).atan2(first.north - start.north)
            }
        };
        let mut initial = UavState::level(start, course, u.ground_speed_mps);
        initial.flight_path = u.flight_path_rad;
        uavs.push(UavSpec {
            id: u.id,
            initial,
            limits: u.limits.unwrap_or(file.limits).into(),
            path,
        });
    }

    let index_of = |id: u64| -> Result<usize, LoadError> {
        entries
            .iter()
            .position(|u| u.id == id)
            .ok_or_else(|| LoadError::Dropout(format!("no vehicle with id {id}")))
    };
    let mut dropouts = Vec::new();
    for d in &file.comm.dropout {
        let links = match (d.uav_a, d.uav_b) {
            (None, None) => LinkSelector::All,
            (Some(a), Some(b)) => LinkSelector::Pair(index_of(a)?, index_of(b)?),
            _ => {
                return Err(LoadError::Dropout(
                    "give both uav_a and uav_b, or neither".into(),
                ))
            }
        };
        dropouts.push(Dropout {
            start_s: d.start_s,
            end_s: d.end_s,
            links,
        });
    }
    if let Some(w) = file.comm.alternating_blackout_s {
        if !(w > 0.0) {
            return Err(LoadError::Dropout(
                "alternating_blackout_s must be positive".into(),
            ));
        }
        dropouts.extend(alternating_blackouts(w, file.duration_s.max(0.0)));
    }

    let wind = if file.wind.enabled {
        WindParams {
            ambient_ned: file.wind.ambient_ned_mps,
            sigma: file.wind.sigma_mps,
            length_scale: file.wind.length_scale_m,
            airspeed_nominal: file.wind.airspeed_nominal_mps,
            d_max: file.wind.d_max_radps,
        }
    } else {
        WindParams::calm()
    };
    let r = file.replan;
    let c = file.coordination;
    let a = file.autopilot;
    let scenario = Scenario {
        name: file.name,
        dem,
        uavs,
        target: Point3::new(
            file.target.north_m,
            file.target.east_m,
            file.target.height_m,
        ),
        obstacle: file.obstacle.map(|o| Obstacle {
            center_north: o.center_north_m,
            center_east: o.center_east_m,
            lateral_radius: o.radius_m,
            base_height: o.base_height_m,
            top_height: o.top_height_m,
            activation_time: o.activation_time_s,
        }),
        comm: CommConfig {
            range: file.comm.range_m,
            max_neighbors: file.comm.max_neighbors,
            gamma_signal: file.comm.gamma_signal,
            dropouts,
        },
        coordination: CoordinationGains {
            k_theta: c.k_theta,
            gamma_d: c.gamma_d,
            k_vg: c.k_vg,
            dt: file.dt_s,
            age_compensation: c.age_compensation,
        },
        guidance: GuidanceGains {
            k_chi: file.guidance.k_chi,
            k_gamma: file.guidance.k_gamma,
        },
        replan: ReplanParams {
            samples: r.samples,
            delta_r: r.delta_r_m,
            delta_h: r.delta_h_m,
            delta_angle: r.cone_half_angle_rad,
            max_iterations: r.max_iterations,
            terrain_clearance: r.terrain_clearance_m,
            terrain_step: r.terrain_step_m,
            attempts_per_sample: r.attempts_per_sample,
        },
        lags: AutopilotLags {
            roll: a.roll_tau_s,
            load_factor: a.load_factor_tau_s,
            ground_speed: a.ground_speed_tau_s,
        },
        kinematics: Kinematics {
            yaw_lag: a.yaw_tau_s,
            ..Kinematics::default()
        },
        wind,
        monitor: MonitorParams {
            delta_lat: file.monitor.delta_lat_rad,
            delta_lon: file.monitor.delta_lon_rad,
            l_c: file.monitor.l_c_mps,
        },
        seed: file.seed,
        duration: file.duration_s,
        dt: file.dt_s,
        guidance_substeps: file.guidance_substeps,
        arrival_radius: file.arrival_radius_m,
    };
    scenario.validate()?;
    Ok(scenario)
}
