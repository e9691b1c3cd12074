//! Randomized fleets converging on a common target from a circle of starts.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::dynamics::{UavLimits, UavState, WindParams};
use crate::geo::{DemGrid, Point3};
use crate::guidance::WaypointPath;
use crate::network::CommConfig;
use crate::rng::{stream, Purpose};
use crate::sim::{Scenario, ScenarioError, UavSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct FleetParams {
    pub target: Point3,
    /// Starts lie on this circle around the target.
    pub start_radius: f64,
    /// Intermediate waypoints sit at even fractions of the start-target line,
    /// displaced sideways by up to this much.
    pub lateral_jitter: f64,
    pub intermediate_waypoints: usize,
    pub height_jitter: f64,
    pub speed_range: (f64, f64),
    pub acceptance_radius: f64,
    pub duration: f64,
    pub comm: CommConfig,
    pub wind: WindParams,
}

impl Default for FleetParams {
    fn default() -> Self {
        Self {
            target: Point3::new(0.0, 0.0, 100.0),
            start_radius: 2740.0,
            lateral_jitter: 300.0,
            intermediate_waypoints: 2,
            height_jitter: 20.0,
            speed_range: (13.5, 13.5),
            acceptance_radius: 40.0,
            duration: 100.0,
            comm: CommConfig {
                gamma_signal: 1.0e5,
                ..CommConfig::default()
            },
            wind: WindParams::default(),
        }
    }
}

/// `n` vehicles with ids `0..n`, start bearings drawn uniformly on the circle,
/// over flat terrain at zero elevation.
pub fn circle_fleet(n: usize, seed: u64, params: &FleetParams) -> Result<Scenario, ScenarioError> {
    let mut rng = stream(seed, 0, Purpose::Fleet, 0);
    let half = params.start_radius + params.lateral_jitter + 1000.0;
    let cells = libm::ceil(2.0 * half / 100.0) as usize + 1;
    let dem = DemGrid::flat(
        params.target.north - half,
        params.target.east - half,
        100.0,
        cells,
        cells,
        0.0,
    )
    .map_err(|_| ScenarioError::Section("fleet terrain grid is invalid"))?;

    let tgt = params.target;
    let mut uavs = Vec::with_capacity(n);
    for id in 0..n as u64 {
        let bearing = rng.random_range(0.0..core::f64::consts::TAU);
        let (s, c) = libm::sincos(bearing);
        let start = Point3::new(
            tgt.north + params.start_radius * c,
            tgt.east + params.start_radius * s,
            tgt.height,
        );
        let m = params.intermediate_waypoints;
        let mut waypoints = Vec::with_capacity(m + 1);
        for k in 1..=m {
            let f = k as f64 / (m + 1) as f64;
            let side = rng.random_range(-params.lateral_jitter..=params.lateral_jitter);
            let dh = rng.random_range(-params.height_jitter..=params.height_jitter);
            let base = start.lerp(&tgt, f);
            // (s, -c) is a sideways unit vector of the inbound line.
            waypoints.push(base.offset([side * s, -side * c, dh]));
        }
        waypoints.push(tgt);
        let speed = rng.random_range(params.speed_range.0..=params.speed_range.1);
        let first = waypoints[0];
        let course = libm::atan2(first.east - start.east, first.north - start.north);
        let path = WaypointPath::new(waypoints, params.acceptance_radius)
            .map_err(|_| ScenarioError::Path { id, count: m + 1 })?;
        uavs.push(UavSpec {
            id,
            initial: UavState::level(start, course, speed),
            limits: UavLimits::default(),
            path,
        });
    }

    let mut scenario = Scenario::with_defaults(dem, uavs, tgt);
    scenario.name = format!("circle-fleet-{n}-seed-{seed}");
    scenario.seed = seed;
    scenario.duration = params.duration;
    scenario.comm = params.comm.clone();
    scenario.wind = params.wind;
    scenario.validate()?;
    Ok(scenario)
}
