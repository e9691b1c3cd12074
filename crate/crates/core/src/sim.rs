//! Scenario description and the fleet tick loop.
//!
//! Each tick runs three phases. In the control phase every vehicle advances
//! its virtual target, replans if the obstacle blocks the way, updates its
//! time index from last tick's inbox and computes commands. The network phase
//! builds the topology from this tick's positions and delivers the time
//! indices for the next tick. The integration phase flies each vehicle
//! through `guidance_substeps` autopilot and kinematics steps, refreshing the
//! attitude commands against its own state while holding the speed command.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::coordination::{
    consensus_rate, received_theta, reference_theta, speed_command, time_index, CoordinationGains,
};
use crate::dynamics::{
    step_autopilot, AutopilotLags, Commands, Disturbance, Kinematics, UavLimits, UavState,
    WindModel, WindParams,
};
use crate::geo::{distance3, dot, DemGrid, Obstacle, Point3};
use crate::guidance::{
    eta_within_limits, guidance_commands, look_ahead_angles, reference_angles, theorem1_monitor,
    ConditionReport, GuidanceGains, LookAheadAngles, WaypointPath,
};
use crate::network::{build_topology_for, deliver, CommConfig, Received, ThetaMessage};
use crate::replanner::{replan_detailed, ReplanError, ReplanParams};
use crate::rng::{derive_seed, stream, Purpose};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario has no vehicles")]
    NoVehicles,
    #[error("vehicle id {0} appears more than once")]
    DuplicateId(u64),
    #[error("vehicle {id}: final waypoint {last:?} differs from the common target {target:?}")]
    FinalWaypointNotTarget {
        id: u64,
        last: Point3,
        target: Point3,
    },
    #[error("vehicle {id}: {reason}")]
    Limits { id: u64, reason: &'static str },
    #[error("vehicle {id}: initial state violates its limits")]
    InitialStateOutsideLimits { id: u64 },
    #[error("vehicle {id}: initial state is not finite")]
    NonFiniteState { id: u64 },
    #[error("vehicle {id}: waypoint {index} at ({north}, {east}) lies outside the elevation grid")]
    WaypointOutsideDem {
        id: u64,
        index: usize,
        north: f64,
        east: f64,
    },
    #[error("vehicle {id}: start position lies outside the elevation grid")]
    StartOutsideDem { id: u64 },
    #[error("vehicle {id}: waypoint path has {count} waypoints")]
    Path { id: u64, count: usize },
    #[error("time step must be positive and finite")]
    TimeStep,
    #[error("duration must be non-negative and finite")]
    Duration,
    #[error("guidance substeps must be at least 1")]
    Substeps,
    #[error("{0}")]
    Section(&'static str),
}

/// Premise thresholds for the convergence monitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorParams {
    pub delta_lat: f64,
    pub delta_lon: f64,
    pub l_c: f64,
}

impl Default for MonitorParams {
    fn default() -> Self {
        Self {
            delta_lat: 0.5,
            delta_lon: 0.5,
            l_c: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UavSpec {
    pub id: u64,
    pub initial: UavState,
    pub limits: UavLimits,
    pub path: WaypointPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub dem: DemGrid,
    pub uavs: Vec<UavSpec>,
    pub target: Point3,
    pub obstacle: Option<Obstacle>,
    pub comm: CommConfig,
    /// The `dt` field is ignored; the scenario step is used.
    pub coordination: CoordinationGains,
    pub guidance: GuidanceGains,
    pub replan: ReplanParams,
    pub lags: AutopilotLags,
    pub kinematics: Kinematics,
    pub wind: WindParams,
    pub monitor: MonitorParams,
    pub seed: u64,
    pub duration: f64,
    pub dt: f64,
    pub guidance_substeps: usize,
    /// A vehicle on its final waypoint stops once this close to it.
    pub arrival_radius: f64,
}

impl Scenario {
    /// Scenario with the default gains, limits and wind, one-second ticks,
    /// no obstacle and a zero duration.
    pub fn with_defaults(dem: DemGrid, uavs: Vec<UavSpec>, target: Point3) -> Self {
        Self {
            name: String::new(),
            dem,
            uavs,
            target,
            obstacle: None,
            comm: CommConfig::default(),
            coordination: CoordinationGains::default(),
            guidance: GuidanceGains::default(),
            replan: ReplanParams::default(),
            lags: AutopilotLags::default(),
            kinematics: Kinematics::default(),
            wind: WindParams::default(),
            monitor: MonitorParams::default(),
            seed: 0,
            duration: 0.0,
            dt: 1.0,
            guidance_substeps: 20,
            arrival_radius: 2.0,
        }
    }

    pub fn n_ticks(&self) -> usize {
        libm::round(self.duration / self.dt) as usize
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.uavs.is_empty() {
            return Err(ScenarioError::NoVehicles);
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(ScenarioError::TimeStep);
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(ScenarioError::Duration);
        }
        if self.guidance_substeps == 0 {
            return Err(ScenarioError::Substeps);
        }
        if !(self.arrival_radius >= 0.0) {
            return Err(ScenarioError::Section(
                "arrival radius must be non-negative",
            ));
        }
        self.comm.validate().map_err(ScenarioError::Section)?;
        self.coordination
            .validate()
            .map_err(ScenarioError::Section)?;
        self.wind.validate().map_err(ScenarioError::Section)?;
        self.replan.validate().map_err(|e| match e {
            ReplanError::InvalidParams(m) => ScenarioError::Section(m),
            _ => ScenarioError::Section("invalid replanning parameters"),
        })?;
        if !(self.guidance.k_chi > 0.0) || !(self.guidance.k_gamma > 0.0) {
            return Err(ScenarioError::Section("guidance gains must be positive"));
        }
        if [
            self.lags.roll,
            self.lags.load_factor,
            self.lags.ground_speed,
        ]
        .iter()
        .any(|t| !(*t >= 0.0))
        {
            return Err(ScenarioError::Section(
                "autopilot time constants must be non-negative",
            ));
        }
        let m = &self.monitor;
        if !(m.delta_lat >= 0.0 && m.delta_lat < core::f64::consts::FRAC_PI_2)
            || !(m.delta_lon >= 0.0 && m.delta_lon < core::f64::consts::FRAC_PI_2)
        {
            return Err(ScenarioError::Section(
                "monitor thresholds must lie in [0, pi/2)",
            ));
        }
        if let Some(o) = &self.obstacle {
            o.validate().map_err(ScenarioError::Section)?;
        }
        for (k, u) in self.uavs.iter().enumerate() {
            if self.uavs[..k].iter().any(|v| v.id == u.id) {
                return Err(ScenarioError::DuplicateId(u.id));
            }
            u.limits
                .validate()
                .map_err(|reason| ScenarioError::Limits { id: u.id, reason })?;
            if !u.initial.is_finite() {
                return Err(ScenarioError::NonFiniteState { id: u.id });
            }
            if !u.limits.state_within(&u.initial) {
                return Err(ScenarioError::InitialStateOutsideLimits { id: u.id });
            }
            if !self
                .dem
                .contains(u.initial.position.north, u.initial.position.east)
            {
                return Err(ScenarioError::StartOutsideDem { id: u.id });
            }
            let wps = u.path.waypoints();
            if wps.len() < 2 {
                return Err(ScenarioError::Path {
                    id: u.id,
                    count: wps.len(),
                });
            }
            for (index, w) in wps.iter().enumerate() {
                if !self.dem.contains(w.north, w.east) {
                    return Err(ScenarioError::WaypointOutsideDem {
                        id: u.id,
                        index,
                        north: w.north,
                        east: w.east,
                    });
                }
            }
            let last = wps[wps.len() - 1];
            if last != self.target {
                return Err(ScenarioError::FinalWaypointNotTarget {
                    id: u.id,
                    last,
                    target: self.target,
                });
            }
        }
        Ok(())
    }
}

/// One vehicle at one tick: state at the start of the tick and the commands
/// computed from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub tick: usize,
    pub t: f64,
    pub state: UavState,
    pub commands: Commands,
    pub angles: LookAheadAngles,
    pub theta: f64,
    pub theta_dot: f64,
    pub theta_ref: f64,
    pub monitor: ConditionReport,
    pub eta_within_limits: bool,
    pub cursor: usize,
    pub active: Point3,
    /// Original waypoints already behind the cursor (the final one counts
    /// once the vehicle has arrived).
    pub originals_passed: usize,
    /// The obstacle blocked the way to the active waypoint this tick.
    pub obstructed: bool,
    pub replanned: bool,
    pub arrived: bool,
    pub inbox_size: usize,
    pub neighbors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Replan {
        waypoints: Vec<Point3>,
        costs: Vec<f64>,
        attempts: usize,
        terrain_rejections: usize,
        wall_clock_us: u64,
        /// Extra flight time of the detour over the direct leg at the current speed.
        detour_overhead_s: f64,
    },
    ObstacleIncursion,
    EtaLimitViolation {
        eta_lat: f64,
        eta_lon: f64,
    },
    ClosePair {
        other: usize,
        distance: f64,
    },
    Arrival,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Replan { .. } => "replan",
            EventKind::ObstacleIncursion => "obstacle_incursion",
            EventKind::EtaLimitViolation { .. } => "eta_limit_violation",
            EventKind::ClosePair { .. } => "close_pair",
            EventKind::Arrival => "arrival",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub tick: usize,
    pub t: f64,
    /// Index into the scenario's vehicle list.
    pub uav: usize,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub dt: f64,
    pub n_ticks: usize,
    pub uav_ids: Vec<u64>,
    /// Original waypoints of each vehicle.
    pub original_paths: Vec<Vec<Point3>>,
    /// `records[uav][tick]`.
    pub records: Vec<Vec<TickRecord>>,
    /// States after the last integration phase.
    pub final_states: Vec<UavState>,
    pub events: Vec<Event>,
}

impl RunLog {
    pub fn replan_events(&self) -> impl Iterator<Item = &Event> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Replan { .. }))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("tick {tick}, vehicle {uav}: replanning failed: {source}")]
    Replan {
        tick: usize,
        uav: u64,
        source: ReplanError,
    },
    #[error("tick {tick}, vehicle {uav}: state became non-finite")]
    NonFinite { tick: usize, uav: u64 },
}

struct Vehicle {
    id: u64,
    limits: UavLimits,
    state: UavState,
    path: WaypointPath,
    wind: WindModel,
    arrived: bool,
    replans: u64,
    in_violation: bool,
    speed_cmd: f64,
}

/// Runs the scenario with no wall-clock instrumentation.
pub fn run(scenario: &Scenario) -> Result<RunLog, SimError> {
    run_with_clock(scenario, &|| 0)
}

/// Runs the scenario; `clock` returns microseconds and is only used to time
/// replanning calls.
pub fn run_with_clock(scenario: &Scenario, clock: &dyn Fn() -> u64) -> Result<RunLog, SimError> {
    scenario.validate()?;
    let n = scenario.uavs.len();
    let dt = scenario.dt;
    let gains = CoordinationGains {
        dt,
        ..scenario.coordination
    };
    let mut vehicles: Vec<Vehicle> = scenario
        .uavs
        .iter()
        .map(|u| Vehicle {
            id: u.id,
            limits: u.limits,
            state: u.initial,
            path: u.path.clone(),
            wind: WindModel::with_rng(scenario.wind, stream(scenario.seed, u.id, Purpose::Wind, 0)),
            arrived: false,
            replans: 0,
            in_violation: false,
            speed_cmd: u.initial.ground_speed,
        })
        .collect();

    let n_ticks = scenario.n_ticks();
    let mut log = RunLog {
        dt,
        n_ticks,
        uav_ids: scenario.uavs.iter().map(|u| u.id).collect(),
        original_paths: scenario
            .uavs
            .iter()
            .map(|u| u.path.waypoints().to_vec())
            .collect(),
        records: vec![Vec::with_capacity(n_ticks); n],
        final_states: Vec::new(),
        events: Vec::new(),
    };
    let mut inboxes: Vec<Vec<Received>> = vec![Vec::new(); n];

    for tick in 0..n_ticks {
        let t = tick as f64 * dt;
        let mut messages = Vec::with_capacity(n);

        // Control phase.
        for (i, v) in vehicles.iter_mut().enumerate() {
            if v.arrived {
                log.records[i].push(frozen_record(v, tick, t, scenario));
                continue;
            }
            v.path.advance(&v.state);

            let mut obstructed = false;
            let mut replanned = false;
            if let Some(obs) = scenario.obstacle.as_ref().filter(|o| o.is_active(t)) {
                if obs.intersects_segment(&v.state.position, &v.path.active()) {
                    obstructed = true;
                    if obs.contains(&v.state.position) {
                        log.events.push(Event {
                            tick,
                            t,
                            uav: i,
                            kind: EventKind::ObstacleIncursion,
                        });
                    } else {
                        let goal = v
                            .path
                            .next_original()
                            .map(|(k, _)| v.path.waypoints()[k])
                            .unwrap_or_else(|| v.path.active());
                        let seed = derive_seed(scenario.seed, v.id, Purpose::Replan, v.replans);
                        let started = clock();
                        let out = replan_detailed(
                            &v.state,
                            &goal,
                            obs,
                            &scenario.dem,
                            &scenario.replan,
                            seed,
                        )
                        .map_err(|source| SimError::Replan {
                            tick,
                            uav: v.id,
                            source,
                        })?;
                        let wall_clock_us = clock().saturating_sub(started);
                        v.replans += 1;
                        replanned = true;
                        let mut detour = 0.0;
                        let mut prev = v.state.position;
                        for w in out.waypoints.iter().chain(core::iter::once(&goal)) {
                            detour += distance3(&prev, w);
                            prev = *w;
                        }
                        let direct = distance3(&v.state.position, &goal);
                        v.path.splice_detour(&out.waypoints);
                        log.events.push(Event {
                            tick,
                            t,
                            uav: i,
                            kind: EventKind::Replan {
                                waypoints: out.waypoints,
                                costs: out.costs,
                                attempts: out.attempts,
                                terrain_rejections: out.terrain_rejections,
                                wall_clock_us,
                                detour_overhead_s: (detour - direct) / v.state.ground_speed,
                            },
                        });
                    }
                }
            }

            let theta = time_index(&v.state, &v.path);
            let inbox: Vec<(f64, f64)> = inboxes[i]
                .iter()
                .map(|r| {
                    let age = (tick as u64).saturating_sub(r.message.sent_tick);
                    (r.strength, received_theta(r.message.theta, age, &gains))
                })
                .collect();
            let theta_dot = consensus_rate(theta, &inbox, &gains);
            v.speed_cmd = speed_command(theta, theta_dot, v.state.ground_speed, &gains, &v.limits);

            let active = v.path.active();
            let angles = pursuit_angles(&v.state, &active);
            let (roll, load_factor) =
                guidance_commands(&v.state, &angles, &scenario.guidance, &v.limits);
            let m = &scenario.monitor;
            let monitor =
                theorem1_monitor(&angles, &v.state, &active, m.delta_lat, m.delta_lon, m.l_c);
            let eta_ok = eta_within_limits(&angles, &v.limits);
            if !eta_ok && !v.in_violation {
                log.events.push(Event {
                    tick,
                    t,
                    uav: i,
                    kind: EventKind::EtaLimitViolation {
                        eta_lat: angles.eta_lat,
                        eta_lon: angles.eta_lon,
                    },
                });
            }
            v.in_violation = !eta_ok;

            messages.push(ThetaMessage {
                sender: i,
                theta,
                sent_tick: tick as u64,
            });
            log.records[i].push(TickRecord {
                tick,
                t,
                state: v.state,
                commands: Commands {
                    roll,
                    load_factor,
                    ground_speed: v.speed_cmd,
                },
                angles,
                theta,
                theta_dot,
                theta_ref: reference_theta(theta, theta_dot, &gains),
                monitor,
                eta_within_limits: eta_ok,
                cursor: v.path.cursor(),
                active,
                originals_passed: originals_passed(&v.path, false),
                obstructed,
                replanned,
                arrived: false,
                inbox_size: inboxes[i].len(),
                neighbors: 0,
            });
        }

        // Network phase: only vehicles still flying take part.
        let flying: Vec<usize> = (0..n).filter(|&i| !vehicles[i].arrived).collect();
        let positions: Vec<Point3> = flying.iter().map(|&i| vehicles[i].state.position).collect();
        let graph = build_topology_for(&positions, &flying, &scenario.comm, tick as u64, t);
        for &(a, b, distance) in &graph.close_pairs {
            log.events.push(Event {
                tick,
                t,
                uav: flying[a],
                kind: EventKind::ClosePair {
                    other: flying[b],
                    distance,
                },
            });
        }
        let local: Vec<ThetaMessage> = messages
            .iter()
            .filter_map(|m| {
                flying
                    .iter()
                    .position(|&i| i == m.sender)
                    .map(|k| ThetaMessage { sender: k, ..*m })
            })
            .collect();
        let delivered = deliver(&local, &graph);
        inboxes = vec![Vec::new(); n];
        for (k, inbox) in delivered.into_iter().enumerate() {
            let i = flying[k];
            if let Some(r) = log.records[i].last_mut() {
                r.neighbors = graph.neighbors[k].len();
            }
            inboxes[i] = inbox
                .into_iter()
                .map(|r| Received {
                    message: ThetaMessage {
                        sender: flying[r.message.sender],
                        ..r.message
                    },
                    ..r
                })
                .collect();
        }

        // Integration phase.
        let h = dt / scenario.guidance_substeps as f64;
        for (i, v) in vehicles.iter_mut().enumerate() {
            if v.arrived {
                continue;
            }
            for sub in 0..scenario.guidance_substeps {
                if sub > 0 {
                    v.path.advance(&v.state);
                }
                let angles = pursuit_angles(&v.state, &v.path.active());
                let (roll, load_factor) =
                    guidance_commands(&v.state, &angles, &scenario.guidance, &v.limits);
                let cmd = Commands {
                    roll,
                    load_factor,
                    ground_speed: v.speed_cmd,
                };
                let next = step_autopilot(&v.state, &cmd, &v.limits, &scenario.lags, h);
                let d: Disturbance = v.wind.sample_on_course(h, next.course);
                v.state = scenario.kinematics.step(&next, &d, h);
            }
            if !v.state.is_finite() {
                return Err(SimError::NonFinite { tick, uav: v.id });
            }
            if v.path.is_last() && has_arrived(&v.state, &v.path.active(), scenario.arrival_radius)
            {
                v.arrived = true;
                log.events.push(Event {
                    tick,
                    t: t + dt,
                    uav: i,
                    kind: EventKind::Arrival,
                });
            }
        }
    }
    log.final_states = vehicles.iter().map(|v| v.state).collect();
    Ok(log)
}

fn pursuit_angles(state: &UavState, target: &Point3) -> LookAheadAngles {
    match reference_angles(state, target) {
        Ok((chi_c, gamma_c)) => look_ahead_angles(state, chi_c, gamma_c),
        Err(_) => LookAheadAngles::default(),
    }
}

fn has_arrived(state: &UavState, last: &Point3, radius: f64) -> bool {
    distance3(&state.position, last) <= radius
        || dot(&last.sub(&state.position), &state.velocity_direction()) < 0.0
}

fn originals_passed(path: &WaypointPath, arrived: bool) -> usize {
    let behind = (0..path.cursor())
        .filter(|&k| path.original_index(k).is_some())
        .count();
    behind + usize::from(arrived)
}

fn frozen_record(v: &Vehicle, tick: usize, t: f64, scenario: &Scenario) -> TickRecord {
    let active = v.path.active();
    TickRecord {
        tick,
        t,
        state: v.state,
        commands: Commands {
            roll: v.state.roll,
            load_factor: v.state.load_factor,
            ground_speed: v.state.ground_speed,
        },
        angles: LookAheadAngles::default(),
        theta: 0.0,
        theta_dot: 0.0,
        theta_ref: 0.0,
        monitor: theorem1_monitor(
            &LookAheadAngles::default(),
            &v.state,
            &active,
            scenario.monitor.delta_lat,
            scenario.monitor.delta_lon,
            scenario.monitor.l_c,
        ),
        eta_within_limits: true,
        cursor: v.path.cursor(),
        active,
        originals_passed: originals_passed(&v.path, true),
        obstructed: false,
        replanned: false,
        arrived: true,
        inbox_size: 0,
        neighbors: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::compute_metrics;

    fn flat() -> DemGrid {
        DemGrid::flat(-5000.0, -5000.0, 100.0, 101, 101, 0.0).unwrap()
    }

    fn single(waypoints: Vec<Point3>, start: UavState) -> Scenario {
        let target = *waypoints.last().unwrap();
        let uav = UavSpec {
            id: 0,
            initial: start,
            limits: UavLimits::default(),
            path: WaypointPath::new(waypoints, 10.0).unwrap(),
        };
        let mut s = Scenario::with_defaults(flat(), vec![uav], target);
        s.wind = WindParams::calm();
        s
    }

    fn straight() -> Scenario {
        let mut s = single(
            vec![
                Point3::new(500.0, 200.0, 150.0),
                Point3::new(1500.0, 200.0, 150.0),
                Point3::new(2000.0, 800.0, 120.0),
            ],
            UavState::level(Point3::new(0.0, 0.0, 100.0), 0.0, 13.0),
        );
        s.duration = 250.0;
        s
    }

    #[test]
    fn single_vehicle_reaches_target() {
        let s = straight();
        let log = run(&s).unwrap();
        let arrival = log
            .events
            .iter()
            .find(|e| e.kind == EventKind::Arrival)
            .expect("arrives");
        let recs = &log.records[0];
        let mut track: Vec<Point3> = recs.iter().map(|r| r.state.position).collect();
        track.push(log.final_states[0].position);
        let e = crate::metrics::closest_approach(&track, &s.target).unwrap();
        assert!(libm::sqrt(dot(&e, &e)) < 5.0, "{e:?}");
        // Time to go shrinks every tick once the initial turn is flown.
        let flying: Vec<&TickRecord> = recs.iter().filter(|r| !r.arrived).collect();
        assert_eq!(flying.len(), arrival.tick + 1);
        for w in flying[10..].windows(2) {
            assert!(
                w[1].theta < w[0].theta,
                "tick {}: {} -> {}",
                w[1].tick,
                w[0].theta,
                w[1].theta
            );
        }
        assert!(recs[arrival.tick + 1..]
            .iter()
            .all(|r| r.arrived && r.state == log.final_states[0]));
        assert_eq!(compute_metrics(&log).waypoints_visited, vec![3]);
    }

    #[test]
    fn zero_duration_gives_empty_log() {
        let mut s = straight();
        s.duration = 0.0;
        let log = run(&s).unwrap();
        assert_eq!(log.n_ticks, 0);
        assert!(log.records[0].is_empty());
        assert!(log.events.is_empty());
        assert_eq!(log.final_states[0], s.uavs[0].initial);
        let m = compute_metrics(&log);
        assert_eq!(
            (m.ae_bar, m.rmse_bar, m.md, m.rt, m.replan_count),
            (0.0, 0.0, 0.0, 0.0, 0)
        );
    }

    #[test]
    fn runs_are_reproducible() {
        let mut s = straight();
        s.wind = WindParams::default();
        s.seed = 17;
        s.duration = 60.0;
        assert_eq!(run(&s).unwrap(), run(&s).unwrap());
        let mut other = s.clone();
        other.seed = 18;
        assert_ne!(
            run(&s).unwrap().final_states,
            run(&other).unwrap().final_states
        );
    }

    #[test]
    fn validation_errors() {
        let mut s = straight();
        s.target = Point3::new(0.0, 0.0, 0.0);
        assert!(matches!(
            s.validate(),
            Err(ScenarioError::FinalWaypointNotTarget { id: 0, .. })
        ));
        let mut s = straight();
        s.uavs[0].limits.speed_min = 20.0;
        assert!(matches!(
            s.validate(),
            Err(ScenarioError::Limits { id: 0, .. })
        ));
        let mut s = straight();
        s.uavs[0].initial.ground_speed = 30.0;
        assert_eq!(
            s.validate(),
            Err(ScenarioError::InitialStateOutsideLimits { id: 0 })
        );
        let mut s = straight();
        s.uavs.push(s.uavs[0].clone());
        assert_eq!(s.validate(), Err(ScenarioError::DuplicateId(0)));
        let mut s = straight();
        s.dt = 0.0;
        assert_eq!(run(&s), Err(SimError::Scenario(ScenarioError::TimeStep)));
    }

    fn obstacle_on_leg() -> Scenario {
        let mut s = straight();
        // Straddles the second leg, east = 200, from t = 20 s.
        s.obstacle = Some(Obstacle {
            center_north: 1000.0,
            center_east: 230.0,
            lateral_radius: 80.0,
            base_height: 0.0,
            top_height: 1000.0,
            activation_time: 20.0,
        });
        s
    }

    #[test]
    fn obstacle_triggers_one_replan_and_is_avoided() {
        let s = obstacle_on_leg();
        let obs = s.obstacle.unwrap();
        let log = run(&s).unwrap();
        let replans: Vec<&Event> = log.replan_events().collect();
        assert_eq!(replans.len(), 1, "{:?}", log.events);
        let ev = replans[0];
        // Only the leg to the active waypoint is checked, so the replan waits
        // until the blocked second leg becomes active.
        let leg2 = log.records[0].iter().find(|r| r.cursor >= 1).unwrap().tick;
        assert!(leg2 > 20);
        assert_eq!(ev.tick, leg2);
        let EventKind::Replan { waypoints, .. } = &ev.kind else {
            unreachable!()
        };
        assert!(!waypoints.is_empty());
        let mut legs = vec![log.records[0][ev.tick].state.position];
        legs.extend(waypoints.iter().copied());
        legs.push(Point3::new(1500.0, 200.0, 150.0));
        for w in legs.windows(2) {
            assert!(!obs.intersects_segment(&w[0], &w[1]));
        }
        assert!(log.records[0]
            .iter()
            .all(|r| !obs.contains(&r.state.position)));
        assert!(!log
            .events
            .iter()
            .any(|e| e.kind == EventKind::ObstacleIncursion));
        assert!(log.events.iter().any(|e| e.kind == EventKind::Arrival));
        assert_eq!(compute_metrics(&log).waypoints_visited, vec![3]);
        let obstructed: Vec<usize> = log.records[0]
            .iter()
            .filter(|r| r.obstructed)
            .map(|r| r.tick)
            .collect();
        assert_eq!(obstructed, vec![leg2]);
    }

    #[test]
    fn inactive_obstacle_is_ignored() {
        let mut s = obstacle_on_leg();
        s.obstacle.as_mut().unwrap().activation_time = 1.0e6;
        let log = run(&s).unwrap();
        assert_eq!(log.replan_events().count(), 0);
    }

    #[test]
    fn peers_see_last_tick_time_index() {
        let mut s = straight();
        let mut second = s.uavs[0].clone();
        second.id = 5;
        second.initial.position = Point3::new(0.0, 300.0, 100.0);
        s.uavs.push(second);
        s.comm.gamma_signal = 1000.0;
        s.duration = 5.0;
        let log = run(&s).unwrap();
        let gains = CoordinationGains {
            dt: s.dt,
            ..s.coordination
        };
        assert_eq!(log.records[0][0].inbox_size, 0);
        assert_eq!(log.records[0][0].theta_dot, gains.gamma_d);
        for k in 1..5 {
            let (a, b) = (&log.records[0][k], &log.records[1][k - 1]);
            assert_eq!(a.inbox_size, 1);
            let beta = s.comm.gamma_signal
                / distance3(&log.records[0][k - 1].state.position, &b.state.position);
            let expected = consensus_rate(a.theta, &[(beta, b.theta - s.dt)], &gains);
            assert_eq!(a.theta_dot, expected);
        }
    }
}
