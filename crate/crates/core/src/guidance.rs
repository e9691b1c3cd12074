//! Virtual-target management and look-ahead pursuit guidance.

use alloc::vec::Vec;

use crate::dynamics::{UavLimits, UavState, GRAVITY};
use crate::geo::{bearing_elevation, distance3, dot, wrap_angle, Point3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GuidanceError {
    #[error("a waypoint path needs at least two waypoints")]
    TooFewWaypoints,
    #[error("waypoints {0} and {1} coincide")]
    DuplicateWaypoint(usize, usize),
    #[error("waypoint {0} is not finite")]
    NonFiniteWaypoint(usize),
    #[error("acceptance radius must be non-negative")]
    InvalidAcceptanceRadius,
    #[error("target coincides with the vehicle position")]
    DegenerateGeometry,
}

/// Ordered waypoints with an active-target cursor. Every waypoint remembers
/// whether it belongs to the original plan (and at which index) or was
/// inserted by the replanner.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointPath {
    waypoints: Vec<Point3>,
    original: Vec<Option<usize>>,
    cursor: usize,
    acceptance_radius: f64,
}

impl WaypointPath {
    pub fn new(waypoints: Vec<Point3>, acceptance_radius: f64) -> Result<Self, GuidanceError> {
        if waypoints.len() < 2 {
            return Err(GuidanceError::TooFewWaypoints);
        }
        if !(acceptance_radius >= 0.0) || !acceptance_radius.is_finite() {
            return Err(GuidanceError::InvalidAcceptanceRadius);
        }
        for (i, w) in waypoints.iter().enumerate() {
            if !w.is_finite() {
                return Err(GuidanceError::NonFiniteWaypoint(i));
            }
            if i > 0 && waypoints[i - 1] == *w {
                return Err(GuidanceError::DuplicateWaypoint(i - 1, i));
            }
        }
        let original = (0..waypoints.len()).map(Some).collect();
        Ok(Self {
            waypoints,
            original,
            cursor: 0,
            acceptance_radius,
        })
    }

    pub fn waypoints(&self) -> &[Point3] {
        &self.waypoints
    }

    /// Original-plan index of waypoint `i`, or `None` for a detour point.
    pub fn original_index(&self, i: usize) -> Option<usize> {
        self.original[i]
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn acceptance_radius(&self) -> f64 {
        self.acceptance_radius
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn active(&self) -> Point3 {
        self.waypoints[self.cursor]
    }

    pub fn is_last(&self) -> bool {
        self.cursor + 1 == self.waypoints.len()
    }

    /// Number of original waypoints in the plan.
    pub fn original_len(&self) -> usize {
        self.original.iter().filter(|o| o.is_some()).count()
    }

    /// Original index of the first original waypoint at or after the cursor.
    pub fn next_original(&self) -> Option<(usize, usize)> {
        (self.cursor..self.waypoints.len()).find_map(|i| self.original[i].map(|o| (i, o)))
    }

    /// Polyline length from the active waypoint to the final one.
    pub fn remaining_length(&self) -> f64 {
        self.waypoints[self.cursor..]
            .windows(2)
            .map(|w| distance3(&w[0], &w[1]))
            .sum()
    }

    /// Moves the cursor past waypoints that are within the acceptance radius
    /// or behind the velocity direction. The last waypoint is never passed.
    /// Returns how many waypoints were passed.
    pub fn advance(&mut self, state: &UavState) -> usize {
        let mu = state.velocity_direction();
        let mut passed = 0;
        while !self.is_last() {
            let w = self.active();
            let within = distance3(&w, &state.position) <= self.acceptance_radius;
            let behind = dot(&w.sub(&state.position), &mu) < 0.0;
            if !(within || behind) {
                break;
            }
            self.cursor += 1;
            passed += 1;
        }
        passed
    }

    /// Inserts detour points in front of the active waypoint after dropping
    /// any detour points still pending there. The cursor ends on the first
    /// inserted point. Points equal to their predecessor are skipped.
    pub fn splice_detour(&mut self, detour: &[Point3]) {
        while self.cursor < self.waypoints.len() && self.original[self.cursor].is_none() {
            self.waypoints.remove(self.cursor);
            self.original.remove(self.cursor);
        }
        let mut at = self.cursor;
        for p in detour {
            let prev = if at > 0 {
                Some(self.waypoints[at - 1])
            } else {
                None
            };
            let next = self.waypoints.get(at).copied();
            if prev == Some(*p) || next == Some(*p) {
                continue;
            }
            self.waypoints.insert(at, *p);
            self.original.insert(at, None);
            at += 1;
        }
        if self.cursor >= self.waypoints.len() {
            self.cursor = self.waypoints.len() - 1;
        }
    }
}

/// Free-function form of [`WaypointPath::advance`].
pub fn advance_virtual_target(path: &WaypointPath, state: &UavState) -> WaypointPath {
    let mut next = path.clone();
    next.advance(state);
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LookAheadAngles {
    pub eta_lat: f64,
    pub eta_lon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathErrors {
    pub e_pn: f64,
    pub e_pe: f64,
    pub e_h: f64,
}

impl PathErrors {
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.e_pn * self.e_pn + self.e_pe * self.e_pe + self.e_h * self.e_h)
    }
}

pub fn path_errors(state: &UavState, target: &Point3) -> PathErrors {
    let [e_pn, e_pe, e_h] = target.sub(&state.position);
    PathErrors { e_pn, e_pe, e_h }
}

/// Course and flight-path angle of the line of sight to `target`.
pub fn reference_angles(state: &UavState, target: &Point3) -> Result<(f64, f64), GuidanceError> {
    bearing_elevation(&state.position, target).ok_or(GuidanceError::DegenerateGeometry)
}

pub fn look_ahead_angles(state: &UavState, chi_c: f64, gamma_c: f64) -> LookAheadAngles {
    LookAheadAngles {
        eta_lat: wrap_angle(chi_c - state.course),
        eta_lon: gamma_c - state.flight_path,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceGains {
    pub k_chi: f64,
    pub k_gamma: f64,
}

impl Default for GuidanceGains {
    fn default() -> Self {
        Self {
            k_chi: 8.8844,
            k_gamma: 8.8844,
        }
    }
}

/// Commanded roll angle and load factor, clipped to the vehicle limits.
pub fn guidance_commands(
    state: &UavState,
    angles: &LookAheadAngles,
    gains: &GuidanceGains,
    limits: &UavLimits,
) -> (f64, f64) {
    let v = state.ground_speed;
    let f_chi = -gains.k_chi * libm::sin(angles.eta_lat);
    let f_gamma = -gains.k_gamma * libm::sin(angles.eta_lon);
    let arg = (v * libm::cos(state.roll) / GRAVITY * f_chi).clamp(-1.0, 1.0);
    let phi_c = (-libm::asin(arg)).clamp(limits.roll_min, limits.roll_max);
    let cos_phi = libm::cos(phi_c).max(1e-9);
    let n_c = (GRAVITY * libm::cos(state.flight_path) - v * f_gamma) / (GRAVITY * cos_phi);
    let n_c = if n_c.is_nan() {
        limits.load_factor_min
    } else {
        n_c
    };
    (
        phi_c,
        n_c.clamp(limits.load_factor_min, limits.load_factor_max),
    )
}

/// Per-tick check of the convergence premises of the pursuit law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    pub lateral: bool,
    pub longitudinal: bool,
    pub sign: bool,
    /// `V_g cos(delta_lon) cos(delta_lat) - L_c`.
    pub margin: f64,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        self.lateral && self.longitudinal && self.sign && self.margin > 0.0
    }
}

pub fn theorem1_monitor(
    angles: &LookAheadAngles,
    state: &UavState,
    target: &Point3,
    delta_lat: f64,
    delta_lon: f64,
    l_c: f64,
) -> ConditionReport {
    ConditionReport {
        lateral: angles.eta_lat.abs() <= delta_lat,
        longitudinal: angles.eta_lon.abs() <= delta_lon,
        sign: state.flight_path * (state.position.height - target.height) <= 0.0,
        margin: state.ground_speed * libm::cos(delta_lon) * libm::cos(delta_lat) - l_c,
    }
}

/// Whether the look-ahead angles lie inside the configured envelope.
pub fn eta_within_limits(angles: &LookAheadAngles, limits: &UavLimits) -> bool {
    angles.eta_lat >= limits.eta_lat_min
        && angles.eta_lat <= limits.eta_lat_max
        && angles.eta_lon >= limits.eta_lon_min
        && angles.eta_lon <= limits.eta_lon_max
}
