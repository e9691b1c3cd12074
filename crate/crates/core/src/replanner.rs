//! Sampling-based local replanning around a sudden obstacle.
//!
//! Each iteration samples the feasible region (an annular shell around the
//! obstacle, inside the velocity cone, within a height band above the
//! terrain), keeps the cheapest feasible sample and moves a virtual vehicle
//! there, until the straight line to the target is clear.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::dynamics::UavState;
use crate::geo::{
    bearing_elevation, distance3, dot, heading_vector, lateral_distance, norm,
    segment_above_terrain, wrap_angle, DemGrid, GeoError, Obstacle, Point3,
};
use crate::guidance::LookAheadAngles;
use crate::rng::{stream, Purpose, StreamRng};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplanError {
    #[error("invalid replanning parameters: {0}")]
    InvalidParams(&'static str),
    #[error("no feasible sample in iteration {iteration}")]
    NoFeasibleSample { iteration: usize },
    #[error("route still obstructed after {iterations} iterations")]
    IterationCap { iterations: usize },
    #[error("coincident points in leg geometry")]
    DegenerateGeometry,
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplanParams {
    /// Accepted samples per iteration (K).
    pub samples: usize,
    pub delta_r: f64,
    pub delta_h: f64,
    /// Half-angle of the velocity cone, radians.
    pub delta_angle: f64,
    pub max_iterations: usize,
    pub terrain_clearance: f64,
    pub terrain_step: f64,
    /// Rejection-sampling budget per iteration, as a multiple of `samples`.
    pub attempts_per_sample: usize,
}

impl Default for ReplanParams {
    fn default() -> Self {
        Self {
            samples: 2000,
            delta_r: 500.0,
            delta_h: 20.0,
            delta_angle: PI / 3.0,
            max_iterations: 20,
            terrain_clearance: 10.0,
            terrain_step: 10.0,
            attempts_per_sample: 1000,
        }
    }
}

impl ReplanParams {
    pub fn validate(&self) -> Result<(), ReplanError> {
        if self.samples == 0 {
            return Err(ReplanError::InvalidParams(
                "sample count must be at least 1",
            ));
        }
        if !(self.delta_r > 0.0) || !self.delta_r.is_finite() {
            return Err(ReplanError::InvalidParams("radial margin must be positive"));
        }
        if !(self.delta_h > 0.0) || !self.delta_h.is_finite() {
            return Err(ReplanError::InvalidParams("height band must be positive"));
        }
        if !(self.delta_angle > 0.0 && self.delta_angle <= PI) {
            return Err(ReplanError::InvalidParams("cone angle must lie in (0, pi]"));
        }
        if self.max_iterations == 0 || self.attempts_per_sample == 0 {
            return Err(ReplanError::InvalidParams(
                "iteration and attempt budgets must be positive",
            ));
        }
        if !(self.terrain_step > 0.0) || !(self.terrain_clearance >= 0.0) {
            return Err(ReplanError::InvalidParams(
                "terrain check needs a positive step",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibleRegion {
    pub uav_position: Point3,
    pub velocity_unit: [f64; 3],
    pub obstacle_center: (f64, f64),
    pub r_bar: f64,
    pub delta_r: f64,
    pub dem_floor: f64,
    pub delta_h: f64,
    pub delta_angle: f64,
}

impl FeasibleRegion {
    /// Region for a vehicle at `position` flying along `(course, flight_path)`,
    /// with the height band anchored at the terrain under the vehicle.
    pub fn around(
        position: Point3,
        course: f64,
        flight_path: f64,
        obstacle: &Obstacle,
        grid: &DemGrid,
        params: &ReplanParams,
    ) -> Result<Self, ReplanError> {
        Ok(Self {
            uav_position: position,
            velocity_unit: heading_vector(course, flight_path),
            obstacle_center: (obstacle.center_north, obstacle.center_east),
            r_bar: obstacle.lateral_radius,
            delta_r: params.delta_r,
            dem_floor: grid.elevation(position.north, position.east)?,
            delta_h: params.delta_h,
            delta_angle: params.delta_angle,
        })
    }

    fn in_cone(&self, p: &Point3) -> bool {
        let d = p.sub(&self.uav_position);
        let c = dot(&d, &self.velocity_unit);
        let s = cross_norm(&d, &self.velocity_unit);
        libm::atan2(s, c) <= self.delta_angle
    }

    /// Membership test for the three region constraints.
    pub fn contains(&self, p: &Point3) -> bool {
        if *p == self.uav_position {
            return false;
        }
        let (cn, ce) = self.obstacle_center;
        let r = lateral_distance(p, &Point3::new(cn, ce, 0.0));
        // Absorbs rounding in points built from polar coordinates.
        let eps = 1e-9;
        self.in_cone(p)
            && r >= self.r_bar - eps
            && r <= self.r_bar + self.delta_r + eps
            && p.height >= self.dem_floor - eps
            && p.height <= self.dem_floor + self.delta_h + eps
    }

    /// One rejection-sampling attempt: uniform in the annulus x height box,
    /// `None` when the draw falls outside the velocity cone.
    pub fn try_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Point3> {
        let angle = rng.random::<f64>() * 2.0 * PI;
        let inner = self.r_bar * self.r_bar;
        let outer = (self.r_bar + self.delta_r) * (self.r_bar + self.delta_r);
        let radius = libm::sqrt(inner + rng.random::<f64>() * (outer - inner));
        let height = self.dem_floor + rng.random::<f64>() * self.delta_h;
        let (cn, ce) = self.obstacle_center;
        let p = Point3::new(
            cn + radius * libm::cos(angle),
            ce + radius * libm::sin(angle),
            height,
        );
        (p != self.uav_position && self.in_cone(&p)).then_some(p)
    }
}

fn cross_norm(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    norm(&[
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])
}

pub fn region_contains(region: &FeasibleRegion, p: &Point3) -> bool {
    region.contains(p)
}

/// Look-ahead angles from the vehicle's current velocity to the candidate.
pub fn transit_angles_leg1(
    uav: &UavState,
    candidate: &Point3,
) -> Result<LookAheadAngles, ReplanError> {
    let (chi, gamma) =
        bearing_elevation(&uav.position, candidate).ok_or(ReplanError::DegenerateGeometry)?;
    Ok(LookAheadAngles {
        eta_lat: wrap_angle(chi - uav.course),
        eta_lon: gamma - uav.flight_path,
    })
}

/// Turn required at the candidate to head for the original target.
pub fn transit_angles_leg2(
    uav_position: &Point3,
    candidate: &Point3,
    target: &Point3,
) -> Result<LookAheadAngles, ReplanError> {
    let (chi1, gamma1) =
        bearing_elevation(uav_position, candidate).ok_or(ReplanError::DegenerateGeometry)?;
    let (chi2, gamma2) =
        bearing_elevation(candidate, target).ok_or(ReplanError::DegenerateGeometry)?;
    Ok(LookAheadAngles {
        eta_lat: wrap_angle(chi2 - chi1),
        eta_lon: gamma2 - gamma1,
    })
}

fn leg_factor(a: &LookAheadAngles) -> f64 {
    libm::cos(a.eta_lat) * libm::cos(a.eta_lon)
}

fn valid(a: &LookAheadAngles) -> bool {
    a.eta_lat.abs() < PI / 2.0 && a.eta_lon.abs() < PI / 2.0
}

/// Path-length bound of the two-leg detour through `candidate`, with ground
/// speed factored out. `f64::INFINITY` when either leg needs a look-ahead
/// angle of pi/2 or more, or the geometry is degenerate.
pub fn candidate_cost(uav: &UavState, candidate: &Point3, target: &Point3) -> f64 {
    let (Ok(a1), Ok(a2)) = (
        transit_angles_leg1(uav, candidate),
        transit_angles_leg2(&uav.position, candidate, target),
    ) else {
        return f64::INFINITY;
    };
    if !valid(&a1) || !valid(&a2) {
        return f64::INFINITY;
    }
    let (f1, f2) = (leg_factor(&a1), leg_factor(&a2));
    if !(f1 > 0.0 && f2 > 0.0) {
        return f64::INFINITY;
    }
    distance3(&uav.position, candidate) / f1 + distance3(candidate, target) / f2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub point: Point3,
    pub cost: f64,
    /// Whether the straight leg from this point to the target is clear.
    pub clears_target: bool,
}

impl Candidate {
    /// Candidates that already clear the target rank ahead of those that
    /// do not; cost breaks ties within a tier.
    fn better_than(&self, other: &Candidate) -> bool {
        match (self.clears_target, other.clears_target) {
            (true, false) => true,
            (false, true) => false,
            _ => self.cost < other.cost,
        }
    }
}

/// Result of one sampling iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome {
    pub best: Option<Candidate>,
    pub accepted: usize,
    pub attempts: usize,
    pub terrain_rejections: usize,
}

fn leg_clear(
    a: &Point3,
    b: &Point3,
    obstacle: &Obstacle,
    grid: &DemGrid,
    params: &ReplanParams,
) -> (bool, bool) {
    let obstacle_clear = !obstacle.intersects_segment(a, b);
    let terrain_clear = obstacle_clear
        && segment_above_terrain(grid, a, b, params.terrain_clearance, params.terrain_step)
            .unwrap_or(false);
    (obstacle_clear, terrain_clear)
}

/// Draws up to `samples` points from `region` and returns the best one whose
/// leg from the vehicle is clear of the obstacle and of the terrain.
#[allow(clippy::too_many_arguments)]
pub fn best_candidate<R: Rng + ?Sized>(
    uav: &UavState,
    region: &FeasibleRegion,
    target: &Point3,
    obstacle: &Obstacle,
    grid: &DemGrid,
    params: &ReplanParams,
    samples: usize,
    rng: &mut R,
) -> IterationOutcome {
    let budget = samples.saturating_mul(params.attempts_per_sample);
    let mut out = IterationOutcome {
        best: None,
        accepted: 0,
        attempts: 0,
        terrain_rejections: 0,
    };
    while out.accepted < samples && out.attempts < budget {
        out.attempts += 1;
        let Some(p) = region.try_sample(rng) else {
            continue;
        };
        out.accepted += 1;
        let cost = candidate_cost(uav, &p, target);
        if !cost.is_finite() {
            continue;
        }
        if let Some(b) = out.best {
            if b.clears_target && cost >= b.cost {
                continue;
            }
        }
        let (obstacle_clear, terrain_clear) = leg_clear(&uav.position, &p, obstacle, grid, params);
        if !obstacle_clear {
            continue;
        }
        if !terrain_clear {
            out.terrain_rejections += 1;
            continue;
        }
        let onward = leg_clear(&p, target, obstacle, grid, params).1;
        let c = Candidate {
            point: p,
            cost,
            clears_target: onward,
        };
        if out.best.is_none_or(|b| c.better_than(&b)) {
            out.best = Some(c);
        }
    }
    out
}

/// Full replanning record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplanOutcome {
    pub waypoints: Vec<Point3>,
    pub costs: Vec<f64>,
    pub regions: Vec<FeasibleRegion>,
    pub attempts: usize,
    pub terrain_rejections: usize,
}

impl ReplanOutcome {
    pub fn iterations(&self) -> usize {
        self.waypoints.len()
    }
}

/// Detour waypoints (target excluded) that route the vehicle around the
/// obstacle. Iteration `k` draws from ChaCha stream `k` keyed by `seed`.
pub fn replan_detailed(
    uav: &UavState,
    target: &Point3,
    obstacle: &Obstacle,
    grid: &DemGrid,
    params: &ReplanParams,
    seed: u64,
) -> Result<ReplanOutcome, ReplanError> {
    params.validate()?;
    let mut out = ReplanOutcome::default();
    let mut virt = *uav;
    for iteration in 0..params.max_iterations {
        if !obstacle.intersects_segment(&virt.position, target) {
            return Ok(out);
        }
        let region = FeasibleRegion::around(
            virt.position,
            virt.course,
            virt.flight_path,
            obstacle,
            grid,
            params,
        )?;
        let mut rng: StreamRng = stream(seed, 0, Purpose::Replan, iteration as u64);
        let it = best_candidate(
            &virt,
            &region,
            target,
            obstacle,
            grid,
            params,
            params.samples,
            &mut rng,
        );
        out.attempts += it.attempts;
        out.terrain_rejections += it.terrain_rejections;
        let Some(best) = it.best else {
            return Err(ReplanError::NoFeasibleSample { iteration });
        };
        let (chi, gamma) = bearing_elevation(&virt.position, &best.point)
            .ok_or(ReplanError::DegenerateGeometry)?;
        virt.position = best.point;
        virt.course = chi;
        virt.flight_path = gamma;
        virt.yaw = chi;
        out.waypoints.push(best.point);
        out.costs.push(best.cost);
        out.regions.push(region);
    }
    if obstacle.intersects_segment(&virt.position, target) {
        Err(ReplanError::IterationCap {
            iterations: params.max_iterations,
        })
    } else {
        Ok(out)
    }
}

pub fn replan(
    uav: &UavState,
    target: &Point3,
    obstacle: &Obstacle,
    grid: &DemGrid,
    params: &ReplanParams,
    seed: u64,
) -> Result<Vec<Point3>, ReplanError> {
    replan_detailed(uav, target, obstacle, grid, params, seed).map(|o| o.waypoints)
}
