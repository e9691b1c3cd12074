//! Fixed-wing point-mass kinematics, a first-order autopilot and the wind
//! disturbance generator.

use core::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geo::{wrap_angle, Point3};

pub const GRAVITY: f64 = 9.81;

/// Flight-path angle is kept this far inside `(-pi/2, pi/2)`.
const GAMMA_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavState {
    pub position: Point3,
    /// Course angle chi, radians, in `(-pi, pi]`.
    pub course: f64,
    /// Flight-path angle gamma, radians.
    pub flight_path: f64,
    /// Yaw psi, radians.
    pub yaw: f64,
    pub ground_speed: f64,
    pub roll: f64,
    pub load_factor: f64,
}

impl UavState {
    /// Level, wings-level flight at `ground_speed` on `course`.
    pub fn level(position: Point3, course: f64, ground_speed: f64) -> Self {
        Self {
            position,
            course,
            flight_path: 0.0,
            yaw: course,
            ground_speed,
            roll: 0.0,
            load_factor: 1.0,
        }
    }

    pub fn velocity_direction(&self) -> [f64; 3] {
        crate::geo::heading_vector(self.course, self.flight_path)
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.course.is_finite()
            && self.flight_path.is_finite()
            && self.yaw.is_finite()
            && self.ground_speed.is_finite()
            && self.roll.is_finite()
            && self.load_factor.is_finite()
    }
}

/// Actuator and look-ahead angle envelopes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavLimits {
    pub speed_min: f64,
    pub speed_max: f64,
    pub roll_min: f64,
    pub roll_max: f64,
    pub load_factor_min: f64,
    pub load_factor_max: f64,
    pub eta_lat_min: f64,
    pub eta_lat_max: f64,
    pub eta_lon_min: f64,
    pub eta_lon_max: f64,
}

impl Default for UavLimits {
    fn default() -> Self {
        Self {
            speed_min: 9.0,
            speed_max: 18.0,
            roll_min: -0.6,
            roll_max: 0.6,
            load_factor_min: 0.0,
            load_factor_max: 2.1,
            eta_lat_min: -1.2,
            eta_lat_max: 1.2,
            eta_lon_min: -1.2,
            eta_lon_max: 1.2,
        }
    }
}

impl UavLimits {
    pub fn validate(&self) -> Result<(), &'static str> {
        let pairs = [
            (
                self.speed_min,
                self.speed_max,
                "ground speed limits need min < max",
            ),
            (self.roll_min, self.roll_max, "roll limits need min < max"),
            (
                self.load_factor_min,
                self.load_factor_max,
                "load factor limits need min < max",
            ),
            (
                self.eta_lat_min,
                self.eta_lat_max,
                "lateral look-ahead limits need min < max",
            ),
            (
                self.eta_lon_min,
                self.eta_lon_max,
                "longitudinal look-ahead limits need min < max",
            ),
        ];
        for (lo, hi, msg) in pairs {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(msg);
            }
        }
        if !(self.speed_min > 0.0) {
            return Err("minimum ground speed must be positive");
        }
        if self.roll_min <= -FRAC_PI_2 || self.roll_max >= FRAC_PI_2 {
            return Err("roll limits must lie inside (-pi/2, pi/2)");
        }
        for eta in [
            self.eta_lat_min,
            self.eta_lat_max,
            self.eta_lon_min,
            self.eta_lon_max,
        ] {
            if eta <= -FRAC_PI_2 || eta >= FRAC_PI_2 {
                return Err("look-ahead limits must lie inside (-pi/2, pi/2)");
            }
        }
        Ok(())
    }

    pub fn state_within(&self, s: &UavState) -> bool {
        s.ground_speed >= self.speed_min
            && s.ground_speed <= self.speed_max
            && s.roll >= self.roll_min
            && s.roll <= self.roll_max
            && s.load_factor >= self.load_factor_min
            && s.load_factor <= self.load_factor_max
    }
}

/// Reference signals for the autopilot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Commands {
    pub roll: f64,
    pub load_factor: f64,
    pub ground_speed: f64,
}

/// First-order lag time constants of the autopilot channels, seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutopilotLags {
    pub roll: f64,
    pub load_factor: f64,
    pub ground_speed: f64,
}

impl Default for AutopilotLags {
    fn default() -> Self {
        Self {
            roll: 0.5,
            load_factor: 0.5,
            ground_speed: 2.0,
        }
    }
}

fn lag(x: f64, target: f64, tau: f64, dt: f64) -> f64 {
    let alpha = if tau > 0.0 { (dt / tau).min(1.0) } else { 1.0 };
    x + alpha * (target - x)
}

/// Moves roll, load factor and ground speed toward their commands through
/// discrete first-order lags `x += min(dt / tau, 1) (cmd - x)`, then clips to
/// the limits. Position and angles are untouched.
pub fn step_autopilot(
    state: &UavState,
    cmd: &Commands,
    limits: &UavLimits,
    lags: &AutopilotLags,
    dt: f64,
) -> UavState {
    let mut next = *state;
    next.roll = lag(state.roll, cmd.roll, lags.roll, dt).clamp(limits.roll_min, limits.roll_max);
    next.load_factor = lag(state.load_factor, cmd.load_factor, lags.load_factor, dt)
        .clamp(limits.load_factor_min, limits.load_factor_max);
    next.ground_speed = lag(state.ground_speed, cmd.ground_speed, lags.ground_speed, dt)
        .clamp(limits.speed_min, limits.speed_max);
    next
}

/// Angle-rate disturbances acting on course and flight-path angle, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Disturbance {
    pub d_chi: f64,
    pub d_gamma: f64,
}

/// Kinematic integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub gravity: f64,
    /// Time constant of yaw relaxing toward course; zero pins yaw to course.
    pub yaw_lag: f64,
}

impl Default for Kinematics {
    fn default() -> Self {
        Self {
            gravity: GRAVITY,
            yaw_lag: 1.0,
        }
    }
}

type KinVec = [f64; 6]; // north, east, height, chi, gamma, psi

impl Kinematics {
    fn derivative(&self, x: &KinVec, v: f64, roll: f64, n_lf: f64, d: &Disturbance) -> KinVec {
        let [_, _, _, chi, gamma, psi] = *x;
        let (sg, cg) = (libm::sin(gamma), libm::cos(gamma));
        let g_v = self.gravity / v;
        let psi_dot = if self.yaw_lag > 0.0 {
            wrap_angle(chi - psi) / self.yaw_lag
        } else {
            0.0
        };
        [
            v * cg * libm::cos(chi),
            v * cg * libm::sin(chi),
            v * sg,
            g_v * libm::tan(roll) * libm::cos(chi - psi) + d.d_chi,
            g_v * (n_lf * libm::cos(roll) - cg) + d.d_gamma,
            psi_dot,
        ]
    }

    /// One RK4 step of the course / flight-path kinematics with ground speed,
    /// roll, load factor and disturbance held over the step.
    pub fn step(&self, state: &UavState, d: &Disturbance, dt: f64) -> UavState {
        let psi0 = if self.yaw_lag > 0.0 {
            state.yaw
        } else {
            state.course
        };
        let x0: KinVec = [
            state.position.north,
            state.position.east,
            state.position.height,
            state.course,
            state.flight_path,
            psi0,
        ];
        let (v, roll, n_lf) = (state.ground_speed, state.roll, state.load_factor);
        let f = |x: &KinVec| self.derivative(x, v, roll, n_lf, d);
        let add = |x: &KinVec, k: &KinVec, h: f64| -> KinVec {
            let mut out = *x;
            for i in 0..6 {
                out[i] += h * k[i];
            }
            out
        };

        let k1 = f(&x0);
        let k2 = f(&add(&x0, &k1, dt / 2.0));
        let k3 = f(&add(&x0, &k2, dt / 2.0));
        let k4 = f(&add(&x0, &k3, dt));
        let mut x = x0;
        for i in 0..6 {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }

        let course = wrap_angle(x[3]);
        let mut next = *state;
        next.position = Point3::new(x[0], x[1], x[2]);
        next.course = course;
        next.flight_path = x[4].clamp(-FRAC_PI_2 + GAMMA_MARGIN, FRAC_PI_2 - GAMMA_MARGIN);
        next.yaw = if self.yaw_lag > 0.0 {
            wrap_angle(x[5])
        } else {
            course
        };
        next
    }
}

pub fn step_kinematics(state: &UavState, d: &Disturbance, dt: f64) -> UavState {
    Kinematics::default().step(state, d, dt)
}

/// Turbulence and ambient wind parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindParams {
    /// Ambient wind, inertial north / east / down, m/s.
    pub ambient_ned: [f64; 3],
    /// Turbulence intensities along u, v, w, m/s.
    pub sigma: [f64; 3],
    /// Turbulence length scales along u, v, w, meters.
    pub length_scale: [f64; 3],
    pub airspeed_nominal: f64,
    /// Clip applied to each disturbance channel, rad/s.
    pub d_max: f64,
}

impl Default for WindParams {
    fn default() -> Self {
        Self {
            ambient_ned: [2.5, 0.0, 0.0],
            sigma: [2.12, 2.12, 1.4],
            length_scale: [200.0, 200.0, 50.0],
            airspeed_nominal: 13.5,
            d_max: 0.1,
        }
    }
}

impl WindParams {
    pub fn calm() -> Self {
        Self {
            ambient_ned: [0.0; 3],
            sigma: [0.0; 3],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if self.sigma.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err("turbulence intensities must be finite and non-negative");
        }
        if self
            .length_scale
            .iter()
            .any(|l| !(*l > 0.0) || !l.is_finite())
        {
            return Err("turbulence length scales must be positive");
        }
        if !(self.airspeed_nominal > 0.0) {
            return Err("nominal airspeed must be positive");
        }
        if !(self.d_max >= 0.0) {
            return Err("disturbance clip must be non-negative");
        }
        if self.ambient_ned.iter().any(|a| !a.is_finite()) {
            return Err("ambient wind must be finite");
        }
        Ok(())
    }
}

/// Per-axis first-order Gauss-Markov gust filters with stationary standard
/// deviation `sigma` and correlation time `L / V`, mapped to angle-rate
/// disturbances by the nominal airspeed. Owned by a single vehicle.
#[derive(Debug, Clone)]
pub struct WindModel {
    params: WindParams,
    gust: [f64; 3],
    rng: ChaCha8Rng,
}

impl WindModel {
    pub fn new(params: WindParams, seed: u64) -> Self {
        Self::with_rng(params, ChaCha8Rng::seed_from_u64(seed))
    }

    /// Filters start in their stationary distribution.
    pub fn with_rng(params: WindParams, mut rng: ChaCha8Rng) -> Self {
        let mut gust = [0.0; 3];
        for (g, sigma) in gust.iter_mut().zip(params.sigma) {
            let n: f64 = StandardNormal.sample(&mut rng);
            *g = sigma * n;
        }
        Self { params, gust, rng }
    }

    pub fn params(&self) -> &WindParams {
        &self.params
    }

    /// Current gust velocities (u, v, w), m/s.
    pub fn gust(&self) -> [f64; 3] {
        self.gust
    }

    fn advance(&mut self, dt: f64) {
        let v = self.params.airspeed_nominal;
        for axis in 0..3 {
            let a = libm::exp(-v * dt / self.params.length_scale[axis]);
            let n: f64 = StandardNormal.sample(&mut self.rng);
            self.gust[axis] =
                a * self.gust[axis] + self.params.sigma[axis] * libm::sqrt(1.0 - a * a) * n;
        }
    }

    /// Advances the filters by `dt` and returns the disturbance for a vehicle
    /// flying on `course`. Lateral gust plus the ambient cross-wind component
    /// drives `d_chi`; vertical gust plus ambient updraft drives `d_gamma`.
    pub fn sample_on_course(&mut self, dt: f64, course: f64) -> Disturbance {
        self.advance(dt);
        let [an, ae, ad] = self.params.ambient_ned;
        let cross = -an * libm::sin(course) + ae * libm::cos(course);
        let lateral = self.gust[1] + cross;
        let vertical = self.gust[2] - ad;
        let v = self.params.airspeed_nominal;
        let clip = self.params.d_max;
        Disturbance {
            d_chi: (lateral / v).clamp(-clip, clip),
            d_gamma: (vertical / v).clamp(-clip, clip),
        }
    }
}

/// Disturbance sample with the body frame aligned to north.
pub fn sample_disturbance(wind: &mut WindModel, dt: f64) -> Disturbance {
    wind.sample_on_course(dt, 0.0)
}
