//! Terrain, obstacle geometry and the line-of-sight predicates used by the
//! replanner.
//!
//! Heights are positive-up everywhere. Lateral coordinates are `(north, east)`
//! in meters on a local tangent plane.

use alloc::vec::Vec;
use core::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("query ({north}, {east}) lies outside the elevation grid")]
    OutOfBounds { north: f64, east: f64 },
    #[error("invalid elevation grid: {0}")]
    InvalidGrid(&'static str),
    #[error("sampling step must be positive, got {0}")]
    InvalidStep(f64),
}

/// A point in the local frame: north, east, height (up).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub north: f64,
    pub east: f64,
    pub height: f64,
}

impl Point3 {
    pub const fn new(north: f64, east: f64, height: f64) -> Self {
        Self {
            north,
            east,
            height,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.north.is_finite() && self.east.is_finite() && self.height.is_finite()
    }

    pub fn sub(&self, other: &Point3) -> [f64; 3] {
        [
            self.north - other.north,
            self.east - other.east,
            self.height - other.height,
        ]
    }

    pub fn offset(&self, d: [f64; 3]) -> Point3 {
        Point3::new(self.north + d[0], self.east + d[1], self.height + d[2])
    }

    /// Linear interpolation `self + s * (other - self)`.
    pub fn lerp(&self, other: &Point3, s: f64) -> Point3 {
        Point3::new(
            self.north + s * (other.north - self.north),
            self.east + s * (other.east - self.east),
            self.height + s * (other.height - self.height),
        )
    }
}

pub fn lateral_distance(a: &Point3, b: &Point3) -> f64 {
    let dn = b.north - a.north;
    let de = b.east - a.east;
    libm::sqrt(dn * dn + de * de)
}

pub fn distance3(a: &Point3, b: &Point3) -> f64 {
    let [dn, de, dh] = b.sub(a);
    libm::sqrt(dn * dn + de * de + dh * dh)
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    x - 2.0 * PI * libm::ceil((x - PI) / (2.0 * PI))
}

/// Bearing (course) and elevation (flight-path) angle of the line of sight
/// `from -> to`. `None` when the points coincide.
pub fn bearing_elevation(from: &Point3, to: &Point3) -> Option<(f64, f64)> {
    let [dn, de, dh] = to.sub(from);
    let horizontal = libm::sqrt(dn * dn + de * de);
    if horizontal == 0.0 && dh == 0.0 {
        return None;
    }
    Some((libm::atan2(de, dn), libm::atan2(dh, horizontal)))
}

/// Unit velocity direction for a course / flight-path angle pair.
pub fn heading_vector(course: f64, flight_path: f64) -> [f64; 3] {
    let cg = libm::cos(flight_path);
    [
        cg * libm::cos(course),
        cg * libm::sin(course),
        libm::sin(flight_path),
    ]
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &[f64; 3]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Regular elevation raster. Row `r` lies at `origin_north + r * cell_size`,
/// column `c` at `origin_east + c * cell_size`; storage is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DemGrid {
    origin_north: f64,
    origin_east: f64,
    cell_size: f64,
    n_rows: usize,
    n_cols: usize,
    elevation: Vec<f64>,
}

impl DemGrid {
    pub fn new(
        origin_north: f64,
        origin_east: f64,
        cell_size: f64,
        n_rows: usize,
        n_cols: usize,
        elevation: Vec<f64>,
    ) -> Result<Self, GeoError> {
        if n_rows < 2 || n_cols < 2 {
            return Err(GeoError::InvalidGrid(
                "grid needs at least 2 rows and 2 columns",
            ));
        }
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(GeoError::InvalidGrid(
                "cell size must be positive and finite",
            ));
        }
        if !origin_north.is_finite() || !origin_east.is_finite() {
            return Err(GeoError::InvalidGrid("origin must be finite"));
        }
        if elevation.len() != n_rows * n_cols {
            return Err(GeoError::InvalidGrid(
                "elevation count does not match rows x cols",
            ));
        }
        if elevation.iter().any(|v| !v.is_finite()) {
            return Err(GeoError::InvalidGrid("elevation values must be finite"));
        }
        Ok(Self {
            origin_north,
            origin_east,
            cell_size,
            n_rows,
            n_cols,
            elevation,
        })
    }

    /// Constant-elevation grid, mostly useful in tests.
    pub fn flat(
        origin_north: f64,
        origin_east: f64,
        cell_size: f64,
        n_rows: usize,
        n_cols: usize,
        level: f64,
    ) -> Result<Self, GeoError> {
        Self::new(
            origin_north,
            origin_east,
            cell_size,
            n_rows,
            n_cols,
            alloc::vec![level; n_rows * n_cols],
        )
    }

    pub fn origin_north(&self) -> f64 {
        self.origin_north
    }
    pub fn origin_east(&self) -> f64 {
        self.origin_east
    }
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }
    pub fn elevations(&self) -> &[f64] {
        &self.elevation
    }

    pub fn node(&self, row: usize, col: usize) -> f64 {
        self.elevation[row * self.n_cols + col]
    }

    pub fn max_north(&self) -> f64 {
        self.origin_north + (self.n_rows - 1) as f64 * self.cell_size
    }

    pub fn max_east(&self) -> f64 {
        self.origin_east + (self.n_cols - 1) as f64 * self.cell_size
    }

    pub fn contains(&self, north: f64, east: f64) -> bool {
        north >= self.origin_north
            && north <= self.max_north()
            && east >= self.origin_east
            && east <= self.max_east()
    }

    /// Bilinear terrain elevation at `(north, east)`.
    pub fn elevation(&self, north: f64, east: f64) -> Result<f64, GeoError> {
        if !self.contains(north, east) {
            return Err(GeoError::OutOfBounds { north, east });
        }
        let fr = (north - self.origin_north) / self.cell_size;
        let fc = (east - self.origin_east) / self.cell_size;
        // The last row/column is addressed from the cell below it.
        let r0 = (libm::floor(fr) as usize).min(self.n_rows - 2);
        let c0 = (libm::floor(fc) as usize).min(self.n_cols - 2);
        let tr = fr - r0 as f64;
        let tc = fc - c0 as f64;

        let v00 = self.node(r0, c0);
        let v01 = self.node(r0, c0 + 1);
        let v10 = self.node(r0 + 1, c0);
        let v11 = self.node(r0 + 1, c0 + 1);

        Ok(v00 * (1.0 - tr) * (1.0 - tc)
            + v01 * (1.0 - tr) * tc
            + v10 * tr * (1.0 - tc)
            + v11 * tr * tc)
    }
}

pub fn dem_elevation(grid: &DemGrid, north: f64, east: f64) -> Result<f64, GeoError> {
    grid.elevation(north, east)
}

/// A sudden threat, modeled as a vertical cylinder of radius `lateral_radius`
/// over the height band `[base_height, top_height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub center_north: f64,
    pub center_east: f64,
    pub lateral_radius: f64,
    pub base_height: f64,
    pub top_height: f64,
    pub activation_time: f64,
}

impl Obstacle {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.lateral_radius > 0.0) {
            return Err("obstacle lateral radius must be positive");
        }
        if !(self.top_height > self.base_height) {
            return Err("obstacle top height must exceed its base height");
        }
        if !self.center_north.is_finite()
            || !self.center_east.is_finite()
            || !self.lateral_radius.is_finite()
            || !self.base_height.is_finite()
            || !self.top_height.is_finite()
            || self.activation_time.is_nan()
        {
            return Err("obstacle fields must be finite");
        }
        Ok(())
    }

    pub fn center(&self) -> Point3 {
        Point3::new(self.center_north, self.center_east, 0.0)
    }

    pub fn is_active(&self, now: f64) -> bool {
        now >= self.activation_time
    }

    /// Whether `p` lies inside the (closed) cylinder.
    pub fn contains(&self, p: &Point3) -> bool {
        p.height >= self.base_height
            && p.height <= self.top_height
            && lateral_distance(p, &self.center()) <= self.lateral_radius
    }

    /// Exact segment / closed-cylinder intersection, ignoring activation time.
    pub fn intersects_segment(&self, a: &Point3, b: &Point3) -> bool {
        // Canonical endpoint order makes the test exactly symmetric.
        let (a, b) = if (b.north, b.east, b.height) < (a.north, a.east, a.height) {
            (b, a)
        } else {
            (a, b)
        };

        let Some((h_lo, h_hi)) = self.height_window(a.height, b.height) else {
            return false;
        };

        let dn = b.north - a.north;
        let de = b.east - a.east;
        let rn = a.north - self.center_north;
        let re = a.east - self.center_east;
        let qa = dn * dn + de * de;
        let qb = 2.0 * (dn * rn + de * re);
        let qc = rn * rn + re * re - self.lateral_radius * self.lateral_radius;

        let (l_lo, l_hi) = if qa == 0.0 {
            if qc > 0.0 {
                return false;
            }
            (0.0, 1.0)
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc < 0.0 {
                return false;
            }
            let sq = libm::sqrt(disc);
            ((-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa))
        };

        let lo = l_lo.max(h_lo).max(0.0);
        let hi = l_hi.min(h_hi).min(1.0);
        lo <= hi
    }

    /// Parameter range of the segment `s in [0, 1]` whose height lies in the
    /// obstacle band.
    fn height_window(&self, ha: f64, hb: f64) -> Option<(f64, f64)> {
        let dh = hb - ha;
        if dh == 0.0 {
            return (ha >= self.base_height && ha <= self.top_height).then_some((0.0, 1.0));
        }
        let s_base = (self.base_height - ha) / dh;
        let s_top = (self.top_height - ha) / dh;
        let (lo, hi) = if s_base <= s_top {
            (s_base, s_top)
        } else {
            (s_top, s_base)
        };
        let lo = lo.max(0.0);
        let hi = hi.min(1.0);
        (lo <= hi).then_some((lo, hi))
    }
}

/// True iff the obstacle is active at `now` and the segment `a -> b` touches it.
pub fn segment_obstructed(a: &Point3, b: &Point3, obstacle: &Obstacle, now: f64) -> bool {
    obstacle.is_active(now) && obstacle.intersects_segment(a, b)
}

/// Samples `a -> b` at intervals no longer than `step` and checks every sample
/// clears the terrain by `clearance`.
pub fn segment_above_terrain(
    grid: &DemGrid,
    a: &Point3,
    b: &Point3,
    clearance: f64,
    step: f64,
) -> Result<bool, GeoError> {
    if !(step > 0.0) {
        return Err(GeoError::InvalidStep(step));
    }
    let n = (libm::ceil(distance3(a, b) / step) as usize).max(1);
    for i in 0..=n {
        let p = a.lerp(b, i as f64 / n as f64);
        if p.height < grid.elevation(p.north, p.east)? + clearance {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_cell(corners: [f64; 4]) -> DemGrid {
        // corners: (r0,c0), (r0,c1), (r1,c0), (r1,c1)
        DemGrid::new(0.0, 0.0, 1.0, 2, 2, corners.to_vec()).unwrap()
    }

    fn obstacle(r: f64) -> Obstacle {
        Obstacle {
            center_north: 0.0,
            center_east: 0.0,
            lateral_radius: r,
            base_height: 0.0,
            top_height: 100.0,
            activation_time: 0.0,
        }
    }

    #[test]
    fn elevation_at_node_is_stored_value() {
        let mut z = alloc::vec![0.0; 9];
        z[4] = 120.0;
        let g = DemGrid::new(100.0, 200.0, 30.0, 3, 3, z).unwrap();
        assert_eq!(g.elevation(130.0, 230.0).unwrap(), 120.0);
        assert_eq!(dem_elevation(&g, 100.0, 200.0).unwrap(), 0.0);
    }

    #[test]
    fn elevation_midpoint_of_cell() {
        let g = unit_cell([0.0, 0.0, 10.0, 10.0]);
        assert_eq!(g.elevation(0.5, 0.5).unwrap(), 5.0);
    }

    #[test]
    fn elevation_fractional_offsets_match_hand_evaluation() {
        // Corners 0 (r0,c0), 4 (r0,c1), 8 (r1,c0), 12 (r1,c1); query at
        // north fraction 0.25, east fraction 0.75.
        // Along east at r0: 0 + 0.75 * 4 = 3; at r1: 8 + 0.75 * 4 = 11.
        // Along north: 3 + 0.25 * (11 - 3) = 5.
        let g = unit_cell([0.0, 4.0, 8.0, 12.0]);
        let v = g.elevation(0.25, 0.75).unwrap();
        assert!((v - 5.0).abs() <= 1e-12, "{v}");
    }

    #[test]
    fn elevation_out_of_bounds_reports_coordinate() {
        let g = unit_cell([0.0; 4]);
        assert_eq!(
            g.elevation(1.5, 0.2),
            Err(GeoError::OutOfBounds {
                north: 1.5,
                east: 0.2
            })
        );
        assert!(g.elevation(-1e-9, 0.0).is_err());
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(DemGrid::new(0.0, 0.0, 1.0, 1, 3, alloc::vec![0.0; 3]).is_err());
        assert!(DemGrid::new(0.0, 0.0, 0.0, 2, 2, alloc::vec![0.0; 4]).is_err());
        assert!(DemGrid::new(0.0, 0.0, 1.0, 2, 2, alloc::vec![0.0; 3]).is_err());
        assert!(DemGrid::new(0.0, 0.0, 1.0, 2, 2, alloc::vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn distances() {
        let o = Point3::new(0.0, 0.0, 0.0);
        assert_eq!(lateral_distance(&o, &Point3::new(3.0, 4.0, 100.0)), 5.0);
        assert_eq!(lateral_distance(&o, &o), 0.0);
        assert_eq!(
            lateral_distance(&Point3::new(1.0, 1.0, 0.0), &Point3::new(1.0, 1.0, 50.0)),
            0.0
        );
        assert_eq!(distance3(&o, &Point3::new(0.0, 0.0, 7.0)), 7.0);
        assert_eq!(distance3(&Point3::new(1.0, 2.0, 2.0), &o), 3.0);
        assert_eq!(distance3(&o, &o), 0.0);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(6.2) - (6.2 - 2.0 * PI)).abs() < 1e-15);
        assert_eq!(wrap_angle(0.3), 0.3);
    }

    #[test]
    fn segment_clear_of_cylinder() {
        let r = 10.0;
        let a = Point3::new(-2.0 * r, 2.0 * r, 50.0);
        let b = Point3::new(2.0 * r, 2.0 * r, 50.0);
        assert!(!segment_obstructed(&a, &b, &obstacle(r), 0.0));
    }

    #[test]
    fn segment_through_center_is_obstructed() {
        let r = 10.0;
        let a = Point3::new(-2.0 * r, 0.0, 50.0);
        let b = Point3::new(2.0 * r, 0.0, 50.0);
        assert!(segment_obstructed(&a, &b, &obstacle(r), 0.0));
        // Inactive before activation.
        let mut late = obstacle(r);
        late.activation_time = 10.0;
        assert!(!segment_obstructed(&a, &b, &late, 9.999));
        assert!(segment_obstructed(&a, &b, &late, 10.0));
    }

    #[test]
    fn tangent_segment_counts_as_obstructed() {
        // Line north = +R touches the circle at (R, 0) exactly: the quadratic
        // discriminant is 256 R^4 - 4 * 16 R^2 * 4 R^2 = 0.
        let r = 8.0;
        let a = Point3::new(r, -2.0 * r, 50.0);
        let b = Point3::new(r, 2.0 * r, 50.0);
        assert!(segment_obstructed(&a, &b, &obstacle(r), 0.0));
        let a = Point3::new(r + 1e-6, -2.0 * r, 50.0);
        let b = Point3::new(r + 1e-6, 2.0 * r, 50.0);
        assert!(!segment_obstructed(&a, &b, &obstacle(r), 0.0));
    }

    #[test]
    fn vertical_and_height_band_cases() {
        let o = obstacle(10.0);
        assert!(o.intersects_segment(&Point3::new(1.0, 1.0, -50.0), &Point3::new(1.0, 1.0, 150.0)));
        assert!(!o.intersects_segment(&Point3::new(1.0, 1.0, 101.0), &Point3::new(1.0, 1.0, 150.0)));
        // Climbing through the top inside the footprint.
        assert!(o.intersects_segment(
            &Point3::new(-20.0, 0.0, 90.0),
            &Point3::new(20.0, 0.0, 130.0)
        ));
        // Crosses the footprint only above the top.
        assert!(!o.intersects_segment(
            &Point3::new(-20.0, 0.0, 105.0),
            &Point3::new(20.0, 0.0, 140.0)
        ));
        // Segment ending before the cylinder.
        assert!(!o.intersects_segment(
            &Point3::new(-40.0, 0.0, 50.0),
            &Point3::new(-10.5, 0.0, 50.0)
        ));
    }

    #[test]
    fn terrain_clearance_checks() {
        let flat = DemGrid::flat(0.0, 0.0, 10.0, 11, 11, 0.0).unwrap();
        let a = Point3::new(0.0, 0.0, 100.0);
        let b = Point3::new(100.0, 100.0, 100.0);
        assert!(segment_above_terrain(&flat, &a, &b, 10.0, 5.0).unwrap());
        let dip = Point3::new(100.0, 100.0, 5.0);
        assert!(!segment_above_terrain(&flat, &a, &dip, 10.0, 5.0).unwrap());
        assert!(segment_above_terrain(&flat, &a, &b, 10.0, 0.0).is_err());
        let outside = Point3::new(200.0, 0.0, 100.0);
        assert!(segment_above_terrain(&flat, &a, &outside, 10.0, 5.0).is_err());
    }

    #[test]
    fn terrain_ridge_agrees_with_dense_sampling() {
        // Single-peak ridge across the segment.
        let n = 41;
        let mut z = alloc::vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                let dc = c as f64 - 20.0;
                z[r * n + c] = (80.0 - 8.0 * dc.abs()).max(0.0);
            }
        }
        let g = DemGrid::new(0.0, 0.0, 10.0, n, n, z).unwrap();
        let dense = |a: &Point3, b: &Point3, clearance: f64, step: f64| {
            let fine = step / 10.0;
            let m = libm::ceil(distance3(a, b) / fine) as usize;
            (0..=m).all(|i| {
                let p = a.lerp(b, i as f64 / m as f64);
                p.height >= g.elevation(p.north, p.east).unwrap() + clearance
            })
        };
        for h in [60.0, 85.0, 89.0, 90.5, 100.0] {
            let a = Point3::new(200.0, 0.0, h);
            let b = Point3::new(200.0, 400.0, h);
            assert_eq!(
                segment_above_terrain(&g, &a, &b, 10.0, 5.0).unwrap(),
                dense(&a, &b, 10.0, 5.0),
                "height {h}"
            );
        }
    }

    fn pt() -> impl Strategy<Value = Point3> {
        (-200.0..200.0f64, -200.0..200.0f64, -50.0..150.0f64)
            .prop_map(|(n, e, h)| Point3::new(n, e, h))
    }

    proptest! {
        #[test]
        fn elevation_continuous_across_cell_edges(
            z in proptest::collection::vec(-500.0..500.0f64, 16),
            t in 0.0..1.0f64,
        ) {
            let g = DemGrid::new(0.0, 0.0, 10.0, 4, 4, z).unwrap();
            // Shared edge at east = 10 between columns 0-1 and 1-2.
            let north = 30.0 * t;
            let left = g.elevation(north, 10.0 - 1e-12).unwrap();
            let right = g.elevation(north, 10.0).unwrap();
            prop_assert!((left - right).abs() <= 1e-9);
        }

        #[test]
        fn lateral_never_exceeds_3d(a in pt(), b in pt()) {
            prop_assert!(lateral_distance(&a, &b) <= distance3(&a, &b));
        }

        #[test]
        fn obstruction_symmetric(a in pt(), b in pt(), r in 1.0..80.0f64) {
            let o = obstacle(r);
            prop_assert_eq!(o.intersects_segment(&a, &b), o.intersects_segment(&b, &a));
        }

        #[test]
        fn segments_outside_band_never_obstructed(
            a in pt(), b in pt(), r in 1.0..300.0f64, lift in 0.001..100.0f64,
        ) {
            let o = obstacle(r);
            let above_a = Point3::new(a.north, a.east, o.top_height + lift);
            let above_b = Point3::new(b.north, b.east, o.top_height + lift + b.height.abs());
            prop_assert!(!o.intersects_segment(&above_a, &above_b));
            let below_a = Point3::new(a.north, a.east, o.base_height - lift);
            let below_b = Point3::new(b.north, b.east, o.base_height - lift - a.height.abs());
            prop_assert!(!o.intersects_segment(&below_a, &below_b));
        }
    }
}
