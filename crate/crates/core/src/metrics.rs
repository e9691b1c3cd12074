//! Run metrics: closest-approach path errors, time-index spread and
//! replanning response.

use alloc::vec::Vec;

use crate::geo::{dot, Point3};
use crate::sim::{EventKind, RunLog};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    /// Mean over vehicles of the mean closest-approach error over visited
    /// original waypoints, meters.
    pub ae_bar: f64,
    pub rmse_bar: f64,
    /// Largest time-index spread over the run, seconds.
    pub md: f64,
    /// Time-index spread at the last tick, seconds.
    pub md_final: f64,
    /// Longest run of consecutive obstructed ticks of any vehicle, seconds.
    pub rt: f64,
    pub replan_count: usize,
    /// Largest detour overhead of any replan, seconds.
    pub detour_overhead_s: f64,
    pub per_uav_ae: Vec<Option<f64>>,
    pub per_uav_rmse: Vec<Option<f64>>,
    pub waypoints_visited: Vec<usize>,
}

/// Closest approach of a polyline to `w`: the error vector `w - p` at the
/// closest point.
pub fn closest_approach(track: &[Point3], w: &Point3) -> Option<[f64; 3]> {
    let mut best: Option<([f64; 3], f64)> = None;
    let mut consider = |p: Point3| {
        let e = w.sub(&p);
        let d2 = dot(&e, &e);
        if best.is_none_or(|(_, b)| d2 < b) {
            best = Some((e, d2));
        }
    };
    if track.len() == 1 {
        consider(track[0]);
    }
    for seg in track.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let ab = b.sub(&a);
        let len2 = dot(&ab, &ab);
        let s = if len2 > 0.0 {
            (dot(&w.sub(&a), &ab) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        consider(a.lerp(&b, s));
    }
    best.map(|(e, _)| e)
}

fn norm3(e: &[f64; 3]) -> f64 {
    libm::sqrt(dot(e, e))
}

/// Mean error norm and the spread statistic
/// `sqrt(sum (|e_j| - |mean e|)^2 / (m - 1))`; the latter needs two errors.
pub fn error_statistics(errors: &[[f64; 3]]) -> (Option<f64>, Option<f64>) {
    let m = errors.len();
    if m == 0 {
        return (None, None);
    }
    let ae = errors.iter().map(norm3).sum::<f64>() / m as f64;
    if m < 2 {
        return (Some(ae), None);
    }
    let mut mean = [0.0; 3];
    for e in errors {
        for k in 0..3 {
            mean[k] += e[k] / m as f64;
        }
    }
    let mean_norm = norm3(&mean);
    let ss: f64 = errors
        .iter()
        .map(|e| {
            let d = norm3(e) - mean_norm;
            d * d
        })
        .sum();
    (Some(ae), Some(libm::sqrt(ss / (m - 1) as f64)))
}

fn mean_of_some(xs: &[Option<f64>]) -> f64 {
    let vals: Vec<f64> = xs.iter().flatten().copied().collect();
    if vals.is_empty() {
        0.0
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

fn spread(thetas: impl Iterator<Item = f64>) -> f64 {
    let (mut lo, mut hi, mut count) = (f64::INFINITY, f64::NEG_INFINITY, 0);
    for th in thetas {
        lo = lo.min(th);
        hi = hi.max(th);
        count += 1;
    }
    if count < 2 {
        0.0
    } else {
        hi - lo
    }
}

pub fn compute_metrics(log: &RunLog) -> Metrics {
    let n = log.records.len();
    let mut per_uav_ae = Vec::with_capacity(n);
    let mut per_uav_rmse = Vec::with_capacity(n);
    let mut waypoints_visited = Vec::with_capacity(n);
    for i in 0..n {
        let records = &log.records[i];
        let visited = records
            .iter()
            .map(|r| r.originals_passed)
            .max()
            .unwrap_or(0);
        let mut track: Vec<Point3> = records.iter().map(|r| r.state.position).collect();
        if let Some(f) = log.final_states.get(i) {
            if !records.is_empty() {
                track.push(f.position);
            }
        }
        let errors: Vec<[f64; 3]> = log.original_paths[i]
            .iter()
            .take(visited)
            .filter_map(|w| closest_approach(&track, w))
            .collect();
        let (ae, rmse) = error_statistics(&errors);
        per_uav_ae.push(ae);
        per_uav_rmse.push(rmse);
        waypoints_visited.push(errors.len());
    }

    let mut md: f64 = 0.0;
    let mut md_final = 0.0;
    for tick in 0..log.n_ticks {
        let s = spread(
            log.records
                .iter()
                .filter_map(|r| r.get(tick))
                .filter(|r| !r.arrived)
                .map(|r| r.theta),
        );
        md = md.max(s);
        md_final = s;
    }

    let mut longest = 0usize;
    for records in &log.records {
        let mut run = 0usize;
        for r in records {
            run = if r.obstructed { run + 1 } else { 0 };
            longest = longest.max(run);
        }
    }

    let mut replan_count = 0;
    let mut detour_overhead_s: f64 = 0.0;
    for e in &log.events {
        if let EventKind::Replan {
            detour_overhead_s: o,
            ..
        } = e.kind
        {
            replan_count += 1;
            detour_overhead_s = detour_overhead_s.max(o);
        }
    }

    Metrics {
        ae_bar: mean_of_some(&per_uav_ae),
        rmse_bar: mean_of_some(&per_uav_rmse),
        md,
        md_final,
        rt: longest as f64 * log.dt,
        replan_count,
        detour_overhead_s,
        per_uav_ae,
        per_uav_rmse,
        waypoints_visited,
    }
}
