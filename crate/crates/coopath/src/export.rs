//! Run directory layout.
//!
//! | file | content |
//! |------|---------|
//! | `uav_<id>.csv` | one row per tick |
//! | `events.csv` | replans, monitor violations, close pairs, arrivals |
//! | `metrics.json` | run metrics |
//! | `manifest.json` | scenario provenance, seed, version, file digests |
//! | `timing.json` | wall-clock measurements (not reproducible) |
//!
//! Everything but `timing.json` is a pure function of scenario and seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use coopath_core::metrics::Metrics;
use coopath_core::sim::{EventKind, RunLog, TickRecord};

use crate::scenario::{sha256_hex, LoadedScenario};

pub const MANIFEST: &str = "manifest.json";
pub const METRICS: &str = "metrics.json";
pub const EVENTS: &str = "events.csv";
pub const TIMING: &str = "timing.json";
pub const FORMAT_VERSION: u32 = 1;

pub const TRAJECTORY_COLUMNS: [&str; 34] = [
    "tick",
    "t_s",
    "p_n_m",
    "p_e_m",
    "h_m",
    "chi_rad",
    "gamma_rad",
    "psi_rad",
    "phi_rad",
    "n_lf",
    "v_g_mps",
    "theta_s",
    "cursor",
    "phi_c_rad",
    "n_lf_c",
    "v_g_c_mps",
    "eta_lat_rad",
    "eta_lon_rad",
    "theta_dot",
    "theta_ref_s",
    "active_n_m",
    "active_e_m",
    "active_h_m",
    "originals_passed",
    "premise_lat",
    "premise_lon",
    "premise_sign",
    "margin_mps",
    "eta_ok",
    "obstructed",
    "replanned",
    "arrived",
    "inbox",
    "neighbors",
];

pub const EVENT_COLUMNS: [&str; 5] = ["tick", "t_s", "uav_id", "event", "detail"];

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavMetrics {
    pub id: u64,
    pub ae_m: Option<f64>,
    pub rmse_m: Option<f64>,
    pub waypoints_visited: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub ae_bar_m: f64,
    pub rmse_bar_m: f64,
    pub md_s: f64,
    pub md_final_s: f64,
    pub rt_s: f64,
    pub replan_count: usize,
    pub detour_overhead_s: f64,
    pub per_uav: Vec<UavMetrics>,
}

impl MetricsFile {
    pub fn new(ids: &[u64], m: &Metrics) -> Self {
        Self {
            ae_bar_m: m.ae_bar,
            rmse_bar_m: m.rmse_bar,
            md_s: m.md,
            md_final_s: m.md_final,
            rt_s: m.rt,
            replan_count: m.replan_count,
            detour_overhead_s: m.detour_overhead_s,
            per_uav: ids
                .iter()
                .enumerate()
                .map(|(i, id)| UavMetrics {
                    id: *id,
                    ae_m: m.per_uav_ae.get(i).copied().flatten(),
                    rmse_m: m.per_uav_rmse.get(i).copied().flatten(),
                    waypoints_visited: m.waypoints_visited.get(i).copied().unwrap_or(0),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub software: String,
    pub software_version: String,
    pub scenario_name: String,
    pub scenario_path: PathBuf,
    pub scenario_sha256: String,
    pub dem_path: PathBuf,
    pub dem_sha256: String,
    pub seed: u64,
    pub dt_s: f64,
    pub n_ticks: usize,
    pub uav_ids: Vec<u64>,
    /// Reproducible outputs, in write order.
    pub files: Vec<FileDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplanTiming {
    pub tick: usize,
    pub uav_id: u64,
    pub wall_clock_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub run_wall_us: u64,
    pub replans: Vec<ReplanTiming>,
}

impl Timing {
    pub fn new(log: &RunLog, run_wall_us: u64) -> Self {
        let replans = log
            .events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Replan { wall_clock_us, .. } => Some(ReplanTiming {
                    tick: e.tick,
                    uav_id: log.uav_ids[e.uav],
                    wall_clock_us,
                }),
                _ => None,
            })
            .collect();
        Self {
            run_wall_us,
            replans,
        }
    }
}

pub fn trajectory_file_name(id: u64) -> String {
    format!("uav_{id}.csv")
}

/// Shortest text that parses back to the same value.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn trajectory_row(r: &TickRecord) -> Vec<String> {
    let s = &r.state;
    vec![
        r.tick.to_string(),
        num(r.t),
        num(s.position.north),
        num(s.position.east),
        num(s.position.height),
        num(s.course),
        num(s.flight_path),
        num(s.yaw),
        num(s.roll),
        num(s.load_factor),
        num(s.ground_speed),
        num(r.theta),
        r.cursor.to_string(),
        num(r.commands.roll),
        num(r.commands.load_factor),
        num(r.commands.ground_speed),
        num(r.angles.eta_lat),
        num(r.angles.eta_lon),
        num(r.theta_dot),
        num(r.theta_ref),
        num(r.active.north),
        num(r.active.east),
        num(r.active.height),
        r.originals_passed.to_string(),
        flag(r.monitor.lateral).into(),
        flag(r.monitor.longitudinal).into(),
        flag(r.monitor.sign).into(),
        num(r.monitor.margin),
        flag(r.eta_within_limits).into(),
        flag(r.obstructed).into(),
        flag(r.replanned).into(),
        flag(r.arrived).into(),
        r.inbox_size.to_string(),
        r.neighbors.to_string(),
    ]
}

fn event_detail(kind: &EventKind, ids: &[u64]) -> String {
    let mut out = String::new();
    match kind {
        EventKind::Replan {
            waypoints,
            costs,
            attempts,
            terrain_rejections,
            detour_overhead_s,
            ..
        } => {
            let wps: Vec<String> = waypoints
                .iter()
                .map(|w| format!("{}:{}:{}", num(w.north), num(w.east), num(w.height)))
                .collect();
            let costs: Vec<String> = costs.iter().map(|c| num(*c)).collect();
            let _ = write!(
                out,
                "waypoints={};costs={};attempts={attempts};terrain_rejections={terrain_rejections};detour_overhead_s={}",
                wps.join("|"),
                costs.join("|"),
                num(*detour_overhead_s)
            );
        }
        EventKind::EtaLimitViolation { eta_lat, eta_lon } => {
            let _ = write!(
                out,
                "eta_lat_rad={};eta_lon_rad={}",
                num(*eta_lat),
                num(*eta_lon)
            );
        }
        EventKind::ClosePair { other, distance } => {
            let _ = write!(
                out,
                "other_uav_id={};distance_m={}",
                ids[*other],
                num(*distance)
            );
        }
        EventKind::ObstacleIncursion | EventKind::Arrival => {}
    }
    out
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> ExportError + '_ {
    move |source| ExportError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<Vec<u8>, ExportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.into_inner().map_err(|e| ExportError::Io {
        path: path.to_path_buf(),
        source: e.into_error(),
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ExportError> {
    std::fs::write(path, bytes).map_err(|source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn json_bytes<T: Serialize>(path: &Path, value: &T) -> Result<Vec<u8>, ExportError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| ExportError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes the reproducible outputs and the manifest into `dir`, creating it
/// if needed. Returns the manifest.
pub fn write_run(
    dir: &Path,
    loaded: &LoadedScenario,
    log: &RunLog,
    metrics: &Metrics,
) -> Result<Manifest, ExportError> {
    std::fs::create_dir_all(dir).map_err(|source| ExportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    let mut emit = |name: String, bytes: Vec<u8>| -> Result<(), ExportError> {
        write_file(&dir.join(&name), &bytes)?;
        files.push(FileDigest {
            name,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    };

    for (i, id) in log.uav_ids.iter().enumerate() {
        let name = trajectory_file_name(*id);
        let bytes = write_csv(
            &dir.join(&name),
            &TRAJECTORY_COLUMNS,
            log.records[i].iter().map(trajectory_row),
        )?;
        emit(name, bytes)?;
    }
    let events = log.events.iter().map(|e| {
        vec![
            e.tick.to_string(),
            num(e.t),
            log.uav_ids[e.uav].to_string(),
            e.kind.name().to_string(),
            event_detail(&e.kind, &log.uav_ids),
        ]
    });
    let bytes = write_csv(&dir.join(EVENTS), &EVENT_COLUMNS, events)?;
    emit(EVENTS.into(), bytes)?;
    let bytes = json_bytes(&dir.join(METRICS), &MetricsFile::new(&log.uav_ids, metrics))?;
    emit(METRICS.into(), bytes)?;

    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        software: env!("CARGO_PKG_NAME").into(),
        software_version: env!("CARGO_PKG_VERSION").into(),
        scenario_name: loaded.scenario.name.clone(),
        scenario_path: loaded.scenario_path.clone(),
        scenario_sha256: loaded.scenario_sha256.clone(),
        dem_path: loaded.dem_path.clone(),
        dem_sha256: loaded.dem_sha256.clone(),
        seed: loaded.scenario.seed,
        dt_s: log.dt,
        n_ticks: log.n_ticks,
        uav_ids: log.uav_ids.clone(),
        files,
    };
    let path = dir.join(MANIFEST);
    write_file(&path, &json_bytes(&path, &manifest)?)?;
    Ok(manifest)
}

pub fn write_timing(dir: &Path, timing: &Timing) -> Result<(), ExportError> {
    let path = dir.join(TIMING);
    write_file(&path, &json_bytes(&path, timing)?)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ExportError> {
    let bytes = std::fs::read(path).map_err(|source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_slice(&bytes).map_err(|source| ExportError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, ExportError> {
    read_json(&dir.join(MANIFEST))
}

pub fn read_metrics(dir: &Path) -> Result<MetricsFile, ExportError> {
    read_json(&dir.join(METRICS))
}
