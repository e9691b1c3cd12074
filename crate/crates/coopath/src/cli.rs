//! Command-line front end. Exit codes: 0 success, 2 invalid input
//! (scenario, elevation file, manifest), 3 runtime failure (simulation
//! error, I/O, replay mismatch).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::export::{read_metrics, MetricsFile};
use crate::runner::{replay_check, run_to_dir, ReplayError};
use crate::scenario::load_scenario;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "coopath",
    version,
    about = "Cooperative fixed-wing path-following simulator"
)]
pub struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write its exports.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Load and check a scenario without running it.
    Validate { scenario: PathBuf },
    /// Print the metrics of a finished run.
    Metrics { run_dir: PathBuf },
    /// Re-run a finished run and compare its exports byte for byte.
    ReplayCheck { run_dir: PathBuf },
}

struct Reporter<'a> {
    json: bool,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Reporter<'_> {
    fn fail(&mut self, code: i32, message: &str) -> i32 {
        let kind = if code == EXIT_INVALID {
            "invalid"
        } else {
            "runtime"
        };
        if self.json {
            let _ = writeln!(
                self.out,
                "{}",
                json!({"status": "error", "kind": kind, "message": message})
            );
        } else {
            let _ = writeln!(self.err, "error: {message}");
        }
        code
    }
}

fn metrics_text(m: &MetricsFile) -> String {
    let mut s = format!(
        "AE_bar {:.4} m\nRMSE_bar {:.4} m\nMD {:.4} s\nMD_final {:.4} s\nRT {:.4} s\nreplans {}\ndetour_overhead {:.4} s\n",
        m.ae_bar_m, m.rmse_bar_m, m.md_s, m.md_final_s, m.rt_s, m.replan_count, m.detour_overhead_s
    );
    for u in &m.per_uav {
        let fmt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        s.push_str(&format!(
            "uav {}: AE {} m, RMSE {} m, waypoints {}\n",
            u.id,
            fmt(u.ae_m),
            fmt(u.rmse_m),
            u.waypoints_visited
        ));
    }
    s
}

/// Parses `args` (program name first) and executes; returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let mut rep = Reporter {
        json: cli.json,
        out,
        err,
    };

    match cli.command {
        Command::Validate { scenario } => match load_scenario(&scenario) {
            Ok(l) => {
                let s = &l.scenario;
                if rep.json {
                    let _ = writeln!(
                        rep.out,
                        "{}",
                        json!({"status": "ok", "name": s.name, "uavs": s.uavs.len(), "n_ticks": s.n_ticks(),
                               "scenario_sha256": l.scenario_sha256})
                    );
                } else {
                    let _ = writeln!(
                        rep.out,
                        "ok: {} ({} vehicles, {} ticks)",
                        s.name,
                        s.uavs.len(),
                        s.n_ticks()
                    );
                }
                EXIT_OK
            }
            Err(e) => rep.fail(EXIT_INVALID, &e.to_string()),
        },
        Command::Run {
            scenario,
            out,
            seed,
        } => {
            let mut loaded = match load_scenario(&scenario) {
                Ok(l) => l,
                Err(e) => return rep.fail(EXIT_INVALID, &e.to_string()),
            };
            if let Some(seed) = seed {
                loaded.scenario.seed = seed;
            }
            match run_to_dir(&loaded, &out) {
                Ok(r) => {
                    let m = MetricsFile::new(&r.log.uav_ids, &r.metrics);
                    if rep.json {
                        let _ = writeln!(
                            rep.out,
                            "{}",
                            json!({"status": "ok", "out_dir": out, "seed": loaded.scenario.seed,
                                   "n_ticks": r.log.n_ticks, "metrics": m, "timing": r.timing})
                        );
                    } else {
                        let _ = writeln!(
                            rep.out,
                            "ran {} ticks with seed {} into {}",
                            r.log.n_ticks,
                            loaded.scenario.seed,
                            out.display()
                        );
                        let _ = write!(rep.out, "{}", metrics_text(&m));
                    }
                    EXIT_OK
                }
                Err(e) => rep.fail(EXIT_RUNTIME, &e.to_string()),
            }
        }
        Command::Metrics { run_dir } => match read_metrics(&run_dir) {
            Ok(m) => {
                if rep.json {
                    let _ = writeln!(rep.out, "{}", json!(m));
                } else {
                    let _ = write!(rep.out, "{}", metrics_text(&m));
                }
                EXIT_OK
            }
            Err(e) => rep.fail(EXIT_INVALID, &e.to_string()),
        },
        Command::ReplayCheck { run_dir } => match replay_check(&run_dir) {
            Ok(report) => {
                let same = report.identical();
                if rep.json {
                    let files: Vec<_> = report
                        .files
                        .iter()
                        .map(|f| json!({"name": f.name, "identical": f.identical}))
                        .collect();
                    let status = if same { "identical" } else { "different" };
                    let _ = writeln!(rep.out, "{}", json!({"status": status, "files": files}));
                } else {
                    for f in &report.files {
                        let mark = if f.identical { "same" } else { "DIFFERENT" };
                        let _ = writeln!(rep.out, "{mark} {}", f.name);
                    }
                    let _ = writeln!(rep.out, "{}", if same { "identical" } else { "different" });
                }
                if same {
                    EXIT_OK
                } else {
                    EXIT_RUNTIME
                }
            }
            Err(
                e @ (ReplayError::Manifest(_) | ReplayError::Load(_) | ReplayError::Changed { .. }),
            ) => rep.fail(EXIT_INVALID, &e.to_string()),
            Err(e) => rep.fail(EXIT_RUNTIME, &e.to_string()),
        },
    }
}
