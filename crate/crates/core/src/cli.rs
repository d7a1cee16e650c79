//! Command-line front end: `simulate`, `degradation`, `airtime`, `schedule`.
//!
//! Exit codes: 0 success, 2 invalid input, 3 runtime failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::battery::BatteryState;
use crate::config::{Loaded, ScenarioConfig};
use crate::error::{Error, Result};
use crate::orbit::{self, Phase, Schedule, ScheduleRecord};
use crate::radio::{self, RadioConfig};
use crate::sim::aging::{self, AgingContext};
use crate::sim::metrics::{self, RunSummary};
use crate::sim::{self, RunOutput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "leolora", version, about = "Battery-aware LoRa MAC simulator for LEO satellites")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    /// Aligned text, `airtime` only.
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the fleet simulation and write metrics plus a summary.
    Simulate {
        /// Scenario file; the bundled default when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "leolora-out")]
        out: PathBuf,
        /// Format of the metrics stream.
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Run this many consecutive seeds in parallel.
        #[arg(long)]
        sweep: Option<u32>,
    },
    /// Capacity-fade curve of an idle battery cycling once per orbit.
    Degradation {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        years: f64,
        #[arg(long, default_value_t = 1.0)]
        resolution_days: f64,
        /// Mean state of charge held over the curve.
        #[arg(long, default_value_t = 0.825)]
        soc: f64,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Time on air and transmit energy of one packet.
    Airtime {
        /// Scenario whose radio section seeds the parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        sf: Option<u8>,
        #[arg(long)]
        bw: Option<u32>,
        /// Coding-rate denominator (4/x).
        #[arg(long)]
        cr: Option<u8>,
        #[arg(long)]
        payload: Option<u16>,
        #[arg(long)]
        preamble: Option<u16>,
        #[arg(long)]
        power_w: Option<f64>,
        #[arg(long)]
        implicit_header: bool,
        #[arg(long)]
        no_crc: bool,
        /// Force low-data-rate optimisation on or off.
        #[arg(long)]
        ldro: Option<bool>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Forecast windows and the sun/eclipse timeline, as re-loadable JSON.
    Schedule {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Horizon in seconds; one orbital period when omitted.
        #[arg(long)]
        horizon_s: Option<f64>,
        /// Node count; the scenario's when omitted.
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

/// Parses `args` (program name first) and runs the command. Diagnostics go
/// to `err`, results without an `--out` to `out`.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() {
                EXIT_INVALID
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn load(config: Option<&Path>, err: &mut dyn Write) -> Result<ScenarioConfig> {
    let Loaded { scenario, warnings } = match config {
        Some(p) => ScenarioConfig::from_path(p).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("{}: {io}", p.display())),
            other => other,
        })?,
        None => ScenarioConfig::from_json_str(crate::config::DEFAULT_SCENARIO_JSON, None)?,
    };
    for w in warnings {
        writeln!(err, "warning: {w}")?;
    }
    Ok(scenario)
}

fn sink<'a>(path: Option<&Path>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(stdout),
    })
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match command {
        Command::Simulate {
            config,
            seed,
            out: dir,
            format,
            sweep,
        } => cmd_simulate(config.as_deref(), seed, &dir, format, sweep, out, err),
        Command::Degradation {
            config,
            years,
            resolution_days,
            soc,
            out: path,
            format,
        } => {
            let sc = load(config.as_deref(), err)?;
            let rows = degradation_rows(&sc, years, resolution_days, soc)?;
            let mut w = sink(path.as_deref(), out)?;
            match format {
                Format::Json => metrics::write_json(&rows, &mut w)?,
                _ => {
                    let mut c = csv::Writer::from_writer(&mut w);
                    c.write_record(["day", "d_linear", "fade_fraction"])?;
                    for r in &rows {
                        c.write_record([r.day.to_string(), r.d_linear.to_string(), r.fade_fraction.to_string()])?;
                    }
                    c.flush()?;
                }
            }
            w.flush()?;
            Ok(())
        }
        Command::Airtime {
            config,
            sf,
            bw,
            cr,
            payload,
            preamble,
            power_w,
            implicit_header,
            no_crc,
            ldro,
            out: path,
            format,
        } => {
            let base = match config {
                Some(p) => load(Some(&p), err)?.radio,
                None => RadioConfig::new(10, 125_000, 10, 0.4),
            };
            let sf = sf.unwrap_or(base.spreading_factor);
            let bw = bw.unwrap_or(base.bandwidth_hz);
            let mut r = RadioConfig {
                spreading_factor: sf,
                bandwidth_hz: bw,
                coding_rate_denominator: cr.unwrap_or(base.coding_rate_denominator),
                preamble_symbols: preamble.unwrap_or(base.preamble_symbols),
                explicit_header: base.explicit_header && !implicit_header,
                crc_on: base.crc_on && !no_crc,
                low_data_rate_optimize: base.low_data_rate_optimize,
                payload_bytes: payload.unwrap_or(base.payload_bytes),
                tx_power_w: power_w.unwrap_or(base.tx_power_w),
            };
            if sf != base.spreading_factor || bw != base.bandwidth_hz {
                r.low_data_rate_optimize = radio::default_ldro(sf, bw);
            }
            if let Some(on) = ldro {
                r.low_data_rate_optimize = on;
            }
            let row = airtime_row(&r)?;
            let mut w = sink(path.as_deref(), out)?;
            write_airtime(&row, format, &mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Schedule {
            config,
            horizon_s,
            nodes,
            out: path,
            format,
        } => {
            let sc = load(config.as_deref(), err)?;
            let doc = schedule_document(&sc, horizon_s.unwrap_or(sc.orbit.period_s), nodes.unwrap_or(sc.sim.node_count))?;
            let mut w = sink(path.as_deref(), out)?;
            match format {
                Format::Csv => {
                    let mut c = csv::Writer::from_writer(&mut w);
                    if doc.windows.is_empty() {
                        c.write_record(["node", "target", "start_s", "end_s", "phase"])?;
                    }
                    for r in &doc.windows {
                        c.serialize(r)?;
                    }
                    c.flush()?;
                }
                _ => metrics::write_json(&doc, &mut w)?,
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn write_run(run: &RunOutput, dir: &Path, format: Format) -> Result<()> {
    fs::create_dir_all(dir)?;
    match format {
        Format::Json => metrics::write_json(&run.metrics, BufWriter::new(File::create(dir.join("metrics.json"))?))?,
        _ => metrics::write_metrics_csv(&run.metrics, BufWriter::new(File::create(dir.join("metrics.csv"))?))?,
    }
    metrics::write_json(&run.summary, BufWriter::new(File::create(dir.join("summary.json"))?))
}

fn describe(s: &RunSummary, out: &mut dyn Write) -> Result<()> {
    writeln!(
        out,
        "seed {}: {} packets, {} delivered ({:.2}%), {} energy drops, {} collision drops, {} without a window, cycle aging {:.6e}",
        s.seed,
        s.packets.generated,
        s.packets.delivered,
        100.0 * s.delivery_ratio,
        s.packets.dropped_energy,
        s.packets.dropped_collision_exhausted,
        s.packets.dropped_no_window,
        s.total_cycle_aging
    )?;
    Ok(())
}

fn cmd_simulate(
    config: Option<&Path>,
    seed: Option<u64>,
    dir: &Path,
    format: Format,
    sweep: Option<u32>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let sc = load(config, err)?;
    let seed = seed.unwrap_or(sc.sim.seed);
    match sweep {
        None => {
            let run = sim::run(&sc, seed)?;
            write_run(&run, dir, format)?;
            describe(&run.summary, out)
        }
        Some(0) => Err(Error::Config("--sweep needs at least one run".into())),
        Some(n) => {
            let runs: Vec<Result<RunOutput>> = (0..u64::from(n))
                .into_par_iter()
                .map(|i| sim::run(&sc, seed + i))
                .collect();
            let mut summaries = Vec::with_capacity(runs.len());
            for (i, run) in runs.into_iter().enumerate() {
                let run = run?;
                write_run(&run, &dir.join(format!("run-{i:03}")), format)?;
                describe(&run.summary, out)?;
                summaries.push(run.summary);
            }
            metrics::write_json(&summaries, BufWriter::new(File::create(dir.join("sweep.json"))?))
        }
    }
}

/// Rows of the `degradation` command.
pub fn degradation_rows(sc: &ScenarioConfig, years: f64, resolution_days: f64, soc: f64) -> Result<Vec<aging::CurvePoint>> {
    let b = &sc.battery;
    let state = BatteryState::new(b.capacity_ah, b.voltage_nominal_v, soc.clamp(0.0, 1.0))?;
    let ctx = AgingContext {
        params: &b.degradation,
        thermal: &b.thermal,
        c_rate: b.c_rate,
        dod_nominal: b.dod_nominal,
    };
    aging::degradation_curve(&state, &ctx, &sc.orbit, soc, years, resolution_days)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AirtimeRow {
    pub spreading_factor: u8,
    pub bandwidth_hz: u32,
    pub coding_rate: String,
    pub payload_bytes: u16,
    pub low_data_rate_optimize: bool,
    pub symbol_duration_s: f64,
    pub symbols: f64,
    pub time_on_air_s: f64,
    pub tx_energy_j: f64,
}

pub fn airtime_row(r: &RadioConfig) -> Result<AirtimeRow> {
    r.validate()?;
    let n = radio::payload_symbols(r)?;
    Ok(AirtimeRow {
        spreading_factor: r.spreading_factor,
        bandwidth_hz: r.bandwidth_hz,
        coding_rate: format!("4/{}", r.coding_rate_denominator),
        payload_bytes: r.payload_bytes,
        low_data_rate_optimize: r.low_data_rate_optimize,
        symbol_duration_s: radio::symbol_duration(r),
        symbols: f64::from(r.preamble_symbols) + 4.25 + f64::from(n),
        time_on_air_s: radio::time_on_air(r)?,
        tx_energy_j: radio::tx_energy(r)?,
    })
}

fn write_airtime(row: &AirtimeRow, format: Format, w: &mut dyn Write) -> Result<()> {
    match format {
        Format::Json => metrics::write_json(row, w),
        Format::Csv => {
            let mut c = csv::Writer::from_writer(w);
            c.serialize(row)?;
            c.flush()?;
            Ok(())
        }
        Format::Table => {
            let lines: [(&str, String); 9] = [
                ("spreading factor", row.spreading_factor.to_string()),
                ("bandwidth (Hz)", row.bandwidth_hz.to_string()),
                ("coding rate", row.coding_rate.clone()),
                ("payload (bytes)", row.payload_bytes.to_string()),
                ("low data rate opt.", row.low_data_rate_optimize.to_string()),
                ("symbol duration (s)", format!("{:.6}", row.symbol_duration_s)),
                ("symbols on air", format!("{}", row.symbols)),
                ("time on air (s)", format!("{:.6}", row.time_on_air_s)),
                ("tx energy (J)", format!("{:.7}", row.tx_energy_j)),
            ];
            for (k, v) in lines {
                writeln!(w, "{k:<22}{v}")?;
            }
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeTimeline {
    pub node: u32,
    /// Sunlit share of the timeline.
    pub sun_fraction: f64,
    pub timeline: Vec<orbit::PhaseSegment>,
    /// Window ids in `windows` order, then split by phase.
    pub all: Vec<u32>,
    pub sun: Vec<u32>,
    pub eclipse: Vec<u32>,
}

/// Output of the `schedule` command. Its `windows` list loads back as a
/// schedule override.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleDocument {
    pub horizon_s: f64,
    pub windows: Vec<ScheduleRecord>,
    pub nodes: Vec<NodeTimeline>,
}

pub fn schedule_document(sc: &ScenarioConfig, horizon_s: f64, nodes: usize) -> Result<ScheduleDocument> {
    if !(horizon_s > 0.0 && horizon_s.is_finite()) {
        return Err(Error::Config(format!("horizon {horizon_s} s must be > 0")));
    }
    let mut schedules = BTreeMap::new();
    let mut timelines = Vec::new();
    for i in 0..nodes {
        let cfg = sc.orbit.for_node(i, nodes);
        let schedule = if sc.stations.is_empty() {
            Schedule::default()
        } else {
            orbit::build_schedule(&cfg, &sc.stations, horizon_s, sc.sim.visibility_step_s)?
        };
        let timeline = orbit::phase_timeline(&cfg, 0.0, horizon_s);
        let sun: f64 = timeline
            .iter()
            .filter(|s| s.phase == Phase::Sun)
            .map(|s| s.end_s - s.start_s)
            .sum();
        timelines.push(NodeTimeline {
            node: i as u32,
            sun_fraction: sun / horizon_s,
            timeline,
            all: schedule.windows().iter().map(|w| w.window_id).collect(),
            sun: schedule.sun().map(|w| w.window_id).collect(),
            eclipse: schedule.eclipse().map(|w| w.window_id).collect(),
        });
        schedules.insert(i as u32, schedule);
    }
    Ok(ScheduleDocument {
        horizon_s,
        windows: orbit::schedule_records(&schedules),
        nodes: timelines,
    })
}
