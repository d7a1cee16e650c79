//! Sun/eclipse timeline and ground-station visibility windows on a circular
//! orbit over a spherical, uniformly rotating Earth.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Issues, Result};

pub const EARTH_RADIUS_M: f64 = 6.371e6;
pub const EARTH_ROTATION_RAD_S: f64 = 7.292_115_9e-5;
/// Longest usable forecast window, s.
pub const MAX_WINDOW_S: f64 = 1800.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Sun,
    Eclipse,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Sun => "sun",
            Phase::Eclipse => "eclipse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitConfig {
    pub period_s: f64,
    pub sun_duration_s: f64,
    pub altitude_m: f64,
    pub inclination_rad: f64,
    /// Argument of latitude at t = 0. Also anchors the sun/eclipse cycle:
    /// sunlight begins whenever the argument of latitude wraps through zero.
    pub phase_offset_rad: f64,
    pub raan_rad: f64,
}

impl OrbitConfig {
    pub fn validate_into(&self, prefix: &str, issues: &mut Issues) {
        if !(self.period_s > 0.0 && self.period_s.is_finite()) {
            issues.push(format!("{prefix}.period_s"), "must be > 0");
        }
        if !(self.sun_duration_s > 0.0 && self.sun_duration_s <= self.period_s) {
            issues.push(format!("{prefix}.sun_duration_s"), "must satisfy 0 < sun <= period");
        }
        if !(self.altitude_m > 0.0 && self.altitude_m.is_finite()) {
            issues.push(format!("{prefix}.altitude_m"), "must be > 0");
        }
        if !(0.0..=PI).contains(&self.inclination_rad) {
            issues.push(format!("{prefix}.inclination_deg"), "must lie in [0, 180]");
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::default();
        self.validate_into("orbit", &mut issues);
        issues.into_result()
    }

    /// Orbit of satellite `index` in an `count`-satellite constellation built
    /// from this reference orbit: ascending nodes spread evenly in longitude,
    /// in-plane phases spread by the golden ratio so no two satellites share
    /// their sun/eclipse timing.
    pub fn for_node(&self, index: usize, count: usize) -> OrbitConfig {
        if count <= 1 {
            return *self;
        }
        const GOLDEN: f64 = 0.618_033_988_749_894_9;
        let i = index as f64;
        OrbitConfig {
            raan_rad: (self.raan_rad + TAU * i / count as f64).rem_euclid(TAU),
            phase_offset_rad: (self.phase_offset_rad + TAU * (i * GOLDEN).fract()).rem_euclid(TAU),
            ..*self
        }
    }

    pub fn mean_motion(&self) -> f64 {
        TAU / self.period_s
    }

    fn anchor_s(&self) -> f64 {
        self.phase_offset_rad.rem_euclid(TAU) / TAU * self.period_s
    }

    /// Time into the current orbit, measured from the start of sunlight.
    fn orbit_time(&self, t: f64) -> f64 {
        (t + self.anchor_s()).rem_euclid(self.period_s)
    }

    /// Index of the orbit (counted from sunrise) that contains `t`.
    pub fn orbit_number(&self, t: f64) -> i64 {
        ((t + self.anchor_s()) / self.period_s).floor() as i64
    }

    /// Time at which orbit `k` enters sunlight.
    pub fn sun_start(&self, k: i64) -> f64 {
        k as f64 * self.period_s - self.anchor_s()
    }
}

pub fn phase_at(config: &OrbitConfig, t: f64) -> Phase {
    if config.orbit_time(t) < config.sun_duration_s {
        Phase::Sun
    } else {
        Phase::Eclipse
    }
}

/// A maximal constant-phase interval of the timeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub phase: Phase,
}

/// First phase boundary strictly after `t`, with the phase that begins there.
pub fn next_phase_change(config: &OrbitConfig, t: f64) -> (f64, Phase) {
    let tau = config.orbit_time(t);
    let orbit_start = t - tau;
    if tau < config.sun_duration_s && config.sun_duration_s < config.period_s {
        (orbit_start + config.sun_duration_s, Phase::Eclipse)
    } else {
        (orbit_start + config.period_s, Phase::Sun)
    }
}

/// Phase segments covering `[t0, t1)`, clipped at both ends.
pub fn phase_timeline(config: &OrbitConfig, t0: f64, t1: f64) -> Vec<PhaseSegment> {
    let mut out = Vec::new();
    let mut t = t0;
    while t < t1 {
        let phase = phase_at(config, t);
        let (next, _) = next_phase_change(config, t);
        let end = next.min(t1);
        match out.last_mut() {
            Some(PhaseSegment { end_s, phase: p, .. }) if *p == phase => *end_s = end,
            _ => out.push(PhaseSegment {
                start_s: t,
                end_s: end,
                phase,
            }),
        }
        t = end;
    }
    out
}

/// Seconds of sunlight inside `[a, b)`.
pub fn sun_seconds_in(config: &OrbitConfig, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let sun_before = |t: f64| -> f64 {
        // sunlight accumulated on [orbit-anchor, t) modulo whole orbits
        let tau = config.orbit_time(t);
        let whole = ((t - tau) / config.period_s).round();
        whole * config.sun_duration_s + tau.min(config.sun_duration_s)
    };
    (sun_before(b) - sun_before(a)).clamp(0.0, b - a)
}

/// Sub-satellite latitude and longitude (rad), longitude in (-π, π].
pub fn subsatellite_point(config: &OrbitConfig, t: f64) -> (f64, f64) {
    let u = config.mean_motion() * t + config.phase_offset_rad;
    let (su, cu) = u.sin_cos();
    let lat = (config.inclination_rad.sin() * su).clamp(-1.0, 1.0).asin();
    let lon = config.raan_rad + (config.inclination_rad.cos() * su).atan2(cu)
        - EARTH_ROTATION_RAD_S * t;
    (lat, normalize_longitude(lon))
}

fn normalize_longitude(lon: f64) -> f64 {
    let l = (lon + PI).rem_euclid(TAU) - PI;
    if l <= -PI {
        l + TAU
    } else {
        l
    }
}

/// Great-circle angle between two points (rad), haversine form.
pub fn central_angle(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let h = ((lat2 - lat1) / 2.0).sin().powi(2)
        + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * h.sqrt().clamp(0.0, 1.0).asin()
}

/// Earth-central half-angle of the coverage cone above `min_elevation`.
pub fn coverage_half_angle(altitude_m: f64, min_elevation_rad: f64) -> f64 {
    let ratio = EARTH_RADIUS_M / (EARTH_RADIUS_M + altitude_m);
    (ratio * min_elevation_rad.cos()).clamp(-1.0, 1.0).acos() - min_elevation_rad
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStation {
    pub id: String,
    pub latitude_rad: f64,
    pub longitude_rad: f64,
    pub min_elevation_rad: f64,
}

impl GroundStation {
    pub fn validate_into(&self, prefix: &str, issues: &mut Issues) {
        if self.id.is_empty() {
            issues.push(format!("{prefix}.id"), "must not be empty");
        }
        if !(self.latitude_rad.abs() <= PI / 2.0) {
            issues.push(format!("{prefix}.latitude_deg"), "must lie in [-90, 90]");
        }
        if !self.longitude_rad.is_finite() {
            issues.push(format!("{prefix}.longitude_deg"), "must be finite");
        }
        if !(0.0..PI / 2.0).contains(&self.min_elevation_rad) {
            issues.push(format!("{prefix}.min_elevation_deg"), "must lie in [0, 90)");
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastWindow {
    pub window_id: u32,
    pub start_s: f64,
    pub end_s: f64,
    pub phase: Phase,
    pub target: String,
}

impl ForecastWindow {
    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start_s + self.end_s)
    }
}

/// Visibility windows between one satellite and one station over `[t0, t1]`,
/// sampled every `step` seconds.
pub fn visibility_windows(
    config: &OrbitConfig,
    station: &GroundStation,
    t0: f64,
    t1: f64,
    step: f64,
) -> Result<Vec<ForecastWindow>> {
    if !(t1 > t0) {
        return Err(Error::domain(format!("empty interval [{t0}, {t1}]")));
    }
    if !(step > 0.0) {
        return Err(Error::domain(format!("sampling step {step} must be > 0")));
    }
    let lambda = coverage_half_angle(config.altitude_m, station.min_elevation_rad);
    // The ground track cannot close on the station faster than this.
    let max_rate = (config.mean_motion() + EARTH_ROTATION_RAD_S) * 1.001;
    let n_samples = ((t1 - t0) / step + 1e-9).floor() as u64;

    let mut runs: Vec<(f64, f64)> = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    let mut k: u64 = 0;
    while k <= n_samples {
        let t = t0 + k as f64 * step;
        let (lat, lon) = subsatellite_point(config, t);
        let angle = central_angle(lat, lon, station.latitude_rad, station.longitude_rad);
        if angle <= lambda {
            open = Some(match open {
                Some((s, _)) => (s, t),
                None => (t, t),
            });
            k += 1;
        } else {
            if let Some(run) = open.take() {
                runs.push(run);
            }
            let skip = ((angle - lambda) / (max_rate * step)).floor();
            k += if skip >= 1.0 { skip as u64 } else { 1 };
        }
    }
    if let Some(run) = open {
        runs.push(run);
    }

    let mut windows = Vec::new();
    for (start, last) in runs {
        if last - start < 2.0 * step {
            continue;
        }
        let end = last.min(start + MAX_WINDOW_S);
        let mid = 0.5 * (start + end);
        windows.push(ForecastWindow {
            window_id: windows.len() as u32,
            start_s: start,
            end_s: end,
            phase: phase_at(config, mid),
            target: station.id.clone(),
        });
    }
    Ok(windows)
}

/// A node's full set of forecast windows, sorted by start then target.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    windows: Vec<ForecastWindow>,
}

impl Schedule {
    /// Sorts, renumbers and validates the windows.
    pub fn new(mut windows: Vec<ForecastWindow>) -> Result<Self> {
        windows.sort_by(|a, b| {
            a.start_s
                .total_cmp(&b.start_s)
                .then_with(|| a.target.cmp(&b.target))
                .then_with(|| a.end_s.total_cmp(&b.end_s))
        });
        for (i, w) in windows.iter_mut().enumerate() {
            w.window_id = i as u32;
        }
        let schedule = Self { windows };
        schedule.check()?;
        Ok(schedule)
    }

    fn check(&self) -> Result<()> {
        let mut last_end: BTreeMap<&str, f64> = BTreeMap::new();
        for w in &self.windows {
            if !(w.start_s < w.end_s) {
                return Err(Error::contract(format!(
                    "window {} to {}: start must precede end",
                    w.start_s, w.end_s
                )));
            }
            if w.duration() > MAX_WINDOW_S + 1e-9 {
                return Err(Error::contract(format!(
                    "window at {} s lasts {} s, longer than {MAX_WINDOW_S} s",
                    w.start_s,
                    w.duration()
                )));
            }
            if let Some(prev) = last_end.insert(w.target.as_str(), w.end_s) {
                if w.start_s < prev {
                    return Err(Error::contract(format!(
                        "windows toward {} overlap at {} s",
                        w.target, w.start_s
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn windows(&self) -> &[ForecastWindow] {
        &self.windows
    }

    pub fn get(&self, window_id: u32) -> Option<&ForecastWindow> {
        self.windows.get(window_id as usize)
    }

    pub fn sun(&self) -> impl Iterator<Item = &ForecastWindow> {
        self.windows.iter().filter(|w| w.phase == Phase::Sun)
    }

    pub fn eclipse(&self) -> impl Iterator<Item = &ForecastWindow> {
        self.windows.iter().filter(|w| w.phase == Phase::Eclipse)
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    /// Index of the first window that has not ended by `t`.
    pub fn first_open_after(&self, t: f64) -> usize {
        // windows are sorted by start and at most MAX_WINDOW_S long
        self.windows.partition_point(|w| w.start_s + MAX_WINDOW_S < t)
    }
}

/// Forecast windows toward every station over `[0, horizon]`.
pub fn build_schedule(
    config: &OrbitConfig,
    stations: &[GroundStation],
    horizon: f64,
    step: f64,
) -> Result<Schedule> {
    if !(horizon > 0.0) {
        return Err(Error::domain(format!("horizon {horizon} s must be > 0")));
    }
    let mut all = Vec::new();
    for station in stations {
        all.extend(visibility_windows(config, station, 0.0, horizon, step)?);
    }
    Schedule::new(all)
}

/// One line of a schedule-override file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleRecord {
    pub node: u32,
    pub target: String,
    pub start_s: f64,
    pub end_s: f64,
    pub phase: Phase,
}

/// Accepted shapes of a schedule-override document: a bare record array, or
/// the object that `schedule` emits.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ScheduleDocument {
    Records(Vec<ScheduleRecord>),
    Emitted { windows: Vec<ScheduleRecord> },
}

/// Parses a schedule-override document into per-node schedules.
pub fn parse_schedule_records(json: &str) -> Result<BTreeMap<u32, Schedule>> {
    let records = match serde_json::from_str::<ScheduleDocument>(json)? {
        ScheduleDocument::Records(r) => r,
        ScheduleDocument::Emitted { windows } => windows,
    };
    let mut per_node: BTreeMap<u32, Vec<ForecastWindow>> = BTreeMap::new();
    for (i, r) in records.into_iter().enumerate() {
        if !(r.start_s >= 0.0 && r.start_s.is_finite() && r.end_s.is_finite()) {
            return Err(Error::contract(format!("record {i}: times must be finite and >= 0")));
        }
        per_node.entry(r.node).or_default().push(ForecastWindow {
            window_id: 0,
            start_s: r.start_s,
            end_s: r.end_s,
            phase: r.phase,
            target: r.target,
        });
    }
    per_node
        .into_iter()
        .map(|(node, w)| {
            Schedule::new(w)
                .map(|s| (node, s))
                .map_err(|e| Error::contract(format!("node {node}: {e}")))
        })
        .collect()
}

/// Flattens per-node schedules back into override records.
pub fn schedule_records(schedules: &BTreeMap<u32, Schedule>) -> Vec<ScheduleRecord> {
    schedules
        .iter()
        .flat_map(|(node, s)| {
            s.windows().iter().map(move |w| ScheduleRecord {
                node: *node,
                target: w.target.clone(),
                start_s: w.start_s,
                end_s: w.end_s,
                phase: w.phase,
            })
        })
        .collect()
}
