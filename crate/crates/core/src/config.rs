//! Scenario files: JSON with unit-suffixed keys, validated in one pass so
//! every problem is reported together.
//!
//! Keys that start with `_` are comments. Unknown keys produce warnings, not
//! errors. Angles are given in degrees (`*_deg`) and converted on load.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::battery::{DegradationParams, ThermalProfile};
use crate::error::{Error, Issues, Result};
use crate::mac::Protocol;
use crate::orbit::{self, GroundStation, OrbitConfig, Schedule};
use crate::radio::{self, RadioConfig};

/// The bundled default scenario.
pub const DEFAULT_SCENARIO_JSON: &str = include_str!("../scenarios/default.json");

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryConfig {
    pub degradation: DegradationParams,
    pub thermal: ThermalProfile,
    pub capacity_ah: f64,
    pub voltage_nominal_v: f64,
    pub initial_soc: f64,
    /// Discharge current over rated capacity.
    pub c_rate: f64,
    /// Depth of discharge that counts as one full cycle.
    pub dod_nominal: f64,
}

impl BatteryConfig {
    pub fn rated_energy_j(&self) -> f64 {
        self.capacity_ah * self.voltage_nominal_v * 3600.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyConfig {
    /// Bus load drawn in every slot, W. `None` sizes it so one eclipse drains
    /// `dod_nominal` of rated energy.
    pub sleep_power_w: Option<f64>,
    /// Solar input while sunlit, W. `None` makes each orbit energy-neutral.
    pub harvest_power_w: Option<f64>,
    pub charge_limit_w: Option<f64>,
    /// Ψ_min as a fraction of rated energy.
    pub psi_min_fraction: f64,
    /// `None` reserves one eclipse worth of bus load.
    pub e_critical_j: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacSettings {
    pub protocol: Protocol,
    pub beta: f64,
    pub w_dif: f64,
    pub w_energy: f64,
    pub max_attempts: u32,
    pub slot_budget_s: f64,
    /// `None` derives the normaliser from the largest possible increment.
    pub dif_ref: Option<f64>,
    /// `None` calibrates it to fill the slot budget on average.
    pub backoff_base_s: Option<f64>,
    /// `None` means two orbital periods.
    pub deadline_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Traffic {
    Poisson { mean_interval_s: f64 },
    Periodic { interval_s: f64 },
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub duration_days: f64,
    pub slot_length_s: f64,
    pub node_count: usize,
    pub traffic: Traffic,
    pub report_interval_s: f64,
    pub visibility_step_s: f64,
    pub seed: u64,
    /// Per-node windows replacing the computed ones.
    pub schedule_override: Option<BTreeMap<u32, Schedule>>,
}

impl SimSettings {
    /// Run length in whole seconds.
    pub fn horizon_s(&self) -> f64 {
        (self.duration_days * 86_400.0).round()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub orbit: OrbitConfig,
    pub stations: Vec<GroundStation>,
    pub battery: BatteryConfig,
    pub energy: EnergyConfig,
    pub radio: RadioConfig,
    pub mac: MacSettings,
    pub sim: SimSettings,
}

/// A scenario plus the non-fatal findings from loading it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: ScenarioConfig,
    pub warnings: Vec<String>,
}

struct Section<'a> {
    path: String,
    map: Option<&'a Map<String, Value>>,
    seen: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn root(value: &'a Value, issues: &mut Issues) -> Self {
        let map = value.as_object();
        if map.is_none() {
            issues.push("$", "scenario must be a JSON object");
        }
        Self {
            path: String::new(),
            map,
            seen: Vec::new(),
        }
    }

    fn key_path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.map.and_then(|m| m.get(key)).filter(|v| !v.is_null())
    }

    fn child(&mut self, key: &'static str, issues: &mut Issues) -> Section<'a> {
        let path = self.key_path(key);
        let map = match self.raw(key) {
            None => None,
            Some(Value::Object(m)) => Some(m),
            Some(_) => {
                issues.push(path.clone(), "must be an object");
                None
            }
        };
        Section {
            path,
            map,
            seen: Vec::new(),
        }
    }

    fn opt<T: DeserializeOwned>(&mut self, key: &'static str, issues: &mut Issues) -> Option<T> {
        let path = self.key_path(key);
        let v = self.raw(key)?;
        match serde_json::from_value(v.clone()) {
            Ok(t) => Some(t),
            Err(e) => {
                issues.push(path, format!("{e}"));
                None
            }
        }
    }

    fn or<T: DeserializeOwned>(&mut self, key: &'static str, default: T, issues: &mut Issues) -> T {
        self.opt(key, issues).unwrap_or(default)
    }

    fn required<T: DeserializeOwned>(&mut self, key: &'static str, issues: &mut Issues) -> Option<T> {
        let present = self.map.is_some_and(|m| m.get(key).is_some_and(|v| !v.is_null()));
        if !present {
            self.seen.push(key);
            issues.push(self.key_path(key), "missing mandatory field");
            return None;
        }
        self.opt(key, issues)
    }

    fn finish(self, warnings: &mut Vec<String>) {
        let Some(map) = self.map else { return };
        for key in map.keys() {
            if !key.starts_with('_') && !self.seen.contains(&key.as_str()) {
                warnings.push(format!("unknown key `{}` ignored", self.key_path(key)));
            }
        }
    }
}

fn parse_orbit(s: &mut Section<'_>, issues: &mut Issues) -> OrbitConfig {
    OrbitConfig {
        period_s: s.or("period_s", 5400.0, issues),
        sun_duration_s: s.or("sun_duration_s", 3300.0, issues),
        altitude_m: s.or("altitude_m", 550e3, issues),
        inclination_rad: s.or("inclination_deg", 53.0_f64, issues).to_radians(),
        phase_offset_rad: s.or("phase_offset_deg", 0.0_f64, issues).to_radians(),
        raan_rad: s.or("raan_deg", 0.0_f64, issues).to_radians(),
    }
}

fn parse_stations(root: &mut Section<'_>, issues: &mut Issues, warnings: &mut Vec<String>) -> Vec<GroundStation> {
    let Some(value) = root.raw("stations") else {
        return Vec::new();
    };
    let Some(list) = value.as_array() else {
        issues.push("stations", "must be an array");
        return Vec::new();
    };
    let mut out = Vec::new();
    for (i, item) in list.iter().enumerate() {
        let path = format!("stations[{i}]");
        let Some(map) = item.as_object() else {
            issues.push(path, "must be an object");
            continue;
        };
        let mut s = Section {
            path,
            map: Some(map),
            seen: Vec::new(),
        };
        let id: Option<String> = s.required("id", issues);
        let lat: Option<f64> = s.required("latitude_deg", issues);
        let lon: Option<f64> = s.required("longitude_deg", issues);
        let el: f64 = s.or("min_elevation_deg", 10.0, issues);
        s.finish(warnings);
        if let (Some(id), Some(lat), Some(lon)) = (id, lat, lon) {
            out.push(GroundStation {
                id,
                latitude_rad: lat.to_radians(),
                longitude_rad: lon.to_radians(),
                min_elevation_rad: el.to_radians(),
            });
        }
    }
    out
}

fn parse_battery(s: &mut Section<'_>, issues: &mut Issues) -> BatteryConfig {
    let capacity_ah: f64 = s.or("capacity_ah", 25.0, issues);
    let degradation = DegradationParams {
        k1: s.or("k1", 5.5e-3, issues),
        k2: s.or("k2", 2.0, issues),
        ea_j_per_mol: s.or("ea_j_per_mol", 35_000.0, issues),
        soc_exponent: s.or("soc_exponent", 1.3, issues),
        c_rate_exponent: s.or("c_rate_exponent", 1.3, issues),
        dod_exponent: s.or("dod_exponent", 1.2, issues),
        alpha_sei: s.required("alpha_sei", issues).unwrap_or(f64::NAN),
        k_sei: s.required("k_sei", issues).unwrap_or(f64::NAN),
    };
    let c_rate: Option<f64> = s.opt("c_rate", issues);
    let current: Option<f64> = s.opt("c_rate_current_a", issues);
    let c_rate = match (c_rate, current) {
        (Some(_), Some(_)) => {
            issues.push(s.key_path("c_rate"), "give either c_rate or c_rate_current_a, not both");
            f64::NAN
        }
        (Some(c), None) => c,
        (None, Some(a)) => a / capacity_ah,
        (None, None) => 12.5 / capacity_ah,
    };
    BatteryConfig {
        degradation,
        thermal: ThermalProfile {
            t_sun_k: s.or("t_sun_k", 303.0, issues),
            t_eclipse_k: s.or("t_eclipse_k", 263.0, issues),
        },
        capacity_ah,
        voltage_nominal_v: s.or("voltage_nominal_v", 28.0, issues),
        initial_soc: s.or("initial_soc", 0.9, issues),
        c_rate,
        dod_nominal: s.or("dod_nominal", 0.4, issues),
    }
}

fn parse_energy(s: &mut Section<'_>, issues: &mut Issues) -> EnergyConfig {
    EnergyConfig {
        sleep_power_w: s.opt("sleep_power_w", issues),
        harvest_power_w: s.opt("harvest_power_w", issues),
        charge_limit_w: s.opt("charge_limit_w", issues),
        psi_min_fraction: s.or("psi_min_fraction", 0.1, issues),
        e_critical_j: s.opt("e_critical_j", issues),
    }
}

fn parse_radio(s: &mut Section<'_>, issues: &mut Issues) -> RadioConfig {
    let sf: u8 = s.or("spreading_factor", 10, issues);
    let bw: u32 = s.or("bandwidth_hz", 125_000, issues);
    let mut r = RadioConfig::new(sf, bw, s.or("payload_bytes", 10, issues), f64::NAN);
    r.coding_rate_denominator = s.or("coding_rate_denominator", 5, issues);
    r.preamble_symbols = s.or("preamble_symbols", 8, issues);
    r.explicit_header = s.or("explicit_header", true, issues);
    r.crc_on = s.or("crc_on", true, issues);
    r.low_data_rate_optimize = s.or("low_data_rate_optimize", radio::default_ldro(sf, bw), issues);
    r.tx_power_w = s.required("tx_power_w", issues).unwrap_or(f64::NAN);
    r
}

fn parse_mac(s: &mut Section<'_>, issues: &mut Issues) -> MacSettings {
    MacSettings {
        protocol: s.or("protocol", Protocol::BatteryAware, issues),
        beta: s.or("beta", 0.3, issues),
        w_dif: s.or("w_dif", 1.0, issues),
        w_energy: s.or("w_energy", 1.0, issues),
        max_attempts: s.or("max_attempts", 8, issues),
        slot_budget_s: s.or("slot_budget_s", 40.0, issues),
        dif_ref: s.opt("dif_ref", issues),
        backoff_base_s: s.opt("backoff_base_s", issues),
        deadline_s: s.opt("deadline_s", issues),
    }
}

fn parse_sim(s: &mut Section<'_>, issues: &mut Issues, base_dir: Option<&Path>) -> SimSettings {
    let schedule_override = match s.opt::<String>("schedule_override", issues) {
        None => None,
        Some(file) => {
            let path = base_dir.map(|d| d.join(&file)).unwrap_or_else(|| file.clone().into());
            match std::fs::read_to_string(&path)
                .map_err(Error::from)
                .and_then(|text| orbit::parse_schedule_records(&text))
            {
                Ok(map) => Some(map),
                Err(e) => {
                    issues.push(s.key_path("schedule_override"), format!("{}: {e}", path.display()));
                    None
                }
            }
        }
    };
    SimSettings {
        duration_days: s.or("duration_days", 30.0, issues),
        slot_length_s: s.or("slot_length_s", 40.0, issues),
        node_count: s.or("node_count", 4, issues),
        traffic: s.or(
            "traffic",
            Traffic::Poisson {
                mean_interval_s: 600.0,
            },
            issues,
        ),
        report_interval_s: s.or("report_interval_s", 86_400.0, issues),
        visibility_step_s: s.or("visibility_step_s", 1.0, issues),
        seed: s.or("seed", 1, issues),
        schedule_override,
    }
}

impl ScenarioConfig {
    /// Parses and validates a scenario. Relative paths inside it resolve
    /// against `base_dir`.
    pub fn from_json_str(text: &str, base_dir: Option<&Path>) -> Result<Loaded> {
        let value: Value = serde_json::from_str(text)?;
        let mut issues = Issues::default();
        let mut warnings = Vec::new();
        let mut root = Section::root(&value, &mut issues);

        let mut s = root.child("orbit", &mut issues);
        let orbit = parse_orbit(&mut s, &mut issues);
        s.finish(&mut warnings);

        let stations = parse_stations(&mut root, &mut issues, &mut warnings);

        let mut s = root.child("battery", &mut issues);
        let battery = parse_battery(&mut s, &mut issues);
        s.finish(&mut warnings);

        let mut s = root.child("energy", &mut issues);
        let energy = parse_energy(&mut s, &mut issues);
        s.finish(&mut warnings);

        let mut s = root.child("radio", &mut issues);
        let radio = parse_radio(&mut s, &mut issues);
        s.finish(&mut warnings);

        let mut s = root.child("mac", &mut issues);
        let mac = parse_mac(&mut s, &mut issues);
        s.finish(&mut warnings);

        let mut s = root.child("sim", &mut issues);
        let sim = parse_sim(&mut s, &mut issues, base_dir);
        s.finish(&mut warnings);

        root.finish(&mut warnings);

        let scenario = ScenarioConfig {
            orbit,
            stations,
            battery,
            energy,
            radio,
            mac,
            sim,
        };
        scenario.validate_into(&mut issues, &mut warnings);
        issues.into_result()?;
        Ok(Loaded { scenario, warnings })
    }

    pub fn from_path(path: &Path) -> Result<Loaded> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, path.parent())
    }

    pub fn bundled_default() -> ScenarioConfig {
        Self::from_json_str(DEFAULT_SCENARIO_JSON, None)
            .expect("bundled scenario is valid")
            .scenario
    }

    pub fn validate(&self) -> Result<Vec<String>> {
        let mut issues = Issues::default();
        let mut warnings = Vec::new();
        self.validate_into(&mut issues, &mut warnings);
        issues.into_result().map(|_| warnings)
    }

    pub fn validate_into(&self, issues: &mut Issues, warnings: &mut Vec<String>) {
        self.orbit.validate_into("orbit", issues);
        for (i, s) in self.stations.iter().enumerate() {
            s.validate_into(&format!("stations[{i}]"), issues);
        }

        let b = &self.battery;
        b.degradation.validate_into("battery", issues);
        b.thermal.validate_into("battery", issues, warnings);
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(b.capacity_ah) {
            issues.push("battery.capacity_ah", "must be > 0");
        }
        if !positive(b.voltage_nominal_v) {
            issues.push("battery.voltage_nominal_v", "must be > 0");
        }
        if !(0.0..=1.0).contains(&b.initial_soc) {
            issues.push("battery.initial_soc", "must lie in [0, 1]");
        }
        if !(b.c_rate >= 0.0 && b.c_rate.is_finite()) {
            issues.push("battery.c_rate", "must be >= 0");
        }
        if !(b.dod_nominal > 0.0 && b.dod_nominal <= 1.0) {
            issues.push("battery.dod_nominal", "must lie in (0, 1]");
        }

        let e = &self.energy;
        for (name, v) in [
            ("energy.sleep_power_w", e.sleep_power_w),
            ("energy.harvest_power_w", e.harvest_power_w),
            ("energy.charge_limit_w", e.charge_limit_w),
            ("energy.e_critical_j", e.e_critical_j),
        ] {
            if v.is_some_and(|v| !(v >= 0.0 && v.is_finite())) {
                issues.push(name, "must be >= 0");
            }
        }
        if !(0.0..1.0).contains(&e.psi_min_fraction) {
            issues.push("energy.psi_min_fraction", "must lie in [0, 1)");
        }

        self.radio.validate_into("radio", issues);
        let airtime = radio::time_on_air(&self.radio).ok().filter(|t| t.is_finite());

        let m = &self.mac;
        if !(0.0..=1.0).contains(&m.beta) {
            issues.push("mac.beta", "must lie in [0, 1]");
        }
        if !(m.w_dif >= 0.0 && m.w_energy >= 0.0 && m.w_dif + m.w_energy > 0.0) {
            issues.push("mac.w_dif", "weights must be >= 0 with a positive sum");
        }
        if m.max_attempts < 1 {
            issues.push("mac.max_attempts", "must be >= 1");
        }
        if !positive(m.slot_budget_s) {
            issues.push("mac.slot_budget_s", "must be > 0");
        }
        if m.dif_ref.is_some_and(|v| !positive(v)) {
            issues.push("mac.dif_ref", "must be > 0");
        }
        if m.backoff_base_s.is_some_and(|v| !(v >= 0.0 && v.is_finite())) {
            issues.push("mac.backoff_base_s", "must be >= 0");
        }
        if m.deadline_s.is_some_and(|v| !positive(v)) {
            issues.push("mac.deadline_s", "must be > 0");
        }

        let s = &self.sim;
        if !positive(s.duration_days) {
            issues.push("sim.duration_days", "must be > 0");
        }
        if !positive(s.slot_length_s) {
            issues.push("sim.slot_length_s", "must be > 0");
        }
        if !positive(s.visibility_step_s) {
            issues.push("sim.visibility_step_s", "must be > 0");
        }
        match s.traffic {
            Traffic::Poisson { mean_interval_s: v } | Traffic::Periodic { interval_s: v } if !positive(v) => {
                issues.push("sim.traffic", "interval must be > 0");
            }
            _ => {}
        }
        if !positive(s.report_interval_s) {
            issues.push("sim.report_interval_s", "must be > 0");
        } else if positive(self.orbit.period_s)
            && s.report_interval_s > 21.0 * self.orbit.period_s
        {
            issues.push(
                "sim.report_interval_s",
                "a report can carry at most 22 orbits of DoD observations; use at most 21 periods",
            );
        }

        if let Some(toa) = airtime {
            if positive(s.slot_length_s) && s.slot_length_s < toa {
                issues.push(
                    "sim.slot_length_s",
                    format!("shorter than the packet time on air ({toa:.6} s)"),
                );
            }
            if positive(m.slot_budget_s) && positive(s.slot_length_s) && m.slot_budget_s > s.slot_length_s {
                issues.push("mac.slot_budget_s", "must not exceed sim.slot_length_s");
            }
            if m.backoff_base_s.is_none() && f64::from(m.max_attempts) * toa > m.slot_budget_s {
                issues.push(
                    "mac.max_attempts",
                    format!("{} attempts of {toa:.6} s exceed the slot budget", m.max_attempts),
                );
            }
        }
    }
}
