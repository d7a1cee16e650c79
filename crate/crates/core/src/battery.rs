//! Lithium-ion capacity fade: calendar aging, cycle aging, their linear sum,
//! and the nonlinear SEI-film fade curve that maps linear degradation onto
//! lost capacity.
//!
//! All fade quantities are fractions of rated capacity. Temperatures are in
//! kelvin, activation energies in J/mol, calendar time in days.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Issues, Result};

/// Universal gas constant, J/(mol·K).
pub const GAS_CONSTANT: f64 = 8.314;

/// Operable internal temperature band of the reference cells, K.
pub const OPERABLE_RANGE_K: (f64, f64) = (253.0, 313.0);

/// Calibration constants and exponents of the fade model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationParams {
    /// Calendar fade scale per day.
    pub k1: f64,
    /// Cycle fade scale per cycle.
    pub k2: f64,
    pub ea_j_per_mol: f64,
    /// SoC exponent.
    pub soc_exponent: f64,
    /// C-rate exponent.
    pub c_rate_exponent: f64,
    /// Depth-of-discharge exponent.
    pub dod_exponent: f64,
    /// Share of capacity loss attributed to SEI formation.
    pub alpha_sei: f64,
    /// SEI film formation constant.
    pub k_sei: f64,
}

impl DegradationParams {
    pub fn validate_into(&self, prefix: &str, issues: &mut Issues) {
        let p = |f: &str| format!("{prefix}.{f}");
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            issues.push(p("k1"), "must be > 0");
        }
        if !(self.k2 > 0.0 && self.k2.is_finite()) {
            issues.push(p("k2"), "must be > 0");
        }
        if !(self.ea_j_per_mol > 0.0 && self.ea_j_per_mol.is_finite()) {
            issues.push(p("ea_j_per_mol"), "must be > 0");
        }
        for (name, v) in [
            ("soc_exponent", self.soc_exponent),
            ("c_rate_exponent", self.c_rate_exponent),
            ("dod_exponent", self.dod_exponent),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                issues.push(p(name), "must be >= 0");
            }
        }
        if !(0.0..=1.0).contains(&self.alpha_sei) {
            issues.push(p("alpha_sei"), "must lie in [0, 1]");
        }
        if !(self.k_sei > 0.0 && self.k_sei.is_finite()) {
            issues.push(p("k_sei"), "must be > 0");
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::default();
        self.validate_into("battery", &mut issues);
        issues.into_result()
    }
}

/// Internal battery temperature by orbital phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalProfile {
    pub t_sun_k: f64,
    pub t_eclipse_k: f64,
}

impl ThermalProfile {
    /// Hard errors go to `issues`; out-of-band temperatures only produce warnings.
    pub fn validate_into(&self, prefix: &str, issues: &mut Issues, warnings: &mut Vec<String>) {
        for (name, t) in [("t_sun_k", self.t_sun_k), ("t_eclipse_k", self.t_eclipse_k)] {
            if !(t > 0.0 && t.is_finite()) {
                issues.push(format!("{prefix}.{name}"), "must be > 0");
            } else if t < OPERABLE_RANGE_K.0 || t > OPERABLE_RANGE_K.1 {
                warnings.push(format!(
                    "{prefix}.{name}: {t} K is outside the operable range {}-{} K",
                    OPERABLE_RANGE_K.0, OPERABLE_RANGE_K.1
                ));
            }
        }
    }

    pub fn for_phase(&self, phase: crate::orbit::Phase) -> f64 {
        match phase {
            crate::orbit::Phase::Sun => self.t_sun_k,
            crate::orbit::Phase::Eclipse => self.t_eclipse_k,
        }
    }
}

/// Stress applied by one charge/discharge cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleStress {
    pub dod: f64,
    /// Discharge current divided by rated capacity.
    pub c_rate: f64,
    pub temperature_k: f64,
}

impl CycleStress {
    pub fn new(dod: f64, c_rate: f64, temperature_k: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&dod) {
            return Err(Error::domain(format!("depth of discharge {dod} outside [0, 1]")));
        }
        if !(c_rate >= 0.0 && c_rate.is_finite()) {
            return Err(Error::domain(format!("c-rate {c_rate} must be >= 0")));
        }
        if !(temperature_k > 0.0 && temperature_k.is_finite()) {
            return Err(Error::domain(format!("temperature {temperature_k} K must be > 0")));
        }
        Ok(Self {
            dod,
            c_rate,
            temperature_k,
        })
    }
}

/// Aging state of one battery pack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub soc: f64,
    pub capacity_rated_ah: f64,
    pub voltage_nominal_v: f64,
    /// Nonlinear fade, fraction of rated capacity.
    pub fade_fraction: f64,
    /// Accumulated linear degradation (calendar + cycle).
    pub d_linear: f64,
    /// Calendar share of `d_linear`.
    pub d_calendar: f64,
    /// Cycle share of `d_linear`.
    pub d_cycle: f64,
    /// Equivalent full cycles at the nominal depth of discharge.
    pub cycles_completed: f64,
    pub calendar_days: f64,
}

impl BatteryState {
    pub fn new(capacity_rated_ah: f64, voltage_nominal_v: f64, soc: f64) -> Result<Self> {
        if !(capacity_rated_ah > 0.0) || !(voltage_nominal_v > 0.0) {
            return Err(Error::domain("rated capacity and nominal voltage must be > 0"));
        }
        if !(0.0..=1.0).contains(&soc) {
            return Err(Error::domain(format!("state of charge {soc} outside [0, 1]")));
        }
        Ok(Self {
            soc,
            capacity_rated_ah,
            voltage_nominal_v,
            fade_fraction: 0.0,
            d_linear: 0.0,
            d_calendar: 0.0,
            d_cycle: 0.0,
            cycles_completed: 0.0,
            calendar_days: 0.0,
        })
    }

    pub fn effective_capacity_ah(&self) -> f64 {
        self.capacity_rated_ah * (1.0 - self.fade_fraction)
    }

    /// Usable stored energy at full charge, J.
    pub fn effective_energy_j(&self) -> f64 {
        self.voltage_nominal_v * self.effective_capacity_ah() * 3600.0
    }
}

/// `exp(-Ea / (R T))`.
pub fn arrhenius_factor(ea_j_per_mol: f64, temperature_k: f64) -> Result<f64> {
    if !(temperature_k > 0.0) {
        return Err(Error::domain(format!("temperature {temperature_k} K must be > 0")));
    }
    if !(ea_j_per_mol >= 0.0) {
        return Err(Error::domain(format!("activation energy {ea_j_per_mol} must be >= 0")));
    }
    Ok((-ea_j_per_mol / (GAS_CONSTANT * temperature_k)).exp())
}

/// Calendar fade after `t_days` at constant temperature and state of charge.
pub fn calendar_aging(
    params: &DegradationParams,
    temperature_k: f64,
    soc: f64,
    t_days: f64,
) -> Result<f64> {
    if !(t_days >= 0.0) {
        return Err(Error::domain(format!("elapsed time {t_days} days must be >= 0")));
    }
    if !(0.0..=1.0).contains(&soc) {
        return Err(Error::domain(format!("state of charge {soc} outside [0, 1]")));
    }
    let arrhenius = arrhenius_factor(params.ea_j_per_mol, temperature_k)?;
    Ok(params.k1 * arrhenius * soc.powf(params.soc_exponent) * t_days)
}

/// Cycle fade after `n_cycles` cycles of identical stress. Non-integer cycle
/// counts are allowed.
pub fn cycle_aging(params: &DegradationParams, stress: &CycleStress, n_cycles: f64) -> Result<f64> {
    if !(n_cycles >= 0.0) {
        return Err(Error::domain(format!("cycle count {n_cycles} must be >= 0")));
    }
    if stress.dod == 0.0 || n_cycles == 0.0 {
        return Ok(0.0);
    }
    let arrhenius = arrhenius_factor(params.ea_j_per_mol, stress.temperature_k)?;
    Ok(params.k2
        * stress.dod.powf(params.dod_exponent)
        * stress.c_rate.powf(params.c_rate_exponent)
        * arrhenius
        * n_cycles)
}

/// Linear degradation `D_L`.
pub fn linear_degradation(dc_cal: f64, dc_cycle: f64) -> f64 {
    debug_assert!(dc_cal >= 0.0 && dc_cycle >= 0.0);
    dc_cal + dc_cycle
}

/// Capacity fade from SEI film growth given the accumulated linear
/// degradation. Zero at `d_linear = 0`, approaching one as it grows.
pub fn sei_capacity_fade(params: &DegradationParams, d_linear: f64) -> Result<f64> {
    if !(d_linear >= 0.0) {
        return Err(Error::domain(format!("linear degradation {d_linear} must be >= 0")));
    }
    let a = params.alpha_sei;
    // expm1 keeps full relative precision while d_linear is tiny.
    let fade = -a * (-params.k_sei * d_linear).exp_m1() - (1.0 - a) * (-d_linear).exp_m1();
    Ok(fade.clamp(0.0, 1.0))
}

/// Degradation impact factor of transmitting in a window: the extra
/// single-cycle fade the transmission causes, normalised by `dif_ref` and
/// clamped to `[0, 1]`.
pub fn degradation_impact_factor(
    params: &DegradationParams,
    stress_if_tx: &CycleStress,
    stress_if_idle: &CycleStress,
    dif_ref: f64,
) -> Result<f64> {
    if !(dif_ref > 0.0 && dif_ref.is_finite()) {
        return Err(Error::config(format!("dif_ref {dif_ref} must be > 0")));
    }
    let with_tx = cycle_aging(params, stress_if_tx, 1.0)?;
    let idle = cycle_aging(params, stress_if_idle, 1.0)?;
    Ok(((with_tx - idle) / dif_ref).clamp(0.0, 1.0))
}

/// Largest single-cycle fade increment that a depth-of-discharge step of
/// `dod_increment` can cause at the given rate and temperature. Used as the
/// DIF normaliser when none is configured.
pub fn max_incremental_cycle_fade(
    params: &DegradationParams,
    c_rate: f64,
    temperature_k: f64,
    dod_increment: f64,
) -> Result<f64> {
    let inc = dod_increment.clamp(0.0, 1.0);
    let at = |dod: f64| -> Result<f64> {
        cycle_aging(params, &CycleStress::new(dod, c_rate, temperature_k)?, 1.0)
    };
    // A power law's increment over a fixed step peaks at one end of [0, 1].
    let top = at(1.0)? - at(1.0 - inc)?;
    let bottom = at(inc)? - at(0.0)?;
    Ok(top.max(bottom))
}
