//! Per-orbit battery aging and the no-traffic fade curve.

use serde::{Deserialize, Serialize};

use crate::battery::{self, BatteryState, CycleStress, DegradationParams, ThermalProfile};
use crate::error::{Error, Result};
use crate::orbit::{self, OrbitConfig};

const DAY_S: f64 = 86_400.0;

/// Charge and discharge booked against one orbit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OrbitLedger {
    pub sun_s: f64,
    pub eclipse_s: f64,
    pub discharge_sun_j: f64,
    pub discharge_eclipse_j: f64,
    pub charge_j: f64,
    /// Time integral of state of charge, s.
    pub soc_seconds: f64,
}

impl OrbitLedger {
    pub fn seconds(&self) -> f64 {
        self.sun_s + self.eclipse_s
    }

    pub fn discharge_j(&self) -> f64 {
        self.discharge_sun_j + self.discharge_eclipse_j
    }

    pub fn mean_soc(&self) -> Option<f64> {
        (self.seconds() > 0.0).then(|| (self.soc_seconds / self.seconds()).clamp(0.0, 1.0))
    }

    pub fn add(&mut self, other: &OrbitLedger) {
        self.sun_s += other.sun_s;
        self.eclipse_s += other.eclipse_s;
        self.discharge_sun_j += other.discharge_sun_j;
        self.discharge_eclipse_j += other.discharge_eclipse_j;
        self.charge_j += other.charge_j;
        self.soc_seconds += other.soc_seconds;
    }
}

/// Stress constants shared by every orbit of one battery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgingContext<'a> {
    pub params: &'a DegradationParams,
    pub thermal: &'a ThermalProfile,
    pub c_rate: f64,
    /// Depth of discharge counted as one full cycle.
    pub dod_nominal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitStep {
    pub state: BatteryState,
    /// Depth of discharge seen in the orbit.
    pub dod: f64,
    pub d_calendar: f64,
    pub d_cycle: f64,
}

/// Ages `state` by one orbit's ledger. Calendar aging runs at each phase's
/// temperature for the time spent in it; each discharge ages at the
/// temperature of the phase it happened in.
pub fn step_battery_per_orbit(
    state: &BatteryState,
    ctx: &AgingContext<'_>,
    ledger: &OrbitLedger,
) -> Result<OrbitStep> {
    if ledger.seconds() <= 0.0 {
        return Ok(OrbitStep {
            state: *state,
            dod: 0.0,
            d_calendar: 0.0,
            d_cycle: 0.0,
        });
    }
    let p = ctx.params;
    let t = ctx.thermal;
    let soc = ledger.mean_soc().unwrap_or(state.soc);
    let d_calendar = battery::calendar_aging(p, t.t_sun_k, soc, ledger.sun_s / DAY_S)?
        + battery::calendar_aging(p, t.t_eclipse_k, soc, ledger.eclipse_s / DAY_S)?;

    let energy = state.effective_energy_j();
    if !(energy > 0.0) {
        return Err(Error::domain("battery has no capacity left"));
    }
    let dod = (ledger.discharge_j() / energy).clamp(0.0, 1.0);
    let full_cycle = ctx.dod_nominal * energy;
    let n_sun = ledger.discharge_sun_j / full_cycle;
    let n_eclipse = ledger.discharge_eclipse_j / full_cycle;
    let d_cycle = battery::cycle_aging(p, &CycleStress::new(dod, ctx.c_rate, t.t_sun_k)?, n_sun)?
        + battery::cycle_aging(p, &CycleStress::new(dod, ctx.c_rate, t.t_eclipse_k)?, n_eclipse)?;

    let mut next = *state;
    next.d_calendar += d_calendar;
    next.d_cycle += d_cycle;
    next.d_linear += battery::linear_degradation(d_calendar, d_cycle);
    next.fade_fraction = battery::sei_capacity_fade(p, next.d_linear)?.max(state.fade_fraction);
    next.cycles_completed += n_sun + n_eclipse;
    next.calendar_days += ledger.seconds() / DAY_S;
    Ok(OrbitStep {
        state: next,
        dod,
        d_calendar,
        d_cycle,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub day: f64,
    pub d_linear: f64,
    pub fade_fraction: f64,
}

/// Fade over `years` of idle cycling: every eclipse drains `dod_nominal` of
/// the current effective capacity, the battery sits at `soc` on average, and
/// nothing else happens. One row per `resolution_days`.
pub fn degradation_curve(
    initial: &BatteryState,
    ctx: &AgingContext<'_>,
    orbit_cfg: &OrbitConfig,
    soc: f64,
    years: f64,
    resolution_days: f64,
) -> Result<Vec<CurvePoint>> {
    if !(years >= 0.0 && years.is_finite()) {
        return Err(Error::config(format!("years {years} must be >= 0")));
    }
    if !(resolution_days > 0.0 && resolution_days.is_finite()) {
        return Err(Error::config(format!("resolution {resolution_days} days must be > 0")));
    }
    if !(0.0..=1.0).contains(&soc) {
        return Err(Error::config(format!("state of charge {soc} outside [0, 1]")));
    }
    orbit_cfg.validate()?;
    let eclipse_s = orbit_cfg.period_s - orbit_cfg.sun_duration_s;
    let end_day = years * 365.0;
    let rows = (end_day / resolution_days + 1e-9).floor() as u64;

    let mut state = *initial;
    let mut out = Vec::with_capacity(rows as usize);
    let mut t = 0.0;
    let mut k = orbit_cfg.orbit_number(0.0);
    for row in 1..=rows {
        let day = row as f64 * resolution_days;
        let until = day * DAY_S;
        while t < until {
            let boundary = orbit_cfg.sun_start(k + 1);
            let stop = boundary.min(until);
            let sun_s = orbit::sun_seconds_in(orbit_cfg, t, stop);
            let ecl_s = (stop - t) - sun_s;
            let discharge = if eclipse_s > 0.0 {
                ctx.dod_nominal * state.effective_energy_j() * ecl_s / eclipse_s
            } else {
                0.0
            };
            let ledger = OrbitLedger {
                sun_s,
                eclipse_s: ecl_s,
                discharge_eclipse_j: discharge,
                soc_seconds: soc * (stop - t),
                ..OrbitLedger::default()
            };
            state = step_battery_per_orbit(&state, ctx, &ledger)?.state;
            t = stop;
            if stop == boundary {
                k += 1;
            }
        }
        out.push(CurvePoint {
            day,
            d_linear: state.d_linear,
            fade_fraction: state.fade_fraction,
        });
    }
    Ok(out)
}
