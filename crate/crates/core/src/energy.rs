//! Per-slot stored-energy balance, solar harvest, and the EWMA transmit
//! energy estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orbit::{ForecastWindow, Phase};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarvestModel {
    /// Solar energy generated in one fully sunlit slot, J.
    pub e_g_sun_j: f64,
    /// Most harvest the power system accepts per slot, J.
    pub charge_rate_limit_j: f64,
}

impl HarvestModel {
    /// Harvest of a slot of `slot_len_s` with `sun_s` seconds of sunlight.
    pub fn slot_harvest(&self, sun_s: f64, slot_len_s: f64) -> f64 {
        if sun_s <= 0.0 {
            return 0.0;
        }
        (self.e_g_sun_j * sun_s / slot_len_s).min(self.charge_rate_limit_j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    /// Energy drawn by a slot that carries a transmission sequence, J.
    pub e_cons_tx_j: f64,
    /// Energy drawn by an idle slot, J.
    pub e_sleep_j: f64,
}

impl PowerProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_sleep_j >= 0.0 && self.e_cons_tx_j > self.e_sleep_j) {
            return Err(Error::config(format!(
                "power profile needs e_cons_tx ({}) > e_sleep ({}) >= 0",
                self.e_cons_tx_j, self.e_sleep_j
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClampKind {
    /// Storage full; surplus harvest spilled.
    Ceiling,
    /// Storage empty; the deficit was not delivered (brownout).
    Floor,
    /// Storage capacity shrank below the stored energy after capacity fade.
    CapacityFade,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clamp {
    pub kind: ClampKind,
    /// Energy removed (ceiling, fade) or not delivered (floor), J. Always >= 0.
    pub amount_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// `y·E_g − x·E_cons − (1−x)·E_sleep` before clamping.
    pub raw_delta_j: f64,
    pub clamp: Option<Clamp>,
}

impl StepOutcome {
    pub fn brownout(&self) -> bool {
        matches!(self.clamp, Some(Clamp { kind: ClampKind::Floor, .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEnergyState {
    pub phi_j: f64,
    pub phi_max_j: f64,
    pub phi_min_j: f64,
    pub e_critical_j: f64,
    pub ewma_estimate_j: f64,
    /// Transmit energy provisionally debited for booked but unsent sequences.
    pub reserved_j: f64,
    pub x_history: Vec<bool>,
    pub y_history: Vec<bool>,
}

impl NodeEnergyState {
    pub fn new(phi_j: f64, phi_max_j: f64, phi_min_j: f64, e_critical_j: f64, ewma_j: f64) -> Result<Self> {
        if !(phi_min_j < phi_max_j) || !(e_critical_j >= 0.0) || !(phi_min_j >= 0.0) {
            return Err(Error::config(format!(
                "energy limits need 0 <= psi_min ({phi_min_j}) < psi_max ({phi_max_j}) and e_critical ({e_critical_j}) >= 0"
            )));
        }
        if !(0.0..=phi_max_j).contains(&phi_j) {
            return Err(Error::config(format!("initial energy {phi_j} outside [0, {phi_max_j}]")));
        }
        Ok(Self {
            phi_j,
            phi_max_j,
            phi_min_j,
            e_critical_j,
            ewma_estimate_j: ewma_j,
            reserved_j: 0.0,
            x_history: Vec::new(),
            y_history: Vec::new(),
        })
    }

    /// Stored energy less outstanding provisional debits.
    pub fn available_j(&self) -> f64 {
        (self.phi_j - self.reserved_j).max(0.0)
    }

    pub fn soc(&self) -> f64 {
        self.phi_j / self.phi_max_j
    }

    /// Shrinks storage to a new capacity, spilling anything above it.
    pub fn set_capacity(&mut self, phi_max_j: f64) -> Option<Clamp> {
        self.phi_max_j = phi_max_j;
        if self.phi_j > phi_max_j {
            let amount_j = self.phi_j - phi_max_j;
            self.phi_j = phi_max_j;
            Some(Clamp {
                kind: ClampKind::CapacityFade,
                amount_j,
            })
        } else {
            None
        }
    }
}

/// Advances the stored energy by one slot:
/// `φ' = φ + y·E_g − x·E_cons − (1−x)·E_sleep`, clamped to `[0, φ_max]`.
pub fn energy_step(
    state: &mut NodeEnergyState,
    x: bool,
    y: bool,
    e_g: f64,
    phase: Phase,
    profile: &PowerProfile,
) -> Result<StepOutcome> {
    if phase == Phase::Eclipse && e_g > 0.0 {
        return Err(Error::contract(format!("harvest {e_g} J reported during eclipse")));
    }
    if e_g < 0.0 {
        return Err(Error::contract(format!("negative harvest {e_g} J")));
    }
    let gain = if y { e_g } else { 0.0 };
    let draw = if x { profile.e_cons_tx_j } else { profile.e_sleep_j };
    let raw_delta_j = gain - draw;
    let next = state.phi_j + raw_delta_j;
    let clamp = if next > state.phi_max_j {
        state.phi_j = state.phi_max_j;
        Some(Clamp {
            kind: ClampKind::Ceiling,
            amount_j: next - state.phi_max_j,
        })
    } else if next < 0.0 {
        state.phi_j = 0.0;
        Some(Clamp {
            kind: ClampKind::Floor,
            amount_j: -next,
        })
    } else {
        state.phi_j = next;
        None
    };
    state.x_history.push(x);
    state.y_history.push(y);
    Ok(StepOutcome { raw_delta_j, clamp })
}

/// `β·E_prev + (1−β)·ewma_prev`.
pub fn ewma_update(beta: f64, e_cons_prev: f64, ewma_prev: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::config(format!("EWMA weight {beta} outside [0, 1]")));
    }
    Ok(beta * e_cons_prev + (1.0 - beta) * ewma_prev)
}

/// Energy the node expects to hold across `window`: stored energy (less
/// provisional debits) plus the window's harvest when sunlit, minus sleep
/// drain over the window's slots. Capped at `φ_max`.
pub fn estimate_available_energy(
    state: &NodeEnergyState,
    window: &ForecastWindow,
    harvest: &HarvestModel,
    profile: &PowerProfile,
    slot_len_s: f64,
) -> f64 {
    let slots = window.duration() / slot_len_s;
    let drain = slots * profile.e_sleep_j;
    let gain = match window.phase {
        Phase::Sun => slots * harvest.e_g_sun_j.min(harvest.charge_rate_limit_j),
        Phase::Eclipse => 0.0,
    };
    (state.available_j() + gain - drain).clamp(0.0, state.phi_max_j)
}

/// Battery throughput of one slot when `consumption` is drawn uniformly over
/// the slot and `harvest` arrives uniformly over its sunlit part.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlotFlow {
    pub discharge_sun_j: f64,
    pub discharge_eclipse_j: f64,
    pub charge_j: f64,
}

impl SlotFlow {
    pub fn split(consumption_j: f64, harvest_j: f64, slot_len_s: f64, sun_s: f64) -> Self {
        let sun_share = (sun_s / slot_len_s).clamp(0.0, 1.0);
        let draw_sun = consumption_j * sun_share;
        let draw_eclipse = consumption_j - draw_sun;
        let net_sun = harvest_j - draw_sun;
        Self {
            discharge_sun_j: (-net_sun).max(0.0),
            discharge_eclipse_j: draw_eclipse,
            charge_j: net_sun.max(0.0),
        }
    }

    pub fn discharge_j(&self) -> f64 {
        self.discharge_sun_j + self.discharge_eclipse_j
    }
}
