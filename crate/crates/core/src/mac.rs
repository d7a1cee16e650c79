//! Battery-aware forecast-window selection, retransmission sequences, and
//! the battery summary nodes upload to the gateway.
//!
//! Selection runs on a node with nothing but its own energy state and its
//! immutable window schedule. Every candidate window is scored; sunlit
//! windows must leave the node with at least `Ψ_min + E_critical`, eclipse
//! windows with more than `Ψ_min`. Among feasible windows the node picks the
//! one minimising
//!
//! ```text
//! J(t) = w_dif · DIF(t) + w_energy · Ê(t) / Ψ_max
//! ```
//!
//! where `Ê(t)` is the transmit energy drawn from storage (not covered by
//! concurrent harvest) and `DIF(t)` the normalised extra cycle fade caused by
//! that draw. Ties go to the earliest slot.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::battery::{self, CycleStress, DegradationParams, ThermalProfile};
use crate::energy::{estimate_available_energy, HarvestModel, NodeEnergyState, PowerProfile};
use crate::error::{Error, Result};
use crate::orbit::{Phase, Schedule};
use crate::radio::{self, RadioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Forecast-window selection driven by energy and degradation.
    BatteryAware,
    /// Transmit in the first available window, no energy checks.
    Aloha,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacConfig {
    pub protocol: Protocol,
    /// EWMA weight on the newest transmit-energy sample.
    pub beta: f64,
    pub w_dif: f64,
    pub w_energy: f64,
    pub max_attempts: u32,
    /// Time budget of one retransmission sequence, s.
    pub slot_budget_s: f64,
    /// DIF normaliser.
    pub dif_ref: f64,
    /// Retry `k` waits `U[0, k · backoff_base_s]` after the previous attempt.
    pub backoff_base_s: f64,
    /// How far ahead a packet may be deferred, s.
    pub deadline_s: f64,
}

impl MacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::config(format!("beta {} outside [0, 1]", self.beta)));
        }
        if !(self.w_dif >= 0.0 && self.w_energy >= 0.0 && self.w_dif + self.w_energy > 0.0) {
            return Err(Error::config("objective weights must be >= 0 with a positive sum"));
        }
        if self.max_attempts < 1 {
            return Err(Error::config("max_attempts must be >= 1"));
        }
        if !(self.dif_ref > 0.0) {
            return Err(Error::config(format!("dif_ref {} must be > 0", self.dif_ref)));
        }
        if !(self.backoff_base_s >= 0.0) || !(self.slot_budget_s > 0.0) || !(self.deadline_s > 0.0) {
            return Err(Error::config("backoff, slot budget and deadline must be positive"));
        }
        Ok(())
    }
}

/// Backoff base that makes the mean full `attempts`-long sequence last
/// `budget_s`: mean duration is `n·ToA + Σ_{k=1}^{n-1} k·b/2`.
pub fn calibrated_backoff_base(attempts: u32, airtime_s: f64, budget_s: f64) -> Result<f64> {
    let n = f64::from(attempts);
    let spare = budget_s - n * airtime_s;
    if spare < 0.0 {
        return Err(Error::config(format!(
            "{attempts} attempts of {airtime_s:.4} s do not fit a {budget_s} s budget"
        )));
    }
    if attempts <= 1 {
        return Ok(0.0);
    }
    Ok(spare / (n * (n - 1.0) / 4.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    InsufficientEnergySun,
    BelowReserveEclipse,
    NoWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TxDecision {
    Transmit { window_id: u32, slot_start_s: f64 },
    Drop(DropReason),
}

/// A window with a free slot the sequence could occupy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub window_id: u32,
    pub slot_start_s: f64,
}

impl Candidate {
    /// Every window of `schedule`, each starting a sequence at its opening.
    pub fn all(schedule: &Schedule) -> Vec<Candidate> {
        schedule
            .windows()
            .iter()
            .map(|w| Candidate {
                window_id: w.window_id,
                slot_start_s: w.start_s,
            })
            .collect()
    }
}

/// Node-static inputs to window selection.
#[derive(Debug, Clone, Copy)]
pub struct SelectionEnv<'a> {
    pub harvest: &'a HarvestModel,
    pub profile: &'a PowerProfile,
    pub mac: &'a MacConfig,
    pub degradation: &'a DegradationParams,
    pub thermal: &'a ThermalProfile,
    /// Dimensionless discharge rate used for cycle stress.
    pub c_rate: f64,
    pub slot_len_s: f64,
}

/// How one candidate scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowEvaluation {
    pub window_id: u32,
    pub slot_start_s: f64,
    pub phase: Phase,
    pub estimate_j: f64,
    pub feasible: bool,
    pub dif: f64,
    pub storage_draw_j: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub decision: TxDecision,
    pub evaluations: Vec<WindowEvaluation>,
}

impl Selection {
    pub fn chosen(&self) -> Option<&WindowEvaluation> {
        match self.decision {
            TxDecision::Transmit { window_id, slot_start_s } => self
                .evaluations
                .iter()
                .find(|e| e.window_id == window_id && e.slot_start_s == slot_start_s),
            TxDecision::Drop(_) => None,
        }
    }
}

fn sorted_candidates(schedule: &Schedule, candidates: &[Candidate]) -> Result<Vec<Candidate>> {
    let mut c = candidates.to_vec();
    for cand in &c {
        let w = schedule.get(cand.window_id).ok_or_else(|| {
            Error::contract(format!("candidate window {} is not in the schedule", cand.window_id))
        })?;
        if !(cand.slot_start_s >= w.start_s && cand.slot_start_s < w.end_s) {
            return Err(Error::contract(format!(
                "slot at {} s lies outside window {} [{}, {})",
                cand.slot_start_s, w.window_id, w.start_s, w.end_s
            )));
        }
    }
    c.sort_by(|a, b| {
        a.slot_start_s
            .total_cmp(&b.slot_start_s)
            .then(a.window_id.cmp(&b.window_id))
    });
    Ok(c)
}

/// Scores one window for the battery-aware protocol.
pub fn evaluate_window(
    schedule: &Schedule,
    candidate: Candidate,
    energy: &NodeEnergyState,
    env: &SelectionEnv<'_>,
) -> Result<WindowEvaluation> {
    let window = schedule
        .get(candidate.window_id)
        .ok_or_else(|| Error::contract(format!("unknown window {}", candidate.window_id)))?;
    let estimate_j =
        estimate_available_energy(energy, window, env.harvest, env.profile, env.slot_len_s);
    let feasible = match window.phase {
        Phase::Sun => estimate_j >= energy.phi_min_j + energy.e_critical_j,
        Phase::Eclipse => estimate_j > energy.phi_min_j,
    };

    let increment = (energy.ewma_estimate_j - env.profile.e_sleep_j).max(0.0);
    let storage_draw_j = match window.phase {
        Phase::Sun => {
            let surplus = (env.harvest.e_g_sun_j.min(env.harvest.charge_rate_limit_j)
                - env.profile.e_sleep_j)
                .max(0.0);
            (increment - surplus).max(0.0)
        }
        Phase::Eclipse => increment,
    };
    let capacity = energy.phi_max_j;
    let dod_idle = (1.0 - estimate_j / capacity).clamp(0.0, 1.0);
    let dod_tx = (dod_idle + storage_draw_j / capacity).clamp(0.0, 1.0);
    let temperature = env.thermal.for_phase(window.phase);
    let idle = CycleStress::new(dod_idle, env.c_rate, temperature)?;
    let tx = CycleStress::new(dod_tx, env.c_rate, temperature)?;
    let dif = battery::degradation_impact_factor(env.degradation, &tx, &idle, env.mac.dif_ref)?;
    let objective = env.mac.w_dif * dif + env.mac.w_energy * storage_draw_j / capacity;

    Ok(WindowEvaluation {
        window_id: candidate.window_id,
        slot_start_s: candidate.slot_start_s,
        phase: window.phase,
        estimate_j,
        feasible,
        dif,
        storage_draw_j,
        objective,
    })
}

fn strictly_better(new: f64, best: f64) -> bool {
    new < best - 1e-12 * new.abs().max(best.abs())
}

/// Picks the window a pending packet should go out in, or drops it.
pub fn select_forecast_window(
    schedule: &Schedule,
    candidates: &[Candidate],
    energy: &NodeEnergyState,
    env: &SelectionEnv<'_>,
) -> Result<Selection> {
    let candidates = sorted_candidates(schedule, candidates)?;
    let Some(first) = candidates.first().copied() else {
        return Ok(Selection {
            decision: TxDecision::Drop(DropReason::NoWindow),
            evaluations: Vec::new(),
        });
    };

    if env.mac.protocol == Protocol::Aloha {
        let phase = schedule.get(first.window_id).map(|w| w.phase).unwrap_or(Phase::Sun);
        return Ok(Selection {
            decision: TxDecision::Transmit {
                window_id: first.window_id,
                slot_start_s: first.slot_start_s,
            },
            evaluations: vec![WindowEvaluation {
                window_id: first.window_id,
                slot_start_s: first.slot_start_s,
                phase,
                estimate_j: energy.available_j(),
                feasible: true,
                dif: 0.0,
                storage_draw_j: 0.0,
                objective: 0.0,
            }],
        });
    }

    let evaluations = candidates
        .iter()
        .map(|c| evaluate_window(schedule, *c, energy, env))
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<&WindowEvaluation> = None;
    for e in evaluations.iter().filter(|e| e.feasible) {
        match best {
            Some(b) if !strictly_better(e.objective, b.objective) => {}
            _ => best = Some(e),
        }
    }
    let decision = match best {
        Some(b) => TxDecision::Transmit {
            window_id: b.window_id,
            slot_start_s: b.slot_start_s,
        },
        // nothing feasible: the earliest window decides why
        None => TxDecision::Drop(match evaluations[0].phase {
            Phase::Sun => DropReason::InsufficientEnergySun,
            Phase::Eclipse => DropReason::BelowReserveEclipse,
        }),
    };
    Ok(Selection {
        decision,
        evaluations,
    })
}

/// Offsets (from the first attempt) of a full `attempts`-long sequence with no
/// time limit.
pub fn sequence_offsets<R: Rng + ?Sized>(
    attempts: u32,
    airtime_s: f64,
    backoff_base_s: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(attempts as usize);
    let mut t = 0.0;
    for k in 0..attempts {
        if k > 0 {
            let bound = f64::from(k) * backoff_base_s;
            t += airtime_s + rng.random::<f64>() * bound;
        }
        out.push(t);
    }
    out
}

/// Planned attempt start times for a `Transmit` decision. Attempts that would
/// not finish inside both the slot budget and the window are cut.
pub fn run_transmission_sequence<R: Rng + ?Sized>(
    decision: &TxDecision,
    schedule: &Schedule,
    radio: &RadioConfig,
    mac: &MacConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let TxDecision::Transmit { window_id, slot_start_s } = *decision else {
        return Err(Error::contract("transmission sequence requested for a dropped packet"));
    };
    let window = schedule
        .get(window_id)
        .ok_or_else(|| Error::contract(format!("unknown window {window_id}")))?;
    let airtime = radio::time_on_air(radio)?;
    let limit = (slot_start_s + mac.slot_budget_s).min(window.end_s);
    Ok(sequence_offsets(mac.max_attempts, airtime, mac.backoff_base_s, rng)
        .into_iter()
        .map(|o| slot_start_s + o)
        .take_while(|t| t + airtime <= limit)
        .collect())
}

/// Largest encoded report, bytes.
pub const MAX_REPORT_BYTES: usize = 51;
const REPORT_HEADER_BYTES: usize = 29;
/// Most per-orbit DoD observations one report can carry.
pub const MAX_DOD_OBSERVATIONS: usize = MAX_REPORT_BYTES - REPORT_HEADER_BYTES;

/// Battery-usage summary a node uploads each reporting period. Values are
/// held at wire precision so encoding is lossless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeBatteryReport {
    pub node_id: u16,
    pub period_start_s: u32,
    pub period_end_s: u32,
    pub slot_count: u16,
    pub n_transmissions: u16,
    pub energy_consumed_j: f64,
    pub dod_observations: Vec<f64>,
    pub mean_soc: f64,
    pub mean_temperature_sun_k: f64,
    pub mean_temperature_eclipse_k: f64,
}

/// Raw per-period tallies a node keeps between reports.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportAccumulator {
    pub period_start_s: u32,
    pub slot_count: u32,
    pub n_transmissions: u32,
    pub energy_consumed_j: f64,
    pub dod_observations: Vec<f64>,
    pub soc_seconds: f64,
    pub seconds: f64,
    pub temp_sun_seconds: f64,
    pub sun_seconds: f64,
    pub temp_eclipse_seconds: f64,
    pub eclipse_seconds: f64,
}

impl ReportAccumulator {
    pub fn starting_at(period_start_s: u32) -> Self {
        Self {
            period_start_s,
            ..Self::default()
        }
    }
}

fn quantize(value: f64, scale: f64) -> f64 {
    (value * scale).round() / scale
}

/// Closes a reporting period. A phase the node never saw in the period
/// reports the profile temperature for that phase.
pub fn report_battery_summary(
    node_id: u16,
    acc: &ReportAccumulator,
    period_end_s: u32,
    thermal: &ThermalProfile,
) -> Result<NodeBatteryReport> {
    if period_end_s <= acc.period_start_s {
        return Err(Error::contract("report period must have positive length"));
    }
    if acc.dod_observations.len() > MAX_DOD_OBSERVATIONS {
        return Err(Error::contract(format!(
            "{} DoD observations exceed the {MAX_DOD_OBSERVATIONS} a report can carry",
            acc.dod_observations.len()
        )));
    }
    let mean = |num: f64, den: f64, fallback: f64| if den > 0.0 { num / den } else { fallback };
    Ok(NodeBatteryReport {
        node_id,
        period_start_s: acc.period_start_s,
        period_end_s,
        slot_count: acc.slot_count.min(u32::from(u16::MAX)) as u16,
        n_transmissions: acc.n_transmissions.min(u32::from(u16::MAX)) as u16,
        energy_consumed_j: acc.energy_consumed_j,
        dod_observations: acc
            .dod_observations
            .iter()
            .map(|d| quantize(d.clamp(0.0, 1.0), 255.0))
            .collect(),
        mean_soc: quantize(mean(acc.soc_seconds, acc.seconds, 0.0).clamp(0.0, 1.0), 65_535.0),
        mean_temperature_sun_k: quantize(
            mean(acc.temp_sun_seconds, acc.sun_seconds, thermal.t_sun_k),
            100.0,
        ),
        mean_temperature_eclipse_k: quantize(
            mean(acc.temp_eclipse_seconds, acc.eclipse_seconds, thermal.t_eclipse_k),
            100.0,
        ),
    })
}

impl NodeBatteryReport {
    /// Little-endian wire form:
    ///
    /// | bytes | field                                  |
    /// |-------|----------------------------------------|
    /// | 2     | node id (u16)                          |
    /// | 4     | period start, s (u32)                  |
    /// | 4     | period end, s (u32)                    |
    /// | 2     | slot count (u16)                       |
    /// | 2     | transmissions (u16)                    |
    /// | 8     | energy consumed, J (f64)               |
    /// | 2     | mean SoC × 65535 (u16)                 |
    /// | 2     | mean sunlit temperature, centi-K (u16) |
    /// | 2     | mean eclipse temperature, centi-K (u16)|
    /// | 1     | DoD observation count n (u8)           |
    /// | n     | DoD × 255 (u8 each)                    |
    pub fn encode(&self) -> Result<Vec<u8>> {
        if self.dod_observations.len() > MAX_DOD_OBSERVATIONS {
            return Err(Error::contract("too many DoD observations to encode"));
        }
        let centi = |k: f64| -> Result<u16> {
            let v = (k * 100.0).round();
            if (0.0..=f64::from(u16::MAX)).contains(&v) {
                Ok(v as u16)
            } else {
                Err(Error::contract(format!("temperature {k} K does not fit the report")))
            }
        };
        let mut out = Vec::with_capacity(REPORT_HEADER_BYTES + self.dod_observations.len());
        out.extend_from_slice(&self.node_id.to_le_bytes());
        out.extend_from_slice(&self.period_start_s.to_le_bytes());
        out.extend_from_slice(&self.period_end_s.to_le_bytes());
        out.extend_from_slice(&self.slot_count.to_le_bytes());
        out.extend_from_slice(&self.n_transmissions.to_le_bytes());
        out.extend_from_slice(&self.energy_consumed_j.to_le_bytes());
        out.extend_from_slice(&((self.mean_soc * 65_535.0).round() as u16).to_le_bytes());
        out.extend_from_slice(&centi(self.mean_temperature_sun_k)?.to_le_bytes());
        out.extend_from_slice(&centi(self.mean_temperature_eclipse_k)?.to_le_bytes());
        out.push(self.dod_observations.len() as u8);
        out.extend(self.dod_observations.iter().map(|d| (d * 255.0).round() as u8));
        debug_assert!(out.len() <= MAX_REPORT_BYTES);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < REPORT_HEADER_BYTES {
            return Err(Error::Report(format!("{} bytes is shorter than the header", bytes.len())));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let n = bytes[28] as usize;
        if bytes.len() != REPORT_HEADER_BYTES + n {
            return Err(Error::Report(format!(
                "length {} does not match {n} DoD observations",
                bytes.len()
            )));
        }
        Ok(Self {
            node_id: u16_at(0),
            period_start_s: u32_at(2),
            period_end_s: u32_at(6),
            slot_count: u16_at(10),
            n_transmissions: u16_at(12),
            energy_consumed_j: f64::from_le_bytes(bytes[14..22].try_into().unwrap()),
            mean_soc: f64::from(u16_at(22)) / 65_535.0,
            mean_temperature_sun_k: f64::from(u16_at(24)) / 100.0,
            mean_temperature_eclipse_k: f64::from(u16_at(26)) / 100.0,
            dod_observations: bytes[29..].iter().map(|&b| f64::from(b) / 255.0).collect(),
        })
    }
}
