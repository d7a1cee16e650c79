//! Run outputs: the per-interval metrics stream and the end-of-run summary.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::energy::ClampKind;
use crate::error::Result;
use crate::mac::Protocol;
use crate::orbit::Phase;
use crate::sim::gateway::NodeAssessment;

/// One node's cumulative state at the end of a reporting interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub time: f64,
    pub node_id: u16,
    pub soc: f64,
    pub fade_fraction: f64,
    pub d_linear: f64,
    pub packets_delivered: u64,
    pub packets_dropped_energy: u64,
    pub packets_dropped_collision_exhausted: u64,
    pub packets_dropped_no_window: u64,
    pub energy_harvested: f64,
    pub energy_consumed: f64,
}

/// How a packet ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketOutcome {
    Delivered,
    /// A sunlit window would have cut into the eclipse reserve.
    DroppedInsufficientEnergySun,
    /// Storage at or below the reserve for an eclipse window.
    DroppedBelowReserveEclipse,
    /// Storage fell to the reserve (or browned out) before the booked slot.
    DroppedEnergyAtTransmit,
    DroppedCollisionExhausted,
    DroppedNoWindow,
}

impl PacketOutcome {
    pub fn is_energy_drop(self) -> bool {
        matches!(
            self,
            PacketOutcome::DroppedInsufficientEnergySun
                | PacketOutcome::DroppedBelowReserveEclipse
                | PacketOutcome::DroppedEnergyAtTransmit
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub id: u64,
    pub node_id: u16,
    pub created_s: f64,
    pub outcome: PacketOutcome,
}

/// A transmission sequence as it began, with the checks that allowed it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxRecord {
    pub packet: u64,
    pub node_id: u16,
    pub window_id: u32,
    pub phase: Phase,
    pub slot_start_s: f64,
    /// Energy estimate for the window when it was chosen, J.
    pub estimate_j: f64,
    /// Stored energy when the sequence started, J.
    pub phi_j: f64,
    pub psi_min_j: f64,
    pub e_critical_j: f64,
    pub attempts_planned: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampEvent {
    pub time_s: f64,
    pub kind: ClampKind,
    pub amount_j: f64,
}

/// Every joule that entered or left one node's storage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub initial_j: f64,
    pub harvested_j: f64,
    pub consumed_j: f64,
    pub ceiling_spill_j: f64,
    pub floor_deficit_j: f64,
    pub fade_spill_j: f64,
    pub final_j: f64,
}

impl EnergyLedger {
    /// Stored energy implied by the flows.
    pub fn expected_final_j(&self) -> f64 {
        self.initial_j + self.harvested_j - self.consumed_j - self.ceiling_spill_j + self.floor_deficit_j
            - self.fade_spill_j
    }

    pub fn residual_j(&self) -> f64 {
        self.final_j - self.expected_final_j()
    }

    /// Residual relative to the energy that passed through storage.
    pub fn relative_residual(&self) -> f64 {
        let scale = self
            .initial_j
            .max(self.final_j)
            .max(self.harvested_j)
            .max(self.consumed_j)
            .max(f64::MIN_POSITIVE);
        self.residual_j().abs() / scale
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClampTotals {
    pub count: u64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PacketTotals {
    pub generated: u64,
    pub delivered: u64,
    pub dropped_energy: u64,
    pub dropped_collision_exhausted: u64,
    pub dropped_no_window: u64,
    pub by_outcome: BTreeMap<PacketOutcome, u64>,
}

impl PacketTotals {
    pub fn record(&mut self, outcome: PacketOutcome) {
        *self.by_outcome.entry(outcome).or_default() += 1;
        match outcome {
            PacketOutcome::Delivered => self.delivered += 1,
            PacketOutcome::DroppedCollisionExhausted => self.dropped_collision_exhausted += 1,
            PacketOutcome::DroppedNoWindow => self.dropped_no_window += 1,
            _ => self.dropped_energy += 1,
        }
    }

    pub fn dropped(&self) -> u64 {
        self.dropped_energy + self.dropped_collision_exhausted + self.dropped_no_window
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub node_id: u16,
    pub fade_fraction: f64,
    pub d_linear: f64,
    pub d_calendar: f64,
    pub d_cycle: f64,
    pub cycles_completed: f64,
    pub final_soc: f64,
    pub windows: usize,
    pub transmissions: u64,
    pub packets: PacketTotals,
    pub brownouts: u64,
    pub clamps: BTreeMap<ClampKind, ClampTotals>,
    pub ledger: EnergyLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub protocol: Protocol,
    pub duration_s: f64,
    pub node_count: usize,
    pub packets: PacketTotals,
    /// Delivered over generated; 1 when nothing was generated.
    pub delivery_ratio: f64,
    pub attempts: u64,
    pub attempts_collided: u64,
    /// Cycle-aging share of linear degradation, summed over nodes.
    pub total_cycle_aging: f64,
    pub nodes: Vec<NodeSummary>,
    pub gateway: Vec<NodeAssessment>,
}

pub fn write_metrics_csv<W: Write>(records: &[MetricsRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record([
            "time",
            "node_id",
            "soc",
            "fade_fraction",
            "d_linear",
            "packets_delivered",
            "packets_dropped_energy",
            "packets_dropped_collision_exhausted",
            "packets_dropped_no_window",
            "energy_harvested",
            "energy_consumed",
        ])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}
