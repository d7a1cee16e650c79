//! Discrete-event simulation of a LoRa satellite fleet.
//!
//! One run is single-threaded and a pure function of `(scenario, seed)`.
//! Events are ordered by `(time, sequence)`; the sequence number is handed out
//! when an event is scheduled. Each node settles its energy slot by slot,
//! and before any node-local event is handled, every slot of that node that
//! has already ended is settled first, so decisions always see current
//! storage.

pub mod aging;
pub mod collision;
pub mod gateway;
pub mod metrics;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::battery::BatteryState;
use crate::config::{ScenarioConfig, Traffic};
use crate::energy::{self, ClampKind, HarvestModel, NodeEnergyState, PowerProfile, SlotFlow};
use crate::error::{Error, Result};
use crate::mac::{
    self, Candidate, DropReason, MacConfig, NodeBatteryReport, ReportAccumulator, SelectionEnv, TxDecision,
};
use crate::orbit::{self, OrbitConfig, Phase, Schedule};
use crate::radio;

use aging::{AgingContext, OrbitLedger};
use collision::{Attempt, ChannelKey, CollisionMonitor};
use gateway::GatewayContext;
use metrics::{
    ClampEvent, ClampTotals, EnergyLedger, MetricsRecord, NodeSummary, PacketOutcome, PacketRecord, PacketTotals,
    RunSummary, TxRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    PacketArrival { node: usize },
    SlotTick { node: usize },
    TxAttemptStart { packet: u64, attempt: u32 },
    TxAttemptEnd { packet: u64, attempt: u32 },
    ReportDue { node: usize },
    BrownoutRecovery { node: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct SimEvent {
    pub time: f64,
    pub sequence: u64,
    pub kind: EventKind,
}

impl PartialEq for SimEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SimEvent {}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimEvent {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.sequence.cmp(&self.sequence))
    }
}

#[derive(Debug, Default)]
struct EventQueue {
    heap: BinaryHeap<SimEvent>,
    next_sequence: u64,
    now: f64,
}

impl EventQueue {
    fn schedule(&mut self, time: f64, kind: EventKind) {
        debug_assert!(time >= self.now, "event at {time} scheduled in the past ({})", self.now);
        self.heap.push(SimEvent {
            time,
            sequence: self.next_sequence,
            kind,
        });
        self.next_sequence += 1;
    }

    fn pop(&mut self) -> Option<SimEvent> {
        let e = self.heap.pop()?;
        self.now = e.time;
        Some(e)
    }
}

/// Quantities derived once from a validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Derived {
    pub horizon_s: f64,
    pub slot_len_s: f64,
    pub rated_energy_j: f64,
    pub sleep_power_w: f64,
    pub harvest_power_w: f64,
    pub harvest: HarvestModel,
    pub e_sleep_j: f64,
    pub psi_min_j: f64,
    pub e_critical_j: f64,
    pub airtime_s: f64,
    pub tx_energy_j: f64,
    pub mac: MacConfig,
}

impl Derived {
    pub fn new(sc: &ScenarioConfig) -> Result<Self> {
        let slot = sc.sim.slot_length_s;
        let rated = sc.battery.rated_energy_j();
        let eclipse_s = sc.orbit.period_s - sc.orbit.sun_duration_s;
        let sleep_power_w = sc.energy.sleep_power_w.unwrap_or(if eclipse_s > 0.0 {
            sc.battery.dod_nominal * rated / eclipse_s
        } else {
            0.0
        });
        let harvest_power_w = sc
            .energy
            .harvest_power_w
            .unwrap_or(sleep_power_w * sc.orbit.period_s / sc.orbit.sun_duration_s);
        let airtime_s = radio::time_on_air(&sc.radio)?;
        let tx_energy_j = radio::tx_energy(&sc.radio)?;
        let m = &sc.mac;
        let backoff_base_s = match m.backoff_base_s {
            Some(b) => b,
            None => mac::calibrated_backoff_base(m.max_attempts, airtime_s, m.slot_budget_s)?,
        };
        let dif_ref = match m.dif_ref {
            Some(d) => d,
            None => {
                let t = &sc.battery.thermal;
                let hottest = t.t_sun_k.max(t.t_eclipse_k);
                let step = f64::from(m.max_attempts) * tx_energy_j / rated;
                crate::battery::max_incremental_cycle_fade(&sc.battery.degradation, sc.battery.c_rate, hottest, step)?
            }
        };
        if !(dif_ref > 0.0) {
            return Err(Error::config(
                "cannot derive dif_ref: the transmit energy is negligible against capacity; set mac.dif_ref",
            ));
        }
        let mac = MacConfig {
            protocol: m.protocol,
            beta: m.beta,
            w_dif: m.w_dif,
            w_energy: m.w_energy,
            max_attempts: m.max_attempts,
            slot_budget_s: m.slot_budget_s,
            dif_ref,
            backoff_base_s,
            deadline_s: m.deadline_s.unwrap_or(2.0 * sc.orbit.period_s),
        };
        mac.validate()?;
        Ok(Self {
            horizon_s: sc.sim.horizon_s(),
            slot_len_s: slot,
            rated_energy_j: rated,
            sleep_power_w,
            harvest_power_w,
            harvest: HarvestModel {
                e_g_sun_j: harvest_power_w * slot,
                charge_rate_limit_j: sc.energy.charge_limit_w.map_or(f64::INFINITY, |w| w * slot),
            },
            e_sleep_j: sleep_power_w * slot,
            psi_min_j: sc.energy.psi_min_fraction * rated,
            e_critical_j: sc.energy.e_critical_j.unwrap_or(sleep_power_w * eclipse_s),
            airtime_s,
            tx_energy_j,
            mac,
        })
    }

    pub fn profile(&self) -> PowerProfile {
        PowerProfile {
            e_cons_tx_j: self.e_sleep_j + f64::from(self.mac.max_attempts) * self.tx_energy_j,
            e_sleep_j: self.e_sleep_j,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Booking {
    window_id: u32,
    slot: i64,
    slot_start_s: f64,
    phase: Phase,
    estimate_j: f64,
}

#[derive(Debug, Clone)]
struct Packet {
    node: usize,
    created_s: f64,
    booking: Option<Booking>,
    planned: Vec<f64>,
    /// Collision-monitor id of the attempt on air.
    attempt_uid: u64,
    outcome: Option<PacketOutcome>,
}

#[derive(Debug, Default, Clone, Copy)]
struct SlotUse {
    attempts: u32,
    reserved_j: f64,
}

struct Node {
    id: u16,
    orbit: OrbitConfig,
    schedule: Schedule,
    energy: NodeEnergyState,
    battery: BatteryState,
    offset_s: f64,
    traffic_rng: ChaCha8Rng,
    mac_rng: ChaCha8Rng,
    /// Slot index to transmission bookkeeping for booked slots.
    slots: BTreeMap<i64, SlotUse>,
    /// Next slot to settle.
    cursor: i64,
    orbit_ledger: OrbitLedger,
    orbit_k: i64,
    acc: ReportAccumulator,
    sleep_until_s: f64,
    packets: PacketTotals,
    ledger: EnergyLedger,
    clamps: Vec<ClampEvent>,
    transmissions: Vec<TxRecord>,
    dod_history: Vec<f64>,
    fade_history: Vec<(f64, f64)>,
    brownouts: u64,
    tx_slots: u64,
}

impl Node {
    fn slot_start(&self, k: i64, slot_len: f64) -> f64 {
        (self.offset_s + k as f64 * slot_len).max(0.0)
    }

    fn slot_end(&self, k: i64, slot_len: f64, horizon: f64) -> f64 {
        (self.offset_s + (k + 1) as f64 * slot_len).min(horizon)
    }
}

/// Per-node detail kept beside the summary.
#[derive(Debug, Clone)]
pub struct NodeTrace {
    pub node_id: u16,
    pub schedule: Schedule,
    pub battery: BatteryState,
    pub energy: NodeEnergyState,
    pub ledger: EnergyLedger,
    pub clamps: Vec<ClampEvent>,
    pub transmissions: Vec<TxRecord>,
    /// Depth of discharge of every completed orbit.
    pub dod_history: Vec<f64>,
    /// `(time, fade_fraction)` after every orbit.
    pub fade_history: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: Vec<MetricsRecord>,
    pub summary: RunSummary,
    pub packets: Vec<PacketRecord>,
    pub reports: Vec<NodeBatteryReport>,
    pub nodes: Vec<NodeTrace>,
    pub derived: Derived,
}

fn node_rng(seed: u64, node: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node as u64 * 4 + stream);
    rng
}

struct Engine<'a> {
    sc: &'a ScenarioConfig,
    d: Derived,
    profile: PowerProfile,
    queue: EventQueue,
    nodes: Vec<Node>,
    packets: Vec<Packet>,
    receivers: BTreeMap<String, u32>,
    monitor: CollisionMonitor,
    reports: Vec<NodeBatteryReport>,
    metrics: Vec<MetricsRecord>,
    attempts: u64,
    attempts_collided: u64,
    interarrival: Option<Exp<f64>>,
}

/// Runs one scenario to its horizon.
pub fn run(scenario: &ScenarioConfig, seed: u64) -> Result<RunOutput> {
    scenario.validate()?;
    let mut engine = Engine::new(scenario, seed)?;
    engine.run()?;
    engine.finish(seed)
}

impl<'a> Engine<'a> {
    fn new(sc: &'a ScenarioConfig, seed: u64) -> Result<Self> {
        let d = Derived::new(sc)?;
        let n = sc.sim.node_count;
        let horizon = d.horizon_s;
        let mut nodes = Vec::with_capacity(n);
        let mut receivers = BTreeMap::new();
        for s in &sc.stations {
            let next = receivers.len() as u32;
            receivers.entry(s.id.clone()).or_insert(next);
        }
        for i in 0..n {
            let id = u16::try_from(i).map_err(|_| Error::config("at most 65536 nodes"))?;
            let orbit_cfg = sc.orbit.for_node(i, n);
            let schedule = match &sc.sim.schedule_override {
                Some(map) => map.get(&(i as u32)).cloned().unwrap_or_default(),
                None if sc.stations.is_empty() => Schedule::default(),
                None => orbit::build_schedule(&orbit_cfg, &sc.stations, horizon, sc.sim.visibility_step_s)?,
            };
            for w in schedule.windows() {
                let next = receivers.len() as u32;
                receivers.entry(w.target.clone()).or_insert(next);
            }
            let battery = BatteryState::new(sc.battery.capacity_ah, sc.battery.voltage_nominal_v, sc.battery.initial_soc)?;
            let phi_max = battery.effective_energy_j();
            let energy = NodeEnergyState::new(
                sc.battery.initial_soc * phi_max,
                phi_max,
                d.psi_min_j,
                d.e_critical_j,
                d.profile().e_cons_tx_j,
            )?;
            let offset_s = node_rng(seed, i, 0).random::<f64>() * d.slot_len_s;
            let cursor = if offset_s > 0.0 { -1 } else { 0 };
            nodes.push(Node {
                id,
                orbit: orbit_cfg,
                schedule,
                ledger: EnergyLedger {
                    initial_j: energy.phi_j,
                    ..EnergyLedger::default()
                },
                energy,
                battery,
                offset_s,
                traffic_rng: node_rng(seed, i, 1),
                mac_rng: node_rng(seed, i, 2),
                slots: BTreeMap::new(),
                cursor,
                orbit_ledger: OrbitLedger::default(),
                orbit_k: orbit_cfg.orbit_number(0.0),
                acc: ReportAccumulator::starting_at(0),
                sleep_until_s: 0.0,
                packets: PacketTotals::default(),
                clamps: Vec::new(),
                transmissions: Vec::new(),
                dod_history: Vec::new(),
                fade_history: Vec::new(),
                brownouts: 0,
                tx_slots: 0,
            });
        }
        let interarrival = match sc.sim.traffic {
            Traffic::Poisson { mean_interval_s } => Some(
                Exp::new(1.0 / mean_interval_s).map_err(|e| Error::config(format!("traffic rate: {e}")))?,
            ),
            _ => None,
        };
        Ok(Self {
            sc,
            profile: d.profile(),
            d,
            queue: EventQueue::default(),
            nodes,
            packets: Vec::new(),
            receivers,
            monitor: CollisionMonitor::default(),
            reports: Vec::new(),
            metrics: Vec::new(),
            attempts: 0,
            attempts_collided: 0,
            interarrival,
        })
    }

    fn env(&self) -> SelectionEnv<'_> {
        SelectionEnv {
            harvest: &self.d.harvest,
            profile: &self.profile,
            mac: &self.d.mac,
            degradation: &self.sc.battery.degradation,
            thermal: &self.sc.battery.thermal,
            c_rate: self.sc.battery.c_rate,
            slot_len_s: self.d.slot_len_s,
        }
    }

    fn aging_ctx(&self) -> AgingContext<'a> {
        AgingContext {
            params: &self.sc.battery.degradation,
            thermal: &self.sc.battery.thermal,
            c_rate: self.sc.battery.c_rate,
            dod_nominal: self.sc.battery.dod_nominal,
        }
    }

    fn run(&mut self) -> Result<()> {
        let horizon = self.d.horizon_s;
        let l = self.d.slot_len_s;
        for i in 0..self.nodes.len() {
            let first_end = self.nodes[i].slot_end(self.nodes[i].cursor, l, horizon);
            self.queue.schedule(first_end, EventKind::SlotTick { node: i });
            if self.sc.sim.report_interval_s < horizon {
                self.queue
                    .schedule(self.sc.sim.report_interval_s, EventKind::ReportDue { node: i });
            }
            if let Some(t) = self.next_arrival(i, 0.0, true) {
                self.queue.schedule(t, EventKind::PacketArrival { node: i });
            }
        }
        while let Some(ev) = self.queue.pop() {
            let now = ev.time;
            match ev.kind {
                EventKind::SlotTick { node } => {
                    self.settle_through(node, now)?;
                    let n = &self.nodes[node];
                    if n.slot_start(n.cursor, l) < horizon {
                        let end = n.slot_end(n.cursor, l, horizon);
                        self.queue.schedule(end, EventKind::SlotTick { node });
                    }
                }
                EventKind::PacketArrival { node } => self.on_arrival(node, now)?,
                EventKind::TxAttemptStart { packet, attempt } => self.on_attempt_start(packet, attempt, now)?,
                EventKind::TxAttemptEnd { packet, attempt } => self.on_attempt_end(packet, attempt, now),
                EventKind::ReportDue { node } => {
                    self.close_report(node, now)?;
                    let next = now + self.sc.sim.report_interval_s;
                    if next < horizon {
                        self.queue.schedule(next, EventKind::ReportDue { node });
                    }
                }
                EventKind::BrownoutRecovery { node } => self.settle_through(node, now)?,
            }
        }
        for i in 0..self.nodes.len() {
            self.settle_through(i, horizon)?;
            self.step_orbit(i, horizon)?;
            if f64::from(self.nodes[i].acc.period_start_s) < horizon {
                self.close_report(i, horizon)?;
            } else {
                self.push_metrics(i, horizon);
            }
        }
        Ok(())
    }

    fn next_arrival(&mut self, node: usize, now: f64, first: bool) -> Option<f64> {
        let rng = &mut self.nodes[node].traffic_rng;
        let t = match self.sc.sim.traffic {
            Traffic::None => return None,
            Traffic::Poisson { .. } => now + self.interarrival.as_ref()?.sample(rng),
            Traffic::Periodic { interval_s } if first => rng.random::<f64>() * interval_s,
            Traffic::Periodic { interval_s } => now + interval_s,
        };
        (t < self.d.horizon_s).then_some(t)
    }

    /// Settles every slot of `node` that ends at or before `t`.
    fn settle_through(&mut self, node: usize, t: f64) -> Result<()> {
        let l = self.d.slot_len_s;
        let horizon = self.d.horizon_s;
        loop {
            let n = &self.nodes[node];
            let k = n.cursor;
            let a = n.slot_start(k, l);
            let b = n.slot_end(k, l, horizon);
            if a >= horizon || b > t {
                return Ok(());
            }
            self.settle_slot(node, k, a, b)?;
            self.nodes[node].cursor += 1;
        }
    }

    fn settle_slot(&mut self, node: usize, k: i64, a: f64, b: f64) -> Result<()> {
        let l = self.d.slot_len_s;
        let thermal = self.sc.battery.thermal;
        let beta = self.d.mac.beta;
        let tx_energy = self.d.tx_energy_j;
        let e_sleep = self.d.e_sleep_j * (b - a) / l;
        let harvest = self.d.harvest;
        let n = &mut self.nodes[node];

        let orbit_cfg = n.orbit;
        let sun_s = orbit::sun_seconds_in(&orbit_cfg, a, b);
        let y = sun_s > 0.0;
        let phase = if y { Phase::Sun } else { Phase::Eclipse };
        let e_g = harvest.slot_harvest(sun_s, l);
        let used = n.slots.remove(&k).unwrap_or_default();
        let x = used.attempts > 0;
        let e_cons = e_sleep + f64::from(used.attempts) * tx_energy;
        let profile = PowerProfile {
            e_cons_tx_j: e_cons,
            e_sleep_j: e_sleep,
        };

        let soc_before = n.energy.soc();
        let outcome = energy::energy_step(&mut n.energy, x, y, e_g, phase, &profile)?;
        n.energy.reserved_j = (n.energy.reserved_j - used.reserved_j).max(0.0);
        if x {
            n.energy.ewma_estimate_j = energy::ewma_update(beta, e_cons, n.energy.ewma_estimate_j)?;
            n.tx_slots += 1;
        }
        let gained = if y { e_g } else { 0.0 };
        n.ledger.harvested_j += gained;
        n.ledger.consumed_j += e_cons;
        if let Some(c) = outcome.clamp {
            match c.kind {
                ClampKind::Ceiling => n.ledger.ceiling_spill_j += c.amount_j,
                ClampKind::Floor => n.ledger.floor_deficit_j += c.amount_j,
                ClampKind::CapacityFade => n.ledger.fade_spill_j += c.amount_j,
            }
            n.clamps.push(ClampEvent {
                time_s: b,
                kind: c.kind,
                amount_j: c.amount_j,
            });
        }
        let soc_after = n.energy.soc();
        let soc_seconds = 0.5 * (soc_before + soc_after) * (b - a);

        n.acc.slot_count += 1;
        n.acc.n_transmissions += u32::from(x);
        n.acc.energy_consumed_j += e_cons;
        n.acc.soc_seconds += soc_seconds;
        n.acc.seconds += b - a;
        n.acc.temp_sun_seconds += thermal.t_sun_k * sun_s;
        n.acc.sun_seconds += sun_s;
        n.acc.temp_eclipse_seconds += thermal.t_eclipse_k * (b - a - sun_s);
        n.acc.eclipse_seconds += b - a - sun_s;

        // Battery throughput, split at a sunrise that falls inside the slot.
        let flow = SlotFlow::split(e_cons, gained, b - a, sun_s);
        let share = |from: f64, to: f64| -> OrbitLedger {
            let span = b - a;
            let sun = orbit::sun_seconds_in(&orbit_cfg, from, to);
            let ecl = (to - from) - sun;
            let sun_share = if sun_s > 0.0 { sun / sun_s } else { 0.0 };
            let ecl_total = span - sun_s;
            let ecl_share = if ecl_total > 0.0 { ecl / ecl_total } else { 0.0 };
            OrbitLedger {
                sun_s: sun,
                eclipse_s: ecl,
                discharge_sun_j: flow.discharge_sun_j * sun_share,
                discharge_eclipse_j: flow.discharge_eclipse_j * ecl_share,
                charge_j: flow.charge_j * sun_share,
                soc_seconds: soc_seconds * (to - from) / span,
            }
        };
        let sunrise = n.orbit.sun_start(n.orbit_k + 1);
        if sunrise > a && sunrise < b {
            let before = share(a, sunrise);
            let after = share(sunrise, b);
            n.orbit_ledger.add(&before);
            self.step_orbit(node, sunrise)?;
            self.nodes[node].orbit_ledger.add(&after);
        } else {
            n.orbit_ledger.add(&share(a, b));
            if sunrise == b {
                self.step_orbit(node, b)?;
            }
        }
        let n = &mut self.nodes[node];
        if sunrise <= b {
            n.orbit_k += 1;
        }

        if outcome.brownout() {
            n.brownouts += 1;
            let until = n.slot_end(k + 1, l, self.d.horizon_s);
            n.sleep_until_s = until;
            if until > b {
                self.queue.schedule(until, EventKind::BrownoutRecovery { node });
            }
        }
        Ok(())
    }

    /// Ages the battery by the ledger gathered since the last sunrise.
    fn step_orbit(&mut self, node: usize, t: f64) -> Result<()> {
        let ctx = self.aging_ctx();
        let n = &mut self.nodes[node];
        if n.orbit_ledger.seconds() <= 0.0 {
            return Ok(());
        }
        n.battery.soc = n.energy.soc();
        let step = aging::step_battery_per_orbit(&n.battery, &ctx, &n.orbit_ledger)?;
        n.battery = step.state;
        n.orbit_ledger = OrbitLedger::default();
        n.dod_history.push(step.dod);
        n.acc.dod_observations.push(step.dod);
        n.fade_history.push((t, n.battery.fade_fraction));
        if let Some(c) = n.energy.set_capacity(n.battery.effective_energy_j()) {
            n.ledger.fade_spill_j += c.amount_j;
            n.clamps.push(ClampEvent {
                time_s: t,
                kind: c.kind,
                amount_j: c.amount_j,
            });
        }
        Ok(())
    }

    fn candidates(&self, node: usize, now: f64) -> Vec<(Candidate, i64)> {
        let n = &self.nodes[node];
        let l = self.d.slot_len_s;
        let deadline = now + self.d.mac.deadline_s;
        let earliest = now.max(n.sleep_until_s);
        let windows = n.schedule.windows();
        let mut out = Vec::new();
        for w in &windows[n.schedule.first_open_after(now)..] {
            if w.start_s >= deadline {
                break;
            }
            let from = earliest.max(w.start_s);
            let mut k = ((from - n.offset_s) / l).ceil() as i64;
            while n.slot_start(k, l) < from {
                k += 1;
            }
            while n.slots.contains_key(&k) {
                k += 1;
            }
            let s = n.slot_start(k, l);
            let fits = k >= 0
                && k >= n.cursor
                && s + self.d.airtime_s <= w.end_s
                && s < deadline
                && n.offset_s + (k + 1) as f64 * l <= self.d.horizon_s;
            if fits {
                out.push((
                    Candidate {
                        window_id: w.window_id,
                        slot_start_s: s,
                    },
                    k,
                ));
            }
        }
        out
    }

    fn finish_packet(&mut self, packet: u64, outcome: PacketOutcome) {
        let p = &mut self.packets[packet as usize];
        debug_assert!(p.outcome.is_none(), "packet {packet} finished twice");
        p.outcome = Some(outcome);
        self.nodes[p.node].packets.record(outcome);
    }

    fn on_arrival(&mut self, node: usize, now: f64) -> Result<()> {
        self.settle_through(node, now)?;
        if let Some(t) = self.next_arrival(node, now, false) {
            self.queue.schedule(t, EventKind::PacketArrival { node });
        }
        let id = self.packets.len() as u64;
        self.packets.push(Packet {
            node,
            created_s: now,
            booking: None,
            planned: Vec::new(),
            attempt_uid: 0,
            outcome: None,
        });
        self.nodes[node].packets.generated += 1;

        let cands = self.candidates(node, now);
        let plain: Vec<Candidate> = cands.iter().map(|(c, _)| *c).collect();
        let n = &self.nodes[node];
        let selection = mac::select_forecast_window(&n.schedule, &plain, &n.energy, &self.env())?;
        match selection.decision {
            TxDecision::Drop(reason) => {
                let outcome = match reason {
                    DropReason::InsufficientEnergySun => PacketOutcome::DroppedInsufficientEnergySun,
                    DropReason::BelowReserveEclipse => PacketOutcome::DroppedBelowReserveEclipse,
                    DropReason::NoWindow => PacketOutcome::DroppedNoWindow,
                };
                self.finish_packet(id, outcome);
            }
            TxDecision::Transmit { window_id, slot_start_s } => {
                let eval = *selection.chosen().expect("chosen window was evaluated");
                let slot = cands
                    .iter()
                    .find(|(c, _)| c.window_id == window_id && c.slot_start_s == slot_start_s)
                    .map(|&(_, k)| k)
                    .expect("chosen candidate exists");
                let n = &mut self.nodes[node];
                let reserved_j = (n.energy.ewma_estimate_j - self.d.e_sleep_j).max(0.0);
                n.energy.reserved_j += reserved_j;
                n.slots.insert(
                    slot,
                    SlotUse {
                        attempts: 0,
                        reserved_j,
                    },
                );
                self.packets[id as usize].booking = Some(Booking {
                    window_id,
                    slot,
                    slot_start_s,
                    phase: eval.phase,
                    estimate_j: eval.estimate_j,
                });
                self.queue
                    .schedule(slot_start_s, EventKind::TxAttemptStart { packet: id, attempt: 0 });
            }
        }
        Ok(())
    }

    fn on_attempt_start(&mut self, packet: u64, attempt: u32, now: f64) -> Result<()> {
        let node = self.packets[packet as usize].node;
        let booking = self.packets[packet as usize]
            .booking
            .expect("attempts only follow a booking");
        if attempt == 0 {
            self.settle_through(node, now)?;
            let n = &self.nodes[node];
            let asleep = now < n.sleep_until_s;
            let below_reserve = booking.phase == Phase::Eclipse && n.energy.phi_j <= n.energy.phi_min_j;
            let is_battery_aware = self.d.mac.protocol == mac::Protocol::BatteryAware;
            if asleep || (is_battery_aware && below_reserve) {
                self.finish_packet(packet, PacketOutcome::DroppedEnergyAtTransmit);
                return Ok(());
            }
            let decision = TxDecision::Transmit {
                window_id: booking.window_id,
                slot_start_s: booking.slot_start_s,
            };
            let n = &mut self.nodes[node];
            let planned =
                mac::run_transmission_sequence(&decision, &n.schedule, &self.sc.radio, &self.d.mac, &mut n.mac_rng)?;
            n.transmissions.push(TxRecord {
                packet,
                node_id: n.id,
                window_id: booking.window_id,
                phase: booking.phase,
                slot_start_s: booking.slot_start_s,
                estimate_j: booking.estimate_j,
                phi_j: n.energy.phi_j,
                psi_min_j: n.energy.phi_min_j,
                e_critical_j: n.energy.e_critical_j,
                attempts_planned: planned.len() as u32,
            });
            if planned.is_empty() {
                self.finish_packet(packet, PacketOutcome::DroppedCollisionExhausted);
                return Ok(());
            }
            self.packets[packet as usize].planned = planned;
        }

        let n = &self.nodes[node];
        let window = n
            .schedule
            .get(booking.window_id)
            .ok_or_else(|| Error::contract("booked window vanished"))?;
        let key = ChannelKey {
            receiver: self.receivers[&window.target],
            channel: 0,
            spreading_factor: self.sc.radio.spreading_factor,
        };
        let uid = self.attempts;
        self.attempts += 1;
        self.monitor.start(
            uid,
            &Attempt {
                start_s: now,
                airtime_s: self.d.airtime_s,
                key,
            },
        );
        self.nodes[node]
            .slots
            .get_mut(&booking.slot)
            .expect("booked slot settles after its attempts")
            .attempts += 1;
        self.packets[packet as usize].attempt_uid = uid;
        self.queue
            .schedule(now + self.d.airtime_s, EventKind::TxAttemptEnd { packet, attempt });
        Ok(())
    }

    fn on_attempt_end(&mut self, packet: u64, attempt: u32, _now: f64) {
        let uid = self.packets[packet as usize].attempt_uid;
        if self.monitor.finish(uid) {
            self.finish_packet(packet, PacketOutcome::Delivered);
            return;
        }
        self.attempts_collided += 1;
        let p = &self.packets[packet as usize];
        let next = attempt + 1;
        if (next as usize) < p.planned.len() {
            let t = p.planned[next as usize];
            self.queue
                .schedule(t, EventKind::TxAttemptStart { packet, attempt: next });
        } else {
            self.finish_packet(packet, PacketOutcome::DroppedCollisionExhausted);
        }
    }

    fn push_metrics(&mut self, node: usize, t: f64) {
        let n = &self.nodes[node];
        self.metrics.push(MetricsRecord {
            time: t,
            node_id: n.id,
            soc: n.energy.soc(),
            fade_fraction: n.battery.fade_fraction,
            d_linear: n.battery.d_linear,
            packets_delivered: n.packets.delivered,
            packets_dropped_energy: n.packets.dropped_energy,
            packets_dropped_collision_exhausted: n.packets.dropped_collision_exhausted,
            packets_dropped_no_window: n.packets.dropped_no_window,
            energy_harvested: n.ledger.harvested_j,
            energy_consumed: n.ledger.consumed_j,
        });
    }

    fn close_report(&mut self, node: usize, t: f64) -> Result<()> {
        self.settle_through(node, t)?;
        let n = &mut self.nodes[node];
        let end = t as u32;
        let report = mac::report_battery_summary(n.id, &n.acc, end, &self.sc.battery.thermal)?;
        // what the gateway sees is what survived the uplink encoding
        let received = NodeBatteryReport::decode(&report.encode()?)?;
        debug_assert_eq!(received, report);
        self.reports.push(received);
        n.acc = ReportAccumulator::starting_at(end);
        self.push_metrics(node, t);
        Ok(())
    }

    fn finish(self, seed: u64) -> Result<RunOutput> {
        let sc = self.sc;
        let gw = gateway::gateway_compute_fleet_degradation(
            &self.reports,
            &sc.battery.degradation,
            &GatewayContext {
                c_rate: sc.battery.c_rate,
                dod_nominal: sc.battery.dod_nominal,
                sun_fraction: sc.orbit.sun_duration_s / sc.orbit.period_s,
            },
        )?;
        let mut totals = PacketTotals::default();
        let mut packets = Vec::with_capacity(self.packets.len());
        for (id, p) in self.packets.iter().enumerate() {
            let outcome = p
                .outcome
                .ok_or_else(|| Error::contract(format!("packet {id} never finished")))?;
            totals.generated += 1;
            totals.record(outcome);
            packets.push(PacketRecord {
                id: id as u64,
                node_id: self.nodes[p.node].id,
                created_s: p.created_s,
                outcome,
            });
        }
        let mut node_summaries = Vec::new();
        let mut traces = Vec::new();
        let mut total_cycle_aging = 0.0;
        for mut n in self.nodes {
            n.ledger.final_j = n.energy.phi_j;
            let mut clamps: BTreeMap<ClampKind, ClampTotals> = BTreeMap::new();
            for c in &n.clamps {
                let e = clamps.entry(c.kind).or_default();
                e.count += 1;
                e.energy_j += c.amount_j;
            }
            total_cycle_aging += n.battery.d_cycle;
            node_summaries.push(NodeSummary {
                node_id: n.id,
                fade_fraction: n.battery.fade_fraction,
                d_linear: n.battery.d_linear,
                d_calendar: n.battery.d_calendar,
                d_cycle: n.battery.d_cycle,
                cycles_completed: n.battery.cycles_completed,
                final_soc: n.energy.soc(),
                windows: n.schedule.len(),
                transmissions: n.tx_slots,
                packets: n.packets.clone(),
                brownouts: n.brownouts,
                clamps,
                ledger: n.ledger,
            });
            traces.push(NodeTrace {
                node_id: n.id,
                schedule: n.schedule,
                battery: n.battery,
                energy: n.energy,
                ledger: n.ledger,
                clamps: n.clamps,
                transmissions: n.transmissions,
                dod_history: n.dod_history,
                fade_history: n.fade_history,
            });
        }
        let delivery_ratio = if totals.generated > 0 {
            totals.delivered as f64 / totals.generated as f64
        } else {
            1.0
        };
        let summary = RunSummary {
            seed,
            protocol: self.d.mac.protocol,
            duration_s: self.d.horizon_s,
            node_count: sc.sim.node_count,
            packets: totals,
            delivery_ratio,
            attempts: self.attempts,
            attempts_collided: self.attempts_collided,
            total_cycle_aging,
            nodes: node_summaries,
            gateway: gw.into_values().collect(),
        };
        Ok(RunOutput {
            metrics: self.metrics,
            summary,
            packets,
            reports: self.reports,
            nodes: traces,
            derived: self.d,
        })
    }
}
