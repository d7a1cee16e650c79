//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::panic;
use std::time::{Duration, Instant};

use leolora::battery::{self, CycleStress, DegradationParams, GAS_CONSTANT};
use leolora::cli;
use leolora::config::{ScenarioConfig, Traffic};
use leolora::energy::{self, ClampKind};
use leolora::mac::{self, NodeBatteryReport, Protocol};
use leolora::orbit::{self, Phase};
use leolora::radio::{self, RadioConfig};
use leolora::sim::collision::{self, Attempt, ChannelKey, CollisionMonitor};
use leolora::sim::gateway::{self, GatewayContext};
use leolora::sim::{self, metrics};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let pass: bool = $cond;
        if !pass {
            return Err(format!($($fmt)+));
        }
    };
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn scenario_days(days: f64) -> ScenarioConfig {
    let mut sc = ScenarioConfig::bundled_default();
    sc.sim.duration_days = days;
    sc
}

// 1. Degradation formulas against a straight-line reimplementation.

fn oracle_calendar(p: &DegradationParams, t: f64, soc: f64, days: f64) -> f64 {
    p.k1 * (p.soc_exponent * soc.ln() - p.ea_j_per_mol / (GAS_CONSTANT * t)).exp() * days
}

fn oracle_cycle(p: &DegradationParams, dod: f64, c: f64, t: f64, n: f64) -> f64 {
    p.k2 * (p.dod_exponent * dod.ln() + p.c_rate_exponent * c.ln() - p.ea_j_per_mol / (GAS_CONSTANT * t)).exp() * n
}

fn oracle_sei(p: &DegradationParams, dl: f64) -> f64 {
    // 1 - e^-x written as 2 e^(-x/2) sinh(x/2)
    let one_minus = |x: f64| 2.0 * (-x / 2.0).exp() * (x / 2.0).sinh();
    p.alpha_sei * one_minus(p.k_sei * dl) + (1.0 - p.alpha_sei) * one_minus(dl)
}

fn degradation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xDE6);
    let mut worst = [0.0f64; 3];
    for _ in 0..1000 {
        let p = DegradationParams {
            k1: rng.random_range(2.75e-3..=1.1e-2),
            k2: rng.random_range(1.0..=4.0),
            ea_j_per_mol: rng.random_range(35_000.0..=40_000.0),
            soc_exponent: rng.random_range(1.0..=1.6),
            c_rate_exponent: rng.random_range(1.0..=1.6),
            dod_exponent: rng.random_range(1.0..=1.6),
            alpha_sei: rng.random_range(0.01..=0.1),
            k_sei: rng.random_range(50.0..=200.0),
        };
        let t = rng.random_range(263.0..=303.0);
        let soc = rng.random_range(0.75..=0.9);
        let days = rng.random_range(0.0..=3650.0);
        let dod = rng.random_range(0.05..=1.0);
        let c = rng.random_range(0.1..=1.0);
        let n = rng.random_range(0.0..=60_000.0);
        let dl = rng.random_range(0.0f64..=0.5).powi(3);

        let cal = ok(battery::calendar_aging(&p, t, soc, days))?;
        let cyc = ok(battery::cycle_aging(&p, &ok(CycleStress::new(dod, c, t))?, n))?;
        let sei = ok(battery::sei_capacity_fade(&p, dl))?;
        for (i, (got, want)) in [
            (cal, oracle_calendar(&p, t, soc, days)),
            (cyc, oracle_cycle(&p, dod, c, t, n)),
            (sei, oracle_sei(&p, dl)),
        ]
        .into_iter()
        .enumerate()
        {
            worst[i] = worst[i].max(rel(got, want));
        }
    }
    ensure!(worst.iter().all(|w| *w <= 1e-12), "worst relative error {worst:?}");

    // high-precision values at the default parameters
    let table = ScenarioConfig::bundled_default().battery.degradation;
    for (dl, want) in [
        (1e-9, 7.899999578600017e-9),
        (1e-6, 7.899578616977103e-6),
        (1.775336944932478e-4, 1.389328902693365e-3),
        (0.05, 0.10333069034270386),
    ] {
        let got = ok(battery::sei_capacity_fade(&table, dl))?;
        ensure!(rel(got, want) <= 1e-12, "fade at {dl}: {got} vs {want}");
    }
    Ok(format!(
        "1000 points, worst relative error calendar {:.1e}, cycle {:.1e}, SEI {:.1e}",
        worst[0], worst[1], worst[2]
    ))
}

// 2. Equivalent cycles over one simulated year.

fn cycle_count() -> Outcome {
    let run = ok(sim::run(&scenario_days(365.0), 1))?;
    let cycles: Vec<f64> = run.summary.nodes.iter().map(|n| n.cycles_completed).collect();
    for (i, c) in cycles.iter().enumerate() {
        ensure!((c - 5840.0).abs() <= 16.0, "node {i}: {c:.2} cycles");
    }
    let mean = cycles.iter().sum::<f64>() / cycles.len() as f64;
    Ok(format!(
        "{} nodes, cycles {:?}, {:.2} per day",
        cycles.len(),
        cycles.iter().map(|c| (c * 100.0).round() / 100.0).collect::<Vec<_>>(),
        mean / 365.0
    ))
}

// 3. Per-node energy ledger over 30 days.

fn energy_conservation() -> Outcome {
    let run = ok(sim::run(&scenario_days(30.0), 1))?;
    let mut worst = 0.0f64;
    let mut logged = 0usize;
    for n in &run.nodes {
        let r = n.ledger.relative_residual();
        worst = worst.max(r);
        ensure!(r <= 1e-9, "node {}: ledger residual {r:e}", n.node_id);
        let mut by_kind: BTreeMap<ClampKind, f64> = BTreeMap::new();
        for c in &n.clamps {
            ensure!(c.amount_j >= 0.0, "node {}: negative clamp {c:?}", n.node_id);
            *by_kind.entry(c.kind).or_default() += c.amount_j;
        }
        logged += n.clamps.len();
        for (kind, ledger) in [
            (ClampKind::Ceiling, n.ledger.ceiling_spill_j),
            (ClampKind::Floor, n.ledger.floor_deficit_j),
            (ClampKind::CapacityFade, n.ledger.fade_spill_j),
        ] {
            let sum = by_kind.get(&kind).copied().unwrap_or(0.0);
            ensure!(
                (sum - ledger).abs() <= 1e-9 * ledger.abs().max(1.0),
                "node {}: {kind:?} clamps sum to {sum} J, ledger has {ledger} J",
                n.node_id
            );
        }
    }
    Ok(format!("worst relative residual {worst:.1e}, {logged} clamp events logged and reconciled"))
}

// 4. Sun fraction of the phase timeline.

fn sun_fraction() -> Outcome {
    let sc = ScenarioConfig::bundled_default();
    let want = 55.0 / 90.0;
    let sun = |cfg: &orbit::OrbitConfig, t0: f64, t1: f64| -> f64 {
        orbit::phase_timeline(cfg, t0, t1)
            .iter()
            .filter(|s| s.phase == Phase::Sun)
            .map(|s| s.end_s - s.start_s)
            .sum()
    };
    for k in 1..=200u32 {
        let h = f64::from(k) * sc.orbit.period_s;
        let f = sun(&sc.orbit, 0.0, h) / h;
        ensure!(f == want, "{k} orbits from the anchor: {f}");
    }
    let mut worst = 0.0f64;
    for i in 0..16 {
        let cfg = sc.orbit.for_node(i, 16);
        for k in [1u32, 7, 16, 160] {
            let t0 = 1234.5 * i as f64;
            let h = f64::from(k) * cfg.period_s;
            worst = worst.max(rel(sun(&cfg, t0, t0 + h) / h, want));
            worst = worst.max(rel(orbit::sun_seconds_in(&cfg, t0, t0 + h) / h, want));
        }
    }
    ensure!(worst <= 1e-12, "offset timelines deviate by {worst:e}");
    Ok(format!("exactly 55/90 over 1..200 orbits; offset starts within {worst:.1e}"))
}

// 5. Transmission safety and packet accounting on random scenarios.

fn random_scenario(rng: &mut ChaCha8Rng) -> ScenarioConfig {
    let mut sc = ScenarioConfig::bundled_default();
    sc.sim.duration_days = 1000.0 * sc.sim.slot_length_s / 86_400.0;
    sc.sim.node_count = rng.random_range(1..=6);
    sc.sim.seed = rng.random();
    sc.sim.traffic = Traffic::Poisson {
        mean_interval_s: rng.random_range(40.0..=900.0),
    };
    sc.orbit.phase_offset_rad = rng.random_range(0.0..std::f64::consts::TAU);
    sc.battery.initial_soc = rng.random_range(0.05..=1.0);
    sc.energy.harvest_power_w = Some(rng.random_range(50.0..=1500.0));
    sc.energy.sleep_power_w = Some(rng.random_range(20.0..=700.0));
    sc.energy.psi_min_fraction = rng.random_range(0.02..=0.3);
    sc.energy.e_critical_j = Some(rng.random_range(0.0..=1.2e6));
    sc.mac.beta = rng.random_range(0.05..=0.95);
    sc.mac.w_dif = rng.random_range(0.0..=2.0);
    sc.mac.w_energy = rng.random_range(0.01..=2.0);
    sc
}

fn algorithm_safety() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5AFE);
    let scenarios: Vec<ScenarioConfig> = (0..100).map(|_| random_scenario(&mut rng)).collect();
    let results: Vec<Result<(usize, usize, usize, u64), String>> = scenarios
        .par_iter()
        .map(|sc| {
            let run = ok(sim::run(sc, sc.sim.seed))?;
            let (mut sun, mut eclipse) = (0, 0);
            for n in &run.nodes {
                for tx in &n.transmissions {
                    match tx.phase {
                        Phase::Eclipse => {
                            eclipse += 1;
                            ensure!(
                                tx.phi_j > tx.psi_min_j && tx.estimate_j > tx.psi_min_j,
                                "eclipse transmission at or below the reserve: {tx:?}"
                            );
                        }
                        Phase::Sun => {
                            sun += 1;
                            ensure!(
                                tx.estimate_j >= tx.psi_min_j + tx.e_critical_j,
                                "sunlit transmission below reserve plus critical energy: {tx:?}"
                            );
                        }
                    }
                }
            }
            let s = &run.summary.packets;
            ensure!(run.packets.len() as u64 == s.generated, "packet list and totals disagree");
            ensure!(s.delivered + s.dropped() == s.generated, "accounting: {s:?}");
            ensure!(s.by_outcome.values().sum::<u64>() == s.generated, "outcome counts: {s:?}");
            let per_node: u64 = run.summary.nodes.iter().map(|n| n.packets.generated).sum();
            ensure!(per_node == s.generated, "per-node totals {per_node} vs {}", s.generated);
            for (i, p) in run.packets.iter().enumerate() {
                ensure!(p.id == i as u64, "packet ids not unique and dense");
            }
            Ok((sun, eclipse, run.packets.len(), s.dropped_energy))
        })
        .collect();
    let (mut sun, mut eclipse, mut packets, mut energy_drops) = (0, 0, 0, 0);
    for r in results {
        let (s, e, p, d) = r?;
        sun += s;
        eclipse += e;
        packets += p;
        energy_drops += d;
    }
    Ok(format!(
        "100 scenarios: {sun} sunlit and {eclipse} eclipse sequences safe; {packets} packets each ended once ({energy_drops} energy drops)"
    ))
}

// 6. EWMA convergence under constant consumption.

fn ewma_convergence() -> Outcome {
    // Against a zero target the deviation is the estimate itself, so the
    // relative bound applies at every step. Against a non-zero target the
    // deviation stops being representable a few ulps above the target.
    let mut worst_rel = 0.0f64;
    let mut worst_ulps = 0.0f64;
    for &beta in &[0.05, 0.1, 0.3, 0.5, 0.9] {
        for &(target, start) in &[(0.0, 1.0), (0.0, 19_200.0), (115.5, 19_315.5), (19_200.0, 0.0)] {
            let e0: f64 = start - target;
            let mut e: f64 = start;
            for t in 1..=100 {
                e = ok(energy::ewma_update(beta, target, e))?;
                let want = (1.0 - beta).powi(t) * e0.abs();
                let err = ((e - target).abs() - want).abs();
                if target == 0.0 {
                    worst_rel = worst_rel.max(err / want);
                    ensure!(err <= 1e-12 * want, "beta {beta}, t {t}: relative error {:e}", err / want);
                } else {
                    if err > 1e-12 * want {
                        let ulps = err / (f64::EPSILON * target);
                        worst_ulps = worst_ulps.max(ulps);
                        ensure!(ulps <= 4.0, "beta {beta}, target {target}, t {t}: error {err:e} on {want:e}");
                    }
                }
            }
        }
    }
    Ok(format!(
        "5 weights x 4 starts x 100 steps; relative error {worst_rel:.1e} against a zero target, otherwise 1e-12 relative until the floor, then within {worst_ulps:.1} ulp of the target"
    ))
}

// 7. Airtime against the Semtech formula and the sequence length.

#[allow(clippy::too_many_arguments)]
fn semtech(sf: u8, bw: u32, cr: u8, pl: u16, pre: u16, explicit: bool, crc: bool, ldro: bool) -> f64 {
    let sf_i = i64::from(sf);
    let num = 8 * i64::from(pl) - 4 * sf_i + 28 + if crc { 16 } else { 0 } - if explicit { 0 } else { 20 };
    let den = 4 * (sf_i - if ldro { 2 } else { 0 });
    let blocks = if num > 0 { (num + den - 1) / den } else { 0 };
    let n = 8 + blocks * i64::from(cr);
    let tsym = f64::from(1u32 << sf) / f64::from(bw);
    (f64::from(pre) + 4.25 + n as f64) * tsym
}

fn airtime() -> Outcome {
    let mut worst = 0.0f64;
    let mut points = 0;
    for sf in 7..=12u8 {
        for bw in [125_000u32, 250_000, 500_000] {
            for cr in 5..=8u8 {
                for pl in 1..=255u16 {
                    for (explicit, crc) in [(true, true), (false, false)] {
                        let mut r = RadioConfig::new(sf, bw, pl, 0.4);
                        r.coding_rate_denominator = cr;
                        r.explicit_header = explicit;
                        r.crc_on = crc;
                        let got = ok(radio::time_on_air(&r))?;
                        let want = semtech(sf, bw, cr, pl, r.preamble_symbols, explicit, crc, r.low_data_rate_optimize);
                        worst = worst.max(rel(got, want));
                        points += 1;
                    }
                }
            }
        }
    }
    ensure!(worst <= 0.005, "airtime off by {worst:e}");
    for (sf, bw, cr, pl, want) in [
        (7, 125_000, 5, 10, 0.041216),
        (10, 125_000, 5, 10, 0.288768),
        (12, 125_000, 8, 51, 3.547136),
        (9, 250_000, 6, 255, 0.741888),
        (12, 500_000, 5, 1, 0.206848),
        (11, 125_000, 7, 20, 0.905216),
    ] {
        let mut r = RadioConfig::new(sf, bw, pl, 0.4);
        r.coding_rate_denominator = cr;
        let got = ok(radio::time_on_air(&r))?;
        ensure!(rel(got, want) <= 1e-12, "SF{sf}/{bw}/4-{cr}/{pl} B: {got} vs {want}");
    }

    let sc = ScenarioConfig::bundled_default();
    let d = ok(sim::Derived::new(&sc))?;
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let runs = 10_000;
    let mut total = 0.0;
    for _ in 0..runs {
        let offsets = mac::sequence_offsets(sc.mac.max_attempts, d.airtime_s, d.mac.backoff_base_s, &mut rng);
        total += offsets.last().copied().unwrap_or(0.0) + d.airtime_s;
    }
    let mean = total / f64::from(runs);
    ensure!((mean - 40.0).abs() <= 4.0, "mean sequence {mean} s");
    Ok(format!(
        "{points} grid points within {worst:.1e}; SF10/10 B {:.6} s; 8-attempt mean {mean:.3} s over {runs} sequences",
        d.airtime_s
    ))
}

// 8. Pure-ALOHA success rate under Poisson load.

fn collision_sanity() -> Outcome {
    let airtime = 0.288768;
    let key = ChannelKey {
        receiver: 0,
        channel: 0,
        spreading_factor: 10,
    };
    let n = 100_000usize;
    let mut lines = Vec::new();
    for (i, g) in [0.1f64, 0.25, 0.5, 1.0].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + i as u64);
        let gaps = ok(Exp::new(g / airtime))?;
        let mut t = 0.0;
        let attempts: Vec<Attempt> = (0..n)
            .map(|_| {
                t += gaps.sample(&mut rng);
                Attempt {
                    start_s: t,
                    airtime_s: airtime,
                    key,
                }
            })
            .collect();
        let received = collision::resolve_collisions(&attempts);

        // the streaming monitor must agree with the batch sweep
        let mut monitor = CollisionMonitor::default();
        let mut ends: Vec<(f64, u64)> = Vec::new();
        let mut streamed = vec![false; n];
        for (id, a) in attempts.iter().enumerate() {
            ends.retain(|&(end, eid)| {
                if end <= a.start_s {
                    streamed[eid as usize] = monitor.finish(eid);
                    false
                } else {
                    true
                }
            });
            monitor.start(id as u64, a);
            ends.push((a.end_s(), id as u64));
        }
        for (_, eid) in ends {
            streamed[eid as usize] = monitor.finish(eid);
        }
        ensure!(streamed == received, "monitor and batch resolution disagree at G = {g}");

        let success = received.iter().filter(|r| **r).count() as f64 / n as f64;
        let want = (-2.0 * g).exp();
        let se = (want * (1.0 - want) / n as f64).sqrt();
        let z = (success - want) / se;
        ensure!(z.abs() <= 3.0, "G = {g}: success {success:.5} vs {want:.5} ({z:+.2} SE)");
        lines.push(format!("G={g} {success:.4}/{want:.4} ({z:+.2} SE)"));
    }
    Ok(lines.join(", "))
}

// 9. Gateway assessment against node-side evaluation.

fn gateway_agreement() -> Outcome {
    let sc = ScenarioConfig::bundled_default();
    let params = &sc.battery.degradation;
    let ctx = GatewayContext {
        c_rate: sc.battery.c_rate,
        dod_nominal: sc.battery.dod_nominal,
        sun_fraction: sc.orbit.sun_duration_s / sc.orbit.period_s,
    };
    let mut worst = 0.0f64;
    for trial in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + trial);
        let mut reports = Vec::new();
        for node in 0..rng.random_range(1..=8u16) {
            let mut start = rng.random_range(0..86_400u32);
            for _ in 0..rng.random_range(1..=10) {
                let len = rng.random_range(1..=21 * 5400u32);
                let obs = rng.random_range(0..=mac::MAX_DOD_OBSERVATIONS);
                let r = NodeBatteryReport {
                    node_id: node,
                    period_start_s: start,
                    period_end_s: start + len,
                    slot_count: rng.random(),
                    n_transmissions: rng.random(),
                    energy_consumed_j: rng.random_range(0.0..1e7),
                    dod_observations: (0..obs).map(|_| rng.random_range(0.0..=1.0)).collect(),
                    mean_soc: rng.random_range(0.0..=1.0),
                    mean_temperature_sun_k: rng.random_range(253.0..=313.0),
                    mean_temperature_eclipse_k: rng.random_range(253.0..=313.0),
                };
                // what the gateway receives is what went over the air
                reports.push(ok(NodeBatteryReport::decode(&ok(r.encode())?))?);
                start += len + rng.random_range(0..3600);
            }
        }
        let fleet = ok(gateway::gateway_compute_fleet_degradation(&reports, params, &ctx))?;
        let mut local: BTreeMap<u16, (f64, f64)> = BTreeMap::new();
        for r in &reports {
            let days = f64::from(r.period_end_s - r.period_start_s) / 86_400.0;
            let cal = ok(battery::calendar_aging(params, r.mean_temperature_sun_k, r.mean_soc, days * ctx.sun_fraction))?
                + ok(battery::calendar_aging(
                    params,
                    r.mean_temperature_eclipse_k,
                    r.mean_soc,
                    days * (1.0 - ctx.sun_fraction),
                ))?;
            let mut cyc = 0.0;
            for &dod in &r.dod_observations {
                let stress = ok(CycleStress::new(dod, ctx.c_rate, r.mean_temperature_eclipse_k))?;
                cyc += ok(battery::cycle_aging(params, &stress, dod / ctx.dod_nominal))?;
            }
            let e = local.entry(r.node_id).or_default();
            e.0 += cal;
            e.1 += cyc;
        }
        ensure!(fleet.len() == local.len(), "node sets differ");
        for (node, (cal, cyc)) in local {
            let a = &fleet[&node];
            let fade = ok(battery::sei_capacity_fade(params, cal + cyc))?;
            for (got, want) in [(a.d_calendar, cal), (a.d_cycle, cyc), (a.d_linear, cal + cyc), (a.fade_fraction, fade)] {
                let e = rel(got, want);
                worst = worst.max(e);
                ensure!(e <= 1e-12, "trial {trial}, node {node}: {got:e} vs {want:e}");
            }
        }
    }
    Ok(format!("50 random fleets, worst relative difference {worst:.1e}"))
}

// 10. Battery-aware cycle aging never exceeds the ALOHA baseline.

fn protocol_direction() -> Outcome {
    let seeds: Vec<u64> = (1..=20).collect();
    let jobs: Vec<(u64, Protocol)> = seeds
        .iter()
        .flat_map(|&s| [(s, Protocol::BatteryAware), (s, Protocol::Aloha)])
        .collect();
    let summaries: Vec<Result<metrics::RunSummary, String>> = jobs
        .par_iter()
        .map(|&(seed, protocol)| {
            let mut sc = ScenarioConfig::bundled_default();
            sc.mac.protocol = protocol;
            ok(sim::run(&sc, seed)).map(|r| r.summary)
        })
        .collect();
    let mut lines = Vec::new();
    let mut worse = Vec::new();
    for (pair, seed) in summaries.chunks(2).zip(&seeds) {
        let (ba, al) = (pair[0].clone()?, pair[1].clone()?);
        if ba.total_cycle_aging > al.total_cycle_aging {
            worse.push(*seed);
        }
        lines.push(format!(
            "      seed {seed:>2}: cycle aging {:.9e} vs {:.9e} ({:+.3e}), delivery {:.4} vs {:.4}",
            ba.total_cycle_aging,
            al.total_cycle_aging,
            ba.total_cycle_aging - al.total_cycle_aging,
            ba.delivery_ratio,
            al.delivery_ratio
        ));
    }
    let table = format!("battery-aware vs ALOHA on 20 seeds\n{}", lines.join("\n"));
    ensure!(worse.is_empty(), "battery-aware aged more on seeds {worse:?}: {table}");
    Ok(table)
}

// 11. Identical outputs for identical inputs.

fn determinism() -> Outcome {
    let tmp = ok(tempfile::tempdir())?;
    let mut produced = Vec::new();
    for format in ["csv", "json"] {
        for copy in 0..2 {
            let dir = tmp.path().join(format!("{format}-{copy}"));
            let args = [
                "leolora",
                "simulate",
                "--seed",
                "7",
                "--format",
                format,
                "--out",
                dir.to_str().ok_or("temporary path is not UTF-8")?,
            ];
            let (mut out, mut err) = (Vec::new(), Vec::new());
            let code = cli::run_cli(args, &mut out, &mut err);
            ensure!(code == 0, "simulate exited {code}: {}", String::from_utf8_lossy(&err));
            produced.push(dir);
        }
    }
    let mut bytes = 0;
    for pair in produced.chunks(2) {
        for entry in ok(std::fs::read_dir(&pair[0]))? {
            let name = ok(entry)?.file_name();
            let a = ok(std::fs::read(pair[0].join(&name)))?;
            let b = ok(std::fs::read(pair[1].join(&name)))?;
            ensure!(a == b, "{} differs between identical runs", name.to_string_lossy());
            bytes += a.len();
        }
    }
    Ok(format!("CSV and JSON outputs of two seed-7 runs byte-identical ({bytes} bytes per run pair)"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("degradation oracle", Duration::from_secs(1), degradation_oracle),
        ("cycle count over a year", Duration::from_secs(30), cycle_count),
        ("energy conservation", Duration::from_secs(30), energy_conservation),
        ("sun fraction", Duration::MAX, sun_fraction),
        ("transmission safety", Duration::MAX, algorithm_safety),
        ("EWMA convergence", Duration::MAX, ewma_convergence),
        ("airtime oracle", Duration::MAX, airtime),
        ("collision sanity", Duration::from_secs(60), collision_sanity),
        ("gateway agreement", Duration::MAX, gateway_agreement),
        ("protocol direction", Duration::from_secs(300), protocol_direction),
        ("determinism", Duration::MAX, determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = started.elapsed();
        let result = match result {
            Ok(_) if elapsed > *limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            r => r,
        };
        match result {
            Ok(detail) => println!("PASS criterion {:>2} {name} [{elapsed:.2?}]: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name} [{elapsed:.2?}]: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
