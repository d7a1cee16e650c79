//! Gateway-side fleet degradation from uploaded battery summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::battery::{self, CycleStress, DegradationParams};
use crate::error::{Error, Result};
use crate::mac::NodeBatteryReport;

/// Fleet-wide constants the gateway knows without being told.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatewayContext {
    pub c_rate: f64,
    pub dod_nominal: f64,
    /// Share of each orbit spent in sunlight.
    pub sun_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeAssessment {
    pub node_id: u16,
    pub reports: usize,
    pub days: f64,
    pub cycles: f64,
    pub d_calendar: f64,
    pub d_cycle: f64,
    pub d_linear: f64,
    pub fade_fraction: f64,
}

/// Calendar and cycle degradation implied by one report. Calendar time is
/// split between the phases by `sun_fraction`; every reported discharge ages
/// at the eclipse temperature and counts `dod / dod_nominal` cycles.
pub fn assess_report(
    report: &NodeBatteryReport,
    params: &DegradationParams,
    ctx: &GatewayContext,
) -> Result<(f64, f64)> {
    let days = f64::from(report.period_end_s - report.period_start_s) / 86_400.0;
    let soc = report.mean_soc;
    let calendar = battery::calendar_aging(params, report.mean_temperature_sun_k, soc, days * ctx.sun_fraction)?
        + battery::calendar_aging(
            params,
            report.mean_temperature_eclipse_k,
            soc,
            days * (1.0 - ctx.sun_fraction),
        )?;
    let mut cycle = 0.0;
    for &dod in &report.dod_observations {
        let stress = CycleStress::new(dod, ctx.c_rate, report.mean_temperature_eclipse_k)?;
        cycle += battery::cycle_aging(params, &stress, dod / ctx.dod_nominal)?;
    }
    Ok((calendar, cycle))
}

/// Accumulates every node's reports into a degradation estimate.
pub fn gateway_compute_fleet_degradation(
    reports: &[NodeBatteryReport],
    params: &DegradationParams,
    ctx: &GatewayContext,
) -> Result<BTreeMap<u16, NodeAssessment>> {
    if !(ctx.dod_nominal > 0.0) || !(0.0..=1.0).contains(&ctx.sun_fraction) {
        return Err(Error::config("gateway needs dod_nominal > 0 and a sun fraction in [0, 1]"));
    }
    let mut by_node: BTreeMap<u16, Vec<&NodeBatteryReport>> = BTreeMap::new();
    for r in reports {
        if r.period_start_s >= r.period_end_s {
            return Err(Error::Report(format!(
                "node {}: empty period [{}, {})",
                r.node_id, r.period_start_s, r.period_end_s
            )));
        }
        by_node.entry(r.node_id).or_default().push(r);
    }

    let mut out = BTreeMap::new();
    for (node, mut list) in by_node {
        list.sort_by_key(|r| (r.period_start_s, r.period_end_s));
        for pair in list.windows(2) {
            if pair[1].period_start_s < pair[0].period_end_s {
                return Err(Error::Report(format!(
                    "node {node}: period [{}, {}) overlaps [{}, {})",
                    pair[1].period_start_s, pair[1].period_end_s, pair[0].period_start_s, pair[0].period_end_s
                )));
            }
        }
        let mut a = NodeAssessment {
            node_id: node,
            reports: list.len(),
            days: 0.0,
            cycles: 0.0,
            d_calendar: 0.0,
            d_cycle: 0.0,
            d_linear: 0.0,
            fade_fraction: 0.0,
        };
        for r in list {
            let (cal, cyc) = assess_report(r, params, ctx)?;
            a.d_calendar += cal;
            a.d_cycle += cyc;
            a.days += f64::from(r.period_end_s - r.period_start_s) / 86_400.0;
            a.cycles += r.dod_observations.iter().map(|d| d / ctx.dod_nominal).sum::<f64>();
        }
        a.d_linear = battery::linear_degradation(a.d_calendar, a.d_cycle);
        a.fade_fraction = battery::sei_capacity_fade(params, a.d_linear)?;
        out.insert(node, a);
    }
    Ok(out)
}
