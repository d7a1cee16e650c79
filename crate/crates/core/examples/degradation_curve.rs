//! Capacity fade of an idle battery cycling once per orbit, over five years.

use leolora::battery::BatteryState;
use leolora::config::ScenarioConfig;
use leolora::error::Result;
use leolora::sim::aging::{self, AgingContext, CurvePoint};

pub fn run_example() -> Result<Vec<CurvePoint>> {
    let sc = ScenarioConfig::bundled_default();
    let b = &sc.battery;
    let soc = 0.825;
    let ctx = AgingContext {
        params: &b.degradation,
        thermal: &b.thermal,
        c_rate: b.c_rate,
        dod_nominal: b.dod_nominal,
    };
    let start = BatteryState::new(b.capacity_ah, b.voltage_nominal_v, soc)?;
    aging::degradation_curve(&start, &ctx, &sc.orbit, soc, 5.0, 91.25)
}

fn main() -> Result<()> {
    println!("{:>8} {:>14} {:>12}", "day", "D_L", "fade %");
    for p in run_example()? {
        println!("{:>8.2} {:>14.6e} {:>12.5}", p.day, p.d_linear, 100.0 * p.fade_fraction);
    }
    Ok(())
}
