//! Battery-aware MAC against immediate ALOHA on a handful of seeds.

use leolora::config::ScenarioConfig;
use leolora::error::Result;
use leolora::mac::Protocol;
use leolora::sim;
use rayon::prelude::*;

pub struct Comparison {
    pub seed: u64,
    pub aware_cycle_aging: f64,
    pub aloha_cycle_aging: f64,
    pub aware_delivery: f64,
    pub aloha_delivery: f64,
}

pub fn run_example() -> Result<Vec<Comparison>> {
    (1..=4u64)
        .into_par_iter()
        .map(|seed| {
            let run = |protocol| {
                let mut sc = ScenarioConfig::bundled_default();
                sc.sim.duration_days = 7.0;
                sc.mac.protocol = protocol;
                sim::run(&sc, seed).map(|r| r.summary)
            };
            let aware = run(Protocol::BatteryAware)?;
            let aloha = run(Protocol::Aloha)?;
            Ok(Comparison {
                seed,
                aware_cycle_aging: aware.total_cycle_aging,
                aloha_cycle_aging: aloha.total_cycle_aging,
                aware_delivery: aware.delivery_ratio,
                aloha_delivery: aloha.delivery_ratio,
            })
        })
        .collect()
}

fn main() -> Result<()> {
    println!("seed  cycle aging (aware / aloha)      delivery (aware / aloha)");
    for c in run_example()? {
        println!(
            "{:>4}  {:.9e} / {:.9e}  {:.4} / {:.4}",
            c.seed, c.aware_cycle_aging, c.aloha_cycle_aging, c.aware_delivery, c.aloha_delivery
        );
    }
    Ok(())
}
