//! Three days of the bundled scenario, summarised.

use leolora::config::ScenarioConfig;
use leolora::error::Result;
use leolora::sim::{self, metrics::RunSummary};

pub fn run_example() -> Result<RunSummary> {
    let mut sc = ScenarioConfig::bundled_default();
    sc.sim.duration_days = 3.0;
    Ok(sim::run(&sc, sc.sim.seed)?.summary)
}

fn main() -> Result<()> {
    let s = run_example()?;
    println!(
        "{} packets, delivery ratio {:.3}, {} attempts ({} collided)",
        s.packets.generated, s.delivery_ratio, s.attempts, s.attempts_collided
    );
    for n in &s.nodes {
        println!(
            "node {}: {:.2} cycles, fade {:.3e}, final SoC {:.3}, {} brownouts",
            n.node_id, n.cycles_completed, n.fade_fraction, n.final_soc, n.brownouts
        );
    }
    Ok(())
}
