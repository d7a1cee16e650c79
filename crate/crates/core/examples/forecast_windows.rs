//! One day of ground-station passes for the first satellite, tagged sun or eclipse.

use leolora::config::ScenarioConfig;
use leolora::error::Result;
use leolora::orbit::{self, Schedule};

pub fn run_example() -> Result<Schedule> {
    let sc = ScenarioConfig::bundled_default();
    let cfg = sc.orbit.for_node(0, sc.sim.node_count);
    orbit::build_schedule(&cfg, &sc.stations, 86_400.0, sc.sim.visibility_step_s)
}

fn main() -> Result<()> {
    let schedule = run_example()?;
    for w in schedule.windows() {
        println!(
            "#{:<3} {:<15} {:>8.0} s  {:>5.0} s  {}",
            w.window_id,
            w.target,
            w.start_s,
            w.duration(),
            w.phase.as_str()
        );
    }
    println!(
        "{} windows, {} sunlit, {} in eclipse",
        schedule.len(),
        schedule.sun().count(),
        schedule.eclipse().count()
    );
    Ok(())
}
