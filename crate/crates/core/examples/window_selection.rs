//! How the battery-aware MAC ranks the same three windows at different charge levels.

use leolora::config::ScenarioConfig;
use leolora::energy::NodeEnergyState;
use leolora::error::Result;
use leolora::mac::{self, Candidate, SelectionEnv, TxDecision};
use leolora::orbit::{ForecastWindow, Phase, Schedule};
use leolora::sim::Derived;

pub fn run_example() -> Result<Vec<(f64, TxDecision)>> {
    let sc = ScenarioConfig::bundled_default();
    let d = Derived::new(&sc)?;
    let window = |start_s: f64, phase: Phase, target: &str| ForecastWindow {
        window_id: 0,
        start_s,
        end_s: start_s + 480.0,
        phase,
        target: target.into(),
    };
    let schedule = Schedule::new(vec![
        window(600.0, Phase::Eclipse, "perth"),
        window(2400.0, Phase::Sun, "santiago"),
        window(4200.0, Phase::Sun, "wallops"),
    ])?;
    let candidates = Candidate::all(&schedule);
    let profile = d.profile();
    let env = SelectionEnv {
        harvest: &d.harvest,
        profile: &profile,
        mac: &d.mac,
        degradation: &sc.battery.degradation,
        thermal: &sc.battery.thermal,
        c_rate: sc.battery.c_rate,
        slot_len_s: d.slot_len_s,
    };
    [0.95, 0.7, 0.45, 0.15]
        .into_iter()
        .map(|soc| {
            let energy = NodeEnergyState::new(
                soc * d.rated_energy_j,
                d.rated_energy_j,
                d.psi_min_j,
                d.e_critical_j,
                profile.e_cons_tx_j,
            )?;
            let sel = mac::select_forecast_window(&schedule, &candidates, &energy, &env)?;
            Ok((soc, sel.decision))
        })
        .collect()
}

fn main() -> Result<()> {
    for (soc, decision) in run_example()? {
        println!("SoC {:>3.0}%: {decision:?}", 100.0 * soc);
    }
    Ok(())
}
