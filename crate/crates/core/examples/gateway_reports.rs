//! Battery summaries sent over the air and the gateway's fleet estimate.

use leolora::config::ScenarioConfig;
use leolora::error::Result;
use leolora::sim;

pub struct NodeView {
    pub node_id: u16,
    pub reports: usize,
    pub largest_report_bytes: usize,
    pub node_fade: f64,
    pub gateway_fade: f64,
}

pub fn run_example() -> Result<Vec<NodeView>> {
    let mut sc = ScenarioConfig::bundled_default();
    sc.sim.duration_days = 10.0;
    let run = sim::run(&sc, 5)?;
    let mut out = Vec::new();
    for (node, gw) in run.summary.nodes.iter().zip(&run.summary.gateway) {
        let mine: Vec<_> = run.reports.iter().filter(|r| r.node_id == node.node_id).collect();
        let mut largest = 0;
        for r in &mine {
            largest = largest.max(r.encode()?.len());
        }
        out.push(NodeView {
            node_id: node.node_id,
            reports: mine.len(),
            largest_report_bytes: largest,
            node_fade: node.fade_fraction,
            gateway_fade: gw.fade_fraction,
        });
    }
    Ok(out)
}

fn main() -> Result<()> {
    for v in run_example()? {
        println!(
            "node {}: {} reports (at most {} bytes), fade on board {:.6e}, at the gateway {:.6e}",
            v.node_id, v.reports, v.largest_report_bytes, v.node_fade, v.gateway_fade
        );
    }
    Ok(())
}
