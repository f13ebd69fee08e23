//! Benchmark fixtures.

use manetsim::ScenarioConfig;

/// A scenario of `nodes` nodes on a square sized for roughly constant density.
pub fn dense_scenario(nodes: usize, sim_secs: u32) -> ScenarioConfig {
    let side = (nodes as f64 / 30.0).sqrt() * 1500.0;
    let text = format!(
        "terrain={side:.0}x{side:.0}\nnode_count={nodes}\nsim_time={sim_secs}\n\
         flow.0.src=1\nflow.0.dst={nodes}\nflow.0.start=5\nflow.0.end={end}\n",
        end = sim_secs - 1
    );
    ScenarioConfig::parse(&text).expect("bench scenario is valid")
}
