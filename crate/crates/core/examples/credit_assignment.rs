//! Trains on primitive actions only and evaluates greedily with options
//! after every episode, for eigen and bottleneck option sets.
//!
//! cargo run --release --example credit_assignment -- [config id]

use eigenopt::agents::{run_credit_assignment_protocol, AgentConfig, RunSettings};
use eigenopt::gridworld::{build_layout, canonical_task};
use eigenopt::harness::eigenoptions_for;
use eigenopt::options::{build_bottleneck_options, OptionLearnConfig};

fn main() -> eigenopt::Result<()> {
    let id = std::env::args().nth(1).unwrap_or_else(|| "A".into());
    let layout = build_layout("four_rooms")?;
    let task = canonical_task(&layout, &id)?;
    let eigen = eigenoptions_for(&layout, 6, &OptionLearnConfig::default(), 0)?.options;
    let bottleneck = build_bottleneck_options(&layout)?;
    let settings = RunSettings { n_episodes: 20, ..Default::default() };

    for (name, options) in [("eigen", &eigen), ("bottleneck", &bottleneck)] {
        let runs: Vec<_> = (0..50)
            .map(|seed| run_credit_assignment_protocol(&layout, &task, options, &AgentConfig::default(), &settings, seed))
            .collect();
        let mean: Vec<String> = (0..settings.n_episodes)
            .map(|e| format!("{:.0}", runs.iter().map(|r| r.steps_to_goal[e] as f64).sum::<f64>() / runs.len() as f64))
            .collect();
        println!("{name:>10}: {}", mean.join(" "));
    }
    Ok(())
}
