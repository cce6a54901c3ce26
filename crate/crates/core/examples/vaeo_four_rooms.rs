//! Plain Q-learning, eigenoptions used only for exploration, and
//! value-aware eigenoptions on one four-rooms task.
//!
//! cargo run --release --example vaeo_four_rooms -- [config id] [seeds]

use eigenopt::agents::{run_eo_exploration, run_qlearning, run_vaeo, AgentConfig, RunSettings};
use eigenopt::evaluation::{aggregate_median, RunResult};
use eigenopt::gridworld::{build_layout, canonical_task};
use eigenopt::harness::eigenoptions_for;
use eigenopt::options::OptionLearnConfig;

fn main() -> eigenopt::Result<()> {
    let mut args = std::env::args().skip(1);
    let id = args.next().unwrap_or_else(|| "A".into());
    let n_seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);

    let layout = build_layout("four_rooms")?;
    let task = canonical_task(&layout, &id)?;
    let options = eigenoptions_for(&layout, 6, &OptionLearnConfig::default(), 0)?.options;
    let cfg = AgentConfig::default();
    let settings = RunSettings::default();

    let report = |name: &str, runs: Vec<RunResult>| -> eigenopt::Result<()> {
        let auc = runs.iter().map(RunResult::area_under_curve).sum::<f64>() / runs.len() as f64;
        let median = aggregate_median(&runs, 0.99)?;
        println!("{name:>10}: mean area {auc:>9.0}, median steps in the last episode {:.0}", median.stat[median.len() - 1]);
        Ok(())
    };
    let seeds = 0..n_seeds;
    report("qlearning", seeds.clone().map(|s| run_qlearning(&layout, &task, &cfg, &settings, s)).collect())?;
    report("eo", seeds.clone().map(|s| run_eo_exploration(&layout, &task, &options, &cfg, &settings, s)).collect())?;
    report("vaeo", seeds.map(|s| run_vaeo(&layout, &task, &options, &cfg, &settings, s)).collect())?;
    Ok(())
}
