//! Online option discovery in nine rooms: CEO against VACE, with the
//! positive-value states of one run after 20 episodes.
//!
//! cargo run --release --example vace_nine_rooms

use eigenopt::agents::{run_vace, AgentConfig, RunSettings, VaceConfig};
use eigenopt::gridworld::{build_layout, canonical_task};

fn main() -> eigenopt::Result<()> {
    let layout = build_layout("nine_rooms")?;
    let task = canonical_task(&layout, "A")?;
    let settings = RunSettings { snapshot_episodes: vec![20], ..Default::default() };
    for (name, learn) in [("ceo", false), ("vace", true)] {
        let vcfg = VaceConfig { learn_option_values: learn, ..Default::default() };
        let run = run_vace(&layout, &task, &AgentConfig::default(), &vcfg, &settings, 0);
        let snap = run.snapshot_at(20).expect("snapshot requested");
        println!(
            "{name}: {} options discovered, {} positive-value states at episode 20, {} steps in the last episode",
            run.discoveries.iter().filter(|d| d.option_id.is_some()).count(),
            snap.positive_count(),
            run.steps_to_goal.last().unwrap()
        );
        for r in 0..layout.height() {
            let row: String = (0..layout.width())
                .map(|c| match layout.state_at(r, c) {
                    None => '#',
                    Some(s) if snap.positive_value[s.index()] => '+',
                    Some(_) => '.',
                })
                .collect();
            println!("{row}");
        }
    }
    Ok(())
}
