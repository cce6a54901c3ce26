//! Builds the four-rooms eigenoptions and bottleneck options and prints
//! their policies as arrow maps.
//!
//! cargo run --release --example eigenoptions

use eigenopt::gridworld::build_layout;
use eigenopt::harness::eigenoptions_for;
use eigenopt::options::{build_bottleneck_options, OptionLearnConfig};

fn main() -> eigenopt::Result<()> {
    let layout = build_layout("four_rooms")?;
    let set = eigenoptions_for(&layout, 6, &OptionLearnConfig::default(), 0)?;
    for (rank, why) in &set.rejected {
        println!("rank {rank} rejected: {why}");
    }
    for o in &set.options {
        let value = set.pair_of(o).map_or(f64::NAN, |p| p.value);
        println!("eigenvalue {value:.4}");
        println!("{}", o.to_text(&layout));
    }
    let bottleneck = build_bottleneck_options(&layout)?;
    println!("{} bottleneck options; the first:", bottleneck.len());
    println!("{}", bottleneck[0].to_text(&layout));
    Ok(())
}
