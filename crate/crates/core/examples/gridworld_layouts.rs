//! Prints the built-in layouts with their doorways and a canonical task.
//!
//! cargo run --example gridworld_layouts

use eigenopt::gridworld::{build_layout, canonical_task, LAYOUT_NAMES};

fn main() -> eigenopt::Result<()> {
    for name in LAYOUT_NAMES {
        let layout = build_layout(name)?;
        let task = canonical_task(&layout, "A")?;
        println!("{name}: {}x{}, {} open cells", layout.width(), layout.height(), layout.num_states());
        print!("{}", layout.to_text_map(Some(task.start), Some(task.goal)));
        let doors: Vec<String> = layout.doorways().iter().map(|&d| format!("{:?}", layout.position(d))).collect();
        println!("doorways: {}\n", doors.join(" "));
    }
    Ok(())
}
