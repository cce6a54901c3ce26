//! Runs a small seeded sweep through the harness and writes CSVs and plots.
//!
//! cargo run --release --example sweep_and_plot -- [out dir]

use std::path::PathBuf;

use eigenopt::harness::{run_experiment, Algorithm, ExperimentConfig, Seeds};

fn main() -> eigenopt::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| PathBuf::from("results/example_sweep"), PathBuf::from);
    let mut cfg = ExperimentConfig::new("four_rooms");
    cfg.config_ids = vec!["A".into(), "C".into()];
    cfg.algorithms = vec![Algorithm::Qlearning, Algorithm::VaeoEigen, Algorithm::VaeoBottleneck];
    cfg.seeds = Seeds::Range { start: 0, end: 10 };
    cfg.n_episodes = 30;
    cfg.snapshot_episodes = vec![1, 10, 30];
    print!("{}", cfg.to_toml());

    let exp = run_experiment(&cfg, &out, None)?;
    for ((id, alg), runs) in &exp.runs {
        let auc = runs.iter().map(|r| r.area_under_curve()).sum::<f64>() / runs.len() as f64;
        println!("{id} {alg}: mean area {auc:.0}");
    }
    println!("results in {}", exp.out_dir.display());
    Ok(())
}
