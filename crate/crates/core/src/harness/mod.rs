//! Experiment configs, seeded sweeps, result directories and plots.

mod commands;
mod config;
pub mod plot;
mod store;

pub use commands::{
    cmd_inspect_options, cmd_plot, cmd_run, default_out_dir, inspect_options, run_cell, run_experiment, typical_run,
    CellKey, Experiment, RunOptions,
};
pub use config::{Algorithm, ExperimentConfig, Seeds, TaskOverride};
pub use store::{write_atomic, ResultStore, RNG_IDENTITY};

use crate::error::Result;
use crate::gridworld::{transition_matrix, uniform_policy, GridLayout};
use crate::options::{build_eigenoptions, OptionDef, OptionLearnConfig};
use crate::representation::{sr_closed_form, top_eigenvectors, Eigenpair, SRLearnerConfig};

/// Eigenoptions of a layout together with the eigenpairs they came from.
#[derive(Debug, Clone)]
pub struct EigenOptionSet {
    pub pairs: Vec<Eigenpair>,
    pub options: Vec<OptionDef>,
    /// `(rank, reason)` for every eigenvector that produced no option.
    pub rejected: Vec<(usize, String)>,
}

impl EigenOptionSet {
    /// Eigenpair an option was built from.
    pub fn pair_of(&self, option: &OptionDef) -> Option<&Eigenpair> {
        match option.kind() {
            crate::options::OptionKind::Eigen { rank } => self.pairs.iter().find(|p| p.rank == rank),
            _ => None,
        }
    }
}

/// Closed-form SR of the uniform random walk, its top `n` eigenvectors and
/// one option per eigenvector.
pub fn eigenoptions_for(layout: &GridLayout, n: usize, cfg: &OptionLearnConfig, seed: u64) -> Result<EigenOptionSet> {
    let p = transition_matrix(layout, &uniform_policy(layout))?;
    let psi = sr_closed_form(&p, SRLearnerConfig::default().gamma)?;
    let pairs = top_eigenvectors(&psi, n)?;
    let (options, rejected) = build_eigenoptions(layout, &pairs, cfg, seed);
    Ok(EigenOptionSet { pairs, options, rejected })
}
