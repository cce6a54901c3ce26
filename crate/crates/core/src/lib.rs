//! Eigenoptions from the successor representation, with option values
//! learned alongside primitive action values.
//!
//! The crate is organized bottom-up:
//!
//! - [`gridworld`]: deterministic tabular layouts (four rooms, nine rooms)
//! - [`representation`]: successor representation, closed form and TD, and
//!   its eigenvectors
//! - [`options`]: eigenoptions and bottleneck options
//! - [`agents`]: Q-learning, VAEO, EO exploration, the credit-assignment
//!   protocol, VACE and CEO
//! - [`evaluation`]: per-run results, confidence bands, snapshots
//! - [`harness`]: experiment configs, sweeps, result directories and plots

pub mod agents;
pub mod error;
pub mod evaluation;
pub mod gridworld;
pub mod harness;
pub mod linalg;
pub mod options;
pub mod representation;

pub use error::{Error, Result};
