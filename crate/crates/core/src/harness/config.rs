use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, RunSettings, VaceConfig};
use crate::error::{Error, Result};
use crate::gridworld::{build_layout, canonical_task, task_at, GridLayout, TaskSpec, LAYOUT_NAMES};
use crate::options::OptionLearnConfig;

/// Learners a config can ask for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Qlearning,
    Eo,
    VaeoEigen,
    VaeoBottleneck,
    Ceo,
    Vace,
    CreditProtocolEigen,
    CreditProtocolBottleneck,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Qlearning,
        Algorithm::Eo,
        Algorithm::VaeoEigen,
        Algorithm::VaeoBottleneck,
        Algorithm::Ceo,
        Algorithm::Vace,
        Algorithm::CreditProtocolEigen,
        Algorithm::CreditProtocolBottleneck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Qlearning => "qlearning",
            Algorithm::Eo => "eo",
            Algorithm::VaeoEigen => "vaeo_eigen",
            Algorithm::VaeoBottleneck => "vaeo_bottleneck",
            Algorithm::Ceo => "ceo",
            Algorithm::Vace => "vace",
            Algorithm::CreditProtocolEigen => "credit_protocol_eigen",
            Algorithm::CreditProtocolBottleneck => "credit_protocol_bottleneck",
        }
    }

    pub fn uses_eigenoptions(self) -> bool {
        matches!(self, Algorithm::Eo | Algorithm::VaeoEigen | Algorithm::CreditProtocolEigen)
    }

    pub fn uses_bottleneck_options(self) -> bool {
        matches!(self, Algorithm::VaeoBottleneck | Algorithm::CreditProtocolBottleneck)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }
}

/// Seeds as an explicit list or a half-open range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range { start: u64, end: u64 },
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Range { start, end } => (*start..*end).collect(),
        }
    }
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Range { start: 0, end: 100 }
    }
}

impl FromStr for Seeds {
    type Err = Error;

    /// `"0..100"` or `"1,2,7"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("seeds: cannot parse '{s}' (expected 'a..b' or 'a,b,c')"));
        if let Some((a, b)) = s.split_once("..") {
            let start = a.trim().parse().map_err(|_| bad())?;
            let end = b.trim().parse().map_err(|_| bad())?;
            return Ok(Seeds::Range { start, end });
        }
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<Vec<u64>>>().map(Seeds::List)
    }
}

/// Custom start/goal cells, as `[row, col]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskOverride {
    pub start: [usize; 2],
    pub goal: [usize; 2],
}

fn default_config_ids() -> Vec<String> {
    vec!["A".into()]
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Qlearning, Algorithm::Eo, Algorithm::VaeoEigen]
}

fn default_episodes() -> usize {
    RunSettings::default().n_episodes
}

fn default_cap() -> usize {
    RunSettings::default().episode_cap
}

fn default_snapshots() -> Vec<usize> {
    RunSettings::default().snapshot_episodes
}

fn default_confidence() -> f64 {
    0.99
}

/// One experiment: a layout, some start/goal configurations, some
/// algorithms, some seeds. Everything except `env` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `four_rooms` or `nine_rooms`.
    pub env: String,
    #[serde(default = "default_config_ids")]
    pub config_ids: Vec<String>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    /// Defaults to 6 in four rooms and 24 in nine rooms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_eigenoptions: Option<usize>,
    #[serde(default = "default_episodes")]
    pub n_episodes: usize,
    #[serde(default)]
    pub seeds: Seeds,
    /// Seed for eigenoption policy learning, shared by all runs.
    #[serde(default)]
    pub option_seed: u64,
    #[serde(default = "default_cap")]
    pub episode_cap: usize,
    #[serde(default = "default_snapshots")]
    pub snapshot_episodes: Vec<usize>,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub vace: VaceConfig,
    #[serde(default)]
    pub option_learning: OptionLearnConfig,
    /// Start/goal overrides, keyed by config id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tasks: BTreeMap<String, TaskOverride>,
}

impl ExperimentConfig {
    /// Defaults for `env`.
    pub fn new(env: &str) -> Self {
        toml::from_str(&format!("env = {env:?}")).expect("minimal config parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field and names the first offending one.
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, msg: String| Err(Error::Config(format!("field `{name}`: {msg}")));
        if !LAYOUT_NAMES.contains(&self.env.as_str()) {
            return field("env", format!("unknown layout '{}' (expected one of {:?})", self.env, LAYOUT_NAMES));
        }
        if self.config_ids.is_empty() {
            return field("config_ids", "must not be empty".into());
        }
        let layout = self.layout()?;
        for id in &self.config_ids {
            if let Err(e) = self.task(&layout, id) {
                return field("config_ids", e.to_string());
            }
        }
        if self.algorithms.is_empty() {
            return field("algorithms", "must not be empty".into());
        }
        if self.n_eigenoptions == Some(0) {
            return field("n_eigenoptions", "must be positive".into());
        }
        if self.n_eigenoptions.is_some_and(|n| n > layout.num_states()) {
            return field("n_eigenoptions", format!("exceeds the {} states of the layout", layout.num_states()));
        }
        if self.n_episodes == 0 {
            return field("n_episodes", "must be positive".into());
        }
        let seeds = self.seeds.to_vec();
        if seeds.is_empty() {
            return field("seeds", "no seeds selected".into());
        }
        if self.episode_cap == 0 {
            return field("episode_cap", "must be positive".into());
        }
        if let Some(&e) = self.snapshot_episodes.iter().find(|&&e| e == 0) {
            return field("snapshot_episodes", format!("episode {e} is not 1-based"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return field("confidence", format!("{} is not in (0, 1)", self.confidence));
        }
        let sub = |name: &str, r: Result<()>| match r {
            Err(Error::Config(msg)) => field(name, msg),
            other => other,
        };
        sub("agent", self.agent.validate())?;
        sub("vace", self.vace.validate())?;
        let o = &self.option_learning;
        if !(0.0..1.0).contains(&o.gamma) {
            return field("option_learning.gamma", format!("{} is not in [0, 1)", o.gamma));
        }
        if !(o.alpha > 0.0 && o.alpha <= 1.0) {
            return field("option_learning.alpha", format!("{} is not in (0, 1]", o.alpha));
        }
        if o.n_episodes == 0 || o.episode_len == 0 {
            return field("option_learning", "n_episodes and episode_len must be positive".into());
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<GridLayout> {
        build_layout(&self.env)
    }

    /// Start/goal for `id`: an override from `tasks` if present, otherwise
    /// the canonical configuration.
    pub fn task(&self, layout: &GridLayout, id: &str) -> Result<TaskSpec> {
        match self.tasks.get(id) {
            Some(t) => task_at(layout, id, (t.start[0], t.start[1]), (t.goal[0], t.goal[1])),
            None => canonical_task(layout, id),
        }
    }

    pub fn eigenoption_count(&self) -> usize {
        self.n_eigenoptions.unwrap_or(if self.env == "nine_rooms" { 24 } else { 6 })
    }

    pub fn run_settings(&self) -> RunSettings {
        RunSettings {
            n_episodes: self.n_episodes,
            episode_cap: self.episode_cap,
            snapshot_episodes: self.snapshot_episodes.clone(),
        }
    }

    /// Settings for VACE or CEO.
    pub fn vace_for(&self, algorithm: Algorithm) -> VaceConfig {
        VaceConfig { learn_option_values: algorithm == Algorithm::Vace, ..self.vace }
    }
}
