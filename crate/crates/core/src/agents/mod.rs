//! Value learners over primitive actions and options.
//!
//! Columns `0..4` of a [`QTable`] hold primitive action values; column
//! `4 + k` holds the value of the `k`-th option of the option set the table
//! was built for.

mod runners;
mod vace;

pub use runners::{
    run_credit_assignment_protocol, run_eo_exploration, run_qlearning, run_vaeo, RunSettings,
};
pub use vace::{discover_option, run_vace, Discovery};

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::{Action, State, Transition};
use crate::options::OptionDef;

/// Number of primitive action columns.
pub const N_ACTIONS: usize = Action::COUNT;

/// Column index of option `k`.
#[inline]
pub fn option_column(k: usize) -> usize {
    N_ACTIONS + k
}

/// Joint action/option value table, initialised to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    width: usize,
    values: Vec<f64>,
    option_ids: Vec<usize>,
}

impl QTable {
    pub fn new(n_states: usize) -> Self {
        QTable { n_states, width: N_ACTIONS, values: vec![0.0; n_states * N_ACTIONS], option_ids: Vec::new() }
    }

    /// Table with one extra column per option, in order.
    pub fn with_options(n_states: usize, options: &[OptionDef]) -> Self {
        let mut q = Self::new(n_states);
        for o in options {
            q.add_option_column(o.id());
        }
        q
    }

    /// Appends a zero column for a newly added option.
    pub fn add_option_column(&mut self, option_id: usize) {
        let w = self.width;
        let mut values = Vec::with_capacity(self.n_states * (w + 1));
        for row in self.values.chunks(w) {
            values.extend_from_slice(row);
            values.push(0.0);
        }
        self.values = values;
        self.width += 1;
        self.option_ids.push(option_id);
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_options(&self) -> usize {
        self.width - N_ACTIONS
    }

    /// Ids of the options behind columns `4..`.
    pub fn option_ids(&self) -> &[usize] {
        &self.option_ids
    }

    #[inline]
    pub fn get(&self, s: State, col: usize) -> f64 {
        self.values[s.index() * self.width + col]
    }

    #[inline]
    pub fn get_mut(&mut self, s: State, col: usize) -> &mut f64 {
        &mut self.values[s.index() * self.width + col]
    }

    pub fn row(&self, s: State) -> &[f64] {
        &self.values[s.index() * self.width..(s.index() + 1) * self.width]
    }

    /// Largest value among `cols` in row `s`.
    #[inline]
    pub fn max_over(&self, s: State, cols: &[usize]) -> f64 {
        let row = self.row(s);
        cols.iter().map(|&c| row[c]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest entry of row `s` across all columns.
    pub fn max_row(&self, s: State) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// FNV-1a hash over the bit patterns of every entry.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for v in &self.values {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }

    /// True if every entry matches `other` bit for bit.
    pub fn bit_identical(&self, other: &QTable) -> bool {
        self.width == other.width
            && self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// CSV with a header row (`state,a0..a3,o<id>...`) and one row per
    /// state. Values use 17 significant digits, so parsing is exact.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state");
        for a in 0..N_ACTIONS {
            let _ = write!(out, ",a{a}");
        }
        for id in &self.option_ids {
            let _ = write!(out, ",o{id}");
        }
        out.push('\n');
        for s in 0..self.n_states {
            let _ = write!(out, "{s}");
            for v in self.row(State(s)) {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty Q-table CSV".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 1 + N_ACTIONS || cols[0] != "state" {
            return Err(Error::Parse(format!("bad Q-table header '{header}'")));
        }
        let option_ids = cols[1 + N_ACTIONS..]
            .iter()
            .map(|c| c.strip_prefix('o').and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse(format!("bad column '{c}'"))))
            .collect::<Result<Vec<usize>>>()?;
        let width = cols.len() - 1;
        let mut values = Vec::new();
        let mut n_states = 0;
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != width + 1 || fields[0].parse::<usize>().ok() != Some(i) {
                return Err(Error::Parse(format!("bad Q-table row {i}")));
            }
            for f in &fields[1..] {
                values.push(f.parse::<f64>().map_err(|e| Error::Parse(format!("row {i}: {e}")))?);
            }
            n_states += 1;
        }
        Ok(QTable { n_states, width, values, option_ids })
    }
}

/// Learner hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub epsilon: f64,
    pub gamma: f64,
    pub alpha: f64,
    /// Discount used for option-value updates.
    pub gamma_o: f64,
    /// Step size used for option-value updates.
    pub alpha_o: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig { epsilon: 0.05, gamma: 0.99, alpha: 0.1, gamma_o: 0.99, alpha_o: 0.1 }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64, lo_open: bool| {
            let ok = if lo_open { v > 0.0 && v <= 1.0 } else { (0.0..=1.0).contains(&v) };
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} is out of range")))
            }
        };
        unit("epsilon", self.epsilon, false)?;
        unit("alpha", self.alpha, true)?;
        unit("alpha_o", self.alpha_o, true)?;
        for (name, g) in [("gamma", self.gamma), ("gamma_o", self.gamma_o)] {
            if !(0.0..1.0).contains(&g) {
                return Err(Error::Config(format!("{name} = {g} is out of range")));
            }
        }
        Ok(())
    }
}

/// Online discovery settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaceConfig {
    /// Transitions collected between discoveries.
    pub n_steps: usize,
    /// Sweeps over the collected window for both the SR and the option policy.
    pub n_sweeps: usize,
    /// Maximum number of discovery rounds.
    pub n_iter: usize,
    pub sr_eta: f64,
    pub sr_gamma: f64,
    /// Discount of the option-policy Q-learning.
    pub option_gamma: f64,
    /// Step size of the option-policy Q-learning.
    pub option_alpha: f64,
    /// True for VACE, false for CEO.
    pub learn_option_values: bool,
}

impl Default for VaceConfig {
    fn default() -> Self {
        VaceConfig {
            n_steps: 1000,
            n_sweeps: 100,
            n_iter: 1000,
            sr_eta: 0.1,
            sr_gamma: 0.99,
            option_gamma: 0.9,
            option_alpha: 0.1,
            learn_option_values: true,
        }
    }
}

impl VaceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 || self.n_sweeps == 0 || self.n_iter == 0 {
            return Err(Error::Config("n_steps, n_sweeps and n_iter must be positive".into()));
        }
        if !(self.sr_eta > 0.0 && self.sr_eta <= 1.0) || !(self.option_alpha > 0.0 && self.option_alpha <= 1.0) {
            return Err(Error::Config("step sizes must lie in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.sr_gamma) || !(0.0..1.0).contains(&self.option_gamma) {
            return Err(Error::Config("discounts must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Fills `out` with the primitive columns followed by the columns of the
/// options (from `options`) whose initiation set contains `s`.
pub fn available_into(options: &[OptionDef], s: State, out: &mut Vec<usize>) {
    out.clear();
    out.extend(0..N_ACTIONS);
    out.extend(options.iter().enumerate().filter(|(_, o)| o.can_start(s)).map(|(k, _)| option_column(k)));
}

const PRIMITIVES: [usize; N_ACTIONS] = [0, 1, 2, 3];

/// Primitive columns only.
pub fn primitive_columns() -> &'static [usize] {
    &PRIMITIVES
}

/// ε-greedy choice: with probability ε a uniform pick from `explore`,
/// otherwise the argmax of `Q(s, ·)` over `greedy` with ties broken
/// uniformly at random. Greedy candidates must have columns in `q`.
pub fn select_with<R: Rng>(q: &QTable, s: State, explore: &[usize], greedy: &[usize], epsilon: f64, rng: &mut R) -> usize {
    assert!(!explore.is_empty() && !greedy.is_empty(), "no available actions");
    if rng.gen::<f64>() < epsilon {
        return explore[rng.gen_range(0..explore.len())];
    }
    let row = q.row(s);
    let best = greedy.iter().map(|&c| row[c]).fold(f64::NEG_INFINITY, f64::max);
    let ties = greedy.iter().filter(|&&c| row[c] == best).count();
    if ties == 1 {
        return *greedy.iter().find(|&&c| row[c] == best).unwrap_or(&greedy[0]);
    }
    let pick = rng.gen_range(0..ties);
    *greedy.iter().filter(|&&c| row[c] == best).nth(pick).unwrap_or(&greedy[0])
}

/// ε-greedy over `available`; see [`select_with`].
pub fn epsilon_greedy_select<R: Rng>(q: &QTable, s: State, available: &[usize], epsilon: f64, rng: &mut R) -> usize {
    select_with(q, s, available, available, epsilon, rng)
}

/// One-step Q-learning on the primitive column of `t`, bootstrapping from
/// the best of `available_next` (no bootstrap when `t.done`).
pub fn q_update(q: &mut QTable, t: &Transition, cfg: &AgentConfig, available_next: &[usize]) {
    let bootstrap = if t.done { 0.0 } else { q.max_over(t.next_state, available_next) };
    let target = t.reward + cfg.gamma * bootstrap;
    let cell = q.get_mut(t.state, t.action.index());
    *cell += cfg.alpha * (target - *cell);
}

/// `U(s, o)`: the option's own value where it continues, the best available
/// value where it terminates, and 0 at the end of an episode.
pub fn intra_option_target(q: &QTable, s: State, col: usize, o: &OptionDef, available: &[usize], terminal: bool) -> f64 {
    if terminal {
        0.0
    } else if o.terminates_at(s) {
        q.max_over(s, available)
    } else {
        q.get(s, col)
    }
}

/// Applies the one-step update for the primitive action of `t` and the
/// intra-option update for every option (column `4 + k` for `options[k]`)
/// that can start in `t.state` and would have taken `t.action` there.
/// All targets are computed before any entry changes.
pub fn intra_option_update_all(
    q: &mut QTable,
    t: &Transition,
    options: &[OptionDef],
    cfg: &AgentConfig,
    scratch: &mut Vec<usize>,
) {
    available_into(options, t.next_state, scratch);
    let best_next = if t.done { 0.0 } else { q.max_over(t.next_state, scratch) };
    let mut pending: Vec<(usize, f64, f64)> = Vec::new();
    pending.push((t.action.index(), t.reward + cfg.gamma * best_next, cfg.alpha));
    for (k, o) in options.iter().enumerate() {
        if o.can_start(t.state) && o.action(t.state) == t.action {
            let col = option_column(k);
            let u = if t.done {
                0.0
            } else if o.terminates_at(t.next_state) {
                best_next
            } else {
                q.get(t.next_state, col)
            };
            pending.push((col, t.reward + cfg.gamma_o * u, cfg.alpha_o));
        }
    }
    for (col, target, step) in pending {
        let cell = q.get_mut(t.state, col);
        *cell += step * (target - *cell);
    }
}

/// What ran while a trajectory was collected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Executed {
    Primitive(Action),
    /// Index into the option set.
    Option(usize),
}

/// Transitions collected while one primitive or option executed.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionTrajectory {
    pub executed: Executed,
    pub transitions: Vec<Transition>,
}

impl OptionTrajectory {
    pub fn new(executed: Executed) -> Self {
        OptionTrajectory { executed, transitions: Vec::new() }
    }

    /// Number of steps `K`.
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// `Σ γᵏ R_{k+1}` over the trajectory.
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        self.transitions.iter().rev().fold(0.0, |acc, t| t.reward + gamma * acc)
    }

    pub fn last(&self) -> Option<&Transition> {
        self.transitions.last()
    }
}

/// Multi-step backup of the executed option only: walking the trajectory
/// backwards, each visited state's value moves toward its discounted
/// return-to-termination plus the discounted best value at the final state.
pub fn smdp_backup_executed(
    q: &mut QTable,
    traj: &OptionTrajectory,
    options: &[OptionDef],
    cfg: &AgentConfig,
    scratch: &mut Vec<usize>,
) -> Result<()> {
    let Executed::Option(k) = traj.executed else {
        return Err(Error::Validation("smdp_backup_executed needs an option trajectory".into()));
    };
    let last = *traj.last().ok_or_else(|| Error::Validation("empty option trajectory".into()))?;
    available_into(options, last.next_state, scratch);
    let best_next = if last.done { 0.0 } else { q.max_over(last.next_state, scratch) };
    let col = option_column(k);
    let mut ret = 0.0;
    let mut discount = 1.0;
    for t in traj.transitions.iter().rev() {
        ret = t.reward + cfg.gamma_o * ret;
        discount *= cfg.gamma_o;
        let target = ret + discount * best_next;
        let cell = q.get_mut(t.state, col);
        *cell += cfg.alpha_o * (target - *cell);
    }
    Ok(())
}

/// Option-value update after a primitive step or a completed option.
///
/// For a primitive this is [`intra_option_update_all`]. For an option, each
/// transition is visited in reverse: the executed option gets the multi-step
/// backup of [`smdp_backup_executed`], and the primitive action plus every
/// other option that would have taken the same action get one-step updates.
pub fn smdp_update_executed(
    q: &mut QTable,
    traj: &OptionTrajectory,
    options: &[OptionDef],
    cfg: &AgentConfig,
    scratch: &mut Vec<usize>,
) -> Result<()> {
    let last = *traj.last().ok_or_else(|| Error::Validation("empty option trajectory".into()))?;
    let k = match traj.executed {
        Executed::Primitive(_) => {
            for t in &traj.transitions {
                intra_option_update_all(q, t, options, cfg, scratch);
            }
            return Ok(());
        }
        Executed::Option(k) => k,
    };
    available_into(options, last.next_state, scratch);
    let best_final = if last.done { 0.0 } else { q.max_over(last.next_state, scratch) };
    let col = option_column(k);
    let mut ret = 0.0;
    let mut discount = 1.0;
    let mut others = Vec::new();
    for t in traj.transitions.iter().rev() {
        ret = t.reward + cfg.gamma_o * ret;
        discount *= cfg.gamma_o;
        let target = ret + discount * best_final;
        let cell = q.get_mut(t.state, col);
        *cell += cfg.alpha_o * (target - *cell);

        // one-step updates for the primitive and the other consistent options
        available_into(options, t.next_state, &mut others);
        let best_next = if t.done { 0.0 } else { q.max_over(t.next_state, &others) };
        let mut pending = vec![(t.action.index(), t.reward + cfg.gamma * best_next, cfg.alpha)];
        for (j, o) in options.iter().enumerate() {
            if j != k && o.can_start(t.state) && o.action(t.state) == t.action {
                let u = intra_option_target(q, t.next_state, option_column(j), o, &others, t.done);
                pending.push((option_column(j), t.reward + cfg.gamma_o * u, cfg.alpha_o));
            }
        }
        for (c, target, step) in pending {
            let cell = q.get_mut(t.state, c);
            *cell += step * (target - *cell);
        }
    }
    Ok(())
}

/// Positive-value mask: `max Q(s, ·) > 0` per state.
pub fn positive_value_mask(q: &QTable) -> Vec<bool> {
    (0..q.n_states()).map(|s| q.max_row(State(s)) > 0.0).collect()
}
