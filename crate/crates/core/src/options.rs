//! Options as `(initiation set, policy, termination)` triples: eigenoptions
//! learned from an intrinsic reward, bottleneck options that walk to a
//! doorway, and the primitive one-step options.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::{step, Action, EnvMode, GridLayout, State, Transition};
use crate::representation::{Eigenpair, FeatureMap};

/// Values at or below this count as non-positive when deriving an
/// initiation set from a learned Q-table.
pub const POSITIVE_VALUE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    /// Built from the eigenvector with this 1-based rank.
    Eigen { rank: usize },
    /// Walks from `room` (a room index from [`room_partition`]) to `doorway`.
    Bottleneck { doorway: State, room: usize },
    Primitive(Action),
}

/// A deterministic tabular option.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionDef {
    id: usize,
    kind: OptionKind,
    initiation: Vec<bool>,
    policy: Vec<Action>,
    termination: Vec<bool>,
}

impl OptionDef {
    /// Validates the option against `layout`: the initiation set is
    /// non-empty and disjoint from the termination set, and following the
    /// policy from any initiation state terminates within `|S|` steps.
    pub fn new(
        layout: &GridLayout,
        id: usize,
        kind: OptionKind,
        initiation: Vec<bool>,
        policy: Vec<Action>,
        termination: Vec<bool>,
    ) -> Result<Self> {
        let n = layout.num_states();
        if initiation.len() != n || policy.len() != n || termination.len() != n {
            return Err(Error::Construction(format!("option {id}: tables do not cover {n} states")));
        }
        if !initiation.iter().any(|&b| b) {
            return Err(Error::Construction(format!("option {id} ({kind:?}) has an empty initiation set")));
        }
        let o = OptionDef { id, kind, initiation, policy, termination };
        if let OptionKind::Primitive(_) = kind {
            return Ok(o);
        }
        if let Some(s) = layout.states().find(|&s| o.can_start(s) && o.terminates_at(s)) {
            return Err(Error::Construction(format!("option {id}: {s} both initiates and terminates")));
        }
        for s in layout.states().filter(|&s| o.can_start(s)) {
            if o.steps_to_termination(layout, s).is_none() {
                return Err(Error::Construction(format!(
                    "option {id}: policy from {s} does not terminate within {n} steps"
                )));
            }
        }
        Ok(o)
    }

    /// One-step option for a primitive action: available everywhere,
    /// terminating everywhere.
    pub fn primitive(id: usize, action: Action, n_states: usize) -> Self {
        OptionDef {
            id,
            kind: OptionKind::Primitive(action),
            initiation: vec![true; n_states],
            policy: vec![action; n_states],
            termination: vec![true; n_states],
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn kind(&self) -> OptionKind {
        self.kind
    }

    pub fn with_id(mut self, id: usize) -> Self {
        self.id = id;
        self
    }

    #[inline]
    pub fn can_start(&self, s: State) -> bool {
        self.initiation[s.index()]
    }

    #[inline]
    pub fn terminates_at(&self, s: State) -> bool {
        self.termination[s.index()]
    }

    #[inline]
    pub fn action(&self, s: State) -> Action {
        self.policy[s.index()]
    }

    pub fn initiation_set(&self) -> Vec<State> {
        (0..self.initiation.len()).filter(|&i| self.initiation[i]).map(State).collect()
    }

    pub fn initiation_mask(&self) -> &[bool] {
        &self.initiation
    }

    pub fn termination_mask(&self) -> &[bool] {
        &self.termination
    }

    pub fn policy_table(&self) -> &[Action] {
        &self.policy
    }

    /// Number of steps the goal-free rollout from `s` takes before reaching a
    /// termination state, or `None` if it does not within `|S|` steps.
    pub fn steps_to_termination(&self, layout: &GridLayout, s: State) -> Option<usize> {
        let mut cur = s;
        for k in 1..=layout.num_states() {
            cur = layout.next_state(cur, self.action(cur));
            if self.terminates_at(cur) {
                return Some(k);
            }
        }
        None
    }

    /// Text form: a header followed by the policy arrow grid and the
    /// initiation and termination masks. Walls are `#`.
    pub fn to_text(&self, layout: &GridLayout) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "option {}", self.id);
        let _ = match self.kind {
            OptionKind::Eigen { rank } => writeln!(out, "kind eigen {rank}"),
            OptionKind::Bottleneck { doorway, room } => writeln!(out, "kind bottleneck {} {room}", doorway.index()),
            OptionKind::Primitive(a) => writeln!(out, "kind primitive {}", a.name()),
        };
        let _ = writeln!(out, "layout {} {} {}", layout.name(), layout.width(), layout.height());
        let grid = |out: &mut String, cell: &dyn Fn(State) -> char| {
            for r in 0..layout.height() {
                for c in 0..layout.width() {
                    out.push(layout.state_at(r, c).map_or('#', cell));
                }
                out.push('\n');
            }
        };
        out.push_str("policy\n");
        grid(&mut out, &|s| self.action(s).arrow());
        out.push_str("initiation\n");
        grid(&mut out, &|s| if self.can_start(s) { '1' } else { '0' });
        out.push_str("termination\n");
        grid(&mut out, &|s| if self.terminates_at(s) { '1' } else { '0' });
        out
    }

    /// Parses the output of [`OptionDef::to_text`] for the given layout.
    pub fn from_text(layout: &GridLayout, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next_line = |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("missing {what}")));

        let id = next_line("option header")?
            .strip_prefix("option ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Parse("bad option header".into()))?;

        let kind_line = next_line("kind line")?;
        let parts: Vec<&str> = kind_line.split_whitespace().collect();
        let num = |i: usize| -> Result<usize> {
            parts.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse(format!("bad kind line '{kind_line}'")))
        };
        let kind = match parts.get(1).copied() {
            Some("eigen") => OptionKind::Eigen { rank: num(2)? },
            Some("bottleneck") => OptionKind::Bottleneck { doorway: State(num(2)?), room: num(3)? },
            Some("primitive") => OptionKind::Primitive(
                parts.get(2).and_then(|n| Action::from_name(n)).ok_or_else(|| Error::Parse(format!("bad kind line '{kind_line}'")))?,
            ),
            _ => return Err(Error::Parse(format!("bad kind line '{kind_line}'"))),
        };

        let header = next_line("layout line")?;
        let expected = format!("layout {} {} {}", layout.name(), layout.width(), layout.height());
        if header.trim() != expected {
            return Err(Error::Parse(format!("option was written for '{header}', not '{expected}'")));
        }

        let n = layout.num_states();
        let mut policy = vec![Action::Up; n];
        let mut initiation = vec![false; n];
        let mut termination = vec![false; n];
        for section in ["policy", "initiation", "termination"] {
            if next_line(section)?.trim() != section {
                return Err(Error::Parse(format!("expected '{section}' section")));
            }
            for r in 0..layout.height() {
                let row: Vec<char> = next_line("grid row")?.chars().collect();
                if row.len() != layout.width() {
                    return Err(Error::Parse(format!("{section} row {r} has width {}", row.len())));
                }
                for (c, &ch) in row.iter().enumerate() {
                    let Some(s) = layout.state_at(r, c) else {
                        if ch != '#' {
                            return Err(Error::Parse(format!("expected wall at ({r}, {c})")));
                        }
                        continue;
                    };
                    let bad = || Error::Parse(format!("unexpected '{ch}' in {section} at ({r}, {c})"));
                    match section {
                        "policy" => policy[s.index()] = Action::from_arrow(ch).ok_or_else(bad)?,
                        _ => {
                            let flag = match ch {
                                '1' => true,
                                '0' => false,
                                _ => return Err(bad()),
                            };
                            if section == "initiation" {
                                initiation[s.index()] = flag;
                            } else {
                                termination[s.index()] = flag;
                            }
                        }
                    }
                }
            }
        }
        OptionDef::new(layout, id, kind, initiation, policy, termination)
    }
}

/// Q-learning parameters for option policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptionLearnConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub n_episodes: usize,
    pub episode_len: usize,
}

impl Default for OptionLearnConfig {
    fn default() -> Self {
        OptionLearnConfig { gamma: 0.9, alpha: 0.1, n_episodes: 100, episode_len: 1000 }
    }
}

/// `eᵀ(φ(s') − φ(s))`.
#[inline]
pub fn intrinsic_reward(e: &[f64], phi: FeatureMap, s: State, s_next: State) -> f64 {
    phi.project(e, s_next) - phi.project(e, s)
}

/// Tabular Q-values over the four actions.
pub type ActionValues = Vec<[f64; 4]>;

#[inline]
fn max4(q: &[f64; 4]) -> f64 {
    q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Greedy action with ties going to the lowest action index.
pub fn greedy_action(q: &[f64; 4]) -> Action {
    let mut best = 0;
    for a in 1..4 {
        if q[a] > q[best] {
            best = a;
        }
    }
    Action::ALL[best]
}

#[inline]
fn intrinsic_q_step(q: &mut ActionValues, e: &[f64], t: &Transition, gamma: f64, alpha: f64) {
    let r = intrinsic_reward(e, FeatureMap::Tabular, t.state, t.next_state);
    let target = r + gamma * max4(&q[t.next_state.index()]);
    let cell = &mut q[t.state.index()][t.action.index()];
    *cell += alpha * (target - *cell);
}

/// Q-learning on the intrinsic reward of `e` with uniform-random behaviour
/// in goal-free mode, each episode starting from a uniformly random state.
pub fn learn_intrinsic_q(layout: &GridLayout, e: &[f64], cfg: &OptionLearnConfig, rng: &mut impl Rng) -> ActionValues {
    let n = layout.num_states();
    let mut q = vec![[0.0; 4]; n];
    for _ in 0..cfg.n_episodes {
        let mut s = State(rng.gen_range(0..n));
        for _ in 0..cfg.episode_len {
            let a = Action::ALL[rng.gen_range(0..4)];
            let t = step(layout, EnvMode::GoalFree, s, a);
            intrinsic_q_step(&mut q, e, &t, cfg.gamma, cfg.alpha);
            s = t.next_state;
        }
    }
    q
}

/// Q-learning on the intrinsic reward of `e` by sweeping over stored
/// transitions `n_sweeps` times.
pub fn learn_intrinsic_q_from_dataset(
    n_states: usize,
    dataset: &[Transition],
    e: &[f64],
    gamma: f64,
    alpha: f64,
    n_sweeps: usize,
) -> ActionValues {
    let mut q = vec![[0.0; 4]; n_states];
    for _ in 0..n_sweeps {
        for t in dataset {
            intrinsic_q_step(&mut q, e, t, gamma, alpha);
        }
    }
    q
}

/// Turns learned intrinsic Q-values into an option: greedy policy, states
/// with positive value initiate, all others terminate. Initiation states
/// whose greedy path cycles without reaching a termination state are moved
/// to the termination set.
pub fn option_from_q(layout: &GridLayout, id: usize, kind: OptionKind, q: &ActionValues) -> Result<OptionDef> {
    let policy: Vec<Action> = q.iter().map(greedy_action).collect();
    let mut initiation: Vec<bool> = q.iter().map(|row| max4(row) > POSITIVE_VALUE_TOLERANCE).collect();
    prune_cycles(layout, &policy, &mut initiation);
    let termination = initiation.iter().map(|&b| !b).collect();
    OptionDef::new(layout, id, kind, initiation, policy, termination)
}

/// Removes from `initiation` every state lying on a cycle of the policy
/// that stays inside the initiation set.
fn prune_cycles(layout: &GridLayout, policy: &[Action], initiation: &mut [bool]) {
    // 0 = unknown, 1 = on current path, 2 = resolved
    let n = layout.num_states();
    let mut mark = vec![0u8; n];
    for start in 0..n {
        if !initiation[start] || mark[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = start;
        while initiation[cur] && mark[cur] == 0 {
            mark[cur] = 1;
            path.push(cur);
            cur = layout.next_state(State(cur), policy[cur]).index();
        }
        if initiation[cur] && mark[cur] == 1 {
            let pos = path.iter().position(|&p| p == cur).unwrap_or(0);
            for &c in &path[pos..] {
                initiation[c] = false;
            }
        }
        for &p in &path {
            mark[p] = 2;
        }
    }
}

/// Learns an eigenoption for `e` (see [`learn_intrinsic_q`]) and derives
/// its initiation and termination sets from the learned values.
pub fn learn_eigenoption(layout: &GridLayout, e: &Eigenpair, cfg: &OptionLearnConfig, seed: u64) -> Result<OptionDef> {
    if e.vector.len() != layout.num_states() {
        return Err(Error::Validation(format!(
            "eigenvector has {} entries for {} states",
            e.vector.len(),
            layout.num_states()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = learn_intrinsic_q(layout, &e.vector, cfg, &mut rng);
    option_from_q(layout, e.rank, OptionKind::Eigen { rank: e.rank }, &q).map_err(|err| match err {
        Error::Construction(msg) => Error::Construction(format!("eigenvector rank {}: {msg}", e.rank)),
        other => other,
    })
}

/// Eigenoptions for each pair. Degenerate eigenvectors are skipped; the
/// rejected ranks are returned with their reasons.
pub fn build_eigenoptions(
    layout: &GridLayout,
    pairs: &[Eigenpair],
    cfg: &OptionLearnConfig,
    seed: u64,
) -> (Vec<OptionDef>, Vec<(usize, String)>) {
    let mut options = Vec::new();
    let mut rejected = Vec::new();
    for e in pairs {
        match learn_eigenoption(layout, e, cfg, seed.wrapping_add(e.rank as u64)) {
            Ok(o) => options.push(o.with_id(options.len())),
            Err(err) => {
                log::warn!("skipping eigenoption: {err}");
                rejected.push((e.rank, err.to_string()));
            }
        }
    }
    (options, rejected)
}

/// Doorway states: cells with exactly two open neighbours on opposite
/// sides, where neither neighbour is such a cell itself. This picks out
/// one-cell gaps in a wall between two open areas and ignores long
/// corridors. Returned in state order.
pub fn find_bottlenecks(layout: &GridLayout) -> Vec<State> {
    let corridor = |s: State| {
        let open = |a: Action| layout.next_state(s, a) != s;
        let vertical = open(Action::Up) && open(Action::Down) && !open(Action::Left) && !open(Action::Right);
        let horizontal = open(Action::Left) && open(Action::Right) && !open(Action::Up) && !open(Action::Down);
        vertical || horizontal
    };
    layout
        .states()
        .filter(|&s| corridor(s) && layout.neighbors(s).iter().all(|&t| !corridor(t)))
        .collect()
}

/// Connected components of the layout with all doorways removed, ordered by
/// their smallest state index.
pub fn room_partition(layout: &GridLayout) -> Vec<Vec<State>> {
    let n = layout.num_states();
    let mut allowed = vec![true; n];
    for d in layout.doorways() {
        allowed[d.index()] = false;
    }
    let mut room_of = vec![usize::MAX; n];
    let mut rooms = Vec::new();
    for s in layout.states() {
        if !allowed[s.index()] || room_of[s.index()] != usize::MAX {
            continue;
        }
        let dist = layout.bfs_distances(s, Some(&allowed));
        let members: Vec<State> = (0..n).filter(|&i| dist[i].is_some()).map(State).collect();
        for m in &members {
            room_of[m.index()] = rooms.len();
        }
        rooms.push(members);
    }
    rooms
}

/// Option that walks from anywhere in `room` to `doorway` along a shortest
/// path (ties to the lowest action index). It terminates at the doorway and
/// everywhere outside the room.
pub fn build_bottleneck_option(
    layout: &GridLayout,
    id: usize,
    doorway: State,
    room_index: usize,
    room: &[State],
) -> Result<OptionDef> {
    let n = layout.num_states();
    if room.contains(&doorway) {
        return Err(Error::Construction(format!("doorway {doorway} lies inside room {room_index}")));
    }
    if !layout.neighbors(doorway).iter().any(|s| room.contains(s)) {
        return Err(Error::Construction(format!("doorway {doorway} is not adjacent to room {room_index}")));
    }
    let mut allowed = vec![false; n];
    for s in room {
        allowed[s.index()] = true;
    }
    allowed[doorway.index()] = true;
    let dist = layout.bfs_distances(doorway, Some(&allowed));

    let mut policy = vec![Action::Up; n];
    let mut initiation = vec![false; n];
    for &s in room {
        let d = dist[s.index()].ok_or_else(|| {
            Error::Construction(format!("{s} in room {room_index} cannot reach doorway {doorway}"))
        })?;
        let a = Action::ALL
            .into_iter()
            .find(|&a| dist[layout.next_state(s, a).index()] == Some(d - 1))
            .ok_or_else(|| Error::Construction(format!("no descent direction at {s}")))?;
        policy[s.index()] = a;
        initiation[s.index()] = true;
    }
    let termination = initiation.iter().map(|&b| !b).collect();
    OptionDef::new(layout, id, OptionKind::Bottleneck { doorway, room: room_index }, initiation, policy, termination)
}

/// Every bottleneck option: one per (doorway, adjacent room) pair.
pub fn build_bottleneck_options(layout: &GridLayout) -> Result<Vec<OptionDef>> {
    let rooms = room_partition(layout);
    let mut options = Vec::new();
    for &d in layout.doorways() {
        for (ri, room) in rooms.iter().enumerate() {
            if layout.neighbors(d).iter().any(|s| room.contains(s)) {
                options.push(build_bottleneck_option(layout, options.len(), d, ri, room)?);
            }
        }
    }
    Ok(options)
}

/// Result of executing an option.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionRollout {
    pub transitions: Vec<Transition>,
    /// Number of steps taken.
    pub steps: usize,
    /// True if the option terminated or the episode ended, false if
    /// `max_steps` cut it short.
    pub terminated: bool,
}

/// Executes `o` from `s0` until it terminates, the task episode ends, or
/// `max_steps` steps have been taken.
pub fn rollout_option(
    layout: &GridLayout,
    mode: EnvMode,
    o: &OptionDef,
    s0: State,
    max_steps: usize,
) -> Result<OptionRollout> {
    if !o.can_start(s0) {
        return Err(Error::Validation(format!("option {} cannot start in {s0}", o.id())));
    }
    let mut transitions = Vec::new();
    let mut s = s0;
    let mut terminated = false;
    while transitions.len() < max_steps {
        let t = step(layout, mode, s, o.action(s));
        transitions.push(t);
        s = t.next_state;
        if t.done || o.terminates_at(s) {
            terminated = true;
            break;
        }
    }
    Ok(OptionRollout { steps: transitions.len(), transitions, terminated })
}
