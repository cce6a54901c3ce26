//! Tabular gridworlds with cardinal actions.
//!
//! A [`GridLayout`] is an immutable wall map. Non-wall cells are numbered
//! row-major and every non-wall cell gets a [`State`]. Motion is
//! deterministic: an action moves one cell, and bumping into a wall leaves
//! the agent where it was.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Index of a non-wall cell, in `[0, |S|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State(pub usize);

impl State {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl Action {
    pub const COUNT: usize = 4;
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }

    pub fn opposite(self) -> Action {
        match self {
            Action::Up => Action::Down,
            Action::Down => Action::Up,
            Action::Left => Action::Right,
            Action::Right => Action::Left,
        }
    }

    /// Single-character arrow used in text maps.
    pub fn arrow(self) -> char {
        match self {
            Action::Up => '^',
            Action::Down => 'v',
            Action::Left => '<',
            Action::Right => '>',
        }
    }

    pub fn from_arrow(c: char) -> Option<Action> {
        match c {
            '^' => Some(Action::Up),
            'v' => Some(Action::Down),
            '<' => Some(Action::Left),
            '>' => Some(Action::Right),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
        }
    }

    pub fn from_name(name: &str) -> Option<Action> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: State,
    pub action: Action,
    pub reward: f64,
    pub next_state: State,
    pub done: bool,
}

/// Whether a goal is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvMode {
    Task { start: State, goal: State },
    /// No goal: rewards are always 0 and no transition ends an episode.
    GoalFree,
}

/// Immutable wall map plus the derived state indexing and dynamics table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridLayout {
    name: String,
    width: usize,
    height: usize,
    walls: Vec<bool>,
    cell_state: Vec<Option<usize>>,
    positions: Vec<(usize, usize)>,
    next: Vec<[usize; 4]>,
    doorways: Vec<State>,
}

impl GridLayout {
    /// Builds a layout from a row-major wall mask, checking the border and
    /// connectivity invariants.
    pub fn from_walls(name: &str, width: usize, height: usize, walls: Vec<bool>) -> Result<Self> {
        if width < 3 || height < 3 {
            return Err(Error::Validation(format!("layout {width}x{height} too small")));
        }
        if walls.len() != width * height {
            return Err(Error::Validation(format!(
                "wall mask has {} cells, expected {}",
                walls.len(),
                width * height
            )));
        }
        for r in 0..height {
            for c in 0..width {
                let border = r == 0 || c == 0 || r + 1 == height || c + 1 == width;
                if border && !walls[r * width + c] {
                    return Err(Error::Validation(format!("border cell ({r}, {c}) is not a wall")));
                }
            }
        }

        let mut cell_state = vec![None; width * height];
        let mut positions = Vec::new();
        for r in 0..height {
            for c in 0..width {
                if !walls[r * width + c] {
                    cell_state[r * width + c] = Some(positions.len());
                    positions.push((r, c));
                }
            }
        }
        if positions.is_empty() {
            return Err(Error::Validation("layout has no open cells".into()));
        }

        let next = positions
            .iter()
            .enumerate()
            .map(|(s, &(r, c))| {
                let mut row = [s; 4];
                for a in Action::ALL {
                    let (dr, dc) = a.delta();
                    let (nr, nc) = ((r as isize + dr) as usize, (c as isize + dc) as usize);
                    if let Some(t) = cell_state[nr * width + nc] {
                        row[a.index()] = t;
                    }
                }
                row
            })
            .collect();

        let mut layout = GridLayout {
            name: name.to_string(),
            width,
            height,
            walls,
            cell_state,
            positions,
            next,
            doorways: Vec::new(),
        };

        let reached = layout.bfs_distances(State(0), None).iter().filter(|d| d.is_some()).count();
        if reached != layout.num_states() {
            return Err(Error::Validation(format!(
                "layout '{name}' is disconnected: {reached} of {} cells reachable",
                layout.num_states()
            )));
        }
        layout.doorways = crate::options::find_bottlenecks(&layout);
        Ok(layout)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_states(&self) -> usize {
        self.positions.len()
    }

    pub fn states(&self) -> impl Iterator<Item = State> {
        (0..self.num_states()).map(State)
    }

    pub fn is_wall(&self, row: usize, col: usize) -> bool {
        row >= self.height || col >= self.width || self.walls[row * self.width + col]
    }

    /// Wall cells as `(row, col)` pairs.
    pub fn walls(&self) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|r| (0..self.width).map(move |c| (r, c)))
            .filter(|&(r, c)| self.is_wall(r, c))
            .collect()
    }

    /// Doorway cells (articulation cells between rooms), in state order.
    pub fn doorways(&self) -> &[State] {
        &self.doorways
    }

    pub fn state_at(&self, row: usize, col: usize) -> Option<State> {
        if row >= self.height || col >= self.width {
            return None;
        }
        self.cell_state[row * self.width + col].map(State)
    }

    pub fn position(&self, s: State) -> (usize, usize) {
        self.positions[s.0]
    }

    /// Deterministic successor of `s` under `a`, ignoring rewards.
    #[inline]
    pub fn next_state(&self, s: State, a: Action) -> State {
        State(self.next[s.0][a.index()])
    }

    /// Non-wall cardinal neighbours of `s`, in action order.
    pub fn neighbors(&self, s: State) -> Vec<State> {
        Action::ALL
            .iter()
            .map(|&a| self.next_state(s, a))
            .filter(|&t| t != s)
            .collect()
    }

    /// Breadth-first distances from `source`, optionally restricted to the
    /// cells where `allowed` is true.
    pub fn bfs_distances(&self, source: State, allowed: Option<&[bool]>) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_states()];
        let ok = |s: State| allowed.map_or(true, |m| m[s.0]);
        if !ok(source) {
            return dist;
        }
        dist[source.0] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(s) = queue.pop_front() {
            let d = dist[s.0].unwrap_or(0);
            for a in Action::ALL {
                let t = self.next_state(s, a);
                if dist[t.0].is_none() && ok(t) {
                    dist[t.0] = Some(d + 1);
                    queue.push_back(t);
                }
            }
        }
        dist
    }

    /// Plain-text map: `#` wall, `.` floor, `S` start, `G` goal.
    pub fn to_text_map(&self, start: Option<State>, goal: Option<State>) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for r in 0..self.height {
            for c in 0..self.width {
                let ch = match self.state_at(r, c) {
                    None => '#',
                    Some(s) if Some(s) == start => 'S',
                    Some(s) if Some(s) == goal => 'G',
                    Some(_) => '.',
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }

    /// Parses a text map produced by [`GridLayout::to_text_map`]. Returns the
    /// layout together with the start and goal markers, if present.
    pub fn from_text_map(name: &str, text: &str) -> Result<(GridLayout, Option<State>, Option<State>)> {
        let rows: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut walls = Vec::with_capacity(width * height);
        let mut start = None;
        let mut goal = None;
        for (r, line) in rows.iter().enumerate() {
            if line.chars().count() != width {
                return Err(Error::Parse(format!("row {r} has {} cells, expected {width}", line.chars().count())));
            }
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '#' => walls.push(true),
                    '.' => walls.push(false),
                    'S' | 'G' => {
                        let slot = if ch == 'S' { &mut start } else { &mut goal };
                        if slot.is_some() {
                            return Err(Error::Parse(format!("duplicate '{ch}' marker")));
                        }
                        *slot = Some((r, c));
                        walls.push(false);
                    }
                    other => return Err(Error::Parse(format!("unexpected character '{other}' at ({r}, {c})"))),
                }
            }
        }
        let layout = GridLayout::from_walls(name, width, height, walls)?;
        let lookup = |p: Option<(usize, usize)>| p.and_then(|(r, c)| layout.state_at(r, c));
        let (start, goal) = (lookup(start), lookup(goal));
        Ok((layout, start, goal))
    }
}

/// Names accepted by [`build_layout`].
pub const LAYOUT_NAMES: [&str; 2] = ["four_rooms", "nine_rooms"];

const FOUR_ROOMS: &str = "\
#############
#.....#.....#
#.....#.....#
#...........#
#.....#.....#
#.....#.....#
##.####.....#
#.....###.###
#.....#.....#
#.....#.....#
#...........#
#.....#.....#
#############
";

/// 19x19 grid: a 3x3 arrangement of 5x5 rooms, one centred doorway per
/// shared wall.
fn nine_rooms_walls() -> Vec<bool> {
    const N: usize = 19;
    let mut walls = vec![false; N * N];
    for r in 0..N {
        for c in 0..N {
            let wall_row = r % 6 == 0;
            let wall_col = c % 6 == 0;
            let door = (wall_col && !wall_row && c != 0 && c != 18 && r % 6 == 3)
                || (wall_row && !wall_col && r != 0 && r != 18 && c % 6 == 3);
            walls[r * N + c] = (wall_row || wall_col) && !door;
        }
    }
    walls
}

/// Canonical layouts: `four_rooms` (13x13, 104 cells, 4 doorways) and
/// `nine_rooms` (19x19, 237 cells, 12 doorways).
pub fn build_layout(name: &str) -> Result<GridLayout> {
    match name {
        "four_rooms" => GridLayout::from_text_map(name, FOUR_ROOMS).map(|(l, _, _)| l),
        "nine_rooms" => GridLayout::from_walls(name, 19, 19, nine_rooms_walls()),
        other => Err(Error::Config(format!(
            "unknown layout '{other}' (expected one of {})",
            LAYOUT_NAMES.join(", ")
        ))),
    }
}

/// Named start/goal placement on a canonical layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub id: String,
    pub start: State,
    pub goal: State,
}

/// Ids of the built-in start/goal configurations.
pub const TASK_IDS: [&str; 4] = ["A", "B", "C", "D"];

/// Built-in start/goal configurations. Each places start and goal in
/// diagonally opposite rooms.
pub fn canonical_task(layout: &GridLayout, id: &str) -> Result<TaskSpec> {
    let cells = match (layout.name(), id) {
        ("four_rooms", "A") => ((1, 1), (11, 11)),
        ("four_rooms", "B") => ((11, 1), (1, 11)),
        ("four_rooms", "C") => ((2, 9), (10, 3)),
        ("four_rooms", "D") => ((9, 10), (4, 2)),
        ("nine_rooms", "A") => ((1, 1), (17, 17)),
        ("nine_rooms", "B") => ((17, 1), (1, 17)),
        ("nine_rooms", "C") => ((3, 15), (15, 3)),
        ("nine_rooms", "D") => ((15, 14), (2, 4)),
        (env, id) => {
            return Err(Error::Config(format!("no start/goal configuration '{id}' for layout '{env}'")))
        }
    };
    task_at(layout, id, cells.0, cells.1)
}

/// Start/goal configuration from explicit cell coordinates.
pub fn task_at(layout: &GridLayout, id: &str, start: (usize, usize), goal: (usize, usize)) -> Result<TaskSpec> {
    let find = |(r, c): (usize, usize), what: &str| {
        layout
            .state_at(r, c)
            .ok_or_else(|| Error::Config(format!("{what} ({r}, {c}) of configuration '{id}' is a wall")))
    };
    Ok(TaskSpec { id: id.to_string(), start: find(start, "start")?, goal: find(goal, "goal")? })
}

/// One deterministic environment step.
pub fn step(layout: &GridLayout, mode: EnvMode, s: State, a: Action) -> Transition {
    let next_state = layout.next_state(s, a);
    let done = matches!(mode, EnvMode::Task { goal, .. } if goal == next_state);
    Transition { state: s, action: a, reward: if done { 1.0 } else { 0.0 }, next_state, done }
}

/// Uniform-random policy over the four actions.
pub fn uniform_policy(layout: &GridLayout) -> Vec<[f64; 4]> {
    vec![[0.25; 4]; layout.num_states()]
}

/// Row-stochastic transition matrix induced by `policy` in goal-free mode.
pub fn transition_matrix(layout: &GridLayout, policy: &[[f64; 4]]) -> Result<Matrix> {
    let n = layout.num_states();
    if policy.len() != n {
        return Err(Error::Validation(format!("policy has {} rows, layout has {n} states", policy.len())));
    }
    let mut p = Matrix::zeros(n, n);
    for s in layout.states() {
        let probs = &policy[s.0];
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("policy row {} is not a distribution: {probs:?}", s.0)));
        }
        for a in Action::ALL {
            let t = step(layout, EnvMode::GoalFree, s, a).next_state;
            p[(s.0, t.0)] += probs[a.index()];
        }
    }
    Ok(p)
}
