use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    available_into, epsilon_greedy_select, intra_option_update_all, primitive_columns, q_update,
    select_with, smdp_backup_executed, AgentConfig, Executed, OptionTrajectory, QTable, N_ACTIONS,
};
use crate::evaluation::{value_propagation_snapshot, RunMeta, RunResult};
use crate::gridworld::{step, Action, EnvMode, GridLayout, State, TaskSpec, Transition};
use crate::options::OptionDef;

/// Episode budget shared by all runners.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSettings {
    pub n_episodes: usize,
    /// Steps after which a task episode is truncated.
    pub episode_cap: usize,
    /// 1-based episodes after which a value/visitation snapshot is taken.
    pub snapshot_episodes: Vec<usize>,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings { n_episodes: 50, episode_cap: 5000, snapshot_episodes: vec![1, 5, 10, 20, 50, 100] }
    }
}

/// Per-episode bookkeeping.
pub(super) struct Recorder {
    result: RunResult,
    snapshot_episodes: Vec<usize>,
    visits: Vec<u64>,
    wall: usize,
}

impl Recorder {
    pub(super) fn new(layout: &GridLayout, task: &TaskSpec, algorithm: &str, seed: u64, settings: &RunSettings) -> Self {
        let meta = RunMeta {
            seed,
            algorithm: algorithm.to_string(),
            env: layout.name().to_string(),
            config_id: task.id.clone(),
        };
        Recorder {
            result: RunResult::new(meta, QTable::new(layout.num_states())),
            snapshot_episodes: settings.snapshot_episodes.clone(),
            visits: vec![0; layout.num_states()],
            wall: 0,
        }
    }

    #[inline]
    pub(super) fn visit(&mut self, t: &Transition) {
        self.visits[t.state.index()] += 1;
        self.wall += 1;
    }

    pub(super) fn episodes(&self) -> usize {
        self.result.steps_to_goal.len()
    }

    pub(super) fn end_episode(&mut self, steps: usize, n_options: usize, q: &QTable) {
        self.result.steps_to_goal.push(steps);
        self.result.wall_steps.push(self.wall);
        self.result.n_options.push(n_options);
        let episode = self.episodes();
        if self.snapshot_episodes.contains(&episode) {
            self.result.snapshots.push(value_propagation_snapshot(q, &self.visits, episode));
        }
    }

    pub(super) fn finish(mut self, q: QTable) -> RunResult {
        self.result.q_table = q;
        self.result
    }

    pub(super) fn result_mut(&mut self) -> &mut RunResult {
        &mut self.result
    }
}

/// Plain ε-greedy Q-learning over the four primitive actions.
pub fn run_qlearning(layout: &GridLayout, task: &TaskSpec, cfg: &AgentConfig, settings: &RunSettings, seed: u64) -> RunResult {
    let mode = EnvMode::Task { start: task.start, goal: task.goal };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = QTable::new(layout.num_states());
    let mut rec = Recorder::new(layout, task, "qlearning", seed, settings);
    let actions = primitive_columns();
    while rec.episodes() < settings.n_episodes {
        let mut s = task.start;
        let mut steps = 0;
        while steps < settings.episode_cap {
            let c = epsilon_greedy_select(&q, s, actions, cfg.epsilon, &mut rng);
            let t = step(layout, mode, s, Action::ALL[c]);
            rec.visit(&t);
            steps += 1;
            q_update(&mut q, &t, cfg, actions);
            s = t.next_state;
            if t.done {
                break;
            }
        }
        rec.end_episode(steps, 0, &q);
    }
    rec.finish(q)
}

/// Runs option `k` from `s` until it terminates, the episode ends or the
/// cap is hit, calling `on_step` after every transition.
fn execute_option(
    layout: &GridLayout,
    mode: EnvMode,
    options: &[OptionDef],
    k: usize,
    mut s: State,
    steps: &mut usize,
    cap: usize,
    mut on_step: impl FnMut(&Transition),
) -> OptionTrajectory {
    let o = &options[k];
    let mut traj = OptionTrajectory::new(Executed::Option(k));
    loop {
        let t = step(layout, mode, s, o.action(s));
        *steps += 1;
        on_step(&t);
        traj.transitions.push(t);
        s = t.next_state;
        if t.done || o.terminates_at(s) || *steps >= cap {
            return traj;
        }
    }
}

/// Value-aware eigenoptions: ε-greedy over actions and available options,
/// intra-option updates on every transition, and a multi-step backup of an
/// executed option when it finishes.
pub fn run_vaeo(
    layout: &GridLayout,
    task: &TaskSpec,
    options: &[OptionDef],
    cfg: &AgentConfig,
    settings: &RunSettings,
    seed: u64,
) -> RunResult {
    let mode = EnvMode::Task { start: task.start, goal: task.goal };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = QTable::with_options(layout.num_states(), options);
    let mut rec = Recorder::new(layout, task, "vaeo", seed, settings);
    let mut available = Vec::new();
    let mut scratch = Vec::new();
    while rec.episodes() < settings.n_episodes {
        let mut s = task.start;
        let mut steps = 0;
        while steps < settings.episode_cap {
            available_into(options, s, &mut available);
            let c = epsilon_greedy_select(&q, s, &available, cfg.epsilon, &mut rng);
            let last = if c < N_ACTIONS {
                let t = step(layout, mode, s, Action::ALL[c]);
                rec.visit(&t);
                steps += 1;
                intra_option_update_all(&mut q, &t, options, cfg, &mut scratch);
                t
            } else {
                let k = c - N_ACTIONS;
                let traj = execute_option(layout, mode, options, k, s, &mut steps, settings.episode_cap, |t| {
                    rec.visit(t);
                    intra_option_update_all(&mut q, t, options, cfg, &mut scratch);
                });
                let _ = smdp_backup_executed(&mut q, &traj, options, cfg, &mut scratch);
                *traj.last().expect("options take at least one step")
            };
            s = last.next_state;
            if last.done {
                break;
            }
        }
        rec.end_episode(steps, options.len(), &q);
    }
    rec.finish(q)
}

/// Q-learning that may pick an option on exploratory steps and follows it
/// to termination. Only primitive values are learned.
pub fn run_eo_exploration(
    layout: &GridLayout,
    task: &TaskSpec,
    options: &[OptionDef],
    cfg: &AgentConfig,
    settings: &RunSettings,
    seed: u64,
) -> RunResult {
    let mode = EnvMode::Task { start: task.start, goal: task.goal };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = QTable::new(layout.num_states());
    let mut rec = Recorder::new(layout, task, "eo", seed, settings);
    let actions = primitive_columns();
    let mut explore = Vec::new();
    while rec.episodes() < settings.n_episodes {
        let mut s = task.start;
        let mut steps = 0;
        while steps < settings.episode_cap {
            available_into(options, s, &mut explore);
            let c = select_with(&q, s, &explore, actions, cfg.epsilon, &mut rng);
            let last = if c < N_ACTIONS {
                let t = step(layout, mode, s, Action::ALL[c]);
                rec.visit(&t);
                steps += 1;
                q_update(&mut q, &t, cfg, actions);
                t
            } else {
                let traj = execute_option(layout, mode, options, c - N_ACTIONS, s, &mut steps, settings.episode_cap, |t| {
                    rec.visit(t);
                    q_update(&mut q, t, cfg, actions);
                });
                *traj.last().expect("options take at least one step")
            };
            s = last.next_state;
            if last.done {
                break;
            }
        }
        rec.end_episode(steps, options.len(), &q);
    }
    rec.finish(q)
}

/// Greedy evaluation over actions and options without learning. Returns
/// the number of steps to the goal, or `cap`.
pub fn greedy_evaluation(
    layout: &GridLayout,
    task: &TaskSpec,
    options: &[OptionDef],
    q: &QTable,
    cap: usize,
    rng: &mut ChaCha8Rng,
) -> usize {
    let mode = EnvMode::Task { start: task.start, goal: task.goal };
    let mut available = Vec::new();
    let mut s = task.start;
    let mut steps = 0;
    while steps < cap {
        available_into(options, s, &mut available);
        let c = epsilon_greedy_select(q, s, &available, 0.0, rng);
        let last = if c < N_ACTIONS {
            steps += 1;
            step(layout, mode, s, Action::ALL[c])
        } else {
            let traj = execute_option(layout, mode, options, c - N_ACTIONS, s, &mut steps, cap, |_| {});
            *traj.last().expect("options take at least one step")
        };
        if last.done {
            return steps;
        }
        s = last.next_state;
    }
    cap
}

/// Credit-assignment isolation: training acts with primitives only and
/// learns option values through intra-option updates; after each training
/// episode a greedy evaluation episode over actions and options (no
/// learning) is recorded as that episode's steps-to-goal.
pub fn run_credit_assignment_protocol(
    layout: &GridLayout,
    task: &TaskSpec,
    options: &[OptionDef],
    cfg: &AgentConfig,
    settings: &RunSettings,
    seed: u64,
) -> RunResult {
    let mode = EnvMode::Task { start: task.start, goal: task.goal };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eval_rng = ChaCha8Rng::seed_from_u64(seed);
    eval_rng.set_stream(1);
    let mut q = QTable::with_options(layout.num_states(), options);
    let mut rec = Recorder::new(layout, task, "credit_protocol", seed, settings);
    let actions = primitive_columns();
    let mut scratch = Vec::new();
    while rec.episodes() < settings.n_episodes {
        let mut s = task.start;
        let mut steps = 0;
        while steps < settings.episode_cap {
            let c = epsilon_greedy_select(&q, s, actions, cfg.epsilon, &mut rng);
            let t = step(layout, mode, s, Action::ALL[c]);
            rec.visit(&t);
            steps += 1;
            intra_option_update_all(&mut q, &t, options, cfg, &mut scratch);
            s = t.next_state;
            if t.done {
                break;
            }
        }
        let eval_steps = greedy_evaluation(layout, task, options, &q, settings.episode_cap, &mut eval_rng);
        rec.end_episode(eval_steps, options.len(), &q);
    }
    rec.finish(q)
}
