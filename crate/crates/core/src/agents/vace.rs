//! Online option discovery: collect experience, learn the SR of the window,
//! turn its top eigenvector into an option, repeat. With option values this
//! is VACE; without, options only serve exploration (CEO).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::runners::{Recorder, RunSettings};
use super::{
    available_into, primitive_columns, q_update, select_with, smdp_update_executed, AgentConfig, Executed,
    OptionTrajectory, QTable, VaceConfig, N_ACTIONS,
};
use crate::error::{Error, Result};
use crate::evaluation::RunResult;
use crate::gridworld::{step, Action, EnvMode, GridLayout, State, TaskSpec, Transition};
use crate::options::{learn_intrinsic_q_from_dataset, option_from_q, OptionDef, OptionKind};
use crate::representation::{learn_sr_from_dataset, top_eigenvectors, SRLearnerConfig};

/// Outcome of one discovery round.
#[derive(Debug, Clone, PartialEq)]
pub struct Discovery {
    /// 1-based round number.
    pub round: usize,
    /// Environment steps taken when the round ran.
    pub wall_step: usize,
    /// Option id if an option was added.
    pub option_id: Option<usize>,
    pub initiation_size: usize,
    pub detail: String,
}

/// Builds an option from the top eigenvector of the SR learned on
/// `window`. The eigenvector is oriented so that its entries sum to a
/// non-positive value, which points the option away from the most visited
/// states of the window.
pub fn discover_option(layout: &GridLayout, window: &[Transition], id: usize, vcfg: &VaceConfig) -> Result<OptionDef> {
    if window.is_empty() {
        return Err(Error::Validation("empty discovery window".into()));
    }
    // compact index over states seen in the window; unseen states have
    // zero SR rows and columns and carry no spectral mass
    let n = layout.num_states();
    let mut compact = vec![usize::MAX; n];
    let mut seen = Vec::new();
    for t in window {
        for s in [t.state, t.next_state] {
            if compact[s.index()] == usize::MAX {
                compact[s.index()] = seen.len();
                seen.push(s);
            }
        }
    }
    let local: Vec<Transition> = window
        .iter()
        .map(|t| Transition { state: State(compact[t.state.index()]), next_state: State(compact[t.next_state.index()]), ..*t })
        .collect();
    let sr_cfg = SRLearnerConfig { eta: vcfg.sr_eta, gamma: vcfg.sr_gamma, n_sweeps: vcfg.n_sweeps };
    let sr = learn_sr_from_dataset(&local, seen.len(), &sr_cfg)?;
    let top = top_eigenvectors(&sr, 1)?.remove(0);

    let mut e = vec![0.0; n];
    for (i, s) in seen.iter().enumerate() {
        e[s.index()] = top.vector[i];
    }
    if e.iter().sum::<f64>() > 0.0 {
        e.iter_mut().for_each(|x| *x = -*x);
    }
    let q = learn_intrinsic_q_from_dataset(n, window, &e, vcfg.option_gamma, vcfg.option_alpha, vcfg.n_sweeps);
    option_from_q(layout, id, OptionKind::Eigen { rank: 1 }, &q)
}

/// Continuous interaction with discovery every `vcfg.n_steps` transitions.
///
/// Reaching the goal (or the episode cap) resets the agent to the start
/// state without interrupting the discovery schedule. With
/// `learn_option_values` each discovered option gets a value column and
/// takes part in greedy selection; otherwise options are only sampled on
/// exploratory steps and only primitive values are learned.
pub fn run_vace(
    layout: &GridLayout,
    task: &TaskSpec,
    cfg: &AgentConfig,
    vcfg: &VaceConfig,
    settings: &RunSettings,
    seed: u64,
) -> RunResult {
    let mode = EnvMode::Task { start: task.start, goal: task.goal };
    let algorithm = if vcfg.learn_option_values { "vace" } else { "ceo" };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = QTable::new(layout.num_states());
    let mut rec = Recorder::new(layout, task, algorithm, seed, settings);
    let mut options: Vec<OptionDef> = Vec::new();
    let mut window: Vec<Transition> = Vec::with_capacity(vcfg.n_steps.min(1 << 16));
    let mut discoveries = Vec::new();
    let mut wall = 0usize;
    let actions = primitive_columns();
    let mut available = Vec::new();
    let mut scratch = Vec::new();

    let mut s = task.start;
    let mut steps = 0;
    while rec.episodes() < settings.n_episodes {
        available_into(&options, s, &mut available);
        let greedy: &[usize] = if vcfg.learn_option_values { &available } else { actions };
        let c = select_with(&q, s, &available, greedy, cfg.epsilon, &mut rng);

        let mut traj = if c < N_ACTIONS {
            OptionTrajectory::new(Executed::Primitive(Action::ALL[c]))
        } else {
            OptionTrajectory::new(Executed::Option(c - N_ACTIONS))
        };
        loop {
            let a = match traj.executed {
                Executed::Primitive(a) => a,
                Executed::Option(k) => options[k].action(s),
            };
            let t = step(layout, mode, s, a);
            rec.visit(&t);
            steps += 1;
            wall += 1;
            window.push(t);
            if !vcfg.learn_option_values {
                q_update(&mut q, &t, cfg, actions);
            }
            traj.transitions.push(t);
            s = t.next_state;
            let finished = match traj.executed {
                Executed::Primitive(_) => true,
                Executed::Option(k) => options[k].terminates_at(s),
            };
            if finished || t.done || steps >= settings.episode_cap {
                break;
            }
        }
        if vcfg.learn_option_values {
            let _ = smdp_update_executed(&mut q, &traj, &options, cfg, &mut scratch);
        }

        let done = traj.last().is_some_and(|t| t.done);
        if done || steps >= settings.episode_cap {
            rec.end_episode(steps, options.len(), &q);
            s = task.start;
            steps = 0;
        }

        if window.len() >= vcfg.n_steps && discoveries.len() < vcfg.n_iter {
            let round = discoveries.len() + 1;
            let id = options.len();
            let entry = match discover_option(layout, &window, id, vcfg) {
                Ok(o) => {
                    let size = o.initiation_set().len();
                    if vcfg.learn_option_values {
                        q.add_option_column(id);
                    }
                    options.push(o);
                    Discovery { round, wall_step: wall, option_id: Some(id), initiation_size: size, detail: String::new() }
                }
                Err(err) => {
                    log::info!("discovery round {round} (seed {seed}) skipped: {err}");
                    Discovery { round, wall_step: wall, option_id: None, initiation_size: 0, detail: err.to_string() }
                }
            };
            discoveries.push(entry);
            window.clear();
        }
    }
    rec.result_mut().discoveries = discoveries;
    rec.finish(q)
}
