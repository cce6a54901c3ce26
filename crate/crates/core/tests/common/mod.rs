//! Oracles shared by the property suites and the acceptance run.
#![allow(dead_code)]

use eigenopt::agents::{
    available_into, option_column, select_with, smdp_update_executed, AgentConfig, Executed, OptionTrajectory, QTable,
};
use eigenopt::evaluation::{mean_ci, median_ci};
use eigenopt::gridworld::{step, Action, EnvMode, GridLayout, State, Transition};
use eigenopt::options::{OptionDef, OptionKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One-row corridor of `len` open cells.
pub fn corridor(len: usize) -> GridLayout {
    let w = len + 2;
    let walls = (0..3 * w).map(|i| i / w != 1 || i % w == 0 || i % w == w - 1).collect();
    GridLayout::from_walls("chain", w, 3, walls).unwrap()
}

/// Best discounted return from `s` over all primitive action sequences of
/// length at most `depth`.
pub fn brute_force_value(layout: &GridLayout, goal: State, s: State, gamma: f64, depth: usize) -> f64 {
    if depth == 0 {
        return 0.0;
    }
    let mode = EnvMode::Task { start: s, goal };
    Action::ALL
        .iter()
        .map(|&a| {
            let t = step(layout, mode, s, a);
            if t.done {
                t.reward
            } else {
                t.reward + gamma * brute_force_value(layout, goal, t.next_state, gamma, depth - 1)
            }
        })
        .fold(0.0, f64::max)
}

/// Trains option values on a 5-state chain with one "go right" option
/// (initiation {0, 1, 2}) using SMDP backups under uniform behaviour, then
/// compares Q(s, o) against enumeration. Returns `(state, learned, exact)`.
pub fn chain_option_values(episodes: usize, seed: u64) -> Vec<(State, f64, f64)> {
    let l = corridor(5);
    let (start, goal) = (State(0), State(4));
    let n = l.num_states();
    let init: Vec<bool> = (0..n).map(|s| s < 3).collect();
    let term: Vec<bool> = init.iter().map(|b| !b).collect();
    let o = OptionDef::new(&l, 0, OptionKind::Eigen { rank: 2 }, init, vec![Action::Right; n], term).unwrap();
    let options = vec![o.clone()];
    let cfg = AgentConfig { epsilon: 1.0, ..Default::default() };
    let mode = EnvMode::Task { start, goal };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = QTable::with_options(n, &options);
    let mut available = Vec::new();
    let mut scratch = Vec::new();
    for _ in 0..episodes {
        let mut s = start;
        loop {
            available_into(&options, s, &mut available);
            let c = select_with(&q, s, &available, &available, cfg.epsilon, &mut rng);
            let mut traj = if c < 4 {
                OptionTrajectory::new(Executed::Primitive(Action::ALL[c]))
            } else {
                OptionTrajectory::new(Executed::Option(0))
            };
            loop {
                let a = match traj.executed {
                    Executed::Primitive(a) => a,
                    Executed::Option(_) => o.action(s),
                };
                let t = step(&l, mode, s, a);
                traj.transitions.push(t);
                s = t.next_state;
                if matches!(traj.executed, Executed::Primitive(_)) || t.done || o.terminates_at(s) {
                    break;
                }
            }
            smdp_update_executed(&mut q, &traj, &options, &cfg, &mut scratch).unwrap();
            if traj.last().unwrap().done {
                break;
            }
        }
    }

    o.initiation_set()
        .into_iter()
        .map(|s0| {
            // the option's outcome, then the best continuation
            let (mut s, mut k, mut ret, mut done) = (s0, 0, 0.0, false);
            while !done && (k == 0 || !o.terminates_at(s)) {
                let t: Transition = step(&l, mode, s, o.action(s));
                ret += cfg.gamma_o.powi(k) * t.reward;
                k += 1;
                s = t.next_state;
                done = t.done;
            }
            let tail = if done { 0.0 } else { brute_force_value(&l, goal, s, cfg.gamma, 8) };
            (s0, q.get(s0, option_column(0)), ret + cfg.gamma_o.powi(k) * tail)
        })
        .collect()
}

/// Fraction of `trials` in which the 99% mean and median bands over `n`
/// exponential samples cover the true mean (1) and median (ln 2).
pub fn band_coverage(trials: usize, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mean_hits, mut median_hits) = (0, 0);
    for _ in 0..trials {
        let curves: Vec<Vec<f64>> = (0..n).map(|_| vec![-(1.0 - rng.gen::<f64>()).ln()]).collect();
        let refs: Vec<&[f64]> = curves.iter().map(Vec::as_slice).collect();
        let m = mean_ci(&refs, 0.99).unwrap();
        let d = median_ci(&refs, 0.99).unwrap();
        mean_hits += usize::from(m.lo[0] <= 1.0 && 1.0 <= m.hi[0]);
        median_hits += usize::from(d.lo[0] <= 2f64.ln() && 2f64.ln() <= d.hi[0]);
    }
    (mean_hits as f64 / trials as f64, median_hits as f64 / trials as f64)
}
