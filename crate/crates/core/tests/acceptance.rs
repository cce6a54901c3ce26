//! Acceptance run: prints one PASS/FAIL line per criterion and a summary.
//! Failures are reported, not raised; see the README.

use std::path::PathBuf;
use std::time::Instant;

use eigenopt::agents::{
    available_into, intra_option_target, option_column, run_eo_exploration, run_qlearning, run_vace, run_vaeo,
    AgentConfig, QTable, RunSettings, VaceConfig,
};
use eigenopt::evaluation::{median_ci, RunResult};
use eigenopt::gridworld::{build_layout, step, transition_matrix, uniform_policy, Action, EnvMode, GridLayout, State};
use eigenopt::harness::{eigenoptions_for, run_cell, typical_run, Algorithm, ExperimentConfig};
use eigenopt::linalg::Matrix;
use eigenopt::options::{build_bottleneck_options, intrinsic_reward, OptionDef, OptionKind, OptionLearnConfig};
use eigenopt::representation::{learn_sr_with_checkpoints, sr_closed_form, top_eigenvectors, FeatureMap, SRLearnerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

mod common;

const LAYOUTS: [&str; 2] = ["four_rooms", "nine_rooms"];
const CONFIGS: [&str; 4] = ["A", "B", "C", "D"];

struct Report {
    results: Vec<bool>,
    max_q: f64,
    min_q: f64,
}

impl Report {
    fn record(&mut self, n: usize, pass: bool, detail: String) {
        println!("criterion {n}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
        self.results.push(pass);
    }

    fn track(&mut self, runs: &[RunResult]) {
        for r in runs {
            for s in 0..r.q_table.n_states() {
                for &v in r.q_table.row(State(s)) {
                    self.max_q = self.max_q.max(v);
                    self.min_q = self.min_q.min(v);
                }
            }
        }
    }
}

fn load(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn max_abs(m: &Matrix, other: &Matrix) -> f64 {
    m.as_slice().iter().zip(other.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn random_walk(layout: &GridLayout, n: usize, seed: u64) -> Vec<eigenopt::gridworld::Transition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = State(rng.gen_range(0..layout.num_states()));
    (0..n)
        .map(|_| {
            let t = step(layout, EnvMode::GoalFree, s, Action::ALL[rng.gen_range(0..4)]);
            s = t.next_state;
            t
        })
        .collect()
}

/// Runs every (config id, algorithm, seed) cell of `cfg`; results are
/// grouped per config id in `algorithms` order.
fn sweep(cfg: &ExperimentConfig) -> Vec<(String, Vec<Vec<RunResult>>)> {
    let layout = cfg.layout().unwrap();
    let eigen = eigenoptions_for(&layout, cfg.eigenoption_count(), &cfg.option_learning, cfg.option_seed).unwrap().options;
    let bottleneck = build_bottleneck_options(&layout).unwrap();
    let seeds = cfg.seeds.to_vec();
    cfg.config_ids
        .iter()
        .map(|id| {
            let task = cfg.task(&layout, id).unwrap();
            let groups = cfg
                .algorithms
                .iter()
                .map(|&alg| {
                    seeds.par_iter().map(|&seed| run_cell(&layout, &task, alg, cfg, &eigen, &bottleneck, seed)).collect()
                })
                .collect();
            (id.clone(), groups)
        })
        .collect()
}

fn mean_auc(runs: &[RunResult]) -> f64 {
    runs.iter().map(RunResult::area_under_curve).sum::<f64>() / runs.len() as f64
}

fn criterion_1(rep: &mut Report) {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    for name in LAYOUTS {
        let l = build_layout(name).unwrap();
        let p = transition_matrix(&l, &uniform_policy(&l)).unwrap();
        worst = worst.max(sr_closed_form(&p, 0.99).unwrap().fixed_point_residual(&p));
    }
    let secs = t0.elapsed().as_secs_f64();
    rep.record(1, worst <= 1e-10 && secs < 1.0, format!("max residual {worst:.2e}, {secs:.3} s"));
}

fn criterion_2(rep: &mut Report) {
    let t0 = Instant::now();
    let l = build_layout("four_rooms").unwrap();
    let p = transition_matrix(&l, &uniform_policy(&l)).unwrap();
    let truth = sr_closed_form(&p, 0.99).unwrap();
    let data = random_walk(&l, 50_000, 0);
    let cfg = SRLearnerConfig::default();
    let (last, snaps) = learn_sr_with_checkpoints(&data, l.num_states(), &cfg, &[10]).unwrap();
    let d10 = max_abs(&snaps[0].1.values, &truth.values);
    let d100 = max_abs(&last.values, &truth.values);
    let limit = 0.05 * truth.values.norm_inf();
    let secs = t0.elapsed().as_secs_f64();
    rep.record(
        2,
        d100 <= limit && d100 < d10 && secs < 30.0,
        format!("deviation {d100:.3} at sweep 100 (limit {limit:.3}), {d10:.3} at sweep 10, {secs:.1} s"),
    );
}

fn criterion_3(rep: &mut Report) {
    let (mut res, mut orth): (f64, f64) = (0.0, 0.0);
    let mut identical = true;
    for name in LAYOUTS {
        let l = build_layout(name).unwrap();
        let p = transition_matrix(&l, &uniform_policy(&l)).unwrap();
        let psi = sr_closed_form(&p, 0.99).unwrap();
        let m = psi.values.symmetrized();
        let pairs = top_eigenvectors(&psi, 24).unwrap();
        for a in &pairs {
            let mv = m.matvec(&a.vector);
            res = res.max(mv.iter().zip(&a.vector).map(|(x, y)| (x - a.value * y).abs()).fold(0.0, f64::max));
            for b in &pairs {
                if a.rank != b.rank {
                    orth = orth.max(a.vector.iter().zip(&b.vector).map(|(x, y)| x * y).sum::<f64>().abs());
                }
            }
        }
        let again = top_eigenvectors(&psi, 24).unwrap();
        identical &= pairs.iter().zip(&again).all(|(a, b)| {
            a.value.to_bits() == b.value.to_bits() && a.vector.iter().zip(&b.vector).all(|(x, y)| x.to_bits() == y.to_bits())
        });
    }
    rep.record(
        3,
        res <= 1e-8 && orth <= 1e-8 && identical,
        format!("max residual {res:.2e}, max |dot| {orth:.2e}, bit-identical {identical}"),
    );
}

fn criterion_4(rep: &mut Report) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, k, doors) in [("four_rooms", 6, 8), ("nine_rooms", 24, 24)] {
        let l = build_layout(name).unwrap();
        let n = l.num_states();
        let bottleneck = build_bottleneck_options(&l).unwrap();
        let eigen = eigenoptions_for(&l, k, &OptionLearnConfig::default(), 0).unwrap();
        let documented = eigen.options.len() + eigen.rejected.len() == k && eigen.rejected.iter().all(|(_, why)| !why.is_empty());
        let terminate = |opts: &[OptionDef]| {
            opts.iter().all(|o| o.initiation_set().into_iter().all(|s| o.steps_to_termination(&l, s).is_some_and(|t| t <= n)))
        };
        ok &= bottleneck.len() == doors && documented && terminate(&bottleneck) && terminate(&eigen.options);
        let rejected: Vec<String> = eigen.rejected.iter().map(|(r, why)| format!("rank {r}: {why}")).collect();
        parts.push(format!(
            "{name}: {} bottleneck, {} of {k} eigenoptions, rejected [{}]",
            bottleneck.len(),
            eigen.options.len(),
            rejected.join("; ")
        ));
    }
    rep.record(4, ok, parts.join("; "));
}

fn criterion_5(rep: &mut Report) {
    let l = build_layout("four_rooms").unwrap();
    let cfg = AgentConfig::default();
    let settings = RunSettings { n_episodes: 50, ..Default::default() };
    let pre_discovery = VaceConfig { n_steps: usize::MAX, ..Default::default() };
    let mut checked = 0;
    let mut ok = true;
    for id in CONFIGS {
        let task = eigenopt::gridworld::canonical_task(&l, id).unwrap();
        for seed in 0..10 {
            let base = run_qlearning(&l, &task, &cfg, &settings, seed);
            let others = [
                run_vaeo(&l, &task, &[], &cfg, &settings, seed),
                run_eo_exploration(&l, &task, &[], &cfg, &settings, seed),
                run_vace(&l, &task, &cfg, &pre_discovery, &settings, seed),
                run_vace(&l, &task, &cfg, &VaceConfig { learn_option_values: false, ..pre_discovery }, &settings, seed),
            ];
            for r in &others {
                checked += 1;
                ok &= r.steps_to_goal == base.steps_to_goal && r.q_table.to_csv() == base.q_table.to_csv();
            }
        }
    }
    rep.record(5, ok, format!("{checked} runs compared against Q-learning"));
}

fn criterion_6(rep: &mut Report) {
    let rows = common::chain_option_values(3000, 0);
    let err = rows.iter().map(|(_, got, want)| (got - want).abs()).fold(0.0, f64::max);
    rep.record(6, err <= 1e-3, format!("max |Q(s,o) - enumeration| {err:.2e} over {} states", rows.len()));
}

fn criterion_7(rep: &mut Report) {
    let t0 = Instant::now();
    let mut cfg = load("four_rooms_vaeo.toml");
    cfg.algorithms = vec![Algorithm::Qlearning, Algorithm::Eo, Algorithm::VaeoEigen];
    let (mut beats_eo, mut beats_q) = (0, 0);
    let mut parts = Vec::new();
    for (id, groups) in sweep(&cfg) {
        rep.track(groups.iter().flatten().cloned().collect::<Vec<_>>().as_slice());
        let (q, eo, vaeo) = (mean_auc(&groups[0]), mean_auc(&groups[1]), mean_auc(&groups[2]));
        beats_eo += usize::from(vaeo < eo);
        beats_q += usize::from(vaeo < q);
        parts.push(format!("{id}: vaeo {vaeo:.0} eo {eo:.0} q {q:.0}"));
    }
    let secs = t0.elapsed().as_secs_f64();
    rep.record(
        7,
        beats_eo >= 3 && beats_q == 4 && secs < 600.0,
        format!("vaeo < eo in {beats_eo}/4, vaeo < q in {beats_q}/4; {}; {secs:.1} s", parts.join(", ")),
    );
}

fn criterion_8(rep: &mut Report) {
    let cfg = load("four_rooms_credit.toml");
    let mut wins = 0;
    let mut parts = Vec::new();
    for (id, groups) in sweep(&cfg) {
        rep.track(groups.iter().flatten().cloned().collect::<Vec<_>>().as_slice());
        let at5 = |runs: &[RunResult]| runs.iter().map(|r| r.steps_to_goal[4] as f64).sum::<f64>() / runs.len() as f64;
        let (eigen, bottleneck) = (at5(&groups[0]), at5(&groups[1]));
        wins += usize::from(eigen < bottleneck);
        parts.push(format!("{id}: eigen {eigen:.1} bottleneck {bottleneck:.1}"));
    }
    rep.record(8, wins >= 2, format!("eigen below bottleneck at episode 5 in {wins}/4; {}", parts.join(", ")));
}

fn criteria_9_and_10(rep: &mut Report) {
    let mut cfg = load("nine_rooms_vace.toml");
    cfg.algorithms = vec![Algorithm::Ceo, Algorithm::Vace];
    cfg.snapshot_episodes = vec![20];
    let results = sweep(&cfg);
    let (mut median_ok, mut count_ok) = (0, 0);
    let (mut p9, mut p10) = (Vec::new(), Vec::new());
    for (id, groups) in &results {
        rep.track(groups.iter().flatten().cloned().collect::<Vec<_>>().as_slice());
        let tail_median = |runs: &[RunResult]| {
            let curves: Vec<Vec<f64>> = runs.iter().map(|r| r.steps_to_goal.iter().map(|&s| s as f64).collect()).collect();
            let refs: Vec<&[f64]> = curves.iter().map(Vec::as_slice).collect();
            let med = median_ci(&refs, cfg.confidence).unwrap().stat;
            let tail = &med[med.len() - med.len().div_ceil(4)..];
            tail.iter().sum::<f64>() / tail.len() as f64
        };
        let (ceo, vace) = (tail_median(&groups[0]), tail_median(&groups[1]));
        median_ok += usize::from(vace <= ceo);
        p9.push(format!("{id}: vace {vace:.1} ceo {ceo:.1}"));

        let count = |runs: &[RunResult]| typical_run(runs).snapshot_at(20).unwrap().positive_count();
        let (ceo_n, vace_n) = (count(&groups[0]), count(&groups[1]));
        count_ok += usize::from(vace_n > ceo_n);
        p10.push(format!("{id}: vace {vace_n} ceo {ceo_n}"));
    }
    let n = results.len();
    rep.record(9, median_ok == n, format!("final-quarter median steps, vace <= ceo in {median_ok}/{n}; {}", p9.join(", ")));
    rep.record(10, count_ok == n, format!("positive-value states at episode 20, vace > ceo in {count_ok}/{n}; {}", p10.join(", ")));
}

fn criterion_11(rep: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();

    // antisymmetry and telescoping of the intrinsic reward
    let l = build_layout("four_rooms").unwrap();
    let p = transition_matrix(&l, &uniform_policy(&l)).unwrap();
    let psi = sr_closed_form(&p, 0.99).unwrap();
    let pairs = top_eigenvectors(&psi, 6).unwrap();
    let mut anti = true;
    for e in pairs.iter().map(|p| &p.vector) {
        for s in l.states() {
            for t in l.states() {
                anti &= intrinsic_reward(e, FeatureMap::Tabular, s, t) == -intrinsic_reward(e, FeatureMap::Tabular, t, s);
            }
        }
    }
    let mut tele: f64 = 0.0;
    for _ in 0..200 {
        let e: Vec<f64> = (0..l.num_states()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let start = State(rng.gen_range(0..l.num_states()));
        let (mut s, mut total) = (start, 0.0);
        for _ in 0..rng.gen_range(1..200) {
            let t = step(&l, EnvMode::GoalFree, s, Action::ALL[rng.gen_range(0..4)]);
            total += intrinsic_reward(&e, FeatureMap::Tabular, t.state, t.next_state);
            s = t.next_state;
        }
        tele = tele.max((total - (e[s.index()] - e[start.index()])).abs());
    }
    if !anti || tele > 1e-9 {
        failures.push(format!("intrinsic reward (antisymmetric {anti}, telescoping error {tele:.1e})"));
    }

    // termination endpoints of the intra-option target
    let chain = common::corridor(8);
    let n = chain.num_states();
    let init: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let term: Vec<bool> = init.iter().map(|b| !b).collect();
    let o = OptionDef::new(&chain, 0, OptionKind::Eigen { rank: 2 }, init, vec![Action::Right; n], term).unwrap();
    let options = vec![o.clone(), OptionDef::primitive(1, Action::Left, n)];
    let mut beta_ok = true;
    let mut avail = Vec::new();
    for _ in 0..200 {
        let mut q = QTable::with_options(n, &options);
        for s in 0..n {
            for c in 0..6 {
                *q.get_mut(State(s), c) = rng.gen();
            }
        }
        let s = State(rng.gen_range(0..n));
        available_into(&options, s, &mut avail);
        let u = intra_option_target(&q, s, option_column(0), &o, &avail, false);
        let expect = if o.terminates_at(s) {
            avail.iter().map(|&c| q.get(s, c)).fold(f64::NEG_INFINITY, f64::max)
        } else {
            q.get(s, option_column(0))
        };
        beta_ok &= u == expect && intra_option_target(&q, s, option_column(0), &o, &avail, true) == 0.0;
    }
    if !beta_ok {
        failures.push("intra-option target endpoints".into());
    }

    // every Q-table from the sweeps above
    let bound = 1.0 / (1.0 - AgentConfig::default().gamma);
    if rep.min_q < 0.0 || rep.max_q > bound {
        failures.push(format!("Q outside [0, {bound}]: [{}, {}]", rep.min_q, rep.max_q));
    }

    let (mean_cov, median_cov) = common::band_coverage(2000, 100, 11);
    if (mean_cov - 0.99).abs() > 0.03 || (median_cov - 0.99).abs() > 0.03 {
        failures.push(format!("coverage mean {mean_cov:.3} median {median_cov:.3}"));
    }

    let detail = if failures.is_empty() {
        format!(
            "antisymmetry, telescoping {tele:.1e}, target endpoints, Q in [{:.3}, {:.3}], coverage mean {mean_cov:.3} median {median_cov:.3}",
            rep.min_q, rep.max_q
        )
    } else {
        failures.join("; ")
    };
    rep.record(11, failures.is_empty(), detail);
}

fn main() {
    let t0 = Instant::now();
    let mut rep = Report { results: Vec::new(), max_q: f64::NEG_INFINITY, min_q: f64::INFINITY };
    criterion_1(&mut rep);
    criterion_2(&mut rep);
    criterion_3(&mut rep);
    criterion_4(&mut rep);
    criterion_5(&mut rep);
    criterion_6(&mut rep);
    criterion_7(&mut rep);
    criterion_8(&mut rep);
    criteria_9_and_10(&mut rep);
    criterion_11(&mut rep);
    let passed = rep.results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed in {:.1} s", rep.results.len(), t0.elapsed().as_secs_f64());
}
