use eigenopt::agents::{run_qlearning, AgentConfig, RunSettings};
use eigenopt::evaluation::{
    aggregate_mean_ci, aggregate_median, mean_ci, median_ci, median_ci_ranks, parse_snapshot_grid, shortest_path_oracle,
    snapshot_grid_csv, RunResult,
};
use eigenopt::gridworld::{build_layout, canonical_task};
use proptest::prelude::*;

mod common;

fn binomial(n: u32, k: u32) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Lower order-statistic index from exact binomial tail sums.
fn exact_lower_rank(n: u32, confidence: f64) -> usize {
    let total = 2f64.powi(n as i32);
    let tail = (1.0 - confidence) / 2.0;
    let mut acc = 0u128;
    for k in 0..=n {
        acc += binomial(n, k);
        if acc as f64 / total >= tail {
            return (k as usize).min((n as usize - 1) / 2);
        }
    }
    0
}

#[test]
fn median_ranks_match_exact_binomial() {
    assert_eq!(median_ci_ranks(100, 0.99), (37, 62));
    for n in 2..=120u32 {
        for conf in [0.9, 0.95, 0.99] {
            let lo = exact_lower_rank(n, conf);
            assert_eq!(median_ci_ranks(n as usize, conf), (lo, n as usize - 1 - lo), "n={n} conf={conf}");
        }
    }
}

fn curves_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..40, 1usize..6).prop_flat_map(|(n, len)| prop::collection::vec(prop::collection::vec(0.0f64..5000.0, len), n))
}

proptest! {
    #[test]
    fn wider_confidence_gives_wider_bands(curves in curves_strategy()) {
        let refs: Vec<&[f64]> = curves.iter().map(Vec::as_slice).collect();
        for agg in [mean_ci, median_ci] {
            let narrow = agg(&refs, 0.9).unwrap();
            let wide = agg(&refs, 0.99).unwrap();
            for i in 0..narrow.len() {
                prop_assert_eq!(narrow.stat[i], wide.stat[i]);
                prop_assert!(wide.lo[i] <= narrow.lo[i] && narrow.hi[i] <= wide.hi[i]);
                prop_assert!(wide.lo[i] <= wide.stat[i] && wide.stat[i] <= wide.hi[i]);
            }
        }
    }

    #[test]
    fn median_ignores_a_single_outlier(curves in curves_strategy(), huge in 1e6f64..1e9) {
        prop_assume!(curves.len() >= 3);
        let refs: Vec<&[f64]> = curves.iter().map(Vec::as_slice).collect();
        let before = median_ci(&refs, 0.99).unwrap();
        // push the largest value of the first episode further out
        let mut moved = curves.clone();
        let argmax = (0..moved.len()).max_by(|&a, &b| moved[a][0].total_cmp(&moved[b][0])).unwrap();
        moved[argmax][0] = huge;
        let refs: Vec<&[f64]> = moved.iter().map(Vec::as_slice).collect();
        let after = median_ci(&refs, 0.99).unwrap();
        prop_assert_eq!(before.stat[0], after.stat[0]);
        prop_assert_eq!(before.lo[0], after.lo[0]);
    }
}

#[test]
fn monte_carlo_coverage_is_near_nominal() {
    let (mean_cov, median_cov) = common::band_coverage(2000, 100, 11);
    assert!((mean_cov - 0.99).abs() <= 0.03, "{mean_cov}");
    assert!((median_cov - 0.99).abs() <= 0.03, "{median_cov}");
}

#[test]
fn aggregation_rejects_bad_input() {
    let one = [vec![1.0, 2.0]];
    let refs: Vec<&[f64]> = one.iter().map(Vec::as_slice).collect();
    assert!(mean_ci(&refs, 0.99).is_err());
    let ragged = [vec![1.0, 2.0], vec![1.0]];
    let refs: Vec<&[f64]> = ragged.iter().map(Vec::as_slice).collect();
    assert!(median_ci(&refs, 0.99).is_err());
    let ok = [vec![1.0], vec![2.0]];
    let refs: Vec<&[f64]> = ok.iter().map(Vec::as_slice).collect();
    assert!(mean_ci(&refs, 1.0).is_err());
}

#[test]
fn four_rooms_diagonal_is_twenty_steps() {
    let l = build_layout("four_rooms").unwrap();
    let a = l.state_at(1, 1).unwrap();
    let b = l.state_at(11, 11).unwrap();
    assert_eq!(shortest_path_oracle(&l, a, b).unwrap(), 20);
    assert_eq!(shortest_path_oracle(&l, a, a).unwrap(), 0);
}

#[test]
fn run_records_respect_oracle_and_round_trip() {
    let l = build_layout("four_rooms").unwrap();
    let task = canonical_task(&l, "B").unwrap();
    let shortest = shortest_path_oracle(&l, task.start, task.goal).unwrap();
    let settings = RunSettings { n_episodes: 8, snapshot_episodes: vec![1, 4, 8], ..Default::default() };
    let runs: Vec<RunResult> = (0..5).map(|seed| run_qlearning(&l, &task, &AgentConfig::default(), &settings, seed)).collect();
    for run in &runs {
        assert!(run.steps_to_goal.iter().all(|&s| s >= shortest));
        let mut total = 0;
        for (steps, wall) in run.steps_to_goal.iter().zip(&run.wall_steps) {
            total += steps;
            assert_eq!(*wall, total);
        }
        let mut buf = Vec::new();
        run.write_csv(&mut buf).unwrap();
        let back = RunResult::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.steps_to_goal, run.steps_to_goal);
        assert_eq!(back.meta, run.meta);

        for snap in &run.snapshots {
            let grid = parse_snapshot_grid(&snapshot_grid_csv(&l, snap)).unwrap();
            for s in l.states() {
                let (r, c) = l.position(s);
                let (_, positive) = grid[r][c].unwrap();
                assert_eq!(positive, snap.positive_value[s.index()]);
            }
            // walls stay empty
            assert!(grid[0].iter().all(Option::is_none));
        }
        // visitation is cumulative
        for w in run.snapshots.windows(2) {
            assert!(w[0].visitation.iter().zip(&w[1].visitation).all(|(a, b)| a <= b));
        }
        assert!(run.snapshots[0].visitation[task.start.index()] >= 1);
        assert!(!run.snapshots[0].positive_value[task.goal.index()]);
    }
    let mean = aggregate_mean_ci(&runs, 0.99).unwrap();
    let median = aggregate_median(&runs, 0.99).unwrap();
    assert_eq!(mean.len(), 8);
    assert_eq!(median.n_runs, 5);
}
