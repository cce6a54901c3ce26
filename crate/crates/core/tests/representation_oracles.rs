use eigenopt::gridworld::{build_layout, step, transition_matrix, uniform_policy, Action, EnvMode, GridLayout, State, Transition};
use eigenopt::linalg::Matrix;
use eigenopt::representation::{
    learn_sr_with_checkpoints, sr_closed_form, top_eigenvectors, top_eigenvectors_of, SRLearnerConfig,
};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn random_walk(layout: &GridLayout, n: usize, seed: u64) -> Vec<Transition> {
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

#[test]
fn closed_form_matches_dense_inverse() {
    for name in ["four_rooms", "nine_rooms"] {
        let l = build_layout(name).unwrap();
        let p = transition_matrix(&l, &uniform_policy(&l)).unwrap();
        let psi = sr_closed_form(&p, 0.99).unwrap();
        assert!(psi.fixed_point_residual(&p) <= 1e-10, "{name}");

        let n = l.num_states();
        let oracle = (DMatrix::<f64>::identity(n, n) - to_na(&p) * 0.99).try_inverse().unwrap();
        let scale = oracle.amax();
        let diff = (to_na(&psi.values) - &oracle).amax();
        assert!(diff <= 1e-9 * scale, "{name}: {diff}");
        // rows of the SR sum to 1/(1-γ)
        for i in 0..n {
            let sum: f64 = psi.values.row(i).iter().sum();
            assert!((sum - 100.0).abs() < 1e-8);
        }
    }
}

#[test]
fn td_estimate_approaches_closed_form() {
    let l = build_layout("four_rooms").unwrap();
    let p = transition_matrix(&l, &uniform_policy(&l)).unwrap();
    let truth = sr_closed_form(&p, 0.99).unwrap();
    let data = random_walk(&l, 50_000, 0);
    let cfg = SRLearnerConfig::default();
    let (last, snaps) = learn_sr_with_checkpoints(&data, l.num_states(), &cfg, &[1, 50]).unwrap();
    let dev = |m: &Matrix| (to_na(m) - to_na(&truth.values)).amax();
    let (d1, d50, d100) = (dev(&snaps[0].1.values), dev(&snaps[1].1.values), dev(&last.values));
    assert!(d100 < d1, "{d100} vs {d1}");
    assert!(d100 <= 0.05 * truth.values.norm_inf(), "{d100}");
    // a fixed step size on a fixed dataset settles well before 50 sweeps
    assert!((to_na(&last.values) - to_na(&snaps[1].1.values)).amax() <= 1e-3 * d100, "{d50} vs {d100}");
}

#[test]
fn eigenpairs_match_nalgebra_on_layouts() {
    for name in ["four_rooms", "nine_rooms"] {
        let l = build_layout(name).unwrap();
        let p = transition_matrix(&l, &uniform_policy(&l)).unwrap();
        let psi = sr_closed_form(&p, 0.99).unwrap();
        let k = 24.min(l.num_states());
        let pairs = top_eigenvectors(&psi, k).unwrap();
        let m = psi.values.symmetrized();
        let mut oracle: Vec<f64> = SymmetricEigen::new(to_na(&m)).eigenvalues.iter().copied().collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        for (i, pair) in pairs.iter().enumerate() {
            assert!((pair.value - oracle[i]).abs() <= 1e-8 * oracle[0], "{name} rank {}", pair.rank);
            let mv = m.matvec(&pair.vector);
            let res = mv.iter().zip(&pair.vector).map(|(a, b)| (a - pair.value * b).abs()).fold(0.0, f64::max);
            assert!(res <= 1e-8, "{name} residual {res}");
        }
        for a in &pairs {
            for b in &pairs {
                let dot: f64 = a.vector.iter().zip(&b.vector).map(|(x, y)| x * y).sum();
                let expect = if a.rank == b.rank { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() <= 1e-8);
            }
        }
        assert_eq!(top_eigenvectors(&psi, k).unwrap(), pairs);
    }
}

fn symmetric(n: usize, entries: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = entries[(i * n + j) % entries.len()];
            m.row_mut(i)[j] = v;
            m.row_mut(j)[i] = v;
        }
    }
    m
}

proptest! {
    #[test]
    fn random_symmetric_spectra(n in 1usize..12, entries in prop::collection::vec(-5.0f64..5.0, 144)) {
        let m = symmetric(n, &entries);
        let pairs = top_eigenvectors_of(&m, n).unwrap();
        let mut oracle: Vec<f64> = SymmetricEigen::new(to_na(&m)).eigenvalues.iter().copied().collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        let scale = oracle.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        for (pair, want) in pairs.iter().zip(&oracle) {
            prop_assert!((pair.value - want).abs() <= 1e-9 * scale);
            let mv = m.matvec(&pair.vector);
            let res = mv.iter().zip(&pair.vector).map(|(a, b)| (a - pair.value * b).abs()).fold(0.0, f64::max);
            prop_assert!(res <= 1e-8 * scale);
            let first = pair.vector.iter().find(|x| x.abs() > 1e-10).copied().unwrap_or(1.0);
            prop_assert!(first > 0.0);
        }
        for w in pairs.windows(2) {
            prop_assert!(w[0].value >= w[1].value - 1e-12 * scale);
        }
    }
}
