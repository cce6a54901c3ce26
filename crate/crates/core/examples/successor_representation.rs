//! Closed-form SR of the uniform random walk, a TD estimate from a random
//! walk, and the top eigenvectors of the symmetrised matrix.
//!
//! cargo run --release --example successor_representation

use eigenopt::gridworld::{build_layout, step, transition_matrix, uniform_policy, Action, EnvMode, State};
use eigenopt::representation::{learn_sr_with_checkpoints, sr_closed_form, top_eigenvectors, SRLearnerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> eigenopt::Result<()> {
    let layout = build_layout("four_rooms")?;
    let p = transition_matrix(&layout, &uniform_policy(&layout))?;
    let psi = sr_closed_form(&p, 0.99)?;
    println!("fixed-point residual {:.2e}", psi.fixed_point_residual(&p));

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut s = State(0);
    let data: Vec<_> = (0..50_000)
        .map(|_| {
            let t = step(&layout, EnvMode::GoalFree, s, Action::ALL[rng.gen_range(0..4)]);
            s = t.next_state;
            t
        })
        .collect();
    let (learned, snaps) = learn_sr_with_checkpoints(&data, layout.num_states(), &SRLearnerConfig::default(), &[1, 10])?;
    let dev = |m: &eigenopt::linalg::Matrix| {
        m.as_slice().iter().zip(psi.values.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    for (sweep, m) in &snaps {
        println!("TD deviation after {sweep} sweeps: {:.3}", dev(&m.values));
    }
    println!("TD deviation after 100 sweeps: {:.3} (|Psi|_inf = {:.1})", dev(&learned.values), psi.values.norm_inf());

    for pair in top_eigenvectors(&psi, 6)? {
        println!("rank {} eigenvalue {:.4}", pair.rank, pair.value);
    }
    Ok(())
}
