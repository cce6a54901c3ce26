//! Successor representation (closed form and TD estimate) and its leading
//! eigenvectors.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::gridworld::{State, Transition};
use crate::linalg::{lu_solve, symmetric_eigen, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrSource {
    ClosedForm,
    TdEstimate,
}

/// Successor representation `Ψ` for a fixed policy and discount.
#[derive(Debug, Clone, PartialEq)]
pub struct SRMatrix {
    pub values: Matrix,
    pub gamma: f64,
    pub source: SrSource,
}

impl SRMatrix {
    pub fn zeros(n: usize, gamma: f64) -> Self {
        SRMatrix { values: Matrix::zeros(n, n), gamma, source: SrSource::TdEstimate }
    }

    pub fn num_states(&self) -> usize {
        self.values.rows()
    }

    /// `‖(I − γP)Ψ − I‖∞` as a maximum absolute entry.
    pub fn fixed_point_residual(&self, p: &Matrix) -> f64 {
        let n = self.num_states();
        let p_psi = p.matmul(&self.values);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let id = if i == j { 1.0 } else { 0.0 };
                let r = self.values[(i, j)] - self.gamma * p_psi[(i, j)] - id;
                worst = worst.max(r.abs());
            }
        }
        worst
    }

    /// Row-major CSV, one matrix row per line, 17 significant digits.
    pub fn to_csv(&self) -> String {
        matrix_csv(&self.values)
    }
}

fn matrix_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let cells: Vec<String> = m.row(i).iter().map(|x| format!("{x:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Eigenpairs as CSV: `rank,eigenvalue,v0,v1,...`, 17 significant digits.
pub fn eigenpairs_csv(pairs: &[Eigenpair]) -> String {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&format!("{},{:.16e}", p.rank, p.value));
        for x in &p.vector {
            out.push_str(&format!(",{x:.16e}"));
        }
        out.push('\n');
    }
    out
}

/// TD learning parameters for the SR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SRLearnerConfig {
    pub eta: f64,
    pub gamma: f64,
    pub n_sweeps: usize,
}

impl Default for SRLearnerConfig {
    fn default() -> Self {
        SRLearnerConfig { eta: 0.1, gamma: 0.99, n_sweeps: 100 }
    }
}

impl SRLearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Validation(format!("SR step size {} outside (0, 1]", self.eta)));
        }
        check_gamma(self.gamma)?;
        if self.n_sweeps == 0 {
            return Err(Error::Validation("SR learner needs at least one sweep".into()));
        }
        Ok(())
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::Validation(format!("discount {gamma} outside [0, 1)")))
    }
}

/// `Ψ = (I − γP)⁻¹`, computed by LU-solving `(I − γP) Ψ = I`.
pub fn sr_closed_form(p: &Matrix, gamma: f64) -> Result<SRMatrix> {
    check_gamma(gamma)?;
    if !p.is_square() {
        return Err(Error::Validation("transition matrix must be square".into()));
    }
    let n = p.rows();
    let mut a = Matrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] -= gamma * p[(i, j)];
        }
    }
    let values = lu_solve(&a, &Matrix::identity(n))?;
    let sr = SRMatrix { values, gamma, source: SrSource::ClosedForm };
    let residual = sr.fixed_point_residual(p);
    if residual > 1e-10 {
        return Err(Error::Numerical(format!("SR fixed-point residual {residual:e} exceeds 1e-10")));
    }
    Ok(sr)
}

#[inline]
fn td_row_update(values: &mut Matrix, s: usize, s_next: usize, eta: f64, gamma: f64) {
    let n = values.cols();
    let data = values.as_mut_slice();
    if s == s_next {
        let row = &mut data[s * n..(s + 1) * n];
        for (j, v) in row.iter_mut().enumerate() {
            let id = if j == s { 1.0 } else { 0.0 };
            *v += eta * (id + gamma * *v - *v);
        }
        return;
    }
    let (row, next) = if s < s_next {
        let (lo, hi) = data.split_at_mut(s_next * n);
        (&mut lo[s * n..(s + 1) * n], &hi[..n])
    } else {
        let (lo, hi) = data.split_at_mut(s * n);
        (&mut hi[..n], &lo[s_next * n..(s_next + 1) * n])
    };
    for (v, &nv) in row.iter_mut().zip(next) {
        *v += eta * (gamma * nv - *v);
    }
    row[s] += eta;
}

/// One TD update of row `s` of `psi` from the sample `s → s_next`.
pub fn sr_td_update(psi: &mut SRMatrix, s: State, s_next: State, cfg: &SRLearnerConfig) {
    td_row_update(&mut psi.values, s.index(), s_next.index(), cfg.eta, cfg.gamma);
}

/// Learns `Ψ̂` from zero by sweeping TD updates through `dataset` in order.
pub fn learn_sr_from_dataset(dataset: &[Transition], n_states: usize, cfg: &SRLearnerConfig) -> Result<SRMatrix> {
    learn_sr_with_checkpoints(dataset, n_states, cfg, &[]).map(|(sr, _)| sr)
}

/// As [`learn_sr_from_dataset`], also returning a copy of `Ψ̂` after each
/// sweep count listed in `checkpoints`.
pub fn learn_sr_with_checkpoints(
    dataset: &[Transition],
    n_states: usize,
    cfg: &SRLearnerConfig,
    checkpoints: &[usize],
) -> Result<(SRMatrix, Vec<(usize, SRMatrix)>)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Validation("cannot learn the SR from an empty dataset".into()));
    }
    if let Some(t) = dataset.iter().find(|t| t.state.index() >= n_states || t.next_state.index() >= n_states) {
        return Err(Error::Validation(format!("transition {t:?} out of range for {n_states} states")));
    }
    let mut psi = SRMatrix::zeros(n_states, cfg.gamma);
    let mut snaps = Vec::new();
    for sweep in 1..=cfg.n_sweeps {
        for t in dataset {
            td_row_update(&mut psi.values, t.state.index(), t.next_state.index(), cfg.eta, cfg.gamma);
        }
        if checkpoints.contains(&sweep) {
            snaps.push((sweep, psi.clone()));
        }
    }
    Ok((psi, snaps))
}

/// Unit eigenvector of the symmetrised SR with its eigenvalue and 1-based
/// rank by descending eigenvalue. The first component with magnitude above
/// [`SIGN_TOLERANCE`] is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub vector: Vec<f64>,
    pub value: f64,
    pub rank: usize,
}

/// Components at or below this magnitude are skipped when fixing the sign.
pub const SIGN_TOLERANCE: f64 = 1e-10;

/// Flips `v` so its first significant component is positive.
pub fn sign_normalize(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|x| x.abs() > SIGN_TOLERANCE) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn lexicographic_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.partial_cmp(x).unwrap_or(Ordering::Equal) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Top `n` eigenpairs of `M = (Ψ + Ψᵀ)/2`, ordered by descending
/// eigenvalue. Eigenvalues within a relative `1e-10` of each other count as
/// tied and are ordered by descending lexicographic order of their
/// sign-normalised vectors.
pub fn top_eigenvectors(psi: &SRMatrix, n: usize) -> Result<Vec<Eigenpair>> {
    top_eigenvectors_of(&psi.values, n)
}

pub fn top_eigenvectors_of(matrix: &Matrix, n: usize) -> Result<Vec<Eigenpair>> {
    let dim = matrix.rows();
    if !matrix.is_square() {
        return Err(Error::Validation("eigenvectors need a square matrix".into()));
    }
    if n == 0 || n > dim {
        return Err(Error::Validation(format!("requested {n} eigenvectors of a {dim}-state SR")));
    }
    let m = matrix.symmetrized();
    let (values, vectors) = symmetric_eigen(&m)?;

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..dim)
        .rev()
        .map(|k| {
            let mut v: Vec<f64> = (0..dim).map(|i| vectors[(i, k)]).collect();
            sign_normalize(&mut v);
            (values[k], v)
        })
        .collect();

    // eigenvalues arrive sorted; reorder runs of ties
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        let tol = 1e-10 * pairs[start].0.abs().max(1.0);
        while end < pairs.len() && (pairs[start].0 - pairs[end].0).abs() <= tol {
            end += 1;
        }
        pairs[start..end].sort_by(|a, b| lexicographic_desc(&a.1, &b.1));
        start = end;
    }

    pairs
        .into_iter()
        .take(n)
        .enumerate()
        .map(|(i, (value, vector))| {
            let mv = m.matvec(&vector);
            let residual = mv.iter().zip(&vector).map(|(a, b)| (a - value * b).abs()).fold(0.0, f64::max);
            if residual > 1e-8 {
                return Err(Error::Numerical(format!("eigenpair {} residual {residual:e} exceeds 1e-8", i + 1)));
            }
            Ok(Eigenpair { vector, value, rank: i + 1 })
        })
        .collect()
}

/// Features used by the intrinsic reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureMap {
    /// One-hot indicator of the state index.
    #[default]
    Tabular,
}

impl FeatureMap {
    pub fn features(&self, s: State, n_states: usize) -> Vec<f64> {
        match self {
            FeatureMap::Tabular => {
                let mut phi = vec![0.0; n_states];
                phi[s.index()] = 1.0;
                phi
            }
        }
    }

    /// `eᵀφ(s)`.
    #[inline]
    pub fn project(&self, e: &[f64], s: State) -> f64 {
        match self {
            FeatureMap::Tabular => e[s.index()],
        }
    }
}
