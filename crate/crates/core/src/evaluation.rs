//! Run records, confidence bands and value-propagation diagnostics.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

use crate::agents::{positive_value_mask, Discovery, QTable};
use crate::error::{Error, Result};
use crate::gridworld::{GridLayout, State};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunMeta {
    pub seed: u64,
    pub algorithm: String,
    pub env: String,
    pub config_id: String,
}

/// Value and visitation state after a given episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// 1-based episode after which the snapshot was taken.
    pub episode: usize,
    /// Cumulative visit counts per state.
    pub visitation: Vec<u64>,
    pub positive_value: Vec<bool>,
}

impl Snapshot {
    /// Visit counts scaled to `[0, 1]` by the largest count.
    pub fn normalized_visitation(&self) -> Vec<f64> {
        let max = self.visitation.iter().copied().max().unwrap_or(0);
        if max == 0 {
            return vec![0.0; self.visitation.len()];
        }
        self.visitation.iter().map(|&c| c as f64 / max as f64).collect()
    }

    pub fn positive_count(&self) -> usize {
        self.positive_value.iter().filter(|&&b| b).count()
    }
}

/// Per-episode record of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub meta: RunMeta,
    pub steps_to_goal: Vec<usize>,
    /// Environment steps taken up to the end of each episode.
    pub wall_steps: Vec<usize>,
    /// Options available during each episode.
    pub n_options: Vec<usize>,
    pub snapshots: Vec<Snapshot>,
    pub q_table: QTable,
    pub discoveries: Vec<Discovery>,
}

/// Header of the per-run CSV.
pub const RUN_CSV_HEADER: [&str; 8] =
    ["seed", "algorithm", "env", "config_id", "episode", "steps_to_goal", "wall_steps_elapsed", "n_options"];

#[derive(Debug, Serialize, Deserialize)]
struct RunRow {
    seed: u64,
    algorithm: String,
    env: String,
    config_id: String,
    episode: usize,
    steps_to_goal: usize,
    wall_steps_elapsed: usize,
    n_options: usize,
}

impl RunResult {
    pub fn new(meta: RunMeta, q_table: QTable) -> Self {
        RunResult {
            meta,
            steps_to_goal: Vec::new(),
            wall_steps: Vec::new(),
            n_options: Vec::new(),
            snapshots: Vec::new(),
            q_table,
            discoveries: Vec::new(),
        }
    }

    pub fn n_episodes(&self) -> usize {
        self.steps_to_goal.len()
    }

    /// Sum of steps-to-goal over all episodes.
    pub fn area_under_curve(&self) -> f64 {
        self.steps_to_goal.iter().map(|&s| s as f64).sum()
    }

    pub fn snapshot_at(&self, episode: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.episode == episode)
    }

    /// One CSV row per episode (episodes are 1-based).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for i in 0..self.n_episodes() {
            wr.serialize(RunRow {
                seed: self.meta.seed,
                algorithm: self.meta.algorithm.clone(),
                env: self.meta.env.clone(),
                config_id: self.meta.config_id.clone(),
                episode: i + 1,
                steps_to_goal: self.steps_to_goal[i],
                wall_steps_elapsed: self.wall_steps[i],
                n_options: self.n_options[i],
            })?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the episode rows written by [`RunResult::write_csv`]. Snapshots
    /// and the Q-table are not part of the CSV and come back empty.
    pub fn read_csv<R: Read>(r: R) -> Result<RunResult> {
        let mut rd = csv::Reader::from_reader(r);
        let mut result: Option<RunResult> = None;
        for row in rd.deserialize() {
            let row: RunRow = row?;
            let res = result.get_or_insert_with(|| {
                RunResult::new(
                    RunMeta { seed: row.seed, algorithm: row.algorithm.clone(), env: row.env.clone(), config_id: row.config_id.clone() },
                    QTable::new(0),
                )
            });
            if row.episode != res.n_episodes() + 1 {
                return Err(Error::Parse(format!("episode {} out of order", row.episode)));
            }
            res.steps_to_goal.push(row.steps_to_goal);
            res.wall_steps.push(row.wall_steps_elapsed);
            res.n_options.push(row.n_options);
        }
        result.ok_or_else(|| Error::Parse("run CSV has no rows".into()))
    }
}

/// Per-episode statistic with a confidence band.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub stat: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n_runs: usize,
    /// How the statistic and band were computed.
    pub method: String,
}

impl AggregateCurve {
    pub fn len(&self) -> usize {
        self.stat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stat.is_empty()
    }

    /// CSV with columns `episode,stat,lo,hi,n`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["episode", "stat", "lo", "hi", "n"])?;
        for i in 0..self.len() {
            wr.write_record([
                (i + 1).to_string(),
                format!("{}", self.stat[i]),
                format!("{}", self.lo[i]),
                format!("{}", self.hi[i]),
                self.n_runs.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<AggregateCurve> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["episode", "stat", "lo", "hi", "n"] {
            return Err(Error::Parse(format!("unexpected aggregate header {headers:?}")));
        }
        let mut curve = AggregateCurve { stat: vec![], lo: vec![], hi: vec![], n_runs: 0, method: String::new() };
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("bad value in aggregate row {}", i + 1)))
            };
            curve.stat.push(num(1)?);
            curve.lo.push(num(2)?);
            curve.hi.push(num(3)?);
            curve.n_runs = num(4)? as usize;
        }
        if curve.is_empty() {
            return Err(Error::Parse("aggregate CSV has no rows".into()));
        }
        Ok(curve)
    }
}

fn episode_columns(curves: &[&[f64]]) -> Result<usize> {
    if curves.len() < 2 {
        return Err(Error::Validation(format!("aggregation needs at least 2 runs, got {}", curves.len())));
    }
    let len = curves[0].len();
    if curves.iter().any(|c| c.len() != len) {
        return Err(Error::Validation("runs have different episode counts".into()));
    }
    Ok(len)
}

fn check_confidence(confidence: f64) -> Result<()> {
    if confidence > 0.0 && confidence < 1.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("confidence {confidence} outside (0, 1)")))
    }
}

/// Two-sided standard-normal critical value for `confidence`.
pub fn normal_critical_value(confidence: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + confidence / 2.0)
}

/// Pointwise mean with a normal-approximation band `mean ± z·s/√n`.
pub fn mean_ci(curves: &[&[f64]], confidence: f64) -> Result<AggregateCurve> {
    check_confidence(confidence)?;
    let len = episode_columns(curves)?;
    let n = curves.len() as f64;
    let z = normal_critical_value(confidence);
    let mut out = AggregateCurve {
        stat: Vec::with_capacity(len),
        lo: Vec::with_capacity(len),
        hi: Vec::with_capacity(len),
        n_runs: curves.len(),
        method: format!("mean, normal-approximation {:.0}% interval (z = {z:.4})", confidence * 100.0),
    };
    for i in 0..len {
        let mean = curves.iter().map(|c| c[i]).sum::<f64>() / n;
        let var = curves.iter().map(|c| (c[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let half = z * var.sqrt() / n.sqrt();
        out.stat.push(mean);
        out.lo.push(mean - half);
        out.hi.push(mean + half);
    }
    Ok(out)
}

/// 0-based order-statistic indices `(lo, hi)` of the distribution-free
/// confidence interval for the median of `n` samples.
pub fn median_ci_ranks(n: usize, confidence: f64) -> (usize, usize) {
    let tail = (1.0 - confidence) / 2.0;
    let binom = Binomial::new(0.5, n as u64).expect("valid binomial");
    let k = (0..=n as u64).find(|&k| binom.cdf(k) >= tail).unwrap_or(0) as usize;
    let k = k.min((n - 1) / 2);
    (k, n - 1 - k)
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pointwise median with an order-statistic band.
pub fn median_ci(curves: &[&[f64]], confidence: f64) -> Result<AggregateCurve> {
    check_confidence(confidence)?;
    let len = episode_columns(curves)?;
    let n = curves.len();
    let (lo_rank, hi_rank) = median_ci_ranks(n, confidence);
    let mut out = AggregateCurve {
        stat: Vec::with_capacity(len),
        lo: Vec::with_capacity(len),
        hi: Vec::with_capacity(len),
        n_runs: n,
        method: format!(
            "median, order-statistic {:.0}% interval (ranks {}..{} of {n})",
            confidence * 100.0,
            lo_rank + 1,
            hi_rank + 1
        ),
    };
    let mut column = vec![0.0; n];
    for i in 0..len {
        for (slot, c) in column.iter_mut().zip(curves) {
            *slot = c[i];
        }
        column.sort_by(f64::total_cmp);
        out.stat.push(median_sorted(&column));
        out.lo.push(column[lo_rank]);
        out.hi.push(column[hi_rank]);
    }
    Ok(out)
}

fn steps_curves(results: &[RunResult]) -> Vec<Vec<f64>> {
    results.iter().map(|r| r.steps_to_goal.iter().map(|&s| s as f64).collect()).collect()
}

/// Mean steps-to-goal per episode with a normal-approximation band.
pub fn aggregate_mean_ci(results: &[RunResult], confidence: f64) -> Result<AggregateCurve> {
    let curves = steps_curves(results);
    let refs: Vec<&[f64]> = curves.iter().map(Vec::as_slice).collect();
    mean_ci(&refs, confidence)
}

/// Median steps-to-goal per episode with an order-statistic band.
pub fn aggregate_median(results: &[RunResult], confidence: f64) -> Result<AggregateCurve> {
    let curves = steps_curves(results);
    let refs: Vec<&[f64]> = curves.iter().map(Vec::as_slice).collect();
    median_ci(&refs, confidence)
}

/// Positive-value mask and visit counts for the current Q-table.
///
/// Option columns stay zero outside an option's initiation set, so the
/// largest entry of a row equals the best value over the actions and
/// options available there.
pub fn value_propagation_snapshot(q: &QTable, visitation: &[u64], episode: usize) -> Snapshot {
    Snapshot { episode, visitation: visitation.to_vec(), positive_value: positive_value_mask(q) }
}

/// Shortest number of steps from `start` to `goal`.
pub fn shortest_path_oracle(layout: &GridLayout, start: State, goal: State) -> Result<usize> {
    layout.bfs_distances(start, None)[goal.index()]
        .ok_or_else(|| Error::Validation(format!("{goal} unreachable from {start}")))
}

/// Per-state snapshot grid as CSV: one row per grid row, one column per
/// grid column. Walls are empty fields; open cells hold
/// `<normalized visitation>:<0|1>`.
pub fn snapshot_grid_csv(layout: &GridLayout, snap: &Snapshot) -> String {
    let norm = snap.normalized_visitation();
    let mut out = String::new();
    for r in 0..layout.height() {
        let cells: Vec<String> = (0..layout.width())
            .map(|c| match layout.state_at(r, c) {
                None => String::new(),
                Some(s) => format!("{:.6}:{}", norm[s.index()], u8::from(snap.positive_value[s.index()])),
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Parses [`snapshot_grid_csv`] output back into per-cell values:
/// `None` for walls, `Some((visitation, positive))` otherwise.
pub fn parse_snapshot_grid(text: &str) -> Result<Vec<Vec<Option<(f64, bool)>>>> {
    text.lines()
        .enumerate()
        .map(|(r, line)| {
            line.split(',')
                .map(|cell| {
                    if cell.is_empty() {
                        return Ok(None);
                    }
                    let (v, m) = cell.split_once(':').ok_or_else(|| Error::Parse(format!("bad snapshot cell '{cell}' in row {r}")))?;
                    let v: f64 = v.parse().map_err(|_| Error::Parse(format!("bad visitation '{v}' in row {r}")))?;
                    Ok(Some((v, m == "1")))
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::build_layout;

    #[test]
    fn identical_runs_have_zero_width() {
        let a = [3.0, 4.0];
        let c = mean_ci(&[&a, &a, &a], 0.99).unwrap();
        assert_eq!(c.stat, vec![3.0, 4.0]);
        assert_eq!(c.lo, c.stat);
        assert_eq!(c.hi, c.stat);
        let m = median_ci(&[&a, &a, &a], 0.99).unwrap();
        assert_eq!((m.lo.clone(), m.hi.clone()), (m.stat.clone(), m.stat.clone()));
    }

    #[test]
    fn two_run_half_width() {
        let c = mean_ci(&[&[10.0], &[20.0]], 0.99).unwrap();
        assert_eq!(c.stat[0], 15.0);
        let half = c.hi[0] - 15.0;
        // 2.5758 * 7.0711 / sqrt(2)
        assert!((half - 12.879).abs() < 0.01, "{half}");
        assert!((normal_critical_value(0.99) - 2.5758).abs() < 1e-4);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(matches!(mean_ci(&[&[1.0], &[1.0, 2.0]], 0.99), Err(Error::Validation(_))));
        assert!(matches!(median_ci(&[&[1.0]], 0.99), Err(Error::Validation(_))));
    }

    #[test]
    fn median_of_odd_count() {
        let m = median_ci(&[&[5.0], &[1.0], &[9.0], &[3.0], &[7.0]], 0.5).unwrap();
        assert_eq!(m.stat[0], 5.0);
        assert!(m.lo[0] <= 5.0 && m.hi[0] >= 5.0);
    }

    #[test]
    fn median_ranks_for_hundred_runs() {
        // independent oracle: accumulate binomial(100, 1/2) probabilities exactly
        let n = 100u32;
        let mut pmf = vec![0.0f64; n as usize + 1];
        let mut c = 1.0f64;
        for k in 0..=n {
            pmf[k as usize] = c * 0.5f64.powi(n as i32);
            c = c * (n - k) as f64 / (k + 1) as f64;
        }
        let mut cdf = 0.0;
        let mut k0 = 0;
        for (k, p) in pmf.iter().enumerate() {
            cdf += p;
            if cdf >= 0.005 {
                k0 = k;
                break;
            }
        }
        assert_eq!(k0, 37);
        // 1-based order statistics 38..63
        assert_eq!(median_ci_ranks(100, 0.99), (37, 62));
    }

    #[test]
    fn snapshot_masks() {
        let q = QTable::new(5);
        let snap = value_propagation_snapshot(&q, &[0, 2, 4, 0, 1], 3);
        assert_eq!(snap.positive_count(), 0);
        assert_eq!(snap.normalized_visitation(), vec![0.0, 0.5, 1.0, 0.0, 0.25]);
    }

    #[test]
    fn shortest_paths() {
        let l = build_layout("four_rooms").unwrap();
        let a = l.state_at(1, 1).unwrap();
        assert_eq!(shortest_path_oracle(&l, a, a).unwrap(), 0);
        assert_eq!(shortest_path_oracle(&l, a, l.state_at(1, 2).unwrap()).unwrap(), 1);
        // corner to corner through two doorways
        assert_eq!(shortest_path_oracle(&l, a, l.state_at(11, 11).unwrap()).unwrap(), 20);
    }

    #[test]
    fn run_csv_round_trip() {
        let mut r = RunResult::new(
            RunMeta { seed: 4, algorithm: "vaeo".into(), env: "four_rooms".into(), config_id: "A".into() },
            QTable::new(0),
        );
        r.steps_to_goal = vec![100, 50];
        r.wall_steps = vec![100, 150];
        r.n_options = vec![6, 6];
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&RUN_CSV_HEADER.join(",")));
        let back = RunResult::read_csv(buf.as_slice()).unwrap();
        assert_eq!((back.meta, back.steps_to_goal, back.wall_steps), (r.meta, r.steps_to_goal, r.wall_steps));
    }

    #[test]
    fn snapshot_grid_round_trip() {
        let l = build_layout("four_rooms").unwrap();
        let n = l.num_states();
        let snap = Snapshot {
            episode: 1,
            visitation: (0..n as u64).collect(),
            positive_value: (0..n).map(|i| i % 3 == 0).collect(),
        };
        let grid = parse_snapshot_grid(&snapshot_grid_csv(&l, &snap)).unwrap();
        for s in l.states() {
            let (r, c) = l.position(s);
            let (_, m) = grid[r][c].unwrap();
            assert_eq!(m, snap.positive_value[s.index()]);
        }
        assert!(grid[0][0].is_none());
    }
}
