use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::agents::{run_credit_assignment_protocol, run_eo_exploration, run_qlearning, run_vace, run_vaeo};
use crate::error::{Error, Result};
use crate::evaluation::{aggregate_mean_ci, aggregate_median, median_ci_ranks, parse_snapshot_grid, AggregateCurve, RunResult};
use crate::gridworld::{GridLayout, TaskSpec};
use crate::options::{build_bottleneck_options, OptionDef};

use super::config::{Algorithm, ExperimentConfig, Seeds};
use super::plot::{heatmap_png, learning_curve_png, Series};
use super::store::{write_atomic, ResultStore, RNG_IDENTITY};
use super::{eigenoptions_for, EigenOptionSet};

/// One (start/goal config, algorithm, seed) cell of a sweep.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CellKey {
    pub config_id: String,
    pub algorithm: Algorithm,
    pub seed: u64,
}

/// Runs a single cell. `eigen` and `bottleneck` are the fixed option sets
/// used by the algorithms that need them. The result is labelled with the
/// config's algorithm name.
pub fn run_cell(
    layout: &GridLayout,
    task: &TaskSpec,
    algorithm: Algorithm,
    cfg: &ExperimentConfig,
    eigen: &[OptionDef],
    bottleneck: &[OptionDef],
    seed: u64,
) -> RunResult {
    let settings = cfg.run_settings();
    let agent = &cfg.agent;
    let mut result = match algorithm {
        Algorithm::Qlearning => run_qlearning(layout, task, agent, &settings, seed),
        Algorithm::Eo => run_eo_exploration(layout, task, eigen, agent, &settings, seed),
        Algorithm::VaeoEigen => run_vaeo(layout, task, eigen, agent, &settings, seed),
        Algorithm::VaeoBottleneck => run_vaeo(layout, task, bottleneck, agent, &settings, seed),
        Algorithm::Ceo | Algorithm::Vace => run_vace(layout, task, agent, &cfg.vace_for(algorithm), &settings, seed),
        Algorithm::CreditProtocolEigen => run_credit_assignment_protocol(layout, task, eigen, agent, &settings, seed),
        Algorithm::CreditProtocolBottleneck => {
            run_credit_assignment_protocol(layout, task, bottleneck, agent, &settings, seed)
        }
    };
    result.meta.algorithm = algorithm.name().to_string();
    result
}

/// Command-line overrides of a config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seeds: Option<Seeds>,
    /// Worker threads; `None` uses all cores.
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Results directory used when `--out` is not given.
pub fn default_out_dir(config_path: &Path) -> PathBuf {
    let stem = config_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    PathBuf::from("results").join(stem)
}

/// Everything a sweep produced.
#[derive(Debug)]
pub struct Experiment {
    pub out_dir: PathBuf,
    /// Runs grouped by (config id, algorithm), ordered by seed.
    pub runs: BTreeMap<(String, Algorithm), Vec<RunResult>>,
    pub eigen: Option<EigenOptionSet>,
}

#[derive(Serialize)]
struct Metadata {
    crate_version: String,
    rng: String,
    mean_band: String,
    median_band: String,
    typical_run: String,
    eigenoption_rejections: Vec<String>,
    typical_seeds: BTreeMap<String, u64>,
}

/// Loads a config, applies overrides and runs the sweep.
pub fn cmd_run(config_path: &Path, opts: &RunOptions) -> Result<Experiment> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(seeds) = &opts.seeds {
        cfg.seeds = seeds.clone();
        cfg.validate()?;
    }
    let out = opts.out.clone().unwrap_or_else(|| default_out_dir(config_path));
    run_experiment(&cfg, &out, opts.workers)
}

/// Runs every (config id, algorithm, seed) cell, in parallel across cells,
/// and writes per-run CSVs, aggregates, snapshots of the typical run and
/// plots under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, workers: Option<usize>) -> Result<Experiment> {
    cfg.validate()?;
    let store = ResultStore::create(out)?;
    store.write_config(cfg)?;
    let layout = cfg.layout()?;

    let eigen = if cfg.algorithms.iter().any(|a| a.uses_eigenoptions()) {
        let set = eigenoptions_for(&layout, cfg.eigenoption_count(), &cfg.option_learning, cfg.option_seed)?;
        for (rank, reason) in &set.rejected {
            store.log(&format!("eigenvector rank {rank} rejected: {reason}"))?;
        }
        store.log(&format!("{} eigenoptions from the top {} eigenvectors", set.options.len(), set.pairs.len()))?;
        Some(set)
    } else {
        None
    };
    let bottleneck = if cfg.algorithms.iter().any(|a| a.uses_bottleneck_options()) {
        build_bottleneck_options(&layout)?
    } else {
        Vec::new()
    };
    let eigen_options: &[OptionDef] = eigen.as_ref().map_or(&[], |e| &e.options);

    let tasks: BTreeMap<String, TaskSpec> =
        cfg.config_ids.iter().map(|id| cfg.task(&layout, id).map(|t| (id.clone(), t))).collect::<Result<_>>()?;
    let seeds = cfg.seeds.to_vec();
    let mut cells = Vec::new();
    for id in &cfg.config_ids {
        for &algorithm in &cfg.algorithms {
            cells.extend(seeds.iter().map(|&seed| CellKey { config_id: id.clone(), algorithm, seed }));
        }
    }
    store.log(&format!("running {} cells on {}", cells.len(), cfg.env))?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<(CellKey, RunResult)> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let task = &tasks[&cell.config_id];
                let run = run_cell(&layout, task, cell.algorithm, cfg, eigen_options, &bottleneck, cell.seed);
                store.write_run(&cell.config_id, cell.algorithm, &run)?;
                Ok((cell.clone(), run))
            })
            .collect::<Result<_>>()
    })?;

    let mut runs: BTreeMap<(String, Algorithm), Vec<RunResult>> = BTreeMap::new();
    for (cell, run) in results {
        runs.entry((cell.config_id, cell.algorithm)).or_default().push(run);
    }

    let mut typical_seeds = BTreeMap::new();
    for ((config_id, algorithm), group) in &runs {
        let (mean, median) = aggregates(group, cfg.confidence)?;
        store.write_aggregate(config_id, *algorithm, "mean", &mean)?;
        store.write_aggregate(config_id, *algorithm, "median", &median)?;
        let typical = typical_run(group);
        store.write_snapshots(&layout, config_id, *algorithm, typical)?;
        typical_seeds.insert(format!("{config_id}.{algorithm}"), typical.meta.seed);
        store.log(&format!(
            "{config_id} {algorithm}: {} runs, mean area under curve {:.1}",
            group.len(),
            group.iter().map(RunResult::area_under_curve).sum::<f64>() / group.len() as f64
        ))?;
    }

    let n = seeds.len();
    let (lo, hi) = median_ci_ranks(n, cfg.confidence);
    let meta = Metadata {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        rng: RNG_IDENTITY.to_string(),
        mean_band: format!("mean +/- z * s / sqrt(n), z from the normal quantile at confidence {}", cfg.confidence),
        median_band: format!(
            "median with order statistics {}..{} (1-based) of {n} runs, binomial(n, 1/2) interval at confidence {}",
            lo + 1,
            hi + 1,
            cfg.confidence
        ),
        typical_run: "median run by mean steps-to-goal over the final quarter of episodes".into(),
        eigenoption_rejections: eigen
            .as_ref()
            .map(|e| e.rejected.iter().map(|(r, why)| format!("rank {r}: {why}")).collect())
            .unwrap_or_default(),
        typical_seeds,
    };
    store.write_metadata(&toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))?)?;
    let plots = plot_store(&store)?;
    store.log(&format!("wrote {plots} plots"))?;
    Ok(Experiment { out_dir: out.to_path_buf(), runs, eigen })
}

/// Mean and median curves; a single run gets a zero-width band.
fn aggregates(group: &[RunResult], confidence: f64) -> Result<(AggregateCurve, AggregateCurve)> {
    if group.len() >= 2 {
        return Ok((aggregate_mean_ci(group, confidence)?, aggregate_median(group, confidence)?));
    }
    let stat: Vec<f64> = group[0].steps_to_goal.iter().map(|&s| s as f64).collect();
    let curve =
        AggregateCurve { lo: stat.clone(), hi: stat.clone(), stat, n_runs: 1, method: "single run".into() };
    Ok((curve.clone(), curve))
}

/// Run whose mean steps-to-goal over the final quarter of episodes is the
/// median of the group (lower median for even sizes; ties by seed).
pub fn typical_run(group: &[RunResult]) -> &RunResult {
    let score = |r: &RunResult| {
        let tail = &r.steps_to_goal[r.steps_to_goal.len() - r.steps_to_goal.len().div_ceil(4)..];
        tail.iter().sum::<usize>() as f64 / tail.len() as f64
    };
    let mut order: Vec<&RunResult> = group.iter().collect();
    order.sort_by(|a, b| score(a).total_cmp(&score(b)).then(a.meta.seed.cmp(&b.meta.seed)));
    order[(order.len() - 1) / 2]
}

/// Writes option diagnostics for the eigenoptions and bottleneck options of
/// the config's layout under `out/options/`. Returns the option counts
/// `(eigen, bottleneck)`.
pub fn cmd_inspect_options(config_path: &Path, out: Option<&Path>) -> Result<(usize, usize)> {
    let cfg = ExperimentConfig::load(config_path)?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| default_out_dir(config_path));
    inspect_options(&cfg, &out.join("options"))
}

/// See [`cmd_inspect_options`].
pub fn inspect_options(cfg: &ExperimentConfig, dir: &Path) -> Result<(usize, usize)> {
    let layout = cfg.layout()?;
    let eigen = eigenoptions_for(&layout, cfg.eigenoption_count(), &cfg.option_learning, cfg.option_seed)?;
    let bottleneck = build_bottleneck_options(&layout)?;

    for o in &eigen.options {
        let value = eigen.pair_of(o).map(|p| p.value);
        write_option(&layout, &dir.join("eigen"), o, value)?;
    }
    for o in &bottleneck {
        write_option(&layout, &dir.join("bottleneck"), o, None)?;
    }
    let mut summary = String::new();
    let _ = writeln!(summary, "layout {} ({} states)", layout.name(), layout.num_states());
    let _ = writeln!(summary, "eigenoptions: {} of {} eigenvectors", eigen.options.len(), eigen.pairs.len());
    for p in &eigen.pairs {
        let _ = writeln!(summary, "  rank {} eigenvalue {:.12}", p.rank, p.value);
    }
    for (rank, why) in &eigen.rejected {
        let _ = writeln!(summary, "  rejected rank {rank}: {why}");
    }
    let _ = writeln!(summary, "bottleneck options: {}", bottleneck.len());
    let doors: Vec<String> = layout.doorways().iter().map(|&d| format!("{:?}", layout.position(d))).collect();
    let _ = writeln!(summary, "  doorways {}", doors.join(" "));
    write_atomic(&dir.join("summary.txt"), summary.as_bytes())?;
    Ok((eigen.options.len(), bottleneck.len()))
}

/// `option_<id>.txt` holds the round-trippable option text;
/// `option_<id>.stats.txt` the eigenvalue and a histogram of trajectory
/// lengths from every initiation state.
fn write_option(layout: &GridLayout, dir: &Path, o: &OptionDef, eigenvalue: Option<f64>) -> Result<()> {
    write_atomic(&dir.join(format!("option_{}.txt", o.id())), o.to_text(layout).as_bytes())?;
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for s in o.initiation_set() {
        let k = o
            .steps_to_termination(layout, s)
            .ok_or_else(|| Error::Construction(format!("option {} does not terminate from {s}", o.id())))?;
        *hist.entry(k).or_default() += 1;
    }
    let mut text = String::new();
    let _ = writeln!(text, "option {}", o.id());
    let _ = writeln!(text, "kind {:?}", o.kind());
    if let Some(v) = eigenvalue {
        let _ = writeln!(text, "eigenvalue {v:.12}");
    }
    let _ = writeln!(text, "initiation states {}", o.initiation_set().len());
    let _ = writeln!(text, "trajectory length histogram (length count)");
    for (k, n) in hist {
        let _ = writeln!(text, "{k} {n}");
    }
    write_atomic(&dir.join(format!("option_{}.stats.txt", o.id())), text.as_bytes())
}

/// Draws learning curves for every aggregate CSV and heatmaps for every
/// snapshot grid under `dir`. Returns the number of PNGs written.
pub fn cmd_plot(dir: &Path) -> Result<usize> {
    plot_store(&ResultStore::open(dir)?)
}

fn plot_store(store: &ResultStore) -> Result<usize> {
    let aggregates = store.read_aggregates()?;
    let mut groups: BTreeMap<(String, String), Vec<(String, AggregateCurve)>> = BTreeMap::new();
    for (config_id, algorithm, kind, curve) in aggregates {
        groups.entry((config_id, kind)).or_default().push((algorithm, curve));
    }
    let plots = store.plots_dir();
    fs::create_dir_all(&plots)?;
    let mut written = 0;
    for ((config_id, kind), curves) in &groups {
        let series: Vec<Series> = curves.iter().map(|(a, c)| Series { label: a, curve: c }).collect();
        let path = plots.join(format!("{config_id}.{kind}.png"));
        learning_curve_png(&path, &format!("config {config_id}: {kind} steps to goal"), &series)?;
        written += 1;
    }
    for (config_id, stem, path) in store.snapshot_files()? {
        let grid = parse_snapshot_grid(&fs::read_to_string(&path)?)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let out = plots.join("heatmaps").join(&config_id).join(format!("{stem}.png"));
        fs::create_dir_all(out.parent().unwrap_or(&plots))?;
        heatmap_png(&out, &format!("{config_id} {stem}"), &grid)?;
        written += 1;
    }
    Ok(written)
}
