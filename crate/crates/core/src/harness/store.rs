use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluation::{snapshot_grid_csv, AggregateCurve, RunResult};
use crate::gridworld::GridLayout;

use super::config::{Algorithm, ExperimentConfig};

/// Generator used by every run, recorded in the result metadata.
pub const RNG_IDENTITY: &str = "rand_chacha::ChaCha8Rng (rand_chacha 0.3), seeded with seed_from_u64(seed); \
     evaluation episodes use the same seed on stream 1";

/// Writes `bytes` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Layout of a results directory:
///
/// ```text
/// config.toml                      config snapshot
/// metadata.toml                    RNG identity, CI methods, typical seeds
/// run.log
/// runs/<config>/<alg>.seed<k>.csv  one row per episode
/// aggregate/<config>/<alg>.mean.csv, <alg>.median.csv
/// snapshots/<config>/<alg>.seed<k>.ep<e>.csv, <alg>.seed<k>.qtable.csv
/// plots/<config>.mean.png, plots/<config>.median.png, plots/heatmaps/...
/// ```
#[derive(Debug, Clone)]
pub struct ResultStore {
    root: PathBuf,
}

impl ResultStore {
    /// Creates the directory tree, warning when earlier results are about
    /// to be overwritten.
    pub fn create(root: &Path) -> Result<Self> {
        if root.join("runs").exists() {
            log::warn!("{} already holds results; matching files will be overwritten", root.display());
        }
        for sub in ["runs", "aggregate", "snapshots", "plots"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(ResultStore { root: root.to_path_buf() })
    }

    /// Opens an existing results directory.
    pub fn open(root: &Path) -> Result<Self> {
        if !root.is_dir() {
            return Err(Error::Validation(format!("{} is not a directory", root.display())));
        }
        Ok(ResultStore { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_path(&self, config_id: &str, algorithm: Algorithm, seed: u64) -> PathBuf {
        self.root.join("runs").join(config_id).join(format!("{algorithm}.seed{seed}.csv"))
    }

    pub fn aggregate_path(&self, config_id: &str, algorithm: &str, kind: &str) -> PathBuf {
        self.root.join("aggregate").join(config_id).join(format!("{algorithm}.{kind}.csv"))
    }

    pub fn plots_dir(&self) -> PathBuf {
        self.root.join("plots")
    }

    pub fn write_config(&self, cfg: &ExperimentConfig) -> Result<()> {
        write_atomic(&self.root.join("config.toml"), cfg.to_toml().as_bytes())
    }

    pub fn write_metadata(&self, text: &str) -> Result<()> {
        write_atomic(&self.root.join("metadata.toml"), text.as_bytes())
    }

    pub fn write_run(&self, config_id: &str, algorithm: Algorithm, run: &RunResult) -> Result<()> {
        let mut buf = Vec::new();
        run.write_csv(&mut buf)?;
        write_atomic(&self.run_path(config_id, algorithm, run.meta.seed), &buf)
    }

    pub fn read_run(&self, config_id: &str, algorithm: Algorithm, seed: u64) -> Result<RunResult> {
        RunResult::read_csv(fs::File::open(self.run_path(config_id, algorithm, seed))?)
    }

    /// Snapshot grids and final Q-table of one run.
    pub fn write_snapshots(&self, layout: &GridLayout, config_id: &str, algorithm: Algorithm, run: &RunResult) -> Result<()> {
        let dir = self.root.join("snapshots").join(config_id);
        let seed = run.meta.seed;
        for snap in &run.snapshots {
            let path = dir.join(format!("{algorithm}.seed{seed}.ep{}.csv", snap.episode));
            write_atomic(&path, snapshot_grid_csv(layout, snap).as_bytes())?;
        }
        write_atomic(&dir.join(format!("{algorithm}.seed{seed}.qtable.csv")), run.q_table.to_csv().as_bytes())
    }

    pub fn write_aggregate(&self, config_id: &str, algorithm: Algorithm, kind: &str, curve: &AggregateCurve) -> Result<()> {
        let mut buf = Vec::new();
        curve.write_csv(&mut buf)?;
        write_atomic(&self.aggregate_path(config_id, algorithm.name(), kind), &buf)
    }

    /// All aggregate curves as `(config_id, algorithm, kind, curve)`,
    /// sorted by path.
    pub fn read_aggregates(&self) -> Result<Vec<(String, String, String, AggregateCurve)>> {
        let agg = self.root.join("aggregate");
        if !agg.is_dir() {
            return Err(Error::Validation(format!("{} has no aggregate/ directory", self.root.display())));
        }
        let mut out = Vec::new();
        for cfg_dir in sorted_entries(&agg)? {
            if !cfg_dir.is_dir() {
                continue;
            }
            let config_id = file_name(&cfg_dir);
            for file in sorted_entries(&cfg_dir)? {
                let name = file_name(&file);
                let Some(stem) = name.strip_suffix(".csv") else { continue };
                let Some((algorithm, kind)) = stem.rsplit_once('.') else { continue };
                let curve = AggregateCurve::read_csv(fs::File::open(&file)?)
                    .map_err(|e| Error::Parse(format!("{}: {e}", file.display())))?;
                out.push((config_id.clone(), algorithm.to_string(), kind.to_string(), curve));
            }
        }
        if out.is_empty() {
            return Err(Error::Validation(format!("no aggregate CSVs under {}", agg.display())));
        }
        Ok(out)
    }

    /// Snapshot grid files as `(config_id, file stem, path)`.
    pub fn snapshot_files(&self) -> Result<Vec<(String, String, PathBuf)>> {
        let dir = self.root.join("snapshots");
        let mut out = Vec::new();
        if !dir.is_dir() {
            return Ok(out);
        }
        for cfg_dir in sorted_entries(&dir)? {
            if !cfg_dir.is_dir() {
                continue;
            }
            for file in sorted_entries(&cfg_dir)? {
                let name = file_name(&file);
                if let Some(stem) = name.strip_suffix(".csv").filter(|s| !s.ends_with(".qtable")) {
                    out.push((file_name(&cfg_dir), stem.to_string(), file));
                }
            }
        }
        Ok(out)
    }

    /// Appends a line to `run.log`.
    pub fn log(&self, line: &str) -> Result<()> {
        let mut f = fs::OpenOptions::new().create(true).append(true).open(self.root.join("run.log"))?;
        writeln!(f, "{line}")?;
        Ok(())
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<Vec<_>>>()?;
    v.sort();
    Ok(v)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
