//! Cartesian hyperparameter grid over the four ablation cells.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::OptimizerKind;

use super::config::{read, KeyValues, RunConfig};
use super::presets::CellKey;
use super::run::{load_report, run_dir, run_single, RunReport, REPORT_JSON};

pub const RESULTS_FILE: &str = "grid_results.jsonl";
pub const LEADERBOARD_FILE: &str = "leaderboard.tsv";
pub const BEST_DIR: &str = "best";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub optimizers: Vec<OptimizerKind>,
    pub learning_rates: Vec<f64>,
    pub layers: Vec<usize>,
    pub negatives: Vec<usize>,
    pub epochs: Vec<usize>,
    pub cells: Vec<CellKey>,
    /// Runs executed concurrently.
    pub workers: usize,
}

impl GridSpec {
    /// A single point at the base config's values, over all four cells.
    pub fn single_point(base: &RunConfig) -> Self {
        Self {
            optimizers: vec![base.training.optimizer],
            learning_rates: vec![base.training.learning_rate],
            layers: vec![base.encoder.n_layers],
            negatives: vec![base.training.n_negatives],
            epochs: vec![base.training.n_epochs],
            cells: CellKey::ALL.to_vec(),
            workers: 1,
        }
    }

    /// The large search: 2 optimizers, 5 learning rates, 3 depths, 3 negative
    /// counts and 4 epoch budgets.
    pub fn large_search() -> Self {
        Self {
            optimizers: vec![OptimizerKind::Adam, OptimizerKind::Sgd],
            learning_rates: vec![0.1, 0.5, 1.0, 10.0, 20.0],
            layers: vec![1, 2, 3],
            negatives: vec![5, 50, 100],
            epochs: vec![10, 500, 2000, 3000],
            cells: CellKey::ALL.to_vec(),
            workers: 1,
        }
    }

    pub fn cardinality(&self) -> usize {
        self.optimizers.len()
            * self.learning_rates.len()
            * self.layers.len()
            * self.negatives.len()
            * self.epochs.len()
            * self.cells.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, len) in [
            ("grid.optimizer", self.optimizers.len()),
            ("grid.learning_rate", self.learning_rates.len()),
            ("grid.layers", self.layers.len()),
            ("grid.negatives", self.negatives.len()),
            ("grid.epochs", self.epochs.len()),
            ("grid.cells", self.cells.len()),
        ] {
            if len == 0 {
                return Err(Error::Config(format!("{name} must not be empty")));
            }
        }
        if self.workers == 0 {
            return Err(Error::Config("grid.workers must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn from_keys(kv: &mut KeyValues, base: &RunConfig) -> Result<Self> {
        let mut g = match kv.take("grid.preset").as_deref() {
            None | Some("none") => GridSpec::single_point(base),
            Some("large") => GridSpec::large_search(),
            Some(other) => return Err(Error::Config(format!("unknown grid.preset '{other}'"))),
        };
        if let Some(v) = kv.list("grid.optimizer")? {
            g.optimizers = v;
        }
        if let Some(v) = kv.list("grid.learning_rate")? {
            g.learning_rates = v;
        }
        if let Some(v) = kv.list("grid.layers")? {
            g.layers = v;
        }
        if let Some(v) = kv.list("grid.negatives")? {
            g.negatives = v;
        }
        if let Some(v) = kv.list("grid.epochs")? {
            g.epochs = v;
        }
        if let Some(v) = kv.list("grid.cells")? {
            g.cells = v;
        }
        g.workers = kv.parse_or("grid.workers", g.workers)?;
        g.validate()?;
        Ok(g)
    }

    /// Reads the base run and the `grid.*` keys from one file.
    pub fn parse_file(text: &str) -> Result<(RunConfig, GridSpec)> {
        let mut kv = KeyValues::parse(text)?;
        let base = RunConfig::from_keys(&mut kv)?;
        let grid = GridSpec::from_keys(&mut kv, &base)?;
        kv.finish()?;
        Ok((base, grid))
    }

    pub fn load(path: &Path) -> Result<(RunConfig, GridSpec)> {
        Self::parse_file(&read(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub cell: CellKey,
    pub config: RunConfig,
}

/// Every grid configuration, cells outermost, epochs innermost.
pub fn enumerate_grid(base: &RunConfig, spec: &GridSpec) -> Result<Vec<GridPoint>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.cardinality());
    for &cell in &spec.cells {
        for &opt in &spec.optimizers {
            for &lr in &spec.learning_rates {
                for &layers in &spec.layers {
                    for &neg in &spec.negatives {
                        for &epochs in &spec.epochs {
                            let mut c = base.clone();
                            c.encoder.use_weights = cell.use_weights;
                            c.encoder.init = cell.init.scale();
                            c.encoder.n_layers = layers;
                            c.training.optimizer = opt;
                            c.training.learning_rate = lr;
                            c.training.n_negatives = neg;
                            c.training.n_epochs = epochs;
                            out.push(GridPoint {
                                index: out.len(),
                                cell,
                                config: c,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// One line of the results ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub index: usize,
    pub cell: CellKey,
    pub run_id: String,
    pub config: RunConfig,
    pub validation_hits1: Option<f64>,
    pub test_hits1: Option<f64>,
    pub error: Option<String>,
    /// Taken from an existing report instead of being re-run.
    pub resumed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub entries: Vec<GridEntry>,
    /// Highest validation H@1 per cell; earlier grid points win ties.
    pub best: Vec<(CellKey, GridEntry)>,
}

fn entry(point: &GridPoint, result: Result<(RunReport, bool)>) -> GridEntry {
    let mut e = GridEntry {
        index: point.index,
        cell: point.cell,
        run_id: point.config.run_id(),
        config: point.config.clone(),
        validation_hits1: None,
        test_hits1: None,
        error: None,
        resumed: false,
    };
    match result {
        Ok((report, resumed)) => {
            e.validation_hits1 = report.validation.as_ref().map(|v| v.mean.hits(1));
            e.test_hits1 = Some(report.test.mean.hits(1));
            e.resumed = resumed;
        }
        Err(err) => e.error = Some(format!("{}: {err}", err.category())),
    }
    e
}

pub(crate) fn run_or_resume(cfg: &RunConfig, data_root: Option<&Path>) -> Result<(RunReport, bool)> {
    let dir = run_dir(cfg);
    if dir.join(REPORT_JSON).is_file() {
        if let Ok(r) = load_report(&dir) {
            if r.config.run_id() == cfg.run_id() {
                return Ok((r, true));
            }
        }
    }
    run_single(cfg, data_root).map(|r| (r.report, false))
}

pub(crate) fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// Runs (or resumes) every grid point; failed runs are recorded and skipped.
pub fn run_grid(base: &RunConfig, spec: &GridSpec, data_root: Option<&Path>) -> Result<GridOutcome> {
    let points = enumerate_grid(base, spec)?;
    let out_dir = base.output.dir.clone();
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let ledger_path = out_dir.join(RESULTS_FILE);

    let (tx, rx) = mpsc::channel::<GridEntry>();
    let writer = {
        let ledger_path = ledger_path.clone();
        std::thread::spawn(move || -> Result<Vec<GridEntry>> {
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&ledger_path)
                .map_err(|e| Error::io(&ledger_path, e))?;
            let mut all = Vec::new();
            for e in rx {
                let line = serde_json::to_string(&e)?;
                writeln!(file, "{line}").map_err(|err| Error::io(&ledger_path, err))?;
                all.push(e);
            }
            Ok(all)
        })
    };
    pool(spec.workers)?.install(|| {
        points.par_iter().for_each_with(tx, |tx, p| {
            let _ = tx.send(entry(p, run_or_resume(&p.config, data_root)));
        })
    });
    let mut entries = writer
        .join()
        .map_err(|_| Error::Invalid("grid results writer panicked".into()))??;
    entries.sort_by_key(|e| e.index);

    let mut best = Vec::new();
    for &cell in &spec.cells {
        let winner = entries
            .iter()
            .filter(|e| e.cell == cell)
            .filter_map(|e| e.validation_hits1.map(|v| (v, e)))
            .fold(None::<(f64, &GridEntry)>, |acc, (v, e)| match acc {
                Some((bv, _)) if bv >= v => acc,
                _ => Some((v, e)),
            });
        if let Some((_, e)) = winner {
            best.push((cell, e.clone()));
        }
    }
    write_leaderboard(&out_dir, &entries)?;
    let best_dir = out_dir.join(BEST_DIR);
    fs::create_dir_all(&best_dir).map_err(|e| Error::io(&best_dir, e))?;
    for (cell, e) in &best {
        let name = format!("{}.txt", cell.to_string().replace('/', "-"));
        let path = best_dir.join(name);
        fs::write(&path, e.config.to_text()).map_err(|err| Error::io(&path, err))?;
    }
    Ok(GridOutcome { entries, best })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into())
}

/// Per cell, sorted by validation H@1 (failed or unvalidated runs last).
pub fn leaderboard(entries: &[GridEntry]) -> String {
    let mut rows: Vec<&GridEntry> = entries.iter().collect();
    rows.sort_by(|a, b| {
        a.cell.cmp(&b.cell).then_with(|| {
            let key = |e: &GridEntry| e.validation_hits1.unwrap_or(f64::NEG_INFINITY);
            key(b).total_cmp(&key(a)).then(a.index.cmp(&b.index))
        })
    });
    let mut s = String::from(
        "cell\trun\toptimizer\tlr\tlayers\tnegatives\tepochs\tval_h1\ttest_h1\tstatus\n",
    );
    for e in rows {
        let c = &e.config;
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            e.cell,
            e.run_id,
            c.training.optimizer,
            c.training.learning_rate,
            c.encoder.n_layers,
            c.training.n_negatives,
            c.training.n_epochs,
            fmt_opt(e.validation_hits1),
            fmt_opt(e.test_hits1),
            e.error.as_deref().unwrap_or("ok"),
        ));
    }
    s
}

fn write_leaderboard(dir: &Path, entries: &[GridEntry]) -> Result<()> {
    let path = dir.join(LEADERBOARD_FILE);
    fs::write(&path, leaderboard(entries)).map_err(|e| Error::io(&path, e))
}
