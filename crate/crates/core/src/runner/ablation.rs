//! Multi-seed runs of the four weights × initialization cells per dataset,
//! aggregated into mean ± sample standard deviation.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::DirectionMetrics;

use super::config::{parse_dataset_key, read, DatasetSource, KeyValues, RunConfig};
use super::grid::{pool, run_or_resume};
use super::presets::{fine_tuned, grid_optimum, CellKey, TunedParams};
use super::run::RunReport;

pub const ABLATION_JSON: &str = "ablation.json";
pub const ABLATION_TXT: &str = "ablation.txt";

/// Where per-cell hyperparameters come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Per-dataset fine-tuned epochs, layers and learning rate.
    FineTuned,
    /// The grid optimum for every dataset.
    GridOptimum,
    /// The file's own training keys; only weights and init vary.
    Base,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fine-tuned" => Ok(Preset::FineTuned),
            "grid-optimum" => Ok(Preset::GridOptimum),
            "base" => Ok(Preset::Base),
            other => Err(Error::Config(format!("unknown ablation.preset '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationSpec {
    pub datasets: Vec<DatasetSource>,
    pub cells: Vec<CellKey>,
    pub preset: Preset,
    pub workers: usize,
}

impl AblationSpec {
    pub fn for_base(base: &RunConfig) -> Self {
        Self {
            datasets: vec![base.dataset.clone()],
            cells: CellKey::ALL.to_vec(),
            preset: Preset::FineTuned,
            workers: 1,
        }
    }

    pub fn parse_file(text: &str) -> Result<(RunConfig, AblationSpec)> {
        let mut kv = KeyValues::parse(text)?;
        let base = RunConfig::from_keys(&mut kv)?;
        let mut spec = AblationSpec::for_base(&base);
        if let Some(list) = kv.list::<String>("ablation.datasets")? {
            spec.datasets = list
                .iter()
                .map(|s| {
                    let (family, subset) = parse_dataset_key(s)?;
                    Ok(match &base.dataset {
                        // keep an explicit root for the base dataset
                        d @ DatasetSource::Benchmark { family: f, subset: sub, .. }
                            if *f == family && *sub == subset =>
                        {
                            d.clone()
                        }
                        _ => DatasetSource::benchmark(family, &subset)?,
                    })
                })
                .collect::<Result<_>>()?;
        }
        if let Some(cells) = kv.list("ablation.cells")? {
            spec.cells = cells;
        }
        spec.preset = kv.parse_or("ablation.preset", spec.preset)?;
        spec.workers = kv.parse_or("ablation.workers", spec.workers)?;
        kv.finish()?;
        if spec.datasets.is_empty() || spec.cells.is_empty() || spec.workers == 0 {
            return Err(Error::Config(
                "ablation needs at least one dataset, one cell and one worker".into(),
            ));
        }
        Ok((base, spec))
    }

    pub fn load(path: &Path) -> Result<(RunConfig, AblationSpec)> {
        Self::parse_file(&read(path)?)
    }
}

/// The seed-0 config of one dataset × cell under a preset.
pub fn resolve_cell(
    base: &RunConfig,
    dataset: &DatasetSource,
    cell: CellKey,
    preset: Preset,
) -> Result<RunConfig> {
    let mut c = base.clone();
    c.dataset = dataset.clone();
    c.encoder.use_weights = cell.use_weights;
    c.encoder.init = cell.init.scale();
    let tuned: Option<TunedParams> = match (preset, dataset) {
        (Preset::Base, _) => None,
        (Preset::GridOptimum, _) => Some(grid_optimum(cell)),
        (Preset::FineTuned, DatasetSource::Benchmark { family, subset, .. }) => {
            Some(fine_tuned(*family, subset, cell).ok_or_else(|| {
                Error::Config(format!("no fine-tuned preset for {}", dataset.label()))
            })?)
        }
        (Preset::FineTuned, DatasetSource::ToyCycles { .. }) => {
            return Err(Error::Config(
                "the fine-tuned preset covers benchmark datasets only; use ablation.preset = base".into(),
            ))
        }
    };
    if let Some(t) = tuned {
        c.training.optimizer = t.optimizer;
        c.training.learning_rate = t.learning_rate;
        c.training.n_negatives = t.n_negatives;
        c.training.n_epochs = t.n_epochs;
        c.encoder.n_layers = t.n_layers;
    }
    c.validate()?;
    Ok(c)
}

/// Config of seed `i`: both seeds offset by `i`.
pub fn seeded(cfg: &RunConfig, i: usize) -> RunConfig {
    let mut c = cfg.clone();
    c.encoder.seed = cfg.encoder.seed + i as u64;
    c.training.seed = cfg.training.seed + i as u64;
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; absent for a single value.
    pub std: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() >= 2).then(|| {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        });
        Self { mean, std }
    }

    fn cell(&self, scale: f64) -> String {
        match self.std {
            Some(s) => format!("{:.2} ± {:.2}", self.mean * scale, s * scale),
            None => format!("{:.2}", self.mean * scale),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub hits1: Stat,
    pub hits10: Stat,
    pub hits50: Stat,
    pub mean_rank: Stat,
    /// In [0, 1].
    pub mrr: Stat,
}

impl AggregateMetrics {
    pub fn of(runs: &[&DirectionMetrics]) -> Self {
        let col = |f: &dyn Fn(&DirectionMetrics) -> f64| Stat::of(&runs.iter().map(|m| f(m)).collect::<Vec<_>>());
        Self {
            hits1: col(&|m| m.hits(1)),
            hits10: col(&|m| m.hits(10)),
            hits50: col(&|m| m.hits(50)),
            mean_rank: col(&|m| m.mean_rank),
            mrr: col(&|m| m.mrr),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalAggregate {
    pub left_to_right: AggregateMetrics,
    pub right_to_left: AggregateMetrics,
    pub mean: AggregateMetrics,
}

impl DirectionalAggregate {
    pub fn of(reports: &[RunReport]) -> Option<Self> {
        if reports.is_empty() {
            return None;
        }
        let pick = |f: fn(&RunReport) -> &DirectionMetrics| {
            AggregateMetrics::of(&reports.iter().map(f).collect::<Vec<_>>())
        };
        Some(Self {
            left_to_right: pick(|r| &r.test.left_to_right),
            right_to_left: pick(|r| &r.test.right_to_left),
            mean: pick(|r| &r.test.mean),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub dataset: String,
    pub cell: CellKey,
    /// Seed-0 config; seed `i` adds `i` to both seeds.
    pub config: RunConfig,
    pub n_seeds: usize,
    pub run_ids: Vec<String>,
    pub failures: Vec<String>,
    /// Test metrics over the successful seeds.
    pub metrics: Option<DirectionalAggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub cells: Vec<AblationCell>,
}

impl AblationTable {
    pub fn get(&self, dataset: &str, cell: CellKey) -> Option<&AblationCell> {
        self.cells.iter().find(|c| c.dataset == dataset && c.cell == cell)
    }

    /// Datasets as rows, cells as columns; one block per metric, MRR × 100.
    pub fn to_text(&self) -> String {
        let mut datasets: Vec<&str> = Vec::new();
        let mut cells: Vec<CellKey> = Vec::new();
        for c in &self.cells {
            if !datasets.contains(&c.dataset.as_str()) {
                datasets.push(&c.dataset);
            }
            if !cells.contains(&c.cell) {
                cells.push(c.cell);
            }
        }
        let width = 16;
        let name_w = datasets.iter().map(|d| d.len()).max().unwrap_or(7).max(7);
        let mut s = String::new();
        let header = |s: &mut String, label: &str| {
            let _ = write!(s, "{label:<name_w$}");
            for c in &cells {
                let _ = write!(s, " {:>width$}", c.to_string());
            }
            s.push('\n');
        };
        type Pick = fn(&AggregateMetrics) -> &Stat;
        let blocks: [(&str, Pick, f64); 4] = [
            ("H@1", |m| &m.hits1, 1.0),
            ("H@10", |m| &m.hits10, 1.0),
            ("MR", |m| &m.mean_rank, 1.0),
            ("MRR", |m| &m.mrr, 100.0),
        ];
        let _ = writeln!(s, "test metrics, mean of both directions; columns are weights/init");
        for (name, pick, scale) in blocks {
            s.push('\n');
            header(&mut s, name);
            for d in &datasets {
                let _ = write!(s, "{d:<name_w$}");
                for c in &cells {
                    let text = match self.get(d, *c).and_then(|x| x.metrics.as_ref()) {
                        Some(m) => pick(&m.mean).cell(scale),
                        None => "failed".into(),
                    };
                    let _ = write!(s, " {text:>width$}");
                }
                s.push('\n');
            }
        }
        s
    }
}

/// Runs `n_seeds` seeds of every dataset × cell (resuming finished runs) and
/// writes `ablation.json` and `ablation.txt` to the output directory.
pub fn run_ablation(base: &RunConfig, spec: &AblationSpec, data_root: Option<&Path>) -> Result<AblationTable> {
    let mut jobs = Vec::new();
    let mut cells = Vec::new();
    for d in &spec.datasets {
        for &cell in &spec.cells {
            let cfg = resolve_cell(base, d, cell, spec.preset)?;
            for i in 0..base.n_seeds {
                jobs.push((cells.len(), seeded(&cfg, i)));
            }
            cells.push(AblationCell {
                dataset: d.label(),
                cell,
                config: cfg,
                n_seeds: base.n_seeds,
                run_ids: Vec::new(),
                failures: Vec::new(),
                metrics: None,
            });
        }
    }
    let results: Vec<(usize, String, Result<RunReport>)> = pool(spec.workers)?.install(|| {
        jobs.par_iter()
            .map(|(k, cfg)| (*k, cfg.run_id(), run_or_resume(cfg, data_root).map(|r| r.0)))
            .collect()
    });
    let mut reports: Vec<Vec<RunReport>> = vec![Vec::new(); cells.len()];
    for (k, id, r) in results {
        cells[k].run_ids.push(id.clone());
        match r {
            Ok(rep) => reports[k].push(rep),
            Err(e) => cells[k].failures.push(format!("{id}: {}: {e}", e.category())),
        }
    }
    for (cell, reps) in cells.iter_mut().zip(&reports) {
        cell.metrics = DirectionalAggregate::of(reps);
    }
    let table = AblationTable { cells };
    let dir = &base.output.dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join(ABLATION_JSON);
    fs::write(&json, serde_json::to_vec_pretty(&table)?).map_err(|e| Error::io(&json, e))?;
    let txt = dir.join(ABLATION_TXT);
    fs::write(&txt, table.to_text()).map_err(|e| Error::io(&txt, e))?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::DatasetFamily;
    use crate::runner::presets::InitPreset;
    use crate::runner::run::{load_report, run_dir};
    use crate::training::OptimizerKind;

    #[test]
    fn sample_std() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Stat::of(&[7.0]).std, None);
        assert_eq!(Stat::of(&[7.0]).cell(1.0), "7.00");
    }

    #[test]
    fn fine_tuned_preset_resolution() {
        let base = RunConfig::new(DatasetSource::benchmark(DatasetFamily::Dbp15kJape, "zh-en").unwrap());
        let c = resolve_cell(
            &base,
            &base.dataset,
            CellKey::new(false, InitPreset::Scaled),
            Preset::FineTuned,
        )
        .unwrap();
        assert_eq!(c.training.optimizer, OptimizerKind::Sgd);
        assert_eq!((c.training.n_epochs, c.training.n_negatives, c.encoder.n_layers), (3000, 100, 2));
        assert!(!c.encoder.use_weights);
        let toy = DatasetSource::ToyCycles { nodes: 8, seeds: 4 };
        assert!(resolve_cell(&base, &toy, CellKey::ALL[0], Preset::FineTuned).is_err());
    }

    #[test]
    fn parse_ablation_file() {
        let text = "dataset.family = dbp15k-jape\ndataset.subset = zh-en\ndataset.root = /d\n\
                    ablation.datasets = dbp15k-jape:zh-en, dwy100k:wd\nablation.cells = no/unit, yes/unit\n";
        let (_, spec) = AblationSpec::parse_file(text).unwrap();
        assert_eq!(spec.datasets.len(), 2);
        assert!(matches!(&spec.datasets[0], DatasetSource::Benchmark { root: Some(_), .. }));
        assert!(matches!(&spec.datasets[1], DatasetSource::Benchmark { root: None, .. }));
        assert_eq!(spec.cells.len(), 2);
    }

    #[test]
    fn toy_ablation_aggregates_persisted_reports() {
        let tmp = tempfile::tempdir().unwrap();
        let mut base = RunConfig::new(DatasetSource::ToyCycles { nodes: 8, seeds: 4 });
        base.split.enabled = false;
        base.encoder.dim = 8;
        base.training.n_epochs = 10;
        base.training.n_negatives = 2;
        base.training.learning_rate = 0.1;
        base.n_seeds = 3;
        base.output.dir = tmp.path().to_path_buf();
        let mut spec = AblationSpec::for_base(&base);
        spec.preset = Preset::Base;
        spec.workers = 2;
        let table = run_ablation(&base, &spec, None).unwrap();
        assert_eq!(table.cells.len(), 4);
        for cell in &table.cells {
            assert!(cell.failures.is_empty());
            let reps: Vec<RunReport> = (0..3)
                .map(|i| load_report(&run_dir(&seeded(&cell.config, i))).unwrap())
                .collect();
            let h1: Vec<f64> = reps.iter().map(|r| r.test.mean.hits(1)).collect();
            assert_eq!(cell.metrics.as_ref().unwrap().mean.hits1, Stat::of(&h1));
        }
        let text = table.to_text();
        assert!(text.contains("H@1") && text.contains("MRR") && text.contains('±'));
        assert!(tmp.path().join(ABLATION_JSON).is_file());

        base.n_seeds = 1;
        let single = run_ablation(&base, &spec, None).unwrap();
        assert!(!single.to_text().contains('±'));
    }
}
