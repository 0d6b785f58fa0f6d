//! `key = value` experiment files.
//!
//! One file describes a single run; the optional `grid.*` and `ablation.*`
//! keys extend it for the grid and ablation commands. Lines starting with `#`
//! are comments. [`RunConfig::to_text`] writes every key, so a persisted
//! config re-parses to exactly the same run.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adjacency::{AdjacencyConfig, AdjacencyVariant};
use crate::datasets::{canonical_subset, DatasetDescriptor, DatasetFamily};
use crate::encoder::{EncoderConfig, InitScale};
use crate::error::{Error, Result};
use crate::evaluation::{CandidatePolicy, ScoreConfig};
use crate::linalg::Normalization;
use crate::training::{OptimizerKind, TrainConfig, DEFAULT_MARGIN};

pub const DEFAULT_N_SEEDS: usize = 5;
pub const DATA_ENV: &str = "KGALIGN_DATA";

/// Where the graph pair of a run comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSource {
    Benchmark {
        family: DatasetFamily,
        subset: String,
        /// Explicit dataset directory; otherwise resolved under the data root.
        root: Option<PathBuf>,
    },
    /// Two identical `nodes`-cycles with `seeds` train pairs.
    ToyCycles { nodes: usize, seeds: usize },
}

impl DatasetSource {
    pub fn benchmark(family: DatasetFamily, subset: &str) -> Result<Self> {
        Ok(DatasetSource::Benchmark {
            family,
            subset: canonical_subset(family, subset)?,
            root: None,
        })
    }

    /// Resolves the on-disk location: explicit root, else `data_root`, else
    /// `$KGALIGN_DATA`, else `./data`.
    pub fn descriptor(&self, data_root: Option<&Path>) -> Result<Option<DatasetDescriptor>> {
        match self {
            DatasetSource::ToyCycles { .. } => Ok(None),
            DatasetSource::Benchmark {
                family,
                subset,
                root: Some(root),
            } => DatasetDescriptor::new(*family, subset, root.clone()).map(Some),
            DatasetSource::Benchmark { family, subset, root: None } => {
                let base = resolve_data_root(data_root);
                DatasetDescriptor::under(&base, *family, subset).map(Some)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            DatasetSource::Benchmark { family, subset, .. } => format!("{family}:{subset}"),
            DatasetSource::ToyCycles { nodes, seeds } => format!("toy-cycles:{nodes}/{seeds}"),
        }
    }
}

pub fn resolve_data_root(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(DATA_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"))
}

/// Parses `family:subset`.
pub fn parse_dataset_key(s: &str) -> Result<(DatasetFamily, String)> {
    let (f, sub) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("dataset '{s}' must be written family:subset")))?;
    let family: DatasetFamily = f.trim().parse()?;
    Ok((family, canonical_subset(family, sub.trim())?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// When false the loaded roles are used as they are and no validation
    /// split is drawn.
    pub enabled: bool,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            train_fraction: 0.3,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeConfig {
    pub enabled: bool,
    pub margin: f64,
}

impl Default for AttributeConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            margin: DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub save_embeddings: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs"),
            save_embeddings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub split: SplitConfig,
    pub adjacency: AdjacencyConfig,
    pub encoder: EncoderConfig,
    pub training: TrainConfig,
    pub score: ScoreConfig,
    pub candidate_policy: CandidatePolicy,
    pub n_seeds: usize,
    pub attributes: AttributeConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn new(dataset: DatasetSource) -> Self {
        Self {
            dataset,
            split: SplitConfig::default(),
            adjacency: AdjacencyConfig::default(),
            encoder: EncoderConfig::default(),
            training: TrainConfig::default(),
            score: ScoreConfig::default(),
            candidate_policy: CandidatePolicy::TestOnly,
            n_seeds: DEFAULT_N_SEEDS,
            attributes: AttributeConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.training.validate()?;
        if let DatasetSource::ToyCycles { nodes, seeds } = self.dataset {
            if nodes < 3 || seeds == 0 || seeds >= nodes {
                return Err(Error::Config(format!(
                    "toy cycles need nodes >= 3 and 0 < seeds < nodes, got {nodes}/{seeds}"
                )));
            }
        }
        if self.split.enabled {
            for (k, v) in [
                ("split.train_fraction", self.split.train_fraction),
                ("split.val_fraction", self.split.val_fraction),
            ] {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::Config(format!("{k} must be in (0, 1), got {v}")));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.score.beta) {
            return Err(Error::Config(format!("score.beta must be in [0, 1], got {}", self.score.beta)));
        }
        if self.score.beta < 1.0 && !self.attributes.enabled {
            return Err(Error::Config("score.beta < 1 requires attributes.enabled = true".into()));
        }
        if !(self.attributes.margin > 0.0) {
            return Err(Error::Config("attributes.margin must be positive".into()));
        }
        if !(self.adjacency.clamp_floor > 0.0 && self.adjacency.clamp_floor <= 1.0) {
            return Err(Error::Config("adjacency.clamp_floor must be in (0, 1]".into()));
        }
        if self.n_seeds == 0 {
            return Err(Error::Config("n_seeds must be at least 1".into()));
        }
        Ok(())
    }

    /// Sets the initialization and negative-sampling seeds together.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.encoder.seed = seed;
        self.training.seed = seed;
        self
    }

    fn entries(&self, identity_only: bool) -> Vec<(&'static str, String)> {
        let mut v: Vec<(&'static str, String)> = Vec::new();
        match &self.dataset {
            DatasetSource::Benchmark { family, subset, root } => {
                v.push(("dataset.family", family.to_string()));
                v.push(("dataset.subset", subset.clone()));
                if let (Some(r), false) = (root, identity_only) {
                    v.push(("dataset.root", r.display().to_string()));
                }
            }
            DatasetSource::ToyCycles { nodes, seeds } => {
                v.push(("dataset.family", "toy-cycles".into()));
                v.push(("dataset.nodes", nodes.to_string()));
                v.push(("dataset.seeds", seeds.to_string()));
            }
        }
        let s = &self.split;
        v.push(("split.enabled", s.enabled.to_string()));
        v.push(("split.train_fraction", s.train_fraction.to_string()));
        v.push(("split.val_fraction", s.val_fraction.to_string()));
        v.push(("split.seed", s.seed.to_string()));
        let a = &self.adjacency;
        v.push(("adjacency.variant", a.variant.to_string()));
        v.push(("adjacency.clamp", a.clamp.to_string()));
        v.push(("adjacency.clamp_floor", a.clamp_floor.to_string()));
        v.push(("adjacency.normalization", a.normalization.to_string()));
        v.push(("adjacency.self_loops", a.add_self_loops.to_string()));
        let e = &self.encoder;
        v.push(("encoder.layers", e.n_layers.to_string()));
        v.push(("encoder.dim", e.dim.to_string()));
        v.push(("encoder.use_weights", e.use_weights.to_string()));
        v.push(("encoder.init", e.init.to_string()));
        v.push(("encoder.normalize_features", e.normalize_features.to_string()));
        v.push(("encoder.seed", e.seed.to_string()));
        let t = &self.training;
        v.push(("training.optimizer", t.optimizer.to_string()));
        v.push(("training.learning_rate", t.learning_rate.to_string()));
        v.push(("training.negatives", t.n_negatives.to_string()));
        v.push(("training.epochs", t.n_epochs.to_string()));
        v.push(("training.margin", t.margin.to_string()));
        v.push(("training.seed", t.seed.to_string()));
        v.push(("score.beta", self.score.beta.to_string()));
        v.push(("eval.candidate_policy", self.candidate_policy.to_string()));
        v.push(("attributes.enabled", self.attributes.enabled.to_string()));
        v.push(("attributes.margin", self.attributes.margin.to_string()));
        if !identity_only {
            v.push(("n_seeds", self.n_seeds.to_string()));
            v.push(("output.dir", self.output.dir.display().to_string()));
            v.push(("output.save_embeddings", self.output.save_embeddings.to_string()));
        }
        v
    }

    /// Every key, one per line, in a fixed order.
    pub fn to_text(&self) -> String {
        render(&self.entries(false))
    }

    /// Hash of everything that influences the numbers; output location,
    /// dataset directory and `n_seeds` are excluded.
    pub fn run_id(&self) -> String {
        let digest = Sha256::digest(render(&self.entries(true)).as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let cfg = Self::from_keys(&mut kv)?;
        kv.finish()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read(path)?)
    }

    pub(crate) fn from_keys(kv: &mut KeyValues) -> Result<Self> {
        let family = kv.take("dataset.family");
        let dataset = match family.as_deref() {
            Some("toy-cycles") => DatasetSource::ToyCycles {
                nodes: kv.parse_or("dataset.nodes", 8)?,
                seeds: kv.parse_or("dataset.seeds", 4)?,
            },
            Some(f) => {
                let family: DatasetFamily = f.parse()?;
                let subset = kv
                    .take("dataset.subset")
                    .ok_or_else(|| Error::Config("dataset.subset is required".into()))?;
                DatasetSource::Benchmark {
                    family,
                    subset: canonical_subset(family, &subset)?,
                    root: kv.take("dataset.root").map(PathBuf::from),
                }
            }
            None => return Err(Error::Config("dataset.family is required".into())),
        };
        let mut c = RunConfig::new(dataset);

        let d = SplitConfig::default();
        c.split = SplitConfig {
            enabled: kv.parse_or("split.enabled", d.enabled)?,
            train_fraction: kv.parse_or("split.train_fraction", d.train_fraction)?,
            val_fraction: kv.parse_or("split.val_fraction", d.val_fraction)?,
            seed: kv.parse_or("split.seed", d.seed)?,
        };

        let variant: AdjacencyVariant = kv.parse_or("adjacency.variant", AdjacencyVariant::Count)?;
        let d = match variant {
            AdjacencyVariant::Count => AdjacencyConfig::default(),
            AdjacencyVariant::Functionality => AdjacencyConfig::functionality(),
        };
        c.adjacency = AdjacencyConfig {
            variant,
            clamp: kv.parse_or("adjacency.clamp", d.clamp)?,
            clamp_floor: kv.parse_or("adjacency.clamp_floor", d.clamp_floor)?,
            normalization: kv.parse_or::<Normalization>("adjacency.normalization", d.normalization)?,
            add_self_loops: kv.parse_or("adjacency.self_loops", d.add_self_loops)?,
        };

        let seed: Option<u64> = kv.parse_opt("seed")?;
        let d = EncoderConfig::default();
        c.encoder = EncoderConfig {
            n_layers: kv.parse_or("encoder.layers", d.n_layers)?,
            dim: kv.parse_or("encoder.dim", d.dim)?,
            use_weights: kv.parse_or("encoder.use_weights", d.use_weights)?,
            init: kv.parse_or::<InitScale>("encoder.init", d.init)?,
            normalize_features: kv.parse_or("encoder.normalize_features", d.normalize_features)?,
            seed: kv.parse_or("encoder.seed", seed.unwrap_or(d.seed))?,
        };
        let d = TrainConfig::default();
        c.training = TrainConfig {
            optimizer: kv.parse_or::<OptimizerKind>("training.optimizer", d.optimizer)?,
            learning_rate: kv.parse_or("training.learning_rate", d.learning_rate)?,
            n_negatives: kv.parse_or("training.negatives", d.n_negatives)?,
            n_epochs: kv.parse_or("training.epochs", d.n_epochs)?,
            margin: kv.parse_or("training.margin", d.margin)?,
            seed: kv.parse_or("training.seed", seed.unwrap_or(d.seed))?,
        };
        c.score = ScoreConfig {
            beta: kv.parse_or("score.beta", 1.0)?,
        };
        c.candidate_policy = kv.parse_or("eval.candidate_policy", CandidatePolicy::TestOnly)?;
        c.n_seeds = kv.parse_or("n_seeds", DEFAULT_N_SEEDS)?;
        c.attributes = AttributeConfig {
            enabled: kv.parse_or("attributes.enabled", false)?,
            margin: kv.parse_or("attributes.margin", DEFAULT_MARGIN)?,
        };
        c.output = OutputConfig {
            dir: kv
                .take("output.dir")
                .map(PathBuf::from)
                .unwrap_or_else(|| OutputConfig::default().dir),
            save_embeddings: kv.parse_or("output.save_embeddings", false)?,
        };
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn render(entries: &[(&'static str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in entries {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(v);
        s.push('\n');
    }
    s
}

pub(crate) fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parsed `key = value` lines; keys are consumed as they are interpreted so
/// leftovers can be reported.
#[derive(Debug, Default)]
pub(crate) struct KeyValues {
    values: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub(crate) fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value', got '{line}'", i + 1))
            })?;
            let k = k.trim().to_string();
            if let Some((prev, _)) = values.insert(k.clone(), (i + 1, v.trim().to_string())) {
                return Err(Error::Config(format!(
                    "line {}: key '{k}' already set on line {prev}",
                    i + 1
                )));
            }
        }
        Ok(Self { values })
    }

    pub(crate) fn take(&mut self, key: &str) -> Option<String> {
        self.values.remove(key).map(|(_, v)| v)
    }

    pub(crate) fn parse_opt<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.values.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::Config(format!("line {line}: invalid {key} '{v}': {e}"))),
        }
    }

    pub(crate) fn parse_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub(crate) fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        match self.values.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<T>()
                        .map_err(|e| Error::Config(format!("line {line}: invalid {key} entry '{s}': {e}")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub(crate) fn finish(self) -> Result<()> {
        match self.values.into_iter().next() {
            None => Ok(()),
            Some((k, (line, _))) => Err(Error::Config(format!("line {line}: unknown key '{k}'"))),
        }
    }
}
