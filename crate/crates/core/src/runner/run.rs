//! One run: load, split, train, evaluate, persist.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adjacency::build_adjacency;
use crate::datasets::{self, isomorphic_cycles};
use crate::encoder::{encode, init_state, EncoderConfig};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_split, AlignmentEmbeddings, MetricsReport};
use crate::graph::{validate_pair, GraphPair, Role};
use crate::linalg::{DenseMatrix, SparseMatrix};
use crate::training::{train_from_state, write_loss_tsv, TrainConfig};

use super::config::{DatasetSource, RunConfig};

pub const CONFIG_FILE: &str = "config.txt";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const LOSS_FILE: &str = "loss.tsv";
pub const ATTRIBUTE_LOSS_FILE: &str = "attribute_loss.tsv";
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
pub const FAILURE_FILE: &str = "failure.json";

const EMBEDDINGS_MAGIC: &[u8; 8] = b"KGAEMB1\0";

/// Split sizes actually used by a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub dataset: String,
    /// The resolved config in `key = value` form; re-parses to `config`.
    pub config_text: String,
    pub config: RunConfig,
    pub init: String,
    pub parameter_count: usize,
    pub split: SplitSizes,
    pub final_loss: Option<f64>,
    pub final_attribute_loss: Option<f64>,
    pub validation: Option<MetricsReport>,
    pub test: MetricsReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureRecord {
    pub run_id: String,
    pub category: String,
    pub message: String,
    pub config_text: String,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub report: RunReport,
    pub losses: Vec<f64>,
    pub attribute_losses: Option<Vec<f64>>,
    pub embeddings: AlignmentEmbeddings,
}

/// A loaded, split pair with its propagation matrices.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub pair: GraphPair,
    pub adj_left: SparseMatrix,
    pub adj_right: SparseMatrix,
}

pub fn load_pair(cfg: &RunConfig, data_root: Option<&Path>) -> Result<GraphPair> {
    match &cfg.dataset {
        DatasetSource::ToyCycles { nodes, seeds } => Ok(isomorphic_cycles(*nodes, *seeds)),
        src @ DatasetSource::Benchmark { .. } => {
            let desc = src
                .descriptor(data_root)?
                .ok_or_else(|| Error::Dataset("no dataset location".into()))?;
            datasets::load(&desc)
        }
    }
}

pub fn prepare(cfg: &RunConfig, data_root: Option<&Path>) -> Result<PreparedData> {
    cfg.validate()?;
    let mut pair = load_pair(cfg, data_root)?;
    if cfg.split.enabled {
        pair.alignment = datasets::split(
            &pair.alignment,
            cfg.split.train_fraction,
            cfg.split.val_fraction,
            cfg.split.seed,
        )?;
    }
    if let Some(v) = validate_pair(&pair).first() {
        return Err(Error::Dataset(format!("invalid graph pair: {v}")));
    }
    let adj_left = build_adjacency(&pair.left, &cfg.adjacency)?;
    let adj_right = build_adjacency(&pair.right, &cfg.adjacency)?;
    Ok(PreparedData {
        pair,
        adj_left,
        adj_right,
    })
}

fn pad_columns(m: &DenseMatrix, width: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m.n_rows(), width);
    for i in 0..m.n_rows() {
        out.row_mut(i)[..m.n_cols()].copy_from_slice(m.row(i));
    }
    out
}

struct Trained {
    embeddings: AlignmentEmbeddings,
    losses: Vec<f64>,
    attribute_losses: Option<Vec<f64>>,
    parameter_count: usize,
}

fn train_all(data: &PreparedData, cfg: &RunConfig) -> Result<Trained> {
    let positives = data.pair.alignment.with_role(Role::Train);
    let state = init_state(
        &cfg.encoder,
        data.pair.left.entity_count,
        data.pair.right.entity_count,
    )?;
    let mut parameter_count = state.parameter_count();
    let out = train_from_state(
        &data.adj_left,
        &data.adj_right,
        &positives,
        state,
        &cfg.encoder,
        &cfg.training,
    )?;
    let (left, right) = encode(&data.adj_left, &data.adj_right, &out.state, &cfg.encoder)?;
    let mut embeddings = AlignmentEmbeddings::structural(left, right);

    let mut attribute_losses = None;
    if cfg.attributes.enabled {
        let (Some(al), Some(ar)) = (&data.pair.attributes_left, &data.pair.attributes_right) else {
            return Err(Error::Config(
                "attributes.enabled = true but the dataset has no attribute files".into(),
            ));
        };
        // both graphs share layer weights, so the feature widths must agree
        let width = al.dim().max(ar.dim()).max(1);
        let enc = EncoderConfig {
            dim: width,
            ..cfg.encoder
        };
        let mut state = init_state(&enc, al.entity_count(), ar.entity_count())?;
        state.features_left = pad_columns(&al.features, width);
        state.features_right = pad_columns(&ar.features, width);
        parameter_count += state.parameter_count();
        let tcfg = TrainConfig {
            margin: cfg.attributes.margin,
            ..cfg.training
        };
        let out = train_from_state(&data.adj_left, &data.adj_right, &positives, state, &enc, &tcfg)
            .map_err(|e| match e {
                Error::NonFinite { context } => Error::NonFinite {
                    context: format!("attribute run: {context}"),
                },
                other => other,
            })?;
        embeddings.attributes = Some(encode(&data.adj_left, &data.adj_right, &out.state, &enc)?);
        attribute_losses = Some(out.losses);
    }
    Ok(Trained {
        embeddings,
        losses: out.losses,
        attribute_losses,
        parameter_count,
    })
}

/// Validation (if that split is non-empty) and test reports.
pub fn evaluate_embeddings(
    emb: &AlignmentEmbeddings,
    pair: &GraphPair,
    cfg: &RunConfig,
) -> Result<(Option<MetricsReport>, MetricsReport)> {
    let validation = if pair.alignment.count(Role::Validation) > 0 {
        Some(evaluate_split(emb, pair, &cfg.score, cfg.candidate_policy, Role::Validation)?)
    } else {
        None
    };
    let test = evaluate_split(emb, pair, &cfg.score, cfg.candidate_policy, Role::Test)?;
    Ok((validation, test))
}

/// Runs without touching the file system.
pub fn execute(cfg: &RunConfig, data_root: Option<&Path>) -> Result<RunResult> {
    let data = prepare(cfg, data_root)?;
    let trained = train_all(&data, cfg)?;
    let (validation, test) = evaluate_embeddings(&trained.embeddings, &data.pair, cfg)?;
    let a = &data.pair.alignment;
    let report = RunReport {
        run_id: cfg.run_id(),
        dataset: cfg.dataset.label(),
        config_text: cfg.to_text(),
        config: cfg.clone(),
        init: cfg.encoder.init.describe(cfg.encoder.dim),
        parameter_count: trained.parameter_count,
        split: SplitSizes {
            train: a.count(Role::Train),
            validation: a.count(Role::Validation),
            test: a.count(Role::Test),
        },
        final_loss: trained.losses.last().copied(),
        final_attribute_loss: trained.attribute_losses.as_ref().and_then(|l| l.last().copied()),
        validation,
        test,
    };
    Ok(RunResult {
        report,
        losses: trained.losses,
        attribute_losses: trained.attribute_losses,
        embeddings: trained.embeddings,
    })
}

/// Directory holding the artifacts of `cfg`.
pub fn run_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output.dir.join(cfg.run_id())
}

/// Executes and persists a run under `output.dir/<run id>/`. Failures leave a
/// `failure.json` behind and are returned.
pub fn run_single(cfg: &RunConfig, data_root: Option<&Path>) -> Result<RunResult> {
    let dir = run_dir(cfg);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_file(&dir.join(CONFIG_FILE), cfg.to_text().as_bytes())?;
    let _ = fs::remove_file(dir.join(FAILURE_FILE));
    match execute(cfg, data_root).and_then(|r| persist(&dir, cfg, &r).map(|_| r)) {
        Ok(r) => Ok(r),
        Err(e) => {
            let record = FailureRecord {
                run_id: cfg.run_id(),
                category: e.category().to_string(),
                message: e.to_string(),
                config_text: cfg.to_text(),
            };
            write_file(&dir.join(FAILURE_FILE), &serde_json::to_vec_pretty(&record)?)?;
            Err(e)
        }
    }
}

fn persist(dir: &Path, cfg: &RunConfig, r: &RunResult) -> Result<()> {
    let mut loss = Vec::new();
    write_loss_tsv(&r.losses, &mut loss).map_err(|e| Error::io(dir.join(LOSS_FILE), e))?;
    write_file(&dir.join(LOSS_FILE), &loss)?;
    if let Some(al) = &r.attribute_losses {
        let mut buf = Vec::new();
        write_loss_tsv(al, &mut buf).map_err(|e| Error::io(dir.join(ATTRIBUTE_LOSS_FILE), e))?;
        write_file(&dir.join(ATTRIBUTE_LOSS_FILE), &buf)?;
    }
    if cfg.output.save_embeddings {
        write_embeddings(&dir.join(EMBEDDINGS_FILE), &r.embeddings)?;
    }
    write_file(&dir.join(REPORT_TXT), report_text(&r.report).as_bytes())?;
    // report.json last: its presence marks the run complete
    write_file(&dir.join(REPORT_JSON), &serde_json::to_vec_pretty(&r.report)?)
}

pub fn report_text(r: &RunReport) -> String {
    let mut s = format!(
        "run {}  dataset {}  init {}  parameters {}\nsplit: {} train / {} validation / {} test\n",
        r.run_id, r.dataset, r.init, r.parameter_count, r.split.train, r.split.validation, r.split.test
    );
    if let Some(l) = r.final_loss {
        s.push_str(&format!("final loss {l:.6}\n"));
    }
    s.push('\n');
    if let Some(v) = &r.validation {
        s.push_str(&v.to_table());
        s.push('\n');
    }
    s.push_str(&r.test.to_table());
    s
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_report(dir: &Path) -> Result<RunReport> {
    let path = dir.join(REPORT_JSON);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn write_embeddings(path: &Path, emb: &AlignmentEmbeddings) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut mats = vec![&emb.structure_left, &emb.structure_right];
    if let Some((a, b)) = &emb.attributes {
        mats.extend([a, b]);
    }
    let io = |e| Error::io(path, e);
    w.write_all(EMBEDDINGS_MAGIC).map_err(io)?;
    w.write_all(&(mats.len() as u64).to_le_bytes()).map_err(io)?;
    for m in mats {
        w.write_all(&(m.n_rows() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(m.n_cols() as u64).to_le_bytes()).map_err(io)?;
        for v in m.as_slice() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_embeddings(path: &Path) -> Result<AlignmentEmbeddings> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| Error::io(path, e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != EMBEDDINGS_MAGIC {
        return Err(Error::Invalid(format!("{}: not an embeddings file", path.display())));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |r: &mut BufReader<fs::File>| -> Result<u64> {
        r.read_exact(&mut word).map_err(io)?;
        Ok(u64::from_le_bytes(word))
    };
    let count = next_u64(&mut r)?;
    if count != 2 && count != 4 {
        return Err(Error::Invalid(format!("{}: bad matrix count {count}", path.display())));
    }
    let mut mats = Vec::new();
    for _ in 0..count {
        let rows = next_u64(&mut r)? as usize;
        let cols = next_u64(&mut r)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(f64::from_bits(next_u64(&mut r)?));
        }
        mats.push(DenseMatrix::from_vec(rows, cols, data)?);
    }
    let mut it = mats.into_iter();
    let (l, rr) = (it.next().unwrap(), it.next().unwrap());
    let mut emb = AlignmentEmbeddings::structural(l, rr);
    if let (Some(a), Some(b)) = (it.next(), it.next()) {
        emb.attributes = Some((a, b));
    }
    Ok(emb)
}

/// Re-evaluates a persisted run: from its saved embeddings when present,
/// otherwise by re-executing its config.
pub fn evaluate_run_dir(dir: &Path, data_root: Option<&Path>) -> Result<RunReport> {
    let cfg = RunConfig::load(&dir.join(CONFIG_FILE))?;
    let emb_path = dir.join(EMBEDDINGS_FILE);
    if emb_path.is_file() {
        let mut report = load_report(dir)?;
        let data = prepare(&cfg, data_root)?;
        let emb = read_embeddings(&emb_path)?;
        let (validation, test) = evaluate_embeddings(&emb, &data.pair, &cfg)?;
        report.validation = validation;
        report.test = test;
        Ok(report)
    } else {
        execute(&cfg, data_root).map(|r| r.report)
    }
}
