//! Margin-rank training over seed alignments.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adjacency::{build_adjacency, AdjacencyConfig};
use crate::encoder::{backward, forward, init_state, EmbeddingState, EncoderConfig};
use crate::error::{Error, Result};
use crate::graph::{GraphPair, Role};
use crate::linalg::{DenseMatrix, SparseMatrix};

pub const DEFAULT_MARGIN: f64 = 3.0;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            other => Err(Error::Config(format!("unknown optimizer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub n_negatives: usize,
    pub n_epochs: usize,
    pub margin: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1.0,
            n_negatives: 50,
            n_epochs: 2000,
            margin: DEFAULT_MARGIN,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.n_negatives == 0 {
            return Err(Error::Config("need at least one negative per positive".into()));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::Config(format!("margin must be >= 0, got {}", self.margin)));
        }
        Ok(())
    }
}

/// Moment accumulators for Adam; empty for SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, shapes: &[usize]) -> Self {
        let alloc = || shapes.iter().map(|&n| vec![0.0; n]).collect();
        match kind {
            OptimizerKind::Sgd => Self {
                step: 0,
                first: Vec::new(),
                second: Vec::new(),
            },
            OptimizerKind::Adam => Self {
                step: 0,
                first: alloc(),
                second: alloc(),
            },
        }
    }
}

pub fn optimizer_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut OptimizerState,
    cfg: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.iter().zip(grads).any(|(p, g)| p.len() != g.len()) {
        return Err(Error::shape(
            "optimizer_step",
            "gradients shaped like parameters",
            "mismatch",
        ));
    }
    if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite {
            context: format!("gradient at optimizer step {}", state.step + 1),
        });
    }
    state.step += 1;
    let lr = cfg.learning_rate;
    match cfg.optimizer {
        OptimizerKind::Sgd => {
            for (p, g) in params.iter_mut().zip(grads) {
                for (x, &dx) in p.iter_mut().zip(g.iter()) {
                    *x -= lr * dx;
                }
            }
        }
        OptimizerKind::Adam => {
            if state.first.len() != params.len()
                || state.first.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len())
            {
                return Err(Error::shape(
                    "optimizer_step",
                    "adam moments shaped like parameters",
                    "mismatch",
                ));
            }
            let t = state.step as i32;
            let bc1 = 1.0 - ADAM_BETA1.powi(t);
            let bc2 = 1.0 - ADAM_BETA2.powi(t);
            for (((p, g), m), v) in params
                .iter_mut()
                .zip(grads)
                .zip(state.first.iter_mut())
                .zip(state.second.iter_mut())
            {
                for k in 0..p.len() {
                    let gk = g[k];
                    m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * gk;
                    v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * gk * gk;
                    let m_hat = m[k] / bc1;
                    let v_hat = v[k] / bc2;
                    p[k] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }
    Ok(())
}

/// `k` corruptions per positive. Each flips a fair coin for the side to corrupt and
/// replaces that entity with a different, uniformly drawn entity of the same graph.
pub fn sample_negatives<R: Rng + ?Sized>(
    positives: &[(usize, usize)],
    n_left: usize,
    n_right: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<Vec<(usize, usize)>>> {
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    if !positives.is_empty() && (n_left < 2 || n_right < 2) {
        return Err(Error::Invalid(format!(
            "cannot corrupt a graph with fewer than 2 entities (left {n_left}, right {n_right})"
        )));
    }
    let replace = |rng: &mut R, n: usize, original: usize| {
        let x = rng.random_range(0..n - 1);
        if x >= original {
            x + 1
        } else {
            x
        }
    };
    Ok(positives
        .iter()
        .map(|&(l, r)| {
            (0..k)
                .map(|_| {
                    if rng.random_bool(0.5) {
                        (replace(rng, n_left, l), r)
                    } else {
                        (l, replace(rng, n_right, r))
                    }
                })
                .collect()
        })
        .collect())
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Adds `scale · sign(a - b)` to the gradient rows of `a` and subtracts it from `b`.
fn accumulate_l1_grad(
    grad_left: &mut DenseMatrix,
    grad_right: &mut DenseMatrix,
    emb_left: &DenseMatrix,
    emb_right: &DenseMatrix,
    (l, r): (usize, usize),
    scale: f64,
) {
    let a = emb_left.row(l);
    let b = emb_right.row(r);
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        let s = scale * sign(x - y);
        if s != 0.0 {
            grad_left.row_mut(l)[k] += s;
            grad_right.row_mut(r)[k] -= s;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub grad_left: DenseMatrix,
    pub grad_right: DenseMatrix,
}

/// `Σ_pos Σ_neg [‖l − r‖₁ + γ − ‖l' − r'‖₁]₊` and its subgradient.
pub fn margin_rank_loss(
    emb_left: &DenseMatrix,
    emb_right: &DenseMatrix,
    positives: &[(usize, usize)],
    negatives: &[Vec<(usize, usize)>],
    margin: f64,
) -> Result<LossOutput> {
    if positives.len() != negatives.len() {
        return Err(Error::shape(
            "margin_rank_loss",
            format!("{} negative lists", positives.len()),
            negatives.len(),
        ));
    }
    if emb_left.n_cols() != emb_right.n_cols() {
        return Err(Error::shape(
            "margin_rank_loss",
            emb_left.n_cols(),
            emb_right.n_cols(),
        ));
    }
    let mut grad_left = DenseMatrix::zeros(emb_left.n_rows(), emb_left.n_cols());
    let mut grad_right = DenseMatrix::zeros(emb_right.n_rows(), emb_right.n_cols());
    let mut loss = 0.0;
    for (&pos, negs) in positives.iter().zip(negatives) {
        let d_pos = l1(emb_left.row(pos.0), emb_right.row(pos.1));
        let mut active = 0usize;
        for &neg in negs {
            let term = d_pos + margin - l1(emb_left.row(neg.0), emb_right.row(neg.1));
            if term > 0.0 {
                loss += term;
                active += 1;
                accumulate_l1_grad(&mut grad_left, &mut grad_right, emb_left, emb_right, neg, -1.0);
            }
        }
        if active > 0 {
            accumulate_l1_grad(
                &mut grad_left,
                &mut grad_right,
                emb_left,
                emb_right,
                pos,
                active as f64,
            );
        }
    }
    Ok(LossOutput {
        loss,
        grad_left,
        grad_right,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub state: EmbeddingState,
    /// Loss of every epoch, measured before that epoch's update.
    pub losses: Vec<f64>,
}

/// Runs the full-batch loop from a given initial state over prebuilt adjacencies.
pub fn train_from_state(
    adj_left: &SparseMatrix,
    adj_right: &SparseMatrix,
    positives: &[(usize, usize)],
    mut state: EmbeddingState,
    enc_cfg: &EncoderConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_cfg.validate()?;
    enc_cfg.validate()?;
    if positives.is_empty() {
        return Err(Error::Invalid("training split is empty".into()));
    }
    let n_left = state.features_left.n_rows();
    let n_right = state.features_right.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    let shapes: Vec<usize> = state.params_mut().iter().map(|p| p.len()).collect();
    let mut opt = OptimizerState::new(train_cfg.optimizer, &shapes);
    let mut losses = Vec::with_capacity(train_cfg.n_epochs);

    for epoch in 0..train_cfg.n_epochs {
        let negatives =
            sample_negatives(positives, n_left, n_right, train_cfg.n_negatives, &mut rng)?;
        let grads = {
            let pass = forward(adj_left, adj_right, &state, enc_cfg)?;
            let out = margin_rank_loss(&pass.left, &pass.right, positives, &negatives, train_cfg.margin)?;
            if !out.loss.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("loss at epoch {epoch}"),
                });
            }
            losses.push(out.loss);
            backward(&out.grad_left, &out.grad_right, &pass.tape, enc_cfg)?
        };
        optimizer_step(&mut state.params_mut(), &grads.as_slices(), &mut opt, train_cfg)
            .map_err(|e| match e {
                Error::NonFinite { context } => Error::NonFinite {
                    context: format!("{context} (epoch {epoch})"),
                },
                other => other,
            })?;
    }
    Ok(TrainOutcome { state, losses })
}

/// Builds both adjacencies, initializes from `enc_cfg.seed` and trains on the
/// train split.
pub fn train(
    pair: &GraphPair,
    adj_cfg: &AdjacencyConfig,
    enc_cfg: &EncoderConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let adj_left = build_adjacency(&pair.left, adj_cfg)?;
    let adj_right = build_adjacency(&pair.right, adj_cfg)?;
    let state = init_state(enc_cfg, pair.left.entity_count, pair.right.entity_count)?;
    let positives = pair.alignment.with_role(Role::Train);
    train_from_state(&adj_left, &adj_right, &positives, state, enc_cfg, train_cfg)
}

pub fn write_loss_tsv<W: Write>(losses: &[f64], mut out: W) -> std::io::Result<()> {
    writeln!(out, "epoch\tloss")?;
    for (epoch, loss) in losses.iter().enumerate() {
        writeln!(out, "{epoch}\t{loss:?}")?;
    }
    Ok(())
}
