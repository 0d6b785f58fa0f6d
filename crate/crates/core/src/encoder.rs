//! Multi-layer GCN encoder shared by both graphs, with hand-derived gradients.
//!
//! Per graph and layer `i`:
//!
//! ```text
//! H0      = normalize_rows(X)          (optional)
//! P_i     = Â · H_i
//! Q_i     = P_i · W_i                  (only when weights are enabled)
//! H_{i+1} = ReLU(Q_i)                  (identity on the last layer)
//! ```
//!
//! Without weights the encoder is a fixed function of the node features, so the
//! feature matrices are the only trainable parameters.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{row_l2_normalize, spmm, DenseMatrix, SparseMatrix};

pub const DEFAULT_DIM: usize = 200;
pub const MAX_LAYERS: usize = 4;

/// Standard deviation of the normal distribution the node features are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitScale {
    /// std = 1
    Unit,
    /// std = dim^{-1/2}
    Scaled,
    Std(f64),
}

impl InitScale {
    pub fn std(&self, dim: usize) -> f64 {
        match *self {
            InitScale::Unit => 1.0,
            InitScale::Scaled => 1.0 / (dim as f64).sqrt(),
            InitScale::Std(s) => s,
        }
    }

    /// How the preset was interpreted, for reports.
    pub fn describe(&self, dim: usize) -> String {
        match self {
            InitScale::Unit => "unit: N(0, 1)".to_string(),
            InitScale::Scaled => format!("scaled: N(0, std = d^-1/2 = {})", self.std(dim)),
            InitScale::Std(s) => format!("explicit: N(0, std = {s})"),
        }
    }
}

impl fmt::Display for InitScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitScale::Unit => f.write_str("unit"),
            InitScale::Scaled => f.write_str("scaled"),
            InitScale::Std(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for InitScale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(InitScale::Unit),
            "scaled" => Ok(InitScale::Scaled),
            other => match other.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Ok(InitScale::Std(v)),
                _ => Err(Error::Config(format!(
                    "init must be 'unit', 'scaled' or a non-negative std, got '{other}'"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub n_layers: usize,
    pub dim: usize,
    pub use_weights: bool,
    pub init: InitScale,
    pub normalize_features: bool,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            n_layers: 2,
            dim: DEFAULT_DIM,
            use_weights: false,
            init: InitScale::Unit,
            normalize_features: true,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("encoder dim must be positive".into()));
        }
        if !(1..=MAX_LAYERS).contains(&self.n_layers) {
            return Err(Error::Config(format!(
                "encoder layers must be in 1..={MAX_LAYERS}, got {}",
                self.n_layers
            )));
        }
        Ok(())
    }

    pub fn init_std(&self) -> f64 {
        self.init.std(self.dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingState {
    pub features_left: DenseMatrix,
    pub features_right: DenseMatrix,
    /// One `dim × dim` matrix per layer, shared by both graphs.
    pub weights: Option<Vec<DenseMatrix>>,
}

impl EmbeddingState {
    pub fn parameter_count(&self) -> usize {
        let features = self.features_left.as_slice().len() + self.features_right.as_slice().len();
        let weights: usize = self
            .weights
            .iter()
            .flatten()
            .map(|w| w.as_slice().len())
            .sum();
        features + weights
    }

    /// Flat views of every trainable tensor, in a fixed order.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![
            self.features_left.as_mut_slice(),
            self.features_right.as_mut_slice(),
        ];
        if let Some(ws) = self.weights.as_mut() {
            out.extend(ws.iter_mut().map(DenseMatrix::as_mut_slice));
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.features_left.n_cols()
    }
}

pub fn init_state(cfg: &EncoderConfig, n_left: usize, n_right: usize) -> Result<EmbeddingState> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std = cfg.init_std();
    let normal = Normal::new(0.0, std)
        .map_err(|e| Error::Config(format!("invalid init std {std}: {e}")))?;
    let mut draw = |n: usize| {
        let data = (0..n * cfg.dim).map(|_| normal.sample(&mut rng)).collect();
        DenseMatrix::from_vec(n, cfg.dim, data)
    };
    let features_left = draw(n_left)?;
    let features_right = draw(n_right)?;
    let weights = if cfg.use_weights {
        // Glorot uniform
        let s = (6.0 / (2 * cfg.dim) as f64).sqrt();
        let mut ws = Vec::with_capacity(cfg.n_layers);
        for _ in 0..cfg.n_layers {
            let data = (0..cfg.dim * cfg.dim)
                .map(|_| rng.random_range(-s..=s))
                .collect();
            ws.push(DenseMatrix::from_vec(cfg.dim, cfg.dim, data)?);
        }
        Some(ws)
    } else {
        None
    };
    Ok(EmbeddingState {
        features_left,
        features_right,
        weights,
    })
}

#[derive(Debug, Clone)]
struct GraphTape {
    features: DenseMatrix,
    /// `H_0 .. H_{L-1}`: the input of every layer.
    inputs: Vec<DenseMatrix>,
    /// `P_i = Â H_i`, kept only when weights are enabled.
    propagated: Vec<DenseMatrix>,
    output_shape: (usize, usize),
}

/// Intermediate values of one forward call, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct Tape<'a> {
    adjacency: [&'a SparseMatrix; 2],
    weights: Option<&'a [DenseMatrix]>,
    graphs: [GraphTape; 2],
    n_layers: usize,
    normalize_features: bool,
}

#[derive(Debug, Clone)]
pub struct ForwardPass<'a> {
    pub left: DenseMatrix,
    pub right: DenseMatrix,
    pub tape: Tape<'a>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub features_left: DenseMatrix,
    pub features_right: DenseMatrix,
    pub weights: Option<Vec<DenseMatrix>>,
}

impl Gradients {
    pub fn as_slices(&self) -> Vec<&[f64]> {
        let mut out = vec![self.features_left.as_slice(), self.features_right.as_slice()];
        if let Some(ws) = self.weights.as_ref() {
            out.extend(ws.iter().map(DenseMatrix::as_slice));
        }
        out
    }
}

fn relu_in_place(m: &mut DenseMatrix) {
    m.as_mut_slice().iter_mut().for_each(|v| {
        if *v < 0.0 {
            *v = 0.0
        }
    });
}

fn encode_graph(
    adj: &SparseMatrix,
    features: &DenseMatrix,
    weights: Option<&[DenseMatrix]>,
    cfg: &EncoderConfig,
    side: &str,
) -> Result<(DenseMatrix, GraphTape)> {
    if adj.n_rows() != features.n_rows() || adj.n_cols() != features.n_rows() {
        return Err(Error::shape(
            "forward",
            format!("{side} adjacency {0}x{0}", features.n_rows()),
            format!("{}x{}", adj.n_rows(), adj.n_cols()),
        ));
    }
    let mut h = if cfg.normalize_features {
        row_l2_normalize(features)
    } else {
        features.clone()
    };
    let mut inputs = Vec::with_capacity(cfg.n_layers);
    let mut propagated = Vec::new();
    for layer in 0..cfg.n_layers {
        let p = spmm(adj, &h)?;
        let mut q = match weights {
            Some(ws) => {
                let q = p.matmul(&ws[layer])?;
                propagated.push(p);
                q
            }
            None => p,
        };
        if layer + 1 < cfg.n_layers {
            relu_in_place(&mut q);
        }
        inputs.push(std::mem::replace(&mut h, q));
    }
    h.ensure_finite(|| format!("{side} encoder output"))?;
    let output_shape = h.shape();
    Ok((
        h,
        GraphTape {
            features: features.clone(),
            inputs,
            propagated,
            output_shape,
        },
    ))
}

pub fn forward<'a>(
    adj_left: &'a SparseMatrix,
    adj_right: &'a SparseMatrix,
    state: &'a EmbeddingState,
    cfg: &EncoderConfig,
) -> Result<ForwardPass<'a>> {
    cfg.validate()?;
    let weights = match (&state.weights, cfg.use_weights) {
        (Some(ws), true) if ws.len() == cfg.n_layers => Some(ws.as_slice()),
        (None, false) => None,
        _ => {
            return Err(Error::Invalid(format!(
                "state weights do not match config (use_weights={}, layers={})",
                cfg.use_weights, cfg.n_layers
            )))
        }
    };
    let (left, tape_l) = encode_graph(adj_left, &state.features_left, weights, cfg, "left")?;
    let (right, tape_r) = encode_graph(adj_right, &state.features_right, weights, cfg, "right")?;
    Ok(ForwardPass {
        left,
        right,
        tape: Tape {
            adjacency: [adj_left, adj_right],
            weights,
            graphs: [tape_l, tape_r],
            n_layers: cfg.n_layers,
            normalize_features: cfg.normalize_features,
        },
    })
}

/// Forward pass without keeping the tape.
pub fn encode(
    adj_left: &SparseMatrix,
    adj_right: &SparseMatrix,
    state: &EmbeddingState,
    cfg: &EncoderConfig,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let pass = forward(adj_left, adj_right, state, cfg)?;
    Ok((pass.left, pass.right))
}

/// Vector-Jacobian product of `x / ‖x‖` per row; zero rows get zero gradient.
fn normalize_backward(x: &DenseMatrix, grad: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(x.n_rows(), x.n_cols());
    for i in 0..x.n_rows() {
        let xi = x.row(i);
        let gi = grad.row(i);
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let dot: f64 = xi.iter().zip(gi).map(|(a, b)| a * b).sum();
        let n3 = norm * norm * norm;
        for ((o, &xv), &gv) in out.row_mut(i).iter_mut().zip(xi).zip(gi) {
            *o = gv / norm - xv * dot / n3;
        }
    }
    out
}

fn backward_graph(
    adj: &SparseMatrix,
    tape: &GraphTape,
    weights: Option<&[DenseMatrix]>,
    grad_out: &DenseMatrix,
    n_layers: usize,
    normalize: bool,
    weight_grads: &mut Option<Vec<DenseMatrix>>,
) -> Result<DenseMatrix> {
    let adj_t = adj.transpose();
    let mut grad = grad_out.clone();
    for layer in (0..n_layers).rev() {
        if layer + 1 < n_layers {
            // ReLU output > 0 exactly where the pre-activation was positive
            let out = &tape.inputs[layer + 1];
            for (g, &o) in grad.as_mut_slice().iter_mut().zip(out.as_slice()) {
                if o <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        let grad_p = match (weights, weight_grads.as_mut()) {
            (Some(ws), Some(wg)) => {
                wg[layer].add_assign(&tape.propagated[layer].t_matmul(&grad)?)?;
                grad.matmul(&ws[layer].transpose())?
            }
            _ => grad,
        };
        grad = spmm(&adj_t, &grad_p)?;
    }
    Ok(if normalize {
        normalize_backward(&tape.features, &grad)
    } else {
        grad
    })
}

/// Gradients of a scalar loss with respect to the features (and shared weights),
/// given its gradients with respect to the encoder outputs.
pub fn backward(
    grad_out_left: &DenseMatrix,
    grad_out_right: &DenseMatrix,
    tape: &Tape<'_>,
    cfg: &EncoderConfig,
) -> Result<Gradients> {
    if cfg.n_layers != tape.n_layers
        || cfg.use_weights != tape.weights.is_some()
        || cfg.normalize_features != tape.normalize_features
    {
        return Err(Error::Invalid(
            "tape was produced under a different encoder config".into(),
        ));
    }
    for (g, t, side) in [
        (grad_out_left, &tape.graphs[0], "left"),
        (grad_out_right, &tape.graphs[1], "right"),
    ] {
        if g.shape() != t.output_shape {
            return Err(Error::shape(
                "backward",
                format!("{side} gradient {:?}", t.output_shape),
                format!("{:?}", g.shape()),
            ));
        }
    }
    let mut weight_grads = tape
        .weights
        .map(|ws| ws.iter().map(|w| DenseMatrix::zeros(w.n_rows(), w.n_cols())).collect());
    let features_left = backward_graph(
        tape.adjacency[0],
        &tape.graphs[0],
        tape.weights,
        grad_out_left,
        tape.n_layers,
        tape.normalize_features,
        &mut weight_grads,
    )?;
    let features_right = backward_graph(
        tape.adjacency[1],
        &tape.graphs[1],
        tape.weights,
        grad_out_right,
        tape.n_layers,
        tape.normalize_features,
        &mut weight_grads,
    )?;
    Ok(Gradients {
        features_left,
        features_right,
        weights: weight_grads,
    })
}
